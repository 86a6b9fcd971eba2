//! Band-split front end and mask-estimation head.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::ComplexSpectrogram;
use crate::error::{config_err, shape_err, Error, Result};
use crate::features::SubbandFeatures;
use crate::linalg::{Dense, LayerNorm};

/// Partition of the frequency bins into contiguous sub-bands, low to high.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    /// Half-open `[start, end)` bin ranges.
    pub boundaries: Vec<(usize, usize)>,
}

impl BandConfig {
    pub fn from_widths(widths: &[usize]) -> Self {
        let mut start = 0;
        let boundaries = widths
            .iter()
            .map(|&w| {
                let r = (start, start + w);
                start += w;
                r
            })
            .collect();
        Self { boundaries }
    }

    /// 23 bands over the 257 bins of a 512-point FFT at 16 kHz: ten 4-bin
    /// bands up to 1.25 kHz, eight 8-bin bands up to 3.25 kHz, four 24-bin
    /// bands up to 6.25 kHz and one band for the rest.
    pub fn canonical_23() -> Self {
        let mut widths = vec![4; 10];
        widths.extend([8; 8]);
        widths.extend([24; 4]);
        widths.push(257 - 40 - 64 - 96);
        Self::from_widths(&widths)
    }

    pub fn count(&self) -> usize {
        self.boundaries.len()
    }

    pub fn width(&self, band: usize) -> usize {
        let (s, e) = self.boundaries[band];
        e - s
    }

    pub fn total_bins(&self) -> usize {
        self.boundaries.last().map_or(0, |b| b.1)
    }

    /// Checks that the ranges tile `[0, bins)` with no gaps or overlaps.
    pub fn validate(&self, bins: usize) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(config_err("bands.boundaries is empty"));
        }
        let mut expected = 0;
        for (k, &(s, e)) in self.boundaries.iter().enumerate() {
            if s != expected {
                return Err(config_err(format!(
                    "bands.boundaries[{k}] starts at bin {s}, expected {expected} (gap or overlap)"
                )));
            }
            if e <= s {
                return Err(config_err(format!(
                    "bands.boundaries[{k}] = ({s}, {e}) is empty"
                )));
            }
            expected = e;
        }
        if expected != bins {
            return Err(config_err(format!(
                "bands cover {expected} bins but the spectrogram has {bins}"
            )));
        }
        Ok(())
    }
}

/// Per-band normalization and projection of the stacked real/imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct BandProjection {
    pub norm: LayerNorm,
    pub proj: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandProjectionWeights {
    pub bands: Vec<BandProjection>,
}

impl BandProjectionWeights {
    pub fn feature_dim(&self) -> usize {
        self.bands.first().map_or(0, |b| b.proj.out_dim)
    }

    pub fn check(&self, cfg: &BandConfig) -> Result<()> {
        if self.bands.len() != cfg.count() {
            return Err(shape_err(format!(
                "{} band projections for {} bands",
                self.bands.len(),
                cfg.count()
            )));
        }
        let n = self.feature_dim();
        for (k, b) in self.bands.iter().enumerate() {
            let inputs = 2 * cfg.width(k);
            if b.norm.dim() != inputs || b.proj.in_dim != inputs || b.proj.out_dim != n {
                return Err(shape_err(format!(
                    "band_split.{k}: expected {inputs} -> {n}, got norm {} and dense {} -> {}",
                    b.norm.dim(),
                    b.proj.in_dim,
                    b.proj.out_dim
                )));
            }
        }
        Ok(())
    }
}

/// Per-band mask head: norm, dense to the hidden width, tanh, dense to
/// `2 * width` outputs read as real then imaginary mask values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskBand {
    pub norm: LayerNorm,
    pub hidden: Dense,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskHeadWeights {
    pub bands: Vec<MaskBand>,
}

impl MaskHeadWeights {
    pub fn check(&self, cfg: &BandConfig, feature_dim: usize) -> Result<()> {
        if self.bands.len() != cfg.count() {
            return Err(shape_err(format!(
                "{} mask bands for {} bands",
                self.bands.len(),
                cfg.count()
            )));
        }
        for (k, b) in self.bands.iter().enumerate() {
            let w2 = 2 * cfg.width(k);
            if b.norm.dim() != feature_dim
                || b.hidden.in_dim != feature_dim
                || b.out.in_dim != b.hidden.out_dim
                || b.out.out_dim != w2
            {
                return Err(shape_err(format!(
                    "mask.{k}: expected {feature_dim} -> hidden -> {w2}"
                )));
            }
        }
        Ok(())
    }
}

/// Projects each band of each frame to a shared feature dimension.
pub fn band_split(
    spec: &ComplexSpectrogram,
    weights: &BandProjectionWeights,
    cfg: &BandConfig,
    macs: &mut u64,
) -> Result<SubbandFeatures> {
    cfg.validate(spec.bins())?;
    weights.check(cfg)?;
    let k_bands = cfg.count();
    let frames = spec.frames();
    let n = weights.feature_dim();
    let mut out = SubbandFeatures::zeros(k_bands, frames, n);
    let mut stacked = Vec::new();
    let mut normed = Vec::new();
    for (k, &(start, end)) in cfg.boundaries.iter().enumerate() {
        let width = end - start;
        let band = &weights.bands[k];
        stacked.resize(2 * width, 0.0);
        normed.resize(2 * width, 0.0);
        for t in 0..frames {
            for (j, f) in (start..end).enumerate() {
                let c = spec.get(f, t);
                stacked[j] = c.re as f32;
                stacked[width + j] = c.im as f32;
            }
            band.norm.apply_into(&stacked, &mut normed);
            band.proj.apply_into(&normed, out.cell_mut(k, t), macs);
        }
    }
    Ok(out)
}

/// Maps sub-band features to a full-resolution complex mask.
pub fn estimate_mask(
    features: &SubbandFeatures,
    head: &MaskHeadWeights,
    cfg: &BandConfig,
    macs: &mut u64,
) -> Result<ComplexSpectrogram> {
    let (k_bands, frames, n) = features.shape();
    if k_bands != cfg.count() {
        return Err(Error::Shape(format!(
            "features have {k_bands} bands, config has {}",
            cfg.count()
        )));
    }
    head.check(cfg, n)?;
    let mut mask = ComplexSpectrogram::zeros(cfg.total_bins(), frames);
    let mut normed = vec![0.0; n];
    for (k, &(start, end)) in cfg.boundaries.iter().enumerate() {
        let width = end - start;
        let band = &head.bands[k];
        let mut hidden = vec![0.0; band.hidden.out_dim];
        let mut values = vec![0.0; 2 * width];
        for t in 0..frames {
            band.norm.apply_into(features.cell(k, t), &mut normed);
            band.hidden.apply_into(&normed, &mut hidden, macs);
            for h in hidden.iter_mut() {
                *h = h.tanh();
            }
            band.out.apply_into(&hidden, &mut values, macs);
            for (j, f) in (start..end).enumerate() {
                mask.set(
                    f,
                    t,
                    Complex64::new(values[j] as f64, values[width + j] as f64),
                );
            }
        }
    }
    Ok(mask)
}

/// Elementwise complex product of a spectrogram and a mask.
pub fn apply_mask(
    noisy: &ComplexSpectrogram,
    mask: &ComplexSpectrogram,
) -> Result<ComplexSpectrogram> {
    if !noisy.same_shape(mask) {
        return Err(shape_err(format!(
            "mask is {}x{}, spectrogram is {}x{}",
            mask.bins(),
            mask.frames(),
            noisy.bins(),
            noisy.frames()
        )));
    }
    let data = noisy
        .data()
        .iter()
        .zip(mask.data())
        .map(|(a, m)| a * m)
        .collect();
    ComplexSpectrogram::from_vec(noisy.bins(), noisy.frames(), data)
}
