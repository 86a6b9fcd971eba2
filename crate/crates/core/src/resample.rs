//! Frame resampling along the time axis and its layer-wise schedules.
//!
//! Downsampling keeps every `S`-th frame; upsampling holds each processed
//! frame for `S` output frames. Both are free of multiply-accumulates, so
//! the savings come entirely from running recurrent sublayers on fewer
//! frames. A resampled sublayer keeps its residual at full rate.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::features::SubbandFeatures;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ResampleStrategy {
    #[default]
    None,
    /// Downsample once before the layer stack and upsample once after it.
    Pps { factor: usize },
    /// Resample both sublayers of every layer.
    #[serde(rename = "all")]
    LwrAll { factor: usize },
    /// Resample both sublayers of the listed (1-based) layers; defaults to
    /// the odd-numbered layers.
    #[serde(rename = "sync")]
    LwrSync {
        factor: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layers: Option<Vec<usize>>,
    },
    /// Resample exactly one sublayer per layer, alternating time, band,
    /// time, ... starting with the time RNN of layer 1.
    #[serde(rename = "async")]
    LwrAsync { factor: usize },
}

impl ResampleStrategy {
    pub fn factor(&self) -> usize {
        match self {
            ResampleStrategy::None => 1,
            ResampleStrategy::Pps { factor }
            | ResampleStrategy::LwrAll { factor }
            | ResampleStrategy::LwrSync { factor, .. }
            | ResampleStrategy::LwrAsync { factor } => *factor,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ResampleStrategy::None => "none".into(),
            ResampleStrategy::Pps { factor } => format!("PPS({factor})"),
            ResampleStrategy::LwrAll { factor } => format!("LWR-ALL({factor})"),
            ResampleStrategy::LwrSync { factor, .. } => format!("LWR-SYNC({factor})"),
            ResampleStrategy::LwrAsync { factor } => format!("LWR-ASYNC({factor})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerResample {
    pub time_rnn: bool,
    pub band_rnn: bool,
}

/// Resolved per-layer resampling flags. Layer `i` of `layers` is layer
/// `i + 1` in 1-based numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerResamplePlan {
    pub factor: usize,
    /// Whether the whole stack runs at the reduced rate.
    pub pre_post: bool,
    pub layers: Vec<LayerResample>,
}

impl LayerResamplePlan {
    /// Frames the stack itself sees, given the input frame count.
    pub fn stack_frames(&self, frames: usize) -> usize {
        if self.pre_post {
            frames.div_ceil(self.factor)
        } else {
            frames
        }
    }

    pub fn resampled_sublayers(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.time_rnn as usize + l.band_rnn as usize)
            .sum()
    }
}

/// Expands a strategy into per-layer flags.
pub fn plan_resampling(
    strategy: &ResampleStrategy,
    num_layers: usize,
) -> Result<LayerResamplePlan> {
    let factor = strategy.factor();
    if factor == 0 {
        return Err(config_err("resampling factor must be >= 1"));
    }
    let mut layers = vec![LayerResample::default(); num_layers];
    let mut pre_post = false;
    match strategy {
        ResampleStrategy::None => {}
        ResampleStrategy::Pps { .. } => pre_post = true,
        ResampleStrategy::LwrAll { .. } => {
            layers.fill(LayerResample {
                time_rnn: true,
                band_rnn: true,
            });
        }
        ResampleStrategy::LwrSync {
            layers: targets, ..
        } => {
            let targets: Vec<usize> = match targets {
                Some(t) => t.clone(),
                None => (1..=num_layers).step_by(2).collect(),
            };
            for &t in &targets {
                if t == 0 || t > num_layers {
                    return Err(config_err(format!(
                        "lwr.layers entry {t} is outside 1..={num_layers}"
                    )));
                }
                layers[t - 1] = LayerResample {
                    time_rnn: true,
                    band_rnn: true,
                };
            }
        }
        ResampleStrategy::LwrAsync { .. } => {
            for (i, l) in layers.iter_mut().enumerate() {
                let time_turn = i % 2 == 0;
                *l = LayerResample {
                    time_rnn: time_turn,
                    band_rnn: !time_turn,
                };
            }
        }
    }
    Ok(LayerResamplePlan {
        factor,
        pre_post,
        layers,
    })
}

/// Keeps frames `0, S, 2S, ...`.
pub fn downsample_t(features: &SubbandFeatures, factor: usize) -> SubbandFeatures {
    let (k, t, n) = features.shape();
    let factor = factor.max(1);
    let kept = t.div_ceil(factor);
    let mut out = SubbandFeatures::zeros(k, kept, n);
    for band in 0..k {
        for (j, src) in (0..t).step_by(factor).enumerate() {
            out.cell_mut(band, j)
                .copy_from_slice(features.cell(band, src));
        }
    }
    out
}

/// Zero-order hold back to `target_frames`: output frame `t` copies input
/// frame `t / S`.
pub fn upsample_t(
    features: &SubbandFeatures,
    factor: usize,
    target_frames: usize,
) -> Result<SubbandFeatures> {
    let (k, t, n) = features.shape();
    let factor = factor.max(1);
    if t != target_frames.div_ceil(factor) {
        return Err(shape_err(format!(
            "{t} frames cannot be held by {factor} to {target_frames} frames"
        )));
    }
    let mut out = SubbandFeatures::zeros(k, target_frames, n);
    for band in 0..k {
        for dst in 0..target_frames {
            out.cell_mut(band, dst)
                .copy_from_slice(features.cell(band, dst / factor));
        }
    }
    Ok(out)
}

fn add_into(out: &mut SubbandFeatures, other: &SubbandFeatures) {
    for (o, v) in out.data_mut().iter_mut().zip(other.data()) {
        *o += v;
    }
}

/// `x + hold(sublayer(select(x)))`: the sublayer sees every `S`-th frame,
/// skipped frames reuse the held result, and the unprocessed input is added
/// back at full rate.
pub fn resampled_sublayer<F>(
    features: &SubbandFeatures,
    factor: usize,
    sublayer: F,
) -> Result<SubbandFeatures>
where
    F: FnOnce(&SubbandFeatures) -> Result<SubbandFeatures>,
{
    let frames = features.frames();
    let processed = if factor <= 1 {
        sublayer(features)?
    } else {
        let y = sublayer(&downsample_t(features, factor))?;
        upsample_t(&y, factor, frames)?
    };
    if processed.shape() != features.shape() {
        return Err(shape_err(format!(
            "sublayer returned {:?} for input {:?}",
            processed.shape(),
            features.shape()
        )));
    }
    let mut out = features.clone();
    add_into(&mut out, &processed);
    Ok(out)
}

/// Runs `inner` on the downsampled tensor and holds its output back to the
/// input frame count.
pub fn pps_wrap<F>(features: &SubbandFeatures, factor: usize, inner: F) -> Result<SubbandFeatures>
where
    F: FnOnce(SubbandFeatures) -> Result<SubbandFeatures>,
{
    if factor <= 1 {
        return inner(features.clone());
    }
    let frames = features.frames();
    let y = inner(downsample_t(features, factor))?;
    upsample_t(&y, factor, frames)
}
