//! Naive reference implementation used as a test oracle. Everything runs in
//! f64 with plain loops, reads weights straight from the tensor store by
//! name, and counts every multiply it performs.
#![allow(dead_code, clippy::needless_range_loop)]

use bsrnn_core::bands::BandConfig;
use bsrnn_core::dsp::ComplexSpectrogram;
use bsrnn_core::prune::PruneStrategy;
use bsrnn_core::resample::ResampleStrategy;
use bsrnn_core::weights::{SplitMix64, TensorStore};
use bsrnn_core::ModelConfig;

/// `x[band][frame][channel]`
pub type Grid = Vec<Vec<Vec<f64>>>;

pub struct Oracle<'a> {
    store: &'a TensorStore,
    cfg: &'a ModelConfig,
    pub macs: u64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM direction over `seq` from zero state, outputs in the input's
/// time order. Gates stacked i, f, g, o. Returns the multiplies performed.
pub fn lstm_ref(
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    seq: &[Vec<f64>],
    reverse: bool,
) -> (Vec<Vec<f64>>, u64) {
    let h_dim = bias.len() / 4;
    let i_dim = seq.first().map_or(0, Vec::len);
    let mut macs = 0;
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut out = vec![Vec::new(); seq.len()];
    let order: Vec<usize> = if reverse {
        (0..seq.len()).rev().collect()
    } else {
        (0..seq.len()).collect()
    };
    for t in order {
        let x = &seq[t];
        let mut z = bias.to_vec();
        for r in 0..4 * h_dim {
            for i in 0..i_dim {
                z[r] += w_ih[r * i_dim + i] * x[i];
                macs += 1;
            }
            for j in 0..h_dim {
                z[r] += w_hh[r * h_dim + j] * h[j];
                macs += 1;
            }
        }
        for j in 0..h_dim {
            let ig = sigmoid(z[j]);
            let fg = sigmoid(z[h_dim + j]);
            let gg = z[2 * h_dim + j].tanh();
            let og = sigmoid(z[3 * h_dim + j]);
            c[j] = fg * c[j] + ig * gg;
            h[j] = og * c[j].tanh();
        }
        out[t] = h.clone();
    }
    (out, macs)
}

/// Channel shuffle written from its definition: channel `c` of group
/// `c / (C/g)` at offset `c % (C/g)` lands at `offset * g + group`.
pub fn shuffle_ref(x: &[f64], g: usize) -> Vec<f64> {
    let per = x.len() / g;
    let mut y = vec![0.0; x.len()];
    for (c, v) in x.iter().enumerate() {
        y[(c % per) * g + c / per] = *v;
    }
    y
}

impl<'a> Oracle<'a> {
    pub fn new(cfg: &'a ModelConfig, store: &'a TensorStore) -> Self {
        Self {
            store,
            cfg,
            macs: 0,
        }
    }

    fn t(&self, name: &str) -> Vec<f64> {
        let t = self
            .store
            .get(name)
            .unwrap_or_else(|| panic!("oracle: no tensor {name}"));
        t.data.iter().map(|&v| v as f64).collect()
    }

    fn dense(&mut self, prefix: &str, x: &[f64]) -> Vec<f64> {
        let w = self.t(&format!("{prefix}.weight"));
        let b = self.t(&format!("{prefix}.bias"));
        let out_dim = b.len();
        assert_eq!(w.len(), out_dim * x.len());
        let mut y = b.clone();
        for o in 0..out_dim {
            for i in 0..x.len() {
                y[o] += w[o * x.len() + i] * x[i];
                self.macs += 1;
            }
        }
        y
    }

    fn norm(&self, prefix: &str, x: &[f64]) -> Vec<f64> {
        let gamma = self.t(&format!("{prefix}.norm.gamma"));
        let beta = self.t(&format!("{prefix}.norm.beta"));
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + 1e-5).sqrt();
        (0..x.len())
            .map(|i| (x[i] - mean) * inv * gamma[i] + beta[i])
            .collect()
    }

    fn lstm(&mut self, prefix: &str, seq: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
        let w_ih = self.t(&format!("{prefix}.w_ih"));
        let w_hh = self.t(&format!("{prefix}.w_hh"));
        let bias = self.t(&format!("{prefix}.bias"));
        let (out, macs) = lstm_ref(&w_ih, &w_hh, &bias, seq, reverse);
        self.macs += macs;
        out
    }

    /// norm -> grouped (bi)LSTM -> channel shuffle -> projection. No residual.
    fn sublayer(&mut self, layer: usize, kind: &str, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let prefix = format!("layers.{layer}.{kind}");
        let bidir = if kind == "band_rnn" {
            self.cfg.band_rnn_bidirectional
        } else {
            !self.cfg.time_rnn_causal
        };
        let g = self.cfg.group_size;
        let n = self.cfg.feature_dim;
        let normed: Vec<Vec<f64>> = seq.iter().map(|x| self.norm(&prefix, x)).collect();
        let per_in = n / g;
        let mut joined = vec![Vec::new(); seq.len()];
        for j in 0..g {
            let part: Vec<Vec<f64>> = normed
                .iter()
                .map(|x| x[j * per_in..(j + 1) * per_in].to_vec())
                .collect();
            let fwd = self.lstm(&format!("{prefix}.groups.{j}.fwd"), &part, false);
            let bwd = if bidir {
                Some(self.lstm(&format!("{prefix}.groups.{j}.bwd"), &part, true))
            } else {
                None
            };
            for t in 0..seq.len() {
                joined[t].extend_from_slice(&fwd[t]);
                if let Some(b) = &bwd {
                    joined[t].extend_from_slice(&b[t]);
                }
            }
        }
        joined
            .iter()
            .map(|y| self.dense(&format!("{prefix}.proj"), &shuffle_ref(y, g)))
            .collect()
    }

    fn flags(&self, layer: usize) -> (bool, bool) {
        // (band_rnn resampled, time_rnn resampled)
        match &self.cfg.lwr {
            ResampleStrategy::None | ResampleStrategy::Pps { .. } => (false, false),
            ResampleStrategy::LwrAll { .. } => (true, true),
            ResampleStrategy::LwrSync { layers, .. } => {
                let on = match layers {
                    Some(ls) => ls.contains(&(layer + 1)),
                    None => (layer + 1) % 2 == 1,
                };
                (on, on)
            }
            ResampleStrategy::LwrAsync { .. } => {
                let time = (layer + 1) % 2 == 1;
                (!time, time)
            }
        }
    }

    fn skip(&self, layer: usize) -> usize {
        match self.cfg.sbp {
            PruneStrategy::None => 0,
            PruneStrategy::Aggressive { l } => l,
            PruneStrategy::Progressive => layer + 1,
        }
    }

    /// The dual-path stack on `x[band][frame]`.
    pub fn stack(&mut self, x: &Grid) -> Grid {
        let factor = self.cfg.lwr.factor().max(1);
        if let ResampleStrategy::Pps { .. } = self.cfg.lwr {
            let frames = x[0].len();
            let down: Grid = x
                .iter()
                .map(|b| b.iter().step_by(factor).cloned().collect())
                .collect();
            let y = self.layers(down);
            return y
                .iter()
                .map(|b| (0..frames).map(|t| b[t / factor].clone()).collect())
                .collect();
        }
        self.layers(x.clone())
    }

    fn layers(&mut self, mut x: Grid) -> Grid {
        let k_bands = x.len();
        let frames = x[0].len();
        let factor = self.cfg.lwr.factor().max(1);
        for l in 0..self.cfg.num_layers {
            let (band_rs, time_rs) = self.flags(l);

            let s = if band_rs { factor } else { 1 };
            let mut held: Grid = vec![vec![Vec::new(); frames]; k_bands];
            for t in (0..frames).step_by(s) {
                let seq: Vec<Vec<f64>> = (0..k_bands).map(|k| x[k][t].clone()).collect();
                let y = self.sublayer(l, "band_rnn", &seq);
                for k in 0..k_bands {
                    held[k][t] = y[k].clone();
                }
            }
            for k in 0..k_bands {
                for t in 0..frames {
                    let src = &held[k][t / s * s];
                    for (v, d) in x[k][t].iter_mut().zip(src) {
                        *v += d;
                    }
                }
            }

            let s = if time_rs { factor } else { 1 };
            let active = k_bands - self.skip(l);
            for k in 0..active {
                let seq: Vec<Vec<f64>> = (0..frames).step_by(s).map(|t| x[k][t].clone()).collect();
                let y = self.sublayer(l, "time_rnn", &seq);
                for t in 0..frames {
                    for (v, d) in x[k][t].iter_mut().zip(&y[t / s]) {
                        *v += d;
                    }
                }
            }
        }
        x
    }

    pub fn band_split(&mut self, spec: &ComplexSpectrogram) -> Grid {
        let bands = &self.cfg.bands;
        (0..bands.count())
            .map(|k| {
                let (lo, hi) = bands.boundaries[k];
                (0..spec.frames())
                    .map(|t| {
                        let mut v: Vec<f64> = (lo..hi).map(|f| spec.get(f, t).re).collect();
                        v.extend((lo..hi).map(|f| spec.get(f, t).im));
                        let prefix = format!("band_split.{k}");
                        let normed = self.norm(&prefix, &v);
                        self.dense(&format!("{prefix}.proj"), &normed)
                    })
                    .collect()
            })
            .collect()
    }

    /// Complex mask `[bin][frame] = (re, im)`.
    pub fn mask(&mut self, x: &Grid) -> Vec<Vec<(f64, f64)>> {
        let bands = self.cfg.bands.clone();
        let frames = x[0].len();
        let mut m = vec![vec![(0.0, 0.0); frames]; bands.total_bins()];
        for k in 0..bands.count() {
            let (lo, hi) = bands.boundaries[k];
            let w = hi - lo;
            let prefix = format!("mask.{k}");
            for t in 0..frames {
                let normed = self.norm(&prefix, &x[k][t]);
                let hidden: Vec<f64> = self
                    .dense(&format!("{prefix}.hidden"), &normed)
                    .into_iter()
                    .map(f64::tanh)
                    .collect();
                let v = self.dense(&format!("{prefix}.out"), &hidden);
                for j in 0..w {
                    m[lo + j][t] = (v[j], v[w + j]);
                }
            }
        }
        m
    }
}

pub fn grid_from(f: &bsrnn_core::SubbandFeatures) -> Grid {
    (0..f.bands())
        .map(|k| {
            (0..f.frames())
                .map(|t| f.cell(k, t).iter().map(|&v| v as f64).collect())
                .collect()
        })
        .collect()
}

/// Largest |a - b| over `scale` = max(1, max |b|).
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

pub fn flatten(g: &Grid) -> Vec<f64> {
    g.iter().flatten().flatten().copied().collect()
}

pub fn noise(len: usize, seed: u64) -> Vec<f32> {
    let mut r = SplitMix64::new(seed);
    (0..len).map(|_| r.uniform_f32(-0.5, 0.5)).collect()
}

fn pick(r: &mut SplitMix64, n: usize) -> usize {
    (r.next_u64() % n as u64) as usize
}

/// A random but valid small configuration. Dimensions stay tiny so the
/// naive oracle is quick; every optimization switch is exercised.
pub fn random_config(seed: u64) -> ModelConfig {
    let mut r = SplitMix64::new(seed);
    let mut c = ModelConfig::canonical_v1();
    c.name = format!("fuzz-{seed}");
    c.stft.fft_size = [16, 32, 64][pick(&mut r, 3)];
    c.stft.hop_size = c.stft.fft_size / [2, 4][pick(&mut r, 2)];
    let bins = c.stft.fft_size / 2 + 1;
    let mut widths = Vec::new();
    let mut left = bins;
    while left > 0 {
        let w = (1 + pick(&mut r, 6)).min(left);
        widths.push(w);
        left -= w;
    }
    c.bands = BandConfig::from_widths(&widths);
    let k = widths.len();
    c.group_size = [1, 2, 4][pick(&mut r, 3)];
    c.feature_dim = c.group_size * (1 + pick(&mut r, 3));
    c.hidden_dim = c.group_size * (1 + pick(&mut r, 3));
    c.mask_hidden_dim = Some(1 + pick(&mut r, 8));
    c.num_layers = 1 + pick(&mut r, 4);
    c.time_rnn_causal = pick(&mut r, 4) != 0;
    c.band_rnn_bidirectional = pick(&mut r, 4) != 0;
    let factor = 2 + pick(&mut r, 4);
    c.lwr = match pick(&mut r, 6) {
        0 => ResampleStrategy::None,
        1 => ResampleStrategy::Pps { factor },
        2 => ResampleStrategy::LwrAll { factor },
        3 => ResampleStrategy::LwrSync {
            factor,
            layers: None,
        },
        4 => ResampleStrategy::LwrSync {
            factor,
            layers: Some(vec![c.num_layers]),
        },
        _ => ResampleStrategy::LwrAsync { factor },
    };
    c.sbp = match pick(&mut r, 3) {
        0 => PruneStrategy::None,
        1 => PruneStrategy::Aggressive { l: pick(&mut r, k) },
        _ if k > c.num_layers => PruneStrategy::Progressive,
        _ => PruneStrategy::None,
    };
    c.validate().expect("generator emits valid configs");
    c
}

/// Full-size STFT with `K` random bands in 2..=23 and small feature widths,
/// sweeping every optimization switch over the ranges the MAC equality must
/// hold on.
pub fn sweep_config(seed: u64) -> ModelConfig {
    let mut r = SplitMix64::new(seed ^ 0xA5A5_5A5A);
    let mut c = ModelConfig::canonical_v1();
    c.name = format!("sweep-{seed}");
    let bins = c.stft.bins();
    let k = 2 + pick(&mut r, 22);
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < k - 1 {
        let cut = 1 + pick(&mut r, bins - 1);
        if !cuts.contains(&cut) {
            cuts.push(cut);
        }
    }
    cuts.sort_unstable();
    cuts.push(bins);
    let mut widths = Vec::with_capacity(k);
    let mut prev = 0;
    for cut in cuts {
        widths.push(cut - prev);
        prev = cut;
    }
    c.bands = BandConfig::from_widths(&widths);
    c.num_layers = 1 + pick(&mut r, 6);
    c.group_size = 1 + pick(&mut r, 2);
    c.feature_dim = 2 * (1 + pick(&mut r, 4));
    c.hidden_dim = 2 * (1 + pick(&mut r, 4));
    c.mask_hidden_dim = Some(2 + pick(&mut r, 6));
    let factor = [1, 4, 16][pick(&mut r, 3)];
    c.lwr = match pick(&mut r, 5) {
        0 => ResampleStrategy::None,
        1 => ResampleStrategy::Pps { factor },
        2 => ResampleStrategy::LwrAll { factor },
        3 => ResampleStrategy::LwrSync {
            factor,
            layers: None,
        },
        _ => ResampleStrategy::LwrAsync { factor },
    };
    c.sbp = match pick(&mut r, 3) {
        0 => PruneStrategy::Aggressive {
            l: pick(&mut r, 7).min(k - 1),
        },
        1 if k > c.num_layers => PruneStrategy::Progressive,
        _ => PruneStrategy::None,
    };
    c.validate().expect("sweep emits valid configs");
    c
}
