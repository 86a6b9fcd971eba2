//! Multiply-accumulate accounting.
//!
//! One multiply-accumulate counts as one MAC. Bias additions, activations,
//! normalization, resampling and the STFT pair cost nothing. Under that
//! convention:
//!
//! * a dense `I -> O` map over `n` positions costs `n * I * O`;
//! * an LSTM step costs `4 H (I + H)`, per direction;
//! * a grouped LSTM runs `g` cells of size `I/g -> H/g`, i.e. `1/g` of the
//!   ungrouped cost;
//! * a resampled sublayer runs on `ceil(T / S)` frames.
//!
//! [`analyze`] evaluates these closed forms; [`count_forward`] runs the real
//! network and tallies at the kernel call sites. The two must agree exactly.

use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::config::{reported_variants, ModelConfig};
use crate::error::{config_err, Error, Result};
use crate::features::SubbandFeatures;
use crate::model::{ForwardObserver, Model};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SublayerMacs {
    /// LSTM cells.
    pub recurrent: u64,
    /// Dense map from the LSTM outputs back to the feature dimension.
    pub projection: u64,
}

impl SublayerMacs {
    pub fn total(&self) -> u64 {
        self.recurrent + self.projection
    }
}

impl AddAssign for SublayerMacs {
    fn add_assign(&mut self, rhs: Self) {
        self.recurrent += rhs.recurrent;
        self.projection += rhs.projection;
    }
}

/// MACs per network component for one input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCounts {
    pub band_split: u64,
    pub band_rnn: Vec<SublayerMacs>,
    pub time_rnn: Vec<SublayerMacs>,
    pub mask_head: u64,
}

impl MacCounts {
    pub fn zeros(layers: usize) -> Self {
        Self {
            band_split: 0,
            band_rnn: vec![SublayerMacs::default(); layers],
            time_rnn: vec![SublayerMacs::default(); layers],
            mask_head: 0,
        }
    }

    pub fn band_rnn_total(&self) -> u64 {
        self.band_rnn.iter().map(SublayerMacs::total).sum()
    }

    pub fn time_rnn_total(&self) -> u64 {
        self.time_rnn.iter().map(SublayerMacs::total).sum()
    }

    /// All band- and time-RNN sublayers, projections included.
    pub fn rnn_total(&self) -> u64 {
        self.band_rnn_total() + self.time_rnn_total()
    }

    /// LSTM cells only.
    pub fn recurrent_total(&self) -> u64 {
        self.band_rnn
            .iter()
            .chain(&self.time_rnn)
            .map(|s| s.recurrent)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.band_split + self.rnn_total() + self.mask_head
    }
}

/// Component counts for a stretch of audio, normalized to GMAC per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacsReport {
    pub config: String,
    pub duration_seconds: f64,
    pub samples: usize,
    pub frames: usize,
    #[serde(flatten)]
    pub counts: MacCounts,
    pub total: u64,
    /// `total / (duration_seconds * 1e9)`.
    pub gmacs_per_second: f64,
}

impl MacsReport {
    fn new(config: &ModelConfig, samples: usize, frames: usize, counts: MacCounts) -> Self {
        let duration_seconds = samples as f64 / config.stft.sample_rate as f64;
        let total = counts.total();
        Self {
            config: config.name.clone(),
            duration_seconds,
            samples,
            frames,
            counts,
            total,
            gmacs_per_second: total as f64 / (duration_seconds * 1e9),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name = if self.config.is_empty() {
            "model"
        } else {
            &self.config
        };
        let _ = writeln!(s, "{name}: {:.2} G/s", self.gmacs_per_second);
        let _ = writeln!(
            s,
            "  duration {:.3} s, {} samples, {} frames, {} MACs",
            self.duration_seconds, self.samples, self.frames, self.total
        );
        let _ = writeln!(s, "  band_split  {:>14}", self.counts.band_split);
        for (l, (b, t)) in self
            .counts
            .band_rnn
            .iter()
            .zip(&self.counts.time_rnn)
            .enumerate()
        {
            let _ = writeln!(
                s,
                "  layer {:<2} band_rnn {:>14}  time_rnn {:>14}",
                l + 1,
                b.total(),
                t.total()
            );
        }
        let _ = writeln!(s, "  mask_head   {:>14}", self.counts.mask_head);
        s
    }
}

/// Closed-form component counts for an input of `frames` STFT frames.
pub fn analyze_frames(config: &ModelConfig, frames: usize) -> Result<MacCounts> {
    config.validate()?;
    let k = config.band_count() as u64;
    let n = config.feature_dim as u64;
    let h = config.hidden_dim as u64;
    let g = config.group_size as u64;
    let m = config.mask_hidden() as u64;
    let f = frames as u64;
    let widths: Vec<u64> = (0..config.band_count())
        .map(|b| config.bands.width(b) as u64)
        .collect();

    let mut counts = MacCounts::zeros(config.num_layers);
    counts.band_split = f * widths.iter().map(|w| 2 * w * n).sum::<u64>();
    counts.mask_head = f * widths.iter().map(|w| n * m + m * 2 * w).sum::<u64>();

    let plan = config.resample_plan()?;
    let schedule = config.prune_schedule()?;
    let stack = plan.stack_frames(frames) as u64;
    let reduced = (stack as usize).div_ceil(plan.factor) as u64;
    // One step of one group's cell, I/g -> H/g.
    let group_step = 4 * (h / g) * (n / g + h / g);
    let dirs_b = config.band_rnn_directions() as u64;
    let dirs_t = config.time_rnn_directions() as u64;

    for (l, flags) in plan.layers.iter().enumerate() {
        let band_frames = if flags.band_rnn { reduced } else { stack };
        let time_frames = if flags.time_rnn { reduced } else { stack };
        let active = schedule.active_bands(l) as u64;
        counts.band_rnn[l] = SublayerMacs {
            recurrent: band_frames * k * dirs_b * g * group_step,
            projection: band_frames * k * dirs_b * h * n,
        };
        counts.time_rnn[l] = SublayerMacs {
            recurrent: time_frames * active * dirs_t * g * group_step,
            projection: time_frames * active * dirs_t * h * n,
        };
    }
    Ok(counts)
}

/// Closed-form report for `duration_seconds` of audio.
pub fn analyze(config: &ModelConfig, duration_seconds: f64) -> Result<MacsReport> {
    if !(duration_seconds.is_finite() && duration_seconds > 0.0) {
        return Err(config_err(format!(
            "duration must be a positive number of seconds, got {duration_seconds}"
        )));
    }
    config.validate()?;
    let samples = config.stft.samples_for_seconds(duration_seconds);
    if samples == 0 {
        return Err(config_err("duration is shorter than one sample"));
    }
    let frames = config.stft.frames_for(samples);
    Ok(MacsReport::new(
        config,
        samples,
        frames,
        analyze_frames(config, frames)?,
    ))
}

struct Silent;

impl ForwardObserver for Silent {}

/// Runs the real enhancement pass and reports the MACs tallied on the way.
pub fn count_forward(model: &Model, waveform: &[f32]) -> Result<MacsReport> {
    let mut counts = MacCounts::zeros(model.config().num_layers);
    model.enhance_with(waveform, None, &mut counts, &mut Silent)?;
    let frames = model.config().stft.frames_for(waveform.len());
    Ok(MacsReport::new(
        model.config(),
        waveform.len(),
        frames,
        counts,
    ))
}

/// Tallies the layer stack alone on `features`; band split and mask head are
/// zero in the result.
pub fn count_forward_features(model: &Model, features: &SubbandFeatures) -> Result<MacCounts> {
    let mut counts = MacCounts::zeros(model.config().num_layers);
    model.forward_features_with(features, &mut counts, &mut Silent)?;
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub gmacs_per_second: f64,
    /// Reduction relative to the first row, in percent.
    pub reduction_percent: f64,
}

/// G/s of `base` followed by each variant, with the reduction relative to `base`.
pub fn reduction_table(
    base: (&str, &ModelConfig),
    variants: &[(String, ModelConfig)],
    duration_seconds: f64,
) -> Result<Vec<TableRow>> {
    let base_report = analyze(base.1, duration_seconds)?;
    let base_g = base_report.gmacs_per_second;
    let mut rows = vec![TableRow {
        name: base.0.to_string(),
        gmacs_per_second: base_g,
        reduction_percent: 0.0,
    }];
    for (name, cfg) in variants {
        if cfg.stft != base.1.stft {
            return Err(Error::Config(format!(
                "variant {name} uses a different STFT setup than the base"
            )));
        }
        let g = analyze(cfg, duration_seconds)?.gmacs_per_second;
        rows.push(TableRow {
            name: name.clone(),
            gmacs_per_second: g,
            reduction_percent: 100.0 * (1.0 - g / base_g),
        });
    }
    Ok(rows)
}

pub fn render_table_text(rows: &[TableRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>10}  {:>9}",
        "Method", "#MACs(G/s)", "vs base"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>10.2}  {:>8.1}%",
            r.name,
            r.gmacs_per_second,
            0.0 - r.reduction_percent
        );
    }
    s
}

pub fn render_table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("name,gmacs_per_second,reduction_percent\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.4}",
            r.name, r.gmacs_per_second, r.reduction_percent
        );
    }
    s
}

/// Allowed distance of the baseline and grouped-baseline figures from their
/// reference values.
pub const ANCHOR_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub label: String,
    pub reported: f64,
    pub computed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationCandidate {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Larger of the two anchor residuals.
    pub anchor_residual: f64,
    /// Sum of squared residuals over every reference row.
    pub squared_error: f64,
    pub rows: Vec<CalibrationRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationOutcome {
    /// Candidates meeting both anchors, best first.
    pub feasible: Vec<CalibrationCandidate>,
    /// Smallest anchor residual found, feasible or not.
    pub closest: CalibrationCandidate,
}

impl CalibrationOutcome {
    pub fn best(&self) -> Option<&CalibrationCandidate> {
        self.feasible.first()
    }
}

fn anchors(cfg: &ModelConfig) -> Result<(f64, f64)> {
    let base = analyze(cfg, 1.0)?.gmacs_per_second;
    let grouped = analyze(&cfg.clone().with_groups(2), 1.0)?.gmacs_per_second;
    Ok((base, grouped))
}

fn evaluate(template: &ModelConfig, n: usize, h: usize) -> Result<CalibrationCandidate> {
    let mut cfg = template.clone();
    cfg.feature_dim = n;
    cfg.hidden_dim = h;
    cfg.mask_hidden_dim = Some(4 * n);
    let (base, grouped) = anchors(&cfg)?;
    let anchor_residual = (base - 1.84).abs().max((grouped - 1.09).abs());
    let mut rows = Vec::new();
    let mut squared_error = 0.0;
    for v in reported_variants(&cfg) {
        let computed = analyze(&v.config, 1.0)?.gmacs_per_second;
        squared_error += (computed - v.reported_gmacs).powi(2);
        rows.push(CalibrationRow {
            label: v.label.to_string(),
            reported: v.reported_gmacs,
            computed,
        });
    }
    Ok(CalibrationCandidate {
        feature_dim: n,
        hidden_dim: h,
        anchor_residual,
        squared_error,
        rows,
    })
}

/// Searches even `(feature_dim, hidden_dim)` pairs in `[lo, hi]` for those
/// whose baseline and grouped baseline land within [`ANCHOR_TOLERANCE`] of
/// 1.84 and 1.09 G/s, ranked by squared error over all reference rows.
/// Everything else (STFT, bands, layer count, flags) comes from `template`.
pub fn calibrate(template: &ModelConfig, lo: usize, hi: usize) -> Result<CalibrationOutcome> {
    let lo = lo.max(2).next_multiple_of(2);
    let mut feasible = Vec::new();
    let mut closest: Option<(f64, usize, usize)> = None;
    for n in (lo..=hi).step_by(2) {
        for h in (lo..=hi).step_by(2) {
            let mut cfg = template.clone();
            cfg.feature_dim = n;
            cfg.hidden_dim = h;
            cfg.mask_hidden_dim = Some(4 * n);
            cfg.lwr = Default::default();
            cfg.sbp = Default::default();
            cfg.group_size = 1;
            let (base, grouped) = anchors(&cfg)?;
            let residual = (base - 1.84).abs().max((grouped - 1.09).abs());
            if closest.is_none_or(|c| residual < c.0) {
                closest = Some((residual, n, h));
            }
            if residual <= ANCHOR_TOLERANCE {
                feasible.push(evaluate(&cfg, n, h)?);
            }
        }
    }
    let (_, cn, ch) = closest.ok_or_else(|| config_err("empty calibration grid"))?;
    let mut base = template.clone();
    base.lwr = Default::default();
    base.sbp = Default::default();
    base.group_size = 1;
    let closest = evaluate(&base, cn, ch)?;
    feasible.sort_by(|a, b| a.squared_error.total_cmp(&b.squared_error));
    Ok(CalibrationOutcome { feasible, closest })
}
