//! Model configuration, its JSON form, and the named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bands::BandConfig;
use crate::dsp::StftConfig;
use crate::error::{config_err, Error, Result};
use crate::prune::{prune_schedule, PruneSchedule, PruneStrategy};
use crate::resample::{plan_resampling, LayerResamplePlan, ResampleStrategy};

/// Feature dimension of canonical-v1, fixed by [`crate::macs::calibrate`].
pub const CANONICAL_FEATURE_DIM: usize = 132;
/// Recurrent hidden size of canonical-v1, fixed by [`crate::macs::calibrate`].
pub const CANONICAL_HIDDEN_DIM: usize = 70;
pub const CANONICAL_LAYERS: usize = 6;

fn default_group_size() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Architecture and optimization switches of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub stft: StftConfig,
    pub bands: BandConfig,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Width of the mask head's hidden layer; `4 * feature_dim` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_hidden_dim: Option<usize>,
    pub num_layers: usize,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default)]
    pub lwr: ResampleStrategy,
    #[serde(default)]
    pub sbp: PruneStrategy,
    /// Unidirectional time RNN when set, bidirectional otherwise.
    #[serde(default = "default_true")]
    pub time_rnn_causal: bool,
    #[serde(default = "default_true")]
    pub band_rnn_bidirectional: bool,
}

impl ModelConfig {
    /// The calibrated 23-band, 6-layer baseline with every optimization off.
    pub fn canonical_v1() -> Self {
        Self {
            name: "canonical-v1".into(),
            stft: StftConfig::default(),
            bands: BandConfig::canonical_23(),
            feature_dim: CANONICAL_FEATURE_DIM,
            hidden_dim: CANONICAL_HIDDEN_DIM,
            mask_hidden_dim: Some(4 * CANONICAL_FEATURE_DIM),
            num_layers: CANONICAL_LAYERS,
            group_size: 1,
            lwr: ResampleStrategy::None,
            sbp: PruneStrategy::None,
            time_rnn_causal: true,
            band_rnn_bidirectional: true,
        }
    }

    pub fn band_count(&self) -> usize {
        self.bands.count()
    }

    pub fn mask_hidden(&self) -> usize {
        self.mask_hidden_dim.unwrap_or(4 * self.feature_dim)
    }

    pub fn band_rnn_directions(&self) -> usize {
        if self.band_rnn_bidirectional {
            2
        } else {
            1
        }
    }

    pub fn time_rnn_directions(&self) -> usize {
        if self.time_rnn_causal {
            1
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.bands.validate(self.stft.bins())?;
        if self.feature_dim == 0 || self.hidden_dim == 0 {
            return Err(config_err("feature_dim and hidden_dim must be positive"));
        }
        if self.mask_hidden() == 0 {
            return Err(config_err("mask_hidden_dim must be positive"));
        }
        if self.group_size == 0 {
            return Err(config_err("group_size must be >= 1"));
        }
        for (field, value) in [
            ("feature_dim", self.feature_dim),
            ("hidden_dim", self.hidden_dim),
        ] {
            if value % self.group_size != 0 {
                return Err(config_err(format!(
                    "{field} ({value}) is not divisible by group_size ({})",
                    self.group_size
                )));
            }
        }
        self.resample_plan()?;
        self.prune_schedule()?;
        Ok(())
    }

    pub fn resample_plan(&self) -> Result<LayerResamplePlan> {
        plan_resampling(&self.lwr, self.num_layers)
    }

    pub fn prune_schedule(&self) -> Result<PruneSchedule> {
        prune_schedule(self.sbp, self.num_layers, self.band_count())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config json: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_groups(mut self, g: usize) -> Self {
        self.group_size = g;
        self
    }

    pub fn with_lwr(mut self, lwr: ResampleStrategy) -> Self {
        self.lwr = lwr;
        self
    }

    pub fn with_sbp(mut self, sbp: PruneStrategy) -> Self {
        self.sbp = sbp;
        self
    }

    /// Human-readable list of the enabled optimizations.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.lwr != ResampleStrategy::None {
            parts.push(self.lwr.label());
        }
        if self.sbp != PruneStrategy::None {
            parts.push(self.sbp.label());
        }
        if self.group_size > 1 {
            parts.push(format!("GR(g={})", self.group_size));
        }
        if parts.is_empty() {
            "baseline".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// A configuration variant together with the MACs figure reported for it.
#[derive(Debug, Clone)]
pub struct ReportedVariant {
    pub label: &'static str,
    pub config: ModelConfig,
    pub reported_gmacs: f64,
}

/// Every row of the reference cost comparison, derived from `base`.
pub fn reported_variants(base: &ModelConfig) -> Vec<ReportedVariant> {
    let async16 = base
        .clone()
        .with_lwr(ResampleStrategy::LwrAsync { factor: 16 });
    let rows: [(&'static str, ModelConfig, f64); 10] = [
        ("BSRNN", base.clone(), 1.84),
        ("+GR", base.clone().with_groups(2), 1.09),
        (
            "+PPS(4)",
            base.clone().with_lwr(ResampleStrategy::Pps { factor: 4 }),
            0.55,
        ),
        (
            "+LWR-ALL(4)",
            base.clone()
                .with_lwr(ResampleStrategy::LwrAll { factor: 4 }),
            0.55,
        ),
        (
            "+LWR-SYNC(4)",
            base.clone().with_lwr(ResampleStrategy::LwrSync {
                factor: 4,
                layers: None,
            }),
            1.19,
        ),
        (
            "+LWR-ASYNC(4)",
            base.clone()
                .with_lwr(ResampleStrategy::LwrAsync { factor: 4 }),
            1.19,
        ),
        ("+LWR-ASYNC(16)", async16.clone(), 1.03),
        (
            "++SBP-A",
            async16
                .clone()
                .with_sbp(PruneStrategy::Aggressive { l: base.num_layers }),
            0.96,
        ),
        (
            "++SBP-P",
            async16.clone().with_sbp(PruneStrategy::Progressive),
            0.99,
        ),
        (
            "+++GR",
            async16.with_sbp(PruneStrategy::Progressive).with_groups(2),
            0.62,
        ),
    ];
    rows.into_iter()
        .map(|(label, config, reported_gmacs)| ReportedVariant {
            label,
            config: config.with_name(label),
            reported_gmacs,
        })
        .collect()
}

/// Baseline, +GR, +LWR-ASYNC(16), ++SBP-P and +++GR.
pub fn canonical_chain(base: &ModelConfig) -> Vec<ReportedVariant> {
    reported_variants(base)
        .into_iter()
        .filter(|v| ["BSRNN", "+GR", "+LWR-ASYNC(16)", "++SBP-P", "+++GR"].contains(&v.label))
        .collect()
}
