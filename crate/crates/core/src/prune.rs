//! Sub-band pruning of the time RNNs.
//!
//! Bands are ordered low to high frequency, so pruning `n` bands in a layer
//! means its time RNN only sees the lowest `K - n` bands; the top `n` pass
//! through that sublayer untouched. Band RNNs always see every band.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::features::SubbandFeatures;
use crate::macs::SublayerMacs;
use crate::model::time_sublayer;
use crate::rnn::GroupedLayerWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PruneStrategy {
    #[default]
    None,
    /// Skip the highest `l` bands in every time-RNN layer.
    Aggressive { l: usize },
    /// Skip one more of the highest bands at each successive time-RNN
    /// layer, starting with one band at layer 1.
    Progressive,
}

impl PruneStrategy {
    pub fn label(&self) -> String {
        match self {
            PruneStrategy::None => "none".into(),
            PruneStrategy::Aggressive { l } => format!("SBP-A({l})"),
            PruneStrategy::Progressive => "SBP-P".into(),
        }
    }
}

/// Number of highest bands each time RNN skips; entry `i` is layer `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneSchedule {
    pub bands: usize,
    pub skip: Vec<usize>,
}

impl PruneSchedule {
    pub fn skip_count(&self, layer: usize) -> usize {
        self.skip[layer]
    }

    pub fn active_bands(&self, layer: usize) -> usize {
        self.bands - self.skip[layer]
    }

    /// Sum of skipped (band, layer) pairs.
    pub fn total_skipped(&self) -> usize {
        self.skip.iter().sum()
    }
}

pub fn prune_schedule(
    strategy: PruneStrategy,
    num_layers: usize,
    bands: usize,
) -> Result<PruneSchedule> {
    let skip = match strategy {
        PruneStrategy::None => vec![0; num_layers],
        PruneStrategy::Aggressive { l } => {
            if l >= bands {
                return Err(config_err(format!(
                    "sbp.l = {l} would prune every one of the {bands} bands"
                )));
            }
            vec![l; num_layers]
        }
        PruneStrategy::Progressive => {
            if bands <= num_layers {
                return Err(config_err(format!(
                    "progressive pruning over {num_layers} layers needs more than {num_layers} bands, got {bands}"
                )));
            }
            (1..=num_layers).collect()
        }
    };
    Ok(PruneSchedule { bands, skip })
}

/// Runs layer `layer`'s time-RNN sublayer on the active bands and passes the
/// skipped ones through bit for bit.
pub fn apply_pruned_time_rnn(
    features: &SubbandFeatures,
    weights: &GroupedLayerWeights,
    schedule: &PruneSchedule,
    layer: usize,
    factor: usize,
    macs: &mut SublayerMacs,
) -> Result<SubbandFeatures> {
    let active = schedule.active_bands(layer);
    if active >= features.bands() {
        return time_sublayer(features, weights, factor, macs);
    }
    let (low, high) = features.clone().split_bands(active);
    let low = time_sublayer(&low, weights, factor, macs)?;
    SubbandFeatures::concat_bands(low, high)
}
