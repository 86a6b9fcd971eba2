//! The full enhancement pipeline: STFT, band split, the dual-path layer
//! stack, mask estimation, inverse STFT and optional observation adding.

use rayon::prelude::*;

use crate::bands::{
    apply_mask, band_split, estimate_mask, BandProjection, BandProjectionWeights, MaskBand,
    MaskHeadWeights,
};
use crate::config::ModelConfig;
use crate::dsp::{istft, observation_add, stft, OaConfig};
use crate::error::{shape_err, Error, Result};
use crate::features::SubbandFeatures;
use crate::linalg::{Dense, LayerNorm};
use crate::macs::{MacCounts, SublayerMacs};
use crate::prune::{apply_pruned_time_rnn, PruneSchedule};
use crate::resample::{pps_wrap, resampled_sublayer, LayerResamplePlan};
use crate::rnn::{GroupedLayerWeights, GroupedRnn, LstmWeights, RnnWeights};
use crate::weights::{generate, lstm_prefix, TensorStore};

/// Band-RNN and time-RNN sublayers of one dual-path layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPathLayer {
    pub band_rnn: GroupedLayerWeights,
    pub time_rnn: GroupedLayerWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub band_split: BandProjectionWeights,
    pub layers: Vec<DualPathLayer>,
    pub mask: MaskHeadWeights,
}

fn norm(store: &TensorStore, prefix: &str, dim: usize) -> Result<LayerNorm> {
    LayerNorm::new(
        store.take(&format!("{prefix}.norm.gamma"), &[dim])?,
        store.take(&format!("{prefix}.norm.beta"), &[dim])?,
    )
}

fn dense(store: &TensorStore, prefix: &str, in_dim: usize, out_dim: usize) -> Result<Dense> {
    Dense::new(
        in_dim,
        out_dim,
        store.take(&format!("{prefix}.weight"), &[out_dim, in_dim])?,
        store.take(&format!("{prefix}.bias"), &[out_dim])?,
    )
}

fn lstm(store: &TensorStore, prefix: &str, i: usize, h: usize) -> Result<LstmWeights> {
    LstmWeights::new(
        i,
        h,
        store.take(&format!("{prefix}.w_ih"), &[4 * h, i])?,
        store.take(&format!("{prefix}.w_hh"), &[4 * h, h])?,
        store.take(&format!("{prefix}.bias"), &[4 * h])?,
    )
}

fn sublayer(
    store: &TensorStore,
    config: &ModelConfig,
    layer: usize,
    kind: &str,
    dirs: usize,
) -> Result<GroupedLayerWeights> {
    let n = config.feature_dim;
    let h = config.hidden_dim;
    let g = config.group_size;
    let prefix = format!("layers.{layer}.{kind}");
    let mut groups = Vec::with_capacity(g);
    for group in 0..g {
        let forward = lstm(store, &lstm_prefix(layer, kind, group, "fwd"), n / g, h / g)?;
        let backward = if dirs == 2 {
            Some(lstm(
                store,
                &lstm_prefix(layer, kind, group, "bwd"),
                n / g,
                h / g,
            )?)
        } else {
            None
        };
        groups.push(RnnWeights { forward, backward });
    }
    Ok(GroupedLayerWeights {
        norm: norm(store, &prefix, n)?,
        rnn: GroupedRnn { groups },
        proj: dense(store, &format!("{prefix}.proj"), dirs * h, n)?,
    })
}

impl ModelWeights {
    /// Assembles structured weights, naming the first missing or misshapen tensor.
    pub fn from_store(config: &ModelConfig, store: &TensorStore) -> Result<Self> {
        config.validate()?;
        store.check_against(config)?;
        let n = config.feature_dim;
        let band_split = BandProjectionWeights {
            bands: (0..config.band_count())
                .map(|k| {
                    let w2 = 2 * config.bands.width(k);
                    let prefix = format!("band_split.{k}");
                    Ok(BandProjection {
                        norm: norm(store, &prefix, w2)?,
                        proj: dense(store, &format!("{prefix}.proj"), w2, n)?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        let layers = (0..config.num_layers)
            .map(|l| {
                Ok(DualPathLayer {
                    band_rnn: sublayer(store, config, l, "band_rnn", config.band_rnn_directions())?,
                    time_rnn: sublayer(store, config, l, "time_rnn", config.time_rnn_directions())?,
                })
            })
            .collect::<Result<_>>()?;
        let m = config.mask_hidden();
        let mask = MaskHeadWeights {
            bands: (0..config.band_count())
                .map(|k| {
                    let prefix = format!("mask.{k}");
                    Ok(MaskBand {
                        norm: norm(store, &prefix, n)?,
                        hidden: dense(store, &format!("{prefix}.hidden"), n, m)?,
                        out: dense(
                            store,
                            &format!("{prefix}.out"),
                            m,
                            2 * config.bands.width(k),
                        )?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            band_split,
            layers,
            mask,
        })
    }

    /// Seeded uniform(-0.1, 0.1) weights, as written by `gen-weights`.
    pub fn random(config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::from_store(config, &generate(config, seed))
    }
}

/// Hooks called around each sublayer of the stack. All methods default to
/// doing nothing.
pub trait ForwardObserver {
    fn band_rnn(&mut self, _layer: usize, _input: &SubbandFeatures, _output: &SubbandFeatures) {}

    /// `processed` lists the bands whose sequences went through the time RNN.
    fn time_rnn(
        &mut self,
        _layer: usize,
        _processed: &[usize],
        _input: &SubbandFeatures,
        _output: &SubbandFeatures,
    ) {
    }
}

struct NoObserver;

impl ForwardObserver for NoObserver {}

/// A configured model with its resampling plan and pruning schedule resolved.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    weights: ModelWeights,
    plan: LayerResamplePlan,
    schedule: PruneSchedule,
}

/// Checks `weights` against `config` and resolves the per-layer schedules.
pub fn build(config: ModelConfig, weights: ModelWeights) -> Result<Model> {
    Model::new(config, weights)
}

fn check_sublayer(
    w: &GroupedLayerWeights,
    config: &ModelConfig,
    path: &str,
    dirs: usize,
) -> Result<()> {
    w.check().map_err(|e| shape_err(format!("{path}: {e}")))?;
    let ok = w.feature_dim() == config.feature_dim
        && w.rnn.group_count() == config.group_size
        && w.rnn.hidden_dim() == config.hidden_dim
        && w.rnn.directions() == dirs;
    if !ok {
        return Err(shape_err(format!(
            "{path}: expected N={}, H={}, g={}, {dirs} direction(s)",
            config.feature_dim, config.hidden_dim, config.group_size
        )));
    }
    Ok(())
}

impl Model {
    pub fn new(config: ModelConfig, weights: ModelWeights) -> Result<Self> {
        config.validate()?;
        weights.band_split.check(&config.bands)?;
        if weights.band_split.feature_dim() != config.feature_dim {
            return Err(shape_err("band_split: output dim differs from feature_dim"));
        }
        weights.mask.check(&config.bands, config.feature_dim)?;
        if weights.layers.len() != config.num_layers {
            return Err(shape_err(format!(
                "layers: {} provided, config has {}",
                weights.layers.len(),
                config.num_layers
            )));
        }
        for (l, layer) in weights.layers.iter().enumerate() {
            check_sublayer(
                &layer.band_rnn,
                &config,
                &format!("layers.{l}.band_rnn"),
                config.band_rnn_directions(),
            )?;
            check_sublayer(
                &layer.time_rnn,
                &config,
                &format!("layers.{l}.time_rnn"),
                config.time_rnn_directions(),
            )?;
        }
        let plan = config.resample_plan()?;
        let schedule = config.prune_schedule()?;
        Ok(Self {
            config,
            weights,
            plan,
            schedule,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn plan(&self) -> &LayerResamplePlan {
        &self.plan
    }

    pub fn schedule(&self) -> &PruneSchedule {
        &self.schedule
    }

    pub fn forward_features(&self, features: &SubbandFeatures) -> Result<SubbandFeatures> {
        let mut counts = MacCounts::zeros(self.config.num_layers);
        self.forward_features_with(features, &mut counts, &mut NoObserver)
    }

    /// Runs the layer stack, adding every multiply-accumulate to `counts`.
    pub fn forward_features_with(
        &self,
        features: &SubbandFeatures,
        counts: &mut MacCounts,
        observer: &mut dyn ForwardObserver,
    ) -> Result<SubbandFeatures> {
        features.check_shape(
            self.config.band_count(),
            features.frames(),
            self.config.feature_dim,
        )?;
        if self.plan.pre_post {
            pps_wrap(features, self.plan.factor, |x| {
                self.run_stack(x, counts, observer)
            })
        } else {
            self.run_stack(features.clone(), counts, observer)
        }
    }

    fn run_stack(
        &self,
        mut x: SubbandFeatures,
        counts: &mut MacCounts,
        observer: &mut dyn ForwardObserver,
    ) -> Result<SubbandFeatures> {
        for (l, layer) in self.weights.layers.iter().enumerate() {
            let flags = self.plan.layers[l];
            let factor = |on: bool| if on { self.plan.factor } else { 1 };

            let y = band_sublayer(
                &x,
                &layer.band_rnn,
                factor(flags.band_rnn),
                &mut counts.band_rnn[l],
            )?;
            observer.band_rnn(l, &x, &y);
            x = y;

            let y = apply_pruned_time_rnn(
                &x,
                &layer.time_rnn,
                &self.schedule,
                l,
                factor(flags.time_rnn),
                &mut counts.time_rnn[l],
            )?;
            let processed: Vec<usize> = (0..self.schedule.active_bands(l)).collect();
            observer.time_rnn(l, &processed, &x, &y);
            x = y;
        }
        Ok(x)
    }

    /// Enhances a mono waveform at the configured sample rate; the output has
    /// the input's length.
    pub fn enhance(&self, noisy: &[f32], oa: Option<OaConfig>) -> Result<Vec<f32>> {
        let mut counts = MacCounts::zeros(self.config.num_layers);
        self.enhance_with(noisy, oa, &mut counts, &mut NoObserver)
    }

    pub fn enhance_with(
        &self,
        noisy: &[f32],
        oa: Option<OaConfig>,
        counts: &mut MacCounts,
        observer: &mut dyn ForwardObserver,
    ) -> Result<Vec<f32>> {
        if noisy.is_empty() {
            return Err(Error::InvalidInput("empty waveform".into()));
        }
        if let Some(cfg) = oa {
            cfg.validate()?;
        }
        let spec = stft(noisy, &self.config.stft)?;
        let features = band_split(
            &spec,
            &self.weights.band_split,
            &self.config.bands,
            &mut counts.band_split,
        )?;
        let features = self.forward_features_with(&features, counts, observer)?;
        let mask = estimate_mask(
            &features,
            &self.weights.mask,
            &self.config.bands,
            &mut counts.mask_head,
        )?;
        let enhanced = apply_mask(&spec, &mask)?;
        let out = istft(&enhanced, &self.config.stft, noisy.len())?;
        match oa {
            Some(cfg) => observation_add(noisy, &out, cfg),
            None => Ok(out),
        }
    }
}

/// Band-RNN sublayer: for each (kept) frame, the sequence over the `K`
/// bands goes through `w`; the result is held and added back residually.
pub fn band_sublayer(
    features: &SubbandFeatures,
    w: &GroupedLayerWeights,
    factor: usize,
    macs: &mut SublayerMacs,
) -> Result<SubbandFeatures> {
    resampled_sublayer(features, factor, |x| {
        let (k, t, n) = x.shape();
        let results: Vec<(Vec<f32>, SublayerMacs)> = (0..t)
            .into_par_iter()
            .map(|frame| {
                let mut m = SublayerMacs::default();
                let y = w.apply(&x.frame(frame), &mut m);
                (y, m)
            })
            .collect();
        let mut out = SubbandFeatures::zeros(k, t, n);
        for (frame, (y, m)) in results.into_iter().enumerate() {
            out.set_frame(frame, &y);
            *macs += m;
        }
        Ok(out)
    })
}

/// Time-RNN sublayer over every band of `features`: each band's sequence
/// of (kept) frames goes through `w`, held, and added back residually.
pub fn time_sublayer(
    features: &SubbandFeatures,
    w: &GroupedLayerWeights,
    factor: usize,
    macs: &mut SublayerMacs,
) -> Result<SubbandFeatures> {
    resampled_sublayer(features, factor, |x| {
        let (k, t, n) = x.shape();
        let results: Vec<(Vec<f32>, SublayerMacs)> = (0..k)
            .into_par_iter()
            .map(|band| {
                let mut m = SublayerMacs::default();
                let y = w.apply(x.band(band), &mut m);
                (y, m)
            })
            .collect();
        let mut data = Vec::with_capacity(k * t * n);
        for (y, m) in results {
            data.extend_from_slice(&y);
            *macs += m;
        }
        SubbandFeatures::from_vec(k, t, n, data)
    })
}
