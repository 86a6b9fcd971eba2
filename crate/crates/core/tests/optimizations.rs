mod support;

use bsrnn_core::config::reported_variants;
use bsrnn_core::macs::analyze_frames;
use bsrnn_core::model::{build, ForwardObserver};
use bsrnn_core::prune::PruneStrategy;
use bsrnn_core::resample::ResampleStrategy;
use bsrnn_core::{MacCounts, Model, ModelConfig, ModelWeights, SubbandFeatures};

use support::{noise, random_config, sweep_config};

fn model(cfg: &ModelConfig, seed: u64) -> Model {
    build(cfg.clone(), ModelWeights::random(cfg, seed).unwrap()).unwrap()
}

fn small() -> ModelConfig {
    let mut c = random_config(5);
    c.lwr = ResampleStrategy::None;
    c.sbp = PruneStrategy::None;
    c.group_size = 1;
    c
}

#[derive(Default)]
struct Bypass {
    checked: usize,
    changed: usize,
}

impl ForwardObserver for Bypass {
    fn time_rnn(
        &mut self,
        _layer: usize,
        processed: &[usize],
        input: &SubbandFeatures,
        output: &SubbandFeatures,
    ) {
        for k in 0..input.bands() {
            let same = input.band(k) == output.band(k);
            if processed.contains(&k) {
                self.changed += usize::from(!same);
            } else {
                assert!(same, "skipped band {k} changed");
                self.checked += 1;
            }
        }
    }
}

#[test]
fn skipped_bands_pass_through_bitwise() {
    for seed in 0..30 {
        let cfg = random_config(seed);
        let m = model(&cfg, seed);
        let audio = noise(3 * cfg.stft.fft_size, seed);
        let mut obs = Bypass::default();
        let mut counts = MacCounts::zeros(cfg.num_layers);
        m.enhance_with(&audio, None, &mut counts, &mut obs).unwrap();
        let schedule = cfg.prune_schedule().unwrap();
        assert_eq!(obs.checked, schedule.total_skipped(), "{}", cfg.describe());
    }
}

#[test]
fn degenerate_toggles_match_baseline() {
    let base = small();
    let audio = noise(4000, 9);
    let want = model(&base, 1).enhance(&audio, None).unwrap();
    let toggles = [
        base.clone().with_sbp(PruneStrategy::Aggressive { l: 0 }),
        base.clone()
            .with_lwr(ResampleStrategy::LwrAll { factor: 1 }),
        base.clone().with_lwr(ResampleStrategy::Pps { factor: 1 }),
        base.clone()
            .with_lwr(ResampleStrategy::LwrAsync { factor: 1 }),
    ];
    for cfg in toggles {
        assert_eq!(
            model(&cfg, 1).enhance(&audio, None).unwrap(),
            want,
            "{}",
            cfg.describe()
        );
    }
}

#[test]
fn pps_and_lwr_all_share_cost_but_not_output() {
    let base = small();
    let frames = 40;
    let pps = base.clone().with_lwr(ResampleStrategy::Pps { factor: 4 });
    let all = base
        .clone()
        .with_lwr(ResampleStrategy::LwrAll { factor: 4 });
    assert_eq!(
        analyze_frames(&pps, frames).unwrap().rnn_total(),
        analyze_frames(&all, frames).unwrap().rnn_total()
    );
    let audio = noise(4000, 2);
    assert_ne!(
        model(&pps, 3).enhance(&audio, None).unwrap(),
        model(&all, 3).enhance(&audio, None).unwrap()
    );
}

#[test]
fn interleaving_never_halves_rnn_cost() {
    for seed in 0..200 {
        let mut cfg = sweep_config(seed);
        let factor = cfg.lwr.factor();
        cfg.lwr = ResampleStrategy::LwrAsync { factor };
        let plain = cfg.clone().with_lwr(ResampleStrategy::None);
        for frames in [1, 7, 63, 626] {
            let a = analyze_frames(&cfg, frames).unwrap().rnn_total() as f64;
            let b = analyze_frames(&plain, frames).unwrap().rnn_total() as f64;
            assert!(1.0 - a / b < 0.5, "{} at {frames} frames", cfg.describe());
        }
    }
}

#[test]
fn sbp_savings_follow_skipped_band_counts() {
    let base = ModelConfig::canonical_v1();
    let frames = 63;
    let time = |c: &ModelConfig| analyze_frames(c, frames).unwrap().time_rnn_total();
    let t0 = time(&base);
    let sa = t0 - time(&base.clone().with_sbp(PruneStrategy::Aggressive { l: 6 }));
    let sp = t0 - time(&base.clone().with_sbp(PruneStrategy::Progressive));
    assert_eq!(sa * 21, sp * 36);
}

#[test]
fn sync_and_async_cost_the_same_at_default_layers() {
    let base = ModelConfig::canonical_v1();
    let rows = reported_variants(&base);
    let find = |label: &str| {
        rows.iter()
            .find(|r| r.label == label)
            .unwrap()
            .config
            .clone()
    };
    for frames in [63, 626] {
        assert_eq!(
            analyze_frames(&find("+LWR-SYNC(4)"), frames)
                .unwrap()
                .total(),
            analyze_frames(&find("+LWR-ASYNC(4)"), frames)
                .unwrap()
                .total()
        );
    }
}
