use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::Args;

use bsrnn_core::config::{canonical_chain, ModelConfig};
use bsrnn_core::macs::{analyze, count_forward};
use bsrnn_core::model::build;
use bsrnn_core::weights::SplitMix64;
use bsrnn_core::{Model, ModelWeights};

use crate::commands::{load_config, load_model, usage};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Configuration; defaults to canonical-v1.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weights file; seeded random weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seconds of synthetic noise per run.
    #[arg(long, default_value_t = 5.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Time every step of the canonical optimization chain instead.
    #[arg(long)]
    pub chain: bool,
}

struct Timing {
    median_s: f64,
    macs: u64,
}

fn time_model(model: &Model, audio: &[f32], runs: usize) -> Result<Timing> {
    let macs = count_forward(model, audio)?.total;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        let out = model.enhance(audio, None)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    times.sort_by(f64::total_cmp);
    Ok(Timing {
        median_s: times[times.len() / 2],
        macs,
    })
}

fn noise(samples: usize) -> Vec<f32> {
    let mut rng = SplitMix64::new(0x5EED);
    (0..samples).map(|_| rng.uniform_f32(-0.5, 0.5)).collect()
}

pub fn run(args: BenchArgs) -> Result<()> {
    if !(args.seconds.is_finite() && args.seconds > 0.0) {
        return Err(usage(format!(
            "--seconds must be positive, got {}",
            args.seconds
        )));
    }
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => ModelConfig::canonical_v1(),
    };
    let audio = noise(config.stft.samples_for_seconds(args.seconds).max(1));

    if args.chain {
        println!(
            "{:<16} {:>10} {:>12} {:>8}",
            "variant", "G/s", "median s", "RTF"
        );
        let mut last: Option<(f64, f64)> = None;
        let mut monotone = true;
        for v in canonical_chain(&config) {
            let model = build(v.config.clone(), ModelWeights::random(&v.config, 0)?)?;
            let g = analyze(&v.config, args.seconds)?.gmacs_per_second;
            let t = time_model(&model, &audio, args.runs)?;
            println!(
                "{:<16} {:>10.3} {:>12.4} {:>8.4}",
                v.label,
                g,
                t.median_s,
                t.median_s / args.seconds
            );
            if let Some((pg, pt)) = last {
                if g < pg && t.median_s >= pt {
                    monotone = false;
                }
            }
            last = Some((g, t.median_s));
        }
        println!(
            "advisory: lower analytic cost {} lower measured time along the chain",
            if monotone {
                "gave"
            } else {
                "did not always give"
            }
        );
        return Ok(());
    }

    let model = match &args.weights {
        Some(p) => load_model(config.clone(), p)?,
        None => build(config.clone(), ModelWeights::random(&config, 0)?)?,
    };
    let analytic = analyze(&config, args.seconds)?.gmacs_per_second;
    let t = time_model(&model, &audio, args.runs)?;
    let rtf = t.median_s / args.seconds;
    println!("audio            {:.3} s", args.seconds);
    println!(
        "median wall time {:.4} s over {} runs",
        t.median_s, args.runs
    );
    println!("RTF              {rtf:.4}");
    println!("analytic cost    {analytic:.3} G/s");
    println!(
        "measured MACs    {} ({:.3} GMAC/s throughput)",
        t.macs,
        t.macs as f64 / t.median_s / 1e9
    );
    Ok(())
}
