use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;

use bsrnn_core::config::{reported_variants, ModelConfig};
use bsrnn_core::dsp::wav::{read_wav, write_wav};
use bsrnn_core::dsp::OaConfig;
use bsrnn_core::macs::{self, render_table_csv, render_table_text};
use bsrnn_core::model::build;
use bsrnn_core::weights::{generate, TensorStore};
use bsrnn_core::{Model, ModelWeights};

/// Argument combinations clap cannot reject on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn load_config(path: &Path) -> Result<ModelConfig> {
    ModelConfig::load(path).with_context(|| format!("config {}", path.display()))
}

pub fn load_model(config: ModelConfig, weights: &Path) -> Result<Model> {
    let store =
        TensorStore::load(weights).with_context(|| format!("weights {}", weights.display()))?;
    let w = ModelWeights::from_store(&config, &store)
        .with_context(|| format!("weights {}", weights.display()))?;
    Ok(build(config, w)?)
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Weights file written by gen-weights.
    #[arg(long)]
    pub weights: PathBuf,
    /// Input WAV file, or a directory of WAV files.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output WAV file, or a directory when the input is one.
    #[arg(long)]
    pub out: PathBuf,
    /// Observation-adding weight in [0, 1].
    #[arg(long)]
    pub oa: Option<f32>,
}

fn enhance_file(model: &Model, oa: Option<OaConfig>, input: &Path, output: &Path) -> Result<()> {
    let audio = read_wav(input, model.config().stft.sample_rate)
        .with_context(|| format!("input {}", input.display()))?;
    let enhanced = model.enhance(&audio.samples, oa)?;
    write_wav(output, &enhanced, audio.sample_rate, audio.encoding)
        .with_context(|| format!("output {}", output.display()))?;
    Ok(())
}

pub fn enhance(args: EnhanceArgs) -> Result<()> {
    let oa = args.oa.map(OaConfig::new).transpose()?;
    let config = load_config(&args.config)?;
    let model = load_model(config, &args.weights)?;
    if !args.input.is_dir() {
        return enhance_file(&model, oa, &args.input, &args.out);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("output dir {}", args.out.display()))?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    files.par_iter().try_for_each(|f| {
        let out = args
            .out
            .join(f.file_name().expect("listed files have names"));
        enhance_file(&model, oa, f, &out)
    })
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Seconds of audio to account for.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let report = macs::analyze(&config, args.duration)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else if args.csv {
        println!("component,layer,macs");
        println!("band_split,,{}", report.counts.band_split);
        for (l, s) in report.counts.band_rnn.iter().enumerate() {
            println!("band_rnn,{},{}", l + 1, s.total());
        }
        for (l, s) in report.counts.time_rnn.iter().enumerate() {
            println!("time_rnn,{},{}", l + 1, s.total());
        }
        println!("mask_head,,{}", report.counts.mask_head);
        println!("total,,{}", report.total);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Base configuration (first row).
    #[arg(long)]
    pub base: PathBuf,
    /// Directory of variant configurations, listed in file-name order.
    #[arg(long)]
    pub variants: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
}

pub fn table(args: TableArgs) -> Result<()> {
    let base = load_config(&args.base)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.variants)
        .with_context(|| format!("variants dir {}", args.variants.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let variants = files
        .iter()
        .map(|p| {
            let cfg = load_config(p)?;
            let name = if cfg.name.is_empty() {
                p.file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned()
            } else {
                cfg.name.clone()
            };
            Ok((name, cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    let base_name = if base.name.is_empty() {
        "base"
    } else {
        base.name.as_str()
    };
    let rows = macs::reduction_table((base_name, &base), &variants, args.duration)?;
    match args.format {
        TableFormat::Text => print!("{}", render_table_text(&rows)),
        TableFormat::Csv => print!("{}", render_table_csv(&rows)),
        TableFormat::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenWeightsArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_weights(args: GenWeightsArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let store = generate(&config, args.seed);
    store
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} tensors to {}", store.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Template configuration; defaults to canonical-v1.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub min: usize,
    #[arg(long, default_value_t = 256)]
    pub max: usize,
    /// Number of feasible candidates to list.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long)]
    pub json: bool,
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    if args.min > args.max {
        return Err(usage("--min must not exceed --max"));
    }
    let template = match &args.config {
        Some(p) => load_config(p)?,
        None => ModelConfig::canonical_v1(),
    };
    let outcome = macs::calibrate(&template, args.min, args.max)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
        return Ok(());
    }
    println!(
        "{} (N, H) pairs meet both anchors within +-{}",
        outcome.feasible.len(),
        macs::ANCHOR_TOLERANCE
    );
    let show = if outcome.feasible.is_empty() {
        println!(
            "no feasible pair; closest anchor residual {:.4}",
            outcome.closest.anchor_residual
        );
        vec![&outcome.closest]
    } else {
        outcome.feasible.iter().take(args.top).collect()
    };
    for c in show {
        println!(
            "N={} H={}  anchor residual {:.4}  squared error {:.6}",
            c.feature_dim, c.hidden_dim, c.anchor_residual, c.squared_error
        );
        for r in &c.rows {
            println!(
                "    {:<16} reported {:.2}  computed {:.3}",
                r.label, r.reported, r.computed
            );
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    /// Output directory; receives canonical-v1.json and variants/.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn presets(args: PresetsArgs) -> Result<()> {
    let base = ModelConfig::canonical_v1();
    let dir = args.out.join("variants");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(
        args.out.join("canonical-v1.json"),
        base.to_json_pretty() + "\n",
    )?;
    for (i, v) in reported_variants(&base).into_iter().enumerate().skip(1) {
        let depth = v.label.chars().take_while(|&c| c == '+').count();
        let label = v.label.trim_start_matches('+');
        let label = if depth > 2 {
            format!("chain-{label}")
        } else {
            label.to_string()
        };
        let slug: String = label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '-'
                }
            })
            .collect::<String>()
            .trim_end_matches('-')
            .to_string();
        let path = dir.join(format!("{i:02}-{slug}.json"));
        fs::write(&path, v.config.to_json_pretty() + "\n")?;
    }
    println!("wrote presets to {}", args.out.display());
    Ok(())
}
