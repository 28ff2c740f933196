//! Command-line interface: generate synthetic data, simulate partial
//! labels, train, sweep alpha, and re-render persisted results.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use psmlc::config::{ExperimentConfig, Simulator, Strategy};
use psmlc::data::{
    generate_synthetic, make_bernoulli_partial, make_single_class_partition, read_csv, write_csv,
    Dataset, SyntheticSpec,
};
use psmlc::error::{Error, Result};
use psmlc::runner::{
    default_alpha_grid, read_results, render_run_table, render_sweep_table, run_alpha_sweep,
    run_experiment, write_report,
};

#[derive(Parser)]
#[command(
    name = "psmlc",
    about = "Deterministic training lab for partially supervised multi-label classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fully labeled synthetic dataset as CSV.
    Generate {
        /// Number of samples.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Number of features.
        #[arg(long, default_value_t = 16)]
        d: usize,
        /// Number of classes.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Gaussian noise scale added to the latent features.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// Comma-separated per-class positive rates (default: 0.5 down to 0.1).
        #[arg(long)]
        rates: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask labels of a fully labeled CSV with a partial-supervision
    /// simulator; missing entries are written as `?`.
    Partition {
        /// Input CSV (fully labeled).
        #[arg(long)]
        input: PathBuf,
        /// `single_class` or `bernoulli`.
        #[arg(long)]
        simulator: String,
        /// Keep probability for the bernoulli simulator.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one strategy and persist results.
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output directory for results.json and table.txt.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Sweep the mixing alpha over a grid, persist the per-class F1 table
    /// and the per-class best alphas.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// Comma-separated alphas (default 0.50,0.55,..,0.95).
        #[arg(long)]
        grid: Option<String>,
        /// After the sweep, train amp with the inferred per-class alphas.
        #[arg(long, default_value_t = false)]
        run_amp: bool,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Re-render the table for a persisted results.json.
    Report {
        /// Path to results.json.
        #[arg(long)]
        results: PathBuf,
        /// Optional path for the rendered table (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config file plus command-line overrides shared by train and sweep.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// vanilla | mixup | mixup_pme | amp | oracle
    #[arg(long)]
    strategy: Option<String>,
    /// single_class | bernoulli | none
    #[arg(long)]
    simulator: Option<String>,
    /// Keep probability for the bernoulli simulator.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Per-class alphas as `k=v,..` pairs or a plain comma list.
    #[arg(long)]
    alpha_k: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Base training seed; combined with --num-seeds into seed, seed+1, ..
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_seeds: Option<usize>,
    /// Select the best epoch on a held-out validation split instead of the
    /// test set.
    #[arg(long, default_value_t = false)]
    holdout_validation: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(strategy) = &self.strategy {
            cfg.strategy = Strategy::parse(strategy)?;
        }
        if let Some(simulator) = &self.simulator {
            cfg.simulator = match simulator.as_str() {
                "single_class" => Simulator::SingleClass,
                "bernoulli" => Simulator::Bernoulli {
                    p: self.p.unwrap_or(0.5),
                },
                "none" => Simulator::None,
                other => {
                    return Err(Error::Config(format!(
                        "unknown simulator {other:?} (expected single_class, bernoulli, or none)"
                    )))
                }
            };
        } else if let (Some(p), Simulator::Bernoulli { .. }) = (self.p, &cfg.simulator) {
            cfg.simulator = Simulator::Bernoulli { p };
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = Some(alpha);
        }
        if let Some(spec) = &self.alpha_k {
            cfg.alpha_k = Some(parse_alpha_k(spec)?);
        }
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if let Some(batch_size) = self.batch_size {
            cfg.batch_size = batch_size;
        }
        if let Some(lr) = self.lr {
            cfg.learning_rate = lr;
        }
        if let Some(threshold) = self.threshold {
            cfg.threshold = threshold;
        }
        if self.seed.is_some() || self.num_seeds.is_some() {
            let base = self.seed.unwrap_or(0);
            let count = self.num_seeds.unwrap_or_else(|| cfg.seeds.len().max(1));
            cfg.seeds = (0..count as u64).map(|i| base.wrapping_add(i)).collect();
        }
        if self.holdout_validation {
            cfg.holdout_validation = true;
        }
        Ok(cfg)
    }
}

/// Accepts `0=0.6,1=0.75,..` (every class required) or a plain comma list.
fn parse_alpha_k(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(',').filter(|s| !s.trim().is_empty()).collect();
    if parts.is_empty() {
        return Err(Error::Config("empty --alpha-k value".into()));
    }
    if spec.contains('=') {
        let mut pairs = Vec::with_capacity(parts.len());
        for part in &parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected k=v in --alpha-k, got {part:?}")))?;
            let class: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad class index {k:?} in --alpha-k")))?;
            let alpha: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad alpha {v:?} in --alpha-k")))?;
            pairs.push((class, alpha));
        }
        pairs.sort_by_key(|&(k, _)| k);
        let mut alphas = Vec::with_capacity(pairs.len());
        for (expected, (class, alpha)) in pairs.iter().enumerate() {
            if *class != expected {
                return Err(Error::Config(format!(
                    "--alpha-k must cover classes 0..{} exactly; missing or duplicate class {expected}",
                    pairs.len()
                )));
            }
            alphas.push(*alpha);
        }
        Ok(alphas)
    } else {
        parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad alpha {p:?} in --alpha-k")))
            })
            .collect()
    }
}

fn parse_rates(spec: &str, k: usize) -> Result<Vec<f64>> {
    let rates: Vec<f64> = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad rate {s:?}")))
        })
        .collect::<Result<_>>()?;
    if rates.len() != k {
        return Err(Error::Config(format!(
            "expected {k} rates, got {}",
            rates.len()
        )));
    }
    Ok(rates)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad alpha {s:?} in --grid")))
        })
        .collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            n,
            d,
            k,
            noise,
            rates,
            seed,
            out,
        } => {
            let positive_rates = match rates {
                Some(spec) => parse_rates(&spec, k)?,
                None => psmlc::config::default_positive_rates(k),
            };
            let spec = SyntheticSpec {
                num_samples: n,
                num_features: d,
                num_classes: k,
                noise,
                positive_rates,
            };
            let ds = generate_synthetic(&spec, seed)?;
            write_csv(&ds, &out)?;
            println!("wrote {} samples x ({} features, {} classes) to {}", n, d, k, out.display());
        }
        Command::Partition {
            input,
            simulator,
            p,
            seed,
            out,
        } => {
            let ds = read_csv(&input)?;
            let labels = match simulator.as_str() {
                "single_class" => make_single_class_partition(&ds.labels, seed)?,
                "bernoulli" => make_bernoulli_partial(&ds.labels, p, seed)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown simulator {other:?} (expected single_class or bernoulli)"
                    )))
                }
            };
            let stats = labels.label_statistics();
            let partial = Dataset::new(
                ds.features.clone(),
                labels,
                ds.class_names.clone(),
                format!("{}; simulator={simulator}(seed={seed})", ds.provenance),
            )?;
            write_csv(&partial, &out)?;
            for (class, s) in stats.iter().enumerate() {
                println!(
                    "class {class}: labeled {} (pos {}, neg {}), missing {}",
                    s.labeled, s.positive, s.negative, s.missing
                );
            }
            println!("wrote partial labels to {}", out.display());
        }
        Command::Train { common, out } => {
            let cfg = common.build()?;
            let result = run_experiment(&cfg)?;
            write_report(&result, &out)?;
            print!("{}", render_run_table(&result));
            println!("results written to {}", out.display());
        }
        Command::Sweep {
            common,
            grid,
            run_amp,
            out,
        } => {
            let cfg = common.build()?;
            let alphas = match grid {
                Some(spec) => parse_grid(&spec)?,
                None => default_alpha_grid(),
            };
            let sweep = run_alpha_sweep(&cfg, &alphas)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("sweep.json"), &sweep)?;
            std::fs::write(out.join("sweep_table.txt"), render_sweep_table(&sweep))?;
            print!("{}", render_sweep_table(&sweep));
            println!("sweep written to {}", out.display());
            if run_amp {
                let amp_cfg = ExperimentConfig {
                    strategy: Strategy::Amp,
                    alpha: None,
                    alpha_k: Some(sweep.best_alpha_per_class.clone()),
                    ..cfg
                };
                let result = run_experiment(&amp_cfg)?;
                write_report(&result, out.join("amp"))?;
                print!("{}", render_run_table(&result));
                println!("amp results written to {}", out.join("amp").display());
            }
        }
        Command::Report { results, out } => {
            let result = read_results(&results)?;
            let table = render_run_table(&result);
            match out {
                Some(path) => {
                    std::fs::write(&path, &table)?;
                    println!("table written to {}", path.display());
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
