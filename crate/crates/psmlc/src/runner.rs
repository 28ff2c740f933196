//! End-to-end experiment orchestration: build data, simulate partial
//! labels, train one of five strategies, evaluate per epoch, select the
//! best epoch, aggregate across seeds, and persist results.
//!
//! Determinism contract: one root data seed drives generation and the
//! partial-label simulator; each training seed derives independent init and
//! train streams. Identical configurations therefore produce byte-identical
//! result documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{
    mixup_pair_with_lambda, mixup_pme_batch, mixup_pme_batch_with_lambda, pair_sampler_locally_full,
    pair_sampler_shuffle, MixConfig,
};
use crate::config::{DataSource, ExperimentConfig, Simulator, Strategy};
use crate::data::{
    generate_synthetic, instance_normalize, make_bernoulli_partial, make_single_class_partition,
    read_csv, split_train_test, Dataset,
};
use crate::error::{Error, Result};
use crate::labels::{ClassWeights, PartialLabelMatrix};
use crate::loss::{masked_weighted_bce, Reduction};
use crate::metrics::{evaluate, MetricsReport};
use crate::network::Network;
use crate::optim::AdamState;
use crate::rng::{RngStream, StreamId};
use crate::tensor::Tensor;

pub const RESULTS_FORMAT_VERSION: u32 = 1;

/// Knobs for one training epoch.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub reduction: Reduction,
    /// Force the mixing weight instead of drawing it; used by the
    /// strategy-equivalence checks (lambda = 1 must reduce mixing to the
    /// plain masked pass).
    pub forced_lambda: Option<f64>,
}

impl TrainOptions {
    pub fn new(batch_size: usize, reduction: Reduction) -> Self {
        Self {
            batch_size,
            reduction,
            forced_lambda: None,
        }
    }
}

fn step_batch(
    net: &mut Network,
    optimizer: &mut AdamState,
    inputs: &Tensor,
    targets: &Tensor,
    mask: &Tensor,
    weights: &ClassWeights,
    reduction: Reduction,
) -> Result<f64> {
    let fwd = net.forward(inputs)?;
    let (loss, d_logits) = masked_weighted_bce(fwd.logits(), targets, mask, weights, reduction)?;
    let grads = net.backward(&fwd, &d_logits)?;
    optimizer.step(net, &grads)?;
    Ok(loss)
}

/// One pass over the training rows with the given strategy. Returns the
/// mean batch loss.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    net: &mut Network,
    optimizer: &mut AdamState,
    features: &Tensor,
    labels: &PartialLabelMatrix,
    strategy: Strategy,
    mix: Option<&MixConfig>,
    weights: &ClassWeights,
    rng: &mut RngStream,
    options: &TrainOptions,
) -> Result<f64> {
    match strategy {
        Strategy::Vanilla | Strategy::Oracle => {
            train_epoch_masked(net, optimizer, features, labels, weights, rng, options)
        }
        Strategy::MixupPme | Strategy::Amp => {
            let mix = mix.ok_or_else(|| {
                Error::Config(format!("{} needs a mix configuration", strategy.name()))
            })?;
            train_epoch_pme(net, optimizer, features, labels, mix, weights, rng, options)
        }
        Strategy::Mixup => {
            let alpha = match mix {
                Some(MixConfig::Mixup { alpha }) => *alpha,
                _ => {
                    return Err(Error::Config(
                        "the mixup strategy needs a mixup mix configuration".into(),
                    ))
                }
            };
            train_epoch_mixup(net, optimizer, features, labels, alpha, weights, rng, options)
        }
    }
}

/// Masked pass without mixing; covers both vanilla (partial labels) and
/// oracle (full labels), whose masks are all ones.
fn train_epoch_masked(
    net: &mut Network,
    optimizer: &mut AdamState,
    features: &Tensor,
    labels: &PartialLabelMatrix,
    weights: &ClassWeights,
    rng: &mut RngStream,
    options: &TrainOptions,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..features.rows()).collect();
    rng.shuffle(&mut order);
    let fill = labels.pme_fill();
    let mask = labels.mask_of();
    let mut losses = Vec::new();
    for chunk in order.chunks(options.batch_size) {
        let x = features.gather_rows(chunk);
        let t = fill.gather_rows(chunk);
        let m = mask.gather_rows(chunk);
        losses.push(step_batch(net, optimizer, &x, &t, &m, weights, options.reduction)?);
    }
    Ok(mean(&losses))
}

/// Batch-wise maximum-entropy mixing: companion batch is a seeded
/// permutation of the current batch, one lambda per batch, loss masked by
/// the base rows. For per-class alphas the rows are grouped by their
/// labeled-class set first, so each batch draws from exactly the bound its
/// base labels require.
#[allow(clippy::too_many_arguments)]
fn train_epoch_pme(
    net: &mut Network,
    optimizer: &mut AdamState,
    features: &Tensor,
    labels: &PartialLabelMatrix,
    mix: &MixConfig,
    weights: &ClassWeights,
    rng: &mut RngStream,
    options: &TrainOptions,
) -> Result<f64> {
    let n = features.rows();
    let grouped = matches!(mix, MixConfig::Amp { .. });
    let groups: Vec<Vec<usize>> = if grouped {
        let mut by_label_set: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for row in 0..n {
            let mut bits = 0u64;
            for (class, entry) in labels.row(row).iter().enumerate() {
                if entry.is_labeled() {
                    bits |= 1 << class;
                }
            }
            by_label_set.entry(bits).or_default().push(row);
        }
        by_label_set.into_values().collect()
    } else {
        vec![(0..n).collect()]
    };

    let mut losses = Vec::new();
    for mut group in groups {
        rng.shuffle(&mut group);
        for chunk in group.chunks(options.batch_size) {
            let x1 = features.gather_rows(chunk);
            let l1 = labels.gather_rows(chunk);
            let perm = pair_sampler_shuffle(chunk.len(), rng);
            let companions: Vec<usize> = perm.iter().map(|&p| chunk[p]).collect();
            let x2 = features.gather_rows(&companions);
            let l2 = labels.gather_rows(&companions);
            let batch = match options.forced_lambda {
                Some(lambda) => mixup_pme_batch_with_lambda(&x1, &l1, &x2, &l2, lambda)?,
                None => mixup_pme_batch(&x1, &l1, &x2, &l2, mix, rng)?,
            };
            losses.push(step_batch(
                net,
                optimizer,
                &batch.inputs,
                &batch.targets,
                &batch.mask,
                weights,
                options.reduction,
            )?);
        }
    }
    Ok(mean(&losses))
}

/// Classic MixUp baseline: one sub-epoch per class in round-robin, pairs
/// drawn from the rows labeled for that class, loss restricted to it.
#[allow(clippy::too_many_arguments)]
fn train_epoch_mixup(
    net: &mut Network,
    optimizer: &mut AdamState,
    features: &Tensor,
    labels: &PartialLabelMatrix,
    alpha: f64,
    weights: &ClassWeights,
    rng: &mut RngStream,
    options: &TrainOptions,
) -> Result<f64> {
    let k = labels.cols();
    let mut losses = Vec::new();
    for class in 0..k {
        let pairs = pair_sampler_locally_full(labels, class, rng);
        if pairs.is_empty() {
            log::warn!("mixup: class {class} has fewer than two labeled samples; skipped this epoch");
            continue;
        }
        for chunk in pairs.chunks(options.batch_size) {
            let lambda = match options.forced_lambda {
                Some(lambda) => lambda,
                None => rng.beta_symmetric(alpha)?,
            };
            let mut x_rows = Vec::with_capacity(chunk.len());
            let mut targets = Tensor::zeros(&[chunk.len(), k]);
            let mut mask = Tensor::zeros(&[chunk.len(), k]);
            for (r, &(i, j)) in chunk.iter().enumerate() {
                let (x, y) = mixup_pair_with_lambda(
                    features.row(i),
                    labels.row(i),
                    features.row(j),
                    labels.row(j),
                    &[class],
                    lambda,
                )?;
                x_rows.push(x);
                targets.set(r, class, y[0]);
                mask.set(r, class, 1.0);
            }
            let x = Tensor::from_rows(&x_rows)?;
            losses.push(step_batch(
                net,
                optimizer,
                &x,
                &targets,
                &mask,
                weights,
                options.reduction,
            )?);
        }
    }
    Ok(mean(&losses))
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Everything derived from config + data seed, fixed across training seeds.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub class_names: Vec<String>,
    pub dims: Vec<usize>,
    pub train_features: Tensor,
    pub train_labels: PartialLabelMatrix,
    pub weights: ClassWeights,
    pub validation: Option<(Tensor, PartialLabelMatrix)>,
    pub test_features: Tensor,
    pub test_labels: PartialLabelMatrix,
}

pub(crate) fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let base = match &cfg.data {
        DataSource::Synthetic { spec } => generate_synthetic(spec, cfg.data_seed)?,
        DataSource::Csv { path } => read_csv(path)?,
    };
    cfg.validate_for_classes(base.num_classes())?;

    let features = if cfg.normalize {
        instance_normalize(&base.features)
    } else {
        base.features.clone()
    };
    let ds = Dataset::new(features, base.labels, base.class_names, base.provenance)?;
    let (mut train, test) = split_train_test(&ds, cfg.n_train, cfg.n_test)?;

    let validation = if cfg.holdout_validation {
        let val_size = (cfg.n_train / 5).max(1);
        if val_size >= cfg.n_train {
            return Err(Error::Config(
                "holdout validation needs at least two training rows".into(),
            ));
        }
        let (rest, val) = split_train_test(&train, cfg.n_train - val_size, val_size)?;
        train = rest;
        Some((val.features, val.labels))
    } else {
        None
    };

    let train_labels = match cfg.simulator {
        Simulator::SingleClass => make_single_class_partition(&train.labels, cfg.data_seed)?,
        Simulator::Bernoulli { p } => make_bernoulli_partial(&train.labels, p, cfg.data_seed)?,
        Simulator::None => train.labels.clone(),
    };
    let weights = train_labels.compute_class_weights()?;

    let mut dims = vec![train.features.cols()];
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(train_labels.cols());

    Ok(Prepared {
        class_names: ds.class_names,
        dims,
        train_features: train.features,
        train_labels,
        weights,
        validation,
        test_features: test.features,
        test_labels: test.labels,
    })
}

/// One seed's trajectory and its best epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub epoch_losses: Vec<f64>,
    /// Test-set evaluation after each epoch.
    pub epoch_reports: Vec<MetricsReport>,
    /// Validation-set evaluation per epoch, present under
    /// `holdout_validation`.
    pub validation_reports: Option<Vec<MetricsReport>>,
    /// 1-based index of the selected epoch (max mean F1 on the selection
    /// split; earliest wins ties).
    pub best_epoch: usize,
    /// Test mean F1 at the selected epoch.
    pub best_mean_f1: f64,
    /// Test per-class F1 at the selected epoch.
    pub best_per_class_f1: Vec<f64>,
}

/// Arithmetic means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_best_f1: f64,
    pub mean_per_class_f1: Vec<f64>,
}

/// Complete persisted outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub seed_results: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

/// Run the configured experiment across all seeds. Fully deterministic:
/// the same config yields a byte-identical result document.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mix = cfg.mix_config();
    let options = TrainOptions::new(cfg.batch_size, cfg.loss_reduction);

    let mut seed_results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        seed_results.push(run_seed(cfg, &prep, mix.as_ref(), &options, seed)?);
    }

    let k = prep.class_names.len();
    let mean_best_f1 = mean(&seed_results.iter().map(|s| s.best_mean_f1).collect::<Vec<_>>());
    let mean_per_class_f1 = (0..k)
        .map(|c| mean(&seed_results.iter().map(|s| s.best_per_class_f1[c]).collect::<Vec<_>>()))
        .collect();

    Ok(RunResult {
        format_version: RESULTS_FORMAT_VERSION,
        config: cfg.clone(),
        class_names: prep.class_names,
        seed_results,
        aggregate: Aggregate {
            mean_best_f1,
            mean_per_class_f1,
        },
    })
}

fn run_seed(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    mix: Option<&MixConfig>,
    options: &TrainOptions,
    seed: u64,
) -> Result<SeedResult> {
    let mut init_rng = RngStream::named(seed, StreamId::Init);
    let mut net = Network::seeded(&prep.dims, &mut init_rng)?;
    let mut optimizer = AdamState::new(&net, cfg.learning_rate);
    let mut train_rng = RngStream::named(seed, StreamId::Train);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut epoch_reports = Vec::with_capacity(cfg.epochs);
    let mut validation_reports = prep.validation.as_ref().map(|_| Vec::with_capacity(cfg.epochs));
    for epoch in 1..=cfg.epochs {
        let loss = train_epoch(
            &mut net,
            &mut optimizer,
            &prep.train_features,
            &prep.train_labels,
            cfg.strategy,
            mix,
            &prep.weights,
            &mut train_rng,
            options,
        )?;
        epoch_losses.push(loss);
        let probs = net.predict_proba(&prep.test_features)?;
        epoch_reports.push(evaluate(&probs, &prep.test_labels, cfg.threshold, epoch, seed));
        if let (Some(reports), Some((val_x, val_y))) =
            (validation_reports.as_mut(), prep.validation.as_ref())
        {
            let val_probs = net.predict_proba(val_x)?;
            reports.push(evaluate(&val_probs, val_y, cfg.threshold, epoch, seed));
        }
    }

    let selection: &[MetricsReport] = validation_reports.as_deref().unwrap_or(&epoch_reports);
    let mut best = 0;
    for (i, report) in selection.iter().enumerate() {
        if report.mean_f1 > selection[best].mean_f1 {
            best = i;
        }
    }

    Ok(SeedResult {
        seed,
        epoch_losses,
        best_epoch: best + 1,
        best_mean_f1: epoch_reports[best].mean_f1,
        best_per_class_f1: epoch_reports[best].per_class_f1(),
        epoch_reports,
        validation_reports,
    })
}

/// Render a per-seed / aggregate F1 table: one column per class plus the
/// average.
pub fn render_run_table(result: &RunResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy: {}", result.config.strategy.name());
    let header: Vec<String> = result.class_names.clone();
    let label_width = 14;
    let _ = write!(out, "{:<label_width$}", "");
    for name in &header {
        let _ = write!(out, "{name:>9}");
    }
    let _ = writeln!(out, "{:>9}  {}", "Average", "best_epoch");
    for seed in &result.seed_results {
        let _ = write!(out, "{:<label_width$}", format!("seed {}", seed.seed));
        for f1 in &seed.best_per_class_f1 {
            let _ = write!(out, "{f1:>9.4}");
        }
        let _ = writeln!(out, "{:>9.4}  {}", seed.best_mean_f1, seed.best_epoch);
    }
    let _ = write!(out, "{:<label_width$}", "mean");
    for f1 in &result.aggregate.mean_per_class_f1 {
        let _ = write!(out, "{f1:>9.4}");
    }
    let _ = writeln!(out, "{:>9.4}", result.aggregate.mean_best_f1);
    out
}

/// Persist a run: `results.json` (machine-readable, versioned) and
/// `table.txt` (human-readable).
pub fn write_report(result: &RunResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.json"), results_json(result)?)?;
    fs::write(dir.join("table.txt"), render_run_table(result))?;
    Ok(())
}

/// Canonical serialization of a result document (pretty JSON plus trailing
/// newline); determinism checks compare these bytes.
pub fn results_json(result: &RunResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)? + "\n")
}

pub fn read_results(path: impl AsRef<Path>) -> Result<RunResult> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-class F1 for one sweep alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub per_class_f1: Vec<f64>,
    pub mean_f1: f64,
}

/// Outcome of an alpha sweep: the per-class F1 grid and the per-class
/// argmax alphas, ready to feed an amp run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub best_alpha_per_class: Vec<f64>,
}

/// The default sweep grid: 0.50, 0.55, .., 0.95.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// Run the maximum-entropy strategy once per alpha and collect the
/// aggregate per-class F1, plus each class's best alpha (ties keep the
/// smallest).
pub fn run_alpha_sweep(base: &ExperimentConfig, alphas: &[f64]) -> Result<SweepResult> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs at least one alpha".into()));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    let mut class_names = Vec::new();
    for &alpha in alphas {
        let cfg = ExperimentConfig {
            strategy: Strategy::MixupPme,
            alpha: Some(alpha),
            alpha_k: None,
            ..base.clone()
        };
        let result = run_experiment(&cfg)?;
        class_names = result.class_names.clone();
        rows.push(SweepRow {
            alpha,
            per_class_f1: result.aggregate.mean_per_class_f1.clone(),
            mean_f1: result.aggregate.mean_best_f1,
        });
    }
    let k = class_names.len();
    let best_alpha_per_class = (0..k)
        .map(|class| {
            let mut best = 0;
            for (i, row) in rows.iter().enumerate() {
                if row.per_class_f1[class] > rows[best].per_class_f1[class] {
                    best = i;
                }
            }
            rows[best].alpha
        })
        .collect();
    Ok(SweepResult {
        format_version: RESULTS_FORMAT_VERSION,
        class_names,
        rows,
        best_alpha_per_class,
    })
}

/// Render the sweep grid with a closing per-class best-alpha row.
pub fn render_sweep_table(sweep: &SweepResult) -> String {
    let mut out = String::new();
    let label_width = 12;
    let _ = write!(out, "{:<label_width$}", "alpha");
    for name in &sweep.class_names {
        let _ = write!(out, "{name:>9}");
    }
    let _ = writeln!(out, "{:>9}", "Average");
    for row in &sweep.rows {
        let _ = write!(out, "{:<label_width$}", format!("{:.2}", row.alpha));
        for f1 in &row.per_class_f1 {
            let _ = write!(out, "{f1:>9.4}");
        }
        let _ = writeln!(out, "{:>9.4}", row.mean_f1);
    }
    let _ = write!(out, "{:<label_width$}", "best_alpha");
    for alpha in &sweep.best_alpha_per_class {
        let _ = write!(out, "{alpha:>9.2}");
    }
    let _ = writeln!(out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSpec;

    fn tiny_config(strategy: Strategy, simulator: Simulator) -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic {
                spec: SyntheticSpec {
                    num_samples: 240,
                    num_features: 6,
                    num_classes: 3,
                    noise: 0.5,
                    positive_rates: vec![0.5, 0.3, 0.2],
                },
            },
            simulator,
            strategy,
            epochs: 3,
            batch_size: 32,
            seeds: vec![0, 1],
            hidden_dims: vec![8],
            n_train: 120,
            n_test: 120,
            ..Default::default()
        }
    }

    #[test]
    fn vanilla_on_full_labels_equals_oracle() {
        // Same pinned RNG, one epoch: parameter tensors must agree bit for
        // bit, since a fully labeled mask is all ones.
        let cfg = tiny_config(Strategy::Vanilla, Simulator::None);
        let prep = prepare(&cfg).unwrap();
        let options = TrainOptions::new(cfg.batch_size, Reduction::MaskedMeanAll);

        let run = |strategy: Strategy| {
            let mut net =
                Network::seeded(&prep.dims, &mut RngStream::named(7, StreamId::Init)).unwrap();
            let mut adam = AdamState::new(&net, cfg.learning_rate);
            let mut rng = RngStream::named(7, StreamId::Train);
            train_epoch(
                &mut net,
                &mut adam,
                &prep.train_features,
                &prep.train_labels,
                strategy,
                None,
                &prep.weights,
                &mut rng,
                &options,
            )
            .unwrap();
            net
        };
        assert!(run(Strategy::Vanilla).bit_eq(&run(Strategy::Oracle)));
    }

    #[test]
    fn pme_with_lambda_one_equals_vanilla() {
        let cfg = tiny_config(Strategy::MixupPme, Simulator::SingleClass);
        let prep = prepare(&cfg).unwrap();

        let vanilla = {
            let mut net =
                Network::seeded(&prep.dims, &mut RngStream::named(3, StreamId::Init)).unwrap();
            let mut adam = AdamState::new(&net, cfg.learning_rate);
            let mut rng = RngStream::named(3, StreamId::Train);
            train_epoch(
                &mut net,
                &mut adam,
                &prep.train_features,
                &prep.train_labels,
                Strategy::Vanilla,
                None,
                &prep.weights,
                &mut rng,
                &TrainOptions::new(cfg.batch_size, Reduction::MaskedMeanAll),
            )
            .unwrap();
            net
        };

        let pme = {
            let mut net =
                Network::seeded(&prep.dims, &mut RngStream::named(3, StreamId::Init)).unwrap();
            let mut adam = AdamState::new(&net, cfg.learning_rate);
            let mut rng = RngStream::named(3, StreamId::Train);
            let mut options = TrainOptions::new(cfg.batch_size, Reduction::MaskedMeanAll);
            options.forced_lambda = Some(1.0);
            train_epoch(
                &mut net,
                &mut adam,
                &prep.train_features,
                &prep.train_labels,
                Strategy::MixupPme,
                Some(&MixConfig::MixupPme { alpha: 0.75 }),
                &prep.weights,
                &mut rng,
                &options,
            )
            .unwrap();
            net
        };

        assert!(pme.bit_eq(&vanilla));
    }

    #[test]
    fn run_experiment_is_byte_deterministic() {
        let cfg = tiny_config(Strategy::MixupPme, Simulator::SingleClass);
        let a = results_json(&run_experiment(&cfg).unwrap()).unwrap();
        let b = results_json(&run_experiment(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn data_and_partition_ignore_training_seeds() {
        let mut a = tiny_config(Strategy::Vanilla, Simulator::SingleClass);
        a.seeds = vec![0];
        let mut b = a.clone();
        b.seeds = vec![11, 12];
        let pa = prepare(&a).unwrap();
        let pb = prepare(&b).unwrap();
        assert!(pa.train_features.bit_eq(&pb.train_features));
        assert_eq!(pa.train_labels, pb.train_labels);
        assert_eq!(pa.weights, pb.weights);
    }

    #[test]
    fn best_epoch_bookkeeping() {
        let cfg = ExperimentConfig {
            epochs: 1,
            ..tiny_config(Strategy::Vanilla, Simulator::SingleClass)
        };
        let result = run_experiment(&cfg).unwrap();
        for seed in &result.seed_results {
            assert_eq!(seed.best_epoch, 1);
        }

        let cfg = tiny_config(Strategy::Vanilla, Simulator::SingleClass);
        let result = run_experiment(&cfg).unwrap();
        for seed in &result.seed_results {
            let max = seed
                .epoch_reports
                .iter()
                .map(|r| r.mean_f1)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(seed.best_mean_f1, max);
            // Prefix maxima never decrease as epochs are appended.
            let mut prefix_best = f64::NEG_INFINITY;
            let mut history = Vec::new();
            for report in &seed.epoch_reports {
                prefix_best = prefix_best.max(report.mean_f1);
                history.push(prefix_best);
            }
            assert!(history.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn all_strategies_run_and_aggregate() {
        for (strategy, simulator) in [
            (Strategy::Vanilla, Simulator::SingleClass),
            (Strategy::Mixup, Simulator::SingleClass),
            (Strategy::MixupPme, Simulator::SingleClass),
            (Strategy::Amp, Simulator::SingleClass),
            (Strategy::MixupPme, Simulator::Bernoulli { p: 0.5 }),
            (Strategy::Oracle, Simulator::None),
        ] {
            let mut cfg = tiny_config(strategy, simulator);
            if strategy == Strategy::Amp {
                cfg.alpha_k = Some(vec![0.6, 0.75, 0.9]);
            }
            let result = run_experiment(&cfg).unwrap();
            assert_eq!(result.seed_results.len(), 2);
            assert_eq!(result.aggregate.mean_per_class_f1.len(), 3);
            let by_hand = mean(
                &result
                    .seed_results
                    .iter()
                    .map(|s| s.best_mean_f1)
                    .collect::<Vec<_>>(),
            );
            assert!((result.aggregate.mean_best_f1 - by_hand).abs() < 1e-15);
        }
    }

    #[test]
    fn holdout_validation_selects_on_validation_split() {
        let mut cfg = tiny_config(Strategy::Vanilla, Simulator::SingleClass);
        cfg.holdout_validation = true;
        let result = run_experiment(&cfg).unwrap();
        for seed in &result.seed_results {
            let val = seed.validation_reports.as_ref().unwrap();
            assert_eq!(val.len(), seed.epoch_reports.len());
            let mut best = 0;
            for (i, r) in val.iter().enumerate() {
                if r.mean_f1 > val[best].mean_f1 {
                    best = i;
                }
            }
            assert_eq!(seed.best_epoch, best + 1);
            assert_eq!(seed.best_mean_f1, seed.epoch_reports[best].mean_f1);
        }
    }

    #[test]
    fn results_json_round_trip() {
        let cfg = ExperimentConfig {
            epochs: 2,
            seeds: vec![0],
            ..tiny_config(Strategy::Vanilla, Simulator::SingleClass)
        };
        let result = run_experiment(&cfg).unwrap();
        let json = results_json(&result).unwrap();
        let back: RunResult = serde_json::from_str(&json).unwrap();
        assert_eq!(result, back);
        assert_eq!(render_run_table(&result), render_run_table(&back));
    }

    #[test]
    fn sweep_grid_and_argmax() {
        let mut cfg = tiny_config(Strategy::MixupPme, Simulator::SingleClass);
        cfg.epochs = 2;
        cfg.seeds = vec![0];
        let alphas = [0.5, 0.7, 0.9];
        let sweep = run_alpha_sweep(&cfg, &alphas).unwrap();
        assert_eq!(sweep.rows.len(), 3);
        assert_eq!(sweep.best_alpha_per_class.len(), 3);
        for (class, &best) in sweep.best_alpha_per_class.iter().enumerate() {
            assert!(alphas.contains(&best));
            let best_f1 = sweep
                .rows
                .iter()
                .find(|r| r.alpha == best)
                .unwrap()
                .per_class_f1[class];
            for row in &sweep.rows {
                assert!(row.per_class_f1[class] <= best_f1 + 1e-15);
            }
        }
        let table = render_sweep_table(&sweep);
        assert!(table.contains("best_alpha"));
    }

    #[test]
    fn default_grid_is_ten_steps_from_half() {
        let grid = default_alpha_grid();
        assert_eq!(grid.len(), 10);
        assert_eq!(grid[0], 0.5);
        assert!((grid[9] - 0.95).abs() < 1e-12);
        assert!(grid.iter().all(|a| (0.5..1.0).contains(a)));
    }

    #[test]
    fn mixup_skips_class_without_pairs() {
        // One class has a single labeled sample; the epoch must still run.
        use crate::labels::LabelValue::{Missing as M, Negative as N, Positive as P};
        let features = Tensor::from_rows(&[
            vec![0.1, 0.2],
            vec![0.3, -0.2],
            vec![-0.5, 0.4],
            vec![0.9, 0.1],
        ])
        .unwrap();
        let labels = PartialLabelMatrix::from_rows(&[
            vec![P, M],
            vec![N, M],
            vec![P, M],
            vec![M, P],
        ])
        .unwrap();
        let mut net = Network::seeded(&[2, 4, 2], &mut RngStream::new(0)).unwrap();
        let mut adam = AdamState::new(&net, 1e-3);
        let mut rng = RngStream::new(1);
        let loss = train_epoch(
            &mut net,
            &mut adam,
            &features,
            &labels,
            Strategy::Mixup,
            Some(&MixConfig::Mixup { alpha: 1.0 }),
            &ClassWeights::uniform(2),
            &mut rng,
            &TrainOptions::new(4, Reduction::MaskedMeanAll),
        )
        .unwrap();
        assert!(loss.is_finite());
    }
}
