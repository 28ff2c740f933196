//! Experiment configuration: data source, partial-supervision simulator,
//! training strategy, and hyperparameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::MixConfig;
use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::loss::Reduction;

/// Where the full-label data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec },
    Csv { path: String },
}

/// How partial supervision is simulated on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Simulator {
    /// Shuffle rows into K near-equal subsets; subset k keeps only class
    /// k's label.
    SingleClass,
    /// Keep each (row, class) label independently with probability `p`.
    Bernoulli { p: f64 },
    /// No masking: the training labels are used as-is.
    None,
}

/// Training strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Masked backpropagation that ignores missing labels.
    Vanilla,
    /// Classic MixUp over per-class locally fully supervised pairs.
    Mixup,
    /// Maximum-entropy MixUp with one shared alpha.
    MixupPme,
    /// Maximum-entropy MixUp with per-class alphas.
    Amp,
    /// Trained on the untouched full labels (requires `simulator: none`).
    Oracle,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Vanilla => "vanilla",
            Strategy::Mixup => "mixup",
            Strategy::MixupPme => "mixup_pme",
            Strategy::Amp => "amp",
            Strategy::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "vanilla" => Ok(Strategy::Vanilla),
            "mixup" => Ok(Strategy::Mixup),
            "mixup_pme" => Ok(Strategy::MixupPme),
            "amp" => Ok(Strategy::Amp),
            "oracle" => Ok(Strategy::Oracle),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected vanilla, mixup, mixup_pme, amp, or oracle)"
            ))),
        }
    }
}

/// Default positive rates: 0.5 for a single class, otherwise linearly
/// decreasing from 0.5 to 0.1 so later classes are imbalanced.
pub fn default_positive_rates(num_classes: usize) -> Vec<f64> {
    if num_classes <= 1 {
        return vec![0.5; num_classes];
    }
    (0..num_classes)
        .map(|k| 0.5 - 0.4 * k as f64 / (num_classes - 1) as f64)
        .collect()
}

fn default_synthetic() -> DataSource {
    DataSource::Synthetic {
        spec: SyntheticSpec {
            num_samples: 2000,
            num_features: 16,
            num_classes: 4,
            noise: 1.0,
            positive_rates: default_positive_rates(4),
        },
    }
}

fn default_simulator() -> Simulator {
    Simulator::SingleClass
}

fn default_strategy() -> Strategy {
    Strategy::MixupPme
}

fn default_epochs() -> usize {
    30
}

fn default_batch_size() -> usize {
    64
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_threshold() -> f64 {
    0.5
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_data_seed() -> u64 {
    42
}

fn default_hidden_dims() -> Vec<usize> {
    vec![64, 32]
}

fn default_n_train() -> usize {
    1000
}

fn default_n_test() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

/// Full description of one experiment; serializes to the JSON config file
/// and is echoed verbatim into result documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_synthetic")]
    pub data: DataSource,
    #[serde(default = "default_simulator")]
    pub simulator: Simulator,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Shared mixing parameter; `None` means the strategy default
    /// (1.0 for mixup, 0.75 for mixup_pme).
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Per-class alphas, required by the amp strategy.
    #[serde(default)]
    pub alpha_k: Option<Vec<f64>>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Training seeds; each produces an independent run, aggregated by
    /// arithmetic mean.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed for data generation and the partial-label simulator; fixed
    /// across training seeds so only training stochasticity varies.
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Instance-normalize features at ingestion, before any mixing.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Select the best epoch on a fully labeled validation split carved
    /// from the training rows instead of on the test set. Off by default:
    /// the default mirrors best-epoch-on-test reporting, which is
    /// optimistic.
    #[serde(default)]
    pub holdout_validation: bool,
    #[serde(default)]
    pub loss_reduction: Reduction,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: default_synthetic(),
            simulator: default_simulator(),
            strategy: default_strategy(),
            alpha: None,
            alpha_k: None,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            threshold: default_threshold(),
            seeds: default_seeds(),
            data_seed: default_data_seed(),
            hidden_dims: default_hidden_dims(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            normalize: default_true(),
            holdout_validation: false,
            loss_reduction: Reduction::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reject contradictory configurations before any work happens.
    /// `num_classes` is known upfront for synthetic data and re-checked
    /// against the header after a CSV load.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("train and test splits must be nonempty".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden dimensions must be positive".into()));
        }
        if self.strategy == Strategy::Oracle && self.simulator != Simulator::None {
            return Err(Error::Config(
                "the oracle strategy trains on full labels; set simulator to none".into(),
            ));
        }
        if self.strategy == Strategy::Mixup && !matches!(self.simulator, Simulator::SingleClass) {
            return Err(Error::Config(
                "classic mixup needs locally full supervision; set simulator to single_class"
                    .into(),
            ));
        }
        if self.strategy == Strategy::Amp && self.alpha_k.is_none() {
            return Err(Error::Config("the amp strategy requires alpha_k".into()));
        }
        if let Simulator::Bernoulli { p } = self.simulator {
            if !(0.0 < p && p <= 1.0) {
                return Err(Error::Config(format!(
                    "bernoulli keep probability must lie in (0, 1], got {p}"
                )));
            }
        }
        if let DataSource::Synthetic { spec } = &self.data {
            spec.validate()?;
            if spec.num_samples < self.n_train + self.n_test {
                return Err(Error::Config(format!(
                    "synthetic spec generates {} samples but the split needs {}",
                    spec.num_samples,
                    self.n_train + self.n_test
                )));
            }
            self.validate_for_classes(spec.num_classes)?;
        }
        Ok(())
    }

    /// Checks that need the class count (known late for CSV sources).
    pub fn validate_for_classes(&self, num_classes: usize) -> Result<()> {
        if num_classes > 64 {
            return Err(Error::Config(
                "at most 64 classes are supported by the batch grouping".into(),
            ));
        }
        if let Some(mix) = self.mix_config() {
            mix.validate(num_classes)?;
        }
        Ok(())
    }

    /// The mixing configuration implied by strategy + alpha fields, with
    /// strategy defaults applied; `None` for vanilla and oracle.
    pub fn mix_config(&self) -> Option<MixConfig> {
        match self.strategy {
            Strategy::Vanilla | Strategy::Oracle => None,
            Strategy::Mixup => Some(MixConfig::Mixup {
                alpha: self.alpha.unwrap_or(1.0),
            }),
            Strategy::MixupPme => Some(MixConfig::MixupPme {
                alpha: self.alpha.unwrap_or(0.75),
            }),
            Strategy::Amp => Some(MixConfig::Amp {
                alpha_k: self.alpha_k.clone().unwrap_or_default(),
            }),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
