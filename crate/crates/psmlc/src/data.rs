//! Dataset creation and ingestion: synthetic generation, CSV round trip,
//! instance normalization, splitting, and the partial-supervision
//! simulators.
//!
//! CSV layout: UTF-8, comma separated, header
//! `f0,..,f{D-1},label:<name0>,..,label:<name{K-1}>`, feature values as
//! decimal floats, label tokens exactly `0`, `1`, `?`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelValue, PartialLabelMatrix, ValidateOptions};
use crate::rng::{RngStream, StreamId};
use crate::tensor::Tensor;

/// Feature matrix plus ternary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: PartialLabelMatrix,
    pub class_names: Vec<String>,
    /// Free-text record of where the data came from (generator seed or
    /// source path).
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: PartialLabelMatrix,
        class_names: Vec<String>,
        provenance: String,
    ) -> Result<Self> {
        if features.rows() != labels.rows() {
            return Err(Error::Input(format!(
                "feature rows ({}) != label rows ({})",
                features.rows(),
                labels.rows()
            )));
        }
        if class_names.len() != labels.cols() {
            return Err(Error::Input(format!(
                "{} class names for {} classes",
                class_names.len(),
                labels.cols()
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            provenance,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.cols()
    }
}

/// Parameters of the synthetic multi-label generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_samples: usize,
    pub num_features: usize,
    pub num_classes: usize,
    /// Scale of the Gaussian noise added to the latent features.
    pub noise: f64,
    /// Target fraction of positives per class, each in (0, 1).
    pub positive_rates: Vec<f64>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_features == 0 || self.num_classes == 0 {
            return Err(Error::Config("feature and class counts must be positive".into()));
        }
        if self.num_samples < 2 * self.num_classes {
            return Err(Error::Config(format!(
                "need at least {} samples for {} classes",
                2 * self.num_classes,
                self.num_classes
            )));
        }
        if self.positive_rates.len() != self.num_classes {
            return Err(Error::Config(format!(
                "expected {} positive rates, got {}",
                self.num_classes,
                self.positive_rates.len()
            )));
        }
        if self.positive_rates.iter().any(|r| !(0.0 < *r && *r < 1.0)) {
            return Err(Error::Config("positive rates must lie in (0, 1)".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("noise scale must be a finite non-negative".into()));
        }
        Ok(())
    }
}

/// Fully labeled synthetic dataset, deterministic per `(spec, seed)`.
///
/// Latent points are standard normal; class `k` is positive where a random
/// linear score `a_k . z` exceeds the empirical quantile that hits the
/// target rate exactly; features are the latent points plus scaled Gaussian
/// noise. With `noise = 0` every class is exactly linearly separable.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let (n, d, k) = (spec.num_samples, spec.num_features, spec.num_classes);
    let mut rng = RngStream::named(seed, StreamId::Data);

    let latent = Tensor::from_vec(&[n, d], (0..n * d).map(|_| rng.normal()).collect())?;
    let planes = Tensor::from_vec(&[k, d], (0..k * d).map(|_| rng.normal()).collect())?;

    let mut labels = PartialLabelMatrix::new(n, k)?;
    for class in 0..k {
        let plane = planes.row(class);
        let scores: Vec<f64> = (0..n)
            .map(|row| {
                latent
                    .row(row)
                    .iter()
                    .zip(plane)
                    .map(|(z, a)| z * a)
                    .sum::<f64>()
            })
            .collect();
        let positives = (spec.positive_rates[class] * n as f64).round() as usize;
        if positives == 0 || positives >= n {
            return Err(Error::Generation(format!(
                "rate {} for class {class} leaves no samples on one side",
                spec.positive_rates[class]
            )));
        }
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
        let tau = sorted[positives];
        if sorted[positives - 1] <= tau {
            return Err(Error::Generation(format!(
                "degenerate score tie for class {class}; cannot hit rate exactly"
            )));
        }
        for (row, &s) in scores.iter().enumerate() {
            labels.set(
                row,
                class,
                if s > tau { LabelValue::Positive } else { LabelValue::Negative },
            );
        }
    }

    let features = if spec.noise > 0.0 {
        let mut data = latent.data().to_vec();
        for v in &mut data {
            *v += spec.noise * rng.normal();
        }
        Tensor::from_vec(&[n, d], data)?
    } else {
        latent
    };

    let class_names = (0..k).map(|c| format!("c{c}")).collect();
    let provenance = format!(
        "synthetic(seed={seed}, n={n}, d={d}, k={k}, noise={})",
        spec.noise
    );
    Dataset::new(features, labels, class_names, provenance)
}

/// Per-sample standardization: each row maps to `(x - mean) / std` with the
/// population standard deviation, guarded by `max(std, 1e-8)` so constant
/// rows map to zeros.
pub fn instance_normalize(features: &Tensor) -> Tensor {
    let (n, d) = (features.rows(), features.cols());
    let mut out = Tensor::zeros(&[n, d]);
    for row in 0..n {
        let x = features.row(row);
        let mean = x.iter().sum::<f64>() / d as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let std = var.sqrt().max(1e-8);
        for col in 0..d {
            out.set(row, col, (x[col] - mean) / std);
        }
    }
    out
}

/// Contiguous split: train is the first `n_train` rows, test the next
/// `n_test`. No shuffling.
pub fn split_train_test(ds: &Dataset, n_train: usize, n_test: usize) -> Result<(Dataset, Dataset)> {
    if n_train + n_test > ds.num_samples() {
        return Err(Error::Input(format!(
            "split {}+{} exceeds {} samples",
            n_train,
            n_test,
            ds.num_samples()
        )));
    }
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..n_train + n_test).collect();
    let train = Dataset::new(
        ds.features.gather_rows(&train_idx),
        ds.labels.gather_rows(&train_idx),
        ds.class_names.clone(),
        format!("{}; rows [0, {n_train})", ds.provenance),
    )?;
    let test = Dataset::new(
        ds.features.gather_rows(&test_idx),
        ds.labels.gather_rows(&test_idx),
        ds.class_names.clone(),
        format!("{}; rows [{n_train}, {})", ds.provenance, n_train + n_test),
    )?;
    Ok((train, test))
}

const PARTITION_RETRIES: u64 = 8;

/// Keep exactly one labeled class per row: rows are shuffled by seed and
/// dealt into `K` near-equal subsets; subset `k` keeps only class `k`'s
/// label. Re-draws with the next seed offset (up to 8 attempts) if some
/// class ends up without labeled positives or negatives.
pub fn make_single_class_partition(
    labels: &PartialLabelMatrix,
    seed: u64,
) -> Result<PartialLabelMatrix> {
    if !labels.is_fully_labeled() {
        return Err(Error::Input("partition input must be fully labeled".into()));
    }
    let (n, k) = (labels.rows(), labels.cols());
    for attempt in 0..PARTITION_RETRIES {
        let mut rng = RngStream::named(seed.wrapping_add(attempt), StreamId::Partition);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);

        let base = n / k;
        let remainder = n % k;
        let mut out = PartialLabelMatrix::new(n, k)?;
        let mut cursor = 0;
        for class in 0..k {
            let size = base + usize::from(class < remainder);
            for &row in &order[cursor..cursor + size] {
                out.set(row, class, labels.get(row, class));
            }
            cursor += size;
        }
        if out
            .validate_partial_dataset(&ValidateOptions::default())
            .is_valid()
        {
            return Ok(out);
        }
    }
    Err(Error::Partition(format!(
        "single-class partition failed the positive/negative presence check \
         after {PARTITION_RETRIES} attempts"
    )))
}

/// Keep each (row, class) label independently with probability `p`
/// (row-major draw order); remaining entries become missing. Rows may end
/// up fully labeled or fully missing. Same retry policy as the
/// single-class partition.
pub fn make_bernoulli_partial(
    labels: &PartialLabelMatrix,
    p: f64,
    seed: u64,
) -> Result<PartialLabelMatrix> {
    if !labels.is_fully_labeled() {
        return Err(Error::Input("partition input must be fully labeled".into()));
    }
    if !(0.0 < p && p <= 1.0) {
        return Err(Error::Input(format!("keep probability must lie in (0, 1], got {p}")));
    }
    let (n, k) = (labels.rows(), labels.cols());
    for attempt in 0..PARTITION_RETRIES {
        let mut rng = RngStream::named(seed.wrapping_add(attempt), StreamId::Partition);
        let mut out = PartialLabelMatrix::new(n, k)?;
        for row in 0..n {
            for class in 0..k {
                if rng.uniform_01() < p {
                    out.set(row, class, labels.get(row, class));
                }
            }
        }
        if out
            .validate_partial_dataset(&ValidateOptions::default())
            .is_valid()
        {
            return Ok(out);
        }
    }
    Err(Error::Partition(format!(
        "Bernoulli({p}) masking failed the positive/negative presence check \
         after {PARTITION_RETRIES} attempts"
    )))
}

/// Write a dataset in the crate's CSV layout.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let mut header = String::new();
    for col in 0..ds.num_features() {
        if col > 0 {
            header.push(',');
        }
        let _ = write!(header, "f{col}");
    }
    for name in &ds.class_names {
        let _ = write!(header, ",label:{name}");
    }
    writeln!(w, "{header}")?;
    for row in 0..ds.num_samples() {
        let mut line = String::new();
        for (col, v) in ds.features.row(row).iter().enumerate() {
            if col > 0 {
                line.push(',');
            }
            let _ = write!(line, "{v}");
        }
        for entry in ds.labels.row(row) {
            let _ = write!(line, ",{}", entry.token());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_csv`]. Errors carry 1-based line
/// numbers.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;

    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let mut num_features = 0;
    while num_features < headers.len() && headers[num_features] == format!("f{num_features}") {
        num_features += 1;
    }
    if num_features == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with feature columns f0, f1, ..".into(),
        });
    }
    let mut class_names = Vec::new();
    for field in headers.iter().skip(num_features) {
        match field.strip_prefix("label:") {
            Some(name) => class_names.push(name.to_string()),
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!(
                        "unexpected header column {field:?}; features must be f0..f{} \
                         followed by label:<name> columns",
                        num_features - 1
                    ),
                })
            }
        }
    }
    if class_names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no label columns found".into(),
        });
    }

    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut label_rows: Vec<Vec<LabelValue>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map_or(feature_rows.len() as u64 + 2, csv::Position::line);
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let mut features = Vec::with_capacity(num_features);
        for value in record.iter().take(num_features) {
            features.push(value.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid feature value {value:?}"),
            })?);
        }
        let mut labels = Vec::with_capacity(class_names.len());
        for token in record.iter().skip(num_features) {
            labels.push(LabelValue::from_token(token.trim()).map_err(|_| Error::Parse {
                line,
                message: format!("unknown label token {token:?}"),
            })?);
        }
        feature_rows.push(features);
        label_rows.push(labels);
    }

    Dataset::new(
        Tensor::from_rows(&feature_rows)?,
        PartialLabelMatrix::from_rows(&label_rows)?,
        class_names,
        path.display().to_string(),
    )
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => fallback_line,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}
