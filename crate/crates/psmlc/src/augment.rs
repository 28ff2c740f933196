//! Vicinal batch construction by convex mixing.
//!
//! Two modes:
//!
//! - classic MixUp over pairs that are both labeled for the classes being
//!   trained (`lambda ~ Beta(alpha, alpha)`);
//! - maximum-entropy MixUp for arbitrary partial labels: missing entries
//!   are filled with 0.5, `lambda ~ Uniform(alpha, 1)` with
//!   `0.5 <= alpha < 1`, and the loss mask comes from the base batch only.
//!   Keeping the base weight above 0.5 pins the mixed label on the side of
//!   the known base label: with a missing companion, a base label of 1
//!   yields a target in (0.75, 1) and a base label of 0 a target in
//!   (0, 0.25).
//!
//! One lambda is drawn per batch (a scalar, as in batch-wise mixing).
//! For per-class alphas the draw uses the tightest lower bound required by
//! the labeled classes of the base rows, so grouping batches by base label
//! class recovers the per-class schedule exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::PartialLabelMatrix;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Mixing strategy and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum MixConfig {
    /// Classic MixUp: `lambda ~ Beta(alpha, alpha)` over locally fully
    /// supervised pairs.
    Mixup { alpha: f64 },
    /// Maximum-entropy MixUp with one shared alpha:
    /// `lambda ~ Uniform(alpha, 1)`.
    MixupPme { alpha: f64 },
    /// Per-class alphas; the batch lambda uses the largest alpha among the
    /// classes labeled in the base rows.
    Amp { alpha_k: Vec<f64> },
}

impl MixConfig {
    /// Check hyperparameter ranges; `num_classes` is needed to size the
    /// per-class list.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            MixConfig::Mixup { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Config(format!(
                        "mixup alpha must be positive, got {alpha}"
                    )));
                }
            }
            MixConfig::MixupPme { alpha } => {
                if !(0.5..1.0).contains(alpha) {
                    return Err(Error::Config(format!(
                        "mixup_pme alpha must lie in [0.5, 1), got {alpha}"
                    )));
                }
            }
            MixConfig::Amp { alpha_k } => {
                if alpha_k.len() != num_classes {
                    return Err(Error::Config(format!(
                        "amp needs {num_classes} per-class alphas, got {}",
                        alpha_k.len()
                    )));
                }
                for (k, a) in alpha_k.iter().enumerate() {
                    if !(0.5..1.0).contains(a) {
                        return Err(Error::Config(format!(
                            "amp alpha for class {k} must lie in [0.5, 1), got {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Lower bound for the lambda draw: the largest alpha among classes
    /// labeled in any base row (so every per-class constraint holds
    /// simultaneously). Rows with no labeled class impose no constraint
    /// beyond the 0.5 floor.
    fn required_alpha(&self, base: &PartialLabelMatrix) -> Result<f64> {
        match self {
            MixConfig::Mixup { .. } => Err(Error::Config(
                "required_alpha is defined for the uniform-lambda strategies".into(),
            )),
            MixConfig::MixupPme { alpha } => Ok(*alpha),
            MixConfig::Amp { alpha_k } => {
                let mut bound = 0.5;
                for row in 0..base.rows() {
                    for (k, entry) in base.row(row).iter().enumerate() {
                        if entry.is_labeled() && alpha_k[k] > bound {
                            bound = alpha_k[k];
                        }
                    }
                }
                Ok(bound)
            }
        }
    }
}

/// A mixed batch ready for the masked loss.
#[derive(Debug, Clone)]
pub struct VicinalBatch {
    /// `lambda * x1 + (1 - lambda) * x2`.
    pub inputs: Tensor,
    /// Dense targets in `[0, 1]` (filled labels mixed with the same lambda).
    pub targets: Tensor,
    /// Loss mask from the base batch's missing pattern.
    pub mask: Tensor,
    /// The lambda used for this batch.
    pub lambda: f64,
}

/// `lambda * a + (1 - lambda) * b`, element-wise.
pub fn mix_rows(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect()
}

/// Classic MixUp of one pair over the given class set, with an explicit
/// lambda. Both samples must be labeled for every class in `classes`.
pub fn mixup_pair_with_lambda(
    x_i: &[f64],
    y_i: &[crate::labels::LabelValue],
    x_j: &[f64],
    y_j: &[crate::labels::LabelValue],
    classes: &[usize],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x_i.len() != x_j.len() {
        return Err(Error::Input("feature lengths differ".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Input(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let mut mixed_labels = Vec::with_capacity(classes.len());
    for &k in classes {
        if k >= y_i.len() || k >= y_j.len() {
            return Err(Error::Input(format!("class {k} out of range")));
        }
        if !y_i[k].is_labeled() || !y_j[k].is_labeled() {
            return Err(Error::Input(format!(
                "class {k} is not labeled on both samples (locally full supervision required)"
            )));
        }
        mixed_labels.push(lambda * y_i[k].fill_value() + (1.0 - lambda) * y_j[k].fill_value());
    }
    Ok((mix_rows(x_i, x_j, lambda), mixed_labels))
}

/// Classic MixUp of one pair, drawing `lambda ~ Beta(alpha, alpha)`.
/// Returns the mixed features, the mixed labels over `classes`, and the
/// lambda that was drawn.
pub fn mixup_pair(
    x_i: &[f64],
    y_i: &[crate::labels::LabelValue],
    x_j: &[f64],
    y_j: &[crate::labels::LabelValue],
    classes: &[usize],
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let lambda = rng.beta_symmetric(alpha)?;
    let (x, y) = mixup_pair_with_lambda(x_i, y_i, x_j, y_j, classes, lambda)?;
    Ok((x, y, lambda))
}

/// Maximum-entropy mixing of two batches with an explicit lambda.
///
/// Fills both label batches with 0.5 at missing entries, mixes features and
/// filled targets with the same lambda, and masks the loss to the entries
/// labeled in the base batch (`labels1`).
pub fn mixup_pme_batch_with_lambda(
    x1: &Tensor,
    labels1: &PartialLabelMatrix,
    x2: &Tensor,
    labels2: &PartialLabelMatrix,
    lambda: f64,
) -> Result<VicinalBatch> {
    if x1.shape() != x2.shape() || x1.shape().len() != 2 {
        return Err(Error::Input(format!(
            "batch shapes differ: {:?} vs {:?}",
            x1.shape(),
            x2.shape()
        )));
    }
    if labels1.rows() != x1.rows()
        || labels2.rows() != x2.rows()
        || labels1.cols() != labels2.cols()
    {
        return Err(Error::Input("label batch shapes do not match features".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Input(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let y1 = labels1.pme_fill();
    let y2 = labels2.pme_fill();
    let inputs = Tensor::from_vec(x1.shape(), mix_rows(x1.data(), x2.data(), lambda))?;
    let targets = Tensor::from_vec(y1.shape(), mix_rows(y1.data(), y2.data(), lambda))?;
    Ok(VicinalBatch {
        inputs,
        targets,
        mask: labels1.mask_of(),
        lambda,
    })
}

/// Maximum-entropy mixing of two batches, drawing the batch lambda from
/// `Uniform(alpha, 1)` per the configured strategy.
pub fn mixup_pme_batch(
    x1: &Tensor,
    labels1: &PartialLabelMatrix,
    x2: &Tensor,
    labels2: &PartialLabelMatrix,
    config: &MixConfig,
    rng: &mut RngStream,
) -> Result<VicinalBatch> {
    if matches!(config, MixConfig::Mixup { .. }) {
        return Err(Error::Config(
            "mixup_pme_batch requires the mixup_pme or amp strategy".into(),
        ));
    }
    config.validate(labels1.cols())?;
    let alpha = config.required_alpha(labels1)?;
    let lambda = rng.uniform(alpha, 1.0)?;
    mixup_pme_batch_with_lambda(x1, labels1, x2, labels2, lambda)
}

/// Index pairs for one epoch of locally fully supervised MixUp on `class`:
/// every emitted index is labeled for that class, pairing is uniform
/// without replacement, and an odd sample out is paired with a random
/// earlier partner so each labeled sample appears at least once.
///
/// Returns an empty stream when fewer than two samples are labeled.
pub fn pair_sampler_locally_full(
    labels: &PartialLabelMatrix,
    class: usize,
    rng: &mut RngStream,
) -> Vec<(usize, usize)> {
    let mut labeled: Vec<usize> = (0..labels.rows())
        .filter(|&r| labels.get(r, class).is_labeled())
        .collect();
    if labeled.len() < 2 {
        return Vec::new();
    }
    rng.shuffle(&mut labeled);
    let mut pairs: Vec<(usize, usize)> = labeled.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    if labeled.len() % 2 == 1 {
        let last = labeled[labeled.len() - 1];
        let partner = labeled[rng.index(labeled.len() - 1)];
        pairs.push((last, partner));
    }
    pairs
}

/// Uniformly random permutation of `0..len`, used to pick the companion
/// batch. Fixed points are allowed; a self-pair degenerates to identity
/// mixing. A batch of one maps to itself.
pub fn pair_sampler_shuffle(len: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut perm);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelValue::{Missing as M, Negative as N, Positive as P};

    fn table1_batches() -> (Tensor, PartialLabelMatrix, Tensor, PartialLabelMatrix) {
        let x1 = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let x2 = Tensor::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let l1 = PartialLabelMatrix::from_rows(&[vec![P, M, N, M]]).unwrap();
        let l2 = PartialLabelMatrix::from_rows(&[vec![P, P, M, M]]).unwrap();
        (x1, l1, x2, l2)
    }

    #[test]
    fn worked_example_at_lambda_three_quarters() {
        // y1 = [1, ?, 0, ?], y2 = [1, 1, ?, ?], lambda = 0.75:
        // targets [1, 0.625, 0.125, 0.5], mask [1, 0, 1, 0].
        let (x1, l1, x2, l2) = table1_batches();
        let vb = mixup_pme_batch_with_lambda(&x1, &l1, &x2, &l2, 0.75).unwrap();
        assert_eq!(vb.targets.data(), &[1.0, 0.625, 0.125, 0.5]);
        assert_eq!(vb.mask.data(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(vb.inputs.data(), &[0.75, 0.25]);
    }

    #[test]
    fn lambda_one_is_the_identity_endpoint() {
        let (x1, l1, x2, l2) = table1_batches();
        let vb = mixup_pme_batch_with_lambda(&x1, &l1, &x2, &l2, 1.0).unwrap();
        assert!(vb.inputs.bit_eq(&x1));
        assert!(vb.targets.bit_eq(&l1.pme_fill()));
    }

    #[test]
    fn positive_base_with_missing_companion_stays_high() {
        // Base label 1, companion missing: target = 0.5 + 0.5 * lambda.
        let x1 = Tensor::from_rows(&[vec![0.0]]).unwrap();
        let x2 = Tensor::from_rows(&[vec![1.0]]).unwrap();
        let l1 = PartialLabelMatrix::from_rows(&[vec![P]]).unwrap();
        let l2 = PartialLabelMatrix::from_rows(&[vec![M]]).unwrap();
        let mut rng = RngStream::new(3);
        for _ in 0..200 {
            let lambda = rng.uniform(0.5, 1.0).unwrap();
            let vb = mixup_pme_batch_with_lambda(&x1, &l1, &x2, &l2, lambda).unwrap();
            let t = vb.targets.data()[0];
            assert!((t - (0.5 + 0.5 * lambda)).abs() < 1e-15);
            if lambda > 0.5 {
                assert!(t > 0.75 && t < 1.0);
            }
        }
    }

    #[test]
    fn mask_comes_from_base_batch_only() {
        let (x1, l1, x2, _) = table1_batches();
        let companion_variants = [
            PartialLabelMatrix::from_rows(&[vec![P, P, P, P]]).unwrap(),
            PartialLabelMatrix::from_rows(&[vec![M, M, M, M]]).unwrap(),
            PartialLabelMatrix::from_rows(&[vec![N, M, P, N]]).unwrap(),
        ];
        for l2 in &companion_variants {
            let vb = mixup_pme_batch_with_lambda(&x1, &l1, &x2, l2, 0.8).unwrap();
            assert_eq!(vb.mask.data(), l1.mask_of().data());
        }
    }

    #[test]
    fn convexity_of_mixed_inputs() {
        let mut rng = RngStream::new(9);
        for _ in 0..100 {
            let a: Vec<f64> = (0..6).map(|_| rng.normal() * 3.0).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.normal() * 3.0).collect();
            let lambda = rng.uniform_01();
            let m = mix_rows(&a, &b, lambda);
            for i in 0..6 {
                let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
                assert!(m[i] >= lo - 1e-12 && m[i] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn fully_labeled_rows_reduce_to_classic_mixup() {
        // With both rows fully labeled and a fixed lambda, the unified
        // transform equals plain convex label mixing with a full mask.
        let x1 = Tensor::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let x2 = Tensor::from_rows(&[vec![0.5, 4.0]]).unwrap();
        let l1 = PartialLabelMatrix::from_rows(&[vec![P, N, P]]).unwrap();
        let l2 = PartialLabelMatrix::from_rows(&[vec![N, N, P]]).unwrap();
        let lambda = 0.6;
        let vb = mixup_pme_batch_with_lambda(&x1, &l1, &x2, &l2, lambda).unwrap();
        let (xm, ym) = mixup_pair_with_lambda(
            x1.row(0),
            l1.row(0),
            x2.row(0),
            l2.row(0),
            &[0, 1, 2],
            lambda,
        )
        .unwrap();
        assert_eq!(vb.inputs.data(), &xm[..]);
        assert_eq!(vb.targets.data(), &ym[..]);
        assert!(vb.mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn mixup_pair_hand_example() {
        // x_i = [0, 0], x_j = [2, 4], y_i = 1, y_j = 0, lambda = 0.25
        // -> x = [1.5, 3], y = 0.25.
        let (x, y) = mixup_pair_with_lambda(
            &[0.0, 0.0],
            &[P],
            &[2.0, 4.0],
            &[N],
            &[0],
            0.25,
        )
        .unwrap();
        assert_eq!(x, vec![1.5, 3.0]);
        assert_eq!(y, vec![0.25]);
    }

    #[test]
    fn mixup_pair_endpoint_and_fixed_point() {
        let (x, y) =
            mixup_pair_with_lambda(&[1.0, 2.0], &[P], &[5.0, 6.0], &[N], &[0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(y, vec![1.0]);

        // Equal labels are a fixed point for any lambda.
        let mut rng = RngStream::new(4);
        for _ in 0..20 {
            let lambda = rng.uniform_01();
            let (_, y) =
                mixup_pair_with_lambda(&[0.0], &[P], &[1.0], &[P], &[0], lambda).unwrap();
            assert!((y[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mixup_pair_rejects_missing_labels() {
        let err = mixup_pair_with_lambda(&[0.0], &[M], &[1.0], &[P], &[0], 0.5);
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn pme_batch_rejects_classic_mixup_config() {
        let (x1, l1, x2, l2) = table1_batches();
        let mut rng = RngStream::new(0);
        let err = mixup_pme_batch(&x1, &l1, &x2, &l2, &MixConfig::Mixup { alpha: 1.0 }, &mut rng);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn pme_batch_rejects_alpha_out_of_range() {
        let (x1, l1, x2, l2) = table1_batches();
        let mut rng = RngStream::new(0);
        for alpha in [0.49, 1.0, 1.5] {
            let err = mixup_pme_batch(
                &x1,
                &l1,
                &x2,
                &l2,
                &MixConfig::MixupPme { alpha },
                &mut rng,
            );
            assert!(matches!(err, Err(Error::Config(_))), "alpha {alpha} accepted");
        }
    }

    #[test]
    fn amp_uses_largest_required_alpha() {
        // Base rows labeled for classes 0 and 2 -> bound = max(0.55, 0.9).
        let l1 = PartialLabelMatrix::from_rows(&[vec![P, M, M], vec![M, M, N]]).unwrap();
        let cfg = MixConfig::Amp {
            alpha_k: vec![0.55, 0.7, 0.9],
        };
        assert_eq!(cfg.required_alpha(&l1).unwrap(), 0.9);

        // Single-class rows use exactly that class's alpha.
        let single = PartialLabelMatrix::from_rows(&[vec![M, P, M]]).unwrap();
        assert_eq!(cfg.required_alpha(&single).unwrap(), 0.7);

        // All-missing rows impose only the 0.5 floor.
        let empty = PartialLabelMatrix::new(2, 3).unwrap();
        assert_eq!(cfg.required_alpha(&empty).unwrap(), 0.5);
    }

    #[test]
    fn amp_validates_per_class_list() {
        assert!(MixConfig::Amp { alpha_k: vec![0.6, 0.7] }.validate(3).is_err());
        assert!(MixConfig::Amp { alpha_k: vec![0.6, 1.0, 0.7] }.validate(3).is_err());
        assert!(MixConfig::Amp { alpha_k: vec![0.6, 0.9, 0.7] }.validate(3).is_ok());
    }

    #[test]
    fn locally_full_sampler_only_emits_labeled_pairs() {
        let labels = PartialLabelMatrix::from_rows(&[
            vec![P, M],
            vec![M, P],
            vec![N, M],
            vec![M, N],
            vec![P, M],
        ])
        .unwrap();
        let mut rng = RngStream::new(6);
        for class in 0..2 {
            let pairs = pair_sampler_locally_full(&labels, class, &mut rng);
            assert!(!pairs.is_empty());
            for (i, j) in pairs {
                assert!(labels.get(i, class).is_labeled());
                assert!(labels.get(j, class).is_labeled());
            }
        }
    }

    #[test]
    fn locally_full_sampler_covers_every_labeled_sample() {
        let labels = PartialLabelMatrix::from_rows(&[
            vec![P, M],
            vec![N, M],
            vec![P, M],
            vec![M, P],
            vec![M, N],
        ])
        .unwrap();
        let mut rng = RngStream::new(12);
        let mut seen = vec![false; labels.rows()];
        for class in 0..2 {
            for (i, j) in pair_sampler_locally_full(&labels, class, &mut rng) {
                seen[i] = true;
                seen[j] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "coverage: {seen:?}");
    }

    #[test]
    fn locally_full_sampler_empty_below_two() {
        let labels = PartialLabelMatrix::from_rows(&[vec![P], vec![M], vec![M]]).unwrap();
        let mut rng = RngStream::new(0);
        assert!(pair_sampler_locally_full(&labels, 0, &mut rng).is_empty());
    }

    #[test]
    fn shuffle_sampler_degenerate_batch() {
        let mut rng = RngStream::new(0);
        assert_eq!(pair_sampler_shuffle(1, &mut rng), vec![0]);
    }

    #[test]
    fn shuffle_sampler_is_reproducible_permutation() {
        let a = pair_sampler_shuffle(64, &mut RngStream::new(14));
        let b = pair_sampler_shuffle(64, &mut RngStream::new(14));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..64).collect::<Vec<usize>>());
    }

    #[test]
    fn shuffle_sampler_companions_roughly_uniform() {
        // Chi-square style sanity: over many draws each companion position
        // should appear with frequency near 1/64.
        let mut rng = RngStream::new(15);
        let draws = 10_000;
        let mut counts = vec![0usize; 64];
        for _ in 0..draws {
            let perm = pair_sampler_shuffle(64, &mut rng);
            counts[perm[0]] += 1;
        }
        let expected = draws as f64 / 64.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 63 degrees of freedom; 120 is far beyond any plausible value
        // for a uniform permutation (p < 1e-5 would be ~125).
        assert!(chi2 < 120.0, "chi2 {chi2}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            /// Masked-in entries with a missing companion stay inside the
            /// ranges implied by the base label whenever lambda > 0.5.
            #[test]
            fn vicinal_label_ranges(
                alpha in 0.5f64..0.99,
                seed in 0u64..1000,
                base_positive in proptest::bool::ANY,
            ) {
                let mut rng = RngStream::new(seed);
                let lambda = rng.uniform(alpha, 1.0).unwrap();
                let base = if base_positive { P } else { N };
                let l1 = PartialLabelMatrix::from_rows(&[vec![base]]).unwrap();
                let l2 = PartialLabelMatrix::from_rows(&[vec![M]]).unwrap();
                let x = Tensor::from_rows(&[vec![0.0]]).unwrap();
                let vb = mixup_pme_batch_with_lambda(&x, &l1, &x, &l2, lambda).unwrap();
                let t = vb.targets.data()[0];
                if lambda > 0.5 {
                    if base_positive {
                        prop_assert!(t > 0.75 && t < 1.0, "t = {t}, lambda = {lambda}");
                    } else {
                        prop_assert!(t > 0.0 && t < 0.25, "t = {t}, lambda = {lambda}");
                    }
                }
            }

            /// Mixed targets always stay in [0, 1].
            #[test]
            fn targets_stay_in_unit_interval(lambda in 0.0f64..=1.0, seed in 0u64..500) {
                let mut rng = RngStream::new(seed);
                let entries: Vec<_> = (0..8)
                    .map(|_| match rng.index(3) {
                        0 => P,
                        1 => N,
                        _ => M,
                    })
                    .collect();
                let l1 = PartialLabelMatrix::from_entries(2, 4, entries.clone()).unwrap();
                let mut rev = entries;
                rev.reverse();
                let l2 = PartialLabelMatrix::from_entries(2, 4, rev).unwrap();
                let x = Tensor::zeros(&[2, 3]);
                let vb = mixup_pme_batch_with_lambda(&x, &l1, &x, &l2, lambda).unwrap();
                prop_assert!(vb.targets.data().iter().all(|&t| (0.0..=1.0).contains(&t)));
            }
        }
    }
}
