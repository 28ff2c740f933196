//! Masked weighted binary cross-entropy, computed in the logits domain.
//!
//! Per entry, with `p = sigmoid(z)` and target `t`:
//!
//! `L = -[w_pos * t * log p + w_neg * (1 - t) * log(1 - p)]`
//!
//! evaluated through softplus so no probability is ever clamped. Masked
//! entries contribute exactly zero to both the loss and the gradient: they
//! are skipped, not multiplied by zero, so no value at a masked slot can
//! leak through (not even a NaN).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClassWeights;
use crate::tensor::Tensor;

/// How the per-entry masked losses reduce to a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Mean over all N*K entries, masked entries counting as zeros. This is
    /// the batch-wise `(loss * mask).mean()` reduction and the default.
    #[default]
    MaskedMeanAll,
    /// Mean over unmasked entries only.
    MeanOverUnmasked,
}

/// Numerically stable logistic function; exact 0.5 at 0, no overflow for
/// |z| up to the f64 exponent range. The output is kept strictly inside
/// (0, 1): saturated values land on the nearest representable neighbor of
/// the endpoint instead of the endpoint itself.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0_f64.next_down())
}

/// Element-wise sigmoid.
pub fn sigmoid_tensor(logits: &Tensor) -> Tensor {
    let data = logits.data().iter().map(|&z| sigmoid(z)).collect();
    Tensor::from_vec(logits.shape(), data).expect("same shape")
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Masked weighted BCE over a batch of logits.
///
/// Returns the reduced scalar loss and `dLoss/dLogits` (same shape as
/// `logits`, exactly zero at masked entries).
pub fn masked_weighted_bce(
    logits: &Tensor,
    targets: &Tensor,
    mask: &Tensor,
    weights: &ClassWeights,
    reduction: Reduction,
) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 2 {
        return Err(Error::Input("logits must be 2-D".into()));
    }
    if targets.shape() != logits.shape() || mask.shape() != logits.shape() {
        return Err(Error::Input(format!(
            "shape mismatch: logits {:?}, targets {:?}, mask {:?}",
            logits.shape(),
            targets.shape(),
            mask.shape()
        )));
    }
    let (n, k) = (logits.rows(), logits.cols());
    if weights.len() != k {
        return Err(Error::Input(format!(
            "expected {k} class weights, got {}",
            weights.len()
        )));
    }
    if targets.data().iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::Input("targets must lie in [0, 1]".into()));
    }
    if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(Error::Input("mask entries must be 0 or 1".into()));
    }

    let unmasked = mask.data().iter().filter(|&&m| m == 1.0).count();
    let denom = match reduction {
        Reduction::MaskedMeanAll => (n * k) as f64,
        Reduction::MeanOverUnmasked => unmasked as f64,
    };
    let mut d_logits = Tensor::zeros(&[n, k]);
    if denom == 0.0 {
        return Ok((0.0, d_logits));
    }

    let mut total = 0.0;
    for row in 0..n {
        for col in 0..k {
            if mask.at(row, col) == 0.0 {
                continue;
            }
            let z = logits.at(row, col);
            if !z.is_finite() {
                return Err(Error::Input(format!(
                    "non-finite logit at ({row}, {col})"
                )));
            }
            let t = targets.at(row, col);
            let w = weights.class(col);
            // -log p = softplus(-z), -log(1-p) = softplus(z)
            total += w.pos_weight * t * softplus(-z) + w.neg_weight * (1.0 - t) * softplus(z);
            let p = sigmoid(z);
            let grad = w.pos_weight * t * (p - 1.0) + w.neg_weight * (1.0 - t) * p;
            d_logits.set(row, col, grad / denom);
        }
    }
    Ok((total / denom, d_logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{ClassWeight, ClassWeights};
    use crate::rng::RngStream;

    fn weights1(pos: f64) -> ClassWeights {
        ClassWeights::from_entries(vec![ClassWeight {
            pos_weight: pos,
            neg_weight: 1.0 - pos,
            pos_count: 0,
            neg_count: 0,
        }])
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        for z in [500.0, 700.0, 1e8] {
            let p = sigmoid(z);
            assert!(p < 1.0 && p.is_finite(), "sigmoid({z}) = {p}");
            let q = sigmoid(-z);
            assert!(q > 0.0 && q.is_finite(), "sigmoid({}) = {q}", -z);
        }
    }

    #[test]
    fn sigmoid_of_ln3_is_three_quarters() {
        // sigma(ln 3) = 3 / (3 + 1)
        assert!((sigmoid(3.0_f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_monotone() {
        let mut prev = sigmoid(-30.0);
        let mut z = -30.0;
        while z <= 30.0 {
            let p = sigmoid(z);
            assert!(p >= prev);
            prev = p;
            z += 0.125;
        }
    }

    #[test]
    fn entry_loss_matches_hand_evaluation() {
        // t = 1, p = 0.5 (z = 0), w+ = 0.75: loss = 0.75 * ln 2.
        let logits = Tensor::from_rows(&[vec![0.0]]).unwrap();
        let targets = Tensor::from_rows(&[vec![1.0]]).unwrap();
        let mask = Tensor::from_rows(&[vec![1.0]]).unwrap();
        let (loss, _) =
            masked_weighted_bce(&logits, &targets, &mask, &weights1(0.75), Reduction::default())
                .unwrap();
        let expected = 0.75 * std::f64::consts::LN_2;
        assert!((loss - expected).abs() < 1e-12, "loss {loss} vs {expected}");
        assert!((expected - 0.519860).abs() < 5e-7);
    }

    #[test]
    fn all_masked_gives_zero_loss_and_gradient() {
        let logits = Tensor::from_rows(&[vec![3.0, -40.0], vec![0.2, 17.0]]).unwrap();
        let targets = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
        let mask = Tensor::zeros(&[2, 2]);
        for reduction in [Reduction::MaskedMeanAll, Reduction::MeanOverUnmasked] {
            let (loss, grad) =
                masked_weighted_bce(&logits, &targets, &mask, &ClassWeights::uniform(2), reduction)
                    .unwrap();
            assert_eq!(loss, 0.0);
            assert!(grad.data().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn rejects_targets_outside_unit_interval() {
        let logits = Tensor::zeros(&[1, 1]);
        let targets = Tensor::from_rows(&[vec![1.5]]).unwrap();
        let mask = Tensor::from_rows(&[vec![1.0]]).unwrap();
        let err = masked_weighted_bce(
            &logits,
            &targets,
            &mask,
            &ClassWeights::uniform(1),
            Reduction::default(),
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn rejects_non_binary_mask() {
        let logits = Tensor::zeros(&[1, 1]);
        let targets = Tensor::zeros(&[1, 1]);
        let mask = Tensor::from_rows(&[vec![0.5]]).unwrap();
        assert!(masked_weighted_bce(
            &logits,
            &targets,
            &mask,
            &ClassWeights::uniform(1),
            Reduction::default()
        )
        .is_err());
    }

    /// Central finite differences of the reduced loss with respect to each
    /// logit; independent of the analytic gradient path.
    fn numeric_grad(
        logits: &Tensor,
        targets: &Tensor,
        mask: &Tensor,
        weights: &ClassWeights,
        reduction: Reduction,
        h: f64,
    ) -> Tensor {
        let mut grad = Tensor::zeros(logits.shape());
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += h;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= h;
            let (lp, _) = masked_weighted_bce(&plus, targets, mask, weights, reduction).unwrap();
            let (lm, _) = masked_weighted_bce(&minus, targets, mask, weights, reduction).unwrap();
            grad.data_mut()[i] = (lp - lm) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(31);
        for trial in 0..10 {
            let (n, k) = (3, 4);
            let logits = Tensor::from_vec(
                &[n, k],
                (0..n * k).map(|_| 3.0 * rng.normal()).collect(),
            )
            .unwrap();
            let targets =
                Tensor::from_vec(&[n, k], (0..n * k).map(|_| rng.uniform_01()).collect()).unwrap();
            let mask = Tensor::from_vec(
                &[n, k],
                (0..n * k).map(|_| f64::from(rng.uniform_01() < 0.7)).collect(),
            )
            .unwrap();
            let entries = (0..k)
                .map(|_| {
                    let w = rng.uniform(0.1, 0.9).unwrap();
                    ClassWeight {
                        pos_weight: w,
                        neg_weight: 1.0 - w,
                        pos_count: 0,
                        neg_count: 0,
                    }
                })
                .collect();
            let weights = ClassWeights::from_entries(entries);
            for reduction in [Reduction::MaskedMeanAll, Reduction::MeanOverUnmasked] {
                let (_, analytic) =
                    masked_weighted_bce(&logits, &targets, &mask, &weights, reduction).unwrap();
                let numeric = numeric_grad(&logits, &targets, &mask, &weights, reduction, 1e-5);
                for i in 0..analytic.len() {
                    let (a, n) = (analytic.data()[i], numeric.data()[i]);
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
                    assert!(rel < 1e-5, "trial {trial} entry {i}: {a} vs {n} (rel {rel})");
                }
            }
        }
    }

    #[test]
    fn stable_for_large_logit_range() {
        // No NaN/Inf in loss or gradients for logits in [-30, 30].
        let mut rng = RngStream::new(47);
        for _ in 0..50 {
            let (n, k) = (4, 3);
            let logits = Tensor::from_vec(
                &[n, k],
                (0..n * k).map(|_| rng.uniform(-30.0, 30.0).unwrap()).collect(),
            )
            .unwrap();
            let targets =
                Tensor::from_vec(&[n, k], (0..n * k).map(|_| rng.uniform_01()).collect()).unwrap();
            let mask = Tensor::from_vec(
                &[n, k],
                (0..n * k).map(|_| f64::from(rng.uniform_01() < 0.5)).collect(),
            )
            .unwrap();
            let (loss, grad) = masked_weighted_bce(
                &logits,
                &targets,
                &mask,
                &ClassWeights::uniform(k),
                Reduction::default(),
            )
            .unwrap();
            assert!(loss.is_finite());
            assert!(grad.all_finite());
        }
    }

    #[test]
    fn masked_entry_is_fully_inert() {
        // Perturbing a masked target or logit changes nothing, bit for bit.
        let mut rng = RngStream::new(53);
        let (n, k) = (3, 3);
        let logits =
            Tensor::from_vec(&[n, k], (0..n * k).map(|_| rng.normal()).collect()).unwrap();
        let mut targets =
            Tensor::from_vec(&[n, k], (0..n * k).map(|_| rng.uniform_01()).collect()).unwrap();
        let mut mask = Tensor::from_vec(&[n, k], vec![1.0; n * k]).unwrap();
        mask.set(1, 2, 0.0);
        let weights = ClassWeights::uniform(k);

        let (loss, grad) =
            masked_weighted_bce(&logits, &targets, &mask, &weights, Reduction::default()).unwrap();
        assert_eq!(grad.at(1, 2), 0.0);

        targets.set(1, 2, 0.013);
        let mut wild_logits = logits.clone();
        wild_logits.set(1, 2, 1e6);
        let (loss2, grad2) =
            masked_weighted_bce(&wild_logits, &targets, &mask, &weights, Reduction::default())
                .unwrap();
        assert_eq!(loss.to_bits(), loss2.to_bits());
        assert!(grad.bit_eq(&grad2));
    }
}
