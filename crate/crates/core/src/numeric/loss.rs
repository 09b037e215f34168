use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Writes `log softmax(row)` into `out`.
pub fn log_softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &x in row {
        sum += libm::exp(x - max);
    }
    let lse = max + libm::log(sum);
    for (o, &x) in out.iter_mut().zip(row) {
        *o = x - lse;
    }
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)` (one
/// row per example) together with `∂loss/∂logits = (softmax − onehot)/rows`.
pub fn softmax_cross_entropy(logits: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
    let (rows, classes) = logits.shape();
    if labels.len() != rows {
        return Err(Error::dim(
            "softmax_cross_entropy",
            alloc::format!("{rows} labels"),
            alloc::format!("{}", labels.len()),
        ));
    }
    let mut grad = DenseMatrix::zeros(rows, classes);
    let mut logp: Vec<f64> = alloc::vec![0.0; classes];
    let mut total = 0.0;
    let inv = 1.0 / rows as f64;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Index {
                op: "softmax_cross_entropy",
                index: label,
                limit: classes,
            });
        }
        log_softmax_row(logits.row(r), &mut logp);
        total -= logp[label];
        let g = grad.row_mut(r);
        for (gi, &lp) in g.iter_mut().zip(&logp) {
            *gi = libm::exp(lp) * inv;
        }
        g[label] -= inv;
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_check, Rng};

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = DenseMatrix::zeros(3, 8);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 5, 7]).unwrap();
        assert!((loss - libm::log(8.0)).abs() < 1e-12);
        assert!((loss - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn confident_correct_is_near_zero() {
        let mut logits = DenseMatrix::zeros(1, 4);
        logits.set(0, 2, 100.0);
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = Rng::new(42);
        let logits = rng.normal_matrix(4, 6);
        let labels = [1, 0, 5, 3];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let f = |t: &[f64]| {
            let m = DenseMatrix::from_vec(4, 6, t.to_vec()).unwrap();
            softmax_cross_entropy(&m, &labels).unwrap().0
        };
        let r = finite_diff_check(f, logits.as_slice(), grad.as_slice(), 1e-5);
        assert!(r.max_rel_error <= 1e-7, "{r:?}");
    }

    #[test]
    fn label_out_of_range() {
        let logits = DenseMatrix::zeros(1, 3);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(Error::Index { index: 3, limit: 3, .. })
        ));
        assert!(softmax_cross_entropy(&logits, &[0, 0]).is_err());
    }
}
