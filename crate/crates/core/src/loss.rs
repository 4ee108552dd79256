//! Softmax cross-entropy on GroupSum scores.

use crate::math::{exp, log_sum_exp};
use crate::{Error, Result};

/// Loss of one example; writes `∂loss/∂scores` into `grad`.
pub fn cross_entropy_example(scores: &[f64], label: usize, grad: &mut [f64]) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::Label {
            label,
            classes: scores.len(),
        });
    }
    let lse = log_sum_exp(scores);
    for (g, &s) in grad.iter_mut().zip(scores) {
        *g = exp(s - lse);
    }
    grad[label] -= 1.0;
    Ok(lse - scores[label])
}

/// Mean `-log softmax(scores)[label]` over a row-major `[B × k]` batch.
pub fn cross_entropy_loss(scores: &[f64], classes: usize, labels: &[usize]) -> Result<f64> {
    if scores.len() != classes * labels.len() {
        return Err(Error::Dimension {
            expected: classes * labels.len(),
            actual: scores.len(),
        });
    }
    let mut grad = alloc::vec![0.0; classes];
    let mut total = 0.0;
    for (row, &label) in scores.chunks(classes).zip(labels) {
        total += cross_entropy_example(row, label, &mut grad)?;
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_confident() {
        let l = cross_entropy_loss(&[0.0; 10], 10, &[3]).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
        let mut s = [0.0; 10];
        s[4] = 60.0;
        assert!(cross_entropy_loss(&s, 10, &[4]).unwrap() < 1e-20);
        assert_eq!(
            cross_entropy_loss(&[0.0; 10], 10, &[10]),
            Err(Error::Label { label: 10, classes: 10 })
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = [0.3, -1.2, 2.2, 0.05];
        let mut g = [0.0; 4];
        cross_entropy_example(&s, 2, &mut g).unwrap();
        let mut scratch = [0.0; 4];
        let h = 1e-6;
        for i in 0..4 {
            let (mut hi, mut lo) = (s, s);
            hi[i] += h;
            lo[i] -= h;
            let fd = (cross_entropy_example(&hi, 2, &mut scratch).unwrap()
                - cross_entropy_example(&lo, 2, &mut scratch).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }
}
