use super::graph::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1]` before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Log loss `L = −(1/N) Σ_i Σ_j y_ij log p_ij` of an `N × C` probability
/// matrix against one-hot (or soft) labels of the same shape.
pub fn cross_entropy(probs: &Tensor, labels: &Tensor) -> Result<f64> {
    if probs.dim() != labels.dim() || probs.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {:?} vs labels {:?}",
            probs.dim(),
            labels.dim()
        )));
    }
    for (i, row) in probs.rows().into_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("probability row {i} sums to {s}")));
        }
    }
    let n = probs.nrows() as f64;
    let total: f64 = probs
        .iter()
        .zip(labels.iter())
        .map(|(&p, &y)| if y == 0.0 { 0.0 } else { y * p.clamp(PROB_FLOOR, 1.0).ln() })
        .sum();
    Ok(-total / n)
}

/// One-hot rows for class ids.
pub fn one_hot(classes: &[usize], n_classes: usize) -> Tensor {
    let mut t = Tensor::zeros((classes.len(), n_classes));
    for (i, &c) in classes.iter().enumerate() {
        t[[i, c]] = 1.0;
    }
    t
}

/// Predicted class per row: argmax, lowest id on ties.
pub fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    probs.rows().into_iter().map(|r| crate::features::argmax(&r.to_vec())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_and_uniform() {
        let y = one_hot(&[0, 3, 6], 7);
        assert_eq!(cross_entropy(&y, &y).unwrap(), 0.0);
        let uniform = Tensor::from_elem((3, 7), 1.0 / 7.0);
        assert!((cross_entropy(&uniform, &y).unwrap() - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_rows_and_bad_shapes() {
        let y = one_hot(&[1], 2);
        assert!(cross_entropy(&array![[0.5, 0.6]], &y).is_err());
        assert!(cross_entropy(&array![[0.5, 0.5]], &one_hot(&[1], 3)).is_err());
    }

    #[test]
    fn zero_probability_is_clamped() {
        let l = cross_entropy(&array![[1.0, 0.0]], &one_hot(&[1], 2)).unwrap();
        assert!((l - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax_rows(&array![[0.4, 0.4, 0.2], [0.1, 0.2, 0.7]]), vec![0, 2]);
    }
}
