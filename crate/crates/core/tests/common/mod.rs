//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the code paths it checks.

#![allow(dead_code)]

use csiaug::nn::gradcheck::{check_gradients, GradCheckReport};
use csiaug::nn::layers::Parameters;
use csiaug::nn::Tensor;
use ndarray::Array2;
use num_complex::Complex64;

pub const DESK_TOML: &str = include_str!("../../examples/desk.toml");

/// O(n²) DFT straight from the definition.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let angle = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                    v * Complex64::new(angle.cos(), angle.sin())
                })
                .sum()
        })
        .collect()
}

/// Eigenpairs of a symmetric matrix from nalgebra, sorted by descending
/// eigenvalue. Columns of the returned matrix are the eigenvectors.
pub fn oracle_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Sample covariance with divisor N − 1, by explicit loops.
pub fn oracle_covariance(data: &Array2<f64>) -> Array2<f64> {
    let (n, d) = data.dim();
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| data[[i, j]]).sum::<f64>() / n as f64).collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..n).map(|i| (data[[i, a]] - mean[a]) * (data[[i, b]] - mean[b])).sum::<f64>() / (n - 1) as f64
    })
}

/// Flip `v` so its largest-magnitude entry is positive.
pub fn sign_normalize(v: &mut [f64]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `−(1/N) Σ_i Σ_j y_ij ln p_ij`, accumulated one term at a time.
pub fn hand_cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..probs.ncols() {
            let indicator = if j == y { 1.0 } else { 0.0 };
            if indicator != 0.0 {
                total += indicator * probs[[i, j]].max(1e-12).ln();
            }
        }
    }
    -total / labels.len() as f64
}

/// Finite-difference check of `model` where `eval` returns the loss and the
/// analytic gradients in [`Parameters`] order.
pub fn gradcheck_model<M, F>(model: &M, eval: F) -> GradCheckReport
where
    M: Parameters + Clone,
    F: Fn(&M) -> csiaug::Result<(f64, Vec<Tensor>)>,
{
    let params: Vec<Tensor> = model.tensors().into_iter().map(|(_, t)| t.clone()).collect();
    let (_, analytic) = eval(model).expect("analytic pass");
    check_gradients(&params, &analytic, 1e-5, |perturbed| {
        let mut m = model.clone();
        for (slot, value) in m.tensors_mut().into_iter().zip(perturbed) {
            slot.assign(value);
        }
        eval(&m).map(|(loss, _)| loss)
    })
    .expect("numeric pass")
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}
