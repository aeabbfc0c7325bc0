//! Central finite-difference gradient checking.

use super::graph::Tensor;
use crate::error::Result;

/// Denominator floor for the relative error, so entries whose true gradient is
/// ~0 are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(tensor, flat index)` of the worst entry.
    pub worst: (usize, usize),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare `analytic` gradients of `loss` against central differences
/// `(L(θ + h) − L(θ − h)) / 2h` for every entry of every tensor.
///
/// `loss` is evaluated on a perturbed copy of `params`.
pub fn check_gradients<F>(params: &[Tensor], analytic: &[Tensor], step: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    assert_eq!(params.len(), analytic.len());
    let mut work: Vec<Tensor> = params.iter().map(|t| t.as_standard_layout().into_owned()).collect();
    let analytic: Vec<Tensor> = analytic.iter().map(|t| t.as_standard_layout().into_owned()).collect();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst: (0, 0) };
    for t in 0..work.len() {
        assert_eq!(work[t].dim(), analytic[t].dim());
        for k in 0..work[t].len() {
            let orig = work[t].as_slice().expect("standard layout")[k];
            work[t].as_slice_mut().expect("standard layout")[k] = orig + step;
            let plus = loss(&work)?;
            work[t].as_slice_mut().expect("standard layout")[k] = orig - step;
            let minus = loss(&work)?;
            work[t].as_slice_mut().expect("standard layout")[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[t].as_slice().expect("standard layout")[k];
            let err = relative_error(a, numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (t, k);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
