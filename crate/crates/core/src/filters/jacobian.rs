use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Central finite-difference Jacobian of `f` at `x`:
/// column `j` is `(f(x + eps·e_j) − f(x − eps·e_j)) / (2·eps)`.
pub fn jacobian<F>(f: F, x: &DVector<f64>, eps: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let mut points = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut plus = x.clone();
        plus[j] += eps;
        let mut minus = x.clone();
        minus[j] -= eps;
        points.push(f(&plus)?);
        points.push(f(&minus)?);
    }
    Ok(jacobian_from_pairs(&points, eps))
}

/// Assembles a central-difference Jacobian from images of `x ± eps·e_j`,
/// given in the order `[+e_0, −e_0, +e_1, −e_1, …]`.
pub(crate) fn jacobian_from_pairs(images: &[DVector<f64>], eps: f64) -> DMatrix<f64> {
    let n = images.len() / 2;
    let m = images.first().map_or(0, |v| v.len());
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let col = (&images[2 * j] - &images[2 * j + 1]) / (2.0 * eps);
        jac.set_column(j, &col);
    }
    jac
}

/// The `2n` perturbed points `x ± eps·e_j` in the order expected by
/// [`jacobian_from_pairs`].
pub(crate) fn perturbations(x: &DVector<f64>, eps: f64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(2 * x.len());
    for j in 0..x.len() {
        let mut plus = x.clone();
        plus[j] += eps;
        let mut minus = x.clone();
        minus[j] -= eps;
        out.push(plus);
        out.push(minus);
    }
    out
}
