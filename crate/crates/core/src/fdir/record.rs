use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filters::FilterKind;

/// Innovation `ν = y − ŷ`, its covariance `S`, and the normalized
/// innovation squared `νᵀS⁻¹ν` for one measurement update.
#[derive(Clone, Debug, PartialEq)]
pub struct InnovationRecord {
    pub t: f64,
    pub nu: DVector<f64>,
    pub s: DMatrix<f64>,
    pub nis: f64,
    pub source: FilterKind,
    /// Set by the particle filter when every weight underflowed and the
    /// weights were reset to uniform.
    pub degenerate: bool,
}

impl InnovationRecord {
    pub fn new(t: f64, nu: DVector<f64>, s: DMatrix<f64>, source: FilterKind) -> Result<Self> {
        let nis = compute_nis(&nu, &s)?;
        Ok(Self {
            t,
            nu,
            s,
            nis,
            source,
            degenerate: false,
        })
    }

    pub fn dof(&self) -> usize {
        self.nu.len()
    }
}

/// `νᵀS⁻¹ν`, computed by a Cholesky solve rather than an explicit inverse.
pub fn compute_nis(nu: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != nu.len() || s.ncols() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "innovation has {} rows but S is {}x{}",
            nu.len(),
            s.nrows(),
            s.ncols()
        )));
    }
    if nu.is_empty() {
        return Ok(0.0);
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("innovation covariance"))?;
    let z = chol.solve(nu);
    Ok(nu.dot(&z).max(0.0))
}
