use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::fdir::InnovationRecord;

use super::jacobian::{jacobian_from_pairs, perturbations};
use super::linalg::{select_block, select_matrix_rows, select_rows, spd_solve, symmetrize};
use super::{Estimator, FilterConfig, FilterKind, GaussianBelief, SystemModel, UpdateInfo};

/// Extended Kalman filter with a finite-difference transition Jacobian.
#[derive(Clone, Debug)]
pub struct Ekf<M> {
    model: M,
    config: FilterConfig,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl<M: SystemModel> Ekf<M> {
    pub fn new(model: M, config: FilterConfig, initial: GaussianBelief) -> Result<Self> {
        config.validate(&model)?;
        let mut mean = initial.mean;
        model.normalize(&mut mean);
        Ok(Self {
            model,
            config,
            mean,
            cov: initial.cov,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Innovation covariance `H·Σ·Hᵀ + R` at the current belief.
    pub fn innovation_covariance(&self) -> DMatrix<f64> {
        let h = self.model.measurement_jacobian(&self.mean, self.config.jacobian_eps);
        let mut s = &h * &self.cov * h.transpose() + &self.config.measurement_noise;
        symmetrize(&mut s);
        s
    }

    /// Kalman update with an explicit innovation, Jacobian and noise block.
    pub fn update_with(&mut self, nu: &DVector<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
        let ph = &self.cov * h.transpose();
        let mut s = h * &ph + r;
        symmetrize(&mut s);
        // K = P·Hᵀ·S⁻¹, obtained as (S⁻¹·H·P)ᵀ.
        let k = spd_solve(&s, &ph.transpose(), "innovation covariance")?.transpose();
        self.mean += &k * nu;
        let n = self.mean.len();
        let mut cov = (DMatrix::identity(n, n) - &k * h) * &self.cov;
        symmetrize(&mut cov);
        self.cov = cov;
        self.model.normalize(&mut self.mean);
        Ok(())
    }
}

impl<M: SystemModel> Estimator for Ekf<M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Ekf
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn predict(&mut self, t: f64) -> Result<()> {
        let eps = self.config.jacobian_eps;
        let mut points = perturbations(&self.mean, eps);
        points.push(self.mean.clone());
        let mut images = self.model.propagate_batch(&points, t, self.config.dt)?;
        let mean = images.pop().expect("batch preserves length");
        let a = jacobian_from_pairs(&images, eps);
        let mut cov = &a * &self.cov * a.transpose() + &self.config.process_noise;
        symmetrize(&mut cov);
        self.mean = mean;
        self.cov = cov;
        Ok(())
    }

    fn innovation(&mut self, y: &DVector<f64>, t: f64) -> Result<InnovationRecord> {
        let y = self.model.align_measurement(y, &self.mean);
        let nu = y - self.model.measure(&self.mean);
        InnovationRecord::new(t, nu, self.innovation_covariance(), FilterKind::Ekf)
    }

    fn update(&mut self, y: &DVector<f64>, rows: &[usize]) -> Result<UpdateInfo> {
        if rows.is_empty() {
            return Ok(UpdateInfo::default());
        }
        let y = self.model.align_measurement(y, &self.mean);
        let nu = select_rows(&(y - self.model.measure(&self.mean)), rows);
        let h_full = self.model.measurement_jacobian(&self.mean, self.config.jacobian_eps);
        let h = select_matrix_rows(&h_full, rows);
        let r = select_block(&self.config.measurement_noise, rows, rows);
        self.update_with(&nu, &h, &r)?;
        Ok(UpdateInfo::default())
    }

    fn belief(&self) -> GaussianBelief {
        GaussianBelief {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
        }
    }
}
