//! EKF, UKF and particle filter over a generic discrete-time system model.
//!
//! All three filters share the [`Estimator`] interface, split into
//! `predict`, `innovation` and `update` so that the FDIR layer can inspect the
//! innovation before deciding whether (and with which sensors) to update.

mod ekf;
mod jacobian;
pub mod linalg;
mod model;
mod pf;
mod ukf;

pub use ekf::Ekf;
pub use jacobian::jacobian;
pub use model::{measurement_model, process_model, AttitudeModel, LinearGaussianModel, SystemModel};
pub use pf::{effective_sample_size, systematic_resample, ParticleFilter, ParticleSet};
pub use ukf::{ukf_sigma_points, SigmaPointSet, Ukf};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fdir::InnovationRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Ekf,
    Ukf,
    Pf,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
            FilterKind::Pf => "pf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ekf" => Ok(FilterKind::Ekf),
            "ukf" => Ok(FilterKind::Ukf),
            "pf" => Ok(FilterKind::Pf),
            other => Err(Error::InvalidArgument(format!("unknown filter `{other}`"))),
        }
    }
}

/// Mean and covariance of a Gaussian posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn std_devs(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Multiplier on `R` inside the UKF measurement covariance. Values below
    /// one restore sensitivity to small innovations.
    pub r_scale: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1e-1,
            beta: 2.0,
            kappa: 0.0,
            r_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PfParams {
    pub particles: usize,
    /// Additive propagation noise covariance; `None` uses `Q`.
    pub jitter: Option<DMatrix<f64>>,
    /// Resample when `N_eff < ess_threshold · N`.
    pub ess_threshold: f64,
}

impl Default for PfParams {
    fn default() -> Self {
        Self {
            particles: 1000,
            jitter: None,
            ess_threshold: 0.5,
        }
    }
}

/// Noise covariances and tuning shared by the three filters.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    pub process_noise: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
    pub dt: f64,
    pub jacobian_eps: f64,
    pub ukf: UkfParams,
    pub pf: PfParams,
}

/// Default process-noise variances: quaternion components, body rates and gyro bias.
pub const DEFAULT_Q_QUAT: f64 = 1e-8;
pub const DEFAULT_Q_RATE: f64 = 1e-6;
pub const DEFAULT_Q_BIAS: f64 = 1e-12;
pub const DEFAULT_INITIAL_VARIANCE: f64 = 1e-2;

impl FilterConfig {
    pub fn new(process_noise: DMatrix<f64>, measurement_noise: DMatrix<f64>, dt: f64) -> Self {
        Self {
            process_noise,
            measurement_noise,
            dt,
            jacobian_eps: 1e-6,
            ukf: UkfParams::default(),
            pf: PfParams::default(),
        }
    }

    /// Defaults for the attitude model, with `R` built from per-row
    /// measurement variances.
    pub fn attitude_defaults(augmented: bool, measurement_variances: &[f64], dt: f64) -> Self {
        Self::new(
            attitude_process_noise(augmented, DEFAULT_Q_QUAT, DEFAULT_Q_RATE, DEFAULT_Q_BIAS),
            DMatrix::from_diagonal(&DVector::from_column_slice(measurement_variances)),
            dt,
        )
    }

    pub fn validate(&self, model: &dyn SystemModel) -> Result<()> {
        let n = model.state_dim();
        let m = model.measurement_dim();
        if self.process_noise.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Q must be {n}x{n}, got {:?}",
                self.process_noise.shape()
            )));
        }
        if self.measurement_noise.shape() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "R must be {m}x{m}, got {:?}",
                self.measurement_noise.shape()
            )));
        }
        if linalg::min_eigenvalue(&self.process_noise) < -1e-12 {
            return Err(Error::config("filter.q", "process noise must be positive semi-definite"));
        }
        if linalg::min_eigenvalue(&self.measurement_noise) < -1e-12 {
            return Err(Error::config("filter.r", "measurement noise must be positive semi-definite"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        if self.pf.particles < 10 {
            return Err(Error::config("filter.pf.particles", "need at least 10 particles"));
        }
        Ok(())
    }
}

/// Diagonal process noise for the 7-state (or 10-state augmented) model.
pub fn attitude_process_noise(augmented: bool, q_quat: f64, q_rate: f64, q_bias: f64) -> DMatrix<f64> {
    let mut d = vec![q_quat; 4];
    d.extend([q_rate; 3]);
    if augmented {
        d.extend([q_bias; 3]);
    }
    DMatrix::from_diagonal(&DVector::from_vec(d))
}

/// Side information from a measurement update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateInfo {
    /// The particle weights underflowed and were reset to uniform.
    pub degenerate: bool,
    pub resampled: bool,
}

/// A recursive filter stepping on a fixed grid of spacing `config.dt`.
pub trait Estimator: Send {
    fn kind(&self) -> FilterKind;

    /// Propagates the belief from `t` to `t + dt`.
    fn predict(&mut self, t: f64) -> Result<()>;

    /// Innovation of the full stacked measurement `y` against the current
    /// (predicted) belief. Does not modify the belief.
    fn innovation(&mut self, y: &DVector<f64>, t: f64) -> Result<InnovationRecord>;

    /// Measurement update restricted to the given rows of `y`. An empty row
    /// set leaves the belief unchanged.
    fn update(&mut self, y: &DVector<f64>, rows: &[usize]) -> Result<UpdateInfo>;

    /// Current posterior mean and covariance.
    fn belief(&self) -> GaussianBelief;

    /// Predict, compute the innovation, and update with every row.
    fn step(&mut self, y: &DVector<f64>, t: f64) -> Result<InnovationRecord> {
        self.predict(t)?;
        let dt = self.dt();
        let mut rec = self.innovation(y, t + dt)?;
        let rows: Vec<usize> = (0..y.len()).collect();
        let info = self.update(y, &rows)?;
        rec.degenerate = info.degenerate;
        Ok(rec)
    }

    fn dt(&self) -> f64;
}
