use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fdir::InnovationRecord;

use super::linalg::{psd_sqrt, select_block, select_matrix_rows, select_rows, spd_solve, symmetrize};
use super::{Estimator, FilterConfig, FilterKind, GaussianBelief, SystemModel, UkfParams, UpdateInfo};

/// Scaled unscented-transform sigma points with their mean and covariance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

impl SigmaPointSet {
    pub fn weighted_mean(&self, values: &[DVector<f64>]) -> DVector<f64> {
        let mut mean = DVector::zeros(values[0].len());
        for (w, v) in self.wm.iter().zip(values) {
            mean.axpy(*w, v, 1.0);
        }
        mean
    }

    /// `Σ wc_i (a_i − ā)(b_i − b̄)ᵀ`.
    pub fn weighted_cross(
        &self,
        a: &[DVector<f64>],
        a_mean: &DVector<f64>,
        b: &[DVector<f64>],
        b_mean: &DVector<f64>,
    ) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(a_mean.len(), b_mean.len());
        for ((w, ai), bi) in self.wc.iter().zip(a).zip(b) {
            let da = ai - a_mean;
            let db = bi - b_mean;
            out.ger(*w, &da, &db, 1.0);
        }
        out
    }
}

/// Sigma points `μ, μ ± col_i(√((n+λ)Σ))` with `λ = α²(n+κ) − n`.
pub fn ukf_sigma_points(mu: &DVector<f64>, sigma: &DMatrix<f64>, params: &UkfParams) -> Result<SigmaPointSet> {
    let n = mu.len();
    let nf = n as f64;
    let lambda = params.alpha * params.alpha * (nf + params.kappa) - nf;
    let spread = nf + lambda;
    if !(spread > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma-point spread n + λ = {spread} must be positive"
        )));
    }
    let root = psd_sqrt(&(sigma * spread))?;
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mu.clone());
    for i in 0..n {
        points.push(mu + root.column(i));
    }
    for i in 0..n {
        points.push(mu - root.column(i));
    }
    let w = 0.5 / spread;
    let mut wm = vec![w; 2 * n + 1];
    let mut wc = wm.clone();
    wm[0] = lambda / spread;
    wc[0] = lambda / spread + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(SigmaPointSet { points, wm, wc })
}

/// Unscented Kalman filter.
#[derive(Clone, Debug)]
pub struct Ukf<M> {
    model: M,
    config: FilterConfig,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

struct MeasurementSpread {
    y_hat: DVector<f64>,
    syy: DMatrix<f64>,
    pxy: DMatrix<f64>,
}

impl<M: SystemModel> Ukf<M> {
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

    /// Sigma points regenerated from the current belief and pushed through `h`.
    fn measurement_spread(&self) -> Result<MeasurementSpread> {
        let set = ukf_sigma_points(&self.mean, &self.cov, &self.config.ukf)?;
        let ys: Vec<_> = set.points.iter().map(|x| self.model.measure(x)).collect();
        let y_hat = set.weighted_mean(&ys);
        let mut syy = set.weighted_cross(&ys, &y_hat, &ys, &y_hat)
            + &self.config.measurement_noise * self.config.ukf.r_scale;
        symmetrize(&mut syy);
        let pxy = set.weighted_cross(&set.points, &self.mean, &ys, &y_hat);
        Ok(MeasurementSpread { y_hat, syy, pxy })
    }
}

impl<M: SystemModel> Estimator for Ukf<M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Ukf
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn predict(&mut self, t: f64) -> Result<()> {
        let set = ukf_sigma_points(&self.mean, &self.cov, &self.config.ukf)?;
        let images = self.model.propagate_batch(&set.points, t, self.config.dt)?;
        let mean = set.weighted_mean(&images);
        let mut cov = set.weighted_cross(&images, &mean, &images, &mean) + &self.config.process_noise;
        symmetrize(&mut cov);
        self.mean = mean;
        self.cov = cov;
        Ok(())
    }

    fn innovation(&mut self, y: &DVector<f64>, t: f64) -> Result<InnovationRecord> {
        let spread = self.measurement_spread()?;
        let y = self.model.align_measurement(y, &self.mean);
        InnovationRecord::new(t, y - spread.y_hat, spread.syy, FilterKind::Ukf)
    }

    fn update(&mut self, y: &DVector<f64>, rows: &[usize]) -> Result<UpdateInfo> {
        if rows.is_empty() {
            return Ok(UpdateInfo::default());
        }
        let spread = self.measurement_spread()?;
        let y = self.model.align_measurement(y, &self.mean);
        let nu = select_rows(&(y - &spread.y_hat), rows);
        let syy = select_block(&spread.syy, rows, rows);
        let pxy = select_matrix_rows(&spread.pxy.transpose(), rows).transpose();
        let k = spd_solve(&syy, &pxy.transpose(), "innovation covariance")?.transpose();
        self.mean += &k * nu;
        let mut cov = &self.cov - &k * syy * k.transpose();
        symmetrize(&mut cov);
        self.cov = cov;
        self.model.normalize(&mut self.mean);
        Ok(UpdateInfo::default())
    }

    fn belief(&self) -> GaussianBelief {
        GaussianBelief {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
        }
    }
}
