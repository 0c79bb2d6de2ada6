use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fdir::InnovationRecord;

use super::linalg::{psd_sqrt, select_block, select_rows, symmetrize};
use super::{Estimator, FilterConfig, FilterKind, GaussianBelief, SystemModel, UpdateInfo};

/// Weighted particle approximation of the posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.particles[0].len());
        for (w, p) in self.weights.iter().zip(&self.particles) {
            m.axpy(*w, p, 1.0);
        }
        m
    }

    pub fn covariance(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        let n = mean.len();
        let mut c = DMatrix::zeros(n, n);
        for (w, p) in self.weights.iter().zip(&self.particles) {
            let d = p - mean;
            c.ger(*w, &d, &d, 1.0);
        }
        symmetrize(&mut c);
        c
    }
}

/// `1 / Σ wᵢ²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one offset `u0 ∈ [0, 1)` shared by `N` evenly
/// spaced pointers `(i + u0)/N` into the cumulative weights. Returns the
/// selected indices.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0] / total;
    let mut j = 0;
    for i in 0..n {
        let u = (i as f64 + u0) / n as f64;
        while u >= cum && j < n - 1 {
            j += 1;
            cum += weights[j] / total;
        }
        out.push(j);
    }
    out
}

/// Bootstrap particle filter: propagate with additive Gaussian jitter,
/// weight by the Gaussian measurement likelihood, resample systematically
/// when the effective sample size drops.
#[derive(Clone, Debug)]
pub struct ParticleFilter<M> {
    model: M,
    config: FilterConfig,
    set: ParticleSet,
    jitter_root: DMatrix<f64>,
    rng: ChaCha8Rng,
    posterior: GaussianBelief,
}

impl<M: SystemModel> ParticleFilter<M> {
    /// Draws `config.pf.particles` samples from the initial belief.
    pub fn new(model: M, config: FilterConfig, initial: GaussianBelief, mut rng: ChaCha8Rng) -> Result<Self> {
        config.validate(&model)?;
        let jitter = config.pf.jitter.as_ref().unwrap_or(&config.process_noise);
        if jitter.shape() != config.process_noise.shape() {
            return Err(Error::DimensionMismatch("PF jitter must match Q".into()));
        }
        let jitter_root = psd_sqrt(jitter)?;
        let init_root = psd_sqrt(&initial.cov)?;
        let n = config.pf.particles;
        let particles = (0..n)
            .map(|_| {
                let mut p = &initial.mean + &init_root * standard_normal(&mut rng, initial.mean.len());
                model.normalize(&mut p);
                p
            })
            .collect();
        let set = ParticleSet {
            particles,
            weights: vec![1.0 / n as f64; n],
        };
        let posterior = weighted_belief(&model, &set);
        Ok(Self {
            model,
            config,
            set,
            jitter_root,
            rng,
            posterior,
        })
    }

    /// A filter over an explicit particle set.
    pub fn from_particles(model: M, config: FilterConfig, set: ParticleSet, rng: ChaCha8Rng) -> Result<Self> {
        if set.is_empty() || set.particles.len() != set.weights.len() {
            return Err(Error::InvalidArgument("particle set is empty or has mismatched weights".into()));
        }
        let jitter = config.pf.jitter.as_ref().unwrap_or(&config.process_noise);
        let jitter_root = psd_sqrt(jitter)?;
        let posterior = weighted_belief(&model, &set);
        Ok(Self {
            model,
            config,
            set,
            jitter_root,
            rng,
            posterior,
        })
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    fn estimate(&self) -> DVector<f64> {
        self.posterior.mean.clone()
    }

    /// Flips particles whose attitude lies in the opposite hemisphere from
    /// the current estimate, so that averaging is meaningful.
    fn align_particles(&mut self) {
        let reference = self.set.mean();
        for p in &mut self.set.particles {
            self.model.align_state(p, &reference);
        }
    }
}

fn weighted_belief<M: SystemModel>(model: &M, set: &ParticleSet) -> GaussianBelief {
    let raw = set.mean();
    let cov = set.covariance(&raw);
    let mut mean = raw;
    model.normalize(&mut mean);
    GaussianBelief { mean, cov }
}

fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

impl<M: SystemModel> Estimator for ParticleFilter<M> {
    fn kind(&self) -> FilterKind {
        FilterKind::Pf
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn predict(&mut self, t: f64) -> Result<()> {
        let mut next = self.model.propagate_batch(&self.set.particles, t, self.config.dt)?;
        let n = self.config.process_noise.nrows();
        for p in &mut next {
            *p += &self.jitter_root * standard_normal(&mut self.rng, n);
            self.model.normalize(p);
        }
        self.set.particles = next;
        self.align_particles();
        self.posterior = weighted_belief(&self.model, &self.set);
        Ok(())
    }

    fn innovation(&mut self, y: &DVector<f64>, t: f64) -> Result<InnovationRecord> {
        let hs: Vec<_> = self.set.particles.iter().map(|p| self.model.measure(p)).collect();
        let mut y_hat = DVector::zeros(y.len());
        for (w, h) in self.set.weights.iter().zip(&hs) {
            y_hat.axpy(*w, h, 1.0);
        }
        let mut s = self.config.measurement_noise.clone();
        for (w, h) in self.set.weights.iter().zip(&hs) {
            let d = h - &y_hat;
            s.ger(*w, &d, &d, 1.0);
        }
        symmetrize(&mut s);
        let y = self.model.align_measurement(y, &self.estimate());
        InnovationRecord::new(t, y - y_hat, s, FilterKind::Pf)
    }

    fn update(&mut self, y: &DVector<f64>, rows: &[usize]) -> Result<UpdateInfo> {
        let mut info = UpdateInfo::default();
        if rows.is_empty() {
            return Ok(info);
        }
        let y = select_rows(&self.model.align_measurement(y, &self.estimate()), rows);
        let r = select_block(&self.config.measurement_noise, rows, rows);
        let chol = r.cholesky().ok_or(Error::NotPositiveDefinite("measurement noise"))?;
        for (w, p) in self.set.weights.iter_mut().zip(&self.set.particles) {
            let d = &y - select_rows(&self.model.measure(p), rows);
            let d2 = d.dot(&chol.solve(&d));
            *w *= (-0.5 * d2).exp();
        }
        let total: f64 = self.set.weights.iter().sum();
        let n = self.set.len();
        if total > 0.0 && total.is_finite() {
            for w in &mut self.set.weights {
                *w /= total;
            }
        } else {
            self.set.weights = vec![1.0 / n as f64; n];
            info.degenerate = true;
        }
        self.posterior = weighted_belief(&self.model, &self.set);
        if effective_sample_size(&self.set.weights) < self.config.pf.ess_threshold * n as f64 {
            let u0: f64 = self.rng.random();
            let idx = systematic_resample(&self.set.weights, u0);
            self.set.particles = idx.iter().map(|&i| self.set.particles[i].clone()).collect();
            self.set.weights = vec![1.0 / n as f64; n];
            info.resampled = true;
        }
        Ok(info)
    }

    /// Weighted mean and covariance, taken before any resampling.
    fn belief(&self) -> GaussianBelief {
        self.posterior.clone()
    }
}
