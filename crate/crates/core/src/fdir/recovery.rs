use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filters::linalg::{select_block, select_matrix_rows, select_rows};
use crate::filters::{AttitudeModel, FilterConfig, GaussianBelief, DEFAULT_Q_BIAS};
use crate::sensors::{SensorKind, SliceMap};

/// Measurement, Jacobian and noise restricted to the healthy sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidMeasurement {
    pub y: DVector<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub rows: Vec<usize>,
}

/// Deletes the rows of unhealthy sensors from `y` and `H` and their blocks
/// from `R`. Returns `None` when no sensor is healthy, in which case the
/// caller should run a prediction-only step.
pub fn slice_valid(
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    healthy: &[SensorKind],
    slices: &SliceMap,
) -> Result<Option<ValidMeasurement>> {
    let m = slices.dim();
    if y.len() != m || h.nrows() != m || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "slice map covers {m} rows; y has {}, H has {}, R is {:?}",
            y.len(),
            h.nrows(),
            r.shape()
        )));
    }
    let rows = slices.rows_of(healthy);
    if rows.is_empty() {
        return Ok(None);
    }
    Ok(Some(ValidMeasurement {
        y: select_rows(y, &rows),
        h: select_matrix_rows(h, &rows),
        r: select_block(r, &rows, &rows),
        rows,
    }))
}

/// Settings for gyro-bias state augmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasAugmentation {
    /// Random-walk variance added to each bias state per step.
    pub process_variance: f64,
    /// Initial variance of each bias state.
    pub initial_variance: f64,
}

impl Default for BiasAugmentation {
    fn default() -> Self {
        Self {
            process_variance: DEFAULT_Q_BIAS,
            initial_variance: 1e-2,
        }
    }
}

/// Turns a 7-state attitude filter setup into the 10-state bias-augmented
/// one: the model carries a constant bias that adds to the gyro rows, `Q`
/// gains a small bias random walk and the initial belief gains a zero-mean
/// bias block.
pub fn make_bias_augmented_model(
    model: &AttitudeModel,
    config: &FilterConfig,
    initial: &GaussianBelief,
    aug: &BiasAugmentation,
) -> Result<(AttitudeModel, FilterConfig, GaussianBelief)> {
    if model.is_augmented() || initial.mean.len() != 7 || config.process_noise.nrows() != 7 {
        return Err(Error::InvalidArgument("bias augmentation expects a 7-state model".into()));
    }
    let mut config = config.clone();
    config.process_noise = extend_diag(&config.process_noise, aug.process_variance);
    if let Some(j) = config.pf.jitter.as_ref() {
        config.pf.jitter = Some(extend_diag(j, aug.process_variance));
    }
    let mut mean = initial.mean.clone().resize_vertically(10, 0.0);
    mean.rows_mut(7, 3).fill(0.0);
    let belief = GaussianBelief::new(mean, extend_diag(&initial.cov, aug.initial_variance))?;
    Ok((model.augmented(), config, belief))
}

fn extend_diag(m: &DMatrix<f64>, v: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n + 3, n + 3);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    for k in 0..3 {
        out[(n + k, n + k)] = v;
    }
    out
}
