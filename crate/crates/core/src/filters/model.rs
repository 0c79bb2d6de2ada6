use nalgebra::{DMatrix, DVector};

use crate::dynamics::{DynamicsModel, RigidBodyState};
use crate::error::{Error, Result};
use crate::sensors::{AttitudeParam, SensorKind, SliceMap};

use super::jacobian::jacobian;

/// A discrete-time state-space model `x⁺ = f(x, t)`, `y = h(x)`.
pub trait SystemModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;

    /// Propagates every state in `xs` from `t` to `t + dt`.
    fn propagate_batch(&self, xs: &[DVector<f64>], t: f64, dt: f64) -> Result<Vec<DVector<f64>>>;

    fn propagate(&self, x: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>> {
        let mut out = self.propagate_batch(std::slice::from_ref(x), t, dt)?;
        Ok(out.remove(0))
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64>;

    fn measurement_jacobian(&self, x: &DVector<f64>, eps: f64) -> DMatrix<f64> {
        jacobian(|v| Ok(self.measure(v)), x, eps).expect("measurement model is infallible")
    }

    /// Projects a state back onto its constraint manifold (unit quaternion).
    fn normalize(&self, _x: &mut DVector<f64>) {}

    /// Flips sign-ambiguous state components of `x` toward `reference`.
    fn align_state(&self, _x: &mut DVector<f64>, _reference: &DVector<f64>) {}

    /// Returns `y` with any sign-ambiguous components matched to the
    /// prediction at `x_pred`.
    fn align_measurement(&self, y: &DVector<f64>, _x_pred: &DVector<f64>) -> DVector<f64> {
        y.clone()
    }
}

/// The spacecraft attitude model: state `[q; ω]` or `[q; ω; b]`, and the
/// stacked quaternion-mode measurement `[q; q; ω + b]` restricted to the
/// sensors in `slices`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttitudeModel {
    pub dynamics: DynamicsModel,
    slices: SliceMap,
    augmented: bool,
}

impl AttitudeModel {
    pub fn new(dynamics: DynamicsModel, sensors: &[SensorKind], augmented: bool) -> Self {
        Self {
            dynamics,
            slices: SliceMap::new(AttitudeParam::Quaternion, sensors),
            augmented,
        }
    }

    pub fn full(dynamics: DynamicsModel, augmented: bool) -> Self {
        Self::new(dynamics, &SensorKind::ALL, augmented)
    }

    pub fn slices(&self) -> &SliceMap {
        &self.slices
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// The same model with the bias states appended.
    pub fn augmented(&self) -> Self {
        Self {
            augmented: true,
            ..self.clone()
        }
    }

    fn state_of(&self, x: &DVector<f64>) -> Result<RigidBodyState> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, model expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        RigidBodyState::from_slice(x.as_slice())
    }
}

impl SystemModel for AttitudeModel {
    fn state_dim(&self) -> usize {
        if self.augmented {
            10
        } else {
            7
        }
    }

    fn measurement_dim(&self) -> usize {
        self.slices.dim()
    }

    fn propagate_batch(&self, xs: &[DVector<f64>], t: f64, dt: f64) -> Result<Vec<DVector<f64>>> {
        let env = self.dynamics.step_environment(t, dt)?;
        xs.iter()
            .map(|x| {
                let s = self.state_of(x)?;
                Ok(self.dynamics.step_with(&s, &env)?.to_vector())
            })
            .collect()
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        stack(x, &self.slices, self.augmented)
    }

    fn measurement_jacobian(&self, _x: &DVector<f64>, _eps: f64) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.slices.dim(), self.state_dim());
        for (kind, rows) in self.slices.iter() {
            match kind {
                SensorKind::Gyro => {
                    for k in 0..3 {
                        h[(rows.start + k, 4 + k)] = 1.0;
                        if self.augmented {
                            h[(rows.start + k, 7 + k)] = 1.0;
                        }
                    }
                }
                _ => {
                    for k in 0..4 {
                        h[(rows.start + k, k)] = 1.0;
                    }
                }
            }
        }
        h
    }

    fn normalize(&self, x: &mut DVector<f64>) {
        let n = x.rows(0, 4).norm();
        if n > 0.0 && n.is_finite() {
            x.rows_mut(0, 4).unscale_mut(n);
        }
    }

    fn align_state(&self, x: &mut DVector<f64>, reference: &DVector<f64>) {
        if x.rows(0, 4).dot(&reference.rows(0, 4)) < 0.0 {
            x.rows_mut(0, 4).neg_mut();
        }
    }

    fn align_measurement(&self, y: &DVector<f64>, x_pred: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        let q = x_pred.rows(0, 4);
        for (kind, rows) in self.slices.iter() {
            if kind == SensorKind::Gyro {
                continue;
            }
            let block = out.rows(rows.start, 4);
            if block.dot(&q) < 0.0 {
                out.rows_mut(rows.start, 4).neg_mut();
            }
        }
        out
    }
}

/// One RK4 step of the attitude dynamics applied to a filter state vector.
pub fn process_model(dynamics: &DynamicsModel, x: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>> {
    let s = RigidBodyState::from_slice(x.as_slice())?;
    Ok(dynamics.step(&s, t, dt)?.to_vector())
}

/// Predicted stacked measurement for state `x` (7 or 10 entries).
pub fn measurement_model(x: &DVector<f64>, slices: &SliceMap) -> DVector<f64> {
    stack(x, slices, x.len() == 10)
}

fn stack(x: &DVector<f64>, slices: &SliceMap, augmented: bool) -> DVector<f64> {
    let mut y = DVector::zeros(slices.dim());
    for (kind, rows) in slices.iter() {
        match kind {
            SensorKind::Gyro => {
                for k in 0..3 {
                    let b = if augmented { x[7 + k] } else { 0.0 };
                    y[rows.start + k] = x[4 + k] + b;
                }
            }
            _ => y.rows_mut(rows.start, 4).copy_from(&x.rows(0, 4)),
        }
    }
    y
}

/// `x⁺ = F·x`, `y = H·x`. Used to check the filters against exact
/// linear-Gaussian results.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(f: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if !f.is_square() || h.ncols() != f.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "F is {:?}, H is {:?}",
                f.shape(),
                h.shape()
            )));
        }
        Ok(Self { f, h })
    }
}

impl SystemModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    fn propagate_batch(&self, xs: &[DVector<f64>], _t: f64, _dt: f64) -> Result<Vec<DVector<f64>>> {
        Ok(xs.iter().map(|x| &self.f * x).collect())
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }

    fn measurement_jacobian(&self, _x: &DVector<f64>, _eps: f64) -> DMatrix<f64> {
        self.h.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{InertiaTensor, KeplerianElements, TorqueModel};
    use approx::assert_relative_eq;

    fn dynamics(gg: bool) -> DynamicsModel {
        let torque = if gg { TorqueModel::gravity_gradient() } else { TorqueModel::default() };
        DynamicsModel::new(
            InertiaTensor::reference_spacecraft(),
            torque,
            KeplerianElements::reference_leo(),
        )
    }

    fn state(omega: [f64; 3], bias: Option<[f64; 3]>) -> DVector<f64> {
        let mut v = vec![1.0, 0.0, 0.0, 0.0];
        v.extend(omega);
        if let Some(b) = bias {
            v.extend(b);
        }
        DVector::from_vec(v)
    }

    #[test]
    fn stacked_measurement_examples() {
        let m = AttitudeModel::full(dynamics(false), false);
        let y = m.measure(&state([0.1, 0.2, 0.3], None));
        let expected = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3];
        assert_eq!(y.as_slice(), &expected);

        let aug = m.augmented();
        let y = aug.measure(&state([0.0; 3], Some([0.02, -0.015, 0.01])));
        assert_eq!(&y.as_slice()[8..], &[0.02, -0.015, 0.01]);
        assert_eq!(measurement_model(&state([0.0; 3], Some([0.02, -0.015, 0.01])), m.slices()), y);
    }

    #[test]
    fn jacobian_is_linear_selection() {
        for augmented in [false, true] {
            let m = AttitudeModel::full(dynamics(false), augmented);
            let x = if augmented {
                DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5, 0.1, -0.2, 0.3, 0.01, 0.02, 0.03])
            } else {
                DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5, 0.1, -0.2, 0.3])
            };
            let h = m.measurement_jacobian(&x, 1e-6);
            assert_eq!(&h * &x, m.measure(&x));
            let fd = jacobian(|v| Ok(m.measure(v)), &x, 1e-6).unwrap();
            assert_relative_eq!(h, fd, epsilon = 1e-9);
            if augmented {
                let block = h.view((8, 7), (3, 3)).into_owned();
                assert_eq!(block, DMatrix::identity(3, 3));
            }
        }
    }

    #[test]
    fn process_model_examples() {
        let d = dynamics(false);
        let x = state([0.0; 3], None);
        assert_eq!(process_model(&d, &x, 0.0, 0.1).unwrap(), x);

        let xb = state([0.1, -0.1, 0.05], Some([0.02, -0.015, 0.01]));
        let out = process_model(&dynamics(true), &xb, 0.0, 0.1).unwrap();
        assert_eq!(&out.as_slice()[7..], &[0.02, -0.015, 0.01]);

        let m = AttitudeModel::full(d, false);
        let x = state([0.1, -0.1, 0.05], None);
        let direct = d.step(&RigidBodyState::from_slice(x.as_slice()).unwrap(), 0.0, 0.1).unwrap();
        assert_eq!(m.propagate(&x, 0.0, 0.1).unwrap(), direct.to_vector());
    }

    #[test]
    fn dynamics_jacobian_matches_richer_stencil() {
        let d = dynamics(true);
        let x = state(
            [(-7f64).to_radians(), 2f64.to_radians(), 5f64.to_radians()],
            None,
        );
        let f = |v: &DVector<f64>| process_model(&d, v, 0.0, 0.1);
        let central = jacobian(f, &x, 1e-6).unwrap();
        // Five-point stencil oracle.
        let h = 1e-3;
        let mut oracle = DMatrix::zeros(7, 7);
        for j in 0..7 {
            let at = |k: f64| {
                let mut p = x.clone();
                p[j] += k * h;
                process_model(&d, &p, 0.0, 0.1).unwrap()
            };
            let col = (-at(2.0) + at(1.0) * 8.0 - at(-1.0) * 8.0 + at(-2.0)) / (12.0 * h);
            oracle.set_column(j, &col);
        }
        assert_relative_eq!(central, oracle, epsilon = 1e-5);
    }

    #[test]
    fn alignment_flips_attitude_blocks_only() {
        let m = AttitudeModel::full(dynamics(false), false);
        let x = state([0.0; 3], None);
        let mut y = m.measure(&x);
        y.rows_mut(0, 4).neg_mut();
        y[8] = -0.3;
        let a = m.align_measurement(&y, &x);
        assert_eq!(&a.as_slice()[..4], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(a[8], -0.3);
    }

    #[test]
    fn restricted_model_drops_gyro_rows() {
        let m = AttitudeModel::new(
            dynamics(false),
            &[SensorKind::StarTracker, SensorKind::Magnetometer],
            false,
        );
        assert_eq!(m.measurement_dim(), 8);
        let y = m.measure(&state([0.1, 0.2, 0.3], None));
        assert_eq!(y.as_slice(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
