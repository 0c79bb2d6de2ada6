//! Rigid-body attitude dynamics: Euler's equations, quaternion and 3-1-3
//! kinematics, gravity-gradient torque and a fixed-step RK4 propagator.
//!
//! The same propagator generates ground truth and serves as the filters'
//! discrete process model, so truth and estimates live on one time grid.

mod orbit;
mod torque;

pub use orbit::{kepler_state, solve_kepler, KeplerianElements, MU_EARTH_KM3_S2};
pub use torque::{gravity_gradient_from_radial, gravity_gradient_torque, TorqueModel};

use nalgebra::{DVector, Matrix3, Vector3};

use crate::attitude::{quat_to_dcm, EulerAngles313, Quaternion};
use crate::error::{Error, Result};

/// Minimum |sin θ| accepted by the 3-1-3 rate equations.
pub const EULER_SINGULARITY_TOL: f64 = 1e-6;

/// Spacecraft inertia tensor, kg·m².
///
/// The full matrix is kept for reference, but the equations of motion use the
/// principal (diagonal) values only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaTensor {
    matrix: Matrix3<f64>,
    principal: [f64; 3],
}

impl InertiaTensor {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if (matrix - matrix.transpose()).amax() > 1e-9 {
            return Err(Error::config("inertia", "matrix is not symmetric"));
        }
        if matrix.cholesky().is_none() {
            return Err(Error::config("inertia", "matrix is not positive definite"));
        }
        let [ixx, iyy, izz] = [matrix[(0, 0)], matrix[(1, 1)], matrix[(2, 2)]];
        if ixx + iyy < izz || iyy + izz < ixx || izz + ixx < iyy {
            return Err(Error::config(
                "inertia",
                "principal moments violate the triangle inequality",
            ));
        }
        Ok(Self {
            matrix,
            principal: [ixx, iyy, izz],
        })
    }

    pub fn diagonal(ixx: f64, iyy: f64, izz: f64) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vector3::new(ixx, iyy, izz)))
    }

    /// Inertia of the large LEO spacecraft used by the bundled scenarios.
    pub fn reference_spacecraft() -> Self {
        Self::new(Matrix3::new(
            23745.0, 93.907, -1267.1, 93.907, 17560.0, -967.50, -1267.1, -967.5, 36065.0,
        ))
        .expect("reference inertia is valid")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn principal(&self) -> [f64; 3] {
        self.principal
    }

    fn principal_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.principal))
    }
}

/// Attitude, body rate and (when augmented) gyro bias.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    pub q: Quaternion,
    /// Body angular velocity, rad/s.
    pub omega: Vector3<f64>,
    /// Gyro bias, rad/s. Present only in the bias-augmented model.
    pub bias: Option<Vector3<f64>>,
}

/// Time derivative of a [`RigidBodyState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub q_dot: [f64; 4],
    pub omega_dot: Vector3<f64>,
    pub bias_dot: Option<Vector3<f64>>,
}

impl RigidBodyState {
    pub fn new(q: Quaternion, omega: Vector3<f64>) -> Self {
        Self {
            q,
            omega,
            bias: None,
        }
    }

    pub fn with_bias(mut self, bias: Vector3<f64>) -> Self {
        self.bias = Some(bias);
        self
    }

    pub fn dim(&self) -> usize {
        if self.bias.is_some() {
            10
        } else {
            7
        }
    }

    /// Flat layout `[q0 q1 q2 q3 ωx ωy ωz (bx by bz)]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.as_mut_slice()[..4].copy_from_slice(&self.q.to_array());
        v.fixed_rows_mut::<3>(4).copy_from(&self.omega);
        if let Some(b) = self.bias {
            v.fixed_rows_mut::<3>(7).copy_from(&b);
        }
        v
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        let bias = match x.len() {
            7 => None,
            10 => Some(Vector3::new(x[7], x[8], x[9])),
            n => {
                return Err(Error::DimensionMismatch(format!(
                    "state vector must have 7 or 10 entries, got {n}"
                )))
            }
        };
        Ok(Self {
            q: Quaternion::from_slice(x),
            omega: Vector3::new(x[4], x[5], x[6]),
            bias,
        })
    }

    /// `self + h·d` without renormalization.
    pub fn advanced(&self, d: &StateDerivative, h: f64) -> Self {
        let q = self.q.to_array();
        Self {
            q: Quaternion::new(
                q[0] + h * d.q_dot[0],
                q[1] + h * d.q_dot[1],
                q[2] + h * d.q_dot[2],
                q[3] + h * d.q_dot[3],
            ),
            omega: self.omega + d.omega_dot * h,
            bias: match (self.bias, d.bias_dot) {
                (Some(b), Some(db)) => Some(b + db * h),
                (b, _) => b,
            },
        }
    }

    /// Rotational kinetic energy `½ ωᵀIω` with the principal inertia.
    pub fn kinetic_energy(&self, inertia: &InertiaTensor) -> f64 {
        0.5 * self.omega.dot(&(inertia.principal_matrix() * self.omega))
    }

    /// Angular momentum expressed in ECI.
    pub fn inertial_angular_momentum(&self, inertia: &InertiaTensor) -> Result<Vector3<f64>> {
        self.q
            .normalize()?
            .rotate_to_inertial(&(inertia.principal_matrix() * self.omega))
    }
}

impl StateDerivative {
    fn combine(k: [&StateDerivative; 4], w: [f64; 4]) -> Self {
        let mut q_dot = [0.0; 4];
        for (i, qd) in q_dot.iter_mut().enumerate() {
            *qd = w[0] * k[0].q_dot[i] + w[1] * k[1].q_dot[i] + w[2] * k[2].q_dot[i]
                + w[3] * k[3].q_dot[i];
        }
        let omega_dot = k[0].omega_dot * w[0]
            + k[1].omega_dot * w[1]
            + k[2].omega_dot * w[2]
            + k[3].omega_dot * w[3];
        Self {
            q_dot,
            omega_dot,
            bias_dot: k[0].bias_dot.map(|_| Vector3::zeros()),
        }
    }
}

/// Euler's equations for a principal-axis rigid body.
pub fn body_rate_derivative(
    omega: &Vector3<f64>,
    tau: &Vector3<f64>,
    inertia: &InertiaTensor,
) -> Vector3<f64> {
    let [ixx, iyy, izz] = inertia.principal();
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    Vector3::new(
        (tau.x - (izz - iyy) * wy * wz) / ixx,
        (tau.y - (ixx - izz) * wz * wx) / iyy,
        (tau.z - (iyy - ixx) * wx * wy) / izz,
    )
}

/// Quaternion kinematics `q̇ = ½ q ⊗ [0, ω]`.
pub fn quaternion_rates(q: &Quaternion, omega: &Vector3<f64>) -> [f64; 4] {
    let Quaternion { q0, q1, q2, q3 } = *q;
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    [
        0.5 * (-q1 * wx - q2 * wy - q3 * wz),
        0.5 * (q0 * wx - q3 * wy + q2 * wz),
        0.5 * (q3 * wx + q0 * wy - q1 * wz),
        0.5 * (-q2 * wx + q1 * wy + q0 * wz),
    ]
}

/// 3-1-3 Euler angle rates `[φ̇, θ̇, ψ̇]` from body rates.
pub fn euler313_rates(e: &EulerAngles313, omega: &Vector3<f64>) -> Result<Vector3<f64>> {
    let (sphi, cphi) = e.phi.sin_cos();
    let (sth, cth) = e.theta.sin_cos();
    if sth.abs() <= EULER_SINGULARITY_TOL {
        return Err(Error::EulerSingularity(sth));
    }
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    Ok(Vector3::new(
        (-sphi * cth * wx - cphi * cth * wy + sth * wz) / sth,
        cphi * wx - sphi * wy,
        (sphi * wx + cphi * wy) / sth,
    ))
}

/// Radial geometry needed by the gravity-gradient model at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSample {
    /// Unit radial direction in ECI.
    pub r_hat: Vector3<f64>,
    /// μ/R³, s⁻².
    pub mu_over_r3: f64,
}

/// Orbit geometry at the three RK4 stage times of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepEnvironment {
    pub dt: f64,
    stages: Option<[RadialSample; 3]>,
}

/// Dynamics of the spacecraft: inertia, torques and the orbit it flies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsModel {
    pub inertia: InertiaTensor,
    pub torque: TorqueModel,
    pub orbit: KeplerianElements,
}

impl DynamicsModel {
    pub fn new(inertia: InertiaTensor, torque: TorqueModel, orbit: KeplerianElements) -> Self {
        Self {
            inertia,
            torque,
            orbit,
        }
    }

    pub fn radial_sample(&self, t: f64) -> Result<RadialSample> {
        let (r, _) = kepler_state(&self.orbit, t)?;
        let radius = r.norm();
        if radius == 0.0 {
            return Err(Error::ZeroRadius);
        }
        Ok(RadialSample {
            r_hat: r / radius,
            mu_over_r3: self.orbit.mu / radius.powi(3),
        })
    }

    /// Precomputes the orbit geometry for an RK4 step from `t` to `t + dt`.
    pub fn step_environment(&self, t: f64, dt: f64) -> Result<StepEnvironment> {
        let stages = if self.torque.gravity_gradient {
            Some([
                self.radial_sample(t)?,
                self.radial_sample(t + 0.5 * dt)?,
                self.radial_sample(t + dt)?,
            ])
        } else {
            None
        };
        Ok(StepEnvironment { dt, stages })
    }

    fn torque_at(&self, q: &Quaternion, radial: Option<&RadialSample>) -> Result<Vector3<f64>> {
        let mut tau = self.torque.external;
        if let Some(rs) = radial {
            // Stage quaternions are slightly off the unit sphere; only the
            // direction matters for the body-frame radial vector.
            let c = quat_to_dcm(&q.normalize()?)? * rs.r_hat;
            tau += gravity_gradient_from_radial(&c, rs.mu_over_r3, &self.inertia);
        }
        Ok(tau)
    }

    fn derivative_with(
        &self,
        state: &RigidBodyState,
        radial: Option<&RadialSample>,
    ) -> Result<StateDerivative> {
        let tau = self.torque_at(&state.q, radial)?;
        Ok(StateDerivative {
            q_dot: quaternion_rates(&state.q, &state.omega),
            omega_dot: body_rate_derivative(&state.omega, &tau, &self.inertia),
            bias_dot: state.bias.map(|_| Vector3::zeros()),
        })
    }

    /// Continuous-time state derivative at time `t`.
    pub fn derivative(&self, state: &RigidBodyState, t: f64) -> Result<StateDerivative> {
        let radial = if self.torque.gravity_gradient {
            Some(self.radial_sample(t)?)
        } else {
            None
        };
        self.derivative_with(state, radial.as_ref())
    }

    /// One classical RK4 step using precomputed orbit geometry. The
    /// quaternion is renormalized once, after the step.
    pub fn step_with(&self, state: &RigidBodyState, env: &StepEnvironment) -> Result<RigidBodyState> {
        let h = env.dt;
        let stage = |i: usize| env.stages.as_ref().map(|s| &s[i]);
        let k1 = self.derivative_with(state, stage(0))?;
        let k2 = self.derivative_with(&state.advanced(&k1, 0.5 * h), stage(1))?;
        let k3 = self.derivative_with(&state.advanced(&k2, 0.5 * h), stage(1))?;
        let k4 = self.derivative_with(&state.advanced(&k3, h), stage(2))?;
        let slope = StateDerivative::combine([&k1, &k2, &k3, &k4], [1.0, 2.0, 2.0, 1.0]);
        let mut next = state.advanced(&slope, h / 6.0);
        next.q = next.q.normalize()?;
        Ok(next)
    }

    pub fn step(&self, state: &RigidBodyState, t: f64, dt: f64) -> Result<RigidBodyState> {
        self.step_with(state, &self.step_environment(t, dt)?)
    }

    /// Fixed-step RK4 trajectory on the grid `t0, t0 + dt, …, t1`.
    pub fn integrate(
        &self,
        state: &RigidBodyState,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<Vec<RigidBodyState>> {
        let steps = grid_steps(t0, t1, dt)?;
        let mut out = Vec::with_capacity(steps + 1);
        let mut x = *state;
        out.push(x);
        for k in 0..steps {
            x = self.step(&x, t0 + k as f64 * dt, dt)?;
            out.push(x);
        }
        Ok(out)
    }

    /// Fixed-step RK4 propagation of 3-1-3 Euler angles and body rates.
    pub fn integrate_euler(
        &self,
        angles: EulerAngles313,
        omega: Vector3<f64>,
        t0: f64,
        t1: f64,
        dt: f64,
    ) -> Result<Vec<(EulerAngles313, Vector3<f64>)>> {
        let steps = grid_steps(t0, t1, dt)?;
        let f = |e: &[f64; 6], t: f64| -> Result<[f64; 6]> {
            let angles = EulerAngles313::new(e[0], e[1], e[2]);
            let w = Vector3::new(e[3], e[4], e[5]);
            let rates = euler313_rates(&angles, &w)?;
            let mut tau = self.torque.external;
            if self.torque.gravity_gradient {
                let rs = self.radial_sample(t)?;
                let c = crate::attitude::euler313_to_dcm(&angles) * rs.r_hat;
                tau += gravity_gradient_from_radial(&c, rs.mu_over_r3, &self.inertia);
            }
            let wd = body_rate_derivative(&w, &tau, &self.inertia);
            Ok([rates.x, rates.y, rates.z, wd.x, wd.y, wd.z])
        };
        let add = |a: &[f64; 6], b: &[f64; 6], h: f64| -> [f64; 6] {
            std::array::from_fn(|i| a[i] + h * b[i])
        };
        let mut x = [angles.phi, angles.theta, angles.psi, omega.x, omega.y, omega.z];
        let mut out = Vec::with_capacity(steps + 1);
        let unpack = |x: &[f64; 6]| {
            (
                EulerAngles313::new(x[0], x[1], x[2]),
                Vector3::new(x[3], x[4], x[5]),
            )
        };
        out.push(unpack(&x));
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            let k1 = f(&x, t)?;
            let k2 = f(&add(&x, &k1, 0.5 * dt), t + 0.5 * dt)?;
            let k3 = f(&add(&x, &k2, 0.5 * dt), t + 0.5 * dt)?;
            let k4 = f(&add(&x, &k3, dt), t + dt)?;
            x = std::array::from_fn(|i| {
                x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
            out.push(unpack(&x));
        }
        Ok(out)
    }
}

/// Number of `dt` steps between `t0` and `t1`.
pub fn grid_steps(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "t1 ({t1}) must be greater than t0 ({t0})"
        )));
    }
    Ok(((t1 - t0) / dt).round() as usize)
}
