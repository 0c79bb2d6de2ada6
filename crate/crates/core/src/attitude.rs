//! Attitude parameterizations and frame transforms.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are scalar-first, `[q0, q1, q2, q3]`, Hamilton product.
//!   A state quaternion rotates body-frame vectors into the inertial (ECI)
//!   frame, which is the convention under which `q̇ = ½ q ⊗ [0, ω]` holds
//!   for body rates `ω`.
//! * Every direction cosine matrix returned here maps ECI coordinates into
//!   the target frame (body or RTN): `v_body = C · v_eci`.
//! * 3-1-3 Euler angles `(φ, θ, ψ)`: the body-to-ECI rotation is
//!   `Rz(ψ)·Rx(θ)·Rz(φ)` built from active elementary rotations, so the
//!   ECI-to-body DCM is its transpose. This is the ordering under which the
//!   3-1-3 rate equations in [`crate::dynamics::euler313_rates`] hold.

use nalgebra::{Matrix3, Vector3};
use std::ops::{Mul, Neg};

use crate::error::{Error, Result};

/// Tolerance on `|q|` for operations that require a unit quaternion.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Scalar-first attitude quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Builds a quaternion from the first four entries of `s`.
    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    /// Rotation by `angle` radians about the unit `axis` (active, body to ECI).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        let n = axis.normalize();
        Self::new(c, s * n.x, s * n.y, s * n.z)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.q0 * other.q0 + self.q1 * other.q1 + self.q2 * other.q2 + self.q3 * other.q3
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.q0 * k, self.q1 * k, self.q2 * k, self.q3 * k)
    }

    /// Unit quaternion with the same direction.
    ///
    /// Inputs already unit to within a few ulps are returned untouched, which
    /// makes repeated calls bit-for-bit idempotent.
    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.dot(self);
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(*self);
        }
        Ok(self.scale(1.0 / n2.sqrt()))
    }

    /// Representative of `±q` with `q0 ≥ 0`; on a zero scalar part the first
    /// nonzero vector component is made positive.
    pub fn canonical(&self) -> Self {
        let lead = [self.q0, self.q1, self.q2, self.q3]
            .into_iter()
            .find(|c| *c != 0.0)
            .unwrap_or(0.0);
        if lead < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Sign of `self` chosen so that it lies in the same hemisphere as `reference`.
    pub fn aligned_with(&self, reference: &Self) -> Self {
        if self.dot(reference) < 0.0 {
            -*self
        } else {
            *self
        }
    }

    fn check_unit(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit(n));
        }
        Ok(())
    }

    /// Rotates a body-frame vector into ECI.
    pub fn rotate_to_inertial(&self, v_body: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(quat_to_dcm(self)?.transpose() * v_body)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Quaternion {
    type Output = Self;

    /// Hamilton product.
    fn mul(self, r: Self) -> Self {
        let l = self;
        Self::new(
            l.q0 * r.q0 - l.q1 * r.q1 - l.q2 * r.q2 - l.q3 * r.q3,
            l.q0 * r.q1 + l.q1 * r.q0 + l.q2 * r.q3 - l.q3 * r.q2,
            l.q0 * r.q2 - l.q1 * r.q3 + l.q2 * r.q0 + l.q3 * r.q1,
            l.q0 * r.q3 + l.q1 * r.q2 - l.q2 * r.q1 + l.q3 * r.q0,
        )
    }
}

/// 3-1-3 Euler angles in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerAngles313 {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles313 {
    pub const fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn from_degrees(phi: f64, theta: f64, psi: f64) -> Self {
        Self::new(phi.to_radians(), theta.to_radians(), psi.to_radians())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.phi, self.theta, self.psi]
    }

    /// Quaternion of the same rotation: `qz(ψ) ⊗ qx(θ) ⊗ qz(φ)`.
    pub fn to_quaternion(&self) -> Quaternion {
        let z = Vector3::z();
        let x = Vector3::x();
        Quaternion::from_axis_angle(&z, self.psi)
            * Quaternion::from_axis_angle(&x, self.theta)
            * Quaternion::from_axis_angle(&z, self.phi)
    }
}

/// ECI-to-body DCM of a unit quaternion.
pub fn quat_to_dcm(q: &Quaternion) -> Result<Matrix3<f64>> {
    q.check_unit()?;
    let Quaternion { q0, q1, q2, q3 } = *q;
    let (q00, q11, q22, q33) = (q0 * q0, q1 * q1, q2 * q2, q3 * q3);
    Ok(Matrix3::new(
        q00 + q11 - q22 - q33,
        2.0 * (q1 * q2 + q0 * q3),
        2.0 * (q1 * q3 - q0 * q2),
        2.0 * (q1 * q2 - q0 * q3),
        q00 - q11 + q22 - q33,
        2.0 * (q2 * q3 + q0 * q1),
        2.0 * (q1 * q3 + q0 * q2),
        2.0 * (q2 * q3 - q0 * q1),
        q00 - q11 - q22 + q33,
    ))
}

/// Inverse of [`quat_to_dcm`] (Shepperd's method), returned with `q0 ≥ 0`.
pub fn dcm_to_quat(c: &Matrix3<f64>) -> Quaternion {
    // Work with the body-to-ECI matrix so the usual formulas apply.
    let r = c.transpose();
    let trace = r.trace();
    let candidates = [trace, r[(0, 0)], r[(1, 1)], r[(2, 2)]];
    let (imax, _) = candidates
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let q = match imax {
        0 => {
            let s = 2.0 * (1.0 + trace).sqrt();
            Quaternion::new(
                0.25 * s,
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            )
        }
        1 => {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            Quaternion::new(
                (r[(2, 1)] - r[(1, 2)]) / s,
                0.25 * s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
            )
        }
        2 => {
            let s = 2.0 * (1.0 - r[(0, 0)] + r[(1, 1)] - r[(2, 2)]).sqrt();
            Quaternion::new(
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                0.25 * s,
                (r[(1, 2)] + r[(2, 1)]) / s,
            )
        }
        _ => {
            let s = 2.0 * (1.0 - r[(0, 0)] - r[(1, 1)] + r[(2, 2)]).sqrt();
            Quaternion::new(
                (r[(1, 0)] - r[(0, 1)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
                (r[(1, 2)] + r[(2, 1)]) / s,
                0.25 * s,
            )
        }
    };
    q.canonical()
}

fn active_rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn active_rx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// ECI-to-body DCM of a 3-1-3 Euler triple: `(Rz(ψ)·Rx(θ)·Rz(φ))ᵀ`.
pub fn euler313_to_dcm(e: &EulerAngles313) -> Matrix3<f64> {
    (active_rz(e.psi) * active_rx(e.theta) * active_rz(e.phi)).transpose()
}

/// ECI-to-RTN rotation. Rows are the radial, transverse and normal unit
/// vectors expressed in ECI.
pub fn eci_to_rtn(r_eci: &Vector3<f64>, v_eci: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let r_norm = r_eci.norm();
    let h = r_eci.cross(v_eci);
    let h_norm = h.norm();
    if r_norm == 0.0 || h_norm <= 1e-12 * r_norm * v_eci.norm() {
        return Err(Error::DegenerateOrbit);
    }
    let radial = r_eci / r_norm;
    let normal = h / h_norm;
    let transverse = normal.cross(&radial);
    Ok(Matrix3::from_rows(&[
        radial.transpose(),
        transverse.transpose(),
        normal.transpose(),
    ]))
}

/// Max-norm of `RᵀR − I` and the determinant, for orthonormality checks.
pub fn orthonormality_error(r: &Matrix3<f64>) -> (f64, f64) {
    let e = r.transpose() * r - Matrix3::identity();
    (e.amax(), r.determinant())
}
