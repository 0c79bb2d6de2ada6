//! Gravity-gradient torque.

use nalgebra::Vector3;

use super::InertiaTensor;
use crate::attitude::{eci_to_rtn, quat_to_dcm, Quaternion};
use crate::error::{Error, Result};

/// External torques applied to the body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorqueModel {
    pub gravity_gradient: bool,
    /// Constant body-frame torque, N·m.
    pub external: Vector3<f64>,
}

impl Default for TorqueModel {
    fn default() -> Self {
        Self {
            gravity_gradient: false,
            external: Vector3::zeros(),
        }
    }
}

impl TorqueModel {
    pub fn gravity_gradient() -> Self {
        Self {
            gravity_gradient: true,
            ..Self::default()
        }
    }
}

/// Gravity-gradient torque given the body-frame unit radial direction `c`.
///
/// `mu_over_r3` is `μ/R³` in s⁻²; the ratio is unit-consistent whether μ and
/// R are both in km or both in m, so km inputs need no conversion. With the
/// inertia in kg·m² the result is in N·m.
pub fn gravity_gradient_from_radial(
    c: &Vector3<f64>,
    mu_over_r3: f64,
    inertia: &InertiaTensor,
) -> Vector3<f64> {
    let [ixx, iyy, izz] = inertia.principal();
    let k = 3.0 * mu_over_r3;
    Vector3::new(
        k * (izz - iyy) * c.y * c.z,
        k * (ixx - izz) * c.z * c.x,
        k * (iyy - ixx) * c.x * c.y,
    )
}

/// Gravity-gradient torque for attitude `q` at ECI position `r_eci` (km) and
/// velocity `v_eci` (km/s); `mu` in km³/s².
///
/// The radial unit vector in body axes is `c = R_body · R_rtnᵀ · [1, 0, 0]ᵀ`.
pub fn gravity_gradient_torque(
    q: &Quaternion,
    r_eci: &Vector3<f64>,
    v_eci: &Vector3<f64>,
    inertia: &InertiaTensor,
    mu: f64,
) -> Result<Vector3<f64>> {
    let radius = r_eci.norm();
    if radius == 0.0 {
        return Err(Error::ZeroRadius);
    }
    let body = quat_to_dcm(q)?;
    let rtn = eci_to_rtn(r_eci, v_eci)?;
    let c = body * rtn.transpose() * Vector3::x();
    Ok(gravity_gradient_from_radial(&c, mu / radius.powi(3), inertia))
}
