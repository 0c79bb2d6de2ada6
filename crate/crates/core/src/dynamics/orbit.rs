//! Two-body Keplerian orbit propagation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Earth's gravitational parameter, km³/s².
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;

const KEPLER_TOL: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;

/// Classical orbital elements. Distances in km, angles in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeplerianElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    /// Argument of perigee.
    pub omega: f64,
    /// Right ascension of the ascending node.
    pub raan: f64,
    /// True anomaly at t = 0.
    pub nu0: f64,
    /// Gravitational parameter, km³/s².
    pub mu: f64,
}

impl KeplerianElements {
    /// Near-circular polar LEO used by the bundled scenarios.
    pub fn reference_leo() -> Self {
        Self {
            a: 7080.6,
            e: 0.0000979,
            i: 98.2f64.to_radians(),
            omega: 120.4799f64.to_radians(),
            raan: 95.2063f64.to_radians(),
            nu0: 0.0,
            mu: MU_EARTH_KM3_S2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::config("elements.a", "semi-major axis must be positive"));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Error::config("elements.e", format!("eccentricity {} outside [0, 1)", self.e)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::config("elements.mu", "gravitational parameter must be positive"));
        }
        Ok(())
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.mu / self.a.powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.mean_motion()
    }

    /// Perifocal-to-ECI rotation `R3(-Ω)·R1(-i)·R3(-ω)`.
    fn perifocal_to_eci(&self) -> Matrix3<f64> {
        let (so, co) = self.raan.sin_cos();
        let (si, ci) = self.i.sin_cos();
        let (sw, cw) = self.omega.sin_cos();
        Matrix3::new(
            co * cw - so * sw * ci,
            -co * sw - so * cw * ci,
            so * si,
            so * cw + co * sw * ci,
            -so * sw + co * cw * ci,
            -co * si,
            sw * si,
            cw * si,
            ci,
        )
    }
}

/// Solves `E − e·sin E = M` by Newton iteration.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    let m = mean_anomaly.rem_euclid(2.0 * std::f64::consts::PI);
    let mut ecc = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc - e * ecc.sin() - m;
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() < KEPLER_TOL {
            return Ok(ecc);
        }
    }
    Err(Error::KeplerNoConvergence {
        mean_anomaly: m,
        eccentricity: e,
    })
}

/// ECI position (km) and velocity (km/s) at time `t` seconds after epoch.
pub fn kepler_state(el: &KeplerianElements, t: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    el.validate()?;
    let e = el.e;
    let beta = ((1.0 - e) / (1.0 + e)).sqrt();
    let ecc0 = 2.0 * (beta * (0.5 * el.nu0).tan()).atan();
    let m0 = ecc0 - e * ecc0.sin();
    let ecc = solve_kepler(m0 + el.mean_motion() * t, e)?;

    let (se, ce) = ecc.sin_cos();
    let sqrt_1me2 = (1.0 - e * e).sqrt();
    let nu = (sqrt_1me2 * se).atan2(ce - e);
    let radius = el.a * (1.0 - e * ce);
    let p = el.a * (1.0 - e * e);
    let (sn, cn) = nu.sin_cos();
    let r_pf = Vector3::new(radius * cn, radius * sn, 0.0);
    let vk = (el.mu / p).sqrt();
    let v_pf = Vector3::new(-vk * sn, vk * (e + cn), 0.0);

    let rot = el.perifocal_to_eci();
    Ok((rot * r_pf, rot * v_pf))
}
