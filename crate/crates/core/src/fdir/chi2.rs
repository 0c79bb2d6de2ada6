use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(0.5 * dof as f64, 0.5 * x)
    }
}

/// Inverse chi-square CDF: the `γ` with `P(χ²_dof ≤ γ) = alpha`.
///
/// Brackets the root, then refines with safeguarded Newton steps on the
/// regularized lower incomplete gamma function until `|CDF(γ) − α| < 1e-10`.
pub fn chi2_quantile(dof: usize, alpha: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("chi-square dof must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence {alpha} outside (0, 1)")));
    }
    let k = dof as f64;
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while chi2_cdf(dof, hi) < alpha {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi2_cdf(dof, x) - alpha;
        if f.abs() < 1e-12 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = chi2_pdf(k, x);
        let newton = x - f / pdf;
        x = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Ok(x)
}

fn chi2_pdf(k: f64, x: f64) -> f64 {
    let h = 0.5 * k;
    ((h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(h)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    /// CDF by composite Simpson integration of the density, independent of
    /// the incomplete gamma function. The substitution t = u² makes the
    /// integrand 2u·pdf(u²) ∝ u^(k−1)·exp(−u²/2), smooth at the origin.
    fn simpson_cdf(k: usize, x: f64) -> f64 {
        let h = 0.5 * k as f64;
        let norm = (ln_gamma(h) + h * 2f64.ln()).exp();
        let f = |u: f64| 2.0 * u.powi(k as i32 - 1) * (-0.5 * u * u).exp() / norm;
        simpson(f, 0.0, x.sqrt(), 20_000)
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn quantiles_match_integration_oracle() {
        for (dof, expected) in [(3, 7.8147), (11, 19.6751), (1, 3.8415)] {
            let g = chi2_quantile(dof, 0.95).unwrap();
            assert!((g - expected).abs() < 5e-5, "dof {dof}: {g}");
            assert!((chi2_cdf(dof, g) - 0.95).abs() < 1e-10);
            assert!((simpson_cdf(dof, g) - 0.95).abs() < 1e-7, "oracle disagrees at dof {dof}");
        }
    }

    #[test]
    fn quantile_is_monotone_in_alpha() {
        for dof in [1, 3, 8, 11] {
            let mut prev = 0.0;
            for a in [0.5, 0.8, 0.9, 0.95, 0.99, 0.999] {
                let g = chi2_quantile(dof, a).unwrap();
                assert!(g > prev);
                prev = g;
            }
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(chi2_quantile(0, 0.95).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
        assert!(chi2_quantile(3, 0.0).is_err());
    }
}
