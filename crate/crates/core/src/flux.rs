//! Diffusion fluxes `Q` and the quantities they induce.
//!
//! All three fluxes are odd with `Q(0) = 0` and `Q'(0) = 1`. Euclidean is
//! bounded by 1 with vanishing `Q'` at large gradients; Minkowski is only
//! defined for `|s| < 1` and blows up at the boundary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default distance kept from the Minkowski singularity at `|s| = 1`.
pub const DEFAULT_GRAD_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxModel {
    /// `Q(s) = s / √(1 + s²)`
    Euclidean,
    /// `Q(s) = s / √(1 − s²)`
    Minkowski,
    /// `Q(s) = s`
    Linear,
}

impl FluxModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::Minkowski => "minkowski",
            Self::Linear => "linear",
        }
    }

    /// Whether the argument `s` is admissible with the given margin.
    #[inline]
    pub fn check(self, s: f64, margin: f64) -> Result<()> {
        if self == Self::Minkowski && !(s.abs() <= 1.0 - margin) {
            return Err(Error::Domain {
                value: s.abs(),
                margin,
                cell: None,
            });
        }
        Ok(())
    }

    pub fn q(self, s: f64) -> Result<f64> {
        self.check(s, DEFAULT_GRAD_MARGIN)?;
        Ok(self.q_unchecked(s))
    }

    pub fn q_prime(self, s: f64) -> Result<f64> {
        self.check(s, DEFAULT_GRAD_MARGIN)?;
        Ok(self.q_prime_unchecked(s))
    }

    #[inline]
    pub fn q_unchecked(self, s: f64) -> f64 {
        match self {
            Self::Euclidean => s / (1.0 + s * s).sqrt(),
            Self::Minkowski => s / ((1.0 - s) * (1.0 + s)).sqrt(),
            Self::Linear => s,
        }
    }

    #[inline]
    pub fn q_prime_unchecked(self, s: f64) -> f64 {
        match self {
            Self::Euclidean => (1.0 + s * s).powf(-1.5),
            Self::Minkowski => ((1.0 - s) * (1.0 + s)).powf(-1.5),
            Self::Linear => 1.0,
        }
    }

    /// `(Q(s), Q'(s))` in one evaluation.
    #[inline]
    pub fn q_and_prime_unchecked(self, s: f64) -> (f64, f64) {
        match self {
            Self::Euclidean => {
                let r = 1.0 / (1.0 + s * s).sqrt();
                (s * r, r * r * r)
            }
            Self::Minkowski => {
                let r = 1.0 / ((1.0 - s) * (1.0 + s)).sqrt();
                (s * r, r * r * r)
            }
            Self::Linear => (s, 1.0),
        }
    }

    /// Gradient part of the renormalised energy integrand at `u_x = p`.
    ///
    /// Its derivative in `p` is `ε⁻¹ Q(ε² p)`.
    pub fn energy_density(self, eps: f64, p: f64) -> Result<f64> {
        check_eps(eps)?;
        let s = eps * eps * p;
        self.check(s, DEFAULT_GRAD_MARGIN)?;
        Ok(self.energy_density_unchecked(eps, p))
    }

    #[inline]
    pub fn energy_density_unchecked(self, eps: f64, p: f64) -> f64 {
        let s = eps * eps * p;
        // (√(1 ± s²) ∓ 1)/ε³ rewritten without cancellation
        match self {
            Self::Euclidean => eps * p * p / ((1.0 + s * s).sqrt() + 1.0),
            Self::Minkowski => eps * p * p / (1.0 + ((1.0 - s) * (1.0 + s)).sqrt()),
            Self::Linear => 0.5 * eps * p * p,
        }
    }

    /// First-integral kinetic term `P_ε(s) = ∫₀^s ε² σ Q'(ε² σ) dσ`.
    pub fn p_eps(self, eps: f64, s: f64) -> Result<f64> {
        check_eps(eps)?;
        let z = eps * eps * s;
        self.check(z, DEFAULT_GRAD_MARGIN)?;
        let z2 = z * z;
        Ok(match self {
            Self::Euclidean => {
                let r = (1.0 + z2).sqrt();
                eps * eps * s * s / (r * (1.0 + r))
            }
            Self::Minkowski => {
                let r = ((1.0 - z) * (1.0 + z)).sqrt();
                eps * eps * s * s / (r * (1.0 + r))
            }
            Self::Linear => 0.5 * eps * eps * s * s,
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

impl fmt::Display for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FluxModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" => Ok(Self::Euclidean),
            "minkowski" => Ok(Self::Minkowski),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown flux model '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [FluxModel; 3] = [FluxModel::Euclidean, FluxModel::Minkowski, FluxModel::Linear];

    #[test]
    fn flux_examples() {
        use FluxModel::*;
        assert_eq!(Euclidean.q(0.0).unwrap(), 0.0);
        assert!((Euclidean.q(1.0).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((Minkowski.q(0.6).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(Minkowski.q(1.0), Err(Error::Domain { .. })));
        assert!(matches!(Minkowski.q_prime(-1.0), Err(Error::Domain { .. })));
        assert_eq!(Euclidean.q_prime(0.0).unwrap(), 1.0);
        assert_eq!(Minkowski.q_prime(0.0).unwrap(), 1.0);
        let far = Euclidean.q_prime(1e3).unwrap();
        assert!((far - 1e-9).abs() < 1e-11);
    }

    #[test]
    fn margin_guard() {
        assert!(FluxModel::Minkowski.check(1.0 - 2e-6, 1e-6).is_ok());
        assert!(FluxModel::Minkowski.check(1.0 - 5e-7, 1e-6).is_err());
        assert!(FluxModel::Minkowski.check(f64::NAN, 1e-6).is_err());
        assert!(FluxModel::Euclidean.check(1e6, 1e-6).is_ok());
    }

    #[test]
    fn energy_density_examples() {
        for m in ALL {
            assert_eq!(m.energy_density(0.1, 0.0).unwrap(), 0.0);
        }
        let e = FluxModel::Euclidean.energy_density(1.0, 3f64.sqrt()).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        let e = FluxModel::Minkowski.energy_density(1.0, 0.6).unwrap();
        assert!((e - 0.2).abs() < 1e-15);
        assert!(FluxModel::Minkowski.energy_density(1.0, 1.0).is_err());
        assert!(FluxModel::Linear.energy_density(0.0, 1.0).is_err());
    }

    #[test]
    fn p_eps_examples() {
        let p = FluxModel::Euclidean.p_eps(1.0, 3f64.sqrt()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let p = FluxModel::Minkowski.p_eps(1.0, 0.6).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        for m in ALL {
            assert_eq!(m.p_eps(0.3, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn p_eps_matches_its_defining_integral() {
        for m in ALL {
            for eps in [1.0, 0.3, 0.1] {
                let s_max = if m == FluxModel::Minkowski { 0.9 / (eps * eps) } else { 7.0 / eps };
                for k in 1..=5 {
                    let s = s_max * k as f64 / 5.0;
                    let quad = crate::quadrature::integrate(
                        |v| eps * eps * v * m.q_prime_unchecked(eps * eps * v),
                        0.0,
                        s,
                        1e-14,
                        1e-13,
                    );
                    let p = m.p_eps(eps, s).unwrap();
                    assert!((quad - p).abs() < 1e-10 * (1.0 + p), "{m} eps={eps} s={s}");
                }
            }
        }
    }

    #[test]
    fn density_derivative_is_scaled_flux() {
        let h = 1e-5;
        for m in ALL {
            for eps in [1.0, 0.1, 0.01] {
                let s_max = if m == FluxModel::Minkowski { 0.95 / (eps * eps) } else { 20.0 / eps };
                for k in -10..=10 {
                    let p = s_max * k as f64 / 10.0;
                    let dp = h * (1.0 + p.abs());
                    let fd = (m.energy_density_unchecked(eps, p + dp) - m.energy_density_unchecked(eps, p - dp))
                        / (2.0 * dp);
                    let expected = m.q_unchecked(eps * eps * p) / eps;
                    assert!(
                        (fd - expected).abs() < 1e-6 * (1.0 + expected.abs()),
                        "{m} eps={eps} p={p}: {fd} vs {expected}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn odd_flux_even_derivative(s in -0.999f64..0.999) {
            for m in ALL {
                prop_assert_eq!(m.q(-s).unwrap(), -m.q(s).unwrap());
                prop_assert_eq!(m.q_prime(-s).unwrap(), m.q_prime(s).unwrap());
            }
        }

        #[test]
        fn euclidean_bounds(s in -1e4f64..1e4) {
            let q = FluxModel::Euclidean.q(s).unwrap();
            let qp = FluxModel::Euclidean.q_prime(s).unwrap();
            prop_assert!(q.abs() < 1.0);
            prop_assert!(qp > 0.0 && qp <= 1.0);
        }

        #[test]
        fn minkowski_derivative_at_least_one(s in -0.999f64..0.999) {
            prop_assert!(FluxModel::Minkowski.q_prime(s).unwrap() >= 1.0);
        }
    }
}
