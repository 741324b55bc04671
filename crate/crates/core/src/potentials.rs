//! Bistable double-well potentials `F` with wells at ±1.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied potential: `F` and its first three derivatives.
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub funcs: [ScalarFn; 4],
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialSpec {
    /// `F(u) = (u² − 1)² / 4`
    QuarticDoubleWell,
    /// `F(u) = (u² − 1)^{2n} / (4n)`, degenerate at the wells for `n ≥ 2`.
    DegenerateDoubleWell { n: u32 },
    Custom(CustomPotential),
}

impl PotentialSpec {
    pub fn degenerate(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("degeneracy n must be >= 1".into()));
        }
        Ok(Self::DegenerateDoubleWell { n })
    }

    pub fn custom<F0, F1, F2, F3>(name: &str, f: F0, df: F1, d2f: F2, d3f: F3) -> Self
    where
        F0: Fn(f64) -> f64 + Send + Sync + 'static,
        F1: Fn(f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64) -> f64 + Send + Sync + 'static,
        F3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(CustomPotential {
            name: name.to_string(),
            funcs: [Arc::new(f), Arc::new(df), Arc::new(d2f), Arc::new(d3f)],
        })
    }

    /// Parse a registry name: `quartic` or `degenerate:n=<k>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "quartic" {
            return Ok(Self::QuarticDoubleWell);
        }
        if let Some(rest) = name.strip_prefix("degenerate:") {
            let n = rest
                .trim()
                .strip_prefix("n=")
                .and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| Error::Config(format!("bad degenerate potential '{name}'")))?;
            return Self::degenerate(n).map_err(|e| Error::Config(e.to_string()));
        }
        Err(Error::Config(format!("unknown potential '{name}'")))
    }

    pub fn name(&self) -> String {
        match self {
            Self::QuarticDoubleWell => "quartic".into(),
            Self::DegenerateDoubleWell { n } => format!("degenerate:n={n}"),
            Self::Custom(c) => format!("custom:{}", c.name),
        }
    }

    /// Wells are degenerate in the sense `F''(±1) = 0`.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Self::QuarticDoubleWell => false,
            Self::DegenerateDoubleWell { n } => *n >= 2,
            Self::Custom(_) => self.d2f(1.0) <= 0.0 || self.d2f(-1.0) <= 0.0,
        }
    }

    /// `F`, `F'`, `F''` or `F'''` at `u`.
    pub fn eval(&self, u: f64, order: u32) -> Result<f64> {
        match order {
            0 => Ok(self.f(u)),
            1 => Ok(self.df(u)),
            2 => Ok(self.d2f(u)),
            3 => Ok(self.d3f(u)),
            _ => Err(Error::InvalidArgument(format!(
                "derivative order {order} not supported (0..=3)"
            ))),
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self {
            Self::QuarticDoubleWell => {
                let w = (u - 1.0) * (u + 1.0);
                0.25 * w * w
            }
            Self::DegenerateDoubleWell { n } => {
                let w = (u - 1.0) * (u + 1.0);
                w.powi(2 * *n as i32) / (4.0 * *n as f64)
            }
            Self::Custom(c) => (c.funcs[0])(u),
        }
    }

    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        match self {
            Self::QuarticDoubleWell => u * (u - 1.0) * (u + 1.0),
            Self::DegenerateDoubleWell { n } => {
                let w = (u - 1.0) * (u + 1.0);
                u * w.powi(2 * *n as i32 - 1)
            }
            Self::Custom(c) => (c.funcs[1])(u),
        }
    }

    #[inline]
    pub fn d2f(&self, u: f64) -> f64 {
        match self {
            Self::QuarticDoubleWell => 3.0 * u * u - 1.0,
            Self::DegenerateDoubleWell { n } => {
                let n = *n as i32;
                let w = (u - 1.0) * (u + 1.0);
                w.powi(2 * n - 2) * ((4 * n - 1) as f64 * u * u - 1.0)
            }
            Self::Custom(c) => (c.funcs[2])(u),
        }
    }

    #[inline]
    pub fn d3f(&self, u: f64) -> f64 {
        match self {
            Self::QuarticDoubleWell => 6.0 * u,
            Self::DegenerateDoubleWell { n } => {
                let n = *n as i32;
                if n == 1 {
                    return 6.0 * u;
                }
                let w = (u - 1.0) * (u + 1.0);
                let p = (4 * n - 1) as f64 * u * u - 1.0;
                (2 * n - 2) as f64 * w.powi(2 * n - 3) * 2.0 * u * p
                    + w.powi(2 * n - 2) * 2.0 * (4 * n - 1) as f64 * u
            }
            Self::Custom(c) => (c.funcs[3])(u),
        }
    }

    /// `λ = min{F''(−1), F''(+1)}`.
    pub fn lambda_min(&self) -> f64 {
        self.d2f(-1.0).min(self.d2f(1.0))
    }

    /// `ν = sup |F'''|` on `[−1−ρ₁, 1+ρ₁]`.
    pub fn sup_third_derivative(&self, rho1: f64) -> Result<f64> {
        if rho1.is_nan() || rho1 < 0.0 {
            return Err(Error::InvalidArgument(format!("rho1 must be >= 0, got {rho1}")));
        }
        let lim = 1.0 + rho1;
        Ok(quadrature::maximize(|u| self.d3f(u).abs(), -lim, lim, 4001).1)
    }

    /// `max F` on `[−1, 1]`.
    pub fn max_on_wells_interval(&self) -> f64 {
        quadrature::maximize(|u| self.f(u), -1.0, 1.0, 4001).1
    }

    pub fn validate(&self) -> ValidationReport {
        validate_double_well(self, DEFAULT_VALIDATION_TOL, &default_lattice())
    }
}

pub const DEFAULT_VALIDATION_TOL: f64 = 1e-10;
/// Radius of the neighbourhoods of ±1 excluded from the positivity check.
pub const WELL_EXCLUSION_RADIUS: f64 = 1e-6;

/// 2001 uniform points on `[−1.5, 1.5]`.
pub fn default_lattice() -> Vec<f64> {
    (0..2001).map(|i| -1.5 + 3.0 * i as f64 / 2000.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub potential: String,
    pub checks: Vec<ConditionCheck>,
    pub warnings: Vec<String>,
    pub lambda: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn degenerate_warning(&self) -> bool {
        self.warnings.iter().any(|w| w.contains("degenerate"))
    }
}

/// Check the standing double-well assumptions on a sampled lattice.
pub fn validate_double_well(spec: &PotentialSpec, tol: f64, lattice: &[f64]) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64, passed: bool| {
        checks.push(ConditionCheck {
            name: name.to_string(),
            passed,
            residual,
        })
    };
    for (name, value) in [
        ("F(-1)=0", spec.f(-1.0)),
        ("F(+1)=0", spec.f(1.0)),
        ("F'(-1)=0", spec.df(-1.0)),
        ("F'(+1)=0", spec.df(1.0)),
    ] {
        push(name, value.abs(), value.abs() <= tol);
    }

    let mut min_f = f64::INFINITY;
    for &u in lattice {
        if (u - 1.0).abs() < WELL_EXCLUSION_RADIUS || (u + 1.0).abs() < WELL_EXCLUSION_RADIUS {
            continue;
        }
        min_f = min_f.min(spec.f(u));
    }
    push("F(u)>0 for u!=±1", min_f, min_f > 0.0);

    let finite = lattice.iter().all(|&u| {
        spec.f(u).is_finite() && spec.df(u).is_finite() && spec.d2f(u).is_finite() && spec.d3f(u).is_finite()
    });
    push("derivatives finite on lattice", if finite { 0.0 } else { f64::NAN }, finite);

    let lambda = spec.lambda_min();
    let mut warnings = Vec::new();
    if lambda <= tol {
        warnings.push(format!(
            "degenerate wells: min F''(±1) = {lambda:e} <= {tol:e}; exponential slow motion not expected"
        ));
    }
    if let PotentialSpec::Custom(_) = spec {
        let lo = lattice.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lattice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        warnings.push(format!(
            "custom potential checked only on [{lo}, {hi}]; global C^3 regularity is assumed, not verified"
        ));
    }
    ValidationReport {
        potential: spec.name(),
        checks,
        warnings,
        lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice() -> Vec<f64> {
        (0..=600).map(|i| -1.5 + 3.0 * i as f64 / 600.0).collect()
    }

    #[test]
    fn quartic_values() {
        let q = PotentialSpec::QuarticDoubleWell;
        assert_eq!(q.eval(1.0, 0).unwrap(), 0.0);
        assert_eq!(q.eval(0.0, 0).unwrap(), 0.25);
        assert_eq!(q.eval(1.0, 2).unwrap(), 2.0);
        assert!(matches!(q.eval(0.3, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_values() {
        let d = PotentialSpec::degenerate(2).unwrap();
        assert_eq!(d.eval(1.0, 2).unwrap(), 0.0);
        assert_eq!(d.eval(0.0, 0).unwrap(), 0.125);
        assert_eq!(d.lambda_min(), 0.0);
        assert!(d.is_degenerate());
        // n = 1 reduces to the quartic
        let d1 = PotentialSpec::degenerate(1).unwrap();
        let q = PotentialSpec::QuarticDoubleWell;
        for u in [-1.3, -0.2, 0.0, 0.7, 1.2] {
            for k in 0..4 {
                assert!((d1.eval(u, k).unwrap() - q.eval(u, k).unwrap()).abs() < 1e-14);
            }
        }
        assert!(PotentialSpec::degenerate(0).is_err());
    }

    #[test]
    fn derivatives_consistent_by_central_differences() {
        let h = 1e-4;
        for spec in [
            PotentialSpec::QuarticDoubleWell,
            PotentialSpec::degenerate(2).unwrap(),
            PotentialSpec::degenerate(3).unwrap(),
        ] {
            for &u in lattice().iter().step_by(7) {
                for k in 0..3 {
                    let fd = (spec.eval(u + h, k).unwrap() - spec.eval(u - h, k).unwrap()) / (2.0 * h);
                    let exact = spec.eval(u, k + 1).unwrap();
                    assert!(
                        (fd - exact).abs() < 1e-5 * (1.0 + exact.abs()),
                        "{} u={u} k={k}: {fd} vs {exact}",
                        spec.name()
                    );
                }
            }
        }
    }

    #[test]
    fn builtins_even() {
        for spec in [PotentialSpec::QuarticDoubleWell, PotentialSpec::degenerate(2).unwrap()] {
            for &u in &lattice() {
                assert_eq!(spec.f(u), spec.f(-u));
            }
        }
    }

    #[test]
    fn validation_examples() {
        let r = PotentialSpec::QuarticDoubleWell.validate();
        assert!(r.passed());
        assert_eq!(r.lambda, 2.0);
        assert!(r.warnings.is_empty());

        let r = PotentialSpec::degenerate(2).unwrap().validate();
        assert!(r.passed());
        assert!(r.degenerate_warning());

        let custom = PotentialSpec::custom("u2", |u| u * u, |u| 2.0 * u, |_| 2.0, |_| 0.0);
        let r = custom.validate();
        assert!(!r.passed());
        assert!(!r.check("F(+1)=0").unwrap().passed);
        assert!(r.warnings.iter().any(|w| w.contains("C^3")));
    }

    #[test]
    fn lambda_of_asymmetric_custom() {
        // F''(−1) = 1, F''(1) = 3
        let c = PotentialSpec::custom(
            "asym",
            |u| u,
            |_| 0.0,
            |u: f64| if u < 0.0 { 1.0 } else { 3.0 },
            |_| 0.0,
        );
        assert_eq!(c.lambda_min(), 1.0);
    }

    #[test]
    fn third_derivative_sup() {
        let q = PotentialSpec::QuarticDoubleWell;
        assert!((q.sup_third_derivative(0.1).unwrap() - 6.6).abs() < 1e-12);
        assert!((q.sup_third_derivative(0.0).unwrap() - 6.0).abs() < 1e-12);
        // n = 2: F''' = 6u(u² − 1)(7u² − 3), maximised over a brute-force lattice
        let d = PotentialSpec::degenerate(2).unwrap();
        let brute = (0..=200_000)
            .map(|i| -1.0 + 2.0 * i as f64 / 200_000.0)
            .map(|u: f64| (6.0 * u * (u * u - 1.0) * (7.0 * u * u - 3.0)).abs())
            .fold(0.0, f64::max);
        assert!((d.sup_third_derivative(0.0).unwrap() - brute).abs() < 1e-9);
    }

    #[test]
    fn registry_names() {
        assert!(matches!(PotentialSpec::from_name("quartic"), Ok(PotentialSpec::QuarticDoubleWell)));
        assert!(matches!(
            PotentialSpec::from_name("degenerate:n=3"),
            Ok(PotentialSpec::DegenerateDoubleWell { n: 3 })
        ));
        assert!(PotentialSpec::from_name("sextic").is_err());
        assert!(PotentialSpec::from_name("degenerate:n=x").is_err());
    }
}
