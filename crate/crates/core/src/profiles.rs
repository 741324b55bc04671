//! Standing-wave profiles and multi-layer initial data.
//!
//! A standing wave connects −1 to +1 monotonically and satisfies the first
//! integral `P_ε(u') = F(u)`. Solving that for the slope gives `εu' = S(u)`
//! in closed form, so the profile is the inverse of
//! `x(u) = ε ∫₀^u ds / S(s)`, tabulated on a Chebyshev lattice in `u` and
//! continued by analytic exponential tails beyond `±(1 − η)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::grid::{Field, Grid1D};
use crate::potentials::PotentialSpec;
use crate::quadrature;

pub const DEFAULT_ETA: f64 = 1e-6;
pub const DEFAULT_N_KNOTS: usize = 10_001;

/// `max_{[−1,1]} F < ε⁻²`, required for the Euclidean standing wave.
pub fn check_maxf_condition(potential: &PotentialSpec, eps: f64) -> bool {
    potential.max_on_wells_interval() < 1.0 / (eps * eps)
}

/// Scaled profile slope `ε u'` as a function of the profile value `u`.
pub fn scaled_slope(potential: &PotentialSpec, model: FluxModel, eps: f64, u: f64) -> f64 {
    let f = potential.f(u).max(0.0);
    let e2f = eps * eps * f;
    match model {
        FluxModel::Euclidean => (f * (2.0 - e2f)).max(0.0).sqrt() / (1.0 - e2f),
        FluxModel::Minkowski => (f * (2.0 + e2f)).sqrt() / (1.0 + e2f),
        FluxModel::Linear => (2.0 * f).sqrt(),
    }
}

fn check_profile_args(potential: &PotentialSpec, model: FluxModel, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if model == FluxModel::Euclidean && !check_maxf_condition(potential, eps) {
        return Err(Error::Condition(format!(
            "max_{{Φ∈[−1,1]}}F(Φ)<ε^{{−2}} fails: max F = {} >= {}",
            potential.max_on_wells_interval(),
            1.0 / (eps * eps)
        )));
    }
    Ok(())
}

/// Position `x(u)` of the value `u` on the standing wave centred at 0.
pub fn profile_position(potential: &PotentialSpec, model: FluxModel, eps: f64, u: f64) -> Result<f64> {
    check_profile_args(potential, model, eps)?;
    if !(u > -1.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("profile value must lie in (−1, 1), got {u}")));
    }
    Ok(eps * quadrature::integrate(|s| 1.0 / scaled_slope(potential, model, eps, s), 0.0, u, 1e-15, 1e-14))
}

/// Monotone tabulation of a standing-wave profile.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub eps: f64,
    pub model: FluxModel,
    pub potential: PotentialSpec,
    xs: Vec<f64>,
    us: Vec<f64>,
    slopes: Vec<f64>,
    pub eta: f64,
    /// Tail decay rates `√F''(±1)/ε` for the `+1` and `−1` ends.
    pub decay_plus: f64,
    pub decay_minus: f64,
}

impl ProfileTable {
    pub fn build(potential: &PotentialSpec, model: FluxModel, eps: f64, eta: f64, n_knots: usize) -> Result<Self> {
        check_profile_args(potential, model, eps)?;
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::InvalidArgument(format!("eta must be in (0, 0.5), got {eta}")));
        }
        if n_knots < 3 {
            return Err(Error::InvalidArgument(format!("n_knots must be >= 3, got {n_knots}")));
        }
        let (lp, lm) = (potential.d2f(1.0), potential.d2f(-1.0));
        if !(lp > 0.0 && lm > 0.0) {
            return Err(Error::Condition(format!(
                "exponential tails need F''(±1) > 0, got F''(-1) = {lm}, F''(1) = {lp}"
            )));
        }
        // odd count so that u = 0 is a Chebyshev–Lobatto node
        let n = if n_knots % 2 == 0 { n_knots + 1 } else { n_knots };
        let half = (n - 1) / 2;
        let scale = 1.0 - eta;
        let integrand = |s: f64| eps / scaled_slope(potential, model, eps, s);

        let mut us = vec![0.0; n];
        let mut xs = vec![0.0; n];
        for k in 1..=half {
            let theta = std::f64::consts::PI * k as f64 / (n - 1) as f64;
            let u = scale * (0.5 * std::f64::consts::PI - theta).cos();
            us[half + k] = u;
            us[half - k] = -u;
        }
        us[n - 1] = scale;
        us[0] = -scale;
        for k in half + 1..n {
            xs[k] = xs[k - 1] + quadrature::integrate(integrand, us[k - 1], us[k], 1e-16, 1e-14);
        }
        for k in (0..half).rev() {
            xs[k] = xs[k + 1] - quadrature::integrate(integrand, us[k], us[k + 1], 1e-16, 1e-14);
        }
        let slopes = us
            .iter()
            .map(|&u| scaled_slope(potential, model, eps, u) / eps)
            .collect();
        Ok(Self {
            eps,
            model,
            potential: potential.clone(),
            xs,
            us,
            slopes,
            eta,
            decay_plus: lp.sqrt() / eps,
            decay_minus: lm.sqrt() / eps,
        })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().cloned().zip(self.us.iter().cloned())
    }

    pub fn n_knots(&self) -> usize {
        self.xs.len()
    }

    /// Matching points `(x_η−, x_η+)` where the tails take over.
    pub fn tail_points(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn sample(&self, x: f64) -> f64 {
        self.sample_with_derivatives(x).0
    }

    /// `(u, u', u'')` of the interpolant at `x`.
    pub fn sample_with_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (x_lo, x_hi) = self.tail_points();
        if x >= x_hi {
            let e = self.eta * (-self.decay_plus * (x - x_hi)).exp();
            let k = self.decay_plus;
            return (1.0 - e, k * e, -k * k * e);
        }
        if x <= x_lo {
            let e = self.eta * (self.decay_minus * (x - x_lo)).exp();
            let k = self.decay_minus;
            return (-1.0 + e, k * e, k * k * e);
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i - 1,
        };
        self.hermite(i, x)
    }

    fn hermite(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (u0, u1) = (self.us[i], self.us[i + 1]);
        let dx = x1 - x0;
        let secant = (u1 - u0) / dx;
        let (mut m0, mut m1) = (self.slopes[i], self.slopes[i + 1]);
        // Fritsch–Carlson monotonicity limiter
        if secant > 0.0 {
            let (a, b) = (m0 / secant, m1 / secant);
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m0 *= tau;
                m1 *= tau;
            }
        }
        let t = (x - x0) / dx;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h10 * dx * m0 + h01 * u1 + h11 * dx * m1;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * t2 - 2.0 * t;
        let du = (d00 * u0 + d01 * u1) / dx + d10 * m0 + d11 * m1;
        let s00 = 12.0 * t - 6.0;
        let s10 = 6.0 * t - 4.0;
        let s11 = 6.0 * t - 2.0;
        let d2u = (s00 * (u0 - u1) / dx + s10 * m0 + s11 * m1) / dx;
        (u, du, d2u)
    }

    /// Max of `|ε² Q'(ε² u') u'' − F'(u)|` over a dense lattice (4 points
    /// per knot interval plus the tails).
    pub fn residual(&self) -> f64 {
        let e2 = self.eps * self.eps;
        let point = |x: f64| {
            let (u, du, d2u) = self.sample_with_derivatives(x);
            (e2 * self.model.q_prime_unchecked(e2 * du) * d2u - self.potential.df(u)).abs()
        };
        let mut worst = 0.0f64;
        for w in self.xs.windows(2) {
            for j in 0..4 {
                worst = worst.max(point(w[0] + (w[1] - w[0]) * (j as f64 + 0.5) / 4.0));
            }
        }
        let (x_lo, x_hi) = self.tail_points();
        for j in 1..=50 {
            let d = self.eps * j as f64 * 0.5;
            worst = worst.max(point(x_hi + d)).max(point(x_lo - d));
        }
        worst
    }

    /// Max of `|P_ε(u') − F(u)|` over the knots.
    pub fn first_integral_residual(&self) -> f64 {
        self.us
            .iter()
            .zip(&self.slopes)
            .map(|(&u, &du)| match self.model.p_eps(self.eps, du) {
                Ok(p) => (p - self.potential.f(u)).abs(),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

/// Step function `v` with values ±1 and `N` jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPattern {
    pub a: f64,
    pub b: f64,
    pub jumps: Vec<f64>,
    /// Value of `v` on `[a, h₁)`.
    pub first_sign: i8,
    pub r: f64,
}

impl LayerPattern {
    /// Pattern with `r` inferred as the largest radius compatible with the
    /// layout: half the minimal jump separation, capped by the distance of
    /// the outer jumps to the boundary.
    pub fn new(a: f64, b: f64, jumps: Vec<f64>, first_sign: i8) -> Result<Self> {
        let mut r = f64::INFINITY;
        for w in jumps.windows(2) {
            r = r.min(0.5 * (w[1] - w[0]));
        }
        if let (Some(&first), Some(&last)) = (jumps.first(), jumps.last()) {
            r = r.min(first - a).min(b - last);
        } else {
            r = 0.5 * (b - a);
        }
        Self::with_radius(a, b, jumps, first_sign, r)
    }

    pub fn with_radius(a: f64, b: f64, jumps: Vec<f64>, first_sign: i8, r: f64) -> Result<Self> {
        let p = Self {
            a,
            b,
            jumps,
            first_sign,
            r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::InvalidArgument(format!("pattern domain [{}, {}] is empty", self.a, self.b)));
        }
        if self.first_sign != 1 && self.first_sign != -1 {
            return Err(Error::InvalidArgument(format!("first_sign must be ±1, got {}", self.first_sign)));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidArgument(format!("separation radius must be positive, got {}", self.r)));
        }
        for w in self.jumps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument("jump locations must be strictly increasing".into()));
            }
            if w[1] - w[0] < 2.0 * self.r - 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "jumps {} and {} closer than 2r = {}",
                    w[0],
                    w[1],
                    2.0 * self.r
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (self.jumps.first(), self.jumps.last()) {
            if first - self.r < self.a - 1e-12 || last + self.r > self.b + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "jumps must stay a distance r = {} from the boundary",
                    self.r
                )));
            }
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.jumps.len()
    }

    /// `v(x)`; at a jump location the right-hand value is returned.
    pub fn value(&self, x: f64) -> f64 {
        let crossed = self.jumps.iter().filter(|&&h| h <= x).count();
        let s = if crossed % 2 == 0 { self.first_sign } else { -self.first_sign };
        s as f64
    }

    /// Midpoints `m_j` between consecutive jumps, bracketed by `a` and `b`.
    pub fn midpoints(&self) -> Vec<f64> {
        let mut m = vec![self.a];
        m.extend(self.jumps.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        m.push(self.b);
        m
    }
}

/// Glue copies of the profile, alternating orientation, into a field
/// with a zero at every jump of the pattern.
pub fn build_layer_datum(pattern: &LayerPattern, table: &ProfileTable, grid: Grid1D) -> Result<Field> {
    pattern.validate()?;
    if (grid.a - pattern.a).abs() > 1e-12 || (grid.b - pattern.b).abs() > 1e-12 {
        return Err(Error::InvalidArgument("pattern and grid domains differ".into()));
    }
    if pattern.jumps.is_empty() {
        return Ok(Field::constant(grid, pattern.first_sign as f64));
    }
    let mids = pattern.midpoints();
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            let j = mids[1..mids.len() - 1].iter().filter(|&&m| m <= x).count();
            let orientation = if j % 2 == 0 { -pattern.first_sign } else { pattern.first_sign } as f64;
            table.sample(orientation * (x - pattern.jumps[j]))
        })
        .collect();
    Field::new(grid, values, 0.0)
}
