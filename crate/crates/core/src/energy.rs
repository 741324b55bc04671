//! Renormalised energies, transition costs and layer-structure checks.
//!
//! The discrete energy pairs each face gradient with the average of the
//! potential at the two adjacent nodes:
//!
//! `E_h[u] = Σ_faces h · [ W(g_f) + (F(u_i) + F(u_{i+1})) / (2ε) ]`
//!
//! where `W` is the gradient density of the flux model. With zero-flux
//! boundary faces this is exactly the Lyapunov function of the
//! semi-discrete scheme in [`crate::solver`].

use serde::{Deserialize, Serialize};

use crate::diagnostics::l1_distance_to_pattern;
use crate::error::{Error, Result};
use crate::flux::{FluxModel, DEFAULT_GRAD_MARGIN};
use crate::grid::{Field, Grid1D};
use crate::potentials::PotentialSpec;
use crate::profiles::LayerPattern;
use crate::quadrature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    pub gradient_part: f64,
    pub potential_part: f64,
    /// `((window_start, window_end), energy)` per layer window, when requested.
    pub per_layer_window: Vec<((f64, f64), f64)>,
}

/// Gradient and potential parts of the discrete energy of raw nodal values.
///
/// Fails with the offending face index if a Minkowski gradient leaves the
/// admissible range.
pub fn discrete_energy_parts(
    values: &[f64],
    grid: &Grid1D,
    potential: &PotentialSpec,
    model: FluxModel,
    eps: f64,
    grad_margin: f64,
) -> Result<(f64, f64)> {
    let h = grid.h();
    let e2 = eps * eps;
    let mut grad = 0.0;
    let mut pot = 0.0;
    let mut f_left = potential.f(values[0]);
    for (i, w) in values.windows(2).enumerate() {
        let g = (w[1] - w[0]) / h;
        if model == FluxModel::Minkowski {
            model.check(e2 * g, grad_margin).map_err(|_| Error::Domain {
                value: (e2 * g).abs(),
                margin: grad_margin,
                cell: Some(i),
            })?;
        }
        let f_right = potential.f(w[1]);
        grad += h * model.energy_density_unchecked(eps, g);
        pot += 0.5 * h * (f_left + f_right) / eps;
        f_left = f_right;
    }
    Ok((grad, pot))
}

pub fn energy(field: &Field, potential: &PotentialSpec, model: FluxModel, eps: f64) -> Result<EnergyReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let (g, p) = discrete_energy_parts(&field.values, &field.grid, potential, model, eps, DEFAULT_GRAD_MARGIN)?;
    Ok(EnergyReport {
        total: g + p,
        gradient_part: g,
        potential_part: p,
        per_layer_window: Vec::new(),
    })
}

/// Energy with a breakdown over the windows `[m_{j−1}, m_j]` around each
/// jump of `pattern` (faces are assigned by their midpoint).
pub fn energy_by_layer(
    field: &Field,
    pattern: &LayerPattern,
    potential: &PotentialSpec,
    model: FluxModel,
    eps: f64,
) -> Result<EnergyReport> {
    let mut report = energy(field, potential, model, eps)?;
    let mids = pattern.midpoints();
    let grid = field.grid;
    let h = grid.h();
    let mut windows: Vec<((f64, f64), f64)> = mids.windows(2).map(|w| ((w[0], w[1]), 0.0)).collect();
    if windows.is_empty() || pattern.jumps.is_empty() {
        return Ok(report);
    }
    for (i, w) in field.values.windows(2).enumerate() {
        let xm = grid.x(i) + 0.5 * h;
        let k = mids[1..mids.len() - 1].iter().filter(|&&m| m <= xm).count();
        let g = (w[1] - w[0]) / h;
        windows[k].1 += h
            * (model.energy_density_unchecked(eps, g)
                + 0.5 * (potential.f(w[0]) + potential.f(w[1])) / eps);
    }
    report.per_layer_window = windows;
    Ok(report)
}

/// Minimal energy of one transition for each energy functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCosts {
    pub eps: f64,
    /// `∫₋₁¹ √(F(2 − ε²F))`, Euclidean flux.
    pub c_eps: f64,
    /// `∫₋₁¹ √(F(2 + ε²F))`, Minkowski flux.
    pub gamma_eps: f64,
    /// `∫₋₁¹ √(2F)`, the ε → 0 limit of both.
    pub c0: f64,
}

impl TransitionCosts {
    /// Single-transition cost matching the energy of `model`.
    pub fn for_model(&self, model: FluxModel) -> f64 {
        match model {
            FluxModel::Euclidean => self.c_eps,
            FluxModel::Minkowski => self.gamma_eps,
            FluxModel::Linear => self.c0,
        }
    }
}

pub fn transition_costs(potential: &PotentialSpec, eps: f64) -> Result<TransitionCosts> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let e2 = eps * eps;
    let max_f = potential.max_on_wells_interval();
    if 2.0 - e2 * max_f < 0.0 {
        return Err(Error::Condition(format!(
            "2 − ε²F < 0 on [−1, 1] (max F = {max_f}, ε = {eps}); c_ε undefined"
        )));
    }
    let quad = |g: &dyn Fn(f64) -> f64| quadrature::integrate(g, -1.0, 1.0, 1e-15, 1e-14);
    let c_eps = quad(&|s| {
        let f = potential.f(s).max(0.0);
        (f * (2.0 - e2 * f)).max(0.0).sqrt()
    });
    let gamma_eps = quad(&|s| {
        let f = potential.f(s).max(0.0);
        (f * (2.0 + e2 * f)).sqrt()
    });
    let c0 = quad(&|s| (2.0 * potential.f(s).max(0.0)).sqrt());
    Ok(TransitionCosts {
        eps,
        c_eps,
        gamma_eps,
        c0,
    })
}

/// `LHS − RHS` of the pointwise Young-type inequality for `model`:
///
/// * Euclidean: `(√(1+ε⁴x²)−1)/ε³ + y/ε − |x|√(2y − ε²y²)`, `y ∈ [0, 2ε⁻²]`
/// * Minkowski: `(1−√(1−ε⁴x²))/ε³ + y/ε − |x|√(2y + ε²y²)`, `|x| ≤ ε⁻²`, `y ≥ 0`
/// * Linear: `εx²/2 + y/ε − |x|√(2y)`, `y ≥ 0`
///
/// Evaluated through the exact factorisation `LHS − RHS = D²/(ε³(A + B))`
/// so the result carries no cancellation error.
pub fn young_type_margin(model: FluxModel, eps: f64, x: f64, y: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let e2 = eps * eps;
    let ax = x.abs();
    if !(y >= 0.0) || !ax.is_finite() {
        return Err(Error::InvalidArgument(format!("need y >= 0 and finite x, got ({x}, {y})")));
    }
    let e3 = e2 * eps;
    let z = e2 * e2 * x * x;
    let (c, root, k) = match model {
        FluxModel::Euclidean => {
            if y > 2.0 / e2 {
                return Err(Error::InvalidArgument(format!("y = {y} exceeds 2ε⁻² = {}", 2.0 / e2)));
            }
            let r = (1.0 + z).sqrt();
            (z / (r + 1.0), r, (y * (2.0 - e2 * y)).max(0.0))
        }
        FluxModel::Minkowski => {
            if ax > 1.0 / e2 {
                return Err(Error::InvalidArgument(format!("|x| = {ax} exceeds ε⁻² = {}", 1.0 / e2)));
            }
            let r = ((1.0 - e2 * ax) * (1.0 + e2 * ax)).sqrt();
            (z / (1.0 + r), r, y * (2.0 + e2 * y))
        }
        FluxModel::Linear => {
            let d = (0.5 * eps).sqrt() * ax - (y / eps).sqrt();
            return Ok(d * d);
        }
    };
    let a = c + e2 * y;
    let b = e3 * ax * k.sqrt();
    if a + b == 0.0 {
        return Ok(0.0);
    }
    let d = c - e2 * y * root;
    Ok(d * d / (e3 * (a + b)))
}

/// Measured quantities for the N-transition layer structure test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCertificate {
    pub model: FluxModel,
    pub eps: f64,
    pub n_layers: usize,
    pub l1_to_pattern: f64,
    pub energy: f64,
    pub cost_per_layer: f64,
    /// `E − N · cost`.
    pub excess: f64,
    pub a: f64,
    pub c: f64,
    /// `C exp(−A/ε)`.
    pub threshold: f64,
    /// Whether `A ∈ (0, r √(2λ))`.
    pub a_admissible: bool,
    pub a_upper: f64,
    pub passed: bool,
}

/// `r √(2λ)` for the pattern and potential.
pub fn admissible_rate(pattern: &LayerPattern, potential: &PotentialSpec) -> f64 {
    pattern.r * (2.0 * potential.lambda_min()).max(0.0).sqrt()
}

/// Default `A = 0.9 · r √(2λ)`.
pub fn default_rate(pattern: &LayerPattern, potential: &PotentialSpec) -> f64 {
    0.9 * admissible_rate(pattern, potential)
}

pub fn layer_structure_certificate(
    field: &Field,
    pattern: &LayerPattern,
    potential: &PotentialSpec,
    model: FluxModel,
    eps: f64,
    a: f64,
    c: f64,
) -> Result<LayerCertificate> {
    let e = energy(field, potential, model, eps)?.total;
    let costs = transition_costs(potential, eps)?;
    let cost = costs.for_model(model);
    let n = pattern.n_layers();
    let excess = e - n as f64 * cost;
    let threshold = c * (-a / eps).exp();
    let upper = admissible_rate(pattern, potential);
    Ok(LayerCertificate {
        model,
        eps,
        n_layers: n,
        l1_to_pattern: l1_distance_to_pattern(field, pattern),
        energy: e,
        cost_per_layer: cost,
        excess,
        a,
        c,
        threshold,
        a_admissible: a > 0.0 && a < upper,
        a_upper: upper,
        passed: excess <= threshold,
    })
}

/// Result of the lower-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LowerBound {
    /// `E − (N · cost − C exp(−A/ε))`.
    Margin { margin: f64 },
    /// `‖u − v‖_{L¹} > δ`; the check does not apply.
    HypothesisNotMet { l1: f64, delta: f64 },
}

impl LowerBound {
    pub fn margin(&self) -> Option<f64> {
        match self {
            Self::Margin { margin } => Some(*margin),
            Self::HypothesisNotMet { .. } => None,
        }
    }
}

/// Default closeness radius `δ = 0.1 r`.
pub fn default_closeness(pattern: &LayerPattern) -> f64 {
    0.1 * pattern.r
}

#[allow(clippy::too_many_arguments)]
pub fn lower_bound_check(
    field: &Field,
    pattern: &LayerPattern,
    potential: &PotentialSpec,
    model: FluxModel,
    eps: f64,
    a: f64,
    c: f64,
    delta: f64,
) -> Result<LowerBound> {
    let l1 = l1_distance_to_pattern(field, pattern);
    if l1 > delta {
        return Ok(LowerBound::HypothesisNotMet { l1, delta });
    }
    let e = energy(field, potential, model, eps)?.total;
    let cost = transition_costs(potential, eps)?.for_model(model);
    let bound = pattern.n_layers() as f64 * cost - c * (-a / eps).exp();
    Ok(LowerBound::Margin { margin: e - bound })
}
