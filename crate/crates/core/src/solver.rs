//! Implicit time integration of `u_t = Q(ε² u_x)_x − F'(u)` with zero-flux
//! boundaries.
//!
//! Space: nodes `x_0..x_n`, face gradients `g_{i+½} = (u_{i+1} − u_i)/h`,
//! trapezoid mass `w_i` (`h/2` at the two boundary nodes). The
//! semi-discrete system `u_t = −ε M⁻¹ ∇E_h(u)` is the weighted-L² gradient
//! flow of the discrete energy in [`crate::energy`].
//!
//! Time: backward Euler solved by full Newton on the tridiagonal Jacobian,
//! error-controlled by step doubling.

use serde::Serialize;

use crate::diagnostics::{self, LevelSet};
use crate::energy::discrete_energy_parts;
use crate::error::{Error, Result};
use crate::flux::{FluxModel, DEFAULT_GRAD_MARGIN};
use crate::grid::{Field, Grid1D};
use crate::potentials::PotentialSpec;
use crate::profiles::LayerPattern;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub eps: f64,
    pub model: FluxModel,
    pub potential: PotentialSpec,
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub local_error_tol: f64,
    pub snapshot_times: Vec<f64>,
    pub observer_stride: usize,
    /// Safety distance from the Minkowski singularity, `δ_grad`.
    pub grad_margin: f64,
    /// A step is grown by `growth_factor` after `growth_after` consecutive accepts.
    pub growth_factor: f64,
    pub growth_after: usize,
    /// End the run at the first observation with fewer zero crossings.
    pub stop_below_layers: Option<usize>,
}

impl SolverConfig {
    pub fn new(eps: f64, model: FluxModel, potential: PotentialSpec, t_end: f64) -> Self {
        Self {
            eps,
            model,
            potential,
            t_end,
            dt_init: 1e-4,
            dt_min: 1e-10,
            dt_max: default_dt_max(model),
            newton_tol: 1e-10,
            newton_max_iter: 25,
            local_error_tol: 1e-5,
            snapshot_times: Vec::new(),
            observer_stride: 10,
            grad_margin: DEFAULT_GRAD_MARGIN,
            growth_factor: 1.3,
            growth_after: 5,
            stop_below_layers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(0.0 < self.dt_min && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.newton_tol > 0.0 && self.local_error_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.newton_max_iter == 0 || self.observer_stride == 0 || self.growth_after == 0 {
            return bad("newton_max_iter, observer_stride and growth_after must be >= 1".into());
        }
        if !(self.growth_factor >= 1.0) {
            return bad(format!("growth_factor must be >= 1, got {}", self.growth_factor));
        }
        if !(self.grad_margin > 0.0 && self.grad_margin < 1.0) {
            return bad(format!("grad_margin must be in (0, 1), got {}", self.grad_margin));
        }
        Ok(())
    }
}

/// Largest admissible step: 10 for the Euclidean and linear fluxes, 1 for
/// Minkowski.
pub fn default_dt_max(model: FluxModel) -> f64 {
    match model {
        FluxModel::Minkowski => 1.0,
        _ => 10.0,
    }
}

fn check_gradients(values: &[f64], grid: &Grid1D, model: FluxModel, eps: f64, margin: f64) -> Result<()> {
    if model != FluxModel::Minkowski {
        return Ok(());
    }
    let scale = eps * eps / grid.h();
    for (i, w) in values.windows(2).enumerate() {
        let s = scale * (w[1] - w[0]);
        if !(s.abs() <= 1.0 - margin) {
            return Err(Error::Domain {
                value: s.abs(),
                margin,
                cell: Some(i),
            });
        }
    }
    Ok(())
}

fn rhs_into(values: &[f64], grid: &Grid1D, config: &SolverConfig, out: &mut [f64]) {
    let n = values.len();
    let h = grid.h();
    let e2 = config.eps * config.eps;
    let mut flux_left = 0.0;
    for i in 0..n {
        let flux_right = if i + 1 < n {
            config.model.q_unchecked(e2 * (values[i + 1] - values[i]) / h)
        } else {
            0.0
        };
        out[i] = (flux_right - flux_left) / grid.weight(i) - config.potential.df(values[i]);
        flux_left = flux_right;
    }
}

/// Right-hand side of the semi-discrete system at every node.
pub fn semidiscrete_rhs(field: &Field, config: &SolverConfig) -> Result<Vec<f64>> {
    check_gradients(&field.values, &field.grid, config.model, config.eps, config.grad_margin)?;
    let mut out = vec![0.0; field.values.len()];
    rhs_into(&field.values, &field.grid, config, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub newton_iterations: usize,
    /// Final Newton correction in the max norm.
    pub residual: f64,
}

/// Reusable buffers for the tridiagonal Newton solve.
#[derive(Debug, Clone, Default)]
struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    trial: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
            trial: vec![0.0; n],
        }
    }
}

/// Thomas algorithm; solution overwrites `rhs`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], c: &mut [f64]) -> bool {
    let n = diag.len();
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return false;
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return false;
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    true
}

/// Solve `u = u_old + dt · rhs(u)` in place, starting from `u = u_old`.
fn implicit_euler(
    old: &[f64],
    dt: f64,
    grid: &Grid1D,
    config: &SolverConfig,
    ws: &mut Workspace,
    out: &mut Vec<f64>,
    t: f64,
) -> Result<StepStats> {
    let n = old.len();
    let h = grid.h();
    let e2 = config.eps * config.eps;
    let model = config.model;
    out.clear();
    out.extend_from_slice(old);
    let reject = |reason: String| Error::StepRejected { t, reason };

    for iter in 1..=config.newton_max_iter {
        // assemble G(u) = u − old − dt·rhs(u) and J = I − dt·∂rhs/∂u
        let mut flux_left = 0.0;
        let mut cond_left = 0.0;
        for i in 0..n {
            let (flux_right, cond_right) = if i + 1 < n {
                let (q, qp) = model.q_and_prime_unchecked(e2 * (out[i + 1] - out[i]) / h);
                (q, qp * e2 / h)
            } else {
                (0.0, 0.0)
            };
            let w = grid.weight(i);
            let u = out[i];
            let r = (flux_right - flux_left) / w - config.potential.df(u);
            ws.rhs[i] = -(u - old[i] - dt * r);
            ws.diag[i] = 1.0 + dt * ((cond_left + cond_right) / w + config.potential.d2f(u));
            ws.lower[i] = -dt * cond_left / w;
            ws.upper[i] = -dt * cond_right / w;
            flux_left = flux_right;
            cond_left = cond_right;
        }
        if !solve_tridiagonal(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch) {
            return Err(reject("singular Newton matrix".into()));
        }
        let delta = ws.rhs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !delta.is_finite() {
            return Err(reject("non-finite Newton update".into()));
        }
        // damp the update until the Minkowski constraint holds
        let mut lambda = 1.0;
        loop {
            ws.trial.clear();
            ws.trial.extend(out.iter().zip(&ws.rhs).map(|(u, d)| u + lambda * d));
            if check_gradients(&ws.trial, grid, model, config.eps, config.grad_margin).is_ok() {
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(reject("Newton iterate violates the gradient constraint".into()));
            }
        }
        std::mem::swap(out, &mut ws.trial);
        if lambda == 1.0 && delta <= config.newton_tol {
            return Ok(StepStats {
                newton_iterations: iter,
                residual: delta,
            });
        }
    }
    Err(reject(format!(
        "Newton did not converge in {} iterations",
        config.newton_max_iter
    )))
}

/// One backward-Euler step of size `dt`. The input is untouched on failure.
pub fn step(field: &Field, dt: f64, config: &SolverConfig) -> Result<(Field, StepStats)> {
    if !(dt >= config.dt_min && dt <= config.dt_max) {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} outside [{}, {}]",
            config.dt_min, config.dt_max
        )));
    }
    check_gradients(&field.values, &field.grid, config.model, config.eps, config.grad_margin)?;
    let mut ws = Workspace::new(field.values.len());
    let mut out = Vec::with_capacity(field.values.len());
    let stats = implicit_euler(&field.values, dt, &field.grid, config, &mut ws, &mut out, field.time)?;
    Ok((
        Field {
            grid: field.grid,
            values: out,
            time: field.time + dt,
        },
        stats,
    ))
}

/// Summary of one accepted (step-doubled) step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedStep {
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub energy_gradient: f64,
    pub energy_potential: f64,
    /// `E(t_{k+1}) − E(t_k) + ε⁻¹ Σ_sub dt_sub ‖Δu/dt_sub‖²_M`.
    pub dissipation_residual: f64,
    /// Discrete `‖u_t‖²_{L²}` over the step.
    pub ut_l2_sq: f64,
    pub energy_change: f64,
    pub newton_iterations: usize,
}

/// Adaptive integrator state; owns the workspace and the step-size memory.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub config: SolverConfig,
    dt: f64,
    streak: usize,
    ws: Workspace,
    full: Vec<f64>,
    half: Vec<f64>,
    two_half: Vec<f64>,
    energy: Option<(f64, f64, f64)>,
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
}

impl Integrator {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let dt = config.dt_init;
        Ok(Self {
            config,
            dt,
            streak: 0,
            ws: Workspace::default(),
            full: Vec::new(),
            half: Vec::new(),
            two_half: Vec::new(),
            energy: None,
            accepted: 0,
            rejected: 0,
            newton_iterations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn energy_of(&self, values: &[f64], grid: &Grid1D) -> Result<(f64, f64, f64)> {
        let c = &self.config;
        let (g, p) = discrete_energy_parts(values, grid, &c.potential, c.model, c.eps, c.grad_margin)?;
        Ok((g + p, g, p))
    }

    fn weighted_sq(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| grid.weight(i) * (x - y) * (x - y))
            .sum()
    }

    /// Take one accepted step no larger than `max_dt`, retrying with halved
    /// steps on rejection.
    pub fn accept_step(&mut self, state: &mut Field, max_dt: f64) -> Result<AcceptedStep> {
        let grid = state.grid;
        let n = state.values.len();
        if self.ws.diag.len() != n {
            self.ws = Workspace::new(n);
        }
        let (e_old, _, _) = match self.energy {
            Some(e) => e,
            None => {
                check_gradients(&state.values, &grid, self.config.model, self.config.eps, self.config.grad_margin)?;
                let e = self.energy_of(&state.values, &grid)?;
                self.energy = Some(e);
                e
            }
        };
        loop {
            let dt = self.dt.min(max_dt);
            if self.dt < self.config.dt_min {
                return Err(Error::DtUnderflow {
                    t: state.time,
                    dt: self.dt,
                    dt_min: self.config.dt_min,
                });
            }
            match self.try_doubled(state, dt) {
                Ok((err, iters)) if err <= self.config.local_error_tol => {
                    let e_new = self.energy_of(&self.two_half, &grid);
                    let (e_new, eg, ep) = match e_new {
                        Ok(e) => e,
                        Err(_) => {
                            self.reject();
                            continue;
                        }
                    };
                    let eps = self.config.eps;
                    let hdt = 0.5 * dt;
                    let d1 = Self::weighted_sq(&grid, &self.half, &state.values);
                    let d2 = Self::weighted_sq(&grid, &self.two_half, &self.half);
                    let dissipation = (d1 + d2) / (hdt * eps);
                    let ut_l2_sq = Self::weighted_sq(&grid, &self.two_half, &state.values) / (dt * dt);
                    std::mem::swap(&mut state.values, &mut self.two_half);
                    let t_new = state.time + dt;
                    state.time = t_new;
                    self.energy = Some((e_new, eg, ep));
                    self.accepted += 1;
                    self.newton_iterations += iters;
                    // clipped steps do not count toward growth
                    if dt == self.dt {
                        self.streak += 1;
                        if self.streak >= self.config.growth_after {
                            self.dt = (self.dt * self.config.growth_factor).min(self.config.dt_max);
                            self.streak = 0;
                        }
                    }
                    return Ok(AcceptedStep {
                        t: t_new,
                        dt,
                        energy: e_new,
                        energy_gradient: eg,
                        energy_potential: ep,
                        dissipation_residual: e_new - e_old + dissipation,
                        ut_l2_sq,
                        energy_change: e_new - e_old,
                        newton_iterations: iters,
                    });
                }
                _ => self.reject(),
            }
        }
    }

    fn reject(&mut self) {
        self.rejected += 1;
        self.streak = 0;
        self.dt *= 0.5;
    }

    /// Returns the step-doubling error estimate in the max norm.
    fn try_doubled(&mut self, state: &Field, dt: f64) -> Result<(f64, usize)> {
        let grid = state.grid;
        let t = state.time;
        let mut full = std::mem::take(&mut self.full);
        let mut half = std::mem::take(&mut self.half);
        let mut two = std::mem::take(&mut self.two_half);
        let result = (|| {
            let s1 = implicit_euler(&state.values, dt, &grid, &self.config, &mut self.ws, &mut full, t)?;
            let s2 = implicit_euler(&state.values, 0.5 * dt, &grid, &self.config, &mut self.ws, &mut half, t)?;
            let s3 = implicit_euler(&half, 0.5 * dt, &grid, &self.config, &mut self.ws, &mut two, t + 0.5 * dt)?;
            let err = full.iter().zip(&two).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok((err, s1.newton_iterations + s2.newton_iterations + s3.newton_iterations))
        })();
        self.full = full;
        self.half = half;
        self.two_half = two;
        result
    }

    /// Integrate until `state.time == t_target`, calling `on_step` after
    /// every accepted step. Returns early with `false` as soon as `on_step`
    /// does.
    pub fn advance_to(
        &mut self,
        state: &mut Field,
        t_target: f64,
        mut on_step: impl FnMut(&AcceptedStep, &Field) -> bool,
    ) -> Result<bool> {
        while state.time < t_target {
            let remaining = t_target - state.time;
            let max_dt = if remaining <= self.dt * (1.0 + 1e-12) { remaining } else { f64::INFINITY };
            let info = self.accept_step(state, max_dt)?;
            if max_dt.is_finite() && info.dt == max_dt {
                state.time = t_target;
            }
            if !on_step(&info, state) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Integrate a field to `t_target` without recording anything.
pub fn advance(field: &Field, config: &SolverConfig, t_target: f64) -> Result<Field> {
    let mut integrator = Integrator::new(config.clone())?;
    let mut state = field.clone();
    integrator.advance_to(&mut state, t_target, |_, _| true)?;
    Ok(state)
}

/// One row of the recorded time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub energy_gradient: f64,
    pub energy_potential: f64,
    pub dissipation_residual: f64,
    pub ut_l2_sq: f64,
    /// `NaN` when no reference pattern was supplied.
    pub l1_to_v: f64,
    pub n_layers: usize,
    pub interfaces: Vec<f64>,
}

/// State just before an observed drop in the zero-crossing count.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub before: Field,
    pub layers_before: usize,
    pub t_after: f64,
    pub layers_after: usize,
    pub interfaces_before: Vec<f64>,
    pub interfaces_after: Vec<f64>,
}

/// Worst-case per-step invariant measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepAudit {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    /// Max of `(E_{k+1} − E_k)/(1 + |E_k|)` over accepted steps.
    pub max_relative_energy_increase: f64,
    /// Max of `|dissipation residual| / dt²` over accepted steps.
    pub max_dissipation_ratio: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// Max of `ε² |u_x| ` over faces and accepted states.
    pub max_scaled_gradient: f64,
}

impl StepAudit {
    fn new(u0: &Field, eps: f64) -> Self {
        let (lo, hi) = min_max(&u0.values);
        Self {
            accepted_steps: 0,
            rejected_steps: 0,
            newton_iterations: 0,
            max_relative_energy_increase: f64::NEG_INFINITY,
            max_dissipation_ratio: 0.0,
            min_value: lo,
            max_value: hi,
            max_scaled_gradient: eps * eps * u0.max_abs_gradient(),
        }
    }

    pub fn energy_monotone(&self, rel_tol: f64) -> bool {
        self.max_relative_energy_increase <= rel_tol
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: SolverConfig,
    pub pattern: Option<LayerPattern>,
    pub u0: Field,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<Field>,
    pub checkpoints: Vec<Checkpoint>,
    pub audit: StepAudit,
    pub final_field: Field,
    pub completed: bool,
    /// The run ended before `t_end` because of `stop_below_layers`.
    pub stopped_early: bool,
}

impl RunRecord {
    pub fn initial_layers(&self) -> usize {
        self.series.first().map(|r| r.n_layers).unwrap_or(0)
    }

    /// Zero-crossing count of the last recorded observation.
    pub fn final_layers(&self) -> usize {
        self.series.last().map(|r| r.n_layers).unwrap_or(0)
    }

    /// Zero-crossing count at the last observation with `t <= time`.
    pub fn layers_at(&self, time: f64) -> Option<usize> {
        self.series.iter().take_while(|r| r.t <= time).last().map(|r| r.n_layers)
    }

    pub fn snapshot_at(&self, time: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.time - time).abs() <= 1e-9 * (1.0 + time.abs()))
    }
}

/// Snapshot handed to observers.
#[derive(Debug)]
pub struct Observation<'a> {
    pub row: &'a SeriesRow,
    pub field: &'a Field,
    pub is_snapshot: bool,
}

pub trait Observer {
    fn observe(&mut self, obs: &Observation<'_>);
}

impl<F: FnMut(&Observation<'_>)> Observer for F {
    fn observe(&mut self, obs: &Observation<'_>) {
        self(obs)
    }
}

/// A failed evolution: the error plus everything recorded up to it.
#[derive(Debug, Clone)]
pub struct SolverAbort {
    pub error: Error,
    pub record: RunRecord,
}

impl std::fmt::Display for SolverAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver aborted at t = {}: {}", self.record.final_field.time, self.error)
    }
}

impl std::error::Error for SolverAbort {}

fn make_row(step: Option<&AcceptedStep>, field: &Field, e: (f64, f64, f64), pattern: Option<&LayerPattern>) -> SeriesRow {
    let interfaces = diagnostics::interface(field, &LevelSet::zero())
        .map(|s| s.positions)
        .unwrap_or_default();
    SeriesRow {
        t: field.time,
        dt: step.map(|s| s.dt).unwrap_or(0.0),
        energy: e.0,
        energy_gradient: e.1,
        energy_potential: e.2,
        dissipation_residual: step.map(|s| s.dissipation_residual).unwrap_or(0.0),
        ut_l2_sq: step.map(|s| s.ut_l2_sq).unwrap_or(0.0),
        l1_to_v: pattern
            .map(|p| diagnostics::l1_distance_to_pattern(field, p))
            .unwrap_or(f64::NAN),
        n_layers: interfaces.len(),
        interfaces,
    }
}

/// Integrate `u0` to `config.t_end`, recording the time series, requested
/// snapshots and checkpoints ahead of every observed layer-count drop.
pub fn evolve(
    u0: &Field,
    config: &SolverConfig,
    pattern: Option<&LayerPattern>,
    observers: &mut [&mut dyn Observer],
) -> std::result::Result<RunRecord, SolverAbort> {
    let mut record = RunRecord {
        config: config.clone(),
        pattern: pattern.cloned(),
        u0: u0.clone(),
        series: Vec::new(),
        snapshots: Vec::new(),
        checkpoints: Vec::new(),
        audit: StepAudit::new(u0, config.eps),
        final_field: u0.clone(),
        completed: false,
        stopped_early: false,
    };
    let abort = |error: Error, mut record: RunRecord, state: &Field| {
        record.final_field = state.clone();
        Err(SolverAbort { error, record })
    };
    let mut integrator = match Integrator::new(config.clone()) {
        Ok(i) => i,
        Err(e) => return abort(e, record, u0),
    };
    if let Err(e) = check_gradients(&u0.values, &u0.grid, config.model, config.eps, config.grad_margin) {
        return abort(e, record, u0);
    }
    let e0 = match integrator.energy_of(&u0.values, &u0.grid) {
        Ok(e) => e,
        Err(e) => return abort(e, record, u0),
    };

    let mut state = u0.clone();
    let mut targets: Vec<f64> = config
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&t| t > u0.time && t < config.t_end)
        .collect();
    targets.push(config.t_end);
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();

    let emit = |record: &mut RunRecord,
                observers: &mut [&mut dyn Observer],
                row: SeriesRow,
                field: &Field,
                is_snapshot: bool,
                last_obs: &mut (Field, SeriesRow)| {
        if row.n_layers < last_obs.1.n_layers {
            record.checkpoints.push(Checkpoint {
                before: last_obs.0.clone(),
                layers_before: last_obs.1.n_layers,
                t_after: row.t,
                layers_after: row.n_layers,
                interfaces_before: last_obs.1.interfaces.clone(),
                interfaces_after: row.interfaces.clone(),
            });
        }
        if is_snapshot {
            record.snapshots.push(field.clone());
        }
        for obs in observers.iter_mut() {
            obs.observe(&Observation {
                row: &row,
                field,
                is_snapshot,
            });
        }
        *last_obs = (field.clone(), row.clone());
        record.series.push(row);
    };

    let row0 = make_row(None, &state, e0, pattern);
    let mut last_obs = (state.clone(), row0.clone());
    let snap0 = config.snapshot_times.iter().any(|&t| t == u0.time);
    emit(&mut record, observers, row0, &state, snap0, &mut last_obs);

    let mut since_obs = 0usize;
    for target in targets {
        let mut audit = record.audit;
        let mut pending: Option<AcceptedStep> = None;
        let mut rows = Vec::new();
        let result = integrator.advance_to(&mut state, target, |info, field| {
            audit.accepted_steps += 1;
            let e_prev = info.energy - info.energy_change;
            audit.max_relative_energy_increase = audit
                .max_relative_energy_increase
                .max(info.energy_change / (1.0 + e_prev.abs()));
            audit.max_dissipation_ratio = audit
                .max_dissipation_ratio
                .max(info.dissipation_residual.abs() / (info.dt * info.dt));
            let (lo, hi) = min_max(&field.values);
            audit.min_value = audit.min_value.min(lo);
            audit.max_value = audit.max_value.max(hi);
            let e2 = field.grid.h().recip() * config.eps * config.eps;
            let g = field.values.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs()));
            audit.max_scaled_gradient = audit.max_scaled_gradient.max(e2 * g);
            since_obs += 1;
            pending = Some(*info);
            if since_obs >= config.observer_stride && field.time < target {
                since_obs = 0;
                let row = make_row(Some(info), field, (info.energy, info.energy_gradient, info.energy_potential), pattern);
                let stop = config.stop_below_layers.is_some_and(|k| row.n_layers < k);
                rows.push((row, field.clone()));
                if stop {
                    pending = None;
                    return false;
                }
            }
            true
        });
        audit.rejected_steps = integrator.rejected;
        audit.newton_iterations = integrator.newton_iterations;
        record.audit = audit;
        for (row, field) in rows {
            emit(&mut record, observers, row, &field, false, &mut last_obs);
        }
        let keep_going = match result {
            Ok(k) => k,
            Err(e) => {
                record.final_field = state.clone();
                return Err(SolverAbort { error: e, record });
            }
        };
        if let Some(info) = pending {
            since_obs = 0;
            let is_snapshot = config.snapshot_times.iter().any(|&t| t == target);
            let row = make_row(Some(&info), &state, (info.energy, info.energy_gradient, info.energy_potential), pattern);
            let stop = config.stop_below_layers.is_some_and(|k| row.n_layers < k);
            emit(&mut record, observers, row, &state, is_snapshot, &mut last_obs);
            if stop && target < config.t_end {
                record.stopped_early = true;
                break;
            }
        }
        if !keep_going {
            record.stopped_early = true;
            break;
        }
    }
    record.final_field = state;
    record.completed = true;
    Ok(record)
}

/// `‖u_x‖²_{L²} ≤ C ε⁻¹` at every snapshot, with `C = 2 𝓔_ε[u₀](1 + margin)`.
pub fn apriori_gradient_check(record: &RunRecord, eps: f64) -> bool {
    apriori_gradient_check_with_margin(record, eps, 1e-2)
}

pub fn apriori_gradient_check_with_margin(record: &RunRecord, eps: f64, margin: f64) -> bool {
    let c = &record.config;
    let e0 = match crate::energy::energy(&record.u0, &c.potential, FluxModel::Minkowski, eps) {
        Ok(r) => r.total,
        Err(_) => return false,
    };
    let bound = 2.0 * e0 * (1.0 + margin) / eps;
    record.snapshots.iter().all(|s| s.gradient_l2_sq() <= bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_layer_datum, ProfileTable, DEFAULT_ETA};
    use std::f64::consts::PI;

    fn zero_potential() -> PotentialSpec {
        PotentialSpec::custom("zero", |_| 0.0, |_| 0.0, |_| 0.0, |_| 0.0)
    }

    #[test]
    fn rhs_vanishes_at_equilibria() {
        let g = Grid1D::new(-1.0, 1.0, 40).unwrap();
        for model in [FluxModel::Euclidean, FluxModel::Minkowski, FluxModel::Linear] {
            let cfg = SolverConfig::new(0.1, model, PotentialSpec::QuarticDoubleWell, 1.0);
            for c in [1.0, -1.0, 0.0] {
                let r = semidiscrete_rhs(&Field::constant(g, c), &cfg).unwrap();
                assert!(r.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn rhs_rejects_minkowski_violation() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let f = Field::from_fn(g, |x| if x > 0.45 { 1.0 } else { 0.0 }).unwrap();
        let cfg = SolverConfig::new(1.0, FluxModel::Minkowski, PotentialSpec::QuarticDoubleWell, 1.0);
        assert!(matches!(semidiscrete_rhs(&f, &cfg), Err(Error::Domain { cell: Some(4), .. })));
    }

    #[test]
    fn rhs_of_profile_converges_quadratically() {
        let eps = 0.1;
        let q = PotentialSpec::QuarticDoubleWell;
        let table = ProfileTable::build(&q, FluxModel::Euclidean, eps, DEFAULT_ETA, 10_001).unwrap();
        let cfg = SolverConfig::new(eps, FluxModel::Euclidean, q, 1.0);
        let max_rhs = |n: usize| {
            let g = Grid1D::new(-2.0, 2.0, n).unwrap();
            let f = Field::from_fn(g, |x| table.sample(x)).unwrap();
            semidiscrete_rhs(&f, &cfg).unwrap().iter().fold(0.0f64, |m, r| m.max(r.abs()))
        };
        let (r1, r2, r3) = (max_rhs(400), max_rhs(800), max_rhs(1600));
        assert!(r3 < r2 && r2 < r1);
        let rate = (r2 / r3).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}: {r1} {r2} {r3}");
    }

    #[test]
    fn tridiagonal_solver() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3, 5, 3] -> x = 1
        let mut rhs = vec![3.0, 5.0, 3.0];
        let mut c = vec![0.0; 3];
        assert!(solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &mut rhs, &mut c));
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_fixed_point() {
        let g = Grid1D::new(-1.0, 1.0, 20).unwrap();
        let cfg = SolverConfig::new(0.1, FluxModel::Euclidean, PotentialSpec::QuarticDoubleWell, 1.0);
        let (f, stats) = step(&Field::constant(g, 1.0), 5.0, &cfg).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0));
        assert_eq!(stats.newton_iterations, 1);
    }

    #[test]
    fn fourier_mode_damping_matches_discrete_eigenvalue() {
        let (a, b, n) = (0.0, 2.0, 64);
        let g = Grid1D::new(a, b, n).unwrap();
        let eps = 0.3;
        let mut cfg = SolverConfig::new(eps, FluxModel::Linear, zero_potential(), 1.0);
        cfg.newton_tol = 1e-14;
        let h = g.h();
        for m in [1usize, 3, 10] {
            let amp = 0.01;
            let u0 = Field::from_fn(g, |x| amp * (PI * m as f64 * (x - a) / (b - a)).cos()).unwrap();
            let dt = 0.05;
            let (u1, _) = step(&u0, dt, &cfg).unwrap();
            let k2 = 2.0 / (h * h) * (1.0 - (PI * h * m as f64 / (b - a)).cos());
            let factor = 1.0 / (1.0 + dt * eps * eps * k2);
            for (x, y) in u0.values.iter().zip(&u1.values) {
                assert!((y - factor * x).abs() < 1e-13, "m={m}");
            }
        }
    }

    #[test]
    fn step_rejections_do_not_mutate() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let u = Field::from_fn(g, |x| x).unwrap();
        let copy = u.clone();
        let cfg = SolverConfig::new(0.1, FluxModel::Euclidean, PotentialSpec::QuarticDoubleWell, 1.0);
        assert!(step(&u, 100.0, &cfg).is_err());
        let mut tight = cfg.clone();
        tight.newton_max_iter = 1;
        let r = step(&u, 1.0, &tight);
        assert!(matches!(r, Err(Error::StepRejected { .. })));
        assert_eq!(u, copy);
    }

    fn exp1_datum(model: FluxModel) -> Field {
        let q = PotentialSpec::QuarticDoubleWell;
        let p = LayerPattern::new(-4.0, 4.0, vec![-3.4, -2.0, -0.5, 0.8, 2.2, 3.2], 1).unwrap();
        let t = ProfileTable::build(&q, model, 0.1, DEFAULT_ETA, 4001).unwrap();
        build_layer_datum(&p, &t, Grid1D::new(-4.0, 4.0, 1600).unwrap()).unwrap()
    }

    #[test]
    fn one_step_from_layer_datum_lowers_energy() {
        let q = PotentialSpec::QuarticDoubleWell;
        let u0 = exp1_datum(FluxModel::Euclidean);
        let cfg = SolverConfig::new(0.1, FluxModel::Euclidean, q.clone(), 1.0);
        let e0 = crate::energy::energy(&u0, &q, FluxModel::Euclidean, 0.1).unwrap().total;
        for dt in [1e-3, 0.1, 10.0] {
            let (u1, _) = step(&u0, dt, &cfg).unwrap();
            let e1 = crate::energy::energy(&u1, &q, FluxModel::Euclidean, 0.1).unwrap().total;
            assert!(e1 <= e0, "dt={dt}");
        }
    }

    #[test]
    fn constant_run_reaches_dt_max() {
        let g = Grid1D::new(-1.0, 1.0, 20).unwrap();
        let mut cfg = SolverConfig::new(0.1, FluxModel::Minkowski, PotentialSpec::QuarticDoubleWell, 500.0);
        cfg.snapshot_times = vec![0.0, 100.0];
        let rec = evolve(&Field::constant(g, 1.0), &cfg, None, &mut []).unwrap();
        assert!(rec.completed);
        assert!(rec.final_field.values.iter().all(|&v| v == 1.0));
        assert!(rec.series.iter().all(|r| r.energy == 0.0 && r.n_layers == 0));
        let last = rec.series.last().unwrap();
        assert_eq!(last.t, 500.0);
        assert!(rec.series.iter().any(|r| r.dt == cfg.dt_max));
        assert_eq!(rec.snapshots.len(), 2);
        assert!(apriori_gradient_check(&rec, 0.1));
    }

    #[test]
    fn short_run_audits() {
        let q = PotentialSpec::QuarticDoubleWell;
        let u0 = exp1_datum(FluxModel::Minkowski);
        let mut cfg = SolverConfig::new(0.1, FluxModel::Minkowski, q, 200.0);
        cfg.snapshot_times = vec![50.0, 100.0];
        let mut seen = 0usize;
        let mut obs = |_: &Observation<'_>| seen += 1;
        let rec = evolve(&u0, &cfg, None, &mut [&mut obs]).unwrap();
        assert_eq!(seen, rec.series.len());
        assert!(rec.audit.energy_monotone(1e-10));
        assert!(rec.audit.max_dissipation_ratio <= 10.0, "{:?}", rec.audit);
        assert!(rec.audit.min_value >= -1.0 - 1e-8 && rec.audit.max_value <= 1.0 + 1e-8);
        assert!(rec.audit.max_scaled_gradient <= 1.0 - cfg.grad_margin);
        assert_eq!(rec.final_layers(), 6);
        assert!(rec.snapshot_at(50.0).is_some() && rec.snapshot_at(100.0).is_some());
        assert!(apriori_gradient_check(&rec, 0.1));
    }

    #[test]
    fn minkowski_rejects_jump_datum() {
        let g = Grid1D::new(-1.0, 1.0, 2000).unwrap();
        let u0 = Field::from_fn(g, |x| if x.abs() < 0.05 { -0.1 } else { 0.1 }).unwrap();
        let cfg = SolverConfig::new(0.1, FluxModel::Minkowski, PotentialSpec::QuarticDoubleWell, 1.0);
        let err = evolve(&u0, &cfg, None, &mut []).unwrap_err();
        assert!(matches!(err.error, Error::Domain { .. }));
    }

    #[test]
    fn dt_underflow_aborts_with_partial_record() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let u0 = Field::from_fn(g, |x| x).unwrap();
        let mut cfg = SolverConfig::new(0.1, FluxModel::Euclidean, PotentialSpec::QuarticDoubleWell, 1.0);
        cfg.newton_max_iter = 1;
        cfg.dt_min = 1e-6;
        let err = evolve(&u0, &cfg, None, &mut []).unwrap_err();
        assert!(matches!(err.error, Error::DtUnderflow { .. }));
        assert!(!err.record.completed);
        assert_eq!(err.record.series.len(), 1);
    }

    #[test]
    fn synthetic_gradient_violation_detected() {
        let g = Grid1D::new(-1.0, 1.0, 200).unwrap();
        let q = PotentialSpec::QuarticDoubleWell;
        let eps = 0.1;
        let cfg = SolverConfig::new(eps, FluxModel::Minkowski, q.clone(), 1.0);
        let u0 = Field::from_fn(g, |x| 0.5 * (PI * x).sin()).unwrap();
        let e0 = crate::energy::energy(&u0, &q, FluxModel::Minkowski, eps).unwrap().total;
        let bound = 2.0 * e0 * 1.01 / eps;
        // sawtooth with ‖u_x‖² ≈ 10 × bound
        let slope = (10.0 * bound / 2.0).sqrt();
        let period = 0.2;
        let saw = Field::from_fn(g, |x| {
            let s = (x + 1.0).rem_euclid(period) / period;
            slope * period * (if s < 0.5 { s } else { 1.0 - s })
        })
        .unwrap();
        let rec = RunRecord {
            config: cfg,
            pattern: None,
            u0: u0.clone(),
            series: vec![],
            snapshots: vec![u0.clone(), saw.clone()],
            checkpoints: vec![],
            audit: StepAudit::new(&u0, eps),
            final_field: saw,
            completed: true,
            stopped_early: false,
        };
        assert!(!apriori_gradient_check(&rec, eps));
    }
}
