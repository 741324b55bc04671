//! Scenario configuration: JSON schema, built-in experiments and the
//! construction of initial data.

use std::path::PathBuf;

use exmex::{Differentiate, Express};
use serde::{Deserialize, Serialize};

use crate::diagnostics::LevelSet;
use crate::energy::default_rate;
use crate::error::{Error, Result};
use crate::flux::{FluxModel, DEFAULT_GRAD_MARGIN};
use crate::grid::{Field, Grid1D};
use crate::potentials::PotentialSpec;
use crate::profiles::{build_layer_datum, LayerPattern, ProfileTable, DEFAULT_ETA, DEFAULT_N_KNOTS};
use crate::solver::{default_dt_max, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Potential by registry name (`quartic`, `degenerate:n=2`) or by
/// expressions in `u`. Missing derivatives are obtained symbolically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    Named(String),
    Custom { custom: CustomExprs },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomExprs {
    #[serde(default = "custom_name")]
    pub name: String,
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d3f: Option<String>,
}

fn custom_name() -> String {
    "custom".into()
}

type Expr = exmex::FlatEx<f64>;

/// Parse an expression in at most one variable named `var`; `pi` is
/// accepted as an alias of `PI`.
fn parse_expr(text: &str, var: &str) -> Result<Expr> {
    let normalized = replace_word(text, "pi", "PI");
    let expr = exmex::parse::<f64>(&normalized).map_err(|e| Error::Config(format!("cannot parse '{text}': {e}")))?;
    match expr.var_names() {
        [] => {}
        [v] if v == var => {}
        other => {
            return Err(Error::Config(format!(
                "expression '{text}' may only use the variable '{var}', found {other:?}"
            )))
        }
    }
    Ok(expr)
}

fn replace_word(text: &str, word: &str, with: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let w: Vec<char> = word.chars().collect();
    let ident = |c: char| c.is_alphanumeric() || c == '_';
    let mut i = 0;
    while i < chars.len() {
        let at_word = chars[i..].starts_with(&w)
            && (i == 0 || !ident(chars[i - 1]))
            && chars.get(i + w.len()).is_none_or(|&c| !ident(c));
        if at_word {
            out.push_str(with);
            i += w.len();
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn eval_expr(expr: &Expr, x: f64) -> f64 {
    let r = if expr.var_names().is_empty() {
        expr.eval(&[])
    } else {
        expr.eval(&[x])
    };
    r.unwrap_or(f64::NAN)
}

fn derivative(expr: &Expr) -> Result<Expr> {
    if expr.var_names().is_empty() {
        return parse_expr("0", "u");
    }
    expr.clone()
        .partial(0)
        .map_err(|e| Error::Config(format!("cannot differentiate '{expr}': {e}")))
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        match self {
            Self::Named(name) => PotentialSpec::from_name(name).map_err(|e| Error::Config(e.to_string())),
            Self::Custom { custom } => {
                let f = parse_expr(&custom.f, "u")?;
                let next = |given: &Option<String>, prev: &Expr| match given {
                    Some(t) => parse_expr(t, "u"),
                    None => derivative(prev),
                };
                let df = next(&custom.df, &f)?;
                let d2f = next(&custom.d2f, &df)?;
                let d3f = next(&custom.d3f, &d2f)?;
                Ok(PotentialSpec::custom(
                    &custom.name,
                    move |u| eval_expr(&f, u),
                    move |u| eval_expr(&df, u),
                    move |u| eval_expr(&d2f, u),
                    move |u| eval_expr(&d3f, u),
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub jumps: Vec<f64>,
    /// Sign of `v` left of the first jump.
    pub first_sign: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl PatternConfig {
    pub fn build(&self, a: f64, b: f64) -> Result<LayerPattern> {
        match self.radius {
            Some(r) => LayerPattern::with_radius(a, b, self.jumps.clone(), self.first_sign, r),
            None => LayerPattern::new(a, b, self.jumps.clone(), self.first_sign),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// Copies of the standing-wave profile glued at the jumps.
    Layers {
        jumps: Vec<f64>,
        first_sign: i8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        /// Potential whose profile is glued; defaults to the scenario's.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile_potential: Option<PotentialConfig>,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_n_knots")]
        n_knots: usize,
    },
    /// Expression in `x`.
    Formula { expr: String },
    /// `values[k]` between `breaks[k-1]` and `breaks[k]`; nodes on a break
    /// take `at_breaks` (default: mean of the neighbouring values).
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at_breaks: Option<f64>,
    },
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_n_knots() -> usize {
    DEFAULT_N_KNOTS
}

/// Solver knobs; unset entries take the model-dependent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub local_error_tol: Option<f64>,
    pub observer_stride: Option<usize>,
    pub grad_margin: Option<f64>,
    pub growth_factor: Option<f64>,
    pub growth_after: Option<usize>,
    pub stop_below_layers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSettings {
    #[serde(default = "yes")]
    pub energy_series: bool,
    #[serde(default = "yes")]
    pub collapse_detection: bool,
    #[serde(default = "yes")]
    pub certificates: bool,
    /// `A` in `C exp(−A/ε)`; default `0.9 r √(2λ)`.
    #[serde(default)]
    pub rate: Option<f64>,
    /// `C` in `C exp(−A/ε)`.
    #[serde(default = "one")]
    pub constant: f64,
    /// `δ` for the lower-bound hypothesis; default `0.1 r`.
    #[serde(default)]
    pub closeness: Option<f64>,
    /// `δ₁` for the slow-motion certificate; default `r`.
    #[serde(default)]
    pub delta1: Option<f64>,
    /// `A` for the slow-motion certificate; default `rate`.
    #[serde(default)]
    pub slow_motion_rate: Option<f64>,
    #[serde(default)]
    pub level_set: LevelSet,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            energy_series: true,
            collapse_detection: true,
            certificates: true,
            rate: None,
            constant: 1.0,
            closeness: None,
            delta1: None,
            slow_motion_rate: None,
            level_set: LevelSet::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub domain: [f64; 2],
    pub n_cells: usize,
    pub eps: f64,
    pub model: FluxModel,
    pub potential: PotentialConfig,
    pub initial: InitialDatum,
    /// Reference step function `v`; defaults to the layer datum's pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternConfig>,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Everything needed to run a scenario, built and checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub grid: Grid1D,
    pub potential: PotentialSpec,
    pub pattern: Option<LayerPattern>,
    pub u0: Field,
    pub config: SolverConfig,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.domain[0], self.domain[1], self.n_cells).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pattern(&self) -> Result<Option<LayerPattern>> {
        let (a, b) = (self.domain[0], self.domain[1]);
        let cfg = match (&self.pattern, &self.initial) {
            (Some(p), _) => Some(p.clone()),
            (None, InitialDatum::Layers { jumps, first_sign, radius, .. }) => Some(PatternConfig {
                jumps: jumps.clone(),
                first_sign: *first_sign,
                radius: *radius,
            }),
            _ => None,
        };
        cfg.map(|p| p.build(a, b)).transpose().map_err(|e| Error::Config(format!("pattern: {e}")))
    }

    /// Solver settings with every default filled in.
    pub fn resolved_solver(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            dt_init: Some(s.dt_init.unwrap_or(1e-4)),
            dt_min: Some(s.dt_min.unwrap_or(1e-10)),
            dt_max: Some(s.dt_max.unwrap_or(default_dt_max(self.model))),
            newton_tol: Some(s.newton_tol.unwrap_or(1e-10)),
            newton_max_iter: Some(s.newton_max_iter.unwrap_or(25)),
            local_error_tol: Some(s.local_error_tol.unwrap_or(1e-5)),
            observer_stride: Some(s.observer_stride.unwrap_or(10)),
            grad_margin: Some(s.grad_margin.unwrap_or(DEFAULT_GRAD_MARGIN)),
            growth_factor: Some(s.growth_factor.unwrap_or(1.3)),
            growth_after: Some(s.growth_after.unwrap_or(5)),
            stop_below_layers: s.stop_below_layers,
        }
    }

    /// The scenario with all defaults written out, as echoed in reports.
    pub fn resolved(&self) -> Result<Self> {
        let mut s = self.clone();
        s.solver = self.resolved_solver();
        let pattern = self.pattern()?;
        if let (None, Some(p)) = (&s.pattern, &pattern) {
            s.pattern = Some(PatternConfig {
                jumps: p.jumps.clone(),
                first_sign: p.first_sign,
                radius: Some(p.r),
            });
        }
        if let InitialDatum::Layers {
            radius,
            profile_potential,
            ..
        } = &mut s.initial
        {
            if profile_potential.is_none() {
                *profile_potential = Some(self.potential.clone());
            }
            if radius.is_none() {
                *radius = pattern.as_ref().map(|p| p.r);
            }
        }
        let potential = self.potential.build()?;
        let d = &mut s.diagnostics;
        if let Some(p) = &pattern {
            let rate = *d.rate.get_or_insert(default_rate(p, &potential));
            d.closeness.get_or_insert(0.1 * p.r);
            d.delta1.get_or_insert(p.r);
            d.slow_motion_rate.get_or_insert(rate);
        }
        Ok(s)
    }

    pub fn solver_config(&self, potential: PotentialSpec) -> SolverConfig {
        let s = self.resolved_solver();
        let mut c = SolverConfig::new(self.eps, self.model, potential, self.t_end);
        c.dt_init = s.dt_init.unwrap();
        c.dt_min = s.dt_min.unwrap();
        c.dt_max = s.dt_max.unwrap();
        c.newton_tol = s.newton_tol.unwrap();
        c.newton_max_iter = s.newton_max_iter.unwrap();
        c.local_error_tol = s.local_error_tol.unwrap();
        c.observer_stride = s.observer_stride.unwrap();
        c.grad_margin = s.grad_margin.unwrap();
        c.growth_factor = s.growth_factor.unwrap();
        c.growth_after = s.growth_after.unwrap();
        c.stop_below_layers = s.stop_below_layers;
        c.snapshot_times = self.snapshot_times.clone();
        c
    }

    fn initial_field(&self, grid: Grid1D, potential: &PotentialSpec) -> Result<Field> {
        match &self.initial {
            InitialDatum::Layers {
                jumps,
                first_sign,
                radius,
                profile_potential,
                eta,
                n_knots,
            } => {
                let pattern = PatternConfig {
                    jumps: jumps.clone(),
                    first_sign: *first_sign,
                    radius: *radius,
                }
                .build(grid.a, grid.b)?;
                let pp = match profile_potential {
                    Some(p) => p.build()?,
                    None => potential.clone(),
                };
                let table = ProfileTable::build(&pp, self.model, self.eps, *eta, *n_knots)?;
                build_layer_datum(&pattern, &table, grid)
            }
            InitialDatum::Formula { expr } => {
                let e = parse_expr(expr, "x")?;
                Field::from_fn(grid, |x| eval_expr(&e, x))
            }
            InitialDatum::Piecewise {
                breaks,
                values,
                at_breaks,
            } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::Config(format!(
                        "piecewise datum needs {} values for {} breaks, got {}",
                        breaks.len() + 1,
                        breaks.len(),
                        values.len()
                    )));
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("piecewise breaks must be strictly increasing".into()));
                }
                let tol = 1e-9 * (grid.b - grid.a);
                Field::from_fn(grid, |x| {
                    if let Some(k) = breaks.iter().position(|&c| (x - c).abs() <= tol) {
                        return at_breaks.unwrap_or(0.5 * (values[k] + values[k + 1]));
                    }
                    values[breaks.iter().filter(|&&c| c < x).count()]
                })
            }
        }
    }

    /// Check everything that can be checked before integrating and build
    /// the run inputs.
    pub fn prepare(&self) -> Result<Prepared> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return cfg_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.name.trim().is_empty() {
            return cfg_err("scenario name is empty".into());
        }
        let grid = self.grid()?;
        let potential = self.potential.build()?;
        let report = potential.validate();
        if !report.passed() {
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            return cfg_err(format!("potential {} is not a double well: {failed:?} failed", potential.name()));
        }
        if self.snapshot_times.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return cfg_err("snapshot times must lie in [0, t_end]".into());
        }
        let config = self.solver_config(potential.clone());
        config.validate()?;
        let pattern = self.pattern()?;
        if self.model == FluxModel::Minkowski && matches!(self.initial, InitialDatum::Piecewise { .. }) {
            return cfg_err("Minkowski runs need a continuous initial datum; piecewise data have jumps".into());
        }
        let u0 = self.initial_field(grid, &potential).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(format!("initial datum: {other}")),
        })?;
        if self.model == FluxModel::Minkowski {
            let s = self.eps * self.eps * u0.max_abs_gradient();
            if !(s <= 1.0 - config.grad_margin) {
                return cfg_err(format!(
                    "initial datum violates the Minkowski gradient bound: eps^2 max|u_x| = {s}"
                ));
            }
        }
        self.diagnostics.level_set.validate()?;
        Ok(Prepared {
            scenario: self.clone(),
            grid,
            potential,
            pattern,
            u0,
            config,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }
}

const EXP1_JUMPS: [f64; 6] = [-3.4, -2.0, -0.5, 0.8, 2.2, 3.2];

fn base(name: &str, eps: f64, model: FluxModel, potential: &str, initial: InitialDatum, t_end: f64) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        domain: [-4.0, 4.0],
        n_cells: 1600,
        eps,
        model,
        potential: PotentialConfig::Named(potential.into()),
        initial,
        pattern: None,
        t_end,
        snapshot_times: Vec::new(),
        solver: SolverSettings::default(),
        diagnostics: DiagnosticsSettings::default(),
        output_dir: None,
    }
}

fn exp1_datum(profile_potential: Option<&str>) -> InitialDatum {
    InitialDatum::Layers {
        jumps: EXP1_JUMPS.to_vec(),
        first_sign: 1,
        radius: None,
        profile_potential: profile_potential.map(|p| PotentialConfig::Named(p.into())),
        eta: DEFAULT_ETA,
        n_knots: DEFAULT_N_KNOTS,
    }
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "exp1-euclidean",
    "exp1-minkowski",
    "exp2-euclidean",
    "exp2-minkowski",
    "exp3-euclidean-n2",
    "exp3-minkowski-n3",
];

/// One-line description per built-in, in catalogue order.
pub fn builtin_summaries() -> Vec<(&'static str, &'static str)> {
    vec![
        ("exp1-euclidean", "eps=0.1, quartic, 6 layers on [-4,4], saturating flux, t_end=1e6"),
        ("exp1-minkowski", "eps=0.1, quartic, 6 layers on [-4,4], Minkowski flux, t_end=6.3e6"),
        ("exp2-euclidean", "eps=0.01, quartic, discontinuous +-0.1 datum on [-1,1], t_end=3e5"),
        ("exp2-minkowski", "eps=0.1, quartic, (cos+sin)(pi x/2)/100 on [-4,4], t_end=1e5"),
        ("exp3-euclidean-n2", "eps=0.1, (u^2-1)^4/8, 6 layers, saturating flux, t_end=2000"),
        ("exp3-minkowski-n3", "eps=0.1, (u^2-1)^6/12, 6 layers, Minkowski flux, t_end=1200"),
    ]
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let mut s = match name {
        "exp1-euclidean" => {
            let mut s = base(name, 0.1, FluxModel::Euclidean, "quartic", exp1_datum(None), 1e6);
            s.snapshot_times = vec![0.0, 1e4, 2e4, 3e4, 1e5, 5e5, 1e6];
            s.diagnostics.delta1 = Some(0.5);
            s.diagnostics.slow_motion_rate = Some(0.9);
            s
        }
        "exp1-minkowski" => {
            let mut s = base(name, 0.1, FluxModel::Minkowski, "quartic", exp1_datum(None), 6.3e6);
            s.snapshot_times = vec![0.0, 2e4, 1e6 / 3.0, 1e6, 2.1e6, 6.3e6];
            s.solver.dt_max = Some(10.0);
            s.diagnostics.delta1 = Some(0.5);
            s.diagnostics.slow_motion_rate = Some(0.9);
            s
        }
        "exp2-euclidean" => {
            let datum = InitialDatum::Piecewise {
                breaks: vec![-0.05, 0.05],
                values: vec![0.1, -0.1, 0.1],
                at_breaks: Some(0.0),
            };
            let mut s = base(name, 0.01, FluxModel::Euclidean, "quartic", datum, 3e5);
            s.domain = [-1.0, 1.0];
            s.n_cells = 2000;
            s.pattern = Some(PatternConfig {
                jumps: vec![-0.05, 0.05],
                first_sign: 1,
                radius: None,
            });
            s.snapshot_times = vec![0.0, 6.0, 2e4, 8e4, 3e5];
            s
        }
        "exp2-minkowski" => {
            let datum = InitialDatum::Formula {
                expr: "(cos(pi*x/2) + sin(pi*x/2))/100".into(),
            };
            let mut s = base(name, 0.1, FluxModel::Minkowski, "quartic", datum, 1e5);
            s.pattern = Some(PatternConfig {
                jumps: vec![-2.5, -0.5, 1.5, 3.5],
                first_sign: 1,
                radius: None,
            });
            s.snapshot_times = vec![0.0, 1e2, 1e4, 1e5];
            s.solver.dt_max = Some(10.0);
            s
        }
        "exp3-euclidean-n2" => {
            let mut s = base(name, 0.1, FluxModel::Euclidean, "degenerate:n=2", exp1_datum(Some("quartic")), 2000.0);
            s.snapshot_times = vec![0.0, 450.0, 2000.0];
            s.diagnostics.delta1 = Some(0.5);
            s.diagnostics.slow_motion_rate = Some(0.9);
            s
        }
        "exp3-minkowski-n3" => {
            let mut s = base(name, 0.1, FluxModel::Minkowski, "degenerate:n=3", exp1_datum(Some("quartic")), 1200.0);
            s.snapshot_times = vec![0.0, 300.0, 1200.0];
            s.diagnostics.delta1 = Some(0.5);
            s.diagnostics.slow_motion_rate = Some(0.9);
            s
        }
        other => {
            return Err(Error::Config(format!(
                "unknown built-in '{other}'; available: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    s.output_dir = Some(PathBuf::from("out").join(name));
    Ok(s)
}

/// Annotated starting point for user configurations.
pub fn template() -> Scenario {
    let mut s = base(
        "my-scenario",
        0.1,
        FluxModel::Euclidean,
        "quartic",
        InitialDatum::Layers {
            jumps: vec![-1.0, 1.0],
            first_sign: 1,
            radius: None,
            profile_potential: None,
            eta: DEFAULT_ETA,
            n_knots: DEFAULT_N_KNOTS,
        },
        1e4,
    );
    s.domain = [-3.0, 3.0];
    s.n_cells = 1200;
    s.snapshot_times = vec![0.0, 1e3, 1e4];
    s.output_dir = Some(PathBuf::from("out/my-scenario"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap();
            let p = s.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(p.u0.values.len(), s.n_cells + 1);
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
        assert_eq!(builtin_summaries().len(), BUILTIN_NAMES.len());
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn template_round_trips() {
        let t = template();
        t.validate().unwrap();
        let back = Scenario::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        back.validate().unwrap();
        let r = t.resolved().unwrap();
        assert_eq!(Scenario::from_json(&r.to_json()).unwrap(), r);
        assert!(r.solver.dt_max.is_some() && r.diagnostics.rate.is_some());
    }

    #[test]
    fn exp2_datum_values() {
        let p = builtin("exp2-euclidean").unwrap().prepare().unwrap();
        let g = p.grid;
        let at = |x: f64| p.u0.values[((x - g.a) / g.h()).round() as usize];
        assert_eq!(at(-0.5), 0.1);
        assert_eq!(at(0.0), -0.1);
        assert_eq!(at(-0.05), 0.0);
        assert_eq!(at(0.05), 0.0);
    }

    #[test]
    fn exp2_minkowski_zeros() {
        let p = builtin("exp2-minkowski").unwrap().prepare().unwrap();
        let i = crate::diagnostics::interface(&p.u0, &LevelSet::zero()).unwrap();
        let expected = [-2.5, -0.5, 1.5, 3.5];
        assert_eq!(i.len(), 4);
        for (x, e) in i.positions.iter().zip(expected) {
            assert!((x - e).abs() < 1e-6, "{x} vs {e}");
        }
    }

    #[test]
    fn minkowski_rejects_jumps() {
        let mut s = builtin("exp2-euclidean").unwrap();
        s.model = FluxModel::Minkowski;
        let e = s.validate().unwrap_err();
        assert!(e.to_string().contains("continuous"), "{e}");
        let mut f = builtin("exp2-minkowski").unwrap();
        f.initial = InitialDatum::Formula {
            expr: "sin(200*x)".into(),
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn custom_potential_expressions() {
        let c = PotentialConfig::Custom {
            custom: CustomExprs {
                name: "quartic-expr".into(),
                f: "(u^2 - 1)^2/4".into(),
                df: None,
                d2f: None,
                d3f: None,
            },
        };
        let p = c.build().unwrap();
        let q = PotentialSpec::QuarticDoubleWell;
        for u in [-1.3, -0.4, 0.0, 0.7, 1.0] {
            for k in 0..4 {
                let (a, b) = (p.eval(u, k).unwrap(), q.eval(u, k).unwrap());
                assert!((a - b).abs() < 1e-12, "order {k} at {u}: {a} vs {b}");
            }
        }
        assert!(p.validate().passed());
        let bad = PotentialConfig::Custom {
            custom: CustomExprs {
                name: "bad".into(),
                f: "x^2".into(),
                df: None,
                d2f: None,
                d3f: None,
            },
        };
        assert!(bad.build().is_err());
        let single_well = PotentialConfig::Custom {
            custom: CustomExprs {
                name: "well".into(),
                f: "(u-1)^2".into(),
                df: None,
                d2f: None,
                d3f: None,
            },
        };
        let mut s = template();
        s.potential = single_well;
        assert!(s.validate().is_err());
    }

    #[test]
    fn config_errors() {
        let mut s = template();
        s.schema_version = 99;
        assert!(s.validate().is_err());
        let mut s = template();
        s.potential = PotentialConfig::Named("sextic".into());
        assert!(s.validate().is_err());
        let mut s = template();
        s.solver.dt_min = Some(1.0);
        assert!(s.validate().is_err());
        assert!(Scenario::from_json("{\"name\": 3}").is_err());
        let mut json: serde_json::Value = serde_json::to_value(template()).unwrap();
        json["unexpected"] = serde_json::json!(1);
        assert!(Scenario::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn pi_alias() {
        assert_eq!(replace_word("cos(pi*x)+pix+api", "pi", "PI"), "cos(PI*x)+pix+api");
        let e = parse_expr("sin(pi/2)", "x").unwrap();
        assert!((eval_expr(&e, 0.0) - 1.0).abs() < 1e-15);
    }
}
