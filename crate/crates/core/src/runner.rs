//! Scenario execution: output files, reports, exit codes and parameter
//! sweeps.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{self, CollapseEvent, SlowMotionCertificate};
use crate::energy::{self, LayerCertificate, LowerBound, TransitionCosts};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::grid::Field;
use crate::potentials::ValidationReport;
use crate::scenario::{InitialDatum, PatternConfig, PotentialConfig, Prepared, Scenario};
use crate::solver::{self, Observer, RunRecord, SeriesRow, StepAudit};

pub const REPORT_SCHEMA: &str = "layerflow.report/1";
pub const SWEEP_SCHEMA: &str = "layerflow.sweep/1";
/// Replaces the output directory of `run` (and the root of `sweep`).
pub const OUTPUT_DIR_ENV: &str = "LAYERFLOW_OUTPUT_DIR";

/// Relative tolerance of the per-step energy monotonicity check.
pub const ENERGY_MONOTONE_TOL: f64 = 1e-10;
/// Bound on `|dissipation residual| / dt²`.
pub const DISSIPATION_TOL: f64 = 10.0;
/// Margin in `C = 2 𝓔[u₀](1 + margin)` of the a-priori gradient check.
pub const APRIORI_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    SolverAbort = 2,
    PartialSweep = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub tolerance: f64,
    pub worst: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriVerdict {
    pub passed: bool,
    /// `C ε⁻¹` with `C = 2 𝓔[u₀](1 + margin)`.
    pub bound: f64,
    pub max_gradient_l2_sq: f64,
    pub snapshots_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    pub n_layers: usize,
    pub energy: f64,
    pub l1_to_pattern: f64,
    pub hausdorff_to_pattern: Option<f64>,
    pub lower_bound: LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub initial_layer_structure: LayerCertificate,
    pub initial_lower_bound: LowerBound,
    pub snapshots: Vec<SnapshotDiagnostics>,
    pub slow_motion: SlowMotionCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    StoppedEarly,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub scenario: Scenario,
    pub status: RunStatus,
    /// Outputs cover only part of the requested horizon.
    pub partial: bool,
    pub error: Option<String>,
    pub t_final: f64,
    pub potential_validation: ValidationReport,
    pub transition_costs: Option<TransitionCosts>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub initial_layers: usize,
    pub final_layers: usize,
    pub audit: StepAudit,
    pub energy_monotone: Verdict,
    pub dissipation_identity: Verdict,
    pub apriori_gradient: Option<AprioriVerdict>,
    pub certificates: Option<Certificates>,
    pub collapse_events: Vec<CollapseEvent>,
    pub snapshot_files: Vec<String>,
}

/// Everything a run produced; files are already on disk when this is
/// returned.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub output_dir: PathBuf,
    pub message: Option<String>,
    pub report: Option<RunReport>,
    pub record: Option<RunRecord>,
}

/// `$LAYERFLOW_OUTPUT_DIR`, else the scenario's `output_dir`, else
/// `out/<name>`.
pub fn output_dir_for(scenario: &Scenario) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    scenario
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name))
}

pub fn run_scenario(scenario: &Scenario) -> RunOutcome {
    run_scenario_in(scenario, &output_dir_for(scenario), &mut [])
}

fn validation_failure(dir: &Path, e: Error) -> RunOutcome {
    RunOutcome {
        status: ExitStatus::Validation,
        output_dir: dir.to_path_buf(),
        message: Some(e.to_string()),
        report: None,
        record: None,
    }
}

/// Validate, integrate, post-process and write all outputs into `dir`.
pub fn run_scenario_in(scenario: &Scenario, dir: &Path, observers: &mut [&mut dyn Observer]) -> RunOutcome {
    let prepared = match scenario.prepare() {
        Ok(p) => p,
        Err(e) => return validation_failure(dir, e),
    };
    let resolved = match scenario.resolved() {
        Ok(r) => r,
        Err(e) => return validation_failure(dir, e),
    };
    let (record, error) = match solver::evolve(&prepared.u0, &prepared.config, prepared.pattern.as_ref(), observers) {
        Ok(r) => (r, None),
        Err(abort) => (abort.record, Some(abort.error)),
    };
    let report = build_report(&prepared, &resolved, &record, error.as_ref());
    let (status, mut message) = match &error {
        None => (ExitStatus::Success, None),
        Some(e) => (
            ExitStatus::SolverAbort,
            Some(format!("solver aborted at t = {}: {e}", record.final_field.time)),
        ),
    };
    if let Err(e) = write_outputs(dir, &record, &report) {
        let note = format!("writing outputs to {}: {e}", dir.display());
        message = Some(match message {
            Some(m) => format!("{m}; {note}"),
            None => note,
        });
        return RunOutcome {
            status: ExitStatus::Validation,
            output_dir: dir.to_path_buf(),
            message,
            report: Some(report),
            record: Some(record),
        };
    }
    RunOutcome {
        status,
        output_dir: dir.to_path_buf(),
        message,
        report: Some(report),
        record: Some(record),
    }
}

fn build_report(p: &Prepared, resolved: &Scenario, record: &RunRecord, error: Option<&Error>) -> RunReport {
    let s = &p.scenario;
    let eps = s.eps;
    let e_total = |f: &Field| {
        energy::energy(f, &p.potential, s.model, eps)
            .map(|r| r.total)
            .unwrap_or(f64::NAN)
    };
    let audit = record.audit;
    let energy_monotone = Verdict {
        passed: audit.accepted_steps == 0 || audit.energy_monotone(ENERGY_MONOTONE_TOL),
        tolerance: ENERGY_MONOTONE_TOL,
        worst: audit.max_relative_energy_increase,
    };
    let dissipation_identity = Verdict {
        passed: audit.max_dissipation_ratio <= DISSIPATION_TOL,
        tolerance: DISSIPATION_TOL,
        worst: audit.max_dissipation_ratio,
    };
    let apriori_gradient = (s.model == FluxModel::Minkowski).then(|| {
        let e0 = e_total(&record.u0);
        AprioriVerdict {
            passed: solver::apriori_gradient_check_with_margin(record, eps, APRIORI_MARGIN),
            bound: 2.0 * e0 * (1.0 + APRIORI_MARGIN) / eps,
            max_gradient_l2_sq: record
                .snapshots
                .iter()
                .map(|f| f.gradient_l2_sq())
                .fold(0.0, f64::max),
            snapshots_checked: record.snapshots.len(),
        }
    });
    let d = &resolved.diagnostics;
    let certificates = match (&p.pattern, s.diagnostics.certificates) {
        (Some(pattern), true) => {
            let a = d.rate.unwrap_or(0.0);
            let c = d.constant;
            let delta = d.closeness.unwrap_or(0.1 * pattern.r);
            let initial = energy::layer_structure_certificate(&record.u0, pattern, &p.potential, s.model, eps, a, c);
            let lb0 = energy::lower_bound_check(&record.u0, pattern, &p.potential, s.model, eps, a, c, delta);
            let delta1 = d.delta1.unwrap_or(pattern.r);
            let sm = diagnostics::slow_motion_certificate(
                record,
                delta1,
                &d.level_set,
                d.slow_motion_rate.unwrap_or(a),
            );
            match (initial, lb0, sm) {
                (Ok(initial), Ok(lb0), Ok(sm)) => {
                    let pi = diagnostics::pattern_interface(pattern);
                    let snapshots = record
                        .snapshots
                        .iter()
                        .filter_map(|f| {
                            let lb =
                                energy::lower_bound_check(f, pattern, &p.potential, s.model, eps, a, c, delta).ok()?;
                            let i = diagnostics::interface(f, &diagnostics::LevelSet::zero()).ok()?;
                            Some(SnapshotDiagnostics {
                                t: f.time,
                                n_layers: i.len(),
                                energy: e_total(f),
                                l1_to_pattern: diagnostics::l1_distance_to_pattern(f, pattern),
                                hausdorff_to_pattern: diagnostics::hausdorff(&i, &pi),
                                lower_bound: lb,
                            })
                        })
                        .collect();
                    Some(Certificates {
                        initial_layer_structure: initial,
                        initial_lower_bound: lb0,
                        snapshots,
                        slow_motion: sm,
                    })
                }
                _ => None,
            }
        }
        _ => None,
    };
    let collapse_events = if s.diagnostics.collapse_detection {
        diagnostics::detect_collapses(record).unwrap_or_default()
    } else {
        Vec::new()
    };
    let status = if error.is_some() {
        RunStatus::Aborted
    } else if record.stopped_early {
        RunStatus::StoppedEarly
    } else {
        RunStatus::Completed
    };
    RunReport {
        schema: REPORT_SCHEMA,
        scenario: resolved.clone(),
        status,
        partial: status != RunStatus::Completed,
        error: error.map(|e| e.to_string()),
        t_final: record.final_field.time,
        potential_validation: p.potential.validate(),
        transition_costs: energy::transition_costs(&p.potential, eps).ok(),
        initial_energy: record.series.first().map(|r| r.energy).unwrap_or(f64::NAN),
        final_energy: e_total(&record.final_field),
        initial_layers: record.initial_layers(),
        final_layers: diagnostics::interface(&record.final_field, &diagnostics::LevelSet::zero())
            .map(|i| i.len())
            .unwrap_or(0),
        audit,
        energy_monotone,
        dissipation_identity,
        apriori_gradient,
        certificates,
        collapse_events,
        snapshot_files: record.snapshots.iter().map(snapshot_name).collect(),
    }
}

pub fn snapshot_name(f: &Field) -> String {
    format!("t_{}.csv", f.time)
}

pub const SERIES_HEADER: &str =
    "t,dt,energy,energy_gradient_part,energy_potential_part,dissipation_residual,l1_to_v,n_layers,interfaces,ut_l2_sq";

/// One CSV line per row; floats in shortest round-trip form.
pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        let interfaces: Vec<String> = r.interfaces.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.dt,
            r.energy,
            r.energy_gradient,
            r.energy_potential,
            r.dissipation_residual,
            r.l1_to_v,
            r.n_layers,
            interfaces.join(";"),
            r.ut_l2_sq
        );
    }
    out
}

pub fn snapshot_csv(f: &Field) -> String {
    let mut out = String::from("x,u\n");
    for (i, u) in f.values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", f.grid.x(i), u);
    }
    out
}

fn write_file(path: &Path, content: &str) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(content.as_bytes())?;
    w.flush()
}

fn write_outputs(dir: &Path, record: &RunRecord, report: &RunReport) -> io::Result<()> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    if report.scenario.diagnostics.energy_series {
        write_file(&dir.join("series.csv"), &series_csv(&record.series))?;
    }
    for f in &record.snapshots {
        write_file(&snap_dir.join(snapshot_name(f)), &snapshot_csv(f))?;
    }
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    write_file(&dir.join("report.json"), &json)
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Eps,
    /// Degeneracy `n` of `(u² − 1)^{2n}/(4n)`.
    N,
    /// Distance between the two jumps of a two-layer datum.
    Separation,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(Self::Eps),
            "n" => Ok(Self::N),
            "separation" => Ok(Self::Separation),
            other => Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (expected eps, n or separation)"
            ))),
        }
    }
}

impl SweepParam {
    fn label(self) -> &'static str {
        match self {
            Self::Eps => "eps",
            Self::N => "n",
            Self::Separation => "separation",
        }
    }

    /// Abscissa of the exponential law `log t ≈ slope · x + c`.
    fn exponential_x(self, v: f64) -> f64 {
        match self {
            Self::Eps => 1.0 / v,
            _ => v,
        }
    }
}

/// Copy of `base` with the parameter set to `value`.
pub fn apply_param(base: &Scenario, param: SweepParam, value: f64) -> Result<Scenario> {
    let mut s = base.clone();
    s.name = format!("{}-{}={}", base.name, param.label(), value);
    match param {
        SweepParam::Eps => s.eps = value,
        SweepParam::N => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config(format!("degeneracy n must be a positive integer, got {value}")));
            }
            s.potential = PotentialConfig::Named(format!("degenerate:n={}", value as u32));
        }
        SweepParam::Separation => {
            let InitialDatum::Layers { jumps, .. } = &mut s.initial else {
                return Err(Error::Config("separation sweeps need a layer datum".into()));
            };
            if jumps.len() != 2 {
                return Err(Error::Config(format!(
                    "separation sweeps need exactly two layers, got {}",
                    jumps.len()
                )));
            }
            let centre = 0.5 * (jumps[0] + jumps[1]);
            *jumps = vec![centre - 0.5 * value, centre + 0.5 * value];
            if let Some(p) = &mut s.pattern {
                *p = PatternConfig {
                    jumps: jumps.clone(),
                    first_sign: p.first_sign,
                    radius: None,
                };
            }
            if let InitialDatum::Layers { radius, .. } = &mut s.initial {
                *radius = None;
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub exit_code: i32,
    pub collapse_time: Option<f64>,
    pub first_event: Option<CollapseEvent>,
    pub error: Option<String>,
    pub output_dir: PathBuf,
}

/// Least-squares line through `(x, ln t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in `ln t`.
    pub rms_residual: f64,
    pub n_points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(Fit {
        slope,
        intercept,
        rms_residual: (ss / nf).sqrt(),
        n_points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema: &'static str,
    pub base: Scenario,
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// `ln t` against `1/ε` (eps sweeps) or the value itself.
    pub exponential_fit: Option<Fit>,
    /// `ln t` against `ln(value)`.
    pub algebraic_fit: Option<Fit>,
    pub failures: usize,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub status: ExitStatus,
    pub report: SweepReport,
    pub output_dir: PathBuf,
}

/// Run one scenario per value in parallel under `dir/<param>=<value>/` and
/// fit the first collapse times.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64], dir: &Path) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let points: Vec<SweepPoint> = values
        .par_iter()
        .map(|&v| {
            let sub = dir.join(format!("{}={}", param.label(), v));
            let scenario = match apply_param(base, param, v) {
                Ok(s) => s,
                Err(e) => {
                    return SweepPoint {
                        value: v,
                        exit_code: ExitStatus::Validation.code(),
                        collapse_time: None,
                        first_event: None,
                        error: Some(e.to_string()),
                        output_dir: sub,
                    }
                }
            };
            let outcome = run_scenario_in(&scenario, &sub, &mut []);
            let first = outcome
                .report
                .as_ref()
                .and_then(|r| r.collapse_events.first().cloned());
            SweepPoint {
                value: v,
                exit_code: outcome.status.code(),
                collapse_time: first.as_ref().map(|e| e.t_event),
                first_event: first,
                error: outcome.message,
                output_dir: sub,
            }
        })
        .collect();
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.collapse_time.is_some()).collect();
    let ys: Vec<f64> = ok.iter().map(|p| p.collapse_time.unwrap().ln()).collect();
    let xe: Vec<f64> = ok.iter().map(|p| param.exponential_x(p.value)).collect();
    let xa: Vec<f64> = ok.iter().map(|p| p.value.ln()).collect();
    let failures = points.iter().filter(|p| p.exit_code != 0).count();
    let report = SweepReport {
        schema: SWEEP_SCHEMA,
        base: base.clone(),
        parameter: param,
        values: values.to_vec(),
        exponential_fit: fit_line(&xe, &ys),
        algebraic_fit: fit_line(&xa, &ys),
        points,
        failures,
    };
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("creating {}: {e}", dir.display())))?;
    let json = serde_json::to_string_pretty(&report).expect("sweep report serializes");
    write_file(&dir.join("sweep.json"), &json).map_err(|e| Error::Config(format!("writing sweep.json: {e}")))?;
    Ok(SweepOutcome {
        status: if failures > 0 {
            ExitStatus::PartialSweep
        } else {
            ExitStatus::Success
        },
        report,
        output_dir: dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, template};

    fn small() -> Scenario {
        let mut s = template();
        s.t_end = 50.0;
        s.snapshot_times = vec![0.0, 10.0, 50.0];
        s
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario_in(&small(), dir.path(), &mut []);
        assert_eq!(out.status, ExitStatus::Success, "{:?}", out.message);
        let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let mut lines = series.lines();
        assert_eq!(lines.next().unwrap(), SERIES_HEADER);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[7], "2");
        for t in ["0", "10", "50"] {
            let snap = fs::read_to_string(dir.path().join("snapshots").join(format!("t_{t}.csv"))).unwrap();
            assert!(snap.starts_with("x,u\n"));
            assert_eq!(snap.lines().count(), 1 + 1201);
        }
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema"], REPORT_SCHEMA);
        assert_eq!(report["status"], "completed");
        assert_eq!(report["energy_monotone"]["passed"], true);
        assert!(report["apriori_gradient"].is_null());
        assert!(report["scenario"]["solver"]["dt_max"].is_number());
        assert!(report["certificates"]["initial_layer_structure"]["passed"].is_boolean());
        let echoed: Scenario = serde_json::from_value(report["scenario"].clone()).unwrap();
        echoed.validate().unwrap();
    }

    #[test]
    fn series_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_scenario_in(&small(), a.path(), &mut []);
        run_scenario_in(&small(), b.path(), &mut []);
        let sa = fs::read(a.path().join("series.csv")).unwrap();
        let sb = fs::read(b.path().join("series.csv")).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn validation_and_abort_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = small();
        bad.eps = -1.0;
        assert_eq!(run_scenario_in(&bad, dir.path(), &mut []).status, ExitStatus::Validation);

        let mut abort = small();
        abort.solver.newton_max_iter = Some(1);
        abort.solver.dt_min = Some(1e-5);
        abort.solver.dt_init = Some(1.0);
        let out = run_scenario_in(&abort, dir.path(), &mut []);
        assert_eq!(out.status, ExitStatus::SolverAbort);
        let report = out.report.unwrap();
        assert_eq!(report.status, RunStatus::Aborted);
        assert!(report.partial);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("series.csv").exists());
    }

    #[test]
    fn minkowski_report_has_apriori_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = builtin("exp1-minkowski").unwrap();
        s.t_end = 100.0;
        s.snapshot_times = vec![0.0, 100.0];
        let out = run_scenario_in(&s, dir.path(), &mut []);
        assert_eq!(out.status, ExitStatus::Success);
        let r = out.report.unwrap();
        let v = r.apriori_gradient.unwrap();
        assert!(v.passed && v.snapshots_checked == 2);
        assert!(r.energy_monotone.passed && r.dissipation_identity.passed);
    }

    #[test]
    fn apply_param_variants() {
        let t = template();
        let s = apply_param(&t, SweepParam::Separation, 1.5).unwrap();
        let InitialDatum::Layers { jumps, .. } = &s.initial else { panic!() };
        assert_eq!(jumps, &vec![-0.75, 0.75]);
        let s = apply_param(&t, SweepParam::N, 3.0).unwrap();
        assert_eq!(s.potential, PotentialConfig::Named("degenerate:n=3".into()));
        assert!(apply_param(&t, SweepParam::N, 2.5).is_err());
        assert_eq!(apply_param(&t, SweepParam::Eps, 0.2).unwrap().eps, 0.2);
        assert!(apply_param(&builtin("exp2-minkowski").unwrap(), SweepParam::Separation, 1.0).is_err());
        assert!("foo".parse::<SweepParam>().is_err());
    }

    #[test]
    fn sweep_with_one_value_matches_single_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = small();
        s.initial = InitialDatum::Layers {
            jumps: vec![-0.2, 0.2],
            first_sign: 1,
            radius: None,
            profile_potential: None,
            eta: crate::profiles::DEFAULT_ETA,
            n_knots: 2001,
        };
        s.t_end = 2000.0;
        s.snapshot_times = vec![];
        let out = sweep(&s, SweepParam::Eps, &[0.1], dir.path()).unwrap();
        assert_eq!(out.status, ExitStatus::Success);
        let single = run_scenario_in(&apply_param(&s, SweepParam::Eps, 0.1).unwrap(), &dir.path().join("single"), &mut []);
        let t_single = single.report.unwrap().collapse_events[0].t_event;
        assert_eq!(out.report.points[0].collapse_time, Some(t_single));
        assert!(out.report.exponential_fit.is_none());
        let a = fs::read(dir.path().join("eps=0.1").join("series.csv")).unwrap();
        let b = fs::read(dir.path().join("single").join("series.csv")).unwrap();
        assert_eq!(a, b);
        assert!(dir.path().join("sweep.json").exists());
    }
}
