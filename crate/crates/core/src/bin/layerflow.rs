use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use layerflow::runner::{self, ExitStatus, SweepParam};
use layerflow::scenario::{self, Scenario};
use layerflow::solver::Observation;

#[derive(Parser)]
#[command(name = "layerflow", version, about = "Metastable transition layers for curvature-type reaction-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config or a built-in.
    Run {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        builtin: Option<String>,
        /// Suppress progress lines on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in scenarios and print a template config.
    List,
    /// Run one scenario per parameter value and fit the collapse times.
    Sweep {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        builtin: Option<String>,
        /// eps, n or separation
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn load(config: Option<PathBuf>, builtin: Option<String>) -> anyhow::Result<Scenario> {
    match (config, builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        (None, Some(name)) => Ok(scenario::builtin(&name)?),
        _ => bail!("give either a config path or --builtin <name>"),
    }
}

fn exit(status: ExitStatus) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn run(scenario: Scenario, quiet: bool) -> ExitCode {
    let dir = runner::output_dir_for(&scenario);
    let mut progress = |o: &Observation<'_>| {
        if o.is_snapshot {
            eprintln!("t = {:<12} layers = {:<3} energy = {}", o.row.t, o.row.n_layers, o.row.energy);
        }
    };
    let mut observers: Vec<&mut dyn layerflow::solver::Observer> = Vec::new();
    if !quiet {
        observers.push(&mut progress);
    }
    let out = runner::run_scenario_in(&scenario, &dir, &mut observers);
    if let Some(m) = &out.message {
        eprintln!("error: {m}");
    }
    if let Some(r) = &out.report {
        for e in &r.collapse_events {
            println!(
                "collapse at t = {:.6e}: {} -> {} layers, vanished ({:.4}, {:.4})",
                e.t_event, e.layers_before, e.layers_after, e.vanished_pair.0, e.vanished_pair.1
            );
        }
        println!(
            "{}: t = {}, layers {} -> {}, energy monotone: {}, outputs in {}",
            scenario.name,
            r.t_final,
            r.initial_layers,
            r.final_layers,
            r.energy_monotone.passed,
            out.output_dir.display()
        );
    }
    exit(out.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit(ExitStatus::Validation) } else { exit(ExitStatus::Success) };
        }
    };
    match cli.command {
        Command::Run { config, builtin, quiet } => match load(config, builtin) {
            Ok(s) => run(s, quiet),
            Err(e) => {
                eprintln!("error: {e:#}");
                exit(ExitStatus::Validation)
            }
        },
        Command::List => {
            for (name, summary) in scenario::builtin_summaries() {
                println!("{name:<20} {summary}");
            }
            println!();
            println!("template config:");
            println!("{}", scenario::template().to_json());
            exit(ExitStatus::Success)
        }
        Command::Sweep {
            config,
            builtin,
            param,
            values,
        } => {
            let setup = load(config, builtin).and_then(|s| Ok((s, param.parse::<SweepParam>()?)));
            let (base, param) = match setup {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return exit(ExitStatus::Validation);
                }
            };
            let dir = std::env::var_os(runner::OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out").join(format!("{}-sweep", base.name)));
            match runner::sweep(&base, param, &values, &dir) {
                Ok(out) => {
                    for p in &out.report.points {
                        match p.collapse_time {
                            Some(t) => println!("value {:<10} first collapse at t = {t:.6e}", p.value),
                            None => println!(
                                "value {:<10} no collapse ({})",
                                p.value,
                                p.error.as_deref().unwrap_or("horizon reached")
                            ),
                        }
                    }
                    for (label, fit) in [
                        ("exponential", &out.report.exponential_fit),
                        ("algebraic", &out.report.algebraic_fit),
                    ] {
                        if let Some(f) = fit {
                            println!("{label} fit: slope {:.4}, rms residual {:.4e}", f.slope, f.rms_residual);
                        }
                    }
                    println!("sweep report in {}", out.output_dir.join("sweep.json").display());
                    exit(out.status)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(ExitStatus::Validation)
                }
            }
        }
    }
}
