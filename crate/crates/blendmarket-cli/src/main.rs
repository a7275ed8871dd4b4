//! Command-line front end: solve a market scenario, audit a stored result,
//! render report tables, or sweep the carbon incentive over a grid.
//!
//! Exit codes are a stable contract: 0 optimal and verified, 2 verification
//! failure, 3 solver failure, 4 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use blendmarket::io::{self, ResultBundle};
use blendmarket::scaling;
use blendmarket::{clear_market, nlp, solver, verify, ClearError};

const EXIT_VERIFICATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "blendmarket")]
#[command(about = "Clears gas/hydrogen blend pipeline markets and prices the result")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario and write a result bundle.
    Solve {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// KKT tolerance in scaled units.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Bundle output path (defaults to result.json in the output dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Re-audit the KKT and economic conditions of a stored bundle.
    Verify {
        #[arg(long)]
        bundle: PathBuf,
        /// Audit tolerance in scaled units.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Render the report tables of a stored bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Solve once per grid point of a swept parameter.
    Sweep {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Swept parameter; `co2-incentive` scales the incentive of every
        /// consumer.
        #[arg(long, default_value = "co2-incentive")]
        sweep_param: String,
        /// Comma-separated grid values.
        #[arg(long)]
        sweep_grid: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// CSV output path (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir() -> PathBuf {
    std::env::var_os("BLENDMARKET_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(args: Args) -> Result<ExitCode> {
    match args.command {
        Command::Solve {
            network,
            scenario,
            tol,
            max_iter,
            out,
            format,
        } => {
            let net = io::load_network(&network)?;
            let scen = io::load_scenario(&scenario, &net)?;
            let opts = solver::SolveOptions {
                kkt_tolerance: tol,
                max_iterations: max_iter,
                ..Default::default()
            };
            let outcome = match clear_market(&net, &scen, &opts) {
                Ok(o) => o,
                Err(ClearError::NotOptimal {
                    status,
                    residual,
                    solution,
                }) => {
                    eprintln!(
                        "solver stopped: {status:?}, KKT residual {residual:.3e} after {} iterations",
                        solution.iterations
                    );
                    for (i, r) in solution.residual_history.iter().enumerate().rev().take(5) {
                        eprintln!("  iter {i}: residual {r:.3e}");
                    }
                    return Ok(ExitCode::from(EXIT_SOLVER));
                }
                Err(e) => return Err(anyhow!(e.to_string())),
            };
            let kkt = verify::verify_solution(
                &nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario)
                    .map_err(|e| anyhow!(e.to_string()))?,
                &outcome.scaled_solution,
                1e-6,
            );
            let verified = kkt.pass();
            let bundle = ResultBundle {
                schema: io::BUNDLE_SCHEMA.to_string(),
                network: io::NetworkDoc::from_network(&net),
                scenario: io::ScenarioDoc::from_scenario(&net, &scen),
                tolerance: tol,
                solution: outcome.solution.clone(),
                report: outcome.report.clone(),
                kkt: Some(kkt.clone()),
            };
            let out_path = out.unwrap_or_else(|| output_dir().join("result.json"));
            write_out(&out_path, &bundle.to_json())?;
            match format {
                Format::Table => print!("{}", io::render_table(&outcome.report)),
                Format::Csv => print!("{}", io::render_csv(&outcome.report)),
                Format::Json => println!("{}", bundle.to_json()),
            }
            eprintln!("bundle written to {}", out_path.display());
            if !verified {
                for c in kkt.conditions.iter().filter(|c| !c.pass) {
                    eprintln!(
                        "audit failed: {} residual {:.3e}{}",
                        c.condition,
                        c.max_residual,
                        c.worst
                            .as_deref()
                            .map(|w| format!(" at {w}"))
                            .unwrap_or_default()
                    );
                }
                return Ok(ExitCode::from(EXIT_VERIFICATION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { bundle, tol } => {
            let bundle = ResultBundle::load(&bundle)?;
            let (net, scen) = bundle.rebuild()?;
            let basis = scaling::ScalingBasis::from_network(&net, &scen.constants)
                .map_err(|e| anyhow!(e.to_string()))?;
            let scaled = scaling::nondimensionalize(&net, &scen, &basis);
            let scaled_sol = scaling::nondimensionalize_solution(&bundle.solution, &scaled);
            let problem = nlp::assemble(&scaled.network, &scaled.scenario)
                .map_err(|e| anyhow!(e.to_string()))?;
            let report = verify::verify_solution(&problem, &scaled_sol, tol);
            for c in &report.conditions {
                println!(
                    "{}: {} (max residual {:.3e}{})",
                    c.condition,
                    if c.pass { "pass" } else { "FAIL" },
                    c.max_residual,
                    c.worst
                        .as_deref()
                        .map(|w| format!(", worst at {w}"))
                        .unwrap_or_default()
                );
            }
            if report.pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_VERIFICATION))
            }
        }
        Command::Report { bundle, format } => {
            let bundle = ResultBundle::load(&bundle)?;
            match format {
                Format::Table => print!("{}", io::render_table(&bundle.report)),
                Format::Csv => print!("{}", io::render_csv(&bundle.report)),
                Format::Json => println!("{}", bundle.to_json()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            network,
            scenario,
            sweep_param,
            sweep_grid,
            tol,
            max_iter,
            out,
        } => {
            if sweep_param != "co2-incentive" {
                return Err(anyhow!(
                    "unsupported sweep parameter `{sweep_param}` (supported: co2-incentive)"
                ));
            }
            let net = io::load_network(&network)?;
            let scen = io::load_scenario(&scenario, &net)?;
            let grid: Vec<f64> = sweep_grid
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad grid value `{v}`: {e}")))
                .collect::<Result<_>>()?;
            if grid.is_empty() {
                return Err(anyhow!("empty sweep grid"));
            }
            let opts = solver::SolveOptions {
                kkt_tolerance: tol,
                max_iterations: max_iter,
                ..Default::default()
            };
            let mut csv = String::from(
                "co2_incentive_usd_per_kg,j_ev_usd_per_s,j_cem_usd_per_s,total_co2_kgco2_per_s,total_ng_kg_per_s,total_h2_kg_per_s,d_ptc_usd_per_s\n",
            );
            for &value in &grid {
                let mut point = scen.clone();
                for c in point.co2_incentive.iter_mut() {
                    *c = value;
                }
                let outcome = match clear_market(&net, &point, &opts) {
                    Ok(o) => o,
                    Err(ClearError::NotOptimal { status, residual, .. }) => {
                        eprintln!(
                            "sweep point {value}: solver stopped {status:?} (residual {residual:.3e})"
                        );
                        return Ok(ExitCode::from(EXIT_SOLVER));
                    }
                    Err(e) => return Err(anyhow!(e.to_string())),
                };
                let r = &outcome.report;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    value,
                    r.objective.economic_value,
                    r.objective.emission_incentives,
                    r.total_co2,
                    r.total_ng_delivered,
                    r.total_h2_delivered,
                    r.d_ptc
                ));
            }
            match out {
                Some(path) => write_out(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
