//! The `rlp` command line: load a model file, run one command, emit a report.
//!
//! Exit status is 0 on success, 2 when a certificate or oracle check fails,
//! and 1 on any operational error.

// `!(a <= b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use rlp_core::{
    closed_form_expected_utility, eval_g_robust, find_saddle, martingale_unit_expectation_check,
    maximize_robust, mc_expected_utility, verify_saddle, Error, SaddleCertificate, UtilitySpec,
};

pub use error::CliError;
pub use model::{load_model, parse_model, Problem};
pub use report::{
    emit_report, render, Command, CommandEcho, Format, Report, Results, Status, Timings,
};

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "rlp",
    version,
    about = "Robust constant-proportion portfolios under Lévy-triplet uncertainty"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Portfolio to simulate, as comma-separated floats.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pi: Option<Vec<f64>>,
    /// Monte Carlo paths (overrides the model file).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Seed for the simulator and the optimizer restarts (overrides the model file).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance for saddle verification.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

/// Flags that shape a run, resolved against the model file.
#[derive(Debug, Clone, PartialEq)]
pub struct Flags {
    pub pi: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub tol: f64,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            pi: None,
            paths: None,
            seed: None,
            tol: DEFAULT_TOL,
        }
    }
}

fn certified_saddle(
    problem: &Problem,
    opts: &rlp_core::SolveOptions,
    provenance: &mut Vec<String>,
) -> Result<(SaddleCertificate, bool), CliError> {
    match find_saddle(&problem.theta, &problem.feasible, &problem.utility, opts) {
        Ok(c) => Ok((c, true)),
        Err(Error::SaddleNotCertified {
            residual,
            threshold,
            best,
        }) => {
            provenance.push(format!(
                "uncertified saddle: max residual {residual:e} exceeds {threshold:e}"
            ));
            Ok((*best, false))
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs `command` on a loaded problem.
pub fn run_command(
    command: Command,
    problem: &Problem,
    flags: &Flags,
    model: &str,
) -> Result<Report, CliError> {
    let start = Instant::now();
    if !(flags.tol.is_finite() && flags.tol > 0.0) {
        return Err(CliError::Usage(format!(
            "--tol {} must be positive",
            flags.tol
        )));
    }
    let mut opts = problem.file.solver.clone();
    let seed = flags.seed.unwrap_or(problem.file.simulation.seed);
    if let Some(s) = flags.seed {
        opts.seed = s;
    }
    let paths = flags.paths.unwrap_or(problem.file.simulation.n_paths);
    if paths == 0 && matches!(command, Command::Simulate | Command::Verify) {
        return Err(CliError::Usage("--paths must be positive".into()));
    }
    let pi = flags
        .pi
        .clone()
        .or_else(|| problem.file.simulation.pi.clone());
    if let Some(pi) = &pi {
        if pi.len() != problem.theta.dim() {
            return Err(CliError::Usage(format!(
                "--pi has {} entries, expected d = {}",
                pi.len(),
                problem.theta.dim()
            )));
        }
    }
    let mut provenance = problem.provenance.clone();
    let (u, x0, horizon) = (problem.utility, problem.x0, problem.horizon);
    let mut status = Status::Ok;

    let results = match command {
        Command::Validate => {
            let bb = problem.feasible.bounding_box()?.ok_or(Error::NotCompact)?;
            Results::Validate {
                n_vertices: problem.theta.len(),
                kappa: problem.kappa,
                compact: true,
                feasible_box: bb,
                feasible_halfspaces: problem.feasible.halfspaces().len(),
            }
        }
        Command::Solve => {
            let solution = maximize_robust(&problem.theta, &problem.feasible, &u, &opts)?;
            let value = solution.problem_value(&u, x0, horizon);
            Results::Solve { solution, value }
        }
        Command::Saddle => {
            let (certificate, certified) = certified_saddle(problem, &opts, &mut provenance)?;
            let verdict = if certified {
                let v = verify_saddle(
                    &problem.theta,
                    &problem.feasible,
                    &u,
                    &certificate,
                    flags.tol,
                    &opts,
                )?;
                if !v.pass {
                    provenance.push("saddle failed independent verification".into());
                }
                Some(v)
            } else {
                None
            };
            if !verdict.as_ref().is_some_and(|v| v.pass) {
                status = Status::CertifiedFailure;
            }
            let value = rlp_core::problem_value(certificate.value, &u, x0, horizon);
            Results::Saddle {
                certificate,
                verdict,
                value,
            }
        }
        Command::Simulate => {
            let pi = match pi {
                Some(pi) => pi,
                None => maximize_robust(&problem.theta, &problem.feasible, &u, &opts)?.y_hat,
            };
            let (_, vertex) = eval_g_robust(&problem.theta, &pi, &u)?;
            let triplet = &problem.theta.vertices()[vertex];
            let estimate = mc_expected_utility(triplet, &pi, &u, x0, horizon, paths, seed)?;
            let closed_form = closed_form_expected_utility(triplet, &pi, &u, x0, horizon)?;
            let agrees = estimate.agrees_with(closed_form);
            Results::Simulate {
                pi,
                vertex,
                estimate,
                closed_form,
                agrees,
            }
        }
        Command::Verify => {
            let (certificate, certified) = certified_saddle(problem, &opts, &mut provenance)?;
            let verdict = if certified {
                Some(verify_saddle(
                    &problem.theta,
                    &problem.feasible,
                    &u,
                    &certificate,
                    flags.tol,
                    &opts,
                )?)
            } else {
                None
            };
            let mixture = problem.theta.mixture(&certificate.theta_hat_weights)?;
            let y = &certificate.y_hat;
            let estimate = mc_expected_utility(&mixture, y, &u, x0, horizon, paths, seed)?;
            let closed_form = closed_form_expected_utility(&mixture, y, &u, x0, horizon)?;
            let martingale = match u {
                UtilitySpec::Log => None,
                UtilitySpec::Power { .. } => Some(martingale_unit_expectation_check(
                    &mixture, y, &u, horizon, paths, seed,
                )?),
            };
            let mut checks = vec![
                report::OracleCheck {
                    name: "saddle_certificate".into(),
                    pass: verdict.as_ref().is_some_and(|v| v.pass),
                },
                report::OracleCheck {
                    name: "mc_vs_closed_form".into(),
                    pass: estimate.agrees_with(closed_form),
                },
            ];
            if let Some(m) = &martingale {
                checks.push(report::OracleCheck {
                    name: "unit_expectation_martingale".into(),
                    pass: m.pass,
                });
            }
            if checks.iter().any(|c| !c.pass) {
                status = Status::CertifiedFailure;
            }
            let value = rlp_core::problem_value(certificate.value, &u, x0, horizon);
            Results::Verify {
                certificate,
                verdict,
                value,
                estimate,
                closed_form,
                martingale,
                checks,
            }
        }
    };

    Ok(Report {
        command: CommandEcho {
            command,
            model: model.to_string(),
            pi: flags.pi.clone(),
            paths,
            seed,
            tol: flags.tol,
        },
        digest: problem.digest.clone(),
        status,
        results,
        provenance,
        timings: Timings {
            load_seconds: 0.0,
            run_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Sizes the global rayon pool from `RLP_THREADS` when it is set.
pub fn configure_threads(value: Option<OsString>) -> Result<(), CliError> {
    let Some(raw) = value else { return Ok(()) };
    let text = raw.to_string_lossy();
    let n: usize =
        text.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::Usage(format!("RLP_THREADS={text} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn execute(args: &Args) -> Result<Report, CliError> {
    let start = Instant::now();
    let problem = load_model(&args.model)?;
    let load_seconds = start.elapsed().as_secs_f64();
    let flags = Flags {
        pi: args.pi.clone(),
        paths: args.paths,
        seed: args.seed,
        tol: args.tol,
    };
    let mut report = run_command(
        args.command,
        &problem,
        &flags,
        &args.model.display().to_string(),
    )?;
    report.timings.load_seconds = load_seconds;
    emit_report(&report, args.format, args.out.as_deref())?;
    Ok(report)
}

/// Parses `argv`, runs, and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(std::env::var_os("RLP_THREADS")) {
        eprintln!("rlp: error [{}]: {e}", e.code());
        return 1;
    }
    match execute(&args) {
        Ok(report) => report.status.exit_code(),
        Err(e) => {
            eprintln!("rlp: error [{}]: {e}", e.code());
            1
        }
    }
}
