use std::io::Write;
use std::path::Path;

use rlp_core::simulator::MartingaleCheck;
use rlp_core::{ExtendedReal, Interval, McEstimate, SaddleCertificate, SaddleVerdict, Solution};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Validate,
    Solve,
    Saddle,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The computation ran but a certificate or oracle check failed.
    CertifiedFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::CertifiedFailure => 2,
        }
    }
}

/// The command line as resolved against the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEcho {
    pub command: Command,
    pub model: String,
    pub pi: Option<Vec<f64>>,
    pub paths: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub run_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Validate {
        n_vertices: usize,
        kappa: f64,
        compact: bool,
        /// Bounding box of `C ∩ C⁰`.
        feasible_box: Vec<Interval>,
        feasible_halfspaces: usize,
    },
    Solve {
        solution: Solution,
        value: f64,
    },
    Saddle {
        certificate: SaddleCertificate,
        verdict: Option<SaddleVerdict>,
        value: f64,
    },
    Simulate {
        pi: Vec<f64>,
        /// Vertex attaining `inf_θ g^θ(π)`, the model simulated.
        vertex: usize,
        estimate: McEstimate,
        closed_form: ExtendedReal,
        agrees: bool,
    },
    Verify {
        certificate: SaddleCertificate,
        verdict: Option<SaddleVerdict>,
        value: f64,
        estimate: McEstimate,
        closed_form: ExtendedReal,
        martingale: Option<MartingaleCheck>,
        checks: Vec<OracleCheck>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: CommandEcho,
    /// SHA-256 of the canonical model.
    pub digest: String,
    pub status: Status,
    pub results: Results,
    /// Approximation steps that affect the results.
    pub provenance: Vec<String>,
    pub timings: Timings,
}

struct Row {
    quantity: String,
    value: String,
    stderr: String,
}

fn row(quantity: impl Into<String>, value: impl ToString) -> Row {
    Row {
        quantity: quantity.into(),
        value: value.to_string(),
        stderr: String::new(),
    }
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn closed(x: ExtendedReal) -> String {
    match x {
        ExtendedReal::Finite(v) => num(v),
        ExtendedReal::NegInfinity => "-inf".into(),
    }
}

fn estimate_row(quantity: &str, e: &McEstimate) -> Row {
    Row {
        quantity: quantity.into(),
        value: closed(e.mean),
        stderr: num(e.stderr),
    }
}

fn vector_rows(rows: &mut Vec<Row>, name: &str, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        rows.push(row(format!("{name}[{i}]"), num(*x)));
    }
}

fn certificate_rows(rows: &mut Vec<Row>, c: &SaddleCertificate) {
    vector_rows(rows, "y_hat", &c.y_hat);
    vector_rows(rows, "theta_hat_weights", &c.theta_hat_weights);
    rows.push(row("robust_g", num(c.value)));
    rows.push(row("residual_max_y", num(c.residual_max_y)));
    rows.push(row("residual_min_theta", num(c.residual_min_theta)));
    rows.push(row("gap", num(c.gap)));
}

fn csv_rows(report: &Report) -> Vec<Row> {
    let mut rows = Vec::new();
    match &report.results {
        Results::Validate {
            n_vertices,
            kappa,
            compact,
            feasible_box,
            feasible_halfspaces,
        } => {
            rows.push(row("n_vertices", n_vertices));
            rows.push(row("kappa", num(*kappa)));
            rows.push(row("compact", u8::from(*compact)));
            rows.push(row("feasible_halfspaces", feasible_halfspaces));
            for (i, iv) in feasible_box.iter().enumerate() {
                rows.push(row(format!("feasible_lo[{i}]"), num(iv.lo)));
                rows.push(row(format!("feasible_hi[{i}]"), num(iv.hi)));
            }
        }
        Results::Solve { solution, value } => {
            vector_rows(&mut rows, "y_hat", &solution.y_hat);
            rows.push(row("robust_g", num(solution.robust_g)));
            rows.push(row("value", num(*value)));
        }
        Results::Saddle {
            certificate,
            verdict,
            value,
        } => {
            certificate_rows(&mut rows, certificate);
            rows.push(row("value", num(*value)));
            if let Some(v) = verdict {
                rows.push(row("verified", u8::from(v.pass)));
            }
        }
        Results::Simulate {
            pi,
            vertex,
            estimate,
            closed_form,
            agrees,
        } => {
            vector_rows(&mut rows, "pi", pi);
            rows.push(row("vertex", vertex));
            rows.push(estimate_row("mc_expected_utility", estimate));
            rows.push(row("closed_form", closed(*closed_form)));
            rows.push(row("agrees", u8::from(*agrees)));
        }
        Results::Verify {
            certificate,
            value,
            estimate,
            closed_form,
            martingale,
            checks,
            ..
        } => {
            certificate_rows(&mut rows, certificate);
            rows.push(row("value", num(*value)));
            rows.push(estimate_row("mc_expected_utility", estimate));
            rows.push(row("closed_form", closed(*closed_form)));
            if let Some(m) = martingale {
                rows.push(estimate_row("martingale_mean", &m.estimate));
            }
            for c in checks {
                rows.push(row(format!("check:{}", c.name), u8::from(c.pass)));
            }
        }
    }
    rows
}

pub fn render(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["quantity", "value", "stderr"])
                .expect("in-memory write");
            for r in csv_rows(report) {
                w.write_record([&r.quantity, &r.value, &r.stderr])
                    .expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}

/// Writes the rendered report to `out`, or to stdout when `out` is `None`.
pub fn emit_report(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(report, format);
    match out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            }),
    }
}
