//! Model files: JSON documents naming the problem data by its usual symbols
//! (`d`, `utility`, `T`, `x0`, `C`, `Theta`). See `docs/schema.md`.

use std::path::Path;

use nalgebra::DMatrix;
use rlp_core::{
    compile_box_to_vertices, discretize_density, effective_domain, validate, Atom, BoxAtom,
    Halfspace, Interval, JumpMeasure, LevyTriplet, ParameterBox, Polyhedron, SolveOptions,
    UncertaintySet, UtilitySpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub d: usize,
    pub utility: UtilitySpec,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(rename = "C", default)]
    pub constraint: ConstraintFile,
    #[serde(rename = "Theta")]
    pub theta: ThetaFile,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub simulation: SimulationFile,
}

fn one() -> f64 {
    1.0
}

/// A bound of `null` is infinite.
pub type Bound = [Option<f64>; 2];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<Bound>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub halfspaces: Vec<HalfspaceFile>,
}

/// `aᵀy ≤ offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceFile {
    pub a: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<VertexFile>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub parameter_box: Option<BoxFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpFile {
    pub rate: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexFile {
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<JumpFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<DensityFile>,
}

/// A one-dimensional jump intensity, discretized by the midpoint rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityFile {
    pub density: Density,
    pub support: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Density {
    /// `value` on the support.
    Constant { value: f64 },
    /// `scale · exp(-decay · |z|)`.
    Exponential { scale: f64, decay: f64 },
    /// `scale · exp(-(z - mean)² / (2 sd²))`.
    Gaussian { scale: f64, mean: f64, sd: f64 },
}

impl Density {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Exponential { scale, decay } => scale * (-decay * z.abs()).exp(),
            Density::Gaussian { scale, mean, sd } => {
                scale * (-(z - mean).powi(2) / (2.0 * sd * sd)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub b: Vec<[f64; 2]>,
    pub c_base: Vec<Vec<f64>>,
    pub c_scale: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<BoxJumpFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxJumpFile {
    pub z: Vec<f64>,
    pub rate: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

fn default_paths() -> usize {
    DEFAULT_PATHS
}

impl Default for SimulationFile {
    fn default() -> Self {
        Self {
            n_paths: DEFAULT_PATHS,
            seed: 0,
            pi: None,
        }
    }
}

/// A validated problem ready for the commands.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ModelFile,
    pub utility: UtilitySpec,
    pub horizon: f64,
    pub x0: f64,
    pub theta: UncertaintySet,
    pub constraint: Polyhedron,
    /// `C ∩ C⁰`.
    pub feasible: Polyhedron,
    pub kappa: f64,
    pub digest: String,
    pub provenance: Vec<String>,
}

pub fn load_model(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<Problem, CliError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => CliError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Data => CliError::Schema(e.to_string()),
        }
    })?;
    compile(file)
}

/// SHA-256 of the canonical JSON of the parsed model, with defaults filled
/// in, so formatting and key order in the source file do not matter.
pub fn digest(file: &ModelFile) -> String {
    let canonical = serde_json::to_vec(file).expect("model serializes");
    Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn matrix(rows: &[Vec<f64>], d: usize, field: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(schema(format!("{field} must be a {d}x{d} matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn check_len(v: &[f64], d: usize, field: &str) -> Result<(), CliError> {
    if v.len() != d {
        return Err(schema(format!(
            "{field} has length {}, expected d = {d}",
            v.len()
        )));
    }
    Ok(())
}

fn interval(pair: [f64; 2], field: &str) -> Result<Interval, CliError> {
    if !(pair[0] <= pair[1]) {
        return Err(schema(format!(
            "{field} = [{}, {}] is not an interval",
            pair[0], pair[1]
        )));
    }
    Ok(Interval::new(pair[0], pair[1]))
}

fn vertex(
    v: &VertexFile,
    d: usize,
    k: usize,
    provenance: &mut Vec<String>,
) -> Result<LevyTriplet, CliError> {
    let field = |name: &str| format!("Theta.vertices[{k}].{name}");
    check_len(&v.b, d, &field("b"))?;
    let c = matrix(&v.c, d, &field("c"))?;
    let mut atoms = Vec::with_capacity(v.jumps.len());
    for (j, jump) in v.jumps.iter().enumerate() {
        check_len(&jump.z, d, &field(&format!("jumps[{j}].z")))?;
        atoms.push(Atom::new(jump.rate, jump.z.clone()));
    }
    let mut measure = JumpMeasure::new(atoms);
    for (j, dens) in v.densities.iter().enumerate() {
        if d != 1 {
            return Err(schema(format!(
                "{} requires d = 1",
                field(&format!("densities[{j}]"))
            )));
        }
        let support = interval(dens.support, &field(&format!("densities[{j}].support")))?;
        let density = dens.density;
        let discrete = discretize_density(|z| density.eval(z), support, dens.grid_points)?;
        provenance.push(format!(
            "density discretized: vertex {k} density {j} on [{}, {}] with {} midpoints",
            support.lo, support.hi, dens.grid_points
        ));
        measure = measure.union(discrete);
    }
    Ok(LevyTriplet::new(v.b.clone(), c, measure)?)
}

fn compile(file: ModelFile) -> Result<Problem, CliError> {
    let d = file.d;
    if d == 0 {
        return Err(schema("d must be at least 1"));
    }
    file.utility.validate()?;
    if !(file.horizon.is_finite() && file.horizon > 0.0) {
        return Err(schema(format!("T = {} must be positive", file.horizon)));
    }
    if !(file.x0.is_finite() && file.x0 > 0.0) {
        return Err(schema(format!("x0 = {} must be positive", file.x0)));
    }
    file.solver.validate()?;
    if let Some(pi) = &file.simulation.pi {
        check_len(pi, d, "simulation.pi")?;
    }

    let mut provenance = Vec::new();
    let mut vertices = Vec::new();
    for (k, v) in file.theta.vertices.iter().enumerate() {
        vertices.push(vertex(v, d, k, &mut provenance)?);
    }
    if let Some(bx) = &file.theta.parameter_box {
        if bx.b.len() != d {
            return Err(schema(format!(
                "Theta.box.b has length {}, expected d = {d}",
                bx.b.len()
            )));
        }
        let drift =
            bx.b.iter()
                .enumerate()
                .map(|(i, p)| interval(*p, &format!("Theta.box.b[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
        let mut atoms = Vec::new();
        for (j, jump) in bx.jumps.iter().enumerate() {
            check_len(&jump.z, d, &format!("Theta.box.jumps[{j}].z"))?;
            atoms.push(BoxAtom {
                location: jump.z.clone(),
                rate: interval(jump.rate, &format!("Theta.box.jumps[{j}].rate"))?,
            });
        }
        let compiled = compile_box_to_vertices(&ParameterBox {
            drift,
            diffusion_base: matrix(&bx.c_base, d, "Theta.box.c_base")?,
            diffusion_scale: interval(bx.c_scale, "Theta.box.c_scale")?,
            atoms,
        })?;
        vertices.extend(compiled.vertices().iter().cloned());
    }
    if vertices.is_empty() {
        return Err(schema("Theta needs at least one vertex or a box"));
    }

    let mut constraint = Polyhedron::whole_space(d);
    if let Some(bounds) = &file.constraint.bounds {
        if bounds.len() != d {
            return Err(schema(format!(
                "C.box has length {}, expected d = {d}",
                bounds.len()
            )));
        }
        let ivs: Vec<Interval> = bounds
            .iter()
            .map(|[lo, hi]| {
                Interval::new(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
            })
            .collect();
        constraint = Polyhedron::from_box(&ivs);
    }
    let mut halfspaces = Vec::new();
    for (i, h) in file.constraint.halfspaces.iter().enumerate() {
        check_len(&h.a, d, &format!("C.halfspaces[{i}].a"))?;
        halfspaces.push(Halfspace::new(h.a.clone(), h.offset));
    }
    constraint = constraint.intersect(&Polyhedron::new(d, halfspaces)?)?;

    let raw = UncertaintySet::new(vertices)?;
    let report = validate(&raw, &constraint, &file.utility);
    if !report.messages.is_empty() {
        return Err(CliError::Model(report.messages.join("; ")));
    }
    // Re-check each vertex so tiny negative eigenvalues are clamped.
    let theta = UncertaintySet::new(
        raw.vertices()
            .iter()
            .map(|v| {
                LevyTriplet::checked(v.drift().to_vec(), v.diffusion().clone(), v.jumps().clone())
            })
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let (feasible, _) = effective_domain(&constraint, &theta)?;

    Ok(Problem {
        digest: digest(&file),
        utility: file.utility,
        horizon: file.horizon,
        x0: file.x0,
        kappa: report.kappa,
        theta,
        constraint,
        feasible,
        provenance,
        file,
    })
}
