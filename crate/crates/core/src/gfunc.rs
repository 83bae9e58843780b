//! The local objective
//!
//! ```text
//! g^(b,c,F)(y) = yᵀb + (p-1)/2 · yᵀcy + ∫ I_y(z) F(dz)
//! I_y(z) = log(1 + yᵀz) - yᵀh(z)                 (p = 0)
//!        = ((1 + yᵀz)^p - 1)/p - yᵀh(z)          (p ≠ 0)
//! ```
//!
//! with values in `[-∞, ∞)`, its robust envelope over an uncertainty set,
//! and its gradient and Hessian in `y`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::levy::{dot_truncated, truncate, LevyTriplet, UncertaintySet, UtilitySpec};
use crate::linalg::dot;

/// Distance to the singularity `yᵀz = -1` below which gradients are refused.
pub const SINGULARITY_GUARD: f64 = 1e-12;

/// A real number or `-∞`. `+∞` never arises for the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    NegInfinity,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::NegInfinity => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    /// Maps `f64::NEG_INFINITY` to `NegInfinity`; other values must be
    /// finite.
    pub fn from_f64(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            ExtendedReal::NegInfinity
        } else {
            debug_assert!(x.is_finite(), "{x} is not an extended real");
            ExtendedReal::Finite(x)
        }
    }

    /// `s · self` for `s ≥ 0`, with `0 · (-∞) = 0`.
    pub fn scale(self, s: f64) -> Self {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(s * x),
            ExtendedReal::NegInfinity if s == 0.0 => ExtendedReal::ZERO,
            ExtendedReal::NegInfinity => ExtendedReal::NegInfinity,
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::NegInfinity,
        }
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::NegInfinity) => Ordering::Greater,
            (ExtendedReal::NegInfinity, ExtendedReal::Finite(_)) => Ordering::Less,
            (ExtendedReal::NegInfinity, ExtendedReal::NegInfinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::NegInfinity => f.write_str("-inf"),
        }
    }
}

// JSON has no infinities: `-∞` travels as the string "-inf".
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => serializer.serialize_f64(*x),
            ExtendedReal::NegInfinity => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(x) => Ok(ExtendedReal::Finite(x)),
            Repr::Text(s) if s == "-inf" => Ok(ExtendedReal::NegInfinity),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"-inf\", got {s:?}"
            ))),
        }
    }
}

/// `g^θ(y)` split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GEvaluation {
    pub value: ExtendedReal,
    pub drift_term: f64,
    pub diffusion_term: f64,
    pub jump_term: ExtendedReal,
}

/// `I_y(z)` evaluated at `s = yᵀz` and `yᵀh(z)`.
fn integrand_at(s: f64, y_dot_h: f64, utility: &UtilitySpec) -> Result<ExtendedReal> {
    let p = utility.p();
    if s <= -1.0 {
        if p > 0.0 {
            if s < -1.0 {
                return Err(Error::OutsideDomain { s });
            }
            return Ok(ExtendedReal::Finite(-1.0 / p - y_dot_h));
        }
        return Ok(ExtendedReal::NegInfinity);
    }
    let log1p = s.ln_1p();
    let head = if p == 0.0 {
        log1p
    } else {
        (p * log1p).exp_m1() / p
    };
    Ok(ExtendedReal::Finite(head - y_dot_h))
}

/// `I_y(z)`.
pub fn integrand(y: &[f64], z: &[f64], utility: &UtilitySpec) -> Result<ExtendedReal> {
    integrand_at(dot(y, z), dot_truncated(y, z), utility)
}

fn check_dim(triplet: &LevyTriplet, y: &[f64]) -> Result<()> {
    if y.len() != triplet.dim() {
        return Err(Error::DimensionMismatch {
            expected: triplet.dim(),
            got: y.len(),
            context: "portfolio vector",
        });
    }
    Ok(())
}

/// `g^θ(y)` with its decomposition.
pub fn eval_g(triplet: &LevyTriplet, y: &[f64], utility: &UtilitySpec) -> Result<GEvaluation> {
    check_dim(triplet, y)?;
    let drift_term = dot(y, triplet.drift());
    let diffusion_term = 0.5 * (utility.p() - 1.0) * triplet.quadratic_form(y);
    let mut jump = 0.0;
    let mut singular = false;
    for atom in triplet.jumps().atoms() {
        match integrand(y, &atom.location, utility)? {
            ExtendedReal::Finite(v) => jump += atom.rate * v,
            ExtendedReal::NegInfinity => singular = true,
        }
    }
    let jump_term = if singular {
        ExtendedReal::NegInfinity
    } else {
        ExtendedReal::Finite(jump)
    };
    Ok(GEvaluation {
        value: ExtendedReal::Finite(drift_term + diffusion_term) + jump_term,
        drift_term,
        diffusion_term,
        jump_term,
    })
}

/// Shorthand for `eval_g(..).value`.
pub fn g_value(triplet: &LevyTriplet, y: &[f64], utility: &UtilitySpec) -> Result<ExtendedReal> {
    eval_g(triplet, y, utility).map(|e| e.value)
}

/// `inf_θ g^θ(y)` over the hull, attained at a vertex. Ties go to the lowest
/// index.
pub fn eval_g_robust(
    theta: &UncertaintySet,
    y: &[f64],
    utility: &UtilitySpec,
) -> Result<(ExtendedReal, usize)> {
    let mut best = (ExtendedReal::ZERO, usize::MAX);
    for (k, v) in theta.vertices().iter().enumerate() {
        let value = g_value(v, y, utility)?;
        if best.1 == usize::MAX || value < best.0 {
            best = (value, k);
        }
    }
    Ok(best)
}

/// All vertex values `g^{θₖ}(y)`.
pub fn vertex_values(
    theta: &UncertaintySet,
    y: &[f64],
    utility: &UtilitySpec,
) -> Result<Vec<ExtendedReal>> {
    theta
        .vertices()
        .iter()
        .map(|v| g_value(v, y, utility))
        .collect()
}

/// `Σ wₖ g^{θₖ}(y)`, equal to `g^{θ(w)}(y)` by linearity in the triplet.
pub fn eval_g_mixture(
    theta: &UncertaintySet,
    weights: &[f64],
    y: &[f64],
    utility: &UtilitySpec,
) -> Result<ExtendedReal> {
    let mut acc = ExtendedReal::ZERO;
    for (v, &w) in theta.vertices().iter().zip(weights) {
        if w > 0.0 {
            acc = acc + g_value(v, y, utility)?.scale(w);
        }
    }
    Ok(acc)
}

/// `(1 + s)^{p-1}`, read as `1/(1 + s)` for the logarithm.
fn marginal(s: f64, p: f64) -> f64 {
    ((p - 1.0) * s.ln_1p()).exp()
}

fn jump_shift(triplet: &LevyTriplet, y: &[f64]) -> Result<()> {
    for atom in triplet.jumps().atoms() {
        let s = dot(y, &atom.location);
        if s <= -1.0 + SINGULARITY_GUARD {
            return Err(Error::AtSingularity { s });
        }
    }
    Ok(())
}

/// Gradient `b + (p-1)cy + Σ rate·[z(1 + yᵀz)^{p-1} - h(z)]` of the smooth
/// objective at `y`.
pub fn supergradient(triplet: &LevyTriplet, y: &[f64], utility: &UtilitySpec) -> Result<Vec<f64>> {
    check_dim(triplet, y)?;
    jump_shift(triplet, y)?;
    let p = utility.p();
    let d = triplet.dim();
    let c = triplet.diffusion();
    let mut grad = triplet.drift().to_vec();
    for i in 0..d {
        let mut cy = 0.0;
        for j in 0..d {
            cy += c[(i, j)] * y[j];
        }
        grad[i] += (p - 1.0) * cy;
    }
    for atom in triplet.jumps().atoms() {
        let z = &atom.location;
        let m = marginal(dot(y, z), p);
        let h = truncate(z);
        for i in 0..d {
            grad[i] += atom.rate * (z[i] * m - h[i]);
        }
    }
    Ok(grad)
}

/// Hessian `(p-1)c + Σ rate·(p-1)(1 + yᵀz)^{p-2} zzᵀ`; negative
/// semidefinite.
pub fn hessian(triplet: &LevyTriplet, y: &[f64], utility: &UtilitySpec) -> Result<DMatrix<f64>> {
    check_dim(triplet, y)?;
    jump_shift(triplet, y)?;
    let p = utility.p();
    let mut h = triplet.diffusion() * (p - 1.0);
    for atom in triplet.jumps().atoms() {
        let z = nalgebra::DVector::from_column_slice(&atom.location);
        let s = dot(y, &atom.location);
        let w = atom.rate * (p - 1.0) * ((p - 2.0) * s.ln_1p()).exp();
        h += &z * z.transpose() * w;
    }
    Ok(h)
}
