//! Lévy triplets, finite-activity jump measures, uncertainty sets and utilities.
//!
//! Jump measures are finite sums of atoms (compound Poisson). Drifts are
//! always expressed relative to the fixed truncation function
//! `h(z) = z · 1{|z| ≤ 1}` (closed unit ball, so `h(1) = 1`).
//!
//! An [`UncertaintySet`] is the convex hull of finitely many triplets. The
//! local objective is linear in the triplet, so every infimum over the hull
//! is attained at a vertex.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Eigenvalues of a diffusion matrix above `-PSD_TOLERANCE` are accepted and
/// clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Default `epsilon` in the finiteness integrand for `p ∈ (0, 1)`.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Largest number of corners [`compile_box_to_vertices`] will enumerate.
pub const MAX_BOX_VERTICES: u64 = 4096;

/// Truncation function `h(z) = z · 1{|z| ≤ 1}`.
pub fn truncate(z: &[f64]) -> Vec<f64> {
    if norm(z) <= 1.0 {
        z.to_vec()
    } else {
        vec![0.0; z.len()]
    }
}

/// `yᵀh(z)` without allocating.
pub(crate) fn dot_truncated(y: &[f64], z: &[f64]) -> f64 {
    if norm(z) <= 1.0 {
        dot(y, z)
    } else {
        0.0
    }
}

/// A single jump atom: `rate · δ_location`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub rate: f64,
    pub location: Vec<f64>,
}

impl Atom {
    pub fn new(rate: f64, location: Vec<f64>) -> Self {
        Self { rate, location }
    }
}

/// Finite atomic Lévy measure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpMeasure {
    atoms: Vec<Atom>,
    approximate: bool,
}

impl JumpMeasure {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self {
            atoms,
            approximate: false,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `true` if the measure came from discretizing a density.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.rate).sum()
    }

    /// `∫ h(z) F(dz)`.
    pub fn truncated_mean(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for atom in &self.atoms {
            if norm(&atom.location) <= 1.0 {
                for (o, z) in out.iter_mut().zip(&atom.location) {
                    *o += atom.rate * z;
                }
            }
        }
        out
    }

    /// Union of two measures (atoms are concatenated, not merged).
    pub fn union(mut self, other: JumpMeasure) -> Self {
        self.approximate |= other.approximate;
        self.atoms.extend(other.atoms);
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.rate * factor, a.location.clone()))
                .collect(),
            approximate: self.approximate,
        }
    }
}

/// A Lévy triplet `(b, c, F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    drift: Vec<f64>,
    diffusion: DMatrix<f64>,
    jumps: JumpMeasure,
}

impl LevyTriplet {
    /// Builds a triplet, checking only that the dimensions agree.
    ///
    /// Use [`validate_triplet`] for the Lévy conditions, or
    /// [`LevyTriplet::checked`] to reject invalid input outright.
    pub fn new(drift: Vec<f64>, diffusion: DMatrix<f64>, jumps: JumpMeasure) -> Result<Self> {
        let d = drift.len();
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if diffusion.nrows() != d || diffusion.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: diffusion.nrows().max(diffusion.ncols()),
                context: "diffusion matrix",
            });
        }
        for atom in jumps.atoms() {
            if atom.location.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: atom.location.len(),
                    context: "jump location",
                });
            }
        }
        Ok(Self {
            drift,
            diffusion,
            jumps,
        })
    }

    /// Builds and validates a triplet. Slightly negative eigenvalues of `c`
    /// (within [`PSD_TOLERANCE`]) are clamped to zero.
    pub fn checked(drift: Vec<f64>, diffusion: DMatrix<f64>, jumps: JumpMeasure) -> Result<Self> {
        let mut triplet = Self::new(drift, diffusion, jumps)?;
        let check = validate_triplet(&triplet);
        if !check.is_valid() {
            return Err(Error::InvalidTriplet(check.violations));
        }
        triplet.diffusion = clamp_psd(&triplet.diffusion);
        Ok(triplet)
    }

    /// Scalar convenience constructor for `d = 1`.
    pub fn scalar(b: f64, c: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        Self::checked(
            vec![b],
            DMatrix::from_element(1, 1, c),
            JumpMeasure::new(atoms.iter().map(|&(r, z)| Atom::new(r, vec![z])).collect()),
        )
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn jumps(&self) -> &JumpMeasure {
        &self.jumps
    }

    /// `yᵀ c y`.
    pub fn quadratic_form(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.diffusion[(i, j)] * y[j];
            }
            acc += y[i] * row;
        }
        acc
    }

    /// Convex combination `Σ wₖ θₖ`: drifts and diffusions combine linearly,
    /// jump measures are unions of scaled atoms. Zero weights are skipped.
    pub fn mixture(parts: &[(&LevyTriplet, f64)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyUncertaintySet)?.0;
        let d = first.dim();
        let mut drift = vec![0.0; d];
        let mut diffusion = DMatrix::zeros(d, d);
        let mut jumps = JumpMeasure::empty();
        for &(t, w) in parts {
            if t.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: t.dim(),
                    context: "mixture component",
                });
            }
            if w == 0.0 {
                continue;
            }
            for (acc, b) in drift.iter_mut().zip(&t.drift) {
                *acc += w * b;
            }
            diffusion += &t.diffusion * w;
            jumps = jumps.union(t.jumps.scaled(w));
        }
        Ok(Self {
            drift,
            diffusion,
            jumps,
        })
    }
}

fn clamp_psd(c: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// Outcome of [`validate_triplet`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TripletCheck {
    pub violations: Vec<String>,
}

impl TripletCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the Lévy-triplet conditions: finite entries, `c` symmetric PSD,
/// positive atom rates and `F({0}) = 0`.
pub fn validate_triplet(triplet: &LevyTriplet) -> TripletCheck {
    let mut violations = Vec::new();
    if triplet.drift.iter().any(|b| !b.is_finite()) {
        violations.push("drift has non-finite entries".to_string());
    }
    let c = &triplet.diffusion;
    if c.iter().any(|x| !x.is_finite()) {
        violations.push("diffusion matrix has non-finite entries".to_string());
    } else {
        let scale = c.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if (c - c.transpose())
            .iter()
            .any(|x| x.abs() > PSD_TOLERANCE * scale)
        {
            violations.push("diffusion matrix not symmetric".to_string());
        }
        let eig = SymmetricEigen::new((c + c.transpose()) * 0.5);
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            violations.push(format!("diffusion matrix not PSD (min eigenvalue {min:e})"));
        }
    }
    for (i, atom) in triplet.jumps.atoms().iter().enumerate() {
        if !(atom.rate.is_finite() && atom.rate > 0.0) {
            violations.push(format!(
                "atom {i}: rate {} is not positive and finite",
                atom.rate
            ));
        }
        if atom.location.iter().any(|z| !z.is_finite()) {
            violations.push(format!("atom {i}: location has non-finite entries"));
        } else if norm(&atom.location) == 0.0 {
            violations.push(format!("atom {i}: located at the origin"));
        }
    }
    TripletCheck { violations }
}

/// Convex hull of finitely many triplets of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    vertices: Vec<LevyTriplet>,
}

impl UncertaintySet {
    pub fn new(vertices: Vec<LevyTriplet>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::EmptyUncertaintySet)?;
        let d = first.dim();
        if let Some(bad) = vertices.iter().find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
                context: "uncertainty-set vertex",
            });
        }
        Ok(Self { vertices })
    }

    pub fn singleton(triplet: LevyTriplet) -> Self {
        Self {
            vertices: vec![triplet],
        }
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn vertices(&self) -> &[LevyTriplet] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn with_vertex(&self, triplet: LevyTriplet) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        vertices.push(triplet);
        Self::new(vertices)
    }

    /// Triplet `Σ wₖ θₖ` for simplex weights over the vertices.
    pub fn mixture(&self, weights: &[f64]) -> Result<LevyTriplet> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: weights.len(),
                context: "mixture weights",
            });
        }
        let parts: Vec<_> = self.vertices.iter().zip(weights.iter().copied()).collect();
        LevyTriplet::mixture(&parts)
    }

    pub fn has_approximate_jumps(&self) -> bool {
        self.vertices.iter().any(|v| v.jumps.is_approximate())
    }
}

/// Isoelastic utility: `log` (`p = 0`) or `x^p / p` with `p ∈ (-∞, 0) ∪ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UtilitySpec {
    Log,
    Power {
        p: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl UtilitySpec {
    pub fn power(p: f64) -> Result<Self> {
        Self::power_with_epsilon(p, DEFAULT_EPSILON)
    }

    pub fn power_with_epsilon(p: f64, epsilon: f64) -> Result<Self> {
        let spec = UtilitySpec::Power { p, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Log => Ok(()),
            UtilitySpec::Power { p, epsilon } => {
                if !p.is_finite() || p == 0.0 || p >= 1.0 {
                    return Err(Error::InvalidUtility(format!(
                        "power exponent p = {p} must lie in (-inf, 0) or (0, 1)"
                    )));
                }
                if p > 0.0 && !(epsilon > 0.0 && p * (1.0 + epsilon) < 1.0) {
                    return Err(Error::InvalidUtility(format!(
                        "epsilon = {epsilon} must be positive with p(1 + epsilon) < 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `p`, with `0` for the logarithm.
    pub fn p(&self) -> f64 {
        match *self {
            UtilitySpec::Log => 0.0,
            UtilitySpec::Power { p, .. } => p,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, UtilitySpec::Log)
    }

    /// `U(x)`; `U(0)` is `-∞` for `p ≤ 0`.
    pub fn utility(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Log => x.ln(),
            UtilitySpec::Power { p, .. } => x.powf(p) / p,
        }
    }

    /// Integrand of the finiteness constant at a jump of size `|z|`.
    fn kappa_integrand(&self, r: f64) -> f64 {
        let sq = r * r;
        match *self {
            UtilitySpec::Log => sq.min(r.ln_1p()),
            UtilitySpec::Power { p, epsilon } if p > 0.0 => sq.min(r.powf(p * (1.0 + epsilon))),
            UtilitySpec::Power { .. } => sq.min(1.0),
        }
    }
}

/// Finiteness constant `sup_θ |b| + |c| + ∫ ρ(z) F(dz)` with `|c|` the
/// Frobenius norm. The maximum over vertices bounds the supremum over the
/// hull since each summand is convex along the hull.
pub fn kappa(theta: &UncertaintySet, utility: &UtilitySpec) -> f64 {
    theta
        .vertices()
        .iter()
        .map(|v| {
            let jumps: f64 = v
                .jumps()
                .atoms()
                .iter()
                .map(|a| a.rate * utility.kappa_integrand(norm(&a.location)))
                .sum();
            norm(v.drift()) + v.diffusion().norm() + jumps
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn is_free(&self) -> bool {
        self.hi > self.lo
    }

    fn corner(&self, upper: bool) -> f64 {
        if upper {
            self.hi
        } else {
            self.lo
        }
    }
}

/// A jump atom with a fixed location and an interval of rates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxAtom {
    pub location: Vec<f64>,
    pub rate: Interval,
}

/// Box-shaped uncertainty: `b` componentwise in intervals, `c = s · base`
/// with `s` in an interval, and each atom rate in an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    pub drift: Vec<Interval>,
    pub diffusion_base: DMatrix<f64>,
    pub diffusion_scale: Interval,
    pub atoms: Vec<BoxAtom>,
}

impl ParameterBox {
    fn free_parameters(&self) -> usize {
        self.drift.iter().filter(|i| i.is_free()).count()
            + usize::from(self.diffusion_scale.is_free())
            + self.atoms.iter().filter(|a| a.rate.is_free()).count()
    }
}

/// Enumerates the corners of a parameter box as the vertices of an
/// uncertainty set.
///
/// Free parameters are ordered drift components, diffusion scale, atom
/// rates; bit `i` of the vertex index selects the upper end of free
/// parameter `i`, so vertex 0 is the all-lower corner.
pub fn compile_box_to_vertices(spec: &ParameterBox) -> Result<UncertaintySet> {
    for iv in spec
        .drift
        .iter()
        .chain(std::iter::once(&spec.diffusion_scale))
        .chain(spec.atoms.iter().map(|a| &a.rate))
    {
        if !(iv.lo <= iv.hi) {
            return Err(Error::InvalidInput(format!(
                "empty interval [{}, {}]",
                iv.lo, iv.hi
            )));
        }
    }
    let k = spec.free_parameters();
    // 2^k overflows u64 well past any usable cap; report the saturated count.
    let count = if k >= 64 { u64::MAX } else { 1u64 << k };
    if count > MAX_BOX_VERTICES {
        return Err(Error::TooManyVertices {
            count,
            cap: MAX_BOX_VERTICES,
        });
    }
    let mut vertices = Vec::with_capacity(count as usize);
    for mask in 0..count {
        let mut bit = 0;
        let mut pick = |iv: &Interval| {
            if iv.is_free() {
                let upper = mask >> bit & 1 == 1;
                bit += 1;
                iv.corner(upper)
            } else {
                iv.lo
            }
        };
        let drift: Vec<f64> = spec.drift.iter().map(&mut pick).collect();
        let scale = pick(&spec.diffusion_scale);
        let atoms = spec
            .atoms
            .iter()
            .filter_map(|a| {
                let rate = pick(&a.rate);
                (rate > 0.0).then(|| Atom::new(rate, a.location.clone()))
            })
            .collect();
        vertices.push(LevyTriplet::checked(
            drift,
            &spec.diffusion_base * scale,
            JumpMeasure::new(atoms),
        )?);
    }
    UncertaintySet::new(vertices)
}

/// Midpoint-rule discretization of a one-dimensional jump intensity on
/// `support`, which must not contain zero. Cells with zero intensity are
/// dropped; the resulting measure is flagged approximate.
pub fn discretize_density<F>(
    density: F,
    support: Interval,
    grid_points: usize,
) -> Result<JumpMeasure>
where
    F: Fn(f64) -> f64,
{
    if grid_points < 2 {
        return Err(Error::InvalidInput("grid_points must be at least 2".into()));
    }
    if !(support.lo < support.hi) || !support.lo.is_finite() || !support.hi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "support [{}, {}] must be a finite nonempty interval",
            support.lo, support.hi
        )));
    }
    if support.lo <= 0.0 && support.hi >= 0.0 {
        return Err(Error::SupportContainsZero {
            lo: support.lo,
            hi: support.hi,
        });
    }
    let width = (support.hi - support.lo) / grid_points as f64;
    let mut atoms = Vec::new();
    for k in 0..grid_points {
        let z = support.lo + (k as f64 + 0.5) * width;
        let intensity = density(z);
        if !(intensity >= 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "density must be finite and nonnegative, got {intensity} at {z}"
            )));
        }
        if intensity > 0.0 {
            atoms.push(Atom::new(intensity * width, vec![z]));
        }
    }
    Ok(JumpMeasure {
        atoms,
        approximate: true,
    })
}
