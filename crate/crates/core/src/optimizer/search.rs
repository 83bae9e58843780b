//! Local search primitives: Euclidean projection onto a polytope, projected
//! supergradient ascent, golden-section search and derivative bisection.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::gfunc::{g_value, supergradient, ExtendedReal};
use crate::levy::{LevyTriplet, UncertaintySet, UtilitySpec};
use crate::linalg::{axpy, dot, norm};
use crate::polyhedron::Polyhedron;

/// A concave objective over vertices: the robust envelope `min_k g^{θₖ}`.
/// Points outside the power integrand's domain evaluate to `-∞`.
#[derive(Clone, Copy)]
pub(crate) struct Envelope<'a> {
    pub vertices: &'a [LevyTriplet],
    pub utility: &'a UtilitySpec,
}

impl<'a> Envelope<'a> {
    pub(crate) fn new(theta: &'a UncertaintySet, utility: &'a UtilitySpec) -> Self {
        Self {
            vertices: theta.vertices(),
            utility,
        }
    }

    pub(crate) fn single(triplet: &'a LevyTriplet, utility: &'a UtilitySpec) -> Self {
        Self {
            vertices: std::slice::from_ref(triplet),
            utility,
        }
    }

    pub(crate) fn value_of(&self, k: usize, y: &[f64]) -> ExtendedReal {
        g_value(&self.vertices[k], y, self.utility).unwrap_or(ExtendedReal::NegInfinity)
    }

    /// Minimum value and lowest attaining vertex.
    pub(crate) fn eval(&self, y: &[f64]) -> (ExtendedReal, usize) {
        let mut best = (self.value_of(0, y), 0);
        for k in 1..self.vertices.len() {
            let v = self.value_of(k, y);
            if v < best.0 {
                best = (v, k);
            }
        }
        best
    }

    pub(crate) fn gradient(&self, k: usize, y: &[f64]) -> Result<Vec<f64>, Error> {
        supergradient(&self.vertices[k], y, self.utility)
    }
}

/// Euclidean projection onto `{y | aⱼᵀy ≤ bⱼ}` by Hildreth's dual coordinate
/// ascent.
pub(crate) fn project(poly: &Polyhedron, x: &[f64]) -> Vec<f64> {
    let hs = poly.halfspaces();
    if poly.contains(x, 0.0) {
        return x.to_vec();
    }
    let norms: Vec<f64> = hs.iter().map(|h| dot(&h.normal, &h.normal)).collect();
    let mut lambda = vec![0.0; hs.len()];
    let mut y = x.to_vec();
    for sweep in 0..20_000 {
        let mut moved = 0.0_f64;
        for (j, h) in hs.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let next = (lambda[j] + (dot(&h.normal, &y) - h.offset) / norms[j]).max(0.0);
            let delta = next - lambda[j];
            if delta != 0.0 {
                for (yi, ai) in y.iter_mut().zip(&h.normal) {
                    *yi -= delta * ai;
                }
                lambda[j] = next;
                moved = moved.max(delta.abs() * norms[j].sqrt());
            }
        }
        if moved <= 1e-15 * (1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            break;
        }
        // Hildreth converges linearly (slowly from far away); the facets tight
        // at the iterate usually identify the answer long before, and the
        // exact projection onto them is accepted only if it satisfies KKT.
        if sweep % 4 == 3 {
            let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let support: Vec<usize> = (0..hs.len())
                .filter(|&j| hs[j].slack(&y).abs() <= 1e-7 * scale)
                .collect();
            if let Some(exact) = project_onto_facets(poly, &support, x) {
                return exact;
            }
        }
    }
    y
}

/// Projection of `x` onto the affine hull of the facets in `support`,
/// accepted only if the multipliers are nonnegative and the point feasible
/// (then it is the projection onto the polytope).
fn project_onto_facets(poly: &Polyhedron, support: &[usize], x: &[f64]) -> Option<Vec<f64>> {
    let hs = poly.halfspaces();
    let m = support.len();
    if m == 0 || m > x.len() {
        return None;
    }
    let gram = DMatrix::from_fn(m, m, |i, j| {
        dot(&hs[support[i]].normal, &hs[support[j]].normal)
    });
    let rhs = DVector::from_fn(m, |i, _| {
        dot(&hs[support[i]].normal, x) - hs[support[i]].offset
    });
    let mu = gram.cholesky()?.solve(&rhs);
    if mu.iter().any(|v| *v < 0.0) {
        return None;
    }
    let mut y = x.to_vec();
    for (i, &j) in support.iter().enumerate() {
        for (yi, ai) in y.iter_mut().zip(&hs[j].normal) {
            *yi -= mu[i] * ai;
        }
    }
    let scale = 1.0 + y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    poly.contains(&y, 1e-12 * scale).then_some(y)
}

pub(crate) struct AscentResult {
    pub y: Vec<f64>,
    pub value: ExtendedReal,
    pub iterations: usize,
}

/// Projected supergradient ascent with steps `a/√k` along the gradient of
/// the active vertex. Steps landing at `-∞` are halved.
pub(crate) fn ascend(
    env: &Envelope<'_>,
    poly: &Polyhedron,
    start: &[f64],
    step_scale: f64,
    max_iters: usize,
    value_tol: f64,
) -> AscentResult {
    let mut y = project(poly, start);
    let (mut value, mut active) = env.eval(&y);
    let mut best = AscentResult {
        y: y.clone(),
        value,
        iterations: 0,
    };
    if !value.is_finite() {
        return best;
    }
    let patience = 500.min(max_iters.max(1));
    let mut last_gain = 0;
    let mut k = 0;
    while k < max_iters {
        k += 1;
        let grad = match env.gradient(active, &y) {
            Ok(g) => g,
            Err(_) => break,
        };
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        // Near the natural boundary the gradient blows up; cap the step
        // length at a/√k.
        let mut step = step_scale / (k as f64).sqrt() / norm(&grad).max(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let cand = project(poly, &axpy(&y, step, &grad));
            let (v, a) = env.eval(&cand);
            if v.is_finite() {
                accepted = Some((cand, v, a));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, v, a)) = accepted else {
            break;
        };
        y = cand;
        value = v;
        active = a;
        if value > best.value {
            let gain = value.to_f64() - best.value.to_f64();
            best.y.clone_from(&y);
            best.value = value;
            if gain > value_tol * 1e-3 {
                last_gain = k;
            }
        }
        if k - last_gain > patience {
            break;
        }
    }
    best.iterations = k;
    best
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a concave extended-real function
/// on `[lo, hi]`, which must contain the origin (where the function is
/// finite). Returns the best probe found and the iteration count.
pub(crate) fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, ExtendedReal, usize)
where
    F: Fn(f64) -> ExtendedReal,
{
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = [(lo, f(lo)), (hi, f(hi)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((0.0, f(0.0)), |acc, c| if c.1 > acc.1 { c } else { acc });
    let mut iters = 0;
    while b - a > tol * (1.0 + a.abs().max(b.abs())) && iters < 500 {
        iters += 1;
        let go_right = if f1 < f2 {
            true
        } else if f1 > f2 {
            false
        } else if !f1.is_finite() {
            // Both probes sit in the -∞ region; the finite region contains 0.
            0.0 > x2
        } else {
            a = x1;
            b = x2;
            x1 = b - INV_PHI * (b - a);
            x2 = a + INV_PHI * (b - a);
            f1 = f(x1);
            f2 = f(x2);
            for c in [(x1, f1), (x2, f2)] {
                if c.1 > best.1 {
                    best = c;
                }
            }
            continue;
        };
        if go_right {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        }
    }
    (best.0, best.1, iters)
}

/// Bisection on the sign of the active vertex's derivative over `[lo, hi]`.
/// Where the derivative is undefined (at `-∞` or at a jump singularity) the
/// search moves towards the origin.
pub(crate) fn derivative_bisection(env: &Envelope<'_>, lo: f64, hi: f64) -> (f64, usize) {
    let slope = |y: f64| -> f64 {
        let (v, k) = env.eval(&[y]);
        let inward = if y > 0.0 { -1.0 } else { 1.0 };
        if !v.is_finite() {
            return inward;
        }
        match env.gradient(k, &[y]) {
            Ok(g) => g[0],
            Err(_) => inward,
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut iters = 0;
    if slope(b) >= 0.0 {
        return (b, 1);
    }
    if slope(a) <= 0.0 {
        return (a, 2);
    }
    while iters < 200 {
        iters += 1;
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let s = slope(mid);
        if s > 0.0 {
            a = mid;
        } else if s < 0.0 {
            b = mid;
        } else {
            return (mid, iters);
        }
    }
    (0.5 * (a + b), iters)
}
