//! Log-barrier Newton method for the epigraph form
//!
//! ```text
//! maximize t  subject to  g^{θₖ}(y) ≥ t  (all k),  aⱼᵀy ≤ bⱼ  (all j)
//! ```
//!
//! Each vertex objective is smooth and concave on the interior of the
//! natural constraints, so the barrier subproblems are smooth and convex.

use nalgebra::{DMatrix, DVector};

use crate::gfunc::{hessian, supergradient};
use crate::linalg::dot;
use crate::polyhedron::Polyhedron;

use super::search::Envelope;

pub(crate) struct BarrierResult {
    pub y: Vec<f64>,
    pub newton_steps: usize,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Barrier objective `-s·t - Σ log(gₖ(y) - t) - Σ log(bⱼ - aⱼᵀy)` and, when
/// `derivatives` is set, its gradient and Hessian in `(y, t)`. `None`
/// outside the barrier domain.
fn barrier(
    env: &Envelope<'_>,
    poly: &Polyhedron,
    x: &[f64],
    s: f64,
    derivatives: bool,
) -> Option<Local> {
    let d = x.len() - 1;
    let (y, t) = (&x[..d], x[d]);
    let mut value = -s * t;
    let mut grad = DVector::zeros(d + 1);
    let mut hess = DMatrix::zeros(d + 1, d + 1);
    grad[d] = -s;
    for h in poly.halfspaces() {
        let slack = h.offset - dot(&h.normal, y);
        if !(slack > 0.0) {
            return None;
        }
        value -= slack.ln();
        if derivatives {
            let a = DVector::from_column_slice(&h.normal);
            grad.rows_mut(0, d).axpy(1.0 / slack, &a, 1.0);
            let outer = &a * a.transpose() / (slack * slack);
            let mut block = hess.view_mut((0, 0), (d, d));
            block += outer;
        }
    }
    for k in 0..env.vertices.len() {
        let gk = env.value_of(k, y).finite()?;
        let r = gk - t;
        if !(r > 0.0) {
            return None;
        }
        value -= r.ln();
        if derivatives {
            let vertex = &env.vertices[k];
            let gy = DVector::from_vec(supergradient(vertex, y, env.utility).ok()?);
            let hy = hessian(vertex, y, env.utility).ok()?;
            grad.rows_mut(0, d).axpy(-1.0 / r, &gy, 1.0);
            grad[d] += 1.0 / r;
            let mut block = hess.view_mut((0, 0), (d, d));
            block += &gy * gy.transpose() / (r * r) - hy / r;
            for i in 0..d {
                let cross = -gy[i] / (r * r);
                hess[(i, d)] += cross;
                hess[(d, i)] += cross;
            }
            hess[(d, d)] += 1.0 / (r * r);
        }
    }
    Some(Local { value, grad, hess })
}

fn newton_direction(local: &Local) -> Option<DVector<f64>> {
    let rhs = -&local.grad;
    if let Some(ch) = local.hess.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    local.hess.clone().lu().solve(&rhs)
}

/// Follows the central path from a strictly feasible `start` until the
/// duality-gap bound `m/s` falls below `gap_tol`. Returns `None` if the
/// start is not strictly inside the domain.
pub(crate) fn solve(
    env: &Envelope<'_>,
    poly: &Polyhedron,
    start: &[f64],
    gap_tol: f64,
    max_newton: usize,
) -> Option<BarrierResult> {
    let d = start.len();
    let (min_g, _) = env.eval(start);
    let min_g = min_g.finite()?;
    let mut x = start.to_vec();
    x.push(min_g - 1e-3 * (1.0 + min_g.abs()));
    let terms = (env.vertices.len() + poly.halfspaces().len()) as f64;
    let mut s = 1.0;
    let mut steps = 0;
    barrier(env, poly, &x, s, false)?;
    loop {
        // Newton centering.
        for _ in 0..100 {
            if steps >= max_newton {
                return Some(BarrierResult {
                    y: x[..d].to_vec(),
                    newton_steps: steps,
                });
            }
            let local = barrier(env, poly, &x, s, true)?;
            let Some(dir) = newton_direction(&local) else {
                break;
            };
            let decrement = -local.grad.dot(&dir);
            if !(decrement > 1e-18) {
                break;
            }
            steps += 1;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = x
                    .iter()
                    .zip(dir.iter())
                    .map(|(xi, di)| xi + alpha * di)
                    .collect();
                if let Some(next) = barrier(env, poly, &cand, s, false) {
                    if next.value <= local.value - 0.25 * alpha * decrement {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || decrement < 1e-14 {
                break;
            }
        }
        if terms / s < gap_tol {
            break;
        }
        s *= 8.0;
    }
    Some(BarrierResult {
        y: x[..d].to_vec(),
        newton_steps: steps,
    })
}
