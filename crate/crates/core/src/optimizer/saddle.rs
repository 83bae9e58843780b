//! Saddle points of `(θ, y) ↦ g^θ(y)` on `Θ × (C ∩ C⁰)`.
//!
//! A saddle `(θ̂, ŷ)` is certified through three residuals:
//!
//! * `residual_max_y = sup_y g^θ̂(y) - g^θ̂(ŷ)` (ŷ is a best response to θ̂),
//! * `residual_min_theta = g^θ̂(ŷ) - inf_θ g^θ(ŷ)` (θ̂ is a best response to ŷ),
//! * `gap = sup_y g^θ̂(y) - inf_θ g^θ(ŷ)`, an upper estimate of inf-sup minus
//!   a lower estimate of sup-inf.
//!
//! θ̂ is a mixture of vertices. Two routes produce weights: stationarity
//! multipliers at ŷ (a small LP over the active vertices and constraints)
//! and averaged entropic mirror descent on `w ↦ sup_y g^{θ(w)}(y)`. The
//! better-certified of the two is reported. Worst-case models are generally
//! not unique; one certified saddle is returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunc::{eval_g_mixture, eval_g_robust, g_value};
use crate::levy::{UncertaintySet, UtilitySpec};
use crate::lp::{Cmp, LinearProgram, LpStatus, Sense};
use crate::polyhedron::Polyhedron;

use super::search::Envelope;
use super::{maximize_robust, maximize_triplet, SolveOptions};

/// Vertices within this much of the minimum count as active.
const ACTIVE_VALUE_TOL: f64 = 1e-9;
/// Halfspaces with slack below this (relative) count as binding.
const ACTIVE_SLACK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Stationarity,
    MirrorDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleCertificate {
    pub y_hat: Vec<f64>,
    pub theta_hat_weights: Vec<f64>,
    /// `g^θ̂(ŷ)`.
    pub value: f64,
    pub residual_max_y: f64,
    pub residual_min_theta: f64,
    pub gap: f64,
    pub method: WeightMethod,
    /// Largest residual of the mirror-descent candidate, for comparison.
    pub mirror_descent_residual: f64,
}

impl SaddleCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residual_max_y
            .max(self.residual_min_theta)
            .max(self.gap.abs())
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Stationarity weights at `y`: simplex weights `λ` on the active vertices
/// and multipliers `μ ≥ 0` on binding halfspaces minimizing
/// `‖Σ λₖ ∇gₖ(y) - Σ μⱼ aⱼ‖₁`. Returns the full-length weights and the
/// residual, or `None` if no active gradient is defined.
pub(crate) fn kkt_weights(
    env: &Envelope<'_>,
    feasible: &Polyhedron,
    y: &[f64],
) -> Result<Option<(Vec<f64>, f64)>> {
    let d = y.len();
    let (min, _) = env.eval(y);
    let Some(min) = min.finite() else {
        return Ok(None);
    };
    let cutoff = min + ACTIVE_VALUE_TOL * (1.0 + min.abs());
    let mut active = Vec::new();
    for k in 0..env.vertices.len() {
        if let Some(v) = env.value_of(k, y).finite() {
            if v <= cutoff {
                if let Ok(g) = env.gradient(k, y) {
                    active.push((k, g));
                }
            }
        }
    }
    if active.is_empty() {
        return Ok(None);
    }
    let binding: Vec<_> = feasible
        .halfspaces()
        .iter()
        .filter(|h| h.slack(y) <= ACTIVE_SLACK_TOL * (1.0 + h.offset.abs()))
        .collect();

    let mut lp = LinearProgram::new(Sense::Minimize);
    let lambda: Vec<usize> = active.iter().map(|_| lp.var(0.0, 0.0, 1.0)).collect();
    let mu: Vec<usize> = binding
        .iter()
        .map(|_| lp.var(0.0, 0.0, f64::INFINITY))
        .collect();
    let plus: Vec<usize> = (0..d).map(|_| lp.var(1.0, 0.0, f64::INFINITY)).collect();
    let minus: Vec<usize> = (0..d).map(|_| lp.var(1.0, 0.0, f64::INFINITY)).collect();
    let n_vars = lambda.len() + mu.len() + 2 * d;

    let mut simplex = vec![0.0; n_vars];
    for &v in &lambda {
        simplex[v] = 1.0;
    }
    lp.row(simplex, Cmp::Eq, 1.0);
    for i in 0..d {
        let mut row = vec![0.0; n_vars];
        for (&v, (_, g)) in lambda.iter().zip(&active) {
            row[v] = g[i];
        }
        for (&v, h) in mu.iter().zip(&binding) {
            row[v] = -h.normal[i];
        }
        row[plus[i]] = -1.0;
        row[minus[i]] = 1.0;
        lp.row(row, Cmp::Eq, 0.0);
    }
    match lp.solve()? {
        LpStatus::Optimal { objective, x } => {
            let mut weights = vec![0.0; env.vertices.len()];
            let total: f64 = lambda.iter().map(|&v| x[v].max(0.0)).sum();
            for (&v, (k, _)) in lambda.iter().zip(&active) {
                weights[*k] = x[v].max(0.0) / total;
            }
            Ok(Some((weights, objective.max(0.0))))
        }
        _ => Ok(None),
    }
}

/// L1 stationarity residual at `y` (zero at a maximizer of the robust
/// envelope up to solver accuracy). `None` if no active gradient exists.
pub fn stationarity_residual(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    y: &[f64],
) -> Result<Option<f64>> {
    let env = Envelope::new(theta, utility);
    Ok(kkt_weights(&env, feasible, y)?.map(|(_, r)| r))
}

fn certify(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    opts: &SolveOptions,
    y_hat: &[f64],
    weights: Vec<f64>,
    method: WeightMethod,
) -> Result<SaddleCertificate> {
    let value = eval_g_mixture(theta, &weights, y_hat, utility)?
        .finite()
        .ok_or_else(|| Error::DidNotConverge("mixture value at ŷ is -inf".into()))?;
    let mixture = theta.mixture(&weights)?;
    let (_, sup_y) = maximize_triplet(&mixture, feasible, utility, opts)?;
    let inf_theta = eval_g_robust(theta, y_hat, utility)?.0.to_f64();
    Ok(SaddleCertificate {
        y_hat: y_hat.to_vec(),
        theta_hat_weights: weights,
        value,
        residual_max_y: sup_y - value,
        residual_min_theta: value - inf_theta,
        gap: sup_y - inf_theta,
        method,
        mirror_descent_residual: f64::NAN,
    })
}

/// Averaged entropic mirror descent on the simplex for the convex function
/// `w ↦ sup_y Σ wₖ g^{θₖ}(y)`, whose subgradient at `w` is the vector of
/// vertex values at the inner maximizer.
fn mirror_descent(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let k = theta.len();
    let uniform = vec![1.0 / k as f64; k];
    if k == 1 {
        return Ok(uniform);
    }
    let mut w = uniform;
    let mut avg = vec![0.0; k];
    let mut eta0 = None;
    let iters = opts.mirror_iters.clamp(1, opts.max_iters);
    for t in 1..=iters {
        let mixture = theta.mixture(&w)?;
        let (y, _) = maximize_triplet(&mixture, feasible, utility, opts)?;
        let values: Vec<f64> = theta
            .vertices()
            .iter()
            .map(|v| g_value(v, &y, utility).map(|g| g.to_f64()))
            .collect::<Result<_>>()?;
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let eta0 =
            *eta0.get_or_insert_with(|| (2.0 * (k as f64).ln()).sqrt() / (hi - lo).max(1e-12));
        for (acc, wi) in avg.iter_mut().zip(&w) {
            *acc += wi;
        }
        let eta = eta0 / (t as f64).sqrt();
        let mut total = 0.0;
        for (wi, v) in w.iter_mut().zip(&values) {
            // Vertices at -∞ are never optimal for the model player; shift keeps exp finite.
            let shifted = if v.is_finite() { v - lo } else { hi - lo };
            *wi *= (-eta * shifted).exp();
            total += *wi;
        }
        for wi in &mut w {
            *wi /= total;
        }
    }
    let total: f64 = avg.iter().sum();
    Ok(avg.into_iter().map(|a| a / total).collect())
}

/// Solves for ŷ, extracts a worst-case mixture θ̂ and certifies the pair.
///
/// Fails with [`Error::SaddleNotCertified`] (carrying the best candidate)
/// when the largest residual exceeds `10 · value_tol`.
pub fn find_saddle(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    opts: &SolveOptions,
) -> Result<SaddleCertificate> {
    let solution = maximize_robust(theta, feasible, utility, opts)?;
    let y_hat = solution.y_hat;
    let env = Envelope::new(theta, utility);

    let md_weights = mirror_descent(theta, feasible, utility, opts)?;
    let md = certify(
        theta,
        feasible,
        utility,
        opts,
        &y_hat,
        md_weights,
        WeightMethod::MirrorDescent,
    )?;
    let md_residual = md.max_residual();

    let mut best = md;
    if let Some((weights, _)) = kkt_weights(&env, feasible, &y_hat)? {
        let kkt = certify(
            theta,
            feasible,
            utility,
            opts,
            &y_hat,
            weights,
            WeightMethod::Stationarity,
        )?;
        if kkt.max_residual() <= best.max_residual() {
            best = kkt;
        }
    }
    best.mirror_descent_residual = md_residual;

    let threshold = 10.0 * opts.value_tol;
    if !best.passes(threshold) {
        return Err(Error::SaddleNotCertified {
            residual: best.max_residual(),
            threshold,
            best: Box::new(best),
        });
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleVerdict {
    pub pass: bool,
    /// `sup_y g^θ̂(y)`, recomputed.
    pub sup_y_value: f64,
    /// `inf_θ g^θ(ŷ)`, recomputed.
    pub inf_theta_value: f64,
    /// `sup_y inf_θ g^θ(y)`, recomputed.
    pub sup_inf_value: f64,
    pub residual_max_y: f64,
    pub residual_min_theta: f64,
    pub residual_value: f64,
}

/// Recomputes the three saddle assertions for `candidate` from scratch and
/// checks each against `candidate.value` within `tol`.
pub fn verify_saddle(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    candidate: &SaddleCertificate,
    tol: f64,
    opts: &SolveOptions,
) -> Result<SaddleVerdict> {
    let w = &candidate.theta_hat_weights;
    let well_formed = w.len() == theta.len()
        && w.iter().all(|x| *x >= 0.0 && x.is_finite())
        && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        && candidate.y_hat.len() == theta.dim();
    if !well_formed {
        return Ok(SaddleVerdict {
            pass: false,
            sup_y_value: f64::NAN,
            inf_theta_value: f64::NAN,
            sup_inf_value: f64::NAN,
            residual_max_y: f64::INFINITY,
            residual_min_theta: f64::INFINITY,
            residual_value: f64::INFINITY,
        });
    }
    let mixture = theta.mixture(w)?;
    let (_, sup_y_value) = maximize_triplet(&mixture, feasible, utility, opts)?;
    let inf_theta_value = eval_g_robust(theta, &candidate.y_hat, utility)?.0.to_f64();
    let sup_inf_value = maximize_robust(theta, feasible, utility, opts)?.robust_g;
    let residual_max_y = sup_y_value - candidate.value;
    let residual_min_theta = candidate.value - inf_theta_value;
    let residual_value = sup_inf_value - candidate.value;
    let pass = residual_max_y.abs() <= tol
        && residual_min_theta.abs() <= tol
        && residual_value.abs() <= tol;
    Ok(SaddleVerdict {
        pass,
        sup_y_value,
        inf_theta_value,
        sup_inf_value,
        residual_max_y,
        residual_min_theta,
        residual_value,
    })
}
