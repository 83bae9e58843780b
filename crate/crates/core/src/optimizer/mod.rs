//! Robust optimization `sup_{y ∈ C∩C⁰} inf_θ g^θ(y)`, saddle-point extraction
//! and the problem value.
//!
//! The outer problem maximizes the concave robust envelope over the compact
//! polytope `C ∩ C⁰`. It is solved on the shrunk polytopes `C ∩ C⁰ₙ` along
//! the shrink schedule (projected supergradient ascent from several starts,
//! golden-section search when `d = 1`) and then polished on `C ∩ C⁰` itself:
//! derivative bisection in one dimension, a log-barrier Newton method on the
//! epigraph form otherwise.

mod barrier;
mod saddle;
mod search;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunc::ExtendedReal;
use crate::levy::{kappa, Interval, LevyTriplet, UncertaintySet, UtilitySpec};
use crate::linalg::{distance, lerp, norm};
use crate::polyhedron::{natural_constraints, Polyhedron};

pub use saddle::{
    find_saddle, stationarity_residual, verify_saddle, SaddleCertificate, SaddleVerdict,
    WeightMethod,
};

use search::Envelope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub value_tol: f64,
    pub y_tol: f64,
    /// Iteration cap per ascent run and for the mirror-descent loop.
    pub max_iters: usize,
    pub restarts: usize,
    pub shrink_schedule: Vec<u32>,
    pub seed: u64,
    /// Mirror-descent iterations used when extracting the worst-case mixture.
    pub mirror_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            value_tol: 1e-8,
            y_tol: 1e-8,
            max_iters: 10_000,
            restarts: 8,
            shrink_schedule: vec![4, 16, 64, 256, 1024],
            seed: 0,
            mirror_iters: 200,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.value_tol > 0.0 && self.y_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if self.shrink_schedule.is_empty()
            || self.shrink_schedule[0] == 0
            || self.shrink_schedule.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "shrink_schedule must be nonempty, positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Total ascent / golden-section / Newton iterations.
    pub iterations: usize,
    pub restarts_used: usize,
    /// Last shrink level solved; the final polish runs on `C ∩ C⁰` itself.
    pub shrink_level: u32,
    /// Best robust value reached at each shrink level.
    pub level_values: Vec<f64>,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub y_hat: Vec<f64>,
    /// `inf_θ g^θ(ŷ)`.
    pub robust_g: f64,
    /// Weights over vertices attaining the infimum at `ŷ` (stationarity
    /// multipliers when available, else the active vertex).
    pub worst_vertex_weights: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Solution {
    pub fn problem_value(&self, utility: &UtilitySpec, x0: f64, horizon: f64) -> f64 {
        problem_value(self.robust_g, utility, x0, horizon)
    }
}

/// Value of the robust problem for initial capital `x0` over `[0, T]`:
/// `log x₀ + T g` for the logarithm, `x₀^p/p · exp(pTg)` for power utility.
pub fn problem_value(robust_g: f64, utility: &UtilitySpec, x0: f64, horizon: f64) -> f64 {
    match *utility {
        UtilitySpec::Log => x0.ln() + horizon * robust_g,
        UtilitySpec::Power { p, .. } => x0.powf(p) * ((p * horizon * robust_g).exp() / p),
    }
}

/// Bounding box and diameter of a compact polytope.
struct Geometry {
    bounds: Vec<Interval>,
    diameter: f64,
}

fn geometry(theta: &UncertaintySet, feasible: &Polyhedron) -> Result<Geometry> {
    if feasible.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: feasible.dim(),
            context: "feasible polytope",
        });
    }
    let bounds = feasible.bounding_box()?.ok_or(Error::NotCompact)?;
    if !feasible.contains_origin() {
        let (index, h) = feasible
            .halfspaces()
            .iter()
            .enumerate()
            .find(|(_, h)| h.offset < 0.0)
            .expect("origin excluded by some halfspace");
        return Err(Error::OriginExcluded {
            index,
            offset: h.offset,
        });
    }
    let diameter = bounds
        .iter()
        .map(|iv| (iv.hi - iv.lo).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(Geometry { bounds, diameter })
}

struct Candidate {
    y: Vec<f64>,
    value: ExtendedReal,
}

/// Keeps `best` unless `cand` is strictly better.
fn keep_better(best: &mut Candidate, cand: Candidate) {
    if cand.value > best.value {
        *best = cand;
    }
}

/// Maximizes the robust envelope `y ↦ min_k g^{θₖ}(y)` over the compact
/// polytope `feasible` (normally `C ∩ C⁰` from `effective_domain`).
///
/// ŷ is deterministic given `opts`: restarts draw from a ChaCha stream keyed
/// by `(seed, restart index)` and are merged by value, ties to the lowest
/// index. Exact ties with the origin resolve to the origin.
pub fn maximize_robust(
    theta: &UncertaintySet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    opts: &SolveOptions,
) -> Result<Solution> {
    opts.validate()?;
    utility.validate()?;
    let geo = geometry(theta, feasible)?;
    let env = Envelope::new(theta, utility);
    let d = theta.dim();
    let origin = vec![0.0; d];
    let step_scale = geo.diameter / kappa(theta, utility).max(1.0);

    let mut best = Candidate {
        y: origin.clone(),
        value: env.eval(&origin).0,
    };
    let mut iterations = 0;
    let mut level_values = Vec::with_capacity(opts.shrink_schedule.len());
    let mut restarts_used = 0;

    for &n in &opts.shrink_schedule {
        let level = feasible.intersect(&natural_constraints(theta, Some(n)))?;
        let level_best = if d == 1 {
            let iv = level.interval_1d()?;
            let (y, value, it) =
                search::golden_section(|x| env.eval(&[x]).0, iv.lo, iv.hi, opts.y_tol * 1e-4);
            iterations += it;
            Candidate { y: vec![y], value }
        } else {
            let mut starts = vec![origin.clone(), best.y.clone()];
            for r in 0..opts.restarts {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                let point: Vec<f64> = geo
                    .bounds
                    .iter()
                    .map(|iv| iv.lo + (iv.hi - iv.lo) * rng.random::<f64>())
                    .collect();
                starts.push(point);
            }
            restarts_used = starts.len();
            let runs: Vec<_> = starts
                .par_iter()
                .map(|s| {
                    search::ascend(&env, &level, s, step_scale, opts.max_iters, opts.value_tol)
                })
                .collect();
            let mut level_best = Candidate {
                y: origin.clone(),
                value: env.eval(&origin).0,
            };
            for run in runs {
                iterations += run.iterations;
                keep_better(
                    &mut level_best,
                    Candidate {
                        y: run.y,
                        value: run.value,
                    },
                );
            }
            level_best
        };
        level_values.push(level_best.value.to_f64());
        keep_better(&mut best, level_best);
    }

    // Polish on C ∩ C⁰.
    let mut polished = false;
    if d == 1 {
        let iv = feasible.interval_1d()?;
        let (y, value, it) =
            search::golden_section(|x| env.eval(&[x]).0, iv.lo, iv.hi, opts.y_tol * 1e-4);
        iterations += it;
        keep_better(&mut best, Candidate { y: vec![y], value });
        // The bisection point is stationary to machine precision; search
        // results may beat it by rounding noise only.
        let (y, it) = search::derivative_bisection(&env, iv.lo, iv.hi);
        iterations += it;
        let value = env.eval(&[y]).0;
        let noise = 1e-12 * (1.0 + best.value.to_f64().abs());
        if value.to_f64() >= best.value.to_f64() - noise {
            best = Candidate { y: vec![y], value };
        }
        polished = true;
    } else if let Some(y) = polish(&env, feasible, &best.y, opts, &mut iterations)? {
        let value = env.eval(&y).0;
        keep_better(&mut best, Candidate { y, value });
        polished = true;
    }

    let origin_value = env.eval(&origin).0;
    if origin_value >= best.value {
        best = Candidate {
            y: origin,
            value: origin_value,
        };
    }

    if !polished && level_values.len() >= 2 {
        let last = level_values[level_values.len() - 1];
        let prev = level_values[level_values.len() - 2];
        if (last - prev).abs() > opts.value_tol {
            return Err(Error::DidNotConverge(format!(
                "robust value moved by {:e} between the last shrink levels and the polish step was unavailable",
                (last - prev).abs()
            )));
        }
    }

    let robust_g = best
        .value
        .finite()
        .ok_or_else(|| Error::DidNotConverge("no finite robust value found".into()))?;
    let worst_vertex_weights = match saddle::kkt_weights(&env, feasible, &best.y)? {
        Some((w, _)) => w,
        None => {
            let mut w = vec![0.0; theta.len()];
            w[env.eval(&best.y).1] = 1.0;
            w
        }
    };
    Ok(Solution {
        y_hat: best.y,
        robust_g,
        worst_vertex_weights,
        diagnostics: Diagnostics {
            iterations,
            restarts_used,
            shrink_level: *opts.shrink_schedule.last().expect("validated nonempty"),
            level_values,
            polished,
        },
    })
}

/// Barrier polish from a point pulled slightly towards the Chebyshev centre,
/// so that it is strictly interior. `None` when the polytope has no
/// interior.
fn polish(
    env: &Envelope<'_>,
    feasible: &Polyhedron,
    from: &[f64],
    opts: &SolveOptions,
    iterations: &mut usize,
) -> Result<Option<Vec<f64>>> {
    let (center, radius) = feasible.chebyshev_center(1e6)?;
    if radius <= 1e-9 {
        return Ok(None);
    }
    let mut start = None;
    for tau in [1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0] {
        let cand = lerp(from, &center, tau);
        let strictly_inside = feasible.halfspaces().iter().all(|h| h.slack(&cand) > 0.0);
        if strictly_inside && env.eval(&cand).0.is_finite() {
            start = Some(cand);
            break;
        }
    }
    let Some(start) = start else {
        return Ok(None);
    };
    let gap_tol = (opts.value_tol * 1e-3).max(1e-14);
    Ok(
        barrier::solve(env, feasible, &start, gap_tol, opts.max_iters).map(|r| {
            *iterations += r.newton_steps;
            r.y
        }),
    )
}

/// Maximizes the smooth concave `g^θ` of a single triplet over `feasible`:
/// derivative bisection for `d = 1`, the barrier method otherwise (with
/// projected ascent when the polytope has no interior).
pub fn maximize_triplet(
    triplet: &LevyTriplet,
    feasible: &Polyhedron,
    utility: &UtilitySpec,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, f64)> {
    let env = Envelope::single(triplet, utility);
    let d = triplet.dim();
    let origin = vec![0.0; d];
    let mut best = Candidate {
        y: origin.clone(),
        value: env.eval(&origin).0,
    };
    if d == 1 {
        let iv = feasible.interval_1d()?;
        if !(iv.lo.is_finite() && iv.hi.is_finite()) {
            return Err(Error::NotCompact);
        }
        let (y, _) = search::derivative_bisection(&env, iv.lo, iv.hi);
        let value = env.eval(&[y]).0;
        keep_better(&mut best, Candidate { y: vec![y], value });
    } else {
        let mut iterations = 0;
        match polish(&env, feasible, &origin, opts, &mut iterations)? {
            Some(y) => {
                let value = env.eval(&y).0;
                keep_better(&mut best, Candidate { y, value });
            }
            None => {
                let bounds = feasible.bounding_box()?.ok_or(Error::NotCompact)?;
                let diameter = norm(&bounds.iter().map(|iv| iv.hi - iv.lo).collect::<Vec<_>>());
                let run = search::ascend(
                    &env,
                    feasible,
                    &origin,
                    diameter,
                    opts.max_iters,
                    opts.value_tol,
                );
                keep_better(
                    &mut best,
                    Candidate {
                        y: run.y,
                        value: run.value,
                    },
                );
            }
        }
    }
    let value = best
        .value
        .finite()
        .ok_or_else(|| Error::DidNotConverge("no finite value found".into()))?;
    Ok((best.y, value))
}

/// `true` if two solutions agree on ŷ within `y_tol` and on the value within
/// `value_tol`.
pub fn solutions_agree(a: &Solution, b: &Solution, opts: &SolveOptions) -> bool {
    distance(&a.y_hat, &b.y_hat) <= opts.y_tol && (a.robust_g - b.robust_g).abs() <= opts.value_tol
}
