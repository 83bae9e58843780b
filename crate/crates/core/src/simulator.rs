//! Exact Monte Carlo for exponential-Lévy wealth under constant proportions.
//!
//! With a finite-activity jump measure the terminal state is drawn exactly:
//! a Gaussian `√c·B_T`, a Poisson number of jumps at uniform times and
//! atom locations drawn proportionally to their rates. The simulated drift
//! is `b - ∫h dF`, the characteristics being taken relative to `h`.
//!
//! For a constant `π` the stochastic exponential is
//!
//! ```text
//! W_T = x₀ · exp(πᵀ(b - ∫h dF)T + πᵀ√c B_T - ½πᵀcπ T) · Π_j (1 + πᵀz_j)
//! ```
//!
//! Each path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so estimates are independent of thread scheduling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunc::{g_value, ExtendedReal};
use crate::levy::{LevyTriplet, UtilitySpec};
use crate::linalg::dot;

/// Width of the acceptance band, in standard errors.
pub const CONFIDENCE_FACTOR: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub location: Vec<f64>,
}

/// Terminal data of one path of the Lévy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    /// `√c · B_T`.
    pub brownian_terminal: Vec<f64>,
    /// Jumps in increasing time order on `(0, T]`.
    pub jumps: Vec<JumpEvent>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: ExtendedReal,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Some path produced `U(0) = -∞`.
    pub hit_neg_infinity: bool,
}

impl McEstimate {
    /// `|mean - target| ≤ 3.5 · stderr`, with `-∞ = -∞` counted as a match.
    pub fn agrees_with(&self, target: ExtendedReal) -> bool {
        match (self.mean, target) {
            (ExtendedReal::Finite(m), ExtendedReal::Finite(t)) => {
                (m - t).abs() <= CONFIDENCE_FACTOR * self.stderr
            }
            (ExtendedReal::NegInfinity, ExtendedReal::NegInfinity) => true,
            _ => false,
        }
    }
}

/// Precomputed sampling data for one triplet.
#[derive(Debug, Clone)]
pub struct PathSampler<'a> {
    triplet: &'a LevyTriplet,
    sqrt_c: DMatrix<f64>,
    cumulative: Vec<f64>,
    total_rate: f64,
}

impl<'a> PathSampler<'a> {
    pub fn new(triplet: &'a LevyTriplet) -> Self {
        let eig = SymmetricEigen::new(triplet.diffusion().clone());
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_c =
            &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let mut acc = 0.0;
        let cumulative = triplet
            .jumps()
            .atoms()
            .iter()
            .map(|a| {
                acc += a.rate;
                acc
            })
            .collect();
        Self {
            triplet,
            sqrt_c,
            cumulative,
            total_rate: acc,
        }
    }

    fn rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    pub fn sample(&self, horizon: f64, seed: u64, index: u64) -> PathRecord {
        let mut rng = Self::rng(seed, index);
        let d = self.triplet.dim();
        let normals: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let scale = horizon.sqrt();
        let brownian_terminal = (0..d)
            .map(|i| {
                scale
                    * (0..d)
                        .map(|j| self.sqrt_c[(i, j)] * normals[j])
                        .sum::<f64>()
            })
            .collect();
        let mut jumps = Vec::new();
        if self.total_rate > 0.0 {
            let poisson = Poisson::new(self.total_rate * horizon).expect("positive Poisson mean");
            let count = poisson.sample(&mut rng) as usize;
            let atoms = self.triplet.jumps().atoms();
            for _ in 0..count {
                let time = horizon * (1.0 - rng.random::<f64>());
                let u = rng.random::<f64>() * self.total_rate;
                let k = self
                    .cumulative
                    .partition_point(|&c| c <= u)
                    .min(atoms.len() - 1);
                jumps.push(JumpEvent {
                    time,
                    location: atoms[k].location.clone(),
                });
            }
            jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        }
        PathRecord {
            brownian_terminal,
            jumps,
            horizon,
        }
    }
}

/// Draws one path; `(seed, index)` determines it completely.
pub fn sample_path(triplet: &LevyTriplet, horizon: f64, seed: u64, index: u64) -> PathRecord {
    PathSampler::new(triplet).sample(horizon, seed, index)
}

/// `log(W_T / x₀)`, `-∞` if some factor `1 + πᵀz` vanishes.
fn log_growth(path: &PathRecord, triplet: &LevyTriplet, pi: &[f64]) -> Result<ExtendedReal> {
    let d = triplet.dim();
    if pi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: pi.len(),
            context: "portfolio vector",
        });
    }
    let compensated: Vec<f64> = triplet
        .drift()
        .iter()
        .zip(triplet.jumps().truncated_mean(d))
        .map(|(b, h)| b - h)
        .collect();
    let t = path.horizon;
    let mut log_w = dot(pi, &compensated) * t + dot(pi, &path.brownian_terminal)
        - 0.5 * triplet.quadratic_form(pi) * t;
    let mut zero = false;
    for jump in &path.jumps {
        let factor = 1.0 + dot(pi, &jump.location);
        if factor < 0.0 {
            return Err(Error::NegativeWealth { factor });
        }
        if factor == 0.0 {
            zero = true;
        } else {
            log_w += factor.ln();
        }
    }
    Ok(if zero {
        ExtendedReal::NegInfinity
    } else {
        ExtendedReal::Finite(log_w)
    })
}

/// Terminal wealth `W_T` of the constant strategy `π` along `path`.
pub fn terminal_wealth(
    path: &PathRecord,
    triplet: &LevyTriplet,
    pi: &[f64],
    x0: f64,
) -> Result<f64> {
    Ok(match log_growth(path, triplet, pi)? {
        ExtendedReal::Finite(l) => x0 * l.exp(),
        ExtendedReal::NegInfinity => 0.0,
    })
}

/// Sample mean and standard error of `f(path)` over `n_paths` paths. `None`
/// observations stand for `-∞`.
fn estimate<F>(
    triplet: &LevyTriplet,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<McEstimate>
where
    F: Fn(&PathRecord) -> Result<Option<f64>> + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be positive".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let sampler = PathSampler::new(triplet);
    let samples: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| f(&sampler.sample(horizon, seed, i)))
        .collect::<Result<_>>()?;
    if samples.iter().any(Option::is_none) {
        return Ok(McEstimate {
            mean: ExtendedReal::NegInfinity,
            stderr: f64::NAN,
            n_paths,
            seed,
            hit_neg_infinity: true,
        });
    }
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    // Shifted two-pass moments: identical samples give exact mean and zero error.
    let shift = values[0];
    let n = values.len() as f64;
    let mean_shift = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = if values.len() > 1 {
        values
            .iter()
            .map(|v| (v - shift - mean_shift).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: ExtendedReal::Finite(shift + mean_shift),
        stderr: (var / n).sqrt(),
        n_paths,
        seed,
        hit_neg_infinity: false,
    })
}

/// Monte Carlo estimate of `E[U(W_T)]` for the constant strategy `π`.
pub fn mc_expected_utility(
    triplet: &LevyTriplet,
    pi: &[f64],
    utility: &UtilitySpec,
    x0: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    estimate(triplet, horizon, n_paths, seed, |path| {
        let w = terminal_wealth(path, triplet, pi, x0)?;
        let u = utility.utility(w);
        Ok((u != f64::NEG_INFINITY).then_some(u))
    })
}

/// `log x₀ + T g^θ(π)` or `x₀^p/p · exp(pT g^θ(π))`.
pub fn closed_form_expected_utility(
    triplet: &LevyTriplet,
    pi: &[f64],
    utility: &UtilitySpec,
    x0: f64,
    horizon: f64,
) -> Result<ExtendedReal> {
    let g = g_value(triplet, pi, utility)?;
    Ok(match (*utility, g) {
        (_, ExtendedReal::Finite(g)) => {
            ExtendedReal::Finite(crate::optimizer::problem_value(g, utility, x0, horizon))
        }
        (UtilitySpec::Log, ExtendedReal::NegInfinity) => ExtendedReal::NegInfinity,
        (UtilitySpec::Power { p, .. }, ExtendedReal::NegInfinity) => {
            if p < 0.0 {
                ExtendedReal::NegInfinity
            } else {
                // x^p/p with p > 0 is bounded below by 0; g cannot be -∞ there.
                ExtendedReal::ZERO
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub estimate: McEstimate,
    pub pass: bool,
}

/// Estimates `E[M_T]` with `M_T = (W_T)^p · exp(-pT g^θ(π))` (`x₀ = 1`) and
/// passes if it lies within 3.5 standard errors of 1.
pub fn martingale_unit_expectation_check(
    triplet: &LevyTriplet,
    pi: &[f64],
    utility: &UtilitySpec,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleCheck> {
    let p = match *utility {
        UtilitySpec::Log => {
            return Err(Error::InvalidUtility(
                "the unit-expectation check needs power utility".into(),
            ))
        }
        UtilitySpec::Power { p, .. } => p,
    };
    let g = g_value(triplet, pi, utility)?.finite().ok_or_else(|| {
        Error::InvalidInput(
            "g is -inf at pi; pi must lie inside a shrunk natural constraint".into(),
        )
    })?;
    let discount = (-p * horizon * g).exp();
    let estimate = estimate(triplet, horizon, n_paths, seed, |path| {
        let w = terminal_wealth(path, triplet, pi, 1.0)?;
        Ok(Some(w.powf(p) * discount))
    })?;
    let pass = estimate.agrees_with(ExtendedReal::Finite(1.0));
    Ok(MartingaleCheck { estimate, pass })
}
