//! Robust optimal constant-proportion portfolios for log and power utility
//! when the Lévy triplet of the asset returns is only known to lie in a
//! convex set of triplets.
//!
//! * [`levy`]: triplets, jump measures, uncertainty sets, utilities.
//! * [`polyhedron`]: constraint sets, natural constraints, effective domain.
//! * [`gfunc`]: the local objective `g^θ(y)`, its robust envelope and
//!   derivatives.
//! * [`optimizer`]: the robust maximizer, saddle points and problem value.
//! * [`simulator`]: exact Monte Carlo of exponential-Lévy wealth.

// `!(a <= b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gfunc;
pub mod levy;
pub mod linalg;
mod lp;
pub mod optimizer;
pub mod polyhedron;
pub mod simulator;

pub use error::{Error, Result};
pub use gfunc::{eval_g, eval_g_robust, integrand, supergradient, ExtendedReal, GEvaluation};
pub use levy::{
    compile_box_to_vertices, discretize_density, kappa, validate_triplet, Atom, BoxAtom, Interval,
    JumpMeasure, LevyTriplet, ParameterBox, TripletCheck, UncertaintySet, UtilitySpec,
};
pub use optimizer::{
    find_saddle, maximize_robust, maximize_triplet, problem_value, verify_saddle,
    SaddleCertificate, SaddleVerdict, Solution, SolveOptions,
};
pub use polyhedron::{effective_domain, natural_constraints, Halfspace, Polyhedron};
pub use simulator::{
    closed_form_expected_utility, martingale_unit_expectation_check, mc_expected_utility,
    sample_path, terminal_wealth, McEstimate, PathRecord,
};

use serde::{Deserialize, Serialize};

/// Result of validating a problem against the standing assumptions: the
/// feasible set `C ∩ C⁰` must be compact and the finiteness constant finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kappa: f64,
    pub compact: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn is_acceptable(&self) -> bool {
        self.compact && self.kappa.is_finite() && self.messages.is_empty()
    }
}

/// Validates every vertex, the utility and the feasible set, collecting all
/// problems instead of stopping at the first.
pub fn validate(
    theta: &UncertaintySet,
    constraint: &Polyhedron,
    utility: &UtilitySpec,
) -> ValidationReport {
    let mut messages = Vec::new();
    for (k, v) in theta.vertices().iter().enumerate() {
        for msg in validate_triplet(v).violations {
            messages.push(format!("vertex {k}: {msg}"));
        }
    }
    if let Err(e) = utility.validate() {
        messages.push(e.to_string());
    }
    let compact = match effective_domain(constraint, theta) {
        Ok((_, compact)) => {
            if !compact {
                messages.push("feasible set not compact".to_string());
            }
            compact
        }
        Err(e) => {
            messages.push(e.to_string());
            false
        }
    };
    let k = kappa(theta, utility);
    if !k.is_finite() {
        messages.push(format!("finiteness constant K = {k} is not finite"));
    }
    ValidationReport {
        kappa: k,
        compact,
        messages,
    }
}
