//! Thin wrapper over `microlp` for the small dense linear programs used by
//! the polyhedron checks and optimality certificates.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpStatus {
    Optimal { objective: f64, x: Vec<f64> },
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

impl LinearProgram {
    pub(crate) fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            bounds: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub(crate) fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    /// Adds `coeffs · x (cmp) rhs`; `coeffs` is dense over the variables
    /// declared so far (shorter rows are zero-padded).
    pub(crate) fn row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        self.rows.push((coeffs, cmp, rhs));
    }

    pub(crate) fn solve(&self) -> Result<LpStatus> {
        let direction = match self.sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut problem = Problem::new(direction);
        let vars: Vec<_> = self
            .objective
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| problem.add_var(c, b))
            .collect();
        for (coeffs, cmp, rhs) in &self.rows {
            let expr: Vec<_> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, &c)| (vars[i], c))
                .collect();
            let op = match cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr.as_slice(), op, *rhs);
        }
        match problem.solve() {
            Ok(outcome) => {
                let solution = outcome
                    .into_solution()
                    .map_err(|_| Error::Lp("solve interrupted".into()))?;
                Ok(LpStatus::Optimal {
                    objective: solution.objective(),
                    x: vars.iter().map(|&v| solution.var_value(v)).collect(),
                })
            }
            Err(microlp::Error::Unbounded) => Ok(LpStatus::Unbounded),
            Err(microlp::Error::Infeasible) => Ok(LpStatus::Infeasible),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }
}
