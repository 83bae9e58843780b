//! Halfspace polyhedra: the constraint set `C`, the natural constraints
//! `C⁰` and their shrunk versions `C⁰ₙ`, and the effective domain `C ∩ C⁰`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{Interval, UncertaintySet};
use crate::linalg::{dot, norm};
use crate::lp::{Cmp, LinearProgram, LpStatus, Sense};

/// `normalᵀ y ≤ offset`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn slack(&self, y: &[f64]) -> f64 {
        self.offset - dot(&self.normal, y)
    }
}

/// Intersection of finitely many closed halfspaces in `R^d`. An empty list is
/// the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

impl Polyhedron {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if let Some(h) = halfspaces.iter().find(|h| h.normal.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: h.normal.len(),
                context: "halfspace normal",
            });
        }
        if halfspaces
            .iter()
            .any(|h| h.normal.iter().any(|x| !x.is_finite()) || h.offset.is_nan())
        {
            return Err(Error::InvalidInput("halfspace with non-finite data".into()));
        }
        Ok(Self { dim, halfspaces })
    }

    pub fn whole_space(dim: usize) -> Self {
        Self {
            dim,
            halfspaces: Vec::new(),
        }
    }

    /// Axis-aligned box; infinite bounds contribute no halfspace.
    pub fn from_box(bounds: &[Interval]) -> Self {
        let dim = bounds.len();
        let mut halfspaces = Vec::new();
        for (i, iv) in bounds.iter().enumerate() {
            let mut e = vec![0.0; dim];
            if iv.hi.is_finite() {
                e[i] = 1.0;
                halfspaces.push(Halfspace::new(e.clone(), iv.hi));
            }
            if iv.lo.is_finite() {
                e[i] = -1.0;
                halfspaces.push(Halfspace::new(e, -iv.lo));
            }
        }
        Self { dim, halfspaces }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
                context: "polyhedron intersection",
            });
        }
        let mut halfspaces = self.halfspaces.clone();
        halfspaces.extend(other.halfspaces.iter().cloned());
        Ok(Polyhedron {
            dim: self.dim,
            halfspaces,
        })
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(y) >= -tol)
    }

    pub fn contains_origin(&self) -> bool {
        self.halfspaces.iter().all(|h| h.offset >= 0.0)
    }

    /// Every halfspace of `self` is implied by a halfspace of `other` with
    /// the same normal and a smaller or equal offset.
    pub fn is_implied_by(&self, other: &Polyhedron) -> bool {
        self.halfspaces.iter().all(|h| {
            other
                .halfspaces
                .iter()
                .any(|g| g.normal == h.normal && g.offset <= h.offset)
        })
    }

    /// Bounding box from `2d` linear programs `max ±yᵢ`. `Ok(None)` when some
    /// program is unbounded, `Err(Infeasible)` when the polyhedron is empty.
    pub fn bounding_box(&self) -> Result<Option<Vec<Interval>>> {
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut iv = Interval::new(0.0, 0.0);
            for sign in [1.0, -1.0] {
                let mut lp = LinearProgram::new(Sense::Maximize);
                for j in 0..self.dim {
                    lp.var(
                        if j == i { sign } else { 0.0 },
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                    );
                }
                for h in &self.halfspaces {
                    lp.row(h.normal.clone(), Cmp::Le, h.offset);
                }
                match lp.solve()? {
                    LpStatus::Optimal { objective, .. } => {
                        if sign > 0.0 {
                            iv.hi = objective;
                        } else {
                            iv.lo = -objective;
                        }
                    }
                    LpStatus::Unbounded => return Ok(None),
                    LpStatus::Infeasible => return Err(Error::Infeasible),
                }
            }
            out.push(iv);
        }
        Ok(Some(out))
    }

    /// Centre and radius of the largest inscribed ball, with the radius
    /// capped at `cap`.
    pub fn chebyshev_center(&self, cap: f64) -> Result<(Vec<f64>, f64)> {
        let mut lp = LinearProgram::new(Sense::Maximize);
        for _ in 0..self.dim {
            lp.var(0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        let r = lp.var(1.0, 0.0, cap);
        for h in &self.halfspaces {
            let n = norm(&h.normal);
            if n == 0.0 {
                if h.offset < 0.0 {
                    return Err(Error::Infeasible);
                }
                continue;
            }
            let mut row = h.normal.clone();
            row.push(n);
            lp.row(row, Cmp::Le, h.offset);
        }
        match lp.solve()? {
            LpStatus::Optimal { x, .. } => {
                let radius = x[r];
                Ok((x[..self.dim].to_vec(), radius))
            }
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Lp("capped radius program unbounded".into())),
        }
    }

    /// For `d = 1`: the interval `[lo, hi]` (possibly infinite ends).
    pub(crate) fn interval_1d(&self) -> Result<Interval> {
        debug_assert_eq!(self.dim, 1);
        let mut iv = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        for h in &self.halfspaces {
            let a = h.normal[0];
            if a > 0.0 {
                iv.hi = iv.hi.min(h.offset / a);
            } else if a < 0.0 {
                iv.lo = iv.lo.max(h.offset / a);
            } else if h.offset < 0.0 {
                return Err(Error::Infeasible);
            }
        }
        if iv.lo > iv.hi {
            return Err(Error::Infeasible);
        }
        Ok(iv)
    }
}

/// `C⁰` (for `n = None`) or `C⁰ₙ`: one halfspace `-zᵀy ≤ 1` (resp.
/// `≤ 1 - 1/n`) per distinct atom location among the vertices.
pub fn natural_constraints(theta: &UncertaintySet, n: Option<u32>) -> Polyhedron {
    let offset = match n {
        None => 1.0,
        Some(n) => 1.0 - 1.0 / f64::from(n.max(1)),
    };
    let mut locations: Vec<&Vec<f64>> = Vec::new();
    for v in theta.vertices() {
        for atom in v.jumps().atoms() {
            if !locations.contains(&&atom.location) {
                locations.push(&atom.location);
            }
        }
    }
    Polyhedron {
        dim: theta.dim(),
        halfspaces: locations
            .into_iter()
            .map(|z| Halfspace::new(z.iter().map(|x| -x).collect(), offset))
            .collect(),
    }
}

/// `C ∩ C⁰` together with its compactness flag.
pub fn effective_domain(
    constraint: &Polyhedron,
    theta: &UncertaintySet,
) -> Result<(Polyhedron, bool)> {
    if let Some((index, h)) = constraint
        .halfspaces
        .iter()
        .enumerate()
        .find(|(_, h)| !(h.offset >= 0.0))
    {
        return Err(Error::OriginExcluded {
            index,
            offset: h.offset,
        });
    }
    let merged = constraint.intersect(&natural_constraints(theta, None))?;
    let compact = merged.bounding_box()?.is_some();
    Ok((merged, compact))
}
