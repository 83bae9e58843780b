//! Random instances and independent oracles shared by the integration tests.
//!
//! The oracles here never call the library's optimizer: single-triplet
//! maximization is nested golden-section search over the polytope, and the
//! inf-sup value is a simplex-grid minimum refined by zooming.

#![allow(dead_code)]

pub mod props;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlp_core::{
    effective_domain, gfunc, Atom, ExtendedReal, Interval, JumpMeasure, LevyTriplet, Polyhedron,
    UncertaintySet, UtilitySpec,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_utility(rng: &mut ChaCha8Rng) -> UtilitySpec {
    match rng.random_range(0..3) {
        0 => UtilitySpec::Log,
        1 => UtilitySpec::power(0.5).unwrap(),
        _ => UtilitySpec::power(-1.0).unwrap(),
    }
}

pub fn random_triplet(rng: &mut ChaCha8Rng, d: usize, max_atoms: usize) -> LevyTriplet {
    let drift: Vec<f64> = (0..d).map(|_| rng.random_range(-0.02..0.15)).collect();
    let l = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.2..0.2));
    let c = &l * l.transpose() + DMatrix::identity(d, d) * rng.random_range(0.01..0.05);
    let n_atoms = rng.random_range(0..=max_atoms);
    let mut atoms = Vec::new();
    for _ in 0..n_atoms {
        let z: Vec<f64> = loop {
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-0.6..0.8)).collect();
            if z.iter().map(|x| x * x).sum::<f64>().sqrt() > 0.05 {
                break z;
            }
        };
        atoms.push(Atom::new(rng.random_range(0.05..0.5), z));
    }
    LevyTriplet::checked(drift, c, JumpMeasure::new(atoms)).unwrap()
}

pub struct Instance {
    pub theta: UncertaintySet,
    pub feasible: Polyhedron,
    pub utility: UtilitySpec,
}

/// `d ≤ 2`, at most `max_vertices` vertices, a box constraint containing the
/// origin intersected with the natural constraints.
pub fn random_instance(rng: &mut ChaCha8Rng, max_vertices: usize) -> Instance {
    let d = rng.random_range(1..=2);
    let k = rng.random_range(1..=max_vertices);
    let vertices = (0..k).map(|_| random_triplet(rng, d, 2)).collect();
    let theta = UncertaintySet::new(vertices).unwrap();
    let bounds: Vec<Interval> = (0..d)
        .map(|_| Interval::new(-rng.random_range(0.0..1.0), rng.random_range(1.0..3.0)))
        .collect();
    let (feasible, compact) = effective_domain(&Polyhedron::from_box(&bounds), &theta).unwrap();
    assert!(compact);
    Instance {
        theta,
        feasible,
        utility: random_utility(rng),
    }
}

/// A point strictly inside `C⁰₄` of the triplet's atoms, within `[-1.5, 2.5]^d`.
pub fn random_interior_pi(rng: &mut ChaCha8Rng, triplet: &LevyTriplet) -> Vec<f64> {
    loop {
        let pi: Vec<f64> = (0..triplet.dim())
            .map(|_| rng.random_range(-1.5..2.5))
            .collect();
        let inside = triplet.jumps().atoms().iter().all(|a| {
            let s: f64 = pi.iter().zip(&a.location).map(|(p, z)| p * z).sum();
            s > -1.0 + 0.25
        });
        if inside {
            return pi;
        }
    }
}

fn value(triplet: &LevyTriplet, y: &[f64], u: &UtilitySpec) -> f64 {
    gfunc::g_value(triplet, y, u)
        .unwrap_or(ExtendedReal::NegInfinity)
        .to_f64()
}

/// Golden-section maximum of a concave function on `[lo, hi]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut best = f(lo).max(f(hi)).max(f(0.5 * (lo + hi)));
    for _ in 0..64 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        let (f1, f2) = (f(x1), f(x2));
        best = best.max(f1).max(f2);
        if f1 < f2 || (f1 == f64::NEG_INFINITY && f2 == f64::NEG_INFINITY && x2 < 0.0) {
            a = x1;
        } else {
            b = x2;
        }
    }
    best
}

/// Interval of `yⱼ` with the other coordinates fixed.
fn section(poly: &Polyhedron, fixed: &[f64], free: usize) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for h in poly.halfspaces() {
        let rest: f64 = h
            .normal
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != free)
            .map(|(i, a)| a * fixed[i])
            .sum();
        let a = h.normal[free];
        let rhs = h.offset - rest;
        if a > 0.0 {
            hi = hi.min(rhs / a);
        } else if a < 0.0 {
            lo = lo.max(rhs / a);
        } else if rhs < 0.0 {
            return None;
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// `sup_y g^θ(y)` over a compact polytope in one or two dimensions.
pub fn oracle_sup(triplet: &LevyTriplet, poly: &Polyhedron, u: &UtilitySpec) -> f64 {
    match triplet.dim() {
        1 => {
            let (lo, hi) = section(poly, &[0.0], 0).expect("nonempty");
            golden_max(|x| value(triplet, &[x], u), lo, hi)
        }
        2 => {
            let bb = poly.bounding_box().unwrap().unwrap();
            golden_max(
                |x| match section(poly, &[x, 0.0], 1) {
                    Some((lo, hi)) => golden_max(|y| value(triplet, &[x, y], u), lo, hi),
                    None => f64::NEG_INFINITY,
                },
                bb[0].lo,
                bb[0].hi,
            )
        }
        d => panic!("oracle supports d <= 2, got {d}"),
    }
}

/// Points of the simplex lattice `{w | wᵢ = nᵢ/m}`.
fn lattice(k: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&n| n as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for n in 0..=left {
            cur.push(n);
            rec(k - 1, left - n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, m, &mut Vec::new(), &mut out);
    out
}

/// Largest lattice resolution with at most `budget` points.
fn resolution(k: usize, budget: usize) -> usize {
    let mut m = 1;
    while lattice(k, m + 1).len() <= budget {
        m += 1;
    }
    m
}

pub struct GridEstimate {
    pub value: f64,
    pub weights: Vec<f64>,
    pub coarse_value: f64,
    pub evaluations: usize,
}

/// `inf_w sup_y g^{θ(w)}(y)` estimated on a simplex grid of at most `budget`
/// mixtures, then refined by zoomed grids (also at most `budget` points)
/// around the incumbent until the spacing drops below `min_spacing`.
pub fn grid_inf_sup(inst: &Instance, budget: usize, min_spacing: f64) -> GridEstimate {
    let k = inst.theta.len();
    let phi = |w: &[f64]| {
        let mix = inst.theta.mixture(w).unwrap();
        oracle_sup(&mix, &inst.feasible, &inst.utility)
    };
    if k == 1 {
        let v = phi(&[1.0]);
        return GridEstimate {
            value: v,
            weights: vec![1.0],
            coarse_value: v,
            evaluations: 1,
        };
    }
    let m = resolution(k, budget);
    let mut evaluations = 0;
    let mut best = (f64::INFINITY, vec![]);
    for w in lattice(k, m) {
        evaluations += 1;
        let v = phi(&w);
        if v < best.0 {
            best = (v, w);
        }
    }
    let coarse_value = best.0;
    let per_axis = ((budget as f64).powf(1.0 / (k - 1) as f64).floor() as usize).max(3);
    let mut spacing = 1.0 / m as f64;
    while spacing > min_spacing {
        let half = 1.5 * spacing;
        let step = 2.0 * half / (per_axis - 1) as f64;
        let centre = best.1.clone();
        let mut idx = vec![0usize; k - 1];
        'grid: loop {
            let mut w: Vec<f64> = (0..k - 1)
                .map(|i| centre[i] - half + step * idx[i] as f64)
                .collect();
            let rest = 1.0 - w.iter().sum::<f64>();
            if w.iter().all(|x| *x >= 0.0) && rest >= 0.0 {
                w.push(rest);
                evaluations += 1;
                let v = phi(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
            for i in idx.iter_mut() {
                *i += 1;
                if *i < per_axis {
                    continue 'grid;
                }
                *i = 0;
            }
            break;
        }
        spacing = step;
    }
    GridEstimate {
        value: best.0,
        weights: best.1,
        coarse_value,
        evaluations,
    }
}
