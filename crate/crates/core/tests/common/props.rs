//! Invariant checks driven by a seed, shared by the proptest suite and the
//! acceptance harness. Each returns `Err` with a description on violation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rlp_core::linalg::{lerp, norm};
use rlp_core::optimizer::stationarity_residual;
use rlp_core::{
    compile_box_to_vertices, eval_g_robust, gfunc, maximize_robust, mc_expected_utility,
    natural_constraints, problem_value, supergradient, BoxAtom, ExtendedReal, Interval,
    LevyTriplet, ParameterBox, SolveOptions, UtilitySpec,
};

use super::{random_instance, random_triplet, random_utility, rng, Instance};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn g(t: &LevyTriplet, y: &[f64], u: &UtilitySpec) -> f64 {
    gfunc::g_value(t, y, u).unwrap().to_f64()
}

/// A point of the feasible set with every `1 + yᵀz ≥ 0.1`.
fn interior_point(rng: &mut ChaCha8Rng, inst: &Instance) -> Vec<f64> {
    let bb = inst.feasible.bounding_box().unwrap().unwrap();
    loop {
        let y: Vec<f64> = bb
            .iter()
            .map(|iv| rng.random_range(iv.lo..=iv.hi))
            .collect();
        let margin = inst.theta.vertices().iter().all(|v| {
            v.jumps()
                .atoms()
                .iter()
                .all(|a| 1.0 + y.iter().zip(&a.location).map(|(p, z)| p * z).sum::<f64>() >= 0.1)
        });
        if margin && inst.feasible.contains(&y, 0.0) {
            return y;
        }
    }
}

pub fn concavity(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 3);
    let (a, b) = (
        interior_point(&mut rng, &inst),
        interior_point(&mut rng, &inst),
    );
    let t: f64 = rng.random_range(0.0..=1.0);
    let robust = |y: &[f64]| {
        eval_g_robust(&inst.theta, y, &inst.utility)
            .unwrap()
            .0
            .to_f64()
    };
    let (ga, gb, gm) = (robust(&a), robust(&b), robust(&lerp(&a, &b, t)));
    let chord = (1.0 - t) * ga + t * gb;
    ensure(gm >= chord - 1e-12 * (1.0 + ga.abs() + gb.abs()), || {
        format!("g(mid) = {gm} below chord {chord} (seed {seed})")
    })
}

pub fn linearity_in_theta(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 4);
    let y = interior_point(&mut rng, &inst);
    let raw: Vec<f64> = (0..inst.theta.len())
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mixed = g(&inst.theta.mixture(&w).unwrap(), &y, &inst.utility);
    let parts: Vec<f64> = inst
        .theta
        .vertices()
        .iter()
        .map(|v| g(v, &y, &inst.utility))
        .collect();
    let combo: f64 = parts.iter().zip(&w).map(|(p, w)| p * w).sum();
    let scale = 1.0 + parts.iter().map(|p| p.abs()).sum::<f64>();
    ensure((mixed - combo).abs() <= 1e-12 * scale, || {
        format!("g of mixture {mixed} vs mixture of g {combo} (seed {seed})")
    })
}

/// Adding a convex combination of existing vertices leaves the envelope and
/// the robust optimum unchanged.
pub fn vertex_reduction(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 3);
    let w: Vec<f64> = {
        let raw: Vec<f64> = (0..inst.theta.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    };
    let extra = inst.theta.mixture(&w).unwrap();
    let bigger = inst.theta.with_vertex(extra).unwrap();
    let y = interior_point(&mut rng, &inst);
    let e0 = eval_g_robust(&inst.theta, &y, &inst.utility)
        .unwrap()
        .0
        .to_f64();
    let e1 = eval_g_robust(&bigger, &y, &inst.utility)
        .unwrap()
        .0
        .to_f64();
    ensure((e0 - e1).abs() <= 1e-12 * (1.0 + e0.abs()), || {
        format!("envelope changed {e0} -> {e1} (seed {seed})")
    })?;
    let opts = SolveOptions::default();
    let v0 = maximize_robust(&inst.theta, &inst.feasible, &inst.utility, &opts)
        .unwrap()
        .robust_g;
    let v1 = maximize_robust(&bigger, &inst.feasible, &inst.utility, &opts)
        .unwrap()
        .robust_g;
    ensure((v0 - v1).abs() <= 10.0 * opts.value_tol, || {
        format!("robust value changed {v0} -> {v1} (seed {seed})")
    })
}

/// Analytic supergradient against a central difference with step `1e-6`.
pub fn gradient_matches_finite_differences(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 1);
    let t = &inst.theta.vertices()[0];
    let y = interior_point(&mut rng, &inst);
    let grad = supergradient(t, &y, &inst.utility).unwrap();
    let h = 1e-6;
    let fd: Vec<f64> = (0..y.len())
        .map(|i| {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[i] += h;
            dn[i] -= h;
            (g(t, &up, &inst.utility) - g(t, &dn, &inst.utility)) / (2.0 * h)
        })
        .collect();
    let err: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let rel = norm(&err) / norm(&grad).max(1e-3);
    ensure(rel <= 1e-5, || {
        format!("gradient {grad:?} vs finite difference {fd:?}, rel {rel:e} (seed {seed})")
    })
}

pub fn zero_at_origin(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 4);
    let origin = vec![0.0; inst.theta.dim()];
    for v in inst.theta.vertices() {
        let val = gfunc::g_value(v, &origin, &inst.utility).unwrap();
        ensure(val == ExtendedReal::ZERO, || {
            format!("g(0) = {val} (seed {seed})")
        })?;
    }
    Ok(())
}

/// `C⁰ₙ ⊆ C⁰ₙ₊₁ ⊆ C⁰`, checked structurally and on sampled points.
pub fn shrunk_constraints_nest(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 3);
    let full = natural_constraints(&inst.theta, None);
    let n: u32 = rng.random_range(1..200);
    let inner = natural_constraints(&inst.theta, Some(n));
    let outer = natural_constraints(&inst.theta, Some(n + 1));
    ensure(
        outer.is_implied_by(&inner) && full.is_implied_by(&outer),
        || format!("C0_{n} not nested (seed {seed})"),
    )?;
    for _ in 0..64 {
        let y: Vec<f64> = (0..inst.theta.dim())
            .map(|_| rng.random_range(-4.0..4.0))
            .collect();
        if inner.contains(&y, 0.0) && !outer.contains(&y, 0.0) {
            return Err(format!(
                "{y:?} in C0_{n} but not C0_{} (seed {seed})",
                n + 1
            ));
        }
        if outer.contains(&y, 0.0) && !full.contains(&y, 0.0) {
            return Err(format!("{y:?} in C0_{} but not C0 (seed {seed})", n + 1));
        }
    }
    Ok(())
}

/// Enlarging Θ can only lower the robust value.
pub fn monotone_in_theta(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 2);
    let extra = random_triplet(&mut rng, inst.theta.dim(), 2);
    let bigger = inst.theta.with_vertex(extra).unwrap();
    let c = inst.feasible.clone();
    let (feasible_big, _) = rlp_core::effective_domain(&c, &bigger).unwrap();
    let opts = SolveOptions::default();
    let small = maximize_robust(&inst.theta, &inst.feasible, &inst.utility, &opts).unwrap();
    let big = maximize_robust(&bigger, &feasible_big, &inst.utility, &opts).unwrap();
    ensure(
        big.robust_g <= small.robust_g + 10.0 * opts.value_tol,
        || {
            format!(
                "value rose {} -> {} (seed {seed})",
                small.robust_g, big.robust_g
            )
        },
    )
}

/// Problem value under initial wealth `x₀`: `log x₀ + V(1)` or `x₀^p V(1)`.
pub fn initial_wealth_scaling(seed: u64) -> Check {
    let mut rng = rng(seed);
    let u = random_utility(&mut rng);
    let gval: f64 = rng.random_range(-0.2..0.5);
    let x0: f64 = rng.random_range(0.1..100.0);
    let horizon: f64 = rng.random_range(0.1..5.0);
    let one = problem_value(gval, &u, 1.0, horizon);
    let scaled = problem_value(gval, &u, x0, horizon);
    let expected = match u {
        UtilitySpec::Log => x0.ln() + one,
        UtilitySpec::Power { p, .. } => x0.powf(p) * one,
    };
    ensure(
        (scaled - expected).abs() <= 1e-13 * (1.0 + expected.abs()),
        || format!("V(x0) = {scaled}, expected {expected} (seed {seed})"),
    )
}

/// Same inputs give bit-identical optimizer and simulator output, whatever
/// the size of the thread pool.
pub fn deterministic(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 3);
    let opts = SolveOptions {
        seed,
        ..SolveOptions::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let sol = maximize_robust(&inst.theta, &inst.feasible, &inst.utility, &opts).unwrap();
            let t = &inst.theta.vertices()[0];
            let mc =
                mc_expected_utility(t, &sol.y_hat, &inst.utility, 1.0, 1.0, 4000, seed).unwrap();
            (sol.y_hat, sol.robust_g, mc)
        })
    };
    let (a, b) = (run(1), run(4));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(
        bits(&a.0) == bits(&b.0) && a.1.to_bits() == b.1.to_bits(),
        || format!("optimizer output differs across pools (seed {seed})"),
    )?;
    ensure(
        a.2.mean == b.2.mean && a.2.stderr.to_bits() == b.2.stderr.to_bits(),
        || format!("simulator output differs across pools (seed {seed})"),
    )
}

/// First-order optimality of ŷ: the L1 stationarity residual over active
/// vertices and binding facets is at most `1e-6`.
pub fn normal_cone_certificate(seed: u64) -> Check {
    let mut rng = rng(seed);
    let inst = random_instance(&mut rng, 3);
    let sol = maximize_robust(
        &inst.theta,
        &inst.feasible,
        &inst.utility,
        &SolveOptions::default(),
    )
    .unwrap();
    match stationarity_residual(&inst.theta, &inst.feasible, &inst.utility, &sol.y_hat).unwrap() {
        Some(r) => ensure(r <= 1e-6, || {
            format!("residual {r:e} at {:?} (seed {seed})", sol.y_hat)
        }),
        None => Err(format!(
            "no active gradient at {:?} (seed {seed})",
            sol.y_hat
        )),
    }
}

/// For a parameter box, `g` at any interior parameter choice is at least the
/// minimum over the compiled corners, and the midpoint parameters equal the
/// corner average.
pub fn box_corners_bound_interior(seed: u64) -> Check {
    let mut rng = rng(seed);
    let u = random_utility(&mut rng);
    let iv = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        Interval::new(a.min(b), a.max(b))
    };
    let spec = ParameterBox {
        drift: vec![iv(&mut rng, -0.05, 0.2)],
        diffusion_base: nalgebra::DMatrix::identity(1, 1),
        diffusion_scale: iv(&mut rng, 0.0, 0.1),
        atoms: vec![BoxAtom {
            location: vec![rng.random_range(-0.5..0.8)],
            rate: iv(&mut rng, 0.0, 0.5),
        }],
    };
    let theta = compile_box_to_vertices(&spec).unwrap();
    let y = [rng.random_range(-1.0..1.5)];
    if 1.0 + y[0] * spec.atoms[0].location[0] <= 0.1 {
        return Ok(());
    }
    let pick =
        |rng: &mut ChaCha8Rng, i: Interval| rng.random_range(0.0..=1.0) * (i.hi - i.lo) + i.lo;
    let inner = LevyTriplet::scalar(
        pick(&mut rng, spec.drift[0]),
        pick(&mut rng, spec.diffusion_scale),
        &[(
            pick(&mut rng, spec.atoms[0].rate),
            spec.atoms[0].location[0],
        )],
    )
    .unwrap();
    let corner_min = eval_g_robust(&theta, &y, &u).unwrap().0.to_f64();
    let inside = g(&inner, &y, &u);
    ensure(inside >= corner_min - 1e-12, || {
        format!("interior {inside} below corner minimum {corner_min} (seed {seed})")
    })?;
    let k = theta.len();
    let avg: f64 = theta.vertices().iter().map(|v| g(v, &y, &u)).sum::<f64>() / k as f64;
    let mid = LevyTriplet::scalar(
        0.5 * (spec.drift[0].lo + spec.drift[0].hi),
        0.5 * (spec.diffusion_scale.lo + spec.diffusion_scale.hi),
        &[(
            0.5 * (spec.atoms[0].rate.lo + spec.atoms[0].rate.hi),
            spec.atoms[0].location[0],
        )],
    )
    .unwrap();
    let gm = g(&mid, &y, &u);
    ensure((gm - avg).abs() <= 1e-12 * (1.0 + avg.abs()), || {
        format!("midpoint {gm} vs corner average {avg} (seed {seed})")
    })
}

/// All property checks by name.
pub type Property = (&'static str, fn(u64) -> Check);

pub const ALL: &[Property] = &[
    ("concavity in y", concavity),
    ("linearity in theta", linearity_in_theta),
    ("vertex reduction", vertex_reduction),
    (
        "supergradient vs finite differences",
        gradient_matches_finite_differences,
    ),
    ("g(0) = 0", zero_at_origin),
    ("shrunk natural constraints nest", shrunk_constraints_nest),
    ("monotone in theta", monotone_in_theta),
    ("initial wealth scaling", initial_wealth_scaling),
    ("determinism across thread pools", deterministic),
    ("normal cone certificate", normal_cone_certificate),
    ("box corners bound interior", box_corners_bound_interior),
];
