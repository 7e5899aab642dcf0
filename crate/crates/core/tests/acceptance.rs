//! Acceptance run: one PASS/FAIL line per criterion. Exits with status 1 when
//! any criterion fails.

use std::time::{Duration, Instant};

use gapflow::experiments::{
    default_geometries, grid_change, invariant_suite, invariant_suite_with, residual_ratio_max,
    run_sweep, solve_case, CheckStatus, Mutation,
};
use gapflow::grid::MaskSet;
use gapflow::rates::{all_quantities, epsilon_exponent, fitted_exponent};
use gapflow::stokes::{solve_stokes, PenalizedProblem, ProblemData};
use gapflow::{
    aux_field, predicted_lower, predicted_upper, GapGeometry, GridRule, PhysicsMode, Quantity,
    RunConfig, StaggeredGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.2} s]", o.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            o.passed = false;
            o.detail = format!("{} exceeds the {} s budget", o.detail, limit.as_secs());
        }
    }
    o
}

fn neck_point(geom: &GapGeometry, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = geom.neck_radius();
    let rho = r * rng.random_range(0.0f64..1.0).sqrt();
    let th = rng.random_range(0.0..std::f64::consts::TAU);
    let xp = [rho * th.cos(), rho * th.sin()];
    let top = geom.upper_boundary(&xp).unwrap();
    let bottom = geom.lower_boundary(&xp).unwrap();
    // keep the difference stencil inside the gap
    vec![
        xp[0],
        xp[1],
        bottom + rng.random_range(0.01..0.99) * (top - bottom),
    ]
}

fn cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lines = Vec::new();
    let mut ok = true;
    for eps in [1e-2, 1e-3] {
        let geom = GapGeometry::quadratic(3, eps, 1.0).unwrap();
        let f = aux_field(&geom, 1, 3, 1.0).unwrap();
        let (mut exact, mut fd, mut floor) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..1000 {
            let x = neck_point(&geom, &mut rng);
            exact = exact.max(f.vertical_cancellation(&x).unwrap().abs());
            let h = 1e-3 * geom.gap_width(&x[..2]).unwrap();
            fd = fd.max(f.vertical_cancellation_fd(&x, h).unwrap().abs());
            // rounding of the stencil inputs, amplified by 1/h^2 and 1/h
            let v3 = f.value(&x).unwrap()[2].abs();
            let p = f.pressure(&x).unwrap().abs();
            floor = floor.max(f64::EPSILON * (4.0 * v3 / (h * h) + p / h));
        }
        ok &= exact < 1e-9 && fd < 1e-6;
        lines.push(format!(
            "eps={eps:e}: closed form {exact:.2e} (< 1e-9), differences {fd:.2e} (< 1e-6, rounding floor {floor:.1e})"
        ));
    }
    outcome(ok, lines.join("; "))
}

fn fields_suite() -> Outcome {
    let geoms = [
        GapGeometry::quadratic(2, 1e-2, 1.0).unwrap(),
        GapGeometry::quadratic(3, 1e-2, 1.0).unwrap(),
    ];
    let rep = invariant_suite(&geoms, 2);
    let mut ok = true;
    let mut lines = Vec::new();
    for name in ["divergence_free", "boundary_trace"] {
        for e in rep.entries_named(name) {
            ok &= e.status == CheckStatus::Pass;
            lines.push(format!(
                "{name} {}: {:.2e} (< {:e}, {} samples)",
                e.geometry, e.worst, e.threshold, e.samples
            ));
        }
    }
    outcome(ok, lines.join("; "))
}

fn residual_stability() -> Outcome {
    let at = |eps| residual_ratio_max(&GapGeometry::quadratic(3, eps, 1.0).unwrap(), 1, 3);
    match (at(1e-2), at(1e-3)) {
        (Ok(a), Ok(b)) => {
            let spread = a.max(b) / a.min(b);
            outcome(spread < 2.0, format!("max |f| delta^2/(|x'|+delta): {a:.4} at 1e-2, {b:.4} at 1e-3, spread {spread:.3} (< 2)"))
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

fn couette() -> Outcome {
    let grid = StaggeredGrid::uniform([0.0, 0.0], [1.0, 1.0], 128).unwrap();
    let masks = MaskSet::all_fluid(&grid);
    let data = ProblemData::from_regions(&grid, &masks, |_, x| [x[1], 0.0]);
    let prob = PenalizedProblem {
        grid: grid.clone(),
        masks,
        mu: 1.0,
        eta: 1e-8,
        data,
    };
    match solve_stokes(&prob, 1e-10, 200) {
        Ok((field, _)) => {
            let mut err = field.velocity.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for j in 0..grid.ny() {
                for i in 0..=grid.nx() {
                    let exact = grid.u_position(i, j)[1];
                    err = err.max((field.velocity.u[grid.u_index(i, j)] - exact).abs());
                }
            }
            outcome(
                err < 1e-6,
                format!("couette n=128 max error {err:.2e} (< 1e-6)"),
            )
        }
        Err(e) => outcome(false, format!("couette: {e}")),
    }
}

fn solver_sanity() -> Outcome {
    let mut parts = vec![couette()];

    let ops = invariant_suite(&[], 9);
    for name in ["skew_symmetry", "adjointness"] {
        for e in ops.entries_named(name) {
            parts.push(outcome(
                e.status == CheckStatus::Pass,
                format!("{name} {:.2e} (< 1e-12)", e.worst),
            ));
        }
    }

    let cfg = RunConfig::desk_sweep(PhysicsMode::Stokes);
    parts.push(match grid_change(&cfg, 0.2) {
        Ok(c) => outcome(
            c < 0.05,
            format!("grid change at eps=0.2 {:.2}% (< 5%)", 100.0 * c),
        ),
        Err(e) => outcome(false, format!("grid change: {e}")),
    });

    // the solver clamps eta to 1e-6 h_min^2 / mu, so halve the effective value
    let geom = cfg.geometry.build(0.2).unwrap();
    let h = GridRule::default().build(&geom).unwrap().h_min();
    let eta = cfg.eta.min(1e-6 * h * h / cfg.mu);
    let with_eta = |eta: f64| {
        let mut c = cfg.clone();
        c.eta = eta;
        solve_case(&c, 0.2).map(|o| o.row.max_gradient)
    };
    parts.push(match (with_eta(eta), with_eta(0.5 * eta)) {
        (Ok(a), Ok(b)) => {
            let change = (a - b).abs() / a.abs();
            outcome(
                change < 0.01,
                format!(
                    "eta {eta:.2e} -> {:.2e}: gradient change {:.4}% (< 1%)",
                    0.5 * eta,
                    100.0 * change
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("eta halving: {e}")),
    });

    let passed = parts.iter().all(|o| o.passed);
    outcome(
        passed,
        parts
            .into_iter()
            .map(|o| o.detail)
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn rate_oracle() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let spots = [
        (
            "grad_u 2d eps=0.01",
            predicted_upper(Quantity::GradU, 2, 0.01, &[0.0]),
            10.0,
        ),
        (
            "grad_u 3d eps=0.01",
            predicted_upper(Quantity::GradU, 3, 0.01, &[0.0, 0.0]),
            21.7147,
        ),
        (
            "pressure 2d eps=0.04",
            predicted_upper(Quantity::PressureOsc, 2, 0.04, &[0.0]),
            5.0,
        ),
        ("lower 3d eps=0.01", predicted_lower(3, 0.01), 21.7147),
        ("lower 2d eps=0.25", predicted_lower(2, 0.25), 2.0),
    ];
    let n_spots = spots.len();
    for (name, got, want) in spots {
        let got = got.unwrap_or(f64::NAN);
        let good = (got - want).abs() < 1e-4;
        ok &= good;
        if !good {
            lines.push(format!("{name}: {got} vs {want}"));
        }
    }
    lines.push(format!("{n_spots} spot values"));
    let mut worst = 0.0f64;
    let mut count = 0;
    for dim in [2, 3] {
        for q in all_quantities(dim) {
            let want = epsilon_exponent(q, dim).unwrap();
            let got = fitted_exponent(q, dim, 2f64.powi(-100)).unwrap_or(f64::NAN);
            let dev = (got - want).abs();
            ok &= dev < 0.02;
            worst = worst.max(dev);
            count += 1;
        }
    }
    lines.push(format!("{count} fitted exponents over eps in [2^-100/10, 2^-100], worst deviation {worst:.4} (< 0.02)"));
    outcome(ok, lines.join("; "))
}

fn main() {
    let mut results: Vec<(u8, Outcome)> = Vec::new();
    results.push((1, timed(Some(Duration::from_secs(1)), cancellation)));
    results.push((2, timed(Some(Duration::from_secs(10)), fields_suite)));
    results.push((3, timed(Some(Duration::from_secs(30)), residual_stability)));

    let start = Instant::now();
    let sweep = run_sweep(&RunConfig::desk_sweep(PhysicsMode::NavierStokes));
    let sweep_time = start.elapsed().as_secs_f64();
    match sweep {
        Ok(rep) => {
            for f in &rep.failures {
                println!("note: eps={:e} failed in {}: {}", f.eps, f.stage, f.message);
            }
            for s in &rep.skipped {
                println!("note: skipped {s}");
            }
            for c in 4..=8u8 {
                let o = match rep.verdicts.iter().find(|v| v.criterion == c) {
                    Some(v) => outcome(
                        v.passed,
                        format!("{}: {} [sweep {sweep_time:.1} s]", v.name, v.detail),
                    ),
                    None => outcome(false, "no verdict produced".into()),
                };
                results.push((c, o));
            }
        }
        Err(e) => {
            for c in 4..=8u8 {
                results.push((c, outcome(false, format!("sweep failed: {e}"))));
            }
        }
    }

    results.push((9, timed(Some(Duration::from_secs(300)), solver_sanity)));
    results.push((10, timed(None, rate_oracle)));

    // the identity check must be able to fail
    let mutated = invariant_suite_with(&default_geometries()[2..3], 1, Mutation::FlipPressure);
    let caught = mutated
        .entries_named("cancellation_identity")
        .any(|e| e.status == CheckStatus::Fail);
    println!("note: flipped-pressure mutant caught by the cancellation check: {caught}");

    let mut failed = 0;
    for (c, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {c:>2} {tag}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 || !caught {
        std::process::exit(1);
    }
}
