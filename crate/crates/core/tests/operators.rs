use gapflow::decomposition::trilinear;
use gapflow::grid::{advect, build_masks, cell_inner, divergence, face_inner, gradient, MaskSet};
use gapflow::stokes::{solve_stokes, PenalizedProblem, ProblemData};
use gapflow::{GapGeometry, GridRule, StaggeredGrid, Velocity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graded_grid(n: usize, stretch: f64) -> StaggeredGrid {
    // geometric spacing in x, uniform in y
    let mut xn = vec![0.0];
    let mut h = 1.0;
    for _ in 0..n {
        xn.push(xn.last().unwrap() + h);
        h *= stretch;
    }
    let yn = (0..=n).map(|j| j as f64 / n as f64).collect();
    StaggeredGrid::from_nodes(xn, yn).unwrap()
}

fn stream_velocity(grid: &StaggeredGrid, rng: &mut ChaCha8Rng) -> Velocity {
    let (nx, ny) = (grid.nx(), grid.ny());
    let psi: Vec<f64> = (0..(nx + 1) * (ny + 1))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let at = |i: usize, j: usize| psi[i + (nx + 1) * j];
    let mut w = Velocity::zeros(grid);
    for j in 0..ny {
        for i in 0..=nx {
            w.u[grid.u_index(i, j)] = (at(i, j + 1) - at(i, j)) / grid.dy()[j];
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            w.v[grid.v_index(i, j)] = -(at(i + 1, j) - at(i, j)) / grid.dx()[i];
        }
    }
    w
}

fn interior_velocity(grid: &StaggeredGrid, rng: &mut ChaCha8Rng) -> Velocity {
    let mut w = Velocity::zeros(grid);
    for j in 0..grid.ny() {
        for i in 1..grid.nx() {
            w.u[grid.u_index(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    for j in 1..grid.ny() {
        for i in 0..grid.nx() {
            w.v[grid.v_index(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    w
}

fn abs(w: &Velocity) -> Velocity {
    Velocity {
        u: w.u.iter().map(|x| x.abs()).collect(),
        v: w.v.iter().map(|x| x.abs()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stream_velocities_are_divergence_free(n in 4usize..20, stretch in 0.8f64..1.25, seed: u64) {
        let grid = graded_grid(n, stretch);
        let w = stream_velocity(&grid, &mut ChaCha8Rng::seed_from_u64(seed));
        let scale = w.max_abs() / grid.h_min();
        for d in divergence(&grid, &w) {
            prop_assert!(d.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn advection_is_skew(n in 4usize..20, stretch in 0.8f64..1.25, seed: u64) {
        let grid = graded_grid(n, stretch);
        let masks = MaskSet::all_fluid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = stream_velocity(&grid, &mut rng);
        let w = interior_velocity(&grid, &mut rng);
        let t = trilinear(&grid, &masks, &a, &w, &w);
        let scale = face_inner(&grid, &abs(&advect(&grid, &masks, &a, &w)), &abs(&w));
        prop_assert!(t.abs() <= 1e-12 * scale, "{} vs {}", t, scale);
    }

    #[test]
    fn divergence_and_gradient_are_adjoint(n in 3usize..20, stretch in 0.8f64..1.25, seed: u64) {
        let grid = graded_grid(n, stretch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = interior_velocity(&grid, &mut rng);
        let p: Vec<f64> = (0..grid.n_cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = cell_inner(&grid, &divergence(&grid, &u), &p);
        let rhs = face_inner(&grid, &u, &gradient(&grid, &p));
        let scale = lhs.abs() + rhs.abs() + 1.0;
        prop_assert!((lhs + rhs).abs() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn couette_is_reproduced(n in 16usize..48, lid in -3.0f64..3.0) {
        let grid = StaggeredGrid::uniform([0.0, 0.0], [1.0, 1.0], n).unwrap();
        let masks = MaskSet::all_fluid(&grid);
        let data = ProblemData::from_regions(&grid, &masks, |_, x| [lid * x[1], 0.0]);
        let prob = PenalizedProblem { grid: grid.clone(), masks, mu: 1.0, eta: 1e-8, data };
        let (field, _) = solve_stokes(&prob, 1e-10, 200).unwrap();
        for j in 0..grid.ny() {
            for i in 1..grid.nx() {
                let y = grid.u_position(i, j)[1];
                prop_assert!((field.velocity.u[grid.u_index(i, j)] - lid * y).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn skew_symmetry_holds_with_particles() {
    let geom = GapGeometry::unit_disks(2, 0.2).unwrap();
    let grid = GridRule::default().build(&geom).unwrap();
    let masks = build_masks(&geom, &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = stream_velocity(&grid, &mut rng);
    let mut w = interior_velocity(&grid, &mut rng);
    for (x, m) in w.u.iter_mut().zip(&masks.u) {
        if *m != gapflow::Region::Fluid {
            *x = 0.0;
        }
    }
    for (x, m) in w.v.iter_mut().zip(&masks.v) {
        if *m != gapflow::Region::Fluid {
            *x = 0.0;
        }
    }
    let t = trilinear(&grid, &masks, &a, &w, &w);
    let scale = face_inner(&grid, &abs(&advect(&grid, &masks, &a, &w)), &abs(&w));
    assert!(t.abs() <= 1e-12 * scale);
}
