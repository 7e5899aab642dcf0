use gapflow::keller::RigidMode;
use gapflow::{aux_field, keller, keller_gradient, GapGeometry};
use proptest::prelude::*;

fn neck_point(geom: &GapGeometry, xp: &[f64], t: f64) -> Vec<f64> {
    let top = geom.upper_boundary(xp).unwrap();
    let bottom = geom.lower_boundary(xp).unwrap();
    let mut x = xp.to_vec();
    x.push(bottom + t * (top - bottom));
    x
}

fn horizontal(dim: usize, r: f64, a: f64, b: f64) -> Vec<f64> {
    if dim == 2 {
        vec![r * (2.0 * a - 1.0)]
    } else {
        let rho = r * a.sqrt();
        let th = std::f64::consts::TAU * b;
        vec![rho * th.cos(), rho * th.sin()]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn keller_is_linear_across_the_gap(
        dim in 2usize..4, log_eps in -4.0f64..-1.0, kappa in 0.5f64..3.0,
        a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0,
    ) {
        let geom = GapGeometry::quadratic(dim, 10f64.powf(log_eps), kappa).unwrap();
        let xp = horizontal(dim, geom.neck_radius(), a, b);
        let x = neck_point(&geom, &xp, t);
        let k = keller(&geom, &x).unwrap();
        prop_assert!((k - (t - 0.5)).abs() < 1e-12);
        // d k / d x_d = 1 / delta
        let g = keller_gradient(&geom, &x).unwrap();
        let delta = geom.gap_width(&xp).unwrap();
        prop_assert!((g[dim - 1] * delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_width_is_eps_plus_both_heights(dim in 2usize..4, log_eps in -4.0f64..-1.0, kappa in 0.5f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let eps = 10f64.powf(log_eps);
        let geom = GapGeometry::quadratic(dim, eps, kappa).unwrap();
        let xp = horizontal(dim, geom.neck_radius(), a, b);
        let r2: f64 = xp.iter().map(|x| x * x).sum();
        let delta = geom.gap_width(&xp).unwrap();
        prop_assert!((delta - (eps + kappa * r2)).abs() <= 1e-14 * delta.max(1.0));
    }

    #[test]
    fn fields_are_solenoidal_and_match_traces(
        dim in 2usize..4, log_eps in -3.0f64..-1.0, i in 1u8..3, alpha_pick in 0usize..6,
        a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0,
    ) {
        let geom = GapGeometry::quadratic(dim, 10f64.powf(log_eps), 1.0).unwrap();
        let alpha = 1 + alpha_pick % RigidMode::count(dim);
        let f = aux_field(&geom, i, alpha, 1.0).unwrap();
        let xp = horizontal(dim, geom.neck_radius(), a, b);
        let x = neck_point(&geom, &xp, t);
        let grad = f.gradient(&x).unwrap();
        let scale = grad.iter().flatten().fold(1.0f64, |m, g| m.max(g.abs()));
        prop_assert!(f.divergence(&x).unwrap().abs() <= 1e-10 * scale);

        let own = neck_point(&geom, &xp, if i == 1 { 1.0 } else { 0.0 });
        let other = neck_point(&geom, &xp, if i == 1 { 0.0 } else { 1.0 });
        let target = f.mode().eval(&own);
        for (v, p) in f.value(&own).unwrap().iter().zip(&target) {
            prop_assert!((v - p).abs() < 1e-12);
        }
        for v in f.value(&other).unwrap() {
            prop_assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn cancellation_vanishes(log_eps in -3.0f64..-1.0, a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
        let geom = GapGeometry::quadratic(3, 10f64.powf(log_eps), 1.0).unwrap();
        let f = aux_field(&geom, 1, 3, 1.0).unwrap();
        let x = neck_point(&geom, &horizontal(3, geom.neck_radius(), a, b), t);
        prop_assert!(f.vertical_cancellation(&x).unwrap().abs() < 1e-9);
    }
}

#[test]
fn points_outside_the_neck_are_rejected() {
    let geom = GapGeometry::quadratic(2, 0.01, 1.0).unwrap();
    assert!(keller(&geom, &[5.0, 0.0]).is_err());
    let top = geom.upper_boundary(&[0.1]).unwrap();
    assert!(keller(&geom, &[0.1, top + 0.5]).is_err());
    assert!(aux_field(&geom, 3, 1, 1.0).is_err());
    assert!(aux_field(&geom, 1, 4, 1.0).is_err());
}
