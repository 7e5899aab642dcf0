use gapflow::rates::{all_quantities, epsilon_exponent, fitted_exponent};
use gapflow::{fit_rate, predicted_lower, predicted_upper, Quantity};
use proptest::prelude::*;

proptest! {
    #[test]
    fn fit_recovers_pure_power_laws(slope in -3.0f64..3.0, log_c in -5.0f64..5.0, n in 3usize..10, hi in 0.01f64..0.4) {
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let e = hi * 0.5f64.powi(k as i32);
                (e, log_c.exp() * e.powf(slope))
            })
            .collect();
        let fit = fit_rate(&pairs).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - log_c).abs() < 1e-8);
        prop_assert!(fit.r_squared > 1.0 - 1e-10);
        prop_assert_eq!(fit.n_points, n);
    }

    #[test]
    fn predictions_are_positive_and_grow_as_the_gap_closes(dim in 2usize..4, e1 in 1e-6f64..0.49, f in 0.05f64..0.95) {
        let e2 = e1 * f;
        for q in all_quantities(dim) {
            let zero = vec![0.0; dim - 1];
            let a = predicted_upper(q, dim, e1, &zero).unwrap();
            let b = predicted_upper(q, dim, e2, &zero).unwrap();
            prop_assert!(a > 0.0 && a.is_finite());
            let expo = epsilon_exponent(q, dim).unwrap();
            // eps |log eps| peaks at 1/e, so the 3D log laws only decrease below it
            if expo < 0.0 && (dim == 2 || e1 < (-1.0f64).exp()) {
                prop_assert!(b > a, "{} {} {} {}", q, dim, a, b);
            }
        }
        let low = predicted_lower(dim, e1).unwrap();
        let up = predicted_upper(Quantity::GradU, dim, e1, &vec![0.0; dim - 1]).unwrap();
        prop_assert!(low <= up * (1.0 + 1e-14));
    }
}

#[test]
fn spot_values() {
    assert!((predicted_upper(Quantity::GradU, 2, 0.01, &[0.0]).unwrap() - 10.0).abs() < 1e-12);
    assert!(
        (predicted_upper(Quantity::GradU, 3, 0.01, &[0.0, 0.0]).unwrap() - 21.7147).abs() < 1e-4
    );
    assert!((predicted_upper(Quantity::PressureOsc, 2, 0.04, &[0.0]).unwrap() - 5.0).abs() < 1e-12);
    assert!((predicted_lower(3, 0.01).unwrap() - 21.7147).abs() < 1e-4);
    assert!((predicted_lower(2, 0.25).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn declared_exponents_are_fitted_far_out() {
    for dim in [2, 3] {
        for q in all_quantities(dim) {
            let fit = fitted_exponent(q, dim, 2f64.powi(-100)).unwrap();
            assert!(
                (fit - epsilon_exponent(q, dim).unwrap()).abs() < 0.02,
                "{q} in {dim}d"
            );
        }
    }
}

#[test]
fn fit_rejects_bad_input() {
    assert!(fit_rate(&[(0.1, 1.0), (0.05, 2.0)]).is_err());
    assert!(fit_rate(&[(0.1, 1.0), (0.05, -2.0), (0.02, 3.0)]).is_err());
    assert!(fit_rate(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]).is_err());
}
