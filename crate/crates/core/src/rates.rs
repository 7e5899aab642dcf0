//! Predicted blow-up rates with every constant set to one.
//!
//! Measured data are only ever compared against these through log-log slopes,
//! so the missing constants do not matter. `|log eps|` is the natural log.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A predicted quantity. Mode indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    GradU,
    GradULower,
    PressureOsc,
    Grad2UGradP,
    CauchyStress,
    CoeffGap(usize),
    MatrixEntry(usize, usize),
    NsVsStokesGap,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::GradU => write!(f, "grad_u"),
            Quantity::GradULower => write!(f, "grad_u_lower"),
            Quantity::PressureOsc => write!(f, "pressure_osc"),
            Quantity::Grad2UGradP => write!(f, "grad2u_gradp"),
            Quantity::CauchyStress => write!(f, "cauchy_stress"),
            Quantity::CoeffGap(a) => write!(f, "coeff_gap_{a}"),
            Quantity::MatrixEntry(a, b) => write!(f, "matrix_entry_{a}{b}"),
            Quantity::NsVsStokesGap => write!(f, "ns_vs_stokes_gap"),
        }
    }
}

/// A quantity together with the pure power of `eps` it follows at `x' = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub quantity: Quantity,
    pub dim: usize,
    /// Exponent of the power law, ignoring `|log eps|` factors.
    pub epsilon_exponent: f64,
}

impl RatePrediction {
    pub fn new(quantity: Quantity, dim: usize) -> Result<Self> {
        Ok(Self {
            quantity,
            dim,
            epsilon_exponent: epsilon_exponent(quantity, dim)?,
        })
    }

    /// Evaluates the prediction at `x' = 0`.
    pub fn at(&self, eps: f64) -> Result<f64> {
        let zero = vec![0.0; self.dim - 1];
        predicted_upper(self.quantity, self.dim, eps, &zero)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0 && eps < 0.5) {
        return Err(Error::Domain(format!(
            "eps must lie in (0, 1/2), got {eps}"
        )));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::Unsupported(format!("no rates for dimension {dim}")));
    }
    Ok(())
}

fn mode_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Upper-bound formula for `quantity` at horizontal offset `xp`.
pub fn predicted_upper(quantity: Quantity, dim: usize, eps: f64, xp: &[f64]) -> Result<f64> {
    check_dim(dim)?;
    check_eps(eps)?;
    if xp.len() + 1 != dim {
        return Err(Error::Domain(format!(
            "expected {} horizontal coordinates",
            dim - 1
        )));
    }
    let r2: f64 = xp.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let log = eps.ln().abs();
    let value = match (quantity, dim) {
        (Quantity::GradU, 3) => (1.0 + log * r) / (log * (eps + r2)),
        (Quantity::GradU, _) => (eps.sqrt() + r) / (eps + r2),
        (Quantity::GradULower, _) => predicted_lower(dim, eps)?,
        (Quantity::PressureOsc, 3) | (Quantity::CauchyStress, 3) => 1.0 / (eps * log),
        (Quantity::PressureOsc, _) | (Quantity::CauchyStress, _) => 1.0 / eps.sqrt(),
        (Quantity::Grad2UGradP, 3) => (1.0 + log * r) / (log * (eps + r2).powi(2)),
        (Quantity::Grad2UGradP, _) => (eps + r2).powf(-1.5),
        (Quantity::NsVsStokesGap, _) => 1.0,
        (q @ (Quantity::CoeffGap(_) | Quantity::MatrixEntry(..)), _) => {
            predicted_scaling(q, dim, eps)?
        }
    };
    Ok(value)
}

/// Lower bound for the gradient at the narrowest point.
pub fn predicted_lower(dim: usize, eps: f64) -> Result<f64> {
    check_dim(dim)?;
    check_eps(eps)?;
    Ok(if dim == 3 {
        1.0 / (eps * eps.ln().abs())
    } else {
        1.0 / eps.sqrt()
    })
}

/// Scaling of the rigid-coefficient gaps `|C_1^a - C_2^a|` and of the diagonal
/// stiffness entries `a_11^{aa}`.
pub fn predicted_scaling(quantity: Quantity, dim: usize, eps: f64) -> Result<f64> {
    check_dim(dim)?;
    check_eps(eps)?;
    let log = eps.ln().abs();
    let n = mode_count(dim);
    match quantity {
        Quantity::CoeffGap(a) if (1..=n).contains(&a) => Ok(match (dim, a) {
            (3, 3) => eps,
            (3, 4) => 1.0,
            (3, _) => 1.0 / log,
            (_, 2) => eps.powf(1.5),
            _ => eps.sqrt(),
        }),
        Quantity::MatrixEntry(a, b) if a == b && (1..=n).contains(&a) => Ok(match (dim, a) {
            (3, 3) => 1.0 / eps,
            (3, 4) => 1.0,
            (3, _) => log,
            (_, 2) => eps.powf(-1.5),
            _ => 1.0 / eps.sqrt(),
        }),
        q => Err(Error::Unsupported(format!(
            "no scaling law for {q} in dimension {dim}"
        ))),
    }
}

/// Exponent `s` such that the prediction behaves like `eps^s` at `x' = 0` up
/// to logarithmic factors.
pub fn epsilon_exponent(quantity: Quantity, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let n = mode_count(dim);
    let three = dim == 3;
    Ok(match quantity {
        Quantity::GradU | Quantity::GradULower | Quantity::PressureOsc | Quantity::CauchyStress => {
            if three {
                -1.0
            } else {
                -0.5
            }
        }
        Quantity::Grad2UGradP => {
            if three {
                -2.0
            } else {
                -1.5
            }
        }
        Quantity::NsVsStokesGap => 0.0,
        Quantity::CoeffGap(a) if (1..=n).contains(&a) => match (dim, a) {
            (3, 3) => 1.0,
            (3, _) => 0.0,
            (_, 2) => 1.5,
            _ => 0.5,
        },
        Quantity::MatrixEntry(a, b) if a == b && (1..=n).contains(&a) => match (dim, a) {
            (3, 3) => -1.0,
            (3, _) => 0.0,
            (_, 2) => -1.5,
            _ => -0.5,
        },
        q => {
            return Err(Error::Unsupported(format!(
                "no scaling law for {q} in dimension {dim}"
            )))
        }
    })
}

/// Slope of `log predicted(eps)` against `log eps` over the decade below
/// `eps_max`. Log factors bend the slope by about `1 / |log eps|`, so the
/// slope approaches the declared exponent only for very small `eps_max`.
pub fn fitted_exponent(quantity: Quantity, dim: usize, eps_max: f64) -> Result<f64> {
    let pairs = (0..4)
        .map(|j| {
            let eps = eps_max * 10f64.powf(-(j as f64) / 3.0);
            let zero = vec![0.0; dim.saturating_sub(1)];
            predicted_upper(quantity, dim, eps, &zero).map(|v| (eps, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::experiments::fit_rate(&pairs)?.slope)
}

/// Every quantity with a defined prediction in the given dimension.
pub fn all_quantities(dim: usize) -> Vec<Quantity> {
    let n = mode_count(dim);
    let mut q = vec![
        Quantity::GradU,
        Quantity::GradULower,
        Quantity::PressureOsc,
        Quantity::Grad2UGradP,
        Quantity::CauchyStress,
        Quantity::NsVsStokesGap,
    ];
    q.extend((1..=n).map(Quantity::CoeffGap));
    q.extend((1..=n).map(|a| Quantity::MatrixEntry(a, a)));
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn upper_examples() {
        assert!(close(
            predicted_upper(Quantity::GradU, 2, 0.01, &[0.0]).unwrap(),
            10.0,
            1e-12
        ));
        assert!(close(
            predicted_upper(Quantity::GradU, 3, 0.01, &[0.0, 0.0]).unwrap(),
            21.7147,
            1e-4
        ));
        assert!(close(
            predicted_upper(Quantity::PressureOsc, 2, 0.04, &[0.0]).unwrap(),
            5.0,
            1e-12
        ));
    }

    #[test]
    fn lower_examples() {
        assert!(close(predicted_lower(3, 0.01).unwrap(), 21.7147, 1e-4));
        assert!(close(predicted_lower(2, 0.25).unwrap(), 2.0, 1e-14));
        assert!(close(
            predicted_lower(2, 0.5 - 1e-12).unwrap(),
            2f64.sqrt(),
            1e-9
        ));
        assert!(predicted_lower(2, 0.5).is_err());
        assert!(predicted_lower(4, 0.1).is_err());
    }

    #[test]
    fn scaling_examples() {
        assert!(close(
            predicted_scaling(Quantity::CoeffGap(2), 2, 0.01).unwrap(),
            0.001,
            1e-15
        ));
        assert!(close(
            predicted_scaling(Quantity::MatrixEntry(2, 2), 2, 0.01).unwrap(),
            1000.0,
            1e-9
        ));
        assert!(close(
            predicted_scaling(Quantity::CoeffGap(3), 3, 0.05).unwrap(),
            0.05,
            1e-15
        ));
        assert!(predicted_scaling(Quantity::CoeffGap(4), 2, 0.1).is_err());
        assert!(predicted_scaling(Quantity::MatrixEntry(1, 2), 2, 0.1).is_err());
        assert!(predicted_scaling(Quantity::GradU, 2, 0.1).is_err());
    }

    #[test]
    fn gradient_bound_at_sqrt_eps() {
        let eps: f64 = 0.01;
        let r = eps.sqrt();
        let log = eps.ln().abs();
        let v = predicted_upper(Quantity::GradU, 3, eps, &[r, 0.0]).unwrap();
        assert!(close(v, (1.0 + log * r) / (2.0 * eps * log), 1e-12));
    }

    #[test]
    fn fitted_exponents_match_far_out() {
        let eps = 2f64.powi(-100);
        for dim in [2, 3] {
            for q in all_quantities(dim) {
                let fit = fitted_exponent(q, dim, eps).unwrap();
                let want = epsilon_exponent(q, dim).unwrap();
                assert!((fit - want).abs() < 0.02, "{q} {dim}: {fit} vs {want}");
            }
        }
        // at desk scale the log factor is visible in 3D
        let near = fitted_exponent(Quantity::GradU, 3, 0.1).unwrap();
        assert!((near + 1.0).abs() > 0.1);
        assert!((fitted_exponent(Quantity::GradU, 2, 0.1).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn lower_never_exceeds_upper() {
        for k in 2..40 {
            let eps = 0.5 * 0.8f64.powi(k);
            for dim in [2, 3] {
                let zero = vec![0.0; dim - 1];
                let lo = predicted_lower(dim, eps).unwrap();
                let hi = predicted_upper(Quantity::GradU, dim, eps, &zero).unwrap();
                assert!(lo <= hi * (1.0 + 1e-12));
            }
        }
    }
}
