use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log eps, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<FitResult> {
    if pairs.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            pairs.len()
        )));
    }
    for &(e, v) in pairs {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::Fit(format!("abscissa must be positive, got {e}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Fit(format!("value must be positive, got {v}")));
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a constant series is fitted perfectly by a flat line
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        n_points: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<_> = [0.2f64, 0.1, 0.05]
            .iter()
            .map(|&e| (e, e.powf(-0.5)))
            .collect();
        let f = fit_rate(&pairs).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.n_points, 3);
    }

    #[test]
    fn constant_series() {
        let f = fit_rate(&[(0.2, 3.0), (0.1, 3.0), (0.05, 3.0)]).unwrap();
        assert!(f.slope.abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_rate(&[(0.2, 1.0), (0.1, 2.0)]),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_rate(&[(0.2, 1.0), (0.1, 0.0), (0.05, 1.0)]),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            fit_rate(&[(0.1, 1.0), (0.1, 2.0), (0.1, 1.5)]),
            Err(Error::Fit(_))
        ));
    }
}
