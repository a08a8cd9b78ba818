//! Fixed-variance Gaussian baseline.
//!
//! Each point estimate becomes `N(q̂, σ²_fixed)`, with σ²_fixed the mean
//! squared validation residual. That value is the exact NLL minimizer over
//! all constant variances: with `y = 1/(2σ²)` the objective
//! `Σ −½ log(y/π) + (q* − μ̂)² y` is convex in `y` and its stationary point
//! gives `σ² = (1/|D|) Σ (q* − μ̂)²`.

use crate::error::{Error, Result};
use crate::numeric;
use crate::types::QualityGaussian;

/// Mean squared residual over `(mu, gold)` pairs (divisor `|D|`).
pub fn fixed_variance(validation: &[(f64, f64)]) -> Result<f64> {
    if validation
        .iter()
        .any(|(m, g)| !(m.is_finite() && g.is_finite()))
    {
        return Err(Error::invalid(
            "non-finite value in baseline validation data",
        ));
    }
    numeric::mean(
        validation
            .iter()
            .map(|&(mu, gold)| (gold - mu) * (gold - mu)),
    )
    .ok_or_else(|| Error::invalid("baseline needs a nonempty validation set"))
}

pub fn baseline_distributions(
    point_estimates: &[f64],
    sigma2_fixed: f64,
) -> Result<Vec<QualityGaussian>> {
    if !(sigma2_fixed > 0.0) {
        return Err(Error::DegenerateDistribution(format!(
            "fixed variance must be positive, got {sigma2_fixed}"
        )));
    }
    point_estimates
        .iter()
        .map(|&q| QualityGaussian::new(q, sigma2_fixed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{nll, ups};

    #[test]
    fn unit_residuals() {
        assert_eq!(fixed_variance(&[(0.0, 1.0), (0.0, -1.0)]).unwrap(), 1.0);
    }

    #[test]
    fn perfect_predictions_give_zero() {
        assert_eq!(fixed_variance(&[(0.4, 0.4), (-1.0, -1.0)]).unwrap(), 0.0);
        assert!(matches!(
            baseline_distributions(&[0.4], 0.0),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn empty_validation_rejected() {
        assert!(matches!(fixed_variance(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn distributions_share_variance() {
        let d = baseline_distributions(&[0.1, 0.9], 0.5).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!((d[0].mu(), d[0].sigma2()), (0.1, 0.5));
        assert_eq!((d[1].mu(), d[1].sigma2()), (0.9, 0.5));
        assert_eq!(baseline_distributions(&[0.3], 0.2).unwrap().len(), 1);
    }

    #[test]
    fn fixed_variance_minimizes_nll() {
        let val = [
            (0.1, 0.5),
            (0.4, -0.2),
            (-0.3, 0.0),
            (1.2, 0.7),
            (0.0, 0.05),
        ];
        let s2 = fixed_variance(&val).unwrap();
        let mus: Vec<f64> = val.iter().map(|v| v.0).collect();
        let golds: Vec<f64> = val.iter().map(|v| v.1).collect();
        let at = |v: f64| nll(&baseline_distributions(&mus, v).unwrap(), &golds).unwrap();
        let best = at(s2);
        for c in [0.5, 0.9, 1.1, 2.0] {
            assert!(at(c * s2) > best);
        }
        // At the optimum NLL = ½ log(2π σ²) + ½.
        let closed = 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + 0.5;
        assert!((best - closed).abs() < 1e-12);
    }

    #[test]
    fn baseline_ups_is_absent() {
        let d = baseline_distributions(&[0.1, 0.5, 0.9], 0.3).unwrap();
        assert_eq!(ups(&d, &[0.0, 1.0, 0.7]).unwrap(), None);
    }
}
