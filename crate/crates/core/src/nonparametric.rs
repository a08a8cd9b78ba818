//! Percentile-method intervals and median-based evaluation.
//!
//! Quantiles use linear interpolation between order statistics (the
//! "type 7" rule): `Q(p) = x₍ⱼ₎ + h (x₍ⱼ₊₁₎ − x₍ⱼ₎)` with `(n − 1)p = j + h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ece_from_curve, pearson, EceConfig, LevelCoverage};
use crate::types::ConfidenceInterval;

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample set contains non-finite values"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Type-7 quantile of already sorted data; `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = (h.floor() as usize).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    // Clamping keeps Q(p) monotone in p despite rounding.
    (a + frac * (b - a)).clamp(a, b)
}

pub fn median(samples: &[f64]) -> Result<f64> {
    Ok(quantile_sorted(&sorted_finite(samples)?, 0.5))
}

/// Central percentile interval `[Q((1−γ)/2), Q((1+γ)/2)]`.
pub fn percentile_interval(samples: &[f64], gamma: f64) -> Result<ConfidenceInterval> {
    let sorted = sorted_finite(samples)?;
    percentile_interval_sorted(&sorted, gamma)
}

fn percentile_interval_sorted(sorted: &[f64], gamma: f64) -> Result<ConfidenceInterval> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1], got {gamma}"
        )));
    }
    Ok(ConfidenceInterval {
        gamma,
        q_min: quantile_sorted(sorted, (1.0 - gamma) / 2.0),
        q_max: quantile_sorted(sorted, (1.0 + gamma) / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonparametricReport {
    /// Pearson correlation between golds and sample medians.
    pub pps_median: f64,
    pub ece: f64,
    pub n_segments: usize,
}

/// Coverage of percentile intervals at every level of `cfg`.
pub fn percentile_calibration_curve(
    sample_sets: &[Vec<f64>],
    golds: &[f64],
    cfg: &EceConfig,
) -> Result<Vec<LevelCoverage>> {
    cfg.validate()?;
    if sample_sets.len() != golds.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} sample sets vs {} golds",
            sample_sets.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let levels = cfg.levels();
    let mut covered = vec![0usize; levels.len()];
    for (samples, &gold) in sample_sets.iter().zip(golds) {
        let sorted = sorted_finite(samples)?;
        for (b, &gamma) in levels.iter().enumerate() {
            if percentile_interval_sorted(&sorted, gamma)?.contains(gold) {
                covered[b] += 1;
            }
        }
    }
    let n = golds.len() as f64;
    Ok(levels
        .into_iter()
        .zip(covered)
        .map(|(gamma, c)| LevelCoverage {
            gamma,
            accuracy: c as f64 / n,
        })
        .collect())
}

/// Median-PPS and percentile-interval ECE.
pub fn evaluate_nonparametric(
    sample_sets: &[Vec<f64>],
    golds: &[f64],
    cfg: &EceConfig,
) -> Result<NonparametricReport> {
    let curve = percentile_calibration_curve(sample_sets, golds, cfg)?;
    let medians = sample_sets
        .iter()
        .map(|s| median(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(NonparametricReport {
        pps_median: pearson(golds, &medians)?,
        ece: ece_from_curve(&curve),
        n_segments: golds.len(),
    })
}

/// The M = 20 configuration used for percentile intervals.
pub fn default_nonparametric_ece() -> EceConfig {
    EceConfig::with_bins(20)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_hundred_at_ninety_percent() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let ci = percentile_interval(&xs, 0.9).unwrap();
        assert!((ci.q_min - 5.95).abs() < 1e-12, "{}", ci.q_min);
        assert!((ci.q_max - 95.05).abs() < 1e-12, "{}", ci.q_max);
    }

    #[test]
    fn constant_samples() {
        let ci = percentile_interval(&[0.4; 7], 0.8).unwrap();
        assert_eq!((ci.q_min, ci.q_max), (0.4, 0.4));
    }

    #[test]
    fn tiny_gamma_collapses_to_median() {
        let xs = [3.0, -1.0, 2.5, 7.0, 0.0, 1.0];
        let m = median(&xs).unwrap();
        let ci = percentile_interval(&xs, 1e-12).unwrap();
        assert!(ci.contains(m));
        assert!(ci.width() < 1e-10);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn interval_errors() {
        assert!(percentile_interval(&[], 0.5).is_err());
        assert!(percentile_interval(&[1.0], 0.0).is_err());
        assert!(percentile_interval(&[1.0, f64::NAN], 0.5).is_err());
    }

    #[test]
    fn symmetric_samples_median_equals_mean() {
        let xs = [-3.0, -1.0, 0.5, 2.0, 4.0, 6.5, 8.0];
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let mirrored: Vec<f64> = xs.iter().map(|x| 2.0 * mean - x).collect();
        let both = [xs.to_vec(), mirrored].concat();
        assert!((median(&both).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn evaluation_shapes() {
        let sets = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 3.0],
            vec![5.0, 6.0, 7.0],
        ];
        let golds = [1.0, 2.2, 5.5];
        let r = evaluate_nonparametric(&sets, &golds, &default_nonparametric_ece()).unwrap();
        assert_eq!(r.n_segments, 3);
        assert!(r.pps_median > 0.9);
        assert!((0.0..=1.0).contains(&r.ece));
        assert!(evaluate_nonparametric(&sets, &golds[..2], &EceConfig::default()).is_err());
    }
}
