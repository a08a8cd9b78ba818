//! Validation-set standardization and affine variance post-calibration.
//!
//! The variance map `σ² ↦ ασ² + β` is tuned by exhaustive search over a
//! log-spaced α grid and a linear β grid, followed by rounds of local
//! refinement around the incumbent. ECE is piecewise constant in (α, β), so
//! gradient-based tuning is not an option.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EceConfig, EceLevels};
use crate::numeric::{self, linspace, logspace};
use crate::types::{CalibrationParams, QualityGaussian, VarianceEstimator};

/// Shared affine map that sends validation golds to zero mean and unit
/// (population) variance. Predictions go through the same map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer {
        mean: 0.0,
        scale: 1.0,
    };

    pub fn value(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }

    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    pub fn dist(&self, d: &QualityGaussian) -> Result<QualityGaussian> {
        QualityGaussian::new(self.value(d.mu()), d.sigma2() / (self.scale * self.scale))
    }
}

/// Fits the standardization map on validation data.
///
/// Only the gold statistics define the map; `validation_means` is checked for
/// shape and finiteness and then mapped with the same transform.
pub fn fit_standardizer(
    validation_golds: &[f64],
    validation_means: &[f64],
) -> Result<Standardizer> {
    if validation_golds.is_empty() {
        return Err(Error::invalid("cannot standardize an empty validation set"));
    }
    if validation_golds.len() != validation_means.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} golds vs {} predictions",
            validation_golds.len(),
            validation_means.len()
        )));
    }
    if validation_golds
        .iter()
        .chain(validation_means)
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid("non-finite value in validation data"));
    }
    let first = validation_golds[0];
    if validation_golds.iter().all(|&g| g == first) {
        return Err(Error::DegenerateInput(
            "validation golds have zero variance".into(),
        ));
    }
    let mean = numeric::mean(validation_golds.iter().copied()).unwrap();
    let var = numeric::mean(validation_golds.iter().map(|&g| (g - mean) * (g - mean))).unwrap();
    if !(var > 0.0) {
        return Err(Error::DegenerateInput(
            "validation golds have zero variance".into(),
        ));
    }
    Ok(Standardizer {
        mean,
        scale: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSearchConfig {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Each round shrinks the search window ×5 around the incumbent.
    pub refine_rounds: usize,
    pub ece_bins: usize,
}

impl Default for CalibrationSearchConfig {
    fn default() -> Self {
        Self {
            alpha_grid: logspace(0.01, 100.0, 50),
            beta_grid: linspace(0.0, 2.0, 50),
            refine_rounds: 2,
            ece_bins: 100,
        }
    }
}

impl CalibrationSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(Error::invalid("calibration grids must be nonempty"));
        }
        if self.alpha_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid(
                "alpha grid values must be positive and finite",
            ));
        }
        if self.beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::invalid(
                "beta grid values must be nonnegative and finite",
            ));
        }
        EceConfig::with_bins(self.ece_bins).validate()
    }
}

/// One evaluated (α, β) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub alpha: f64,
    pub beta: f64,
    pub ece: f64,
    pub sharpness: f64,
}

impl Candidate {
    /// Lower ECE wins, then lower sharpness, then smaller β, then smaller α.
    fn better_than(&self, other: &Candidate) -> bool {
        (self.ece, self.sharpness, self.beta, self.alpha).partial_cmp(&(
            other.ece,
            other.sharpness,
            other.beta,
            other.alpha,
        )) == Some(std::cmp::Ordering::Less)
    }
}

/// Result of [`tune_affine_traced`]: the winner plus every candidate scored.
#[derive(Debug, Clone)]
pub struct CalibrationSearch {
    pub params: CalibrationParams,
    pub best: Candidate,
    pub evaluated: Vec<Candidate>,
}

struct Objective<'a> {
    levels: EceLevels,
    residuals: Vec<f64>,
    sigma2: &'a [f64],
}

impl Objective<'_> {
    fn score(&self, alpha: f64, beta: f64) -> Option<Candidate> {
        let mut transformed = Vec::with_capacity(self.sigma2.len());
        for &s2 in self.sigma2 {
            let v = alpha * s2 + beta;
            if !(v > 0.0 && v.is_finite()) {
                return None;
            }
            transformed.push(v);
        }
        let ece = self.levels.ece(
            self.residuals
                .iter()
                .zip(&transformed)
                .map(|(&r, &v)| (r, v.sqrt())),
        );
        let sharpness = numeric::mean(transformed.iter().copied())?;
        Some(Candidate {
            alpha,
            beta,
            ece,
            sharpness,
        })
    }

    fn best_of(&self, grid: &[(f64, f64)]) -> (Option<Candidate>, Vec<Candidate>) {
        let scored: Vec<Candidate> = grid
            .par_iter()
            .filter_map(|&(a, b)| self.score(a, b))
            .collect();
        let best = scored
            .iter()
            .copied()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(b) if !c.better_than(&b) => Some(b),
                _ => Some(c),
            });
        (best, scored)
    }
}

fn cartesian(alphas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect()
}

fn half_span(grid: &[f64], log: bool) -> f64 {
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if log {
        (libm::log(hi) - libm::log(lo)) / 2.0
    } else {
        (hi - lo) / 2.0
    }
}

/// Tunes `(α, β)` to minimize ECE on already-standardized validation data.
///
/// The returned params carry identity standardization; see
/// [`fit_calibration`] for the full validation pipeline.
pub fn tune_affine(
    validation: &[(QualityGaussian, f64)],
    cfg: &CalibrationSearchConfig,
) -> Result<CalibrationParams> {
    Ok(tune_affine_traced(validation, cfg)?.params)
}

pub fn tune_affine_traced(
    validation: &[(QualityGaussian, f64)],
    cfg: &CalibrationSearchConfig,
) -> Result<CalibrationSearch> {
    if validation.is_empty() {
        return Err(Error::invalid(
            "calibration needs a nonempty validation set",
        ));
    }
    cfg.validate()?;
    if validation.iter().any(|(_, g)| !g.is_finite()) {
        return Err(Error::invalid("non-finite gold score in validation set"));
    }
    let sigma2: Vec<f64> = validation.iter().map(|(d, _)| d.sigma2()).collect();
    let objective = Objective {
        levels: EceLevels::new(&EceConfig::with_bins(cfg.ece_bins))?,
        residuals: validation.iter().map(|(d, g)| (g - d.mu()).abs()).collect(),
        sigma2: &sigma2,
    };

    let mut grid = cartesian(&cfg.alpha_grid, &cfg.beta_grid);
    // The identity map is always a candidate, so tuning never makes
    // validation ECE worse.
    grid.push((1.0, 0.0));
    let (mut best, mut evaluated) = objective.best_of(&grid);

    let mut alpha_half = half_span(&cfg.alpha_grid, true);
    let mut beta_half = half_span(&cfg.beta_grid, false);
    let n_alpha = cfg.alpha_grid.len().max(2);
    let n_beta = cfg.beta_grid.len().max(2);
    for _ in 0..cfg.refine_rounds {
        let Some(incumbent) = best else { break };
        alpha_half /= 5.0;
        beta_half /= 5.0;
        let alphas: Vec<f64> = if alpha_half > 0.0 {
            let c = libm::log(incumbent.alpha);
            linspace(c - alpha_half, c + alpha_half, n_alpha)
                .into_iter()
                .map(libm::exp)
                .collect()
        } else {
            vec![incumbent.alpha]
        };
        let mut betas: Vec<f64> = if beta_half > 0.0 {
            linspace(
                incumbent.beta - beta_half,
                incumbent.beta + beta_half,
                n_beta,
            )
            .into_iter()
            .filter(|&b| b >= 0.0)
            .collect()
        } else {
            Vec::new()
        };
        if betas.first() != Some(&0.0) && incumbent.beta - beta_half < 0.0 {
            betas.insert(0, 0.0);
        }
        if betas.is_empty() {
            betas.push(incumbent.beta);
        }
        let (round_best, round_scored) = objective.best_of(&cartesian(&alphas, &betas));
        evaluated.extend(round_scored);
        if let Some(rb) = round_best {
            if rb.better_than(&incumbent) {
                best = Some(rb);
            }
        }
    }

    let best = best.ok_or_else(|| {
        Error::NoFeasibleCalibration(
            "every (alpha, beta) candidate produced a nonpositive variance".into(),
        )
    })?;
    Ok(CalibrationSearch {
        params: CalibrationParams {
            std_mean: 0.0,
            std_scale: 1.0,
            alpha: best.alpha,
            beta: best.beta,
            ece_bins: cfg.ece_bins,
            variance_estimator: VarianceEstimator::Unbiased,
        },
        best,
        evaluated,
    })
}

/// Applies the variance map; the mean is left untouched.
pub fn apply_calibration(
    dist: &QualityGaussian,
    params: &CalibrationParams,
) -> Result<QualityGaussian> {
    let v = params.alpha * dist.sigma2() + params.beta;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::DegenerateDistribution(format!(
            "calibrated variance {v} is not positive"
        )));
    }
    QualityGaussian::new(dist.mu(), v)
}

/// Standardizes raw validation predictions and golds, then tunes (α, β).
///
/// `raw` holds unstandardized `(distribution, gold)` pairs. The returned
/// params hold both the standardizer and the variance map.
pub fn fit_calibration(
    raw: &[(QualityGaussian, f64)],
    cfg: &CalibrationSearchConfig,
) -> Result<CalibrationParams> {
    let golds: Vec<f64> = raw.iter().map(|(_, g)| *g).collect();
    let means: Vec<f64> = raw.iter().map(|(d, _)| d.mu()).collect();
    let std = fit_standardizer(&golds, &means)?;
    let standardized = raw
        .iter()
        .map(|(d, g)| Ok((std.dist(d)?, std.value(*g))))
        .collect::<Result<Vec<_>>>()?;
    let mut params = tune_affine(&standardized, cfg)?;
    params.std_mean = std.mean;
    params.std_scale = std.scale;
    Ok(params)
}

impl CalibrationParams {
    pub fn standardizer(&self) -> Standardizer {
        Standardizer {
            mean: self.std_mean,
            scale: self.std_scale,
        }
    }

    /// Standardizes a raw distribution and applies the variance map.
    pub fn transform(&self, raw: &QualityGaussian) -> Result<QualityGaussian> {
        apply_calibration(&self.standardizer().dist(raw)?, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ece;

    fn g(mu: f64, s2: f64) -> QualityGaussian {
        QualityGaussian::new(mu, s2).unwrap()
    }

    #[test]
    fn two_point_standardization() {
        let s = fit_standardizer(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s.values(&[0.0, 2.0]), vec![-1.0, 1.0]);
        assert_eq!(s.value(1.0), 0.0);
    }

    #[test]
    fn standardized_input_gives_identity() {
        let s = fit_standardizer(&[-1.0, 1.0, -1.0, 1.0], &[0.0; 4]).unwrap();
        assert_eq!((s.mean, s.scale), (0.0, 1.0));
    }

    #[test]
    fn standardizer_errors() {
        assert!(matches!(
            fit_standardizer(&[0.3, 0.3], &[0.0, 1.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(fit_standardizer(&[], &[]).is_err());
        assert!(fit_standardizer(&[0.0, 1.0], &[0.0]).is_err());
        assert!(fit_standardizer(&[0.0, f64::INFINITY], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn standardizer_scales_variance() {
        let s = Standardizer {
            mean: 1.0,
            scale: 2.0,
        };
        let d = s.dist(&g(3.0, 0.8)).unwrap();
        assert_eq!((d.mu(), d.sigma2()), (1.0, 0.2));
    }

    #[test]
    fn apply_examples() {
        let mut p = CalibrationParams::identity(100);
        let d = g(0.5, 0.2);
        assert_eq!(apply_calibration(&d, &p).unwrap(), d);
        p.alpha = 0.0;
        p.beta = 0.7;
        assert_eq!(apply_calibration(&d, &p).unwrap().sigma2(), 0.7);
        p.alpha = 2.0;
        p.beta = 0.1;
        let out = apply_calibration(&d, &p).unwrap();
        assert_eq!(out.mu(), 0.5);
        assert!((out.sigma2() - 0.5).abs() < 1e-15);
        p.alpha = 0.0;
        p.beta = 0.0;
        assert!(matches!(
            apply_calibration(&d, &p),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = CalibrationSearchConfig::default();
        assert!(c.validate().is_ok());
        c.alpha_grid = vec![];
        assert!(c.validate().is_err());
        c.alpha_grid = vec![0.0];
        assert!(c.validate().is_err());
        c.alpha_grid = vec![1.0];
        c.beta_grid = vec![-0.1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_validation_rejected() {
        assert!(tune_affine(&[], &CalibrationSearchConfig::default()).is_err());
    }

    #[test]
    fn single_candidate_grid() {
        let cfg = CalibrationSearchConfig {
            alpha_grid: vec![2.0],
            beta_grid: vec![0.5],
            refine_rounds: 0,
            ece_bins: 10,
        };
        let val = vec![(g(0.0, 1.0), 0.3), (g(1.0, 0.5), -0.2), (g(-1.0, 2.0), 0.1)];
        let search = tune_affine_traced(&val, &cfg).unwrap();
        // The grid point and the identity.
        assert_eq!(search.evaluated.len(), 2);
        let p = search.params;
        assert!((p.alpha, p.beta) == (2.0, 0.5) || (p.alpha, p.beta) == (1.0, 0.0));
    }

    #[test]
    fn returned_ece_matches_metric_recomputation() {
        let val: Vec<(QualityGaussian, f64)> = (0..200)
            .map(|i| {
                let x = i as f64 / 200.0;
                (g(x, 0.01 + 0.05 * x), x + 0.3 * (i as f64 * 1.7).sin())
            })
            .collect();
        let cfg = CalibrationSearchConfig::default();
        let search = tune_affine_traced(&val, &cfg).unwrap();
        let dists: Vec<QualityGaussian> = val
            .iter()
            .map(|(d, _)| apply_calibration(d, &search.params).unwrap())
            .collect();
        let golds: Vec<f64> = val.iter().map(|(_, g)| *g).collect();
        let recomputed = ece(&dists, &golds, &EceConfig::with_bins(cfg.ece_bins)).unwrap();
        assert_eq!(recomputed, search.best.ece);
        assert!(search.evaluated.iter().all(|c| search.best.ece <= c.ece));
    }
}
