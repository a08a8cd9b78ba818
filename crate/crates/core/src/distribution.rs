//! Gaussian predictive distributions fitted to stochastic score samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::special;
use crate::types::{ConfidenceInterval, QualityGaussian};

/// Default variance floor, in standardized score units.
pub const DEFAULT_MIN_SIGMA2: f64 = 1e-6;

/// Numerical controls for quantile inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbitConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ProbitConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl ProbitConfig {
    pub fn new(tolerance: f64, max_iterations: usize) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::invalid("probit tolerance must be positive"));
        }
        if max_iterations == 0 {
            return Err(Error::invalid("probit max_iterations must be positive"));
        }
        Ok(Self {
            tolerance,
            max_iterations,
        })
    }
}

/// Fits `N(μ̂, σ̂²)` to a sample set: μ̂ is the arithmetic mean and σ̂² the
/// unbiased sample variance, floored at `min_sigma2`.
///
/// A single sample or a constant sample set has zero spread and falls back to
/// the floor; with `min_sigma2 == 0` that is an error.
pub fn fit_gaussian(samples: &[f64], min_sigma2: f64) -> Result<QualityGaussian> {
    let first = *samples
        .first()
        .ok_or_else(|| Error::invalid("cannot fit a distribution to an empty sample set"))?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample set contains non-finite values"));
    }
    if !(min_sigma2 >= 0.0 && min_sigma2.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid variance floor {min_sigma2}"
        )));
    }

    let degenerate = samples.iter().all(|&v| v == first);
    let (mu, variance) = if degenerate {
        (first, 0.0)
    } else {
        let n = samples.len() as f64;
        let mu = numeric::sum(samples.iter().copied()) / n;
        let ss = numeric::sum(samples.iter().map(|&v| (v - mu) * (v - mu)));
        (mu, ss / (n - 1.0))
    };

    let sigma2 = variance.max(min_sigma2);
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateDistribution(
            "sample set has zero spread and no variance floor was given".into(),
        ));
    }
    QualityGaussian::new(mu, sigma2)
}

/// Standard-normal quantile function, `probit(p) = √2 erf⁻¹(2p − 1)`.
pub fn probit(p: f64, cfg: &ProbitConfig) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "probit argument must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve in the lower tail, where Φ keeps full relative precision.
    if p < 0.5 {
        Ok(special::lower_quantile(
            p,
            cfg.tolerance,
            cfg.max_iterations,
        ))
    } else {
        Ok(-special::lower_quantile(
            1.0 - p,
            cfg.tolerance,
            cfg.max_iterations,
        ))
    }
}

/// Multiplier `k` with `I(γ) = [μ̂ − kσ̂, μ̂ + kσ̂]`. `γ = 1` maps to `+∞`.
pub fn interval_multiplier(gamma: f64, cfg: &ProbitConfig) -> Result<f64> {
    if gamma == 1.0 {
        return Ok(f64::INFINITY);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {gamma}"
        )));
    }
    probit((1.0 + gamma) / 2.0, cfg)
}

/// Central interval holding probability mass `gamma`.
pub fn confidence_interval(
    dist: &QualityGaussian,
    gamma: f64,
    cfg: &ProbitConfig,
) -> Result<ConfidenceInterval> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {gamma}"
        )));
    }
    let half = dist.sigma() * probit((1.0 + gamma) / 2.0, cfg)?;
    Ok(ConfidenceInterval {
        gamma,
        q_min: dist.mu() - half,
        q_max: dist.mu() + half,
    })
}

/// Translation risk `F̂_Q(χ) = Φ((χ − μ̂)/σ̂)`.
pub fn cdf(dist: &QualityGaussian, chi: f64) -> f64 {
    special::std_normal_cdf((chi - dist.mu()) / dist.sigma())
}

pub fn pdf(dist: &QualityGaussian, q: f64) -> f64 {
    special::std_normal_pdf((q - dist.mu()) / dist.sigma()) / dist.sigma()
}

/// Negative log-density of `gold` under `dist`.
pub fn nll_point(dist: &QualityGaussian, gold: f64) -> f64 {
    let r = gold - dist.mu();
    0.5 * libm::log(2.0 * PI * dist.sigma2()) + r * r / (2.0 * dist.sigma2())
}
