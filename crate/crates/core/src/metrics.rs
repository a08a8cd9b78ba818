//! Dataset-level performance indicators: ECE, NLL, sharpness, PPS and UPS.

use serde::{Deserialize, Serialize};

use crate::distribution::{interval_multiplier, nll_point, ProbitConfig};
use crate::error::{Error, Result};
use crate::numeric::{self, NeumaierSum};
use crate::types::{EvalReport, QualityGaussian};

/// Placement of the confidence levels γ_b inside the M bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelRule {
    /// γ_b = (b − ½)/M.
    #[default]
    Centers,
    /// γ_b = b/M; the last level is γ = 1 (an unbounded interval).
    RightEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EceConfig {
    pub n_bins: usize,
    #[serde(default)]
    pub level_rule: LevelRule,
}

impl Default for EceConfig {
    fn default() -> Self {
        Self {
            n_bins: 100,
            level_rule: LevelRule::Centers,
        }
    }
}

impl EceConfig {
    pub fn with_bins(n_bins: usize) -> Self {
        Self {
            n_bins,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::invalid(format!(
                "ECE needs at least 2 bins, got {}",
                self.n_bins
            )));
        }
        Ok(())
    }

    /// Confidence levels γ_1 < … < γ_M.
    pub fn levels(&self) -> Vec<f64> {
        let m = self.n_bins as f64;
        (1..=self.n_bins)
            .map(|b| match self.level_rule {
                LevelRule::Centers => (b as f64 - 0.5) / m,
                LevelRule::RightEdges => b as f64 / m,
            })
            .collect()
    }
}

/// Empirical coverage at one confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub gamma: f64,
    pub accuracy: f64,
}

impl LevelCoverage {
    pub fn gap(&self) -> f64 {
        (self.accuracy - self.gamma).abs()
    }
}

/// Precomputed levels and interval multipliers `k_b = probit((1+γ_b)/2)`.
///
/// A gold `q*` lies inside `I(γ_b)` exactly when `|q* − μ̂| ≤ σ̂·k_b`. The
/// calibration search goes through the same predicate, so ECE values it
/// reports are bit-identical to [`ece`] on the transformed distributions.
#[derive(Debug, Clone)]
pub struct EceLevels {
    gammas: Vec<f64>,
    multipliers: Vec<f64>,
}

impl EceLevels {
    pub fn new(cfg: &EceConfig) -> Result<Self> {
        cfg.validate()?;
        let probit_cfg = ProbitConfig::default();
        let gammas = cfg.levels();
        let multipliers = gammas
            .iter()
            .map(|&g| interval_multiplier(g, &probit_cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gammas,
            multipliers,
        })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Index of the narrowest level whose interval covers a residual of
    /// magnitude `abs_residual` at spread `sigma`; `len()` when none does.
    pub fn first_covering(&self, abs_residual: f64, sigma: f64) -> usize {
        self.multipliers
            .partition_point(|&k| !(abs_residual <= sigma * k))
    }

    /// Coverage per level from `(|q* − μ̂|, σ̂)` pairs.
    pub fn coverage<I>(&self, margins: I) -> Vec<LevelCoverage>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut counts = vec![0usize; self.len() + 1];
        let mut n = 0usize;
        for (r, s) in margins {
            counts[self.first_covering(r, s)] += 1;
            n += 1;
        }
        let mut covered = 0usize;
        self.gammas
            .iter()
            .zip(&counts)
            .map(|(&gamma, &c)| {
                covered += c;
                LevelCoverage {
                    gamma,
                    accuracy: covered as f64 / n as f64,
                }
            })
            .collect()
    }

    pub fn ece<I>(&self, margins: I) -> f64
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let curve = self.coverage(margins);
        ece_from_curve(&curve)
    }
}

/// Mean absolute gap over a coverage curve.
pub fn ece_from_curve(curve: &[LevelCoverage]) -> f64 {
    numeric::sum(curve.iter().map(LevelCoverage::gap)) / curve.len() as f64
}

fn check_lengths(n_dists: usize, n_golds: usize) -> Result<()> {
    if n_dists != n_golds {
        return Err(Error::invalid(format!(
            "length mismatch: {n_dists} distributions vs {n_golds} gold scores"
        )));
    }
    if n_dists == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(())
}

fn margins<'a>(
    dists: &'a [QualityGaussian],
    golds: &'a [f64],
) -> impl Iterator<Item = (f64, f64)> + 'a {
    dists
        .iter()
        .zip(golds)
        .map(|(d, &g)| ((g - d.mu()).abs(), d.sigma()))
}

/// Empirical coverage `acc(γ_b)` at every level of `cfg`.
pub fn calibration_curve(
    dists: &[QualityGaussian],
    golds: &[f64],
    cfg: &EceConfig,
) -> Result<Vec<LevelCoverage>> {
    check_lengths(dists.len(), golds.len())?;
    Ok(EceLevels::new(cfg)?.coverage(margins(dists, golds)))
}

/// Expected calibration error `(1/M) Σ_b |acc(γ_b) − γ_b|`.
pub fn ece(dists: &[QualityGaussian], golds: &[f64], cfg: &EceConfig) -> Result<f64> {
    Ok(ece_from_curve(&calibration_curve(dists, golds, cfg)?))
}

pub fn nll(dists: &[QualityGaussian], golds: &[f64]) -> Result<f64> {
    check_lengths(dists.len(), golds.len())?;
    Ok(numeric::mean(dists.iter().zip(golds).map(|(d, &g)| nll_point(d, g))).unwrap())
}

/// Mean predicted variance.
pub fn sharpness(dists: &[QualityGaussian]) -> Result<f64> {
    numeric::mean(dists.iter().map(QualityGaussian::sigma2))
        .ok_or_else(|| Error::invalid("empty dataset"))
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid(
            "Pearson correlation needs at least 2 points",
        ));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation(
            "one argument has zero variance".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = numeric::sum(x.iter().copied()) / n;
    let my = numeric::sum(y.iter().copied()) / n;
    let (mut sxy, mut sxx, mut syy) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    let (sxx, syy) = (sxx.total(), syy.total());
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one argument has zero variance".into(),
        ));
    }
    Ok((sxy.total() / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Predictive Pearson score `r(q*, μ̂)`.
pub fn pps(dists: &[QualityGaussian], golds: &[f64]) -> Result<f64> {
    check_lengths(dists.len(), golds.len())?;
    let means: Vec<f64> = dists.iter().map(QualityGaussian::mu).collect();
    pearson(golds, &means)
}

/// Uncertainty Pearson score `r(|q* − μ̂|, σ̂)`; `None` when either side is
/// constant (e.g. the fixed-variance baseline).
pub fn ups(dists: &[QualityGaussian], golds: &[f64]) -> Result<Option<f64>> {
    check_lengths(dists.len(), golds.len())?;
    let errors: Vec<f64> = margins(dists, golds).map(|(r, _)| r).collect();
    let sigmas: Vec<f64> = dists.iter().map(QualityGaussian::sigma).collect();
    match pearson(&errors, &sigmas) {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(Error::InvalidInput(_)) if dists.len() < 2 => Ok(None),
        Err(e) => Err(e),
    }
}

/// All five indicators for one dataset.
pub fn evaluate(dists: &[QualityGaussian], golds: &[f64], cfg: &EceConfig) -> Result<EvalReport> {
    check_lengths(dists.len(), golds.len())?;
    if golds.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("non-finite gold score"));
    }
    Ok(EvalReport {
        pps: pps(dists, golds)?,
        ups: ups(dists, golds)?,
        nll: nll(dists, golds)?,
        ece: ece(dists, golds, cfg)?,
        sharpness: sharpness(dists)?,
        n_segments: dists.len(),
    })
}
