//! Domain types shared by every module.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample matrix of stochastic scores, `n_samples × n_refs`.
///
/// Element `(i, r)` is the i-th stochastic score computed against reference
/// `r`. Rows are aligned across references: sample `i` of every column comes
/// from the same model instance. On disk the matrix is written
/// reference-major (`[[ref0 samples…], [ref1 samples…], …]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SampleMatrix {
    n_samples: usize,
    n_refs: usize,
    /// Sample-major storage: `values[i * n_refs + r]`.
    values: Vec<f64>,
}

impl SampleMatrix {
    /// Builds a matrix from per-reference columns.
    pub fn from_reference_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_refs = columns.len();
        if n_refs == 0 {
            return Err(Error::schema(
                "samples",
                "at least one reference column required",
            ));
        }
        let n_samples = columns[0].len();
        if n_samples == 0 {
            return Err(Error::schema("samples", "at least one sample required"));
        }
        if let Some((r, col)) = columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != n_samples)
        {
            return Err(Error::schema(
                "samples",
                format!(
                    "ragged matrix: reference {r} has {} samples, expected {n_samples}",
                    col.len()
                ),
            ));
        }
        let mut values = vec![0.0; n_samples * n_refs];
        for (r, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::schema(
                        "samples",
                        format!("non-finite value at sample {i}, reference {r}"),
                    ));
                }
                values[i * n_refs + r] = v;
            }
        }
        Ok(Self {
            n_samples,
            n_refs,
            values,
        })
    }

    /// Builds a single-reference matrix.
    pub fn single_reference(samples: Vec<f64>) -> Result<Self> {
        Self::from_reference_columns(vec![samples])
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_refs(&self) -> usize {
        self.n_refs
    }

    pub fn get(&self, sample: usize, reference: usize) -> f64 {
        self.values[sample * self.n_refs + reference]
    }

    /// Row `i`: the i-th sample scored against every reference.
    pub fn row(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.n_refs..(sample + 1) * self.n_refs]
    }

    pub fn column(&self, reference: usize) -> Vec<f64> {
        (0..self.n_samples)
            .map(|i| self.get(i, reference))
            .collect()
    }

    pub fn reference_columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_refs).map(|r| self.column(r)).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SampleMatrix {
    type Error = Error;

    fn try_from(columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_reference_columns(columns)
    }
}

impl From<SampleMatrix> for Vec<Vec<f64>> {
    fn from(m: SampleMatrix) -> Self {
        m.reference_columns()
    }
}

/// Ground-truth human score: either pre-averaged or one value per annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Score(f64),
    Annotators(Vec<f64>),
}

impl Gold {
    /// Annotator-averaged score.
    pub fn value(&self) -> f64 {
        match self {
            Gold::Score(v) => *v,
            Gold::Annotators(vs) => crate::numeric::mean(vs.iter().copied()).unwrap_or(f64::NAN),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Gold::Score(v) if !v.is_finite() => Err(Error::schema("gold", "non-finite score")),
            Gold::Annotators(vs) if vs.is_empty() => {
                Err(Error::schema("gold", "empty annotator list"))
            }
            Gold::Annotators(vs) if vs.iter().any(|v| !v.is_finite()) => {
                Err(Error::schema("gold", "non-finite annotator score"))
            }
            _ => Ok(()),
        }
    }
}

/// One (source, MT, references) unit with its stochastic scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub doc_id: String,
    pub system_id: String,
    /// Word count of the MT output.
    pub mt_len_words: u32,
    /// Absent for inference-only data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
    /// Deterministic score of the underlying system (dropout disabled).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_estimate: Option<f64>,
    pub samples: SampleMatrix,
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.segment_id.is_empty() {
            return Err(Error::schema("segment_id", "must be nonempty"));
        }
        if self.mt_len_words == 0 {
            return Err(Error::schema("mt_len_words", "must be positive"));
        }
        if let Some(g) = &self.gold {
            g.validate()?;
        }
        if let Some(p) = self.point_estimate {
            if !p.is_finite() {
                return Err(Error::schema("point_estimate", "non-finite value"));
            }
        }
        Ok(())
    }

    pub fn gold_value(&self) -> Option<f64> {
        self.gold.as_ref().map(Gold::value)
    }
}

/// Gaussian predictive distribution `N(mu, sigma2)` with `sigma2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct QualityGaussian {
    mu: f64,
    sigma2: f64,
}

#[derive(Deserialize)]
struct RawGaussian {
    mu: f64,
    sigma2: f64,
}

impl TryFrom<RawGaussian> for QualityGaussian {
    type Error = Error;

    fn try_from(raw: RawGaussian) -> Result<Self> {
        QualityGaussian::new(raw.mu, raw.sigma2)
    }
}

impl QualityGaussian {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid(format!("mean must be finite, got {mu}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::DegenerateDistribution(format!(
                "variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Closed quality interval `[q_min, q_max]` at confidence level `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub gamma: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, q: f64) -> bool {
        self.q_min <= q && q <= self.q_max
    }

    pub fn width(&self) -> f64 {
        self.q_max - self.q_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    /// Sample variance with divisor `N − 1`.
    #[default]
    Unbiased,
}

/// Standardization statistics plus the affine variance map `σ² ↦ ασ² + β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub std_mean: f64,
    pub std_scale: f64,
    pub alpha: f64,
    pub beta: f64,
    pub ece_bins: usize,
    #[serde(default)]
    pub variance_estimator: VarianceEstimator,
}

impl CalibrationParams {
    pub fn identity(ece_bins: usize) -> Self {
        Self {
            std_mean: 0.0,
            std_scale: 1.0,
            alpha: 1.0,
            beta: 0.0,
            ece_bins,
            variance_estimator: VarianceEstimator::Unbiased,
        }
    }
}

/// The five indicators for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pps: f64,
    /// `None` when σ̂ is constant (fixed-variance baseline).
    pub ups: Option<f64>,
    pub nll: f64,
    pub ece: f64,
    pub sharpness: f64,
    pub n_segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Ascending by the system's point estimate q̂.
    PointEstimate,
    /// Ascending by the predictive mean μ̂.
    MeanOfSamples,
    /// Descending by the translation risk P(Q ≤ q_err).
    RiskCdf,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::PointEstimate,
        Strategy::MeanOfSamples,
        Strategy::RiskCdf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PointEstimate => "point_estimate",
            Strategy::MeanOfSamples => "mean_of_samples",
            Strategy::RiskCdf => "risk_cdf",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Worst-first ranking and its recall/precision curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub strategy: Strategy,
    pub ranking: Vec<String>,
    pub recall_at: BTreeMap<usize, f64>,
    pub precision_at: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_err: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_layout_is_sample_major() {
        let m = SampleMatrix::from_reference_columns(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.n_samples(), 2);
        assert_eq!(m.n_refs(), 2);
        assert_eq!(m.row(0), &[1.0, 3.0]);
        assert_eq!(m.row(1), &[2.0, 4.0]);
        assert_eq!(m.column(1), vec![3.0, 4.0]);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let err =
            SampleMatrix::from_reference_columns(vec![vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "samples"));
        assert!(SampleMatrix::from_reference_columns(vec![]).is_err());
        assert!(SampleMatrix::single_reference(vec![]).is_err());
        assert!(SampleMatrix::single_reference(vec![f64::NAN]).is_err());
    }

    #[test]
    fn gaussian_rejects_nonpositive_variance() {
        assert!(QualityGaussian::new(0.0, 0.0).is_err());
        assert!(QualityGaussian::new(0.0, -1.0).is_err());
        assert!(QualityGaussian::new(f64::NAN, 1.0).is_err());
        let parsed: std::result::Result<QualityGaussian, _> =
            serde_json::from_str(r#"{"mu":0.0,"sigma2":0.0}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn gold_annotators_average() {
        let g = Gold::Annotators(vec![1.0, 2.0, 6.0]);
        assert_eq!(g.value(), 3.0);
        let parsed: Gold = serde_json::from_str("[1.0, 2.0, 6.0]").unwrap();
        assert_eq!(parsed, g);
        let parsed: Gold = serde_json::from_str("0.5").unwrap();
        assert_eq!(parsed, Gold::Score(0.5));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("worst".parse::<Strategy>().is_err());
    }
}
