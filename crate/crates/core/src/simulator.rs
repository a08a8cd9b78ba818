//! Synthetic datasets with planted uncertainty structure.
//!
//! Randomness comes from ChaCha8 seeded with `SimSpec::seed`; uniforms are
//! `rand`'s standard 53-bit `[0, 1)` doubles and normals use the Marsaglia
//! polar method, caching the second variate of each accepted pair.
//!
//! Per segment `j`, draws happen in this order:
//!
//! 1. document index `floor(u · docs)`,
//! 2. MT length `3 + floor(u · 38)` words,
//! 3. true spread `s` (constant, or uniform on `[σ_min, σ_max]`),
//! 4. latent quality `z ~ N(0, τ²)`,
//! 5. gold `z + sqrt(a·s² + b) · ε`,
//! 6. reference offsets `δ_r = ref_noise · ε_r` for each reference,
//! 7. samples `z + δ_r + s · ε_ir`, reference-major.
//!
//! Under the homoscedastic model each reference column's `ε` is rescaled
//! about its mean to unit sample variance, so every segment's fitted spread
//! is exactly `σ` when there is one reference.
//!
//! `τ² = v̄ ρ² / (1 − ρ²)` with `v̄ = a·E[s²] + b`, so the latent quality
//! correlates with the gold at `ρ`. At `ρ = 1`, `τ = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{Dataset, DatasetMetadata, SamplingMethod};
use crate::types::{Gold, QualityGaussian, SampleMatrix, SegmentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    Homoscedastic { sigma: f64 },
    Heteroscedastic { sigma_min: f64, sigma_max: f64 },
}

impl NoiseModel {
    fn mean_square(&self) -> f64 {
        match *self {
            NoiseModel::Homoscedastic { sigma } => sigma * sigma,
            NoiseModel::Heteroscedastic {
                sigma_min: a,
                sigma_max: b,
            } => (a * a + a * b + b * b) / 3.0,
        }
    }
}

/// Gold noise variance is `a_true · s² + b_true` for emitted spread `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Miscalibration {
    pub a_true: f64,
    pub b_true: f64,
}

impl Default for Miscalibration {
    fn default() -> Self {
        Self {
            a_true: 1.0,
            b_true: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n_segments: usize,
    pub n_samples: usize,
    pub n_refs: usize,
    #[serde(default)]
    pub seed: u64,
    pub rho: f64,
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub miscalibration: Miscalibration,
    /// Standard deviation of the per-reference offset.
    #[serde(default)]
    pub ref_noise: f64,
    pub docs_per_dataset: usize,
    pub systems: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_pair: Option<String>,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::invalid("n_segments must be positive"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples must be at least 2"));
        }
        if self.n_refs == 0 || self.docs_per_dataset == 0 || self.systems == 0 {
            return Err(Error::invalid(
                "n_refs, docs_per_dataset and systems must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        match self.noise_model {
            NoiseModel::Homoscedastic { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return Err(Error::invalid(format!(
                    "sigma must be finite and non-negative, got {sigma}"
                )));
            }
            NoiseModel::Heteroscedastic {
                sigma_min,
                sigma_max,
            } if !(sigma_min > 0.0 && sigma_max >= sigma_min && sigma_max.is_finite()) => {
                return Err(Error::invalid(format!(
                    "need 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
                )));
            }
            _ => {}
        }
        let Miscalibration { a_true, b_true } = self.miscalibration;
        if !(a_true >= 0.0 && b_true >= 0.0 && a_true.is_finite() && b_true.is_finite()) {
            return Err(Error::invalid(
                "miscalibration parameters must be finite and non-negative",
            ));
        }
        if !(self.ref_noise >= 0.0 && self.ref_noise.is_finite()) {
            return Err(Error::invalid("ref_noise must be finite and non-negative"));
        }
        if self.rho < 1.0 && self.mean_gold_noise() == 0.0 {
            return Err(Error::invalid("rho < 1 needs nonzero gold noise"));
        }
        Ok(())
    }

    fn mean_gold_noise(&self) -> f64 {
        self.miscalibration.a_true * self.noise_model.mean_square() + self.miscalibration.b_true
    }

    /// Standard deviation of the latent quality.
    pub fn latent_sd(&self) -> f64 {
        if self.rho >= 1.0 {
            1.0
        } else {
            (self.mean_gold_noise() * self.rho * self.rho / (1.0 - self.rho * self.rho)).sqrt()
        }
    }
}

/// Standard normals by the Marsaglia polar method.
#[derive(Debug, Clone)]
pub struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * libm::log(s) / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut src = NormalSource::new(spec.seed);
    let tau = spec.latent_sd();
    let Miscalibration { a_true, b_true } = spec.miscalibration;
    let mut records = Vec::with_capacity(spec.n_segments);
    for j in 0..spec.n_segments {
        let doc = ((src.uniform() * spec.docs_per_dataset as f64) as usize)
            .min(spec.docs_per_dataset - 1);
        let mt_len = 3 + (src.uniform() * 38.0) as u32;
        let s = match spec.noise_model {
            NoiseModel::Homoscedastic { sigma } => sigma,
            NoiseModel::Heteroscedastic {
                sigma_min,
                sigma_max,
            } => sigma_min + src.uniform() * (sigma_max - sigma_min),
        };
        let z = tau * src.normal();
        let gold = z + (a_true * s * s + b_true).sqrt() * src.normal();
        let offsets: Vec<f64> = (0..spec.n_refs)
            .map(|_| spec.ref_noise * src.normal())
            .collect();
        let homoscedastic = matches!(spec.noise_model, NoiseModel::Homoscedastic { .. });
        let columns: Vec<Vec<f64>> = offsets
            .iter()
            .map(|d| {
                let mut eps: Vec<f64> = (0..spec.n_samples).map(|_| src.normal()).collect();
                if homoscedastic {
                    unit_spread(&mut eps);
                }
                eps.into_iter().map(|e| z + d + s * e).collect()
            })
            .collect();
        let point = z + offsets.iter().sum::<f64>() / spec.n_refs as f64;
        records.push(SegmentRecord {
            segment_id: format!("seg{j:05}"),
            doc_id: format!("doc{doc:03}"),
            system_id: format!("sys{}", j % spec.systems),
            mt_len_words: mt_len,
            gold: Some(Gold::Score(gold)),
            point_estimate: Some(point),
            samples: SampleMatrix::from_reference_columns(columns)?,
        });
    }
    let metadata = DatasetMetadata {
        language_pair: spec.language_pair.clone(),
        score_type: Some("simulated".into()),
        n_samples: spec.n_samples,
        n_refs: spec.n_refs,
        sampling_method: SamplingMethod::External,
        simulation: Some(spec.clone()),
    };
    Dataset::new(metadata, records)
}

/// Rescales deviations from the mean so the unbiased variance is exactly 1.
fn unit_spread(eps: &mut [f64]) {
    let n = eps.len() as f64;
    let m = eps.iter().sum::<f64>() / n;
    let sd = (eps.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        for e in eps.iter_mut() {
            *e = m + (*e - m) / sd;
        }
    }
}

/// Draws one gold per distribution from that distribution itself, giving
/// data that is calibrated by construction.
pub fn golds_from_fit(dists: &[QualityGaussian], seed: u64) -> Vec<f64> {
    let mut src = NormalSource::new(seed);
    dists
        .iter()
        .map(|d| d.mu() + d.sigma() * src.normal())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec() -> SimSpec {
        SimSpec {
            n_segments: 200,
            n_samples: 20,
            n_refs: 2,
            seed: 11,
            rho: 0.6,
            noise_model: NoiseModel::Heteroscedastic {
                sigma_min: 0.2,
                sigma_max: 0.8,
            },
            miscalibration: Miscalibration::default(),
            ref_noise: 0.1,
            docs_per_dataset: 10,
            systems: 3,
            language_pair: None,
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&spec()).unwrap();
        let b = generate(&spec()).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let mut other = spec();
        other.seed = 12;
        assert_ne!(a.to_jsonl(), generate(&other).unwrap().to_jsonl());
    }

    #[test]
    fn shapes_and_ids() {
        let d = generate(&spec()).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.records[7].segment_id, "seg00007");
        assert_eq!(d.records[7].system_id, "sys1");
        assert!(d.records.iter().all(|r| (3..=40).contains(&r.mt_len_words)));
        assert_eq!(d.metadata.simulation.as_ref().unwrap(), &spec());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec();
        s.rho = 1.5;
        assert!(matches!(generate(&s), Err(Error::InvalidInput(_))));
        let mut s = spec();
        s.noise_model = NoiseModel::Heteroscedastic {
            sigma_min: 0.0,
            sigma_max: 1.0,
        };
        assert!(generate(&s).is_err());
        let mut s = spec();
        s.noise_model = NoiseModel::Homoscedastic { sigma: 0.0 };
        s.miscalibration = Miscalibration {
            a_true: 1.0,
            b_true: 0.0,
        };
        assert!(generate(&s).is_err());
    }

    #[test]
    fn homoscedastic_spread_is_exact() {
        let mut s = spec();
        s.n_refs = 1;
        s.noise_model = NoiseModel::Homoscedastic { sigma: 0.5 };
        let d = generate(&s).unwrap();
        for r in &d.records {
            let fit = crate::distribution::fit_gaussian(&r.samples.column(0), 0.0).unwrap();
            assert!((fit.sigma2() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_normals_have_unit_moments() {
        let mut src = NormalSource::new(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| src.normal()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        assert!(m.abs() < 3.0 / (n as f64).sqrt());
        assert!((v - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }
}
