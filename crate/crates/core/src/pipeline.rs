//! End-to-end workflows: cross-validated evaluation, calibration fitting,
//! critical-translation detection and multi-reference comparisons.
//!
//! All sample-based fitting happens in standardized units: validation golds
//! define the map, samples and golds of both sides go through it, and the
//! variance floor is applied afterwards.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_references, random_subset, sample_reference_subsets, SubsetMode,
};
use crate::baseline::{baseline_distributions, fixed_variance};
use crate::calibration::{
    apply_calibration, fit_standardizer, tune_affine, CalibrationSearchConfig, Standardizer,
};
use crate::distribution::{fit_gaussian, DEFAULT_MIN_SIGMA2};
use crate::error::{Error, Result};
use crate::ingestion::{make_folds, split, Dataset, FoldPlan};
use crate::metrics::{evaluate, EceConfig};
use crate::nonparametric::{
    default_nonparametric_ece, evaluate_nonparametric, NonparametricReport,
};
use crate::numeric;
use crate::retrieval::{
    build_target_set, retrieval_report, tune_q_err, QErr, RiskConfig, ScoredSegment,
};
use crate::types::{
    CalibrationParams, EvalReport, QualityGaussian, RetrievalReport, SampleMatrix, Strategy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Gaussian fit plus affine variance calibration.
    #[default]
    Parametric,
    /// Percentile intervals straight from the samples.
    Nonparametric,
    /// Point estimate with one validation-tuned variance.
    Baseline,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parametric" => Ok(Method::Parametric),
            "nonparametric" => Ok(Method::Nonparametric),
            "baseline" => Ok(Method::Baseline),
            _ => Err(Error::invalid(format!(
                "unknown method `{s}` (expected parametric, nonparametric or baseline)"
            ))),
        }
    }
}

/// Which reference columns feed the aggregated sample set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefSelection {
    #[default]
    All,
    /// The same columns for every segment.
    Fixed(Vec<usize>),
    /// An independent seeded `k`-subset per segment.
    Sampled { k: usize },
}

impl RefSelection {
    pub fn label(&self) -> String {
        match self {
            RefSelection::All => "all".into(),
            RefSelection::Fixed(cols) => {
                let cols: Vec<String> = cols.iter().map(usize::to_string).collect();
                format!("[{}]", cols.join(","))
            }
            RefSelection::Sampled { k } => format!("sampled-{k}"),
        }
    }
}

impl std::str::FromStr for RefSelection {
    type Err = Error;

    /// `all`, `sampled:K`, or a comma-separated list of column indices.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(RefSelection::All);
        }
        if let Some(k) = s.strip_prefix("sampled:") {
            let k = k
                .parse()
                .map_err(|_| Error::invalid(format!("bad subset size in `{s}`")))?;
            return Ok(RefSelection::Sampled { k });
        }
        let cols = s
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                Error::invalid(format!(
                    "bad reference selection `{s}` (expected all, sampled:K or indices like 0,2)"
                ))
            })?;
        Ok(RefSelection::Fixed(cols))
    }
}

/// Collapses every record's reference columns into one, per `refs`.
///
/// The point estimate survives only when all references are kept.
pub fn aggregate_dataset(dataset: &Dataset, refs: &RefSelection, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_refs = dataset.metadata.n_refs;
    if let RefSelection::Sampled { k } = refs {
        if *k == 0 || *k > n_refs {
            return Err(Error::invalid(format!(
                "cannot sample {k} references out of {n_refs}"
            )));
        }
    }
    let records = dataset
        .records
        .iter()
        .map(|r| {
            let subset = match refs {
                RefSelection::All => None,
                RefSelection::Fixed(cols) => Some(cols.clone()),
                RefSelection::Sampled { k } => Some(random_subset(n_refs, *k, &mut rng)),
            };
            let agg = aggregate_references(&r.samples, subset.as_deref())?;
            let mut out = r.clone();
            out.samples = SampleMatrix::single_reference(agg)?;
            if !matches!(refs, RefSelection::All) {
                out.point_estimate = None;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = dataset.metadata.clone();
    metadata.n_refs = 1;
    Dataset::new(metadata, records)
}

/// Knobs shared by every workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    /// ECE bins; `None` picks 100 (parametric, baseline) or 20 (nonparametric).
    pub ece_bins: Option<usize>,
    pub refs: RefSelection,
    pub min_sigma2: f64,
    /// Skip the affine variance map (parametric only).
    pub calibrate: bool,
    pub search: CalibrationSearchConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            method: Method::Parametric,
            k: 5,
            seed: 0,
            ece_bins: None,
            refs: RefSelection::All,
            min_sigma2: DEFAULT_MIN_SIGMA2,
            calibrate: true,
            search: CalibrationSearchConfig::default(),
        }
    }
}

impl EvalOptions {
    pub fn ece_config(&self) -> EceConfig {
        match (self.ece_bins, self.method) {
            (Some(m), _) => EceConfig::with_bins(m),
            (None, Method::Nonparametric) => default_nonparametric_ece(),
            (None, _) => EceConfig::default(),
        }
    }

    fn search_config(&self) -> CalibrationSearchConfig {
        let mut search = self.search.clone();
        search.ece_bins = self.ece_config().n_bins;
        search
    }
}

/// One row of indicators; entries a method cannot produce are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub pps: f64,
    pub ups: Option<f64>,
    pub nll: Option<f64>,
    pub ece: f64,
    pub sharpness: Option<f64>,
    pub n_segments: usize,
}

impl From<EvalReport> for MetricRow {
    fn from(r: EvalReport) -> Self {
        Self {
            pps: r.pps,
            ups: r.ups,
            nll: Some(r.nll),
            ece: r.ece,
            sharpness: Some(r.sharpness),
            n_segments: r.n_segments,
        }
    }
}

impl From<NonparametricReport> for MetricRow {
    fn from(r: NonparametricReport) -> Self {
        Self {
            pps: r.pps_median,
            ups: None,
            nll: None,
            ece: r.ece,
            sharpness: None,
            n_segments: r.n_segments,
        }
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    numeric::mean(values).unwrap_or(f64::NAN)
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let all: Option<Vec<f64>> = values.collect();
    all.and_then(numeric::mean)
}

/// Unweighted mean over rows; an optional entry survives only if every row has it.
pub fn mean_row(rows: &[MetricRow]) -> MetricRow {
    MetricRow {
        pps: mean_of(rows.iter().map(|r| r.pps)),
        ups: mean_opt(rows.iter().map(|r| r.ups)),
        nll: mean_opt(rows.iter().map(|r| r.nll)),
        ece: mean_of(rows.iter().map(|r| r.ece)),
        sharpness: mean_opt(rows.iter().map(|r| r.sharpness)),
        n_segments: rows.iter().map(|r| r.n_segments).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub metrics: MetricRow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationParams>,
    /// Fixed variance of the baseline, standardized units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_sigma2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub refs: String,
    pub ece_bins: usize,
    /// How fold rows are combined into `mean`.
    pub combination: String,
    pub system_coverage_complete: bool,
    pub folds: Vec<FoldReport>,
    pub mean: MetricRow,
}

fn golds(dataset: &Dataset) -> Result<Vec<f64>> {
    dataset
        .records
        .iter()
        .map(|r| {
            r.gold_value().ok_or_else(|| {
                Error::invalid(format!("segment `{}` has no gold score", r.segment_id))
            })
        })
        .collect()
}

fn pooled_samples(dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    dataset
        .records
        .iter()
        .map(|r| aggregate_references(&r.samples, None))
        .collect()
}

fn sample_means(samples: &[Vec<f64>]) -> Vec<f64> {
    samples.iter().map(|s| mean_of(s.iter().copied())).collect()
}

fn point_estimates(dataset: &Dataset, samples: &[Vec<f64>]) -> Vec<f64> {
    dataset
        .records
        .iter()
        .zip(samples)
        .map(|(r, s)| {
            r.point_estimate
                .unwrap_or_else(|| mean_of(s.iter().copied()))
        })
        .collect()
}

/// Gaussian fits on standardized samples.
pub fn fit_standardized(
    samples: &[Vec<f64>],
    std: &Standardizer,
    min_sigma2: f64,
) -> Result<Vec<QualityGaussian>> {
    samples
        .par_iter()
        .map(|s| fit_gaussian(&std.values(s), min_sigma2))
        .collect()
}

/// A fitted parametric model: standardization, floor and variance map.
#[derive(Debug, Clone, PartialEq)]
struct ParametricModel {
    params: CalibrationParams,
    min_sigma2: f64,
}

impl ParametricModel {
    fn fit(validation: &Dataset, opts: &EvalOptions) -> Result<Self> {
        let samples = pooled_samples(validation)?;
        let val_golds = golds(validation)?;
        let std = fit_standardizer(&val_golds, &sample_means(&samples))?;
        let search = opts.search_config();
        let mut params = if opts.calibrate {
            let dists = fit_standardized(&samples, &std, opts.min_sigma2)?;
            let pairs: Vec<(QualityGaussian, f64)> =
                dists.into_iter().zip(std.values(&val_golds)).collect();
            tune_affine(&pairs, &search)?
        } else {
            CalibrationParams::identity(search.ece_bins)
        };
        params.std_mean = std.mean;
        params.std_scale = std.scale;
        Ok(Self {
            params,
            min_sigma2: opts.min_sigma2,
        })
    }

    fn predict(&self, samples: &[Vec<f64>]) -> Result<Vec<QualityGaussian>> {
        fit_standardized(samples, &self.params.standardizer(), self.min_sigma2)?
            .iter()
            .map(|d| apply_calibration(d, &self.params))
            .collect()
    }
}

/// Fits on `validation`, scores `test`.
pub fn evaluate_split(
    validation: &Dataset,
    test: &Dataset,
    opts: &EvalOptions,
) -> Result<FoldReport> {
    let ece_cfg = opts.ece_config();
    ece_cfg.validate()?;
    let test_samples = pooled_samples(test)?;
    let test_golds = golds(test)?;
    let (metrics, calibration, baseline_sigma2) = match opts.method {
        Method::Parametric => {
            let model = ParametricModel::fit(validation, opts)?;
            let dists = model.predict(&test_samples)?;
            let std = model.params.standardizer();
            let report = evaluate(&dists, &std.values(&test_golds), &ece_cfg)?;
            (MetricRow::from(report), Some(model.params), None)
        }
        Method::Baseline => {
            let val_samples = pooled_samples(validation)?;
            let val_golds = golds(validation)?;
            let val_points = point_estimates(validation, &val_samples);
            let std = fit_standardizer(&val_golds, &val_points)?;
            let pairs: Vec<(f64, f64)> = std
                .values(&val_points)
                .into_iter()
                .zip(std.values(&val_golds))
                .collect();
            let sigma2 = fixed_variance(&pairs)?;
            let dists =
                baseline_distributions(&std.values(&point_estimates(test, &test_samples)), sigma2)?;
            let report = evaluate(&dists, &std.values(&test_golds), &ece_cfg)?;
            (MetricRow::from(report), None, Some(sigma2))
        }
        Method::Nonparametric => {
            let report = evaluate_nonparametric(&test_samples, &test_golds, &ece_cfg)?;
            (MetricRow::from(report), None, None)
        }
    };
    Ok(FoldReport {
        fold: 0,
        n_validation: validation.len(),
        n_test: test.len(),
        metrics,
        calibration,
        baseline_sigma2,
    })
}

/// k-fold cross-validation over a precomputed fold plan.
pub fn cross_validate_with_plan(
    dataset: &Dataset,
    plan: &FoldPlan,
    opts: &EvalOptions,
) -> Result<CvReport> {
    let data = aggregate_dataset(dataset, &opts.refs, opts.seed)?;
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (validation, test) = split(&data, plan, f)?;
            if validation.is_empty() || test.is_empty() {
                return Err(Error::invalid(format!("fold {f} leaves an empty side")));
            }
            let mut report = evaluate_split(&validation, &test, opts)?;
            report.fold = f;
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<MetricRow> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(CvReport {
        method: opts.method,
        k: plan.k,
        seed: opts.seed,
        refs: opts.refs.label(),
        ece_bins: opts.ece_config().n_bins,
        combination: "unweighted mean over folds".into(),
        system_coverage_complete: plan.system_coverage_complete,
        folds,
        mean: mean_row(&rows),
    })
}

pub fn cross_validate(dataset: &Dataset, opts: &EvalOptions) -> Result<CvReport> {
    let plan = make_folds(dataset, opts.k, opts.seed)?;
    cross_validate_with_plan(dataset, &plan, opts)
}

/// Calibration parameters fitted on the whole dataset.
pub fn calibrate_dataset(dataset: &Dataset, opts: &EvalOptions) -> Result<CalibrationParams> {
    let data = aggregate_dataset(dataset, &opts.refs, opts.seed)?;
    Ok(ParametricModel::fit(&data, opts)?.params)
}

/// Calibrated predictive distributions (standardized units) for `dataset`.
pub fn predict(
    dataset: &Dataset,
    params: &CalibrationParams,
    min_sigma2: f64,
) -> Result<Vec<QualityGaussian>> {
    let model = ParametricModel {
        params: params.clone(),
        min_sigma2,
    };
    model.predict(&pooled_samples(dataset)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub eval: EvalOptions,
    pub risk: RiskConfig,
    pub strategies: Vec<Strategy>,
    /// Fold whose documents form the test side.
    pub test_fold: usize,
    /// Cutoffs for the curves; `None` gives `1..=min(n_test, 10·|target|)`.
    pub n_values: Option<Vec<usize>>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            eval: EvalOptions::default(),
            risk: RiskConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            test_fold: 0,
            n_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub n_validation: usize,
    pub n_test: usize,
    pub worst_fraction: f64,
    pub length_normalize: bool,
    pub target: Vec<String>,
    pub calibration: CalibrationParams,
    pub reports: Vec<RetrievalReport>,
}

fn scored(
    dataset: &Dataset,
    dists: Vec<QualityGaussian>,
    std: &Standardizer,
) -> Result<Vec<ScoredSegment>> {
    let samples = pooled_samples(dataset)?;
    let points = point_estimates(dataset, &samples);
    Ok(dataset
        .records
        .iter()
        .zip(dists)
        .zip(points)
        .map(|((r, dist), q)| ScoredSegment {
            segment_id: r.segment_id.clone(),
            point_estimate: std.value(q),
            dist,
        })
        .collect())
}

fn detection_golds(dataset: &Dataset, risk: &RiskConfig) -> Result<Vec<f64>> {
    dataset
        .records
        .iter()
        .map(|r| risk.detection_gold(r))
        .collect()
}

/// Critical-translation detection on one validation/test split.
///
/// The model and `q_err` are tuned on the validation side; rankings and the
/// worst-fraction target set come from the test side.
pub fn detect_split(
    validation: &Dataset,
    test: &Dataset,
    opts: &DetectOptions,
) -> Result<DetectReport> {
    opts.risk.validate()?;
    if opts.strategies.is_empty() {
        return Err(Error::invalid("no ranking strategies requested"));
    }
    let mut eval = opts.eval.clone();
    eval.method = Method::Parametric;
    let model = ParametricModel::fit(validation, &eval)?;
    let std = model.params.standardizer();

    let test_dists = model.predict(&pooled_samples(test)?)?;
    let test_segments = scored(test, test_dists, &std)?;
    let test_golds = detection_golds(test, &opts.risk)?;
    let ids: Vec<String> = test.records.iter().map(|r| r.segment_id.clone()).collect();
    let target = build_target_set(&ids, &test_golds, opts.risk.worst_fraction)?;
    if target.is_empty() {
        return Err(Error::invalid(format!(
            "a worst fraction of {} selects no segment out of {}",
            opts.risk.worst_fraction,
            test.len()
        )));
    }

    let q_err = if opts.strategies.contains(&Strategy::RiskCdf) {
        Some(match opts.risk.q_err {
            QErr::Fixed(v) => v,
            QErr::Tune => {
                let val_dists = model.predict(&pooled_samples(validation)?)?;
                let val_segments = scored(validation, val_dists, &std)?;
                let val_golds = detection_golds(validation, &opts.risk)?;
                let pairs: Vec<(ScoredSegment, f64)> =
                    val_segments.into_iter().zip(val_golds).collect();
                tune_q_err(&pairs, &opts.risk)?
            }
        })
    } else {
        None
    };

    let n_values = match &opts.n_values {
        Some(v) => v.clone(),
        None => (1..=test.len().min(10 * target.len())).collect(),
    };
    let strategies: BTreeSet<Strategy> = opts.strategies.iter().copied().collect();
    let reports = strategies
        .into_iter()
        .map(|s| retrieval_report(&test_segments, &target, s, q_err, &n_values))
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectReport {
        n_validation: validation.len(),
        n_test: test.len(),
        worst_fraction: opts.risk.worst_fraction,
        length_normalize: opts.risk.length_normalize,
        target: target.into_iter().collect(),
        calibration: model.params,
        reports,
    })
}

pub fn detect(dataset: &Dataset, opts: &DetectOptions) -> Result<DetectReport> {
    let data = aggregate_dataset(dataset, &opts.eval.refs, opts.eval.seed)?;
    let plan = make_folds(&data, opts.eval.k, opts.eval.seed)?;
    let (validation, test) = split(&data, &plan, opts.test_fold)?;
    detect_split(&validation, &test, opts)
}

/// A reference-combination pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefPattern {
    /// `S-k`: k references per segment.
    Subset(usize),
    /// All references combined.
    Mul,
}

impl std::str::FromStr for RefPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mul") {
            return Ok(RefPattern::Mul);
        }
        s.strip_prefix("S-")
            .or_else(|| s.strip_prefix("s-"))
            .and_then(|k| k.parse().ok())
            .filter(|&k| k > 0)
            .map(RefPattern::Subset)
            .ok_or_else(|| Error::invalid(format!("unknown pattern `{s}` (expected S-k or Mul)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultirefRow {
    pub label: String,
    pub report: CvReport,
}

/// Cross-validated parametric evaluation for each reference pattern.
///
/// `S-k` yields a row with a fresh random k-subset per segment, followed by
/// one row per fixed k-subset of columns. All rows share one fold plan.
pub fn multiref(
    dataset: &Dataset,
    patterns: &[RefPattern],
    opts: &EvalOptions,
) -> Result<Vec<MultirefRow>> {
    let n_refs = dataset.metadata.n_refs;
    let plan = make_folds(dataset, opts.k, opts.seed)?;
    let mut selections: Vec<(String, RefSelection)> = Vec::new();
    for p in patterns {
        match *p {
            RefPattern::Mul => selections.push(("Mul".into(), RefSelection::All)),
            RefPattern::Subset(k) => {
                selections.push((format!("S-{k}"), RefSelection::Sampled { k }));
                for subset in
                    sample_reference_subsets(n_refs, k, SubsetMode::Exhaustive, opts.seed)?
                {
                    let sel = RefSelection::Fixed(subset);
                    selections.push((format!("S-{k}{}", sel.label()), sel));
                }
            }
        }
    }
    selections
        .into_iter()
        .map(|(label, refs)| {
            let mut o = opts.clone();
            o.method = Method::Parametric;
            o.refs = refs;
            Ok(MultirefRow {
                label,
                report: cross_validate_with_plan(dataset, &plan, &o)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate, Miscalibration, NoiseModel, SimSpec};

    fn spec(seed: u64) -> SimSpec {
        SimSpec {
            n_segments: 400,
            n_samples: 20,
            n_refs: 3,
            seed,
            rho: 0.7,
            noise_model: NoiseModel::Heteroscedastic {
                sigma_min: 0.2,
                sigma_max: 1.0,
            },
            miscalibration: Miscalibration::default(),
            ref_noise: 0.3,
            docs_per_dataset: 25,
            systems: 4,
            language_pair: None,
        }
    }

    #[test]
    fn parses_selections() {
        assert_eq!("all".parse::<RefSelection>().unwrap(), RefSelection::All);
        assert_eq!(
            "0,2".parse::<RefSelection>().unwrap(),
            RefSelection::Fixed(vec![0, 2])
        );
        assert_eq!(
            "sampled:2".parse::<RefSelection>().unwrap(),
            RefSelection::Sampled { k: 2 }
        );
        assert!("x".parse::<RefSelection>().is_err());
        assert_eq!("S-2".parse::<RefPattern>().unwrap(), RefPattern::Subset(2));
        assert_eq!("Mul".parse::<RefPattern>().unwrap(), RefPattern::Mul);
        assert!("S-0".parse::<RefPattern>().is_err());
    }

    #[test]
    fn aggregation_drops_point_estimate_for_subsets() {
        let d = generate(&spec(1)).unwrap();
        let all = aggregate_dataset(&d, &RefSelection::All, 0).unwrap();
        assert_eq!(all.metadata.n_refs, 1);
        assert!(all.records[0].point_estimate.is_some());
        let one = aggregate_dataset(&d, &RefSelection::Fixed(vec![1]), 0).unwrap();
        assert_eq!(
            one.records[0].samples.column(0),
            d.records[0].samples.column(1)
        );
        assert!(one.records[0].point_estimate.is_none());
        assert!(aggregate_dataset(&d, &RefSelection::Sampled { k: 4 }, 0).is_err());
    }

    #[test]
    fn cross_validation_is_deterministic_and_complete() {
        let d = generate(&spec(2)).unwrap();
        let opts = EvalOptions::default();
        let a = cross_validate(&d, &opts).unwrap();
        let b = cross_validate(&d, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.len(), 5);
        assert_eq!(a.folds.iter().map(|f| f.n_test).sum::<usize>(), d.len());
        assert!(a.mean.ups.is_some());
        assert!(a.mean.pps > 0.3);
    }

    #[test]
    fn baseline_has_no_ups() {
        let d = generate(&spec(3)).unwrap();
        let opts = EvalOptions {
            method: Method::Baseline,
            ..EvalOptions::default()
        };
        let r = cross_validate(&d, &opts).unwrap();
        assert!(r.mean.ups.is_none());
        assert!(r.folds.iter().all(|f| f.baseline_sigma2.is_some()));
    }

    #[test]
    fn nonparametric_uses_twenty_bins() {
        let d = generate(&spec(4)).unwrap();
        let opts = EvalOptions {
            method: Method::Nonparametric,
            ..EvalOptions::default()
        };
        let r = cross_validate(&d, &opts).unwrap();
        assert_eq!(r.ece_bins, 20);
        assert!(r.mean.nll.is_none());
    }

    #[test]
    fn missing_gold_is_invalid() {
        let mut d = generate(&spec(5)).unwrap();
        d.records[0].gold = None;
        assert!(matches!(
            cross_validate(&d, &EvalOptions::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn detect_reports_every_strategy() {
        let mut s = spec(6);
        s.n_segments = 1000;
        let d = generate(&s).unwrap();
        let r = detect(&d, &DetectOptions::default()).unwrap();
        assert_eq!(r.reports.len(), 3);
        assert!(!r.target.is_empty());
        for rep in &r.reports {
            assert_eq!(rep.ranking.len(), r.n_test);
        }
    }
}
