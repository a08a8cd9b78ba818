//! Critical-translation detection as a retrieval problem.
//!
//! Segments are ranked worst-first by one of three [`Strategy`]s and scored
//! against the set of segments with the lowest gold quality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::distribution::cdf;
use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::types::{QualityGaussian, RetrievalReport, SegmentRecord, Strategy};

/// Direction of the gold scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldOrientation {
    /// DA/z-scores: larger is better.
    #[default]
    HigherIsBetter,
    /// MQM-style penalties: larger is worse.
    LowerIsBetter,
}

impl GoldOrientation {
    /// Maps a gold score onto a "higher is better" scale.
    pub fn quality(&self, gold: f64) -> f64 {
        match self {
            GoldOrientation::HigherIsBetter => gold,
            GoldOrientation::LowerIsBetter => -gold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QErr {
    Fixed(f64),
    Tune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    /// Size of the target set as a fraction of the dataset.
    pub worst_fraction: f64,
    pub q_err: QErr,
    /// Cutoffs N averaged during threshold tuning; defaults to every N from
    /// 1 to ten times the target size.
    #[serde(default)]
    pub tune_recall_points: Option<Vec<usize>>,
    #[serde(default)]
    pub length_normalize: bool,
    #[serde(default)]
    pub orientation: GoldOrientation,
    /// Number of grid points per tuning round (deciles of the range → 11).
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_refine_rounds")]
    pub refine_rounds: usize,
}

fn default_grid_points() -> usize {
    11
}

fn default_refine_rounds() -> usize {
    2
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            worst_fraction: 0.02,
            q_err: QErr::Tune,
            tune_recall_points: None,
            length_normalize: false,
            orientation: GoldOrientation::HigherIsBetter,
            grid_points: default_grid_points(),
            refine_rounds: default_refine_rounds(),
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.worst_fraction > 0.0 && self.worst_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "worst_fraction must lie in (0, 1), got {}",
                self.worst_fraction
            )));
        }
        if let Some(points) = &self.tune_recall_points {
            if points.is_empty() || points.contains(&0) {
                return Err(Error::invalid(
                    "tune_recall_points must be nonempty positive integers",
                ));
            }
        }
        if let QErr::Fixed(v) = self.q_err {
            if !v.is_finite() {
                return Err(Error::invalid("q_err must be finite"));
            }
        }
        if self.grid_points == 0 {
            return Err(Error::invalid("grid_points must be positive"));
        }
        Ok(())
    }

    /// Gold score of a record on the detection scale: annotator average,
    /// optionally divided by MT length, oriented so that lower is worse.
    pub fn detection_gold(&self, record: &SegmentRecord) -> Result<f64> {
        let raw = record.gold_value().ok_or_else(|| {
            Error::invalid(format!("segment {} has no gold score", record.segment_id))
        })?;
        let scaled = if self.length_normalize {
            normalize_by_length(raw, record.mt_len_words)?
        } else {
            raw
        };
        Ok(self.orientation.quality(scaled))
    }
}

/// Per-word score.
pub fn normalize_by_length(gold: f64, mt_len_words: u32) -> Result<f64> {
    if mt_len_words == 0 {
        return Err(Error::invalid("MT length must be at least one word"));
    }
    Ok(gold / f64::from(mt_len_words))
}

/// Number of targets for a dataset of size `n`: `⌊fraction · n⌋`.
pub fn target_size(n: usize, worst_fraction: f64) -> usize {
    // The epsilon absorbs representation error, e.g. (2/3)·30 = 19.999….
    ((worst_fraction * n as f64) + 1e-9).floor() as usize
}

/// Ids of the `n` lowest golds, ties broken by id.
pub fn worst_n(ids: &[String], golds: &[f64], n: usize) -> Result<BTreeSet<String>> {
    if ids.len() != golds.len() {
        return Err(Error::invalid("ids and golds differ in length"));
    }
    if golds.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("non-finite gold score"));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        golds[a]
            .total_cmp(&golds[b])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    Ok(order.into_iter().take(n).map(|i| ids[i].clone()).collect())
}

/// Target set: the `⌊worst_fraction · |D|⌋` lowest golds.
pub fn build_target_set(
    ids: &[String],
    golds: &[f64],
    worst_fraction: f64,
) -> Result<BTreeSet<String>> {
    if !(worst_fraction > 0.0 && worst_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "worst_fraction must lie in (0, 1), got {worst_fraction}"
        )));
    }
    worst_n(ids, golds, target_size(ids.len(), worst_fraction))
}

/// A segment as seen by the ranking strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub segment_id: String,
    pub point_estimate: f64,
    pub dist: QualityGaussian,
}

/// Worst-first ordering of `segments`.
///
/// `risk_cdf` orders by the standardized margin `(q_err − μ̂)/σ̂`: Φ is
/// strictly increasing, so this is the order of `P(Q ≤ q_err)` without
/// saturation ties in the far tails. Remaining ties fall back to μ̂ and then
/// the segment id.
pub fn rank(
    segments: &[ScoredSegment],
    strategy: Strategy,
    q_err: Option<f64>,
) -> Result<Vec<String>> {
    let mut order: Vec<&ScoredSegment> = segments.iter().collect();
    let by_id = |a: &ScoredSegment, b: &ScoredSegment| a.segment_id.cmp(&b.segment_id);
    match strategy {
        Strategy::PointEstimate => order.sort_by(|a, b| {
            a.point_estimate
                .total_cmp(&b.point_estimate)
                .then_with(|| by_id(a, b))
        }),
        Strategy::MeanOfSamples => order.sort_by(|a, b| {
            a.dist
                .mu()
                .total_cmp(&b.dist.mu())
                .then_with(|| by_id(a, b))
        }),
        Strategy::RiskCdf => {
            let chi = q_err.ok_or_else(|| Error::invalid("risk_cdf ranking needs q_err"))?;
            if !chi.is_finite() {
                return Err(Error::invalid("q_err must be finite"));
            }
            let margin = |s: &ScoredSegment| (chi - s.dist.mu()) / s.dist.sigma();
            order.sort_by(|a, b| {
                margin(b)
                    .total_cmp(&margin(a))
                    .then_with(|| a.dist.mu().total_cmp(&b.dist.mu()))
                    .then_with(|| by_id(a, b))
            });
        }
    }
    Ok(order.into_iter().map(|s| s.segment_id.clone()).collect())
}

/// Translation risk `P(Q ≤ q_err)` per segment.
pub fn risks(segments: &[ScoredSegment], q_err: f64) -> Vec<f64> {
    segments.iter().map(|s| cdf(&s.dist, q_err)).collect()
}

pub type Curve = BTreeMap<usize, f64>;

/// Recall@N and precision@N of a worst-first ranking.
pub fn recall_precision_at(
    ranking: &[String],
    target: &BTreeSet<String>,
    n_values: &[usize],
) -> Result<(Curve, Curve)> {
    if target.is_empty() {
        return Err(Error::invalid("target set is empty; recall is undefined"));
    }
    if n_values.contains(&0) {
        return Err(Error::invalid("cutoffs must be positive"));
    }
    // hits[i] = number of targets among the first i ranked ids.
    let mut hits = Vec::with_capacity(ranking.len() + 1);
    hits.push(0usize);
    for id in ranking {
        let last = *hits.last().unwrap();
        hits.push(last + usize::from(target.contains(id)));
    }
    let mut recall = Curve::new();
    let mut precision = Curve::new();
    for &n in n_values {
        let h = hits[n.min(ranking.len())];
        recall.insert(n, h as f64 / target.len() as f64);
        precision.insert(n, h as f64 / n as f64);
    }
    Ok((recall, precision))
}

fn mean_recall(
    segments: &[ScoredSegment],
    target: &BTreeSet<String>,
    points: &[usize],
    chi: f64,
) -> Result<f64> {
    let ranking = rank(segments, Strategy::RiskCdf, Some(chi))?;
    let (recall, _) = recall_precision_at(&ranking, target, points)?;
    Ok(recall.values().sum::<f64>() / recall.len() as f64)
}

fn tuning_points(cfg: &RiskConfig, target_len: usize) -> Vec<usize> {
    cfg.tune_recall_points
        .clone()
        .unwrap_or_else(|| (1..=10 * target_len).collect())
}

fn tuning_target(
    validation: &[(ScoredSegment, f64)],
    cfg: &RiskConfig,
) -> Result<BTreeSet<String>> {
    let ids: Vec<String> = validation
        .iter()
        .map(|(s, _)| s.segment_id.clone())
        .collect();
    let golds: Vec<f64> = validation.iter().map(|(_, g)| *g).collect();
    let mut target = build_target_set(&ids, &golds, cfg.worst_fraction)?;
    if target.is_empty() {
        // Tiny validation sets still need one target to tune against.
        target = worst_n(&ids, &golds, 1)?;
    }
    Ok(target)
}

/// Best threshold among `candidates` by mean recall@N; ties → smaller χ.
/// Returns `(χ, mean recall)`.
pub fn best_threshold(
    validation: &[(ScoredSegment, f64)],
    cfg: &RiskConfig,
    candidates: &[f64],
) -> Result<(f64, f64)> {
    if validation.is_empty() {
        return Err(Error::invalid(
            "threshold tuning needs a nonempty validation set",
        ));
    }
    cfg.validate()?;
    let target = tuning_target(validation, cfg)?;
    let points = tuning_points(cfg, target.len());
    let segments: Vec<ScoredSegment> = validation.iter().map(|(s, _)| s.clone()).collect();
    let mut best: Option<(f64, f64)> = None;
    for &chi in candidates {
        let r = mean_recall(&segments, &target, &points, chi)?;
        best = match best {
            Some((bc, br)) if br > r || (br == r && bc.total_cmp(&chi) != Ordering::Greater) => {
                Some((bc, br))
            }
            _ => Some((chi, r)),
        };
    }
    best.ok_or_else(|| Error::invalid("no candidate thresholds"))
}

/// Tunes q_err on validation data.
///
/// Candidates start as an evenly spaced grid over the range of validation
/// μ̂ (deciles with the default 11 points); each refinement round re-grids
/// one step either side of the incumbent.
pub fn tune_q_err(validation: &[(ScoredSegment, f64)], cfg: &RiskConfig) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::invalid(
            "threshold tuning needs a nonempty validation set",
        ));
    }
    cfg.validate()?;
    let (lo, hi) = validation
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (s, _)| {
            (l.min(s.dist.mu()), h.max(s.dist.mu()))
        });
    if lo == hi || cfg.grid_points == 1 {
        return Ok(best_threshold(validation, cfg, &[lo])?.0);
    }
    let mut step = (hi - lo) / (cfg.grid_points - 1) as f64;
    let (mut chi, mut score) = best_threshold(validation, cfg, &linspace(lo, hi, cfg.grid_points))?;
    for _ in 0..cfg.refine_rounds {
        let grid = linspace(chi - step, chi + step, cfg.grid_points);
        let (c, s) = best_threshold(validation, cfg, &grid)?;
        if s > score || (s == score && c < chi) {
            chi = c;
            score = s;
        }
        step = 2.0 * step / (cfg.grid_points - 1) as f64;
    }
    Ok(chi)
}

/// Ranks with `strategy` and scores the ranking at every cutoff in `n_values`.
pub fn retrieval_report(
    segments: &[ScoredSegment],
    target: &BTreeSet<String>,
    strategy: Strategy,
    q_err: Option<f64>,
    n_values: &[usize],
) -> Result<RetrievalReport> {
    let ranking = rank(segments, strategy, q_err)?;
    let (recall_at, precision_at) = recall_precision_at(&ranking, target, n_values)?;
    Ok(RetrievalReport {
        strategy,
        ranking,
        recall_at,
        precision_at,
        q_err: (strategy == Strategy::RiskCdf).then_some(q_err).flatten(),
    })
}
