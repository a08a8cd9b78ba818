//! Dataset files, validation and document-disjoint fold splits.
//!
//! The canonical format is UTF-8 JSON lines. An optional first line of the
//! form `{"metadata": {...}}` carries dataset metadata; every other line is
//! one [`SegmentRecord`]:
//!
//! ```text
//! {"metadata":{"language_pair":"en-de","score_type":"da","n_samples":3,"n_refs":2,"sampling_method":"mc_dropout"}}
//! {"segment_id":"s1","doc_id":"d1","system_id":"sysA","mt_len_words":7,"gold":0.31,"point_estimate":0.28,"samples":[[0.2,0.3,0.25],[0.4,0.35,0.3]]}
//! ```
//!
//! `samples` is reference-major: one inner list per reference, each holding
//! the N stochastic scores. `gold` is a number, a list of per-annotator
//! scores, or absent for inference-only data.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::SimSpec;
use crate::types::{Gold, SampleMatrix, SegmentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    McDropout,
    DeepEnsemble,
    #[default]
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_pair: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_type: Option<String>,
    pub n_samples: usize,
    pub n_refs: usize,
    #[serde(default)]
    pub sampling_method: SamplingMethod,
    /// Generator settings, for simulated datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSpec>,
}

/// A validated collection of segments with uniform sample shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub metadata: DatasetMetadata,
    pub records: Vec<SegmentRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: DatasetMetadata,
}

/// Parsing proxy: invariants are checked after deserialization so that they
/// surface as schema errors rather than syntax errors.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    segment_id: String,
    doc_id: String,
    system_id: String,
    mt_len_words: u32,
    #[serde(default)]
    gold: Option<Gold>,
    #[serde(default)]
    point_estimate: Option<f64>,
    samples: Vec<Vec<f64>>,
}

impl RawRecord {
    fn into_record(self) -> Result<SegmentRecord> {
        let record = SegmentRecord {
            samples: SampleMatrix::from_reference_columns(self.samples)?,
            segment_id: self.segment_id,
            doc_id: self.doc_id,
            system_id: self.system_id,
            mt_len_words: self.mt_len_words,
            gold: self.gold,
            point_estimate: self.point_estimate,
        };
        record.validate()?;
        Ok(record)
    }
}

fn with_line(err: Error, line: usize) -> Error {
    match err {
        Error::Schema { field, message } => Error::Schema {
            field,
            message: format!("line {line}: {message}"),
        },
        other => other,
    }
}

impl Dataset {
    /// Validates records against each other and against `metadata`.
    pub fn new(metadata: DatasetMetadata, records: Vec<SegmentRecord>) -> Result<Self> {
        let dataset = Self { metadata, records };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Builds a dataset whose metadata is inferred from its records.
    pub fn from_records(records: Vec<SegmentRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::schema("records", "dataset contains no records"))?;
        let metadata = DatasetMetadata {
            language_pair: None,
            score_type: None,
            n_samples: first.samples.n_samples(),
            n_refs: first.samples.n_refs(),
            sampling_method: SamplingMethod::External,
            simulation: None,
        };
        Self::new(metadata, records)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::schema("records", "dataset contains no records"));
        }
        let mut ids = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            r.validate()?;
            if !ids.insert(r.segment_id.as_str()) {
                return Err(Error::schema(
                    "segment_id",
                    format!("duplicate id `{}` (record {i})", r.segment_id),
                ));
            }
            if r.samples.n_samples() != self.metadata.n_samples {
                return Err(Error::schema(
                    "n_samples",
                    format!(
                        "segment `{}` has {} samples, dataset declares {}",
                        r.segment_id,
                        r.samples.n_samples(),
                        self.metadata.n_samples
                    ),
                ));
            }
            if r.samples.n_refs() != self.metadata.n_refs {
                return Err(Error::schema(
                    "n_refs",
                    format!(
                        "segment `{}` has {} references, dataset declares {}",
                        r.segment_id,
                        r.samples.n_refs(),
                        self.metadata.n_refs
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same metadata, a subset of the records.
    pub fn with_records(&self, records: Vec<SegmentRecord>) -> Self {
        Self {
            metadata: self.metadata.clone(),
            records,
        }
    }

    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.doc_id.as_str()).collect()
    }

    pub fn system_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.system_id.as_str()).collect()
    }

    /// Serializes to the canonical line format (header line included).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header {
            metadata: self.metadata.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("metadata serializes"));
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

/// Parses the canonical line format from a string.
pub fn parse_dataset_str(text: &str) -> Result<Dataset> {
    let mut metadata: Option<DatasetMetadata> = None;
    let mut records = Vec::new();
    let mut seen_content = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen_content && value.get("metadata").is_some() {
            let header: Header = serde_json::from_value(value).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("invalid metadata header: {e}"),
            })?;
            metadata = Some(header.metadata);
            seen_content = true;
            continue;
        }
        seen_content = true;
        let raw: RawRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(raw.into_record().map_err(|e| with_line(e, line_no))?);
    }
    match metadata {
        Some(m) => Dataset::new(m, records),
        None => Dataset::from_records(records),
    }
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset_str(&fs::read_to_string(path)?)
}

/// One row of the flat tabular import: a single stochastic score.
///
/// Columns: `segment_id, doc_id, system_id, mt_len_words, gold,
/// point_estimate, ref_index, sample_index, score`. `gold` and
/// `point_estimate` may be empty; they must agree across a segment's rows.
#[derive(Debug, Deserialize)]
struct TabularRow {
    segment_id: String,
    doc_id: String,
    system_id: String,
    mt_len_words: u32,
    gold: Option<f64>,
    #[serde(default)]
    point_estimate: Option<f64>,
    ref_index: usize,
    sample_index: usize,
    score: f64,
}

struct PendingSegment {
    doc_id: String,
    system_id: String,
    mt_len_words: u32,
    gold: Option<f64>,
    point_estimate: Option<f64>,
    cells: BTreeMap<(usize, usize), f64>,
}

/// Imports the flat one-row-per-sample CSV layout.
pub fn import_tabular(path: impl AsRef<Path>) -> Result<Dataset> {
    import_tabular_reader(fs::File::open(path)?)
}

pub fn import_tabular_reader<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut pending: BTreeMap<String, PendingSegment> = BTreeMap::new();
    for (idx, row) in rdr.deserialize::<TabularRow>().enumerate() {
        // Header is line 1.
        let line = idx + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let entry = pending.entry(row.segment_id.clone()).or_insert_with(|| {
            order.push(row.segment_id.clone());
            PendingSegment {
                doc_id: row.doc_id.clone(),
                system_id: row.system_id.clone(),
                mt_len_words: row.mt_len_words,
                gold: row.gold,
                point_estimate: row.point_estimate,
                cells: BTreeMap::new(),
            }
        });
        if entry.doc_id != row.doc_id
            || entry.system_id != row.system_id
            || entry.mt_len_words != row.mt_len_words
            || entry.gold != row.gold
            || entry.point_estimate != row.point_estimate
        {
            return Err(Error::schema(
                "segment_id",
                format!(
                    "line {line}: segment `{}` has inconsistent per-segment columns",
                    row.segment_id
                ),
            ));
        }
        if entry
            .cells
            .insert((row.ref_index, row.sample_index), row.score)
            .is_some()
        {
            return Err(Error::schema(
                "sample_index",
                format!(
                    "line {line}: duplicate (ref_index, sample_index) = ({}, {})",
                    row.ref_index, row.sample_index
                ),
            ));
        }
    }
    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let seg = pending.remove(&id).expect("segment recorded");
        let n_refs = seg.cells.keys().map(|k| k.0).max().map_or(0, |m| m + 1);
        let n_samples = seg.cells.keys().map(|k| k.1).max().map_or(0, |m| m + 1);
        if seg.cells.len() != n_refs * n_samples {
            return Err(Error::schema(
                "samples",
                format!("segment `{id}` does not fill a {n_samples}×{n_refs} sample grid"),
            ));
        }
        let columns: Vec<Vec<f64>> = (0..n_refs)
            .map(|r| (0..n_samples).map(|i| seg.cells[&(r, i)]).collect())
            .collect();
        let record = SegmentRecord {
            segment_id: id,
            doc_id: seg.doc_id,
            system_id: seg.system_id,
            mt_len_words: seg.mt_len_words,
            gold: seg.gold.map(Gold::Score),
            point_estimate: seg.point_estimate,
            samples: SampleMatrix::from_reference_columns(columns)?,
        };
        record.validate()?;
        records.push(record);
    }
    Dataset::from_records(records)
}

/// Assignment of documents to folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    /// Whether every fold contains at least one segment of every system.
    pub system_coverage_complete: bool,
}

impl FoldPlan {
    pub fn fold_of(&self, doc_id: &str) -> Option<usize> {
        self.assignment.get(doc_id).copied()
    }

    /// Segment count per fold.
    pub fn fold_sizes(&self, dataset: &Dataset) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for r in &dataset.records {
            if let Some(f) = self.fold_of(&r.doc_id) {
                sizes[f] += 1;
            }
        }
        sizes
    }
}

/// Document-disjoint k-fold assignment.
///
/// Documents are shuffled with the seed, then placed largest-first onto the
/// fold with the fewest segments so far; among equally full folds the one
/// gaining the most new systems wins, then the lowest index. System coverage
/// is best-effort and reported on the plan.
pub fn make_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut docs: BTreeMap<&str, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for r in &dataset.records {
        let e = docs.entry(r.doc_id.as_str()).or_default();
        e.0 += 1;
        e.1.insert(r.system_id.as_str());
    }
    if docs.len() < k {
        return Err(Error::invalid(format!(
            "{} documents cannot fill {k} folds",
            docs.len()
        )));
    }

    let mut order: Vec<(&str, usize, BTreeSet<&str>)> =
        docs.into_iter().map(|(d, (n, s))| (d, n, s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    // Stable: the shuffle decides among equally sized documents.
    order.sort_by_key(|d| std::cmp::Reverse(d.1));

    let mut counts = vec![0usize; k];
    let mut systems: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); k];
    let mut assignment = BTreeMap::new();
    for (doc, n, doc_systems) in order {
        let fold = (0..k)
            .min_by_key(|&f| {
                let gain = doc_systems.difference(&systems[f]).count();
                (counts[f], std::cmp::Reverse(gain), f)
            })
            .expect("k >= 2");
        counts[fold] += n;
        systems[fold].extend(doc_systems.iter().copied());
        assignment.insert(doc.to_string(), fold);
    }

    let all_systems = dataset.system_ids();
    let complete = systems.iter().all(|s| s.len() == all_systems.len());
    if !complete {
        warn!("fold plan could not place every system in every fold (k={k}, seed={seed})");
    }
    Ok(FoldPlan {
        k,
        assignment,
        system_coverage_complete: complete,
    })
}

/// Splits into (validation, test): the test side holds `test_fold`'s documents.
pub fn split(dataset: &Dataset, plan: &FoldPlan, test_fold: usize) -> Result<(Dataset, Dataset)> {
    if test_fold >= plan.k {
        return Err(Error::invalid(format!(
            "test fold {test_fold} out of range for k={}",
            plan.k
        )));
    }
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for r in &dataset.records {
        let fold = plan.fold_of(&r.doc_id).ok_or_else(|| {
            Error::invalid(format!("document `{}` is not in the fold plan", r.doc_id))
        })?;
        if fold == test_fold {
            test.push(r.clone());
        } else {
            validation.push(r.clone());
        }
    }
    Ok((dataset.with_records(validation), dataset.with_records(test)))
}
