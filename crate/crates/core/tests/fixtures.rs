use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use uaeval_core::ingestion::{make_folds, parse_dataset};
use uaeval_core::retrieval::{worst_n, GoldOrientation, RiskConfig};
use uaeval_core::simulator::{generate, NoiseModel, SimSpec};
use uaeval_core::{Gold, SampleMatrix, SegmentRecord};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn small_fixture_parses() {
    let ds = parse_dataset(fixture("small20.jsonl")).unwrap();
    assert_eq!(ds.len(), 20);
    assert_eq!(ds.metadata.n_samples, 4);
    assert_eq!(ds.metadata.n_refs, 2);
    assert_eq!(ds.doc_ids().len(), 5);
    assert!(ds
        .records
        .iter()
        .any(|r| matches!(r.gold, Some(Gold::Annotators(_)))));
    assert!(ds.records.iter().any(|r| r.point_estimate.is_none()));
}

#[test]
fn committed_simulations_regenerate_byte_for_byte() {
    for name in ["sim_hetero", "sim_homo"] {
        let spec: SimSpec =
            toml::from_str(&fs::read_to_string(fixture(&format!("{name}.toml"))).unwrap()).unwrap();
        let text = generate(&spec).unwrap().to_jsonl();
        let committed = fs::read_to_string(fixture(&format!("{name}.jsonl"))).unwrap();
        assert!(
            text == committed,
            "{name}.jsonl differs from its simulation config"
        );
    }
}

#[test]
fn folds_balance_on_twenty_five_documents() {
    let ds = parse_dataset(fixture("sim_hetero.jsonl")).unwrap();
    assert_eq!(ds.doc_ids().len(), 25);
    for seed in 0..10 {
        let plan = make_folds(&ds, 5, seed).unwrap();
        let sizes = plan.fold_sizes(&ds);
        let mean = ds.len() as f64 / 5.0;
        for s in sizes {
            assert!(
                (s as f64 - mean).abs() <= 0.2 * mean,
                "seed {seed}: fold of {s} vs mean {mean}"
            );
        }
        assert!(plan.system_coverage_complete);
    }
}

#[test]
fn simulated_moments_match_spec() {
    let sigma = 0.7;
    let spec = SimSpec {
        n_segments: 4000,
        n_samples: 8,
        n_refs: 1,
        seed: 3,
        rho: 0.5,
        noise_model: NoiseModel::Heteroscedastic {
            sigma_min: sigma,
            sigma_max: sigma,
        },
        miscalibration: Default::default(),
        ref_noise: 0.0,
        docs_per_dataset: 40,
        systems: 2,
        language_pair: None,
    };
    let ds = generate(&spec).unwrap();
    // Within-segment variance pooled over segments: E = σ², SE from the
    // chi-square spread of each unbiased estimate.
    let n = spec.n_samples as f64;
    let vars: Vec<f64> = ds
        .records
        .iter()
        .map(|r| {
            let xs = r.samples.column(0);
            let m = xs.iter().sum::<f64>() / n;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let pooled = vars.iter().sum::<f64>() / vars.len() as f64;
    let se = sigma * sigma * (2.0 / (n - 1.0)).sqrt() / (vars.len() as f64).sqrt();
    assert!((pooled - sigma * sigma).abs() < 3.0 * se, "pooled {pooled}");

    // Gold residual around the latent mean has variance a·σ² + b = σ².
    let tau2 = spec.latent_sd().powi(2);
    let golds: Vec<f64> = ds.records.iter().map(|r| r.gold_value().unwrap()).collect();
    let m = golds.iter().sum::<f64>() / golds.len() as f64;
    let v = golds.iter().map(|g| (g - m) * (g - m)).sum::<f64>() / (golds.len() as f64 - 1.0);
    let want = tau2 + sigma * sigma;
    let se_v = want * (2.0 / (golds.len() as f64 - 1.0)).sqrt();
    assert!((v - want).abs() < 3.0 * se_v, "gold variance {v} vs {want}");
    assert!(m.abs() < 3.0 * (want / golds.len() as f64).sqrt());
}

struct MqmRow {
    record: SegmentRecord,
    in_raw_table: bool,
    highlighted: bool,
}

fn mqm_rows() -> Vec<MqmRow> {
    let mut rdr = csv::Reader::from_path(fixture("mqm_table_rows.csv")).unwrap();
    rdr.records()
        .map(|row| {
            let row = row.unwrap();
            MqmRow {
                record: SegmentRecord {
                    segment_id: row[0].to_string(),
                    doc_id: "mqm".into(),
                    system_id: "mqm".into(),
                    mt_len_words: row[2].parse().unwrap(),
                    gold: Some(Gold::Score(row[1].parse().unwrap())),
                    point_estimate: None,
                    samples: SampleMatrix::single_reference(vec![0.0]).unwrap(),
                },
                in_raw_table: &row[4] == "1",
                highlighted: &row[5] == "1",
            }
        })
        .collect()
}

fn bottom(rows: &[MqmRow], length_normalize: bool, n: usize) -> BTreeSet<String> {
    let cfg = RiskConfig {
        length_normalize,
        orientation: GoldOrientation::LowerIsBetter,
        ..RiskConfig::default()
    };
    let ids: Vec<String> = rows.iter().map(|r| r.record.segment_id.clone()).collect();
    let golds: Vec<f64> = rows
        .iter()
        .map(|r| cfg.detection_gold(&r.record).unwrap())
        .collect();
    worst_n(&ids, &golds, n).unwrap()
}

#[test]
fn length_normalization_reshuffles_worst_mqm_rows() {
    let rows = mqm_rows();
    assert_eq!(rows.len(), 30);
    let raw = bottom(&rows, false, 20);
    let normalized = bottom(&rows, true, 20);
    for r in rows.iter().filter(|r| r.in_raw_table) {
        assert!(
            raw.contains(&r.record.segment_id),
            "{} missing from raw set",
            r.record.segment_id
        );
    }
    for r in rows.iter().filter(|r| r.highlighted) {
        assert!(raw.contains(&r.record.segment_id));
        assert!(normalized.contains(&r.record.segment_id));
    }
    let exited: Vec<&MqmRow> = rows
        .iter()
        .filter(|r| {
            raw.contains(&r.record.segment_id) && !normalized.contains(&r.record.segment_id)
        })
        .collect();
    assert!(!exited.is_empty());
    assert!(exited.iter().all(|r| r.record.mt_len_words >= 20));
}
