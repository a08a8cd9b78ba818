use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn uaeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uaeval"))
        .args(args)
        .env_remove("UAEVAL_SEED")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = dir.path().join("bad.jsonl");
    fs::write(&bad_json, "{\"segment_id\": \n").unwrap();
    assert_eq!(uaeval(&["evaluate", p(&bad_json)]).status.code(), Some(3));

    let ragged = dir.path().join("ragged.jsonl");
    fs::write(
        &ragged,
        r#"{"segment_id":"a","doc_id":"d","system_id":"s","mt_len_words":3,"gold":0.1,"samples":[[0.1,0.2],[0.3]]}"#,
    )
    .unwrap();
    let out = uaeval(&["evaluate", p(&ragged)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samples"));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(uaeval(&["evaluate", p(&empty)]).status.code(), Some(4));

    let small = fixture("small20.jsonl");
    assert_eq!(
        uaeval(&["evaluate", p(&small), "--k", "6"]).status.code(),
        Some(5)
    );
    assert_eq!(
        uaeval(&["evaluate", p(&small), "--method", "bayes"])
            .status
            .code(),
        Some(5)
    );
    assert_eq!(
        uaeval(&["evaluate", p(&small), "--refs", "0,7"])
            .status
            .code(),
        Some(5)
    );
    assert_eq!(
        uaeval(&["evaluate", p(&small), "--ece-bins", "1"])
            .status
            .code(),
        Some(5)
    );
    assert_eq!(uaeval(&["evaluate"]).status.code(), Some(2));
    assert_eq!(
        uaeval(&["evaluate", "/nonexistent/x.jsonl"]).status.code(),
        Some(1)
    );
}

#[test]
fn flags_override_config_and_env_sets_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "k = 4\nseed = 3\nmethod = \"baseline\"\n").unwrap();
    let report = dir.path().join("r.json");
    let small = fixture("small20.jsonl");

    let out = uaeval(&[
        "--config",
        p(&cfg),
        "evaluate",
        p(&small),
        "--report",
        p(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["k"], 4);
    assert_eq!(json["seed"], 3);
    assert_eq!(json["method"], "baseline");
    assert!(fs::read_to_string(report.with_extension("txt"))
        .unwrap()
        .contains("mean"));

    let out = uaeval(&[
        "--config",
        p(&cfg),
        "evaluate",
        p(&small),
        "--k",
        "2",
        "--method",
        "parametric",
        "--seed",
        "9",
        "--report",
        p(&report),
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["k"], 2);
    assert_eq!(json["seed"], 9);
    assert_eq!(json["method"], "parametric");

    let out = Command::new(env!("CARGO_BIN_EXE_uaeval"))
        .args(["folds", p(&small)])
        .env("UAEVAL_SEED", "5")
        .output()
        .unwrap();
    let with_env = String::from_utf8(out.stdout).unwrap();
    let with_flag = String::from_utf8(uaeval(&["folds", p(&small), "--seed", "5"]).stdout).unwrap();
    assert_eq!(with_env, with_flag);

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "bogus = 1\n").unwrap();
    assert_eq!(
        uaeval(&["--config", p(&unknown), "folds", p(&small)])
            .status
            .code(),
        Some(5)
    );
}

#[test]
fn risk_ranking_equals_mean_ranking_on_homoscedastic_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let homo = fixture("sim_homo.jsonl");
    let mut rankings = Vec::new();
    for strategy in ["risk_cdf", "mean_of_samples"] {
        let report = dir.path().join(format!("{strategy}.json"));
        let out = uaeval(&[
            "detect",
            p(&homo),
            "--strategy",
            strategy,
            "--report",
            p(&report),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
        rankings.push(json["reports"][0]["ranking"].clone());
    }
    assert_eq!(rankings[0], rankings[1]);
}

#[test]
fn mul_is_sharper_than_every_single_reference() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("m.json");
    let out = uaeval(&[
        "multiref",
        p(&fixture("sim_hetero.jsonl")),
        "--pattern",
        "S-1",
        "--pattern",
        "Mul",
        "--report",
        p(&report),
    ]);
    assert!(out.status.success());
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let sharp = |label: &str| {
        rows.iter().find(|r| r["label"] == label).unwrap()["report"]["mean"]["sharpness"]
            .as_f64()
            .unwrap()
    };
    let mul = sharp("Mul");
    for label in ["S-1", "S-1[0]", "S-1[1]", "S-1[2]"] {
        assert!(mul <= sharp(label), "{label}");
    }
}

#[test]
fn csv_import_matches_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("small20.jsonl")).unwrap();
    let ds = uaeval_core::ingestion::parse_dataset_str(&text).unwrap();
    let mut csv = String::from("segment_id,doc_id,system_id,mt_len_words,gold,point_estimate,ref_index,sample_index,score\n");
    let mut flat = ds.clone();
    for r in &mut flat.records {
        let g = r.gold_value().unwrap();
        r.gold = Some(uaeval_core::Gold::Score(g));
        let pe = r.point_estimate.map(|v| v.to_string()).unwrap_or_default();
        for (ri, col) in r.samples.reference_columns().iter().enumerate() {
            for (si, v) in col.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{},{g},{pe},{ri},{si},{v}\n",
                    r.segment_id, r.doc_id, r.system_id, r.mt_len_words
                ));
            }
        }
    }
    let csv_path = dir.path().join("small.csv");
    fs::write(&csv_path, csv).unwrap();
    let jsonl_path = dir.path().join("small.jsonl");
    fs::write(&jsonl_path, flat.to_jsonl()).unwrap();

    let a = uaeval(&["evaluate", p(&csv_path)]);
    let b = uaeval(&["evaluate", p(&jsonl_path)]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn calibrate_writes_params() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("params.json");
    assert!(uaeval(&[
        "calibrate",
        p(&fixture("sim_hetero.jsonl")),
        "--out",
        p(&out)
    ])
    .status
    .success());
    let params: uaeval_core::CalibrationParams =
        serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert!(params.alpha > 0.0 && params.beta >= 0.0);
    assert!(params.std_scale > 0.0);
    assert_eq!(params.ece_bins, 100);
}
