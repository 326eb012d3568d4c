use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn epicast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epicast")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Writes a small dataset: `regions` of (id, role, daily cases).
fn dataset(dir: &Path, regions: &[(&str, &str, Vec<i64>)]) -> (PathBuf, PathBuf) {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let mut cases = String::from("region_id,date,new_cases\n");
    let mut meta = String::from("region_id,name,population,country,role\n");
    for (id, role, values) in regions {
        for (t, v) in values.iter().enumerate() {
            cases += &format!("{id},{},{v}\n", start + chrono::Days::new(t as u64));
        }
        meta += &format!("{id},{id},500000,XX,{role}\n");
    }
    let (c, m) = (dir.join("cases.csv"), dir.join("metadata.csv"));
    std::fs::write(&c, cases).unwrap();
    std::fs::write(&m, meta).unwrap();
    (c, m)
}

fn wavy(len: usize, phase: usize) -> Vec<i64> {
    (0..len).map(|t| (40.0 + 30.0 * ((t + phase) as f64 / 11.0).sin()) as i64 + (t % 7 == 0) as i64 * 25).collect()
}

#[test]
fn synth_is_byte_identical_across_output_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(epicast(&["synth", "--seed", "3", "--out", s(dir)]).status.success());
    }
    for f in ["cases.csv", "metadata.csv", "clean.csv", "manifest.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let c = tmp.path().join("c");
    assert!(epicast(&["synth", "--seed", "4", "--out", s(&c)]).status.success());
    assert_ne!(read(&a.join("cases.csv")), read(&c.join("cases.csv")));
}

#[test]
fn smooth_writes_one_pair_per_region() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, m) =
        dataset(tmp.path(), &[("R1", "train", wavy(90, 0)), ("R2", "train", wavy(90, 5)), ("R3", "test", wavy(90, 9))]);
    let out = tmp.path().join("out");
    let res = epicast(&["smooth", "--cases", s(&c), "--metadata", s(&m), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for id in ["R1", "R2", "R3"] {
        let csv = read(&out.join(format!("smooth/{id}.csv")));
        assert!(csv.starts_with("date,raw,smoothed\n"));
        assert_eq!(csv.lines().count(), 91);
        let doc: serde_json::Value = serde_json::from_str(&read(&out.join(format!("smooth/{id}.json")))).unwrap();
        let cutoff = doc["cutoff"].as_f64().unwrap();
        assert!(cutoff > 0.0 && cutoff <= 0.5);
        assert_eq!(doc["a"], 1.25);
        assert!(doc["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    }
}

#[test]
fn bad_region_is_listed_and_exit_code_is_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = wavy(60, 0);
    bad[10] = -3;
    let (c, m) = dataset(tmp.path(), &[("GOOD", "train", wavy(60, 0)), ("BAD", "train", bad)]);
    let out = tmp.path().join("out");
    let res = epicast(&["smooth", "--cases", s(&c), "--metadata", s(&m), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("BAD"));
    assert!(out.join("smooth/GOOD.csv").exists());
    assert!(!out.join("smooth/BAD.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["failures"][0]["region_id"], "BAD");
}

#[test]
fn empty_dataset_gives_empty_alert_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, m) = dataset(tmp.path(), &[]);
    let out = tmp.path().join("out");
    let res = epicast(&["alerts", "--cases", s(&c), "--metadata", s(&m), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("alerts/summary.json"))).unwrap();
    assert_eq!(summary["regions"], serde_json::json!([]));
}

#[test]
fn flat_region_forecasts_are_non_negative() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, m) = dataset(tmp.path(), &[("TR", "train", wavy(180, 0)), ("FLAT", "test", vec![5; 80])]);
    let out = tmp.path().join("out");
    let train =
        epicast(&["train", "--epochs", "3", "--methods", "A", "--cases", s(&c), "--metadata", s(&m), "--out", s(&out)]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let loss = read(&out.join("loss_A.csv"));
    assert_eq!(loss.lines().count(), 4);

    let pred = tmp.path().join("pred");
    let model = out.join("model_A.json");
    let res = epicast(&["predict", "--model", s(&model), "--cases", s(&c), "--metadata", s(&m), "--out", s(&pred)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = read(&pred.join("predictions.csv"));
    let flat: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("FLAT,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(flat.len(), 10);
    assert!(flat.iter().all(|v| v.is_finite() && *v >= 0.0), "{flat:?}");
}

#[test]
fn missing_model_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, m) = dataset(tmp.path(), &[("R", "test", wavy(60, 0))]);
    let res = epicast(&["predict", "--model", s(&tmp.path().join("nope.json")), "--cases", s(&c), "--metadata", s(&m)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.json"));
}

#[test]
fn evaluate_writes_report_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(epicast(&["synth", "--out", s(&data)]).status.success());
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{"strategies": ["generalized"], "train": {"hidden_size": 4}}"#).unwrap();
    let out = tmp.path().join("out");
    let res = epicast(&[
        "evaluate",
        "--config",
        s(&config),
        "--epochs",
        "1",
        "--methods",
        "A,D",
        "--cases",
        s(&data.join("cases.csv")),
        "--metadata",
        s(&data.join("metadata.csv")),
        "--out",
        s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = read(&out.join("report.csv"));
    // 2 methods x 4 test regions x 2 ground truths.
    assert_eq!(csv.lines().count(), 1 + 16);
    assert!(!out.join("strategies.json").exists());
    let doc: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(doc["metadata"]["config"]["train"]["epochs"], 1);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{"sede": 3}"#).unwrap();
    let res = epicast(&["synth", "--config", s(&config), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(res.status.code(), Some(1));
}
