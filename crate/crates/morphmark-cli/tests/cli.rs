//! Binary-level smoke tests: subcommand wiring, file formats, exit codes,
//! and determinism of the shipped pipeline.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morphmark"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "morphmark {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const CONFIG: &str = r#"{
  "schema_version": 1,
  "lm": { "vocab_size": 400, "order": 1, "entropy_param": 1.0, "seed": 11 },
  "watermark": { "method": "morphmark", "policy": { "kind": "exp" }, "gamma": 0.5, "key": 777 },
  "generation": { "num_sequences": 12, "length": 80, "prompt_length": 1, "rng_seed": 42 },
  "attacks": [ { "kind": "substitute", "rate": 0.3, "rng_seed": 5 } ]
}"#;

#[test]
fn goldens_match_the_frozen_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("goldens.json");
    run_ok(&["goldens", "--out", out.to_str().unwrap()]);
    let emitted = fs::read(&out).unwrap();
    let frozen = fs::read(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/partition_goldens.json"
    ))
    .unwrap();
    assert_eq!(emitted, frozen, "golden vectors drifted from the frozen file");
}

#[test]
fn pipeline_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let traces = dir.path().join("traces.jsonl");
    let traces2 = dir.path().join("traces2.jsonl");
    run_ok(&["generate", "--config", &config, "--out", traces.to_str().unwrap()]);
    run_ok(&["generate", "--config", &config, "--out", traces2.to_str().unwrap()]);
    assert_eq!(
        fs::read(&traces).unwrap(),
        fs::read(&traces2).unwrap(),
        "generate is not deterministic"
    );

    let text = fs::read_to_string(&traces).unwrap();
    assert_eq!(text.lines().count(), 12);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["tokens"].as_array().unwrap().len(), 80);
    assert_eq!(first["pg"].as_array().unwrap().len(), 80);
    assert!(first["r"].is_array(), "adaptive trace should carry r");
    assert!(first["z"].as_f64().unwrap() > 2.0, "watermark should be detectable");

    let csv = dir.path().join("detect.csv");
    run_ok(&[
        "detect",
        "--trace",
        traces.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--key",
        "777",
        "--vocab-size",
        "400",
        "--condition",
        "wm",
    ]);
    let body = fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,condition,green_count,scored,z,decision"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.contains(",wm,") && r.ends_with("true")));

    let attacked = dir.path().join("attacked.jsonl");
    run_ok(&[
        "attack",
        "--trace",
        traces.to_str().unwrap(),
        "--out",
        attacked.to_str().unwrap(),
        "--kind",
        "delete",
        "--rate",
        "0.25",
        "--vocab-size",
        "400",
        "--key",
        "777",
    ]);
    let att: Vec<serde_json::Value> = fs::read_to_string(&attacked)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(att.len(), 12);
    assert_eq!(att[0]["tokens"].as_array().unwrap().len(), 60);
    assert!(att[0]["pg"].is_null(), "attack drops generation-side pg");
    assert!(att[0]["r"].is_null(), "attack drops generation-side r");
    assert!(att[0]["z"].as_f64().unwrap() < first["z"].as_f64().unwrap());
}

#[test]
fn benchmark_emits_cells_and_stable_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out1 = dir.path().join("bench1");
    let out2 = dir.path().join("bench2");
    run_ok(&["benchmark", "--config", &config, "--out", out1.to_str().unwrap()]);
    run_ok(&["benchmark", "--config", &config, "--out", out2.to_str().unwrap()]);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("metrics.json")).unwrap()).unwrap();
    let cells = metrics.as_object().unwrap();
    for key in [
        "morphmark:none",
        "morphmark:substitute@0.3",
        "kgw:none",
        "kgw:substitute@0.3",
    ] {
        assert!(cells.contains_key(key), "missing cell {key}");
        assert!(cells[key]["auroc"].as_f64().unwrap() > 0.5);
    }

    for file in ["metrics.json", "scores.csv"] {
        assert_eq!(
            fs::read(out1.join(file)).unwrap(),
            fs::read(out2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
    // Wall-clock lives apart so everything above can stay byte-stable.
    assert!(out1.join("timings.json").exists());

    let scores = fs::read_to_string(out1.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().next().unwrap(), "trial_id,condition,z");
    assert!(scores.lines().any(|l| l.contains(",clean,")));
}

#[test]
fn flag_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let base = dir.path().join("base.jsonl");
    let none = dir.path().join("none.jsonl");
    let reseeded = dir.path().join("reseeded.jsonl");
    run_ok(&["generate", "--config", &config, "--out", base.to_str().unwrap()]);
    run_ok(&[
        "generate", "--config", &config, "--out", none.to_str().unwrap(), "--method", "none",
    ]);
    run_ok(&[
        "generate", "--config", &config, "--out", reseeded.to_str().unwrap(), "--seed", "43",
    ]);

    let first = |p: &Path| -> serde_json::Value {
        serde_json::from_str(fs::read_to_string(p).unwrap().lines().next().unwrap()).unwrap()
    };
    assert!(first(&none)["r"].is_null(), "--method none should drop r");
    assert_ne!(
        first(&base)["tokens"], first(&reseeded)["tokens"],
        "--seed should reseed generation"
    );
}

#[test]
fn detect_on_empty_trace_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let csv = dir.path().join("out.csv");
    run_ok(&[
        "detect",
        "--trace",
        empty.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--key",
        "1",
        "--vocab-size",
        "10",
    ]);
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        "id,condition,green_count,scored,z,decision\n"
    );
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");

    let bad = write_config(dir.path(), r#"{ "schema_version": 1 }"#);
    let res = bin()
        .args(["generate", "--config", &bad, "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));

    let invalid = write_config(
        dir.path(),
        &CONFIG.replace("\"gamma\": 0.5", "\"gamma\": 1.5"),
    );
    let res = bin()
        .args(["generate", "--config", &invalid, "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&res.stderr).contains("watermark.gamma"),
        "config errors should name the field"
    );

    let res = bin()
        .args([
            "detect",
            "--trace",
            dir.path().join("missing.jsonl").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--key",
            "1",
            "--vocab-size",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3));

    let malformed = dir.path().join("bad.jsonl");
    fs::write(&malformed, "{\"tokens\": [1, 2]}\nnot json\n").unwrap();
    let res = bin()
        .args([
            "detect",
            "--trace",
            malformed.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--key",
            "1",
            "--vocab-size",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&res.stderr).contains(":2:"),
        "trace parse errors should name the line"
    );

    let traces = dir.path().join("t.jsonl");
    fs::write(&traces, "{\"tokens\": [1, 2, 3]}\n").unwrap();
    let res = bin()
        .args([
            "attack",
            "--trace",
            traces.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--kind",
            "paraphrase",
            "--vocab-size",
            "10",
            "--key",
            "1",
            "--endpoint",
            "http://127.0.0.1:9",
            "--timeout-ms",
            "200",
            "--retries",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(4), "unreachable paraphraser is exit 4");
}

#[test]
fn analyze_emits_monotone_optima() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tradeoff.csv");
    run_ok(&[
        "analyze",
        "--out",
        csv.to_str().unwrap(),
        "--omega",
        "0.4",
        "--pg",
        "0.2,0.4,0.6,0.8",
        "--metric",
        "kl",
    ]);
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        body.lines().next().unwrap(),
        "pg,omega,metric,r,t_value,w_value,f_value,s_value,is_optimal"
    );
    let optima: Vec<f64> = body
        .lines()
        .filter(|l| l.ends_with(",true"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(optima.len(), 4);
    assert!(
        optima.windows(2).all(|w| w[0] < w[1]),
        "r* should increase with pg: {optima:?}"
    );
}
