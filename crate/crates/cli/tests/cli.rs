mod common;

use common::*;
use std::path::Path;

fn generate(dir: &Path, pairs: usize) -> std::path::PathBuf {
    let config = small_config(dir, pairs);
    let out = dir.join("gen");
    let o = run(&["--out-dir", s(&out), "generate", "--config", s(&config)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn generate_is_reproducible_and_guards_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 30);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["--seed", "42", "--out-dir", s(out), "generate", "--config", s(&config)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["bsr_with_id.jsonl", "bsr_without_id.jsonl", "bsr_test_with_id.jsonl", "splits.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let again = run(&["--seed", "42", "--out-dir", s(&a), "generate", "--config", s(&config)]);
    assert_eq!(code(&again), 1);
    assert!(stderr(&again).contains("--force"));
    let forced = run(&["--seed", "42", "--force", "--out-dir", s(&a), "generate", "--config", s(&config)]);
    assert_eq!(code(&forced), 0);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let sha = bsr_cli::sha256_hex(&std::fs::read(&config).unwrap());
    assert_eq!(manifest["config_sha256"], serde_json::json!(sha));
    assert_eq!(manifest["counts"]["bsr_with_id.samples"], serde_json::json!(120));
}

#[test]
fn invalid_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"laws\": [\n    oops\n  ]\n}\n").unwrap();
    let o = run(&["--out-dir", s(&dir.path().join("o")), "generate", "--config", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn infer_score_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 20);
    let dataset = gen.join("bsr_test_with_id.jsonl");
    let oracle = configs_dir().join("mock-oracle.json");
    let inf = dir.path().join("inf");
    let o = run(&["--out-dir", s(&inf), "infer", "--dataset", s(&dataset), "--model", s(&oracle)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = std::fs::read_to_string(inf.join("responses.jsonl")).unwrap();
    let o = run(&["--force", "--out-dir", s(&inf), "infer", "--dataset", s(&dataset), "--model", s(&oracle)]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inf.join("infer_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stats"]["mock_calls"], serde_json::json!(0));
    assert_eq!(summary["stats"]["network_calls"], serde_json::json!(0));
    let second = std::fs::read_to_string(inf.join("responses.jsonl")).unwrap();
    let strip = |s: &str| s.replace("\"retrieved_from_cache\":true", "\"retrieved_from_cache\":false");
    assert_eq!(strip(&first), strip(&second));

    let score = dir.path().join("score");
    let o = run(&[
        "--out-dir", s(&score), "score", "--dataset", s(&dataset),
        "--responses", s(&inf.join("responses.jsonl")), "--group-by", "law_id,identity_type",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rfs=1.000000 f1=1.000000 lss=1.000000"), "{stdout}");
    for f in ["report.json", "report.csv", "verdicts.jsonl", "heatmap.svg", "manifest.json"] {
        assert!(score.join(f).exists(), "{f}");
    }
}

#[test]
fn orphan_responses_are_scoring_errors() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 10);
    let responses = dir.path().join("r.jsonl");
    std::fs::write(
        &responses,
        "{\"instance_id\":\"nowhere/1\",\"model_id\":\"m\",\"raw_text\":\"Yes\",\"latency_ms\":0}\n",
    )
    .unwrap();
    let o = run(&[
        "--out-dir", s(&dir.path().join("s")), "score",
        "--dataset", s(&gen.join("bsr_test_with_id.jsonl")), "--responses", s(&responses),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("nowhere/1"), "{}", stderr(&o));
}

#[test]
fn unreachable_endpoint_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 5);
    let dataset = gen.join("bsr_without_id.jsonl");
    let model = dir.path().join("dead.json");
    std::fs::write(
        &model,
        r#"{"model_id":"dead","endpoint":{"base_url":"http://127.0.0.1:9/v1","model_name":"m","max_retries":0,"timeout_secs":2}}"#,
    )
    .unwrap();
    let all = dir.path().join("all");
    let o = run(&["--out-dir", s(&all), "infer", "--dataset", s(&dataset), "--model", s(&model)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    // warm the cache for one instance so that only the rest fail
    let text = std::fs::read_to_string(&dataset).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let prompt = first["rendered_text"].as_str().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let entry = serde_json::json!({
        "key": bsr_core::modelio::cache_key("dead", prompt),
        "model_id": "dead", "raw_text": "No", "latency_ms": 3,
    });
    std::fs::write(&cache, format!("{entry}\n")).unwrap();
    let part = dir.path().join("part");
    let o = run(&[
        "--out-dir", s(&part), "infer", "--dataset", s(&dataset), "--model", s(&model), "--cache", s(&cache),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["score"])), 1);
    assert_eq!(code(&run(&["--version"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out-dir", s(&dir.path().join("t")), "trend", "--dataset", "missing.jsonl", "--family", "0,2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_writes_csv_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 20);
    let dataset = gen.join("bsr_test_with_id.jsonl");
    let inf = dir.path().join("inf");
    let model = configs_dir().join("mock-checkpoint.json");
    assert_eq!(code(&run(&["--out-dir", s(&inf), "infer", "--dataset", s(&dataset), "--model", s(&model)])), 0);
    let out = dir.path().join("sweep");
    let o = run(&[
        "--out-dir", s(&out), "sweep", "--dataset", s(&dataset),
        "--responses", s(&inf.join("responses.jsonl")), "--beta-grid", "0.5,1,2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("beta,lss,rfs,f1\n"));
    let svg = std::fs::read_to_string(out.join("sweep.svg")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(svg.contains(&format!("beta {} lss {}", cols[0], cols[1])));
    }
}
