mod common;

use std::fs;

use common::*;

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_prints_counts() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--repo", path_str(&tiny_repo()), "--out", path_str(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout), "directories=3 files=2 functions=3\n");
    assert!(out.path().join("snapshot.json").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.scan.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn replay_with_empty_store_exits_3() {
    let out = tempfile::tempdir().unwrap();
    let store = out.path().join("empty.jsonl");
    let o = run(&[
        "link",
        "--mode",
        "replay",
        "--store",
        path_str(&store),
        "--dataset",
        path_str(&toy_dataset()),
        "--repo",
        path_str(&tiny_repo()),
        "--out",
        path_str(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = text(&o.stderr);
    let fp = err
        .split("replay cache miss for fingerprint ")
        .nth(1)
        .expect("cache miss reported")
        .chars()
        .take_while(|c| c.is_ascii_hexdigit())
        .count();
    assert_eq!(fp, 64, "{err}");
    let links = fs::read_to_string(out.path().join("links.jsonl")).unwrap();
    assert_eq!(links.lines().count(), 3);
    assert!(links.lines().all(|l| l.contains("\"status\":\"failed\"")));
}

#[test]
fn live_mode_without_key_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "link",
        "--mode",
        "live",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--dataset",
        path_str(&toy_dataset()),
        "--repo",
        path_str(&tiny_repo()),
        "--out",
        path_str(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("TRACE_LLM_API_KEY"));
}

#[test]
fn replayed_links_then_eval_and_report() {
    let out = tempfile::tempdir().unwrap();
    let store = out.path().join("store.jsonl");
    record_toy_store(&store);
    let config = out.path().join("run.json");
    fs::write(
        &config,
        serde_json::json!({
            "repo": {"root": tiny_repo()},
            "dataset": toy_dataset(),
            "gateway": {"mode": "replay", "store": "store.jsonl"},
            "output_dir": "results",
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["link", "--config", path_str(&config)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let results = out.path().join("results");
    assert_eq!(fs::read_to_string(results.join("links.jsonl")).unwrap(), TOY_LINKS);

    let o = run(&["eval", "--config", path_str(&config)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = fs::read_to_string(results.join("report.csv")).unwrap();
    assert_eq!(
        csv,
        "group,n,ga,precision,recall,f1\n\
         directory,1,1.000000,1.000000,1.000000,1.000000\n\
         file,1,1.000000,1.000000,1.000000,1.000000\n\
         function,1,1.000000,1.000000,1.000000,1.000000\n\
         overall,3,1.000000,1.000000,1.000000,1.000000\n"
    );
    assert_eq!(text(&o.stdout), csv);
    let groups = fs::read_to_string(results.join("groups.explicitness.csv")).unwrap();
    assert_eq!(groups.lines().map(|l| l.split(',').next().unwrap()).collect::<Vec<_>>(), ["group", "L1", "L2", "L3"]);
    assert!(results.join("correlations.csv").is_file());

    let o = run(&["report", "--config", path_str(&config), "--group-by", "explicitness", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let rows = trace_decline::eval::load_report_json(&text(&o.stdout)).unwrap();
    assert_eq!(rows.len(), 3);
}

#[test]
fn eval_reports_missing_predictions_as_findings() {
    let out = tempfile::tempdir().unwrap();
    let links = out.path().join("links.jsonl");
    fs::write(&links, TOY_LINKS.lines().next().unwrap()).unwrap();
    let dataset = toy_dataset();
    let args = ["eval", "--dataset", path_str(&dataset), "--links", path_str(&links), "--out", path_str(out.path())];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("no prediction for proposals [102, 103]"));
    let mut lenient = args.to_vec();
    lenient.push("--allow-findings");
    assert_eq!(run(&lenient).status.code(), Some(0));
}

#[test]
fn baseline_sweep_then_eval_candidates() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "baseline",
        "--sweep",
        "--k-sweep",
        "1,2,5",
        "--granularity",
        "file",
        "--dataset",
        path_str(&toy_dataset()),
        "--repo",
        path_str(&tiny_repo()),
        "--out",
        path_str(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let candidates = out.path().join("candidates.jsonl");
    assert_eq!(fs::read_to_string(&candidates).unwrap().lines().count(), 9);
    let o = run(&[
        "eval",
        "--dataset",
        path_str(&toy_dataset()),
        "--candidates",
        path_str(&candidates),
        "--k",
        "5",
        "--out",
        path_str(out.path()),
        "--allow-findings",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let sweep = fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "k,n,precision,recall,f1");
    assert!(lines[3].starts_with("5,1,0.500000,1.000000,"), "{sweep}");
}

#[test]
fn help_on_every_subcommand() {
    let cases: [(&[&str], &[&str]); 7] = [
        (&["scan"], &["--repo", "--exclude", "--config", "--out"]),
        (&["dataset", "validate"], &["--dataset", "--allow-findings"]),
        (&["link"], &["--mode", "--store", "--endpoint", "--max-in-flight", "--token-budget", "--proposal"]),
        (&["baseline"], &["--sweep", "--k", "--granularity", "--weighting", "--link-decision"]),
        (&["eval"], &["--links", "--candidates", "--group-by", "--exact-p"]),
        (&["report"], &["--scores", "--format", "--output"]),
        (&["dataset"], &["validate"]),
    ];
    for (cmd, flags) in cases {
        let mut args = cmd.to_vec();
        args.push("--help");
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{cmd:?}");
        let help = text(&o.stdout);
        for f in flags {
            assert!(help.contains(f), "{cmd:?} help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [&["frobnicate"][..], &["scan", "--bogus"], &["link", "--mode", "sideways"]] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn bad_config_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("run.json");
    fs::write(&config, r#"{"baseline": {"k": 0}}"#).unwrap();
    let o = run(&["scan", "--config", path_str(&config), "--repo", path_str(&tiny_repo())]);
    assert_eq!(o.status.code(), Some(2));
}
