//! End-to-end command-line tests: exit codes, report schemas, golden CSV
//! output, and bit-exact reproducibility of reports from their echoed
//! parameters.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spatialsearch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spatialsearch-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn invalid_mu_exits_with_config_error() {
    let out = run(&["search-grid", "--d", "3", "--side", "4", "--mu", "0.6"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mu"), "stderr: {err}");
}

#[test]
fn search_grid_reports_exact_success() {
    let out = run(&[
        "search-grid", "--d", "3", "--side", "4", "--marked", "random:1", "--seed", "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let p = v["success_probability"].as_f64().unwrap();
    assert!((p - 25.0 / 32.0).abs() < 1e-9, "success {p}");
    // Per-level deltas stay within tolerance.
    for level in v["levels"].as_array().unwrap().iter().skip(1) {
        let delta = level["delta"].as_f64().unwrap();
        assert!(delta.abs() < 1e-9);
    }
}

#[test]
fn search_grid_is_reproducible_from_echoed_params() {
    let first = run(&[
        "search-grid", "--d", "2", "--side", "9", "--marked", "random:1", "--seed", "11",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let v1: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    // Re-run with exactly the echoed parameters.
    let p = &v1["params"];
    let second = run(&[
        "search-grid",
        "--d", p["d"].as_str().unwrap(),
        "--side", p["side"].as_str().unwrap(),
        "--marked", p["marked"].as_str().unwrap(),
        "--beta", p["beta"].as_str().unwrap(),
        "--mu", p["mu"].as_str().unwrap(),
        "--l0", p["l0"].as_str().unwrap(),
        "--seed", p["seed"].as_str().unwrap(),
    ]);
    let mut v2: serde_json::Value = serde_json::from_str(&stdout(&second)).unwrap();
    let mut v1 = v1;
    v1.as_object_mut().unwrap().remove("wall_time_ms");
    v2.as_object_mut().unwrap().remove("wall_time_ms");
    assert_eq!(v1, v2, "reports must be bit-identical apart from wall time");
}

#[test]
fn amplify_demo_csv_matches_prediction() {
    let out = run(&["amplify-demo", "--epsilon", "0.111111", "--m", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,m,predicted,simulated,delta"));
    let last = lines.last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[1], "1");
    let predicted: f64 = fields[2].parse().unwrap();
    assert!((predicted - 0.725651).abs() < 1e-6);
    let delta: f64 = fields[4].parse().unwrap();
    assert!(delta.abs() < 1e-9);
}

#[test]
fn sweep_golden_csv() {
    let dir = tmp_dir("sweep");
    let cfg = dir.join("sweep.cfg");
    std::fs::write(&cfg, "task = amplify\nepsilon = 0.25\nsweep_param = m\nsweep_values = 0..3\n")
        .unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let expected = "\
param,value,steps,queries,success,predicted,status
m,0,1,0,0.250000000,0.250000000,ok
m,1,5,0,1.000000000,1.000000000,ok
m,2,9,0,0.250000000,0.250000000,ok
m,3,13,0,0.250000000,0.250000000,ok
";
    assert_eq!(stdout(&out), expected);
}

#[test]
fn sweep_d2_success_matches_fold() {
    let dir = tmp_dir("sweep-d2");
    let cfg = dir.join("sweep.cfg");
    std::fs::write(
        &cfg,
        "task = search-grid\nd = 2\nmarked = random:1\nseed = 5\nsweep_param = R\nsweep_values = 1..3\n",
    )
    .unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let success: f64 = fields[4].parse().unwrap();
        let predicted: f64 = fields[5].parse().unwrap();
        assert!((success - predicted).abs() < 1e-8, "row {row}");
    }
}

#[test]
fn sweep_cluster_audit_emits_pass_rate_summary() {
    let dir = tmp_dir("sweep-audit");
    let cfg = dir.join("audit.cfg");
    std::fs::write(
        &cfg,
        "task = cluster-audit\nside = 4\nd = 3\nsweep_param = seed\nsweep_values = 0..19\n",
    )
    .unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("summary,pass_rate,"), "last row: {last}");
    let rate: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!(rate >= 0.9, "audit pass rate {rate}");
}

#[test]
fn empty_sweep_range_yields_header_only() {
    let dir = tmp_dir("sweep-empty");
    let cfg = dir.join("empty.cfg");
    std::fs::write(&cfg, "task = amplify\nsweep_param = m\nsweep_values = \n").unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "param,value,steps,queries,success,predicted,status\n");
}

#[test]
fn verify_locality_modes() {
    let dir = tmp_dir("locality");
    let graph = dir.join("path3.graph");
    std::fs::write(&graph, "3\n1 2\n2 3\n").unwrap();

    // Z mode: a swap between the non-adjacent endpoints.
    let matrix = dir.join("swap.mat");
    std::fs::write(&matrix, "3\n0 2 1 0\n2 0 1 0\n1 1 1 0\n").unwrap();
    let out = run(&[
        "verify-locality", "--matrix-file", matrix.to_str().unwrap(),
        "--graph-file", graph.to_str().unwrap(), "--mode", "z",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["local"], serde_json::json!(false));

    // H mode: the identity is trivially local.
    let ident = dir.join("ident.mat");
    std::fs::write(&ident, "3\n0 0 1 0\n1 1 1 0\n2 2 1 0\n").unwrap();
    let out = run(&[
        "verify-locality", "--matrix-file", ident.to_str().unwrap(),
        "--graph-file", graph.to_str().unwrap(), "--mode", "h",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["local"], serde_json::json!(true));

    // C mode: one rotation block on an edge.
    let step = dir.join("rot.step");
    std::fs::write(
        &step,
        "blocks 1\nblock 2 1 0 2 0\n0 0 0.8 0\n0 1 -0.6 0\n1 0 0.6 0\n1 1 0.8 0\n",
    )
    .unwrap();
    let out = run(&[
        "verify-locality", "--matrix-file", step.to_str().unwrap(),
        "--graph-file", graph.to_str().unwrap(), "--mode", "c",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["local"], serde_json::json!(true));

    // C mode rejection: the same block on the non-adjacent pair.
    let bad = dir.join("bad.step");
    std::fs::write(
        &bad,
        "blocks 1\nblock 2 1 0 3 0\n0 0 0.8 0\n0 1 -0.6 0\n1 0 0.6 0\n1 1 0.8 0\n",
    )
    .unwrap();
    let out = run(&[
        "verify-locality", "--matrix-file", bad.to_str().unwrap(),
        "--graph-file", graph.to_str().unwrap(), "--mode", "c",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["local"], serde_json::json!(false));
}

#[test]
fn disjointness_report_accounting() {
    let out = run(&["disjointness", "--n", "8", "--x", "00010010", "--y", "00010000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["answer"], serde_json::json!(true));
    assert_eq!(v["found_item"], serde_json::json!(4));
    assert_eq!(v["sync_ok"], serde_json::json!(true));
    let qubits = v["qubits_communicated"].as_u64().unwrap();
    let gadgets = v["oracle_gadgets"].as_u64().unwrap();
    let relays = v["relays"].as_u64().unwrap();
    assert_eq!(qubits, 4 * gadgets + 2 * relays);
}

#[test]
fn hybrid_lowerbound_grid_chain_holds() {
    let dir = tmp_dir("hybrid");
    let out_file = dir.join("trace.csv");
    let out = run(&[
        "hybrid-lowerbound", "--graph", "grid", "--algo", "grid-search",
        "--side", "4", "--k-side", "2", "--out", out_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_file).unwrap();
    assert!(text.starts_with("q,region,gamma,d,bound,slack\n"));
    // Every slack is non-negative up to tolerance.
    for line in text.lines().skip(1) {
        let slack: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!(slack >= -1e-9, "negative slack in {line}");
    }
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tmp_dir("outdir");
    let out = bin()
        .env("SPATIALSEARCH_OUT_DIR", &dir)
        .args(["amplify-demo", "--epsilon", "0.25", "--m", "0", "--out", "demo.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(dir.join("demo.csv")).unwrap();
    assert!(written.starts_with("epsilon,m,"));
}

#[test]
fn graph_file_inputs_work_end_to_end() {
    let dir = tmp_dir("graphfile");
    // A 4x4x4 grid written through the text format.
    let grid = spatialsearch_graph_text();
    let path = dir.join("cube.graph");
    std::fs::write(&path, grid).unwrap();
    let out = run(&[
        "search-irregular", "--graph-file", path.to_str().unwrap(),
        "--d", "3", "--marked", "21", "--seed", "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["params"]["n"], serde_json::json!("64"));
    assert_eq!(v["goodness_audit"]["pass"], serde_json::json!(true));
}

// The CLI tests avoid linking the core crate directly except for this one
// fixture generator.
fn spatialsearch_graph_text() -> String {
    spatialsearch::graph::make_grid(3, 4).unwrap().graph.to_text()
}
