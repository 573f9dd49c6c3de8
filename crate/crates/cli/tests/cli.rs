//! End-to-end checks of the binary: file outputs, determinism, exit codes,
//! and config-file precedence. Everything runs on tiny hand-built graphs so
//! the whole file stays fast.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphgda"))
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("graphgda_cli_{}_{name}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should launch")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Two triangles joined by one edge, labels by triangle.
fn write_tiny_graph(dir: &Path, flip: bool) {
    fs::create_dir_all(dir).unwrap();
    let adjacency = "\
0 1 1 0 0 0
1 0 1 0 0 0
1 1 0 1 0 0
0 0 1 0 1 1
0 0 0 1 0 1
0 0 0 1 1 0
";
    let sign = if flip { -1.0 } else { 1.0 };
    let mut features = String::new();
    for i in 0..6 {
        let mu = if i < 3 { 1.5 * sign } else { -1.5 * sign };
        let wobble = 0.05 * i as f64;
        features.push_str(&format!("{},{}\n", mu + wobble, mu - wobble));
    }
    fs::write(dir.join("adjacency.txt"), adjacency).unwrap();
    fs::write(dir.join("features.csv"), features).unwrap();
    fs::write(dir.join("labels.txt"), "0\n0\n0\n1\n1\n1\n").unwrap();
}

#[test]
fn csbm_gen_writes_triple_and_reruns_identically() {
    let out_a = fresh_dir("csbm_a");
    let out_b = fresh_dir("csbm_b");
    for out in [&out_a, &out_b] {
        let r = run(bin()
            .args(["csbm-gen", "--kind", "homophily", "--side", "source", "--seed", "7"])
            .arg("--out")
            .arg(out));
        assert_code(&r, 0);
    }
    for name in ["adjacency.txt", "features.csv", "labels.txt", "marginal.txt", "spec.json", "manifest.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let keys: Vec<&String> = manifest.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["command", "version", "seed", "config", "inputs"]);
    assert_eq!(manifest["command"], "csbm-gen");
}

#[test]
fn csbm_gen_without_kind_is_usage_error() {
    let out = fresh_dir("csbm_nokind");
    let r = run(bin().args(["csbm-gen", "--side", "source"]).arg("--out").arg(&out));
    assert_code(&r, 2);
}

#[test]
fn csbm_gen_rejects_unknown_kind() {
    let out = fresh_dir("csbm_badkind");
    let r = run(bin()
        .args(["csbm-gen", "--kind", "bogus", "--side", "source"])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 2);
}

#[test]
fn fgw_dist_of_graph_with_itself_is_zero() {
    let g = fresh_dir("fgw_self_graph");
    write_tiny_graph(&g, false);
    let out = fresh_dir("fgw_self_out");
    let r = run(bin()
        .arg("fgw-dist")
        .arg("--graph0")
        .arg(&g)
        .arg("--graph1")
        .arg(&g)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let printed: f64 = String::from_utf8_lossy(&r.stdout).trim().parse().unwrap();
    assert!(printed <= 1e-6, "self-distance {printed}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("distance.json")).unwrap()).unwrap();
    assert!(report["distance"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn fgw_dist_missing_input_is_io_error() {
    let out = fresh_dir("fgw_missing_out");
    let r = run(bin()
        .args(["fgw-dist", "--graph0", "/nonexistent/g0", "--graph1", "/nonexistent/g1"])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 3);
}

#[test]
fn alpha_zero_and_one_differ_on_feature_shifted_pair() {
    let g0 = fresh_dir("alpha_g0");
    let g1 = fresh_dir("alpha_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, true);
    let mut distances = Vec::new();
    for (alpha, tag) in [("0.0", "a0"), ("1.0", "a1")] {
        let out = fresh_dir(&format!("alpha_out_{tag}"));
        let r = run(bin()
            .arg("fgw-dist")
            .arg("--graph0")
            .arg(&g0)
            .arg("--graph1")
            .arg(&g1)
            .args(["--alpha", alpha])
            .arg("--out")
            .arg(&out));
        assert_code(&r, 0);
        distances.push(String::from_utf8_lossy(&r.stdout).trim().parse::<f64>().unwrap());
    }
    // alpha 1 ignores the flipped features and sees two identical triangles
    assert!(distances[0] > 1e-3, "feature-only distance {}", distances[0]);
    assert!(distances[1] <= 1e-6, "structure-only distance {}", distances[1]);
}

#[test]
fn generate_path_t1_writes_two_stops() {
    let g0 = fresh_dir("path_t1_g0");
    let g1 = fresh_dir("path_t1_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, true);
    let out = fresh_dir("path_t1_out");
    let r = run(bin()
        .arg("generate-path")
        .arg("--source")
        .arg(&g0)
        .arg("--target")
        .arg(&g1)
        .args(["--t-steps", "1", "--rank", "3"])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    assert!(out.join("H_000").join("adjacency.txt").exists());
    assert!(out.join("H_001").join("adjacency.txt").exists());
    assert!(!out.join("H_002").exists());
    assert!(out.join("path.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn generate_path_clamps_oversized_rank() {
    let g0 = fresh_dir("clamp_g0");
    let g1 = fresh_dir("clamp_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, false);
    let out = fresh_dir("clamp_out");
    let r = run(bin()
        .arg("generate-path")
        .arg("--source")
        .arg(&g0)
        .arg("--target")
        .arg(&g1)
        .args(["--t-steps", "1", "--rank", "99"])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("clamping"), "stderr: {stderr}");
}

#[test]
fn path_quality_reports_degenerate_for_identical_endpoints() {
    let g = fresh_dir("pq_graph");
    write_tiny_graph(&g, false);
    let path_dir = fresh_dir("pq_path");
    let r = run(bin()
        .arg("generate-path")
        .arg("--source")
        .arg(&g)
        .arg("--target")
        .arg(&g)
        .args(["--t-steps", "2", "--rank", "6"])
        .arg("--out")
        .arg(&path_dir));
    assert_code(&r, 0);
    let out = fresh_dir("pq_out");
    let r = run(bin()
        .arg("path-quality")
        .arg("--path")
        .arg(&path_dir)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("quality.json")).unwrap()).unwrap();
    assert_eq!(report["degenerate"], true);
}

#[test]
fn adapt_rejects_unknown_mode() {
    let g = fresh_dir("adapt_badmode_graph");
    write_tiny_graph(&g, false);
    let out = fresh_dir("adapt_badmode_out");
    let r = run(bin()
        .arg("adapt")
        .args(["--mode", "bogus"])
        .arg("--source")
        .arg(&g)
        .arg("--target")
        .arg(&g)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 2);
}

#[test]
fn adapt_direct_writes_report_rows() {
    let g0 = fresh_dir("adapt_direct_g0");
    let g1 = fresh_dir("adapt_direct_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, false);
    let out = fresh_dir("adapt_direct_out");
    let r = run(bin()
        .arg("adapt")
        .args(["--mode", "direct", "--seeds", "2", "--epochs", "60"])
        .arg("--source")
        .arg(&g0)
        .arg("--target")
        .arg(&g1)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mode,seed,stage,accuracy,total_wall_time_s");
    assert_eq!(lines.len(), 3, "one header plus one stage row per seed");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert!(report["mean_final_accuracy"].as_f64().unwrap() >= 0.5);
}

#[test]
fn adapt_gradual_runs_on_tiny_pair() {
    let g0 = fresh_dir("adapt_grad_g0");
    let g1 = fresh_dir("adapt_grad_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, false);
    let out = fresh_dir("adapt_grad_out");
    let r = run(bin()
        .arg("adapt")
        .args(["--mode", "gradual", "--seeds", "1", "--t-steps", "1"])
        .args(["--rank", "4", "--epochs", "60"])
        .arg("--source")
        .arg(&g0)
        .arg("--target")
        .arg(&g1)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let stages = report["runs"][0]["per_stage_accuracy"].as_array().unwrap();
    assert_eq!(stages.len(), 2, "T=1 gives stages 0 and 1");
}

#[test]
fn adapt_requires_labeled_target() {
    let g0 = fresh_dir("adapt_nolabel_g0");
    let g1 = fresh_dir("adapt_nolabel_g1");
    write_tiny_graph(&g0, false);
    write_tiny_graph(&g1, false);
    fs::remove_file(g1.join("labels.txt")).unwrap();
    let out = fresh_dir("adapt_nolabel_out");
    let r = run(bin()
        .arg("adapt")
        .args(["--mode", "direct", "--seeds", "1"])
        .arg("--source")
        .arg(&g0)
        .arg("--target")
        .arg(&g1)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let g = fresh_dir("config_graph");
    write_tiny_graph(&g, false);
    let cfg_file = fresh_dir("config_dir").join("run.conf");
    fs::write(&cfg_file, "# sweep defaults\nalpha = 0.25\nmultistart = true\n").unwrap();

    let out_cfg = fresh_dir("config_out_a");
    let r = run(bin()
        .arg("fgw-dist")
        .arg("--graph0")
        .arg(&g)
        .arg("--graph1")
        .arg(&g)
        .arg("--config")
        .arg(&cfg_file)
        .arg("--out")
        .arg(&out_cfg));
    assert_code(&r, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_cfg.join("distance.json")).unwrap()).unwrap();
    assert_eq!(report["alpha"].as_f64().unwrap(), 0.25);

    let out_flag = fresh_dir("config_out_b");
    let r = run(bin()
        .arg("fgw-dist")
        .arg("--graph0")
        .arg(&g)
        .arg("--graph1")
        .arg(&g)
        .arg("--config")
        .arg(&cfg_file)
        .args(["--alpha", "0.75"])
        .arg("--out")
        .arg(&out_flag));
    assert_code(&r, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_flag.join("distance.json")).unwrap()).unwrap();
    assert_eq!(report["alpha"].as_f64().unwrap(), 0.75);
}

#[test]
fn malformed_config_line_is_parse_error() {
    let g = fresh_dir("badcfg_graph");
    write_tiny_graph(&g, false);
    let cfg_file = fresh_dir("badcfg_dir").join("broken.conf");
    fs::write(&cfg_file, "alpha 0.25\n").unwrap();
    let out = fresh_dir("badcfg_out");
    let r = run(bin()
        .arg("fgw-dist")
        .arg("--graph0")
        .arg(&g)
        .arg("--graph1")
        .arg(&g)
        .arg("--config")
        .arg(&cfg_file)
        .arg("--out")
        .arg(&out));
    assert_code(&r, 3);
}

#[test]
fn shift_sweep_emits_cell_rows_and_aggregate() {
    let out = fresh_dir("sweep_out");
    let r = run(bin()
        .args([
            "shift-sweep",
            "--kind",
            "homophily",
            "--levels",
            "0.0,0.6",
            "--seeds",
            "1",
            "--n",
            "24",
            "--dim",
            "4",
            "--degree-scale",
            "0.1",
            "--t-steps",
            "1",
            "--rank",
            "8",
            "--epochs",
            "40",
        ])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 0);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "kind,level,seed,method,accuracy,wall_time_s");
    assert_eq!(lines.len(), 5, "2 levels x 1 seed x 2 methods plus header");
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
}

#[test]
fn thread_env_must_be_positive_integer() {
    let out = fresh_dir("threads_out");
    let r = run(bin()
        .env("GRAPHGDA_THREADS", "zero")
        .args(["csbm-gen", "--kind", "degree", "--side", "target"])
        .arg("--out")
        .arg(&out));
    assert_code(&r, 2);
}
