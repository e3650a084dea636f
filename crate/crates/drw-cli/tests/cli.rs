//! End-to-end checks of the harness: example invocations, oracle columns,
//! exit codes, and byte-level determinism.

use clap::Parser;
use drw_cli::{run, Cli};

fn run_args(args: &[&str]) -> drw_core::Result<String> {
    let mut full = vec!["drw"];
    full.extend_from_slice(args);
    run(&Cli::parse_from(full))
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&run_args(args).unwrap()).unwrap()
}

#[test]
fn solve_path10_with_oracle_columns() {
    let doc = json(&[
        "solve", "--graph", "path:10", "--b", "endpoints", "--eps", "0.1", "--kappa", "0.05",
        "--seed", "7",
    ]);
    assert_eq!(doc["schema"], "drw/solve/1");
    let rel = doc["oracle"]["rel_error"].as_array().unwrap();
    assert_eq!(rel.len(), 10);
    for entry in rel.iter().take(9) {
        let e = entry.as_f64().expect("guaranteed coordinate has a number");
        assert!(e < 0.5, "rel error {e}");
    }
    assert!(rel[9].is_null(), "sink has no relative error");
    let exact = doc["oracle"]["x_exact"].as_array().unwrap();
    assert_eq!(exact[0].as_f64().unwrap(), 9.0);
}

#[test]
fn solve_from_file_single_edge() {
    let dir = std::env::temp_dir().join("drw_cli_test_edge");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.txt");
    std::fs::write(&path, "2 1\n0 1 1.0\n").unwrap();
    let spec = format!("file:{}", path.display());
    let doc = json(&["solve", "--graph", &spec, "--kappa", "0.1", "--seed", "3"]);
    let x = doc["x_mean"].as_array().unwrap();
    assert!((x[0].as_f64().unwrap() - 1.0).abs() < 0.15);
    assert_eq!(x[1].as_f64().unwrap(), 0.0);
}

#[test]
fn missing_seed_is_usage_error() {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_drw"))
        .args(["solve", "--graph", "path:3"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn bad_graph_spec_is_usage_error() {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_drw"))
        .args(["solve", "--graph", "dodecahedron:12", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn missing_graph_file_is_validation_error() {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_drw"))
        .args(["solve", "--graph", "file:/nonexistent/g.txt", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn reff_examples() {
    for (graph, expect) in [("path:2", 1.0), ("path:3", 2.0), ("k3", 2.0 / 3.0)] {
        let doc = json(&["reff", "--graph", graph, "--seed", "11", "--reps", "10"]);
        let est = doc["estimate"].as_f64().unwrap();
        assert!(
            (est - expect).abs() / expect < 0.1,
            "{graph}: estimate {est}, expect {expect}"
        );
        assert_eq!(doc["exact"].as_f64().unwrap(), expect);
    }
}

#[test]
fn rst_k3_frequency_table() {
    let doc = json(&["rst", "--graph", "k3", "--seed", "1", "--reps", "600"]);
    assert_eq!(doc["unique_trees"], 3);
    assert_eq!(doc["tree_count_exact"], 3);
    for (_, count) in doc["frequencies"].as_object().unwrap() {
        assert!(count.as_u64().unwrap() > 120);
    }
}

#[test]
fn rst_on_a_tree_is_constant() {
    let doc = json(&["rst", "--graph", "tree:7", "--seed", "5", "--reps", "20"]);
    assert_eq!(doc["unique_trees"], 1);
}

#[test]
fn rst_grid_with_phi() {
    let doc = json(&["rst", "--graph", "grid:4", "--phi", "0.5", "--seed", "2", "--reps", "5"]);
    assert_eq!(doc["schema"], "drw/rst/1");
    assert!(doc["partitions_first_run"].as_u64().unwrap() >= 1);
}

#[test]
fn bench_complete_rounds_grow_and_track_formula() {
    let csv = run_args(&["bench", "--family", "complete", "--sizes", "8,16,32", "--seed", "1"])
        .unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let rounds: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(rounds[0] < rounds[1] && rounds[1] < rounds[2], "{rounds:?}");
    for r in &rows {
        let measured: f64 = r[2].parse().unwrap();
        let predicted: f64 = r[5].parse().unwrap();
        let ratio = measured / predicted;
        assert!(ratio < 8.0 && ratio > 1.0 / 8.0, "ratio {ratio}");
    }
}

#[test]
fn outputs_are_byte_identical() {
    let args = ["solve", "--graph", "grid:3", "--kappa", "0.1", "--seed", "9", "--reps", "2"];
    let a = run_args(&args).unwrap();
    let b = run_args(&args).unwrap();
    assert_eq!(a, b);
    // and through the real binary
    let out = |_: u32| {
        std::process::Command::new(env!("CARGO_BIN_EXE_drw"))
            .args(["rst", "--graph", "k3", "--seed", "4", "--reps", "50"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(out(0), out(1));
}
