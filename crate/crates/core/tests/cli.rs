use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn searchkit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_searchkit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SEARCHKIT_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_n7_has_four_oracle_calls() {
    let dir = tempfile::tempdir().unwrap();
    let o = searchkit(&["generate", "--n", "7", "--x", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "generate");
    assert_eq!(r["result"]["oracle_calls"], 4);
    assert_eq!(r["result"]["schedule"], serde_json::json!([2, 5]));
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["n"], 7);
    let text = fs::read_to_string(dir.path().join("circuit.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("ORACLE")).count(), 4);
    assert!(dir.path().join("meta.json").exists());
}

#[test]
fn recurrence_csv_matches_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let o = searchkit(&["recurrence", "--n", "12", "--x", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("recurrence.csv"));
    assert_eq!(rows.len(), 4);
    for row in rows {
        let alpha: f64 = row[2].parse().unwrap();
        let sim: f64 = row[3].parse().unwrap();
        assert!((alpha - sim).abs() < 1e-12);
    }
}

#[test]
fn bench_has_reference_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = searchkit(&["bench", "--mode", "queries", "--n-range", "6..14"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(text.starts_with("n,x,schedule,oracle_queries,reference"));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        // the schedule column is quoted and may contain commas
        let n: u32 = row.split(',').next().unwrap().parse().unwrap();
        let tail: Vec<&str> = row.rsplitn(4, ',').collect();
        let reference: u64 = tail[2].parse().unwrap();
        assert_eq!(reference, (PI / 4.0 * 2f64.powf(n as f64 / 2.0)).ceil() as u64);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(searchkit(&["generate", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(searchkit(&["generate", "--n", "6", "--x", "1", "--schedule", "3,3"], dir.path()).status.code(), Some(2));
    assert_eq!(searchkit(&["simulate", "--n", "3", "--oracle-marked", "9"], dir.path()).status.code(), Some(2));
    let cnf = dir.path().join("two.cnf");
    fs::write(&cnf, "p cnf 2 1\n1 2 0\n").unwrap();
    let o = searchkit(&["ksat", "--cnf", cnf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 satisfying assignments"));
    fs::write(&cnf, "p cnf 2 2\n1 2 0\n").unwrap();
    assert_eq!(searchkit(&["ksat", "--cnf", cnf.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["multipoint", "--n", "7", "--marked-count", "3", "--trials", "8", "--seed", "42", "--p", "0.3"];
    let mut seen = Vec::new();
    for _ in 0..2 {
        assert_eq!(searchkit(&args, dir.path()).status.code(), Some(0));
        seen.push((
            fs::read(dir.path().join("multipoint.json")).unwrap(),
            fs::read(dir.path().join("trials.csv")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
    let r = report(dir.path(), "multipoint");
    assert_eq!(r["seed"], 42);
    assert_eq!(r["result"]["marked_count"], 3);
}

#[test]
fn unseeded_run_prints_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = searchkit(&["multipoint", "--n", "5", "--oracle-marked", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&o.stderr);
    let printed: u64 = stderr.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert_eq!(report(dir.path(), "multipoint")["seed"], printed);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n = 6\nx = 2\noracle-marked = [9]\n").unwrap();
    let o = searchkit(&["simulate", "--config", cfg.to_str().unwrap(), "--oracle-marked", "17"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "simulate");
    assert_eq!(r["config"]["x"], 2);
    assert_eq!(r["result"]["found"], 17);
    assert!(r["result"]["success_probability"].as_f64().unwrap() > 1.0 - 1e-9);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_searchkit"))
        .args(["generate", "--n", "4"])
        .env("SEARCHKIT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("generate.json").exists());
}

#[test]
fn ksat_manifest_feeds_rewrite() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    fs::write(&cnf, "c unique model 101\np cnf 3 3\n1 2 0\n-2 0\n-1 3 0\n").unwrap();
    let o = searchkit(&["ksat", "--cnf", cnf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "ksat");
    assert_eq!(r["result"]["solution"]["bits"], "101");
    assert!(fs::read_to_string(dir.path().join("oracle.qasm")).unwrap().starts_with("OPENQASM 2.0;"));

    let rw = dir.path().join("rw");
    let o = searchkit(
        &[
            "uncompute-rewrite",
            "--oracle-circuit",
            dir.path().join("oracle.json").to_str().unwrap(),
            "--manifest",
            dir.path().join("manifest.json").to_str().unwrap(),
            "--schedule",
            "1,2",
        ],
        &rw,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&rw, "uncompute-rewrite");
    assert_eq!(r["result"]["equivalent"], true);
    assert_eq!(r["result"]["report"]["emitted_oracle_gates"], r["result"]["report"]["total_oracle_gates"]);
}

#[test]
fn simulate_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = searchkit(&["simulate", "--n", "5", "--oracle-marked", "6", "--dump"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let state = searchkit::sim::read_dump(&dir.path().join("state")).unwrap();
    assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    let rows = csv_rows(&dir.path().join("probabilities.csv"));
    assert_eq!(rows.len(), 32);
    let p6: f64 = rows[6][2].parse().unwrap();
    assert!(p6 > 1.0 - 1e-9);
}
