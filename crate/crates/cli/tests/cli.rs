use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evflex"));
    cmd.env_remove("EVFLEX_OUT_DIR");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn run_in(cwd: &Path, args: &[&str]) -> Output {
    bin().current_dir(cwd).args(args).output().unwrap()
}

fn run_minimal(cwd: &Path, out: &str, extra: &[&str]) -> Output {
    let s = scenario("minimal");
    let mut args = vec!["run", "--scenario", s.to_str().unwrap(), "--out-dir", out];
    args.extend_from_slice(extra);
    run_in(cwd, &args)
}

fn kpi_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("kpis.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn identical_invocations_give_identical_manifests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run_minimal(dir.path(), "out", &["--mode", "v2g", "--policy", "rbc", "--seed", "3"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ma = fs::read(a.path().join("out/manifest.json")).unwrap();
    let mb = fs::read(b.path().join("out/manifest.json")).unwrap();
    assert_eq!(ma, mb);
    let manifest: Value = serde_json::from_slice(&ma).unwrap();
    let names: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["trace.csv", "kpis.csv", "kpis.txt", "flexoffers.csv", "summary.json"]
    );
}

#[test]
fn no_control_policy_matches_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_minimal(tmp.path(), "base", &["--mode", "nocontrol", "--policy", "nocontrol"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = kpi_rows(&tmp.path().join("base"));
    assert_eq!(rows.len(), 7);
    for row in rows {
        if row[3].parse::<f64>().unwrap() != 0.0 {
            assert_eq!(row[4].parse::<f64>().unwrap(), 1.0, "{row:?}");
        }
    }
}

#[test]
fn compare_reports_zero_delta_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_minimal(tmp.path(), "a", &["--mode", "nocontrol"])), 0);
    fs::create_dir(tmp.path().join("b")).unwrap();
    for f in ["kpis.csv", "manifest.json"] {
        fs::copy(tmp.path().join("a").join(f), tmp.path().join("b").join(f)).unwrap();
    }
    let out = run_in(tmp.path(), &["compare", "a", "b", "--out", "table.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(fs::read_to_string(tmp.path().join("table.txt")).unwrap(), table);
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split_whitespace().rev().take(4).collect();
        assert!(cells[0] == "+0.00%" || cells[0] == "(abs)", "{line}");
        assert_eq!(cells[0], cells[2], "{line}");
        assert_eq!(cells[1], cells[3], "{line}");
    }
}

#[test]
fn compare_rejects_mismatched_horizons_and_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_minimal(tmp.path(), "full", &[])), 0);
    assert_eq!(code(&run_minimal(tmp.path(), "short", &["--steps", "48"])), 0);
    let out = run_in(tmp.path(), &["compare", "full", "short"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon mismatch"));

    fs::create_dir(tmp.path().join("broken")).unwrap();
    fs::copy(
        tmp.path().join("full/manifest.json"),
        tmp.path().join("broken/manifest.json"),
    )
    .unwrap();
    let csv = fs::read_to_string(tmp.path().join("full/kpis.csv")).unwrap();
    let truncated: String = csv
        .lines()
        .filter(|l| !l.starts_with("ramping"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_ne!(truncated, csv);
    fs::write(tmp.path().join("broken/kpis.csv"), truncated).unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["compare", "full", "broken"])), 2);

    fs::write(tmp.path().join("broken/kpis.csv"), "name,value\nx,1\n").unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["compare", "full", "broken"])), 2);
}

#[test]
fn generate_writes_one_schedule_per_vehicle() {
    let tmp = tempfile::tempdir().unwrap();
    let params = scenario("fleet_params.json");
    let out = run_in(
        tmp.path(),
        &["generate", "--params", params.to_str().unwrap(), "--out-dir", "gen"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let schedules = fs::read_dir(tmp.path().join("gen"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("electric_vehicle_")
        })
        .count();
    assert_eq!(schedules, 12);
    let summary = fs::read_to_string(tmp.path().join("gen/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 13);
}

#[test]
fn generate_handles_empty_and_invalid_plans() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("empty.json"),
        r#"{"seed": 1, "days": 2, "vehicles": []}"#,
    )
    .unwrap();
    let out = run_in(tmp.path(), &["generate", "--params", "empty.json", "--out-dir", "gen"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(tmp.path().join("gen/manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["summary.csv"]);

    fs::write(tmp.path().join("bad.json"), r#"{"seed": 1, "days": 0, "vehicles": []}"#).unwrap();
    let out = run_in(tmp.path(), &["generate", "--params", "bad.json", "--out-dir", "gen2"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_and_config_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["run"])), 1);
    assert_eq!(
        code(&run_in(tmp.path(), &["run", "--scenario", "x", "--policy", "ppo"])),
        1
    );
    let out = run_in(tmp.path(), &["run", "--scenario", "does-not-exist"]);
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn out_dir_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario("minimal");
    let out = bin()
        .current_dir(tmp.path())
        .env("EVFLEX_OUT_DIR", "from-env")
        .args(["run", "--scenario", s.to_str().unwrap(), "--steps", "24"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("from-env/manifest.json").exists());
}

#[test]
fn stdio_bridge_session() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario("minimal");
    let mut child = bin()
        .current_dir(tmp.path())
        .args([
            "run",
            "--scenario",
            s.to_str().unwrap(),
            "--steps",
            "5",
            "--policy",
            "bridge",
            "--out-dir",
            "br",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut exchange = |request: &str| -> Value {
        writeln!(stdin, "{request}").unwrap();
        stdin.flush().unwrap();
        serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap()
    };

    let hello = exchange(r#"{"type":"hello","version":1}"#);
    assert_eq!(hello["type"], "hello");
    let obs = exchange(r#"{"type":"reset","seed":4}"#);
    assert_eq!(obs["type"], "observation");
    let bad = exchange(r#"{"type":"act","actions":[]}"#);
    assert_eq!(bad["type"], "error");
    let mut done = false;
    for _ in 0..5 {
        let step = exchange(r#"{"type":"act","actions":[1.0]}"#);
        assert_eq!(step["type"], "step", "{step}");
        done = step["done"].as_bool().unwrap();
    }
    assert!(done);
    assert_eq!(exchange(r#"{"type":"done"}"#)["type"], "bye");
    drop(stdin);
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: Value = serde_json::from_slice(&fs::read(tmp.path().join("br/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["policy"], "bridge");
    assert_eq!(manifest["steps"], 5);
}

#[test]
fn tcp_bridge_times_out_without_agent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_minimal(
        tmp.path(),
        "tcp",
        &[
            "--policy",
            "bridge",
            "--bridge-listen",
            "127.0.0.1:0",
            "--bridge-timeout",
            "1",
        ],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
