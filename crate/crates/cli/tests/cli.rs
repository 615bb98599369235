use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon-sim"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], file: &Path) -> Output {
    bin().args(args).arg(file).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SHORT: &str = "[sim]\ntotal_slots = 400\n";

#[test]
fn validate_accepts_empty_config() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "empty.toml", "");
    let o = run(&["validate"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("valid run config"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("neg.toml", "[channel]\nsic_level = -3\n"),
        ("unknown.toml", "[channel]\nsic = 3\n"),
        ("syntax.toml", "[sim\n"),
        ("vehicles.toml", "[topology]\nn_vehicles = 2\n"),
    ];
    for (name, text) in cases {
        let f = write(&dir, name, text);
        for verb in ["validate", "run", "frame"] {
            let o = run(&[verb], &f);
            assert_eq!(o.status.code(), Some(1), "{verb} {name}");
            assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
        }
    }
    let o = run(&["validate"], &dir.path().join("missing.toml"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_prints_one_csv_row() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "c.toml", SHORT);
    let o = run(&["run", "--seed", "3"], &f);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("fd_positions,sic_level_db,scheduler"));
    assert!(lines[1].starts_with("none,40.000000,fb,0.040000,3,"));
}

#[test]
fn run_writes_json_and_histogram() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "c.toml", SHORT);
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--format", "json", "--out-dir"])
        .arg(&out)
        .arg(&f)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let json = fs::read_to_string(out.join("results.json")).unwrap();
    assert!(json.contains("\"flows\""));
    let hist = fs::read_to_string(out.join("latency_histogram.csv")).unwrap();
    assert!(hist.starts_with("row,latency_slots,latency_ms,count"));
}

#[test]
fn position_sweep_has_fifteen_rows_and_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "sweep.toml",
        "[sim]\ntotal_slots = 300\n\n[sweep]\nfd_positions = [[0], [1], [2], [3], [4]]\nscheduler = [\"fb\", \"bp\", \"qb\"]\n",
    );
    let a = run(&["sweep", "--parallel", "3"], &f);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 16);
    let b = run(&["sweep", "--parallel", "1"], &f);
    assert_eq!(text, stdout(&b));
}

#[test]
fn run_rejects_sweep_spec() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "sweep.toml", "[sweep]\nrate = [0.01, 0.02]\n");
    assert_eq!(run(&["run"], &f).status.code(), Some(1));
    let o = run(&["validate"], &f);
    assert!(stdout(&o).contains("2 runs"));
}

#[test]
fn frame_prints_flow_based_table() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "c.toml", "");
    let o = run(&["frame"], &f);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("fb frame, 14 slots"));
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 14);
    let active = |col: usize| {
        rows.iter()
            .filter(|r| r.split_whitespace().nth(col) == Some("#"))
            .count()
    };
    assert_eq!((active(1), active(2), active(3), active(4)), (8, 6, 4, 2));
}

#[test]
fn frame_for_back_pressure_is_rejected() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bp.toml", "[scheduler]\nkind = \"bp\"\n");
    assert_eq!(run(&["frame"], &f).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "c.toml", SHORT);
    let blocker = write(&dir, "blocker", "");
    let o = bin()
        .arg("run")
        .arg("--out-dir")
        .arg(blocker.join("sub"))
        .arg(&f)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
