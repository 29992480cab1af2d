use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

const HEADER: &str = "step,reading,pred_ar,pred_nn,err_ar,err_nn,b_ar,b_nn,status";

fn wsnguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnguard"))
        .args(args)
        .env("WSNGUARD_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The case-study net, trained once through the CLI.
fn trained_net() -> &'static Path {
    static NET: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = NET.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("case1.net");
        let o = wsnguard(&[
            "train",
            "--scenario",
            "case1",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (dir, path)
    });
    path
}

fn run_into(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let net = trained_net().to_str().unwrap();
    let mut args = vec![
        "run",
        "--scenario",
        scenario,
        "--net",
        net,
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    wsnguard(&args)
}

fn write_scenario(dir: &Path, edit: impl FnOnce(String) -> String) -> PathBuf {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/scenarios/case1.toml"
    ))
    .unwrap();
    let path = dir.join("edited.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

#[test]
fn builtins_validate() {
    for name in ["case1", "case2"] {
        let o = wsnguard(&["validate", "--scenario", name]);
        assert!(o.status.success(), "{name}: {}", stdout(&o));
        assert!(stdout(&o).contains("ok"));
    }
}

#[test]
fn alpha_not_below_beta_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), |t| t.replace("alpha = 3", "alpha = 5"));
    let o = wsnguard(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stdout(&o).contains("0 < alpha < beta required"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn too_many_neighbors_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), |t| {
        t.replace("neighbor_count = 8", "neighbor_count = 15")
    });
    let o = wsnguard(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("neighbor_count"), "{}", stdout(&o));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), |t| format!("{t}\nbogus_key = 1\n"));
    let o = wsnguard(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn missing_scenario_file_is_a_config_error() {
    let o = wsnguard(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_epochs_writes_initial_net_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("init.net");
    let o = wsnguard(&[
        "train",
        "--scenario",
        "case1",
        "--out",
        out.to_str().unwrap(),
        "--max-epochs",
        "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no training epochs"), "{}", stderr(&o));
    assert!(out.exists());
    let v = wsnguard(&[
        "validate",
        "--scenario",
        "case1",
        "--net",
        out.to_str().unwrap(),
    ]);
    assert!(v.status.success());
}

#[test]
fn unwritable_net_path_fails() {
    let o = wsnguard(&[
        "train",
        "--scenario",
        "case1",
        "--out",
        "/nonexistent/dir/net.bin",
        "--max-epochs",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn case1_destroys_node_five_at_step_27() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), "case1", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("nodes destroyed: 1"), "{out}");
    assert!(out.contains("node 5 at step 27: Destroyed"), "{out}");
    for node in 0..15 {
        let csv = fs::read_to_string(dir.path().join(format!("node_{node:02}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(HEADER));
        assert_eq!(csv.lines().count(), 41);
    }
    let events = fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    for line in events.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["event"].is_string() && v["step"].is_u64() && v["node"].is_u64());
    }
    assert!(events.contains("\"event\":\"destruction\""));
}

#[test]
fn case2_destroys_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), "case2", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("nodes destroyed: 0"), "{}", stdout(&o));
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_into(a.path(), "case1", &["--seed", "7"])
        .status
        .success());
    assert!(run_into(b.path(), "case1", &["--seed", "7", "--parallel"])
        .status
        .success());
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 17);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn mismatched_net_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), |t| t.replace("nn_window = 3", "nn_window = 2"));
    let out = dir.path().join("out");
    let o = wsnguard(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--net",
        trained_net().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn run_without_net_trains_first() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsnguard(&[
        "run",
        "--scenario",
        "case1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("training rmse"));
    assert!(stdout(&o).contains("node 5 at step 27: Destroyed"));
}

#[test]
fn corrupt_net_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("bad.net");
    fs::write(&net, b"not a net").unwrap();
    let o = wsnguard(&[
        "validate",
        "--scenario",
        "case1",
        "--net",
        net.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}
