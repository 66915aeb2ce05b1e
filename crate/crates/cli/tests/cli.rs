use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fncc-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn short_run(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["run", "micro_dumbbell_100g", "-o", d, "--set", "end_time=50us"];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn presets_list_names_every_preset() {
    let out = ok(&["presets", "list"]);
    for name in [
        "micro_dumbbell_100g",
        "micro_dumbbell_200g",
        "micro_dumbbell_400g",
        "fairness_4flow",
        "congestion_firsthop",
        "congestion_middlehop",
        "congestion_lasthop",
        "fattree_k4_load50",
    ] {
        assert!(out.lines().any(|l| l.starts_with(name)), "{name} missing from:\n{out}");
    }
}

#[test]
fn presets_show_prints_the_file() {
    let out = ok(&["presets", "show", "congestion_lasthop"]);
    assert!(out.contains("name = \"congestion_lasthop\""));
    assert!(!sim(&["presets", "show", "nope"]).status.success());
}

#[test]
fn run_writes_outputs_and_topology() {
    let dir = tempfile::tempdir().unwrap();
    short_run(dir.path(), &["--dump-topology"]);
    for f in ["series.csv", "flows.csv", "summary.json", "config.toml", "topology.json"] {
        assert!(dir.path().join(f).is_file(), "{f} not written");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"mode\": \"FNCC\""), "{summary}");
}

#[test]
fn mode_flag_changes_only_the_mode() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    short_run(a.path(), &[]);
    short_run(b.path(), &["--mode", "HPCC"]);
    let ca = std::fs::read_to_string(a.path().join("config.toml")).unwrap();
    let cb = std::fs::read_to_string(b.path().join("config.toml")).unwrap();
    let diff: Vec<(&str, &str)> = ca.lines().zip(cb.lines()).filter(|(x, y)| x != y).collect();
    assert_eq!(ca.lines().count(), cb.lines().count());
    assert_eq!(diff, vec![("mode = \"FNCC\"", "mode = \"HPCC\"")]);
}

#[test]
fn same_command_twice_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    short_run(a.path(), &["--mode", "FNCC_no_LHCS"]);
    short_run(b.path(), &["--mode", "FNCC_no_LHCS"]);
    for f in ["series.csv", "flows.csv", "summary.json", "config.toml"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_runs_each_value_into_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&[
        "sweep",
        "micro_dumbbell_100g",
        "--axis",
        "cc.mode",
        "--values",
        "FNCC,HPCC",
        "--set",
        "end_time=50us",
        "-o",
        d,
    ]);
    assert!(out.contains("HPCC"), "{out}");
    for v in ["FNCC", "HPCC"] {
        assert!(dir.path().join(format!("cc.mode={v}")).join("summary.json").is_file());
    }
    assert!(dir.path().join("sweep_summary.json").is_file());
    assert!(dir.path().join("sweep_summary.csv").is_file());
}

#[test]
fn failing_sweep_value_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&[
        "sweep",
        "micro_dumbbell_100g",
        "--axis",
        "cc.eta",
        "--values",
        "0.95,1.5",
        "--set",
        "end_time=20us",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(dir.path().join("cc.eta=0.95").join("summary.json").is_file());
}

#[test]
fn bad_input_is_reported() {
    let out = sim(&["run", "no_such_preset_or_file"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = sim(&["run", "micro_dumbbell_100g", "--set", "cc.etaa=0.9"]);
    assert!(!out.status.success());
}
