use std::path::Path;
use std::process::{Command, Output};

fn refim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_small_scenario(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "preset = \"hex19\"\nslots = 60\nwarmup_slots = 10\n\n[network]\nkind = \"hex\"\nrings = 1\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_summary_users_and_powers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_scenario(dir.path());
    let out = refim(&["run", &cfg, "--seed", "3", "--out", "res", "--dump-powers"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    for key in ["gat_bps", "aet_bps", "aat_bps", "seed", "config_hash"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(summary["seed"], 3);
    let users = std::fs::read_to_string(res.join("users.csv")).unwrap();
    assert_eq!(users.lines().next(), Some("user_id,serving_bs,tier,R_bps,is_edge"));
    assert_eq!(users.lines().count(), 1 + 7 * 20);
    let powers = std::fs::read_to_string(res.join("powers.csv")).unwrap();
    assert_eq!(powers.lines().next(), Some("slot,bs,subchannel,watts"));
    assert_eq!(powers.lines().count(), 1 + 60 * 7 * 16);
    assert!(!res.join("schedule.csv").exists());
}

#[test]
fn missing_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = refim(&["run", "does-not-exist.toml", "--out", "res"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does-not-exist.toml"));
    assert!(!dir.path().join("res").exists());
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "slots = 10\nwarmup_slots = 50\n").unwrap();
    let out = refim(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn ref_count_sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_scenario(dir.path());
    let out = refim(
        &["sweep", &cfg, "--axis", "ref_count", "--values", "0,1,2,6", "--out", "res"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("axis,value,algorithm,spectrum_policy,seed,gat_bps,aet_bps,aat_bps,config_hash")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    let values: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(values, ["0", "1", "2", "6"]);
}

#[test]
fn unknown_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = refim(&["sweep", "hex19", "--axis", "colour", "--values", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_prints_ratios_and_refuses_large_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out = refim(&["oracle", "toy"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("REFIM %"));

    std::fs::write(dir.path().join("three.toml"), "bss = 3\nsubchannels = 2\n").unwrap();
    let out = refim(&["oracle", "three.toml", "--levels", "17"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}

#[test]
fn presets_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let out = refim(&["presets"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "two-cell"));
    let out = refim(&["show", "two-cell"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("two_cell"));
}
