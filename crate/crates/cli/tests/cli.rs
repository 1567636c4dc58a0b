use listfb_cli::config::{Mode, RunConfig};
use listfb_cli::presets;
use listfb_core::channel::AdversarySpec;
use listfb_core::weldon::SchemeParams;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn listfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_listfb")).args(args).output().unwrap()
}

fn write_config(dir: &Path, mode: Mode, trials: u64) -> PathBuf {
    let cfg = RunConfig {
        params: SchemeParams { n: 1024, ..presets::full_params() },
        adversary: AdversarySpec::StageGreedy { share: 0.5 },
        trials,
        seed: 9,
        mode,
        out: None,
        sweep: None,
    };
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn example_configs_parse_and_validate() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    for name in ["full.json", "partial.json", "plan.json", "sweep.json"] {
        let cfg = RunConfig::load(&docs.join(name)).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn run_writes_a_reproducible_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), Mode::RunFullFb, 5);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = listfb(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.json", "trials.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["aggregates"]["trials"], 5);
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    assert_eq!(std::fs::read_to_string(a.join("trials.csv")).unwrap().lines().count(), 6);
    assert!(a.join("timing.json").exists());
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), Mode::RunFullFb, 50);
    let o = listfb(&["--config", cfg.to_str().unwrap(), "--trials", "2", "--seed", "4"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn plan_mode_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), Mode::Plan, 0);
    let out = tmp.path().join("plan");
    let o = listfb(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("plan.json")).unwrap()).unwrap();
    assert!(plan["lambda_tilde"].as_u64().unwrap() >= 1);
    assert!(plan["worst_case"].is_object());
    assert!(std::fs::read_to_string(out.join("trajectory.csv")).unwrap().starts_with("stage,"));
}

#[test]
fn selftest_exit_code_follows_the_result() {
    let tmp = tempfile::tempdir().unwrap();
    let o = listfb(&["--mode", "component-selftest", "--only", "4", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("criterion  4 PASS"));
    assert!(tmp.path().join("selftest.json").exists());
}

#[test]
fn bad_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"params": {}, "surprise": 1}"#).unwrap();
    assert_eq!(listfb(&["--config", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(listfb(&[]).status.code(), Some(2));
}
