use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grushin_lab::report::RESULTS_HEADER;
use grushin_lab::{output_dir, ExperimentConfig, ExperimentId};

const SMALL: &str = r#"
experiment = "semigroup-checks"
seed = 3

[grid]
points = [16, 16]

[params]
random_functions = 1
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grushin-lab"))
        .args(args)
        .env_remove("GRUSHIN_LAB_THREADS")
        .output()
        .expect("spawn grushin-lab")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_name_the_key() {
    let bad_type = SMALL.replace("points = [16, 16]", "points = [16, \"x\"]");
    let err = ExperimentConfig::from_toml_str(&bad_type, &[]).unwrap_err();
    assert!(err.key.starts_with("grid.points"), "{err}");

    let unknown = format!("{SMALL}bogus_knob = 1\n");
    let err = ExperimentConfig::from_toml_str(&unknown, &[]).unwrap_err();
    assert_eq!(err.key, "params.bogus_knob", "{err}");

    let err = ExperimentConfig::from_toml_str(SMALL, &["grid.alpha=-1".into()]).unwrap_err();
    assert!(err.key.starts_with("grid"), "{err}");

    let err = ExperimentConfig::from_toml_str(&SMALL.replace("semigroup-checks", "no-such-thing"), &[]).unwrap_err();
    assert_eq!(err.key, "experiment");
}

#[test]
fn overrides_reach_typed_fields() {
    let cfg = ExperimentConfig::from_toml_str(SMALL, &["seed=11".into(), "grid.points=[20, 20]".into(), "params.powers=[0.5]".into()])
        .unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.grid.points, vec![20, 20]);
    assert_eq!(cfg.grid.half_width, vec![2.0, 2.0], "defaults survive a partial [grid]");
    assert!(ExperimentConfig::from_toml_str(SMALL, &["seed".into()]).is_err());
    assert!(ExperimentConfig::from_toml_str(SMALL, &["seed.x=1".into()]).is_err());
}

#[test]
fn output_dir_precedence() {
    let mut cfg = ExperimentConfig::from_toml_str(SMALL, &[]).unwrap();
    assert_eq!(output_dir(&cfg, None), PathBuf::from("out/semigroup-checks"));
    cfg.out_dir = Some("from-config".into());
    assert_eq!(output_dir(&cfg, None), PathBuf::from("from-config"));
    assert_eq!(output_dir(&cfg, Some(Path::new("flag"))), PathBuf::from("flag"));
}

#[test]
fn list_round_trips_every_id() {
    let o = lab(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ExperimentId::ALL {
        assert!(text.contains(id.id()));
        assert_eq!(id.id().parse::<ExperimentId>().unwrap(), id);
    }
    assert!("nope".parse::<ExperimentId>().is_err());
}

#[test]
fn every_shipped_config_loads() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    for id in ExperimentId::ALL {
        let cfg = ExperimentConfig::from_path(&dir.join(format!("{id}.toml")), &[]).unwrap();
        assert_eq!(cfg.experiment, id);
    }
}

#[test]
fn run_writes_results_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = lab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
    // A 16-node grid may miss some tolerances; only a crash or config error is exit 2.
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("results.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), RESULTS_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert!(!rows.is_empty());
    let all_pass = rows.iter().all(|r| &r[9] == "true");
    assert_eq!(o.status.success(), all_pass);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "semigroup-checks");
    assert_eq!(summary["rows"], rows.len());
    assert_eq!(summary["config"]["seed"], 3);
    assert!(out.join("stochastic_completeness.csv").exists());
}

#[test]
fn bad_config_exits_with_key_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", SMALL);
    let o = lab(&["run", cfg.to_str().unwrap(), "--override", "params.powers=[1.5]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.powers"), "{}", stderr(&o));
    let o = lab(&["run", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_env_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_grushin-lab"))
        .arg("list")
        .env("GRUSHIN_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GRUSHIN_LAB_THREADS"));
}
