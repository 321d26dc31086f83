//! Runs the shipped configs and prints one pass/fail line per acceptance
//! criterion. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use grushin_lab::report::Row;
use grushin_lab::{experiments, ExperimentConfig, ExperimentId};

fn config_path(id: ExperimentId) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{}.toml", id.id()))
}

/// Criterion number, short name, experiment and the check ids it covers.
const CRITERIA: [(u32, &str, ExperimentId, &[&str]); 17] = [
    (1, "semigroup algebra", ExperimentId::SemigroupChecks, &["semigroup-algebra"]),
    (2, "stochastic completeness", ExperimentId::SemigroupChecks, &["stochastic-completeness"]),
    (3, "Balakrishnan vs spectral", ExperimentId::SemigroupChecks, &["balakrishnan"]),
    (4, "Poisson subordination", ExperimentId::SemigroupChecks, &["subordination"]),
    (5, "Gaussian bounds", ExperimentId::KernelBounds, &["gaussian-bound"]),
    (6, "ultracontractivity", ExperimentId::KernelBounds, &["ultracontractivity"]),
    (7, "metric and volume", ExperimentId::MetricVolumes, &["metric-volume"]),
    (
        8,
        "Besov equivalence",
        ExperimentId::BesovEquivalence,
        &["besov-equivalence-heat", "besov-equivalence-fractional"],
    ),
    (9, "min-max", ExperimentId::BesovEquivalence, &["min-max"]),
    (10, "beta -> 0 limit", ExperimentId::BesovLimits, &["ms-limit"]),
    (11, "beta -> 1 bracket", ExperimentId::BesovLimits, &["bbm-bracket"]),
    (12, "perimeter identity", ExperimentId::PerimeterCoarea, &["perimeter-identity", "perimeter-ordering"]),
    (13, "coarea", ExperimentId::PerimeterCoarea, &["coarea"]),
    (
        14,
        "isoperimetric ratios",
        ExperimentId::IsoperimetricScan,
        &["isoperimetric-ratios", "isoperimetric-dilation", "isoperimetric-refinement"],
    ),
    (15, "small-s limit", ExperimentId::PerimeterCoarea, &["small-s-limit"]),
    (
        16,
        "Sobolev and HLS",
        ExperimentId::SobolevHls,
        &["sobolev-embedding", "sobolev-refinement", "sobolev-dilation"],
    ),
    (17, "Ledoux estimate", ExperimentId::SemigroupChecks, &["ledoux"]),
];

fn line(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n:>2} {:<26} {}  {detail}", name, if pass { "PASS" } else { "FAIL" });
}

fn describe_failures(rows: &[&Row]) -> String {
    rows.iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} [{}] measured {:e} target {:e}", r.quantity, r.parameters, r.measured, r.target))
        .collect::<Vec<_>>()
        .join("; ")
}

fn determinism(dir: &tempfile::TempDir) -> Result<bool, String> {
    let cfg = config_path(ExperimentId::IsoperimetricScan);
    let mut outputs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "4")] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_grushin-lab"))
            .arg("run")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("GRUSHIN_LAB_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())?);
    }
    Ok(outputs[0] == outputs[1])
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut rows: BTreeMap<ExperimentId, Vec<Row>> = BTreeMap::new();
    let mut errors: BTreeMap<ExperimentId, String> = BTreeMap::new();
    for id in ExperimentId::ALL {
        let t = Instant::now();
        let result = ExperimentConfig::from_path(&config_path(id), &[])
            .map_err(|e| e.to_string())
            .and_then(|cfg| experiments::run(&cfg).map_err(|e| format!("{e:#}")));
        match result {
            Ok(report) => {
                eprintln!("ran {id} in {:.1} s", t.elapsed().as_secs_f64());
                rows.insert(id, report.rows);
            }
            Err(e) => {
                errors.insert(id, e);
            }
        }
    }

    let mut all = true;
    for (n, name, id, checks) in CRITERIA {
        if let Some(e) = errors.get(&id) {
            line(n, name, false, &format!("{id} failed to run: {e}"));
            all = false;
            continue;
        }
        let selected: Vec<&Row> = rows[&id].iter().filter(|r| checks.contains(&r.check.as_str())).collect();
        let missing: Vec<&&str> = checks.iter().filter(|c| !selected.iter().any(|r| r.check == **c)).collect();
        let pass = missing.is_empty() && selected.iter().all(|r| r.pass);
        let detail = if !missing.is_empty() {
            format!("no rows for {missing:?}")
        } else if pass {
            format!("{} rows", selected.len())
        } else {
            describe_failures(&selected)
        };
        line(n, name, pass, &detail);
        all &= pass;
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let (pass, detail) = match determinism(&dir) {
        Ok(true) => (true, "results.csv byte-identical across 1 and 4 threads".to_string()),
        Ok(false) => (false, "results.csv differs between runs".to_string()),
        Err(e) => (false, format!("cli run failed: {e}")),
    };
    line(18, "determinism", pass, &detail);
    all &= pass;

    println!(
        "acceptance: {} in {:.1} s",
        if all { "all criteria pass" } else { "FAILURES" },
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
