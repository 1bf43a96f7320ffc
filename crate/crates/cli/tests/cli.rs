use std::path::Path;
use std::process::{Command, Output};

use evreg::{datasets, fit_full, DispersionLink, FitReport, ModelSpec, Tail};
use serde_json::Value;

fn evreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evreg")).args(args).env_remove("EVREG_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const NIWOT: [&str; 4] = ["--dataset", "niwot", "--location", "1 + temperature"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn fit_prints_estimates() {
    let o = evreg(&with(&["fit"], &NIWOT));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    for needle in ["34.341243", "-0.440947", "3.421110", "3.091038", "-27.686310"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn json_fit_report_round_trips() {
    let o = evreg(&with(&["fit", "--out", "json"], &NIWOT));
    assert_eq!(code(&o), 0);
    let parsed: FitReport = serde_json::from_str(&stdout(&o)).unwrap();
    let spec = ModelSpec::from_formulas(Tail::Max, "1 + temperature", "1", DispersionLink::Identity).unwrap();
    let direct = fit_full(&spec, &datasets::niwot(), None).unwrap().report(&spec);
    assert_eq!(parsed, direct);
}

#[test]
fn test_reports_statistics_and_p_values() {
    let o = evreg(&with(&["test", "--param", "temperature", "--direction", "less", "--out", "json"], &NIWOT));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["theta", "se", "loglik", "converged", "statistics", "p_values"] {
        assert!(v.get(key).is_some(), "missing field {key}");
    }
    let stat = |s: &str| v["statistics"][s].as_f64().unwrap();
    assert!((stat("R") + 2.2912).abs() < 2e-3);
    assert!((stat("Rtilde") + 1.9043).abs() < 2e-3);
    assert!((stat("Rbar") + 1.6085).abs() < 2e-3);
    assert!((v["p_values"]["R"].as_f64().unwrap() - 0.0110).abs() < 5e-4);
}

#[test]
fn greater_direction_complements_p_values() {
    let run = |dir: &'static str| {
        let o = evreg(&with(&["test", "--param", "temperature", "--direction", dir, "--out", "json"], &NIWOT));
        assert_eq!(code(&o), 0);
        serde_json::from_str::<Value>(&stdout(&o)).unwrap()
    };
    let (less, greater) = (run("less"), run("greater"));
    for s in ["R", "Rstar", "R0star", "Rbar", "Rhat", "Rtilde"] {
        let a = less["p_values"][s].as_f64().unwrap();
        let b = greater["p_values"][s].as_f64().unwrap();
        assert!((a + b - 1.0).abs() < 1e-12, "{s}: {a} + {b}");
    }
}

#[test]
fn exact_ancillary_statistic_unsupported_with_varying_dispersion() {
    let o = evreg(&with(
        &[
            "test",
            "--param",
            "temperature",
            "--direction",
            "less",
            "--stats",
            "Rstar,Rtilde",
            "--dispersion",
            "1 + year",
        ],
        &NIWOT,
    ));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("Rstar") && l.contains("unsupported")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("Rtilde") && !l.contains("unsupported")), "{text}");
}

#[test]
fn missing_column_is_a_data_error() {
    let o = evreg(&["fit", "--dataset", "niwot", "--location", "1 + humidity"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("humidity"));
}

#[test]
fn csv_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("niwot.csv");
    std::fs::write(&path, datasets::NIWOT_CSV).unwrap();
    let p = path.to_str().unwrap();
    let o = evreg(&["fit", "--data", p, "--response", "wind", "--location", "1 + temperature"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("34.341243"));
    let o = evreg(&["fit", "--data", p, "--location", "1 + temperature"]);
    assert_eq!(code(&o), 1, "response is required with a file");
    let o = evreg(&["fit", "--data", dir.path().join("absent.csv").to_str().unwrap(), "--response", "wind"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&evreg(&["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&evreg(&["fit"])), 1);
    let o = evreg(&with(&["test", "--param", "temperature", "--direction", "less", "--stats", "Rfoo"], &NIWOT));
    assert_eq!(code(&o), 1);
    let o = evreg(&with(&["test", "--param", "wind_chill", "--direction", "less"], &NIWOT));
    assert_eq!(code(&o), 1);
    assert_eq!(code(&evreg(&["--help"])), 0);
}

#[test]
fn degenerate_response_does_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    std::fs::write(&path, "y,x\n1,0.1\n1,0.5\n1,0.2\n1,0.9\n").unwrap();
    let o =
        evreg(&["fit", "--data", path.to_str().unwrap(), "--response", "y", "--location", "1 + x", "--out", "json"]);
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["converged"], Value::Bool(false));
}

#[test]
fn fit_report_seeds_a_later_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = evreg(&with(&["fit", "--out", "json"], &NIWOT));
    let path = dir.path().join("fit.json");
    std::fs::write(&path, o.stdout).unwrap();
    let p = path.to_str().unwrap();
    let o = evreg(&with(&["test", "--param", "temperature", "--direction", "less", "--init", p], &NIWOT));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("-2.2912"));
    let o = evreg(&["fit", "--dataset", "niwot", "--location", "1", "--init", p]);
    assert_eq!(code(&o), 1, "parameter count mismatch");
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    evreg(&args)
}

#[test]
fn size_study_is_identical_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = ["--design", "model1", "--n", "20", "--reps", "300", "--seed", "42"];
    let o1 = simulate(a.path(), &[&common[..], &["--threads", "1"]].concat());
    let o8 = simulate(b.path(), &[&common[..], &["--threads", "8"]].concat());
    assert_eq!(code(&o1), 0, "{}", stderr(&o1));
    assert_eq!(code(&o8), 0);
    let csv1 = std::fs::read(a.path().join("size.csv")).unwrap();
    let csv8 = std::fs::read(b.path().join("size.csv")).unwrap();
    assert_eq!(csv1, csv8);
    let json: Value = serde_json::from_slice(&std::fs::read(a.path().join("size.json")).unwrap()).unwrap();
    assert_eq!(json["reps"], 300);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_evreg"))
        .args([
            "simulate",
            "--design",
            "model1",
            "--n",
            "20",
            "--reps",
            "50",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .env("EVREG_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_evreg"))
        .args(["simulate", "--design", "model1", "--n", "20", "--reps", "50"])
        .env("EVREG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn design_file_and_discrepancy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("m3.design");
    std::fs::write(
        &design,
        "# power predictor, tested exponent\nname = small\nlocation = 1 + x1 + pow(x2)\ntruth = 1, 1, 0, 1\n\
         covariate = x1 ~ uniform(0, 1)\ncovariate = x2 ~ uniform(0, 1)\nn = 15\nreps = 200\nparam = 2\n\
         direction = greater\nstatistics = R, Rbar, Rtilde\nseed = 7\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = simulate(&out, &["--design", design.to_str().unwrap(), "--mode", "discrepancy"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("discrepancy.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("asymptotic_p"), "{header}");
    assert!(header.contains("Rbar") && header.contains("Rtilde"));
    assert_eq!(csv.lines().count(), 1 + evreg::sim::discrepancy_grid().len());
    let svg = std::fs::read_to_string(out.join("discrepancy.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn bad_design_file_is_a_design_error() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("bad.design");
    std::fs::write(&design, "location = 1 + x1\ntruth = 1, 2, 1\ncolour = blue\n").unwrap();
    let o = simulate(dir.path(), &["--design", design.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = simulate(dir.path(), &["--design", "model9", "--n", "20"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn power_mode_writes_critical_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(
        dir.path(),
        &[
            "--design",
            "model1",
            "--n",
            "20",
            "--mode",
            "power",
            "--reps",
            "200",
            "--critical-reps",
            "400",
            "--epsilons",
            "0,3",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["critical_values.csv", "power.csv", "power.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let o = simulate(dir.path(), &["--design", "model1", "--n", "20", "--mode", "power"]);
    assert_eq!(code(&o), 1, "power mode needs epsilons");
}
