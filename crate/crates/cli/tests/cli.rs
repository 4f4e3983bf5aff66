use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loewner"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn spectral_scenario_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("spectral-hyperbolic.toml");
    let o = run(&["spectral", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("spectral-hyperbolic.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,lambda_direct,lambda_integral,discrepancy"));
    assert_eq!(csv.lines().count(), 22);
    let worst = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
    assert!(dir.path().join("spectral-hyperbolic.svg").exists());
}

#[test]
fn classify_verdicts_in_json() {
    for (file, verdict) in [("classify-g64.toml", "lost_to_interior"), ("classify-g65.toml", "fixed_nonregular")] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = scenario(file);
        let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--json"]);
        assert_eq!(code(&o), 0, "{file}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["verdicts"]["classification"], verdict);
        let name = file.trim_end_matches(".toml");
        let trace: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap()).unwrap();
        assert_eq!(trace["verdicts"]["classification"], verdict);
        assert_eq!(trace["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn wrong_expectation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(scenario("classify-g64.toml")).unwrap().replace("lost_to_interior", "regular_fixed");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, src).unwrap();
    let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("violation"));
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scenario = \"x\"\n\n[field]\nid = \"g64\"\nparms = [1.0]\n").unwrap();
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("5:1"), "{err}");

    let o = run(&["spectral", "--field", "nonesuch", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = run(&["spectral", "--config", scenario("classify-g64.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    let src = |x: &str, end: &str| {
        format!(
            "scenario = \"edge\"\noperation = \"evolve\"\n[field]\nid = \"g65\"\nparams = [3.0]\n[times]\nend = {end}\ncount = 5\n[points]\nreal = [{x}]\n"
        )
    };
    // a start inside the containment margin is refused by the integrator
    std::fs::write(&cfg, src("0.9999999999999999", "0.15")).unwrap();
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // past the validity interval is a configuration problem
    std::fs::write(&cfg, src("0.5", "0.3")).unwrap();
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn gallery_listing() {
    let o = run(&["gallery"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["g64", "g65", "brnp", "hyperbolic"] {
        assert!(text.contains(id));
    }
    let o = run(&["gallery", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert!(arr.len() >= 4);
    assert!(arr.iter().all(|e| e["reference"].as_str().is_some_and(|s| !s.is_empty())));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("fan-g64.toml");
    for d in [&a, &b] {
        let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for ext in ["csv", "json", "svg"] {
        let name = format!("fan-g64.{ext}");
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap(), "{name}");
    }
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "--parallel", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(a.path().join("fan-g64.csv")).unwrap(), std::fs::read(b.path().join("fan-g64.csv")).unwrap());
}

#[test]
fn plot_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("fan-g64.toml");
    run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let trace = dir.path().join("fan-g64.json");
    let out = dir.path().join("again.svg");
    let o = run(&["plot", "--trace", trace.to_str().unwrap(), "--kind", "fan", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(dir.path().join("fan-g64.svg")).unwrap());
    let bad = dir.path().join("bad.svg");
    let o = run(&["plot", "--trace", trace.to_str().unwrap(), "--kind", "lambda", "--out", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!bad.exists());
}
