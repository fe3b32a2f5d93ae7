use fracns::cli::{emit_summaries, read_field, write_field, RunConfig};
use fracns::spectral::{Field, Grid};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "problem": { "dim": 1, "s": 0.5, "box_length": 48.0, "points": 256 },
  "nonlinearity": { "form": "pure_power", "q": 2.5, "c_q": 1.0 },
  "autonomous": { "eta": -1.0, "mu": 1.0 },
  "constraint": { "mass": 1.0 },
  "landscape": { "masses": [0.5, 1.0], "pairs": [[0.5, 0.5]], "thetas": [] }
}"#;

fn fracns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracns"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    fracns(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn validate_accepts_the_shipped_configs() {
    for name in ["autonomous.json", "two_bump.json"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run("validate", &configs_dir().join(name), tmp.path(), &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report = read_json(&tmp.path().join("validation.json"));
        assert_eq!(report["passed"], Value::Bool(true), "{name}");
        assert_eq!(read_json(&tmp.path().join("manifest.json"))["status"], "ok");
    }
}

#[test]
fn failed_checks_are_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    // supercritical exponent: q above 2 + 4s/N = 4
    let cfg = write_config(tmp.path(), &SMALL.replace("\"q\": 2.5", "\"q\": 4.5"));
    let out = run("validate", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&tmp.path().join("out/validation.json"));
    assert_eq!(report["passed"], Value::Bool(false));
}

#[test]
fn solve_writes_result_trace_and_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("out");
    let out = run(
        "solve",
        &cfg,
        &dir,
        &["--trace", "--dump-fields", "--threads", "2"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let result = read_json(&dir.join("result.json"));
    assert!(result["converged"].as_bool().unwrap());
    assert!(result["energy"].as_f64().unwrap() < -0.5, "below eta a / 2");
    assert!((result["mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    let energies: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!energies.is_empty());
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));

    let u = read_field(&dir.join("u")).unwrap();
    assert_eq!(u.values().len(), 256);
    let mass: f64 = u.values().iter().map(|v| v * v).sum::<f64>() * u.grid().cell_volume();
    assert!((mass - 1.0).abs() < 1e-12);

    let manifest = read_json(&dir.join("manifest.json"));
    for key in [
        "command",
        "config",
        "started",
        "elapsed_s",
        "artifact_version",
        "threads",
        "status",
    ] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["threads"], 2);
}

#[test]
fn manifest_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let first = tmp.path().join("a");
    assert_eq!(run("solve", &cfg, &first, &[]).status.code(), Some(0));
    let echoed = read_json(&first.join("manifest.json"))["config"].to_string();
    assert_eq!(
        RunConfig::parse(&echoed).unwrap(),
        RunConfig::parse(SMALL).unwrap()
    );
    let cfg2 = tmp.path().join("echoed.json");
    fs::write(&cfg2, echoed).unwrap();
    let second = tmp.path().join("b");
    assert_eq!(run("solve", &cfg2, &second, &[]).status.code(), Some(0));
    let (r1, r2) = (
        read_json(&first.join("result.json")),
        read_json(&second.join("result.json")),
    );
    assert_eq!(r1["energy"], r2["energy"]);
    assert_eq!(r1["lambda"], r2["lambda"]);
}

#[test]
fn landscape_writes_curve_and_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("out");
    let out = run("landscape", &cfg, &dir, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("mass,energy,lambda,pohozaev_rel,converged")
    );
    assert_eq!(lines.count(), 2);
    assert!(dir.join("landscape.json").exists());
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            SMALL.replace("\"points\": 256", "\"points\": \"many\""),
            "problem.points",
        ),
        (
            SMALL.replace("\"mass\": 1.0", "\"mass\": 1.0, \"bogus\": 3"),
            "constraint",
        ),
        (SMALL.replace("\"s\": 0.5", "\"s\": 1.5"), "order"),
        (
            SMALL.replace("\"points\": 256", "\"points\": 100"),
            "power of two",
        ),
    ];
    for (text, needle) in cases {
        let cfg = write_config(tmp.path(), &text);
        let out = run("solve", &cfg, &tmp.path().join("out"), &[]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{needle}: {stderr}");
        assert!(stderr.contains(needle), "expected `{needle}` in: {stderr}");
    }
    // multiplicity without a potential block
    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(
        run("multiplicity", &cfg, &tmp.path().join("out"), &[])
            .status
            .code(),
        Some(2)
    );
    // missing file
    let out = run(
        "validate",
        &tmp.path().join("nope.json"),
        &tmp.path().join("out"),
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run("validate", &cfg, &blocker.join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_summaries_write_an_empty_list_and_no_csv() {
    let tmp = tempfile::tempdir().unwrap();
    emit_summaries(tmp.path(), &[]).unwrap();
    assert_eq!(
        read_json(&tmp.path().join("results.json")),
        Value::Array(vec![])
    );
    assert!(!tmp.path().join("results.csv").exists());
}

#[test]
fn field_dumps_round_trip_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid::new(&[3.0, 7.5], &[8, 16]).unwrap();
    let u = Field::from_fn(&grid, |x| {
        (x[0] * 1.7).sin() + x[1].powi(3) * 1e-7 + 1.0 / 3.0
    });
    let stem = tmp.path().join("field");
    write_field(&stem, &u).unwrap();
    let back = read_field(&stem).unwrap();
    assert_eq!(back.grid(), u.grid());
    let bits = |f: &Field| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&u));
}
