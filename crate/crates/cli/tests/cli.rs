use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use logcave::{from_json, AnyDensity, Piecewise};

fn logcave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logcave"))
        .args(args)
        .current_dir(dir)
        .env_remove("LOGCAVE_CONSTANTS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
}

#[test]
fn gen_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = logcave(d, &["gen", "--family", "gaussian:0,1", "-n", "3162", "--seed", "3", "--output", "s.txt"]);
    assert!(o.status.success());
    let text = fs::read_to_string(d.join("s.txt")).unwrap();
    assert!(text.starts_with("# family=gaussian:0,1 n=3162 seed=3\n"));
    assert_eq!(text.lines().count(), 3163);

    let fit = [
        "fit",
        "--epsilon",
        "0.1",
        "--domain",
        "real",
        "--input",
        "s.txt",
        "--output",
        "h.json",
        "--report",
        "r.json",
        "--seed",
        "3",
    ];
    let o = logcave(d, &fit);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let h = fs::read_to_string(d.join("h.json")).unwrap();
    let AnyDensity::Exp(density) = from_json::<f64>(&h).unwrap() else { panic!("expected pwexp") };
    assert!(density.is_log_concave());
    assert!((Piecewise::total_mass(&density) - 1.0).abs() < 1e-9);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["n"], 3162);

    // Same inputs, same output file.
    let o = logcave(d, &["fit", "--epsilon", "0.1", "--domain", "real", "--input", "s.txt", "--output", "h2.json"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(d.join("h2.json")).unwrap(), h);

    let o = logcave(d, &["eval", "h.json", "--family", "gaussian:0,1"]);
    let out = stdout(&o);
    let tv = value(&out, "tv ");
    assert!((0.0..=0.15).contains(&tv), "{out}");
    assert!(out.lines().next().unwrap().split(' ').nth(1).unwrap().split('.').nth(1).unwrap().len() == 6);
    assert!((value(&out, "l1 ") - 2.0 * tv).abs() < 2e-6);

    let o = logcave(d, &["eval", "h.json", "h.json"]);
    assert_eq!(value(&stdout(&o), "tv "), 0.0);
}

#[test]
fn disjoint_uniforms_are_at_distance_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("u01.json"), r#"{"domain": "real", "kind": "pwl", "breakpoints": [0, 1], "pieces": [[0, 1]]}"#)
        .unwrap();
    fs::write(d.join("u12.json"), r#"{"domain": "real", "kind": "pwl", "breakpoints": [1, 2], "pieces": [[0, 1]]}"#)
        .unwrap();
    let o = logcave(d, &["eval", "u01.json", "u12.json", "--report", "e.json"]);
    let out = stdout(&o);
    assert_eq!(value(&out, "tv "), 1.0);
    assert_eq!(value(&out, "l1 "), 2.0);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(rep["tv"], 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(logcave(d, &["gen", "--family", "poisson:20", "-n", "10", "--output", "p.txt"]).status.success());
    // Too few samples: a valid density with a warning.
    let o = logcave(d, &["fit", "--epsilon", "0.1", "--domain", "int", "--input", "p.txt", "--output", "h.json"]);
    assert_eq!(o.status.code(), Some(2));
    let AnyDensity::Exp(h) = from_json::<f64>(&fs::read_to_string(d.join("h.json")).unwrap()).unwrap() else {
        panic!()
    };
    assert!(h.is_log_concave());

    let o = logcave(d, &["fit", "--epsilon", "0.7", "--domain", "int", "--input", "p.txt", "--output", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = logcave(d, &["fit", "--epsilon", "0.1", "--domain", "int", "--input", "missing.txt", "--output", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    fs::write(d.join("bad.txt"), "1\nabc\n").unwrap();
    let o = logcave(d, &["fit", "--epsilon", "0.1", "--domain", "real", "--input", "bad.txt", "--output", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn approx_writes_a_pwl_density() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = logcave(d, &["approx", "--family", "gaussian:0,1", "--epsilon", "0.05", "--output", "g.json"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(value(&out, "tv ") <= 0.05);
    let AnyDensity::Linear(g) = from_json::<f64>(&fs::read_to_string(d.join("g.json")).unwrap()).unwrap() else {
        panic!()
    };
    assert_eq!(g.piece_count() as f64, value(&out, "pieces "));
    let o = logcave(d, &["eval", "g.json", "--family", "gaussian:0,1"]);
    assert!(value(&stdout(&o), "tv ") <= 0.05);
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("s.json"),
        r#"{"families": ["gaussian:0,1", "poisson:20"], "eps": [0.2, 0.3], "n": [200, 400], "seeds": [1, 2, 3]}"#,
    )
    .unwrap();
    let run = |out: &str| {
        let o = logcave(d, &["bench", "--scenario", "s.json", "--out", out, "--no-timings"]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(d.join(out)).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a.lines().count(), 25);
    assert_eq!(a, run("b.csv"));
    let rows = logcave::bench::read_csv(&a).unwrap();
    assert_eq!(logcave::bench::write_csv(&rows).unwrap(), a);

    let o = logcave(d, &["bench", "--scenario", "s.json", "--out", "t.csv"]);
    assert!(o.status.success());
    let rows = logcave::bench::read_csv(&fs::read_to_string(d.join("t.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.wall_time.is_some_and(|t| t >= 0.0)));
}

#[test]
fn constants_from_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.txt"), "c_t = -1\n").unwrap();
    fs::write(d.join("unknown.txt"), "c_zz = 1\n").unwrap();
    assert!(logcave(d, &["gen", "--family", "laplace:0,1", "-n", "500", "--output", "s.txt"]).status.success());
    let fit = ["fit", "--epsilon", "0.2", "--domain", "real", "--input", "s.txt", "--output", "h.json"];
    for bad in ["bad.txt", "unknown.txt", "missing.txt"] {
        let mut args = fit.to_vec();
        args.extend(["--constants", bad]);
        assert_eq!(logcave(d, &args).status.code(), Some(1), "{bad}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_logcave"))
        .args(fit)
        .current_dir(d)
        .env("LOGCAVE_CONSTANTS", "bad.txt")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    fs::write(d.join("ok.txt"), "c_t = 6\n").unwrap();
    let mut args = fit.to_vec();
    args.extend(["--constants", "ok.txt", "--report", "r.json"]);
    assert!(logcave(d, &args).status.success());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(rep["constants"].as_str().unwrap().contains("c_t = 6"), "{}", rep["constants"]);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = logcave(dir.path(), &["selftest", "--instances", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}
