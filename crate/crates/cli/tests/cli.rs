use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gateway-tomo"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const PATH4: &str = r#"{"nodes":[1,2,3,4],"edges":[{"u":1,"v":2,"sign":1},{"u":2,"v":3,"sign":1},{"u":3,"v":4,"sign":-1}]}"#;
const PATH4_PARAMS: &str = r#"{"b":{"1":0.3,"2":-0.4,"3":0.8,"4":0.1},"c":{"1-2":0.9,"2-3":0.6,"3-4":-1.2}}"#;

#[test]
fn classify_fmo() {
    let o = run(&["classify", "--graph", example("fmo_graph.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("unicyclic, estimable, access set {1,5,6,7}"), "{}", stdout(&o));
}

#[test]
fn classify_bowtie_is_not_estimable() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&[
        "classify",
        "--graph",
        example("bowtie_graph.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("more edges than sites"));
    let r = report(out.to_str().unwrap());
    assert_eq!(r["estimability"]["estimable"], Value::Bool(false));
}

#[test]
fn classify_path_and_infection() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.json", PATH4);
    let o = run(&["classify", "--graph", &g, "--infect", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("path, estimable, access set {1}"), "{text}");
    assert!(text.contains("infection of {2} reaches {2} (not infecting)"), "{text}");
    assert!(text.contains("minimum infecting sets: {1} {4}"), "{text}");
}

#[test]
fn plan_reports_schedule() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("plan.json");
    let o = run(&[
        "plan",
        "--graph",
        example("fmo_graph.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(out.to_str().unwrap());
    assert_eq!(r["access_set"], serde_json::json!([1, 5, 6, 7]));
    assert_eq!(r["mode"], "conservative");
}

#[test]
fn roundtrip_fmo_exact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rt.json");
    let o = run(&[
        "roundtrip",
        "--graph",
        example("fmo_graph.json").to_str().unwrap(),
        "--params",
        example("fmo_params.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(out.to_str().unwrap());
    assert!(r["max_relative_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["result"]["flags"], serde_json::json!(["RankAugmented"]));
    for key in ["b", "c", "residuals", "flags", "cycle_diagnostics"] {
        assert!(r["result"].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn roundtrip_fmo_shots() {
    let o = run(&[
        "roundtrip",
        "--graph",
        example("fmo_graph.json").to_str().unwrap(),
        "--params",
        example("fmo_params.json").to_str().unwrap(),
        "--shots",
        "1e6",
        "--seed",
        "0",
        "--tol",
        "1e-2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn roundtrip_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        run(&[
            "roundtrip",
            "--graph",
            example("fmo_graph.json").to_str().unwrap(),
            "--params",
            example("fmo_params.json").to_str().unwrap(),
            "--shots",
            "10000",
            "--seed",
            "5",
            "--tol",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn roundtrip_uniform_square_fails_with_flag() {
    let dir = TempDir::new().unwrap();
    let g = write(
        &dir,
        "c4.json",
        r#"{"nodes":[1,2,3,4],"edges":[{"u":1,"v":2,"sign":1},{"u":2,"v":3,"sign":1},{"u":3,"v":4,"sign":1},{"u":1,"v":4,"sign":1}]}"#,
    );
    let p = write(
        &dir,
        "p.json",
        r#"{"b":{"1":0,"2":0,"3":0,"4":0},"c":{"1-2":1,"2-3":1,"3-4":1,"1-4":1}}"#,
    );
    let out = dir.path().join("r.json");
    let o = run(&["roundtrip", "--graph", &g, "--params", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    let r = report(out.to_str().unwrap());
    assert_eq!(r["flags"], serde_json::json!(["GaugeDegeneracy"]));
    assert!(r.get("result").is_none());
}

#[test]
fn roundtrip_dark_reference() {
    let dir = TempDir::new().unwrap();
    let g = write(
        &dir,
        "p3.json",
        r#"{"nodes":[1,2,3],"edges":[{"u":1,"v":2,"sign":1},{"u":2,"v":3,"sign":1}]}"#,
    );
    let p = write(&dir, "p.json", r#"{"b":{"1":0,"2":0,"3":0},"c":{"1-2":1,"2-3":1}}"#);
    let o = run(&["roundtrip", "--graph", &g, "--params", &p, "--reference", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dark state"), "{}", stderr(&o));
}

#[test]
fn simulate_then_reconstruct() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.json", PATH4);
    let p = write(&dir, "p.json", PATH4_PARAMS);
    let m = dir.path().join("m.json");
    let o = run(&["simulate", "--graph", &g, "--params", &p, "--out", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = dir.path().join("r.json");
    let o = run(&[
        "reconstruct",
        "--graph",
        &g,
        "--measurement",
        m.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(out.to_str().unwrap());
    assert!((r["b"]["3"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((r["c"]["3-4"].as_f64().unwrap() + 1.2).abs() < 1e-9);
}

#[test]
fn decaying_series_extrapolates_and_reconstructs() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.json", PATH4);
    let p = write(&dir, "p.json", PATH4_PARAMS);
    let series = dir.path().join("s.json");
    let o = run(&[
        "simulate",
        "--graph",
        &g,
        "--params",
        &p,
        "--times",
        "0,10,20,30",
        "--gamma",
        "0.002,0.004,0.006,0.008",
        "--out",
        series.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit = dir.path().join("fit.json");
    let o = run(&["extrapolate", "--measurement", series.to_str().unwrap(), "--out", fit.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f = report(fit.to_str().unwrap());
    let m = write(&dir, "m.json", &f["measurement"].to_string());
    let out = dir.path().join("r.json");
    let o = run(&["reconstruct", "--graph", &g, "--measurement", &m, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((report(out.to_str().unwrap())["b"]["2"].as_f64().unwrap() + 0.4).abs() < 1e-9);
}

fn two_site(dir: &TempDir) -> (String, String) {
    (
        write(dir, "g2.json", r#"{"nodes":[1,2],"edges":[{"u":1,"v":2,"sign":1}]}"#),
        write(dir, "p2.json", r#"{"b":{"1":0,"2":0},"c":{"1-2":1}}"#),
    )
}

#[test]
fn spectrum_two_sites() {
    let dir = TempDir::new().unwrap();
    let (g, p) = two_site(&dir);
    let out = dir.path().join("s.json");
    let o = run(&[
        "spectrum", "--graph", &g, "--params", &p, "--T", "200", "--dt", "0.1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(out.to_str().unwrap());
    let res = r["resolution"].as_f64().unwrap();
    assert!((res - 0.0314).abs() < 1e-3);
    let peaks = r["peaks"].as_array().unwrap();
    for (pk, target) in peaks.iter().zip([-1.0, 1.0]) {
        assert!((pk["E"].as_f64().unwrap() - target).abs() < res);
        assert!((pk["w"].as_f64().unwrap() - 0.5).abs() <= 0.01);
    }
    assert_eq!(r["warnings"], serde_json::json!([]));
}

#[test]
fn spectrum_warns_on_coarse_sampling() {
    let dir = TempDir::new().unwrap();
    let (g, p) = two_site(&dir);
    let out = dir.path().join("s.json");
    let o = run(&[
        "spectrum", "--graph", &g, "--params", &p, "--T", "400", "--dt", "4", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("warning: Aliasing"));
    let r = report(out.to_str().unwrap());
    assert!(r["warnings"][0].as_str().unwrap().starts_with("Aliasing"));
}

#[test]
fn spectrum_from_signal_file() {
    let dir = TempDir::new().unwrap();
    let times: Vec<f64> = (0..400).map(|k| 0.25 * k as f64).collect();
    let re: Vec<f64> = times.iter().map(|t| (0.5 * t).cos()).collect();
    let im: Vec<f64> = times.iter().map(|t| -(0.5 * t).sin()).collect();
    let s = write(&dir, "sig.json", &serde_json::json!({"times": times, "re": re, "im": im}).to_string());
    let o = run(&["spectrum", "--signal", &s, "--peaks", "1", "--window", "hann"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let e: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("E ="))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|x| x.parse().ok())
        .expect("peak line");
    assert!((e - 0.5).abs() < 1e-3, "{text}");
    let o = run(&["spectrum", "--signal", &s]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["classify", "--graph", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(&dir, "bad.json", "{\"nodes\": [1, 2],\n \"edges\": [{\"u\": 1, \"w\": 2}]}");
    let o = run(&["classify", "--graph", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let g = write(&dir, "g.json", PATH4);
    let p = write(&dir, "p.json", r#"{"b":{"1":0.3},"c":{}}"#);
    let o = run(&["roundtrip", "--graph", &g, "--params", &p]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["roundtrip", "--graph", &g, "--params", &p, "--shots", "-3"]);
    assert_eq!(o.status.code(), Some(2));

    let p = write(&dir, "p2.json", PATH4_PARAMS);
    let o = run(&["plan", "--graph", &g, "--reference", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["simulate", "--graph", &g, "--params", &p, "--times", "0,1", "--gamma", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(2));
}
