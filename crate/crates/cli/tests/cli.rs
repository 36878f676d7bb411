use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CYCLIC: &str = r#"{"type":"odthls","r":3,"rates":{
    "":{"1":0.3333333333333333,"2":0.3333333333333333,"3":0.3333333333333333},
    "1":{"2":0.25,"3":0.75},"2":{"1":0.75,"3":0.25},"3":{"1":0.25,"2":0.75},
    "1,2":{"3":2.0},"1,3":{"2":2.0},"2,1":{"3":2.0},"2,3":{"1":2.0},"3,1":{"2":2.0},"3,2":{"1":2.0}}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifeline"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_table(p: &Path) -> Vec<Vec<f64>> {
    let mut rd = csv::Reader::from_path(p).unwrap();
    rd.records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["eval", "--bogus"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"type":"odthls","r":3}"#);
    let o = run(&["eval", "--model", s(&bad), "-q", "marginal"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn checks_of_cyclic_model() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cyc.json", CYCLIC);
    let o = run(&["check", "--model", s(&m), "--property", "min-stable"]);
    assert_eq!(code(&o), 0);
    let o = run(&["check", "--model", s(&m), "--property", "exchangeable"]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn eval_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cyc.json", CYCLIC);
    let out = dir.path().join("e.csv");
    let o = run(&[
        "eval",
        "--model",
        s(&m),
        "-q",
        "orderstat:2",
        "-q",
        "min:2",
        "--at",
        "0.5,1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let rows = read_table(&out);
    for row in rows {
        let t = row[0];
        assert!((row[1] - (1.0 + t) * (-t).exp()).abs() < 1e-12);
        assert!((row[2] - (-t).exp() * (1.0 + t / 3.0)).abs() < 1e-12);
    }
}

#[test]
fn convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "ex.json",
        r#"{"type":"exchangeable_thls","r":3,"L":[1,1,2]}"#,
    );
    let os1 = dir.path().join("os1.csv");
    let diag = dir.path().join("diag.csv");
    let marg = dir.path().join("marg.csv");
    let os2 = dir.path().join("os2.csv");
    let conv = |args: &[&str]| assert_eq!(code(&run(args)), 0, "{args:?}");
    conv(&[
        "convert",
        "--from",
        "orderstats",
        "--to",
        "orderstats",
        "--model",
        s(&m),
        "--out",
        s(&os1),
    ]);
    conv(&[
        "convert",
        "--from",
        "orderstats",
        "--to",
        "diagonals",
        "--model",
        s(&os1),
        "--out",
        s(&diag),
        "--marginal-out",
        s(&marg),
    ]);
    conv(&[
        "convert",
        "--from",
        "diagonals",
        "--to",
        "orderstats",
        "--model",
        s(&diag),
        "--marginal",
        s(&marg),
        "--out",
        s(&os2),
    ]);
    let (a, b) = (read_table(&os1), read_table(&os2));
    assert_eq!(a.len(), b.len());
    let err = a
        .iter()
        .zip(&b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "round-trip error {err}");
    // a mismatched --from is refused
    let o = run(&[
        "convert",
        "--from",
        "profile",
        "--to",
        "orderstats",
        "--model",
        s(&os1),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulation_is_reproducible_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "cyc.json", CYCLIC);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let sim = |out: &Path, threads: &str| {
        let o = run(&[
            "--threads",
            threads,
            "simulate",
            "--model",
            s(&m),
            "--n",
            "20000",
            "--seed",
            "5",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0);
    };
    sim(&a, "1");
    sim(&b, "3");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = run(&["gof", "--model", s(&m), "--batch", s(&a)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    // a batch from a different law is rejected
    let other = write(
        dir.path(),
        "iid.json",
        r#"{"type":"exchangeable_thls","r":3,"L":[3,2,1]}"#,
    );
    let o = run(&["gof", "--model", s(&other), "--batch", s(&a)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn copula_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(
        code(&run(&[
            "copula",
            "skew-fgm",
            "--theta",
            "0.5",
            "--tabulate",
            "33",
            "--out",
            s(&p("seed.json"))
        ])),
        0
    );
    let o = run(&[
        "copula",
        "cyclic3",
        "--seed",
        s(&p("seed.json")),
        "--out",
        s(&p("c3.json")),
        "--twin-out",
        s(&p("c3b.json")),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        code(&run(&[
            "copula",
            "check",
            "--copula",
            s(&p("c3.json")),
            "--property",
            "dd"
        ])),
        0
    );
    assert_eq!(
        code(&run(&["copula", "check", "--copula", s(&p("c3.json"))])),
        2
    );
    let ind = write(dir.path(), "ind.json", r#"{"kind":"independence","r":3}"#);
    let mix = |alpha: &str| {
        code(&run(&[
            "copula",
            "mix",
            "--d",
            s(&ind),
            "--c1",
            s(&p("c3.json")),
            "--c2",
            s(&p("c3b.json")),
            "--alpha",
            alpha,
            "--d-lower",
            "1",
            "--c-upper",
            "2",
            "--out",
            s(&p("mix.json")),
        ]))
    };
    assert_eq!(mix("0.5"), 0);
    assert_eq!(mix("0.6"), 1);
}

#[test]
fn generator_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let values: Vec<f64> = grid.iter().map(|u| u / (3.0 - 2.0 * u)).collect();
    let text =
        serde_json::json!({"family": "tabulated_delta", "r": 3, "grid": grid, "values": values});
    let f = write(dir.path(), "delta.json", &text.to_string());
    let o = run(&["archimedean", "recover", "--delta", s(&f)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["roundtrip_error"].as_f64().unwrap() <= 2e-3);
}
