use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poa-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("poa-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn row<'a>(csv: &'a str, d: &str, column: &str) -> Vec<&'a str> {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[1] == d && f[2] == column)
        .unwrap_or_else(|| panic!("no row d={d} {column}"))
}

#[test]
fn reproduce_identical_matches() {
    let o = run(&["reproduce", "identical"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("table,d,column,value,printed,match"));
    let r = row(&csv, "4", "identical");
    assert!(r[3].starts_with("2.895"));
    assert_eq!(r[5], "true");
}

#[test]
fn reproduce_unweighted_row_three() {
    let o = run(&["reproduce", "unweighted"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    for (col, printed) in [("poa", "41.54"), ("crs", "527.3"), ("crc", "755.2")] {
        let r = row(&csv, "3", col);
        assert_eq!(r[4].trim_matches('"'), printed);
        assert_eq!(r[5], "true");
    }
}

#[test]
fn reproduce_weighted_reports_mismatches_with_exit_two() {
    let o = run(&["reproduce", "weighted"]);
    let csv = stdout(&o);
    for col in ["poa", "crs", "crc"] {
        assert_eq!(row(&csv, "1", col)[5], "true");
    }
    let any_mismatch = csv.lines().skip(1).any(|l| l.contains(",false,"));
    assert_eq!(o.status.code(), Some(if any_mismatch { 2 } else { 0 }));
}

#[test]
fn gen_then_verify_agrees() {
    let cases: &[&[&str]] = &[
        &["gen", "weighted-tree", "--s", "2", "--n", "2"],
        &["gen", "weighted-walk-tree", "--s", "2", "--n", "3"],
        &["gen", "weighted-walk-tree", "--s", "2", "--n", "1", "--walk-mode", "cooperative"],
        &["gen", "unweighted-multipartite", "--s", "3"],
        &["gen", "unweighted-walk-multipartite", "--s", "2", "--walk-mode", "cooperative"],
        &["gen", "identical-weighted", "--m", "20"],
        &["gen", "identical-unweighted-walk", "--o", "1,1,2"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = scratch(&format!("inst{i}.json"));
        let mut a: Vec<&str> = args.to_vec();
        let p = out.to_str().unwrap();
        a.extend(["--out", p]);
        let g = run(&a);
        assert_eq!(g.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&g.stderr));
        let v = run(&["verify", p]);
        assert_eq!(v.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&v.stderr));
        assert!(stdout(&v).lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")));
    }
}

#[test]
fn verify_detects_tampering() {
    let out = scratch("tamper.json");
    let p = out.to_str().unwrap();
    assert_eq!(run(&["gen", "unweighted-multipartite", "--s", "2", "--out", p]).status.code(), Some(0));
    let game = std::fs::read_to_string(&out).unwrap();
    std::fs::write(&out, game.replacen("\"coeffs\":[0.0,1.0]", "\"coeffs\":[0.0,3.0]", 1)).unwrap();
    assert_eq!(run(&["verify", p]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let args = ["converge", "unweighted-multipartite", "--s", "2..5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let j1 = run(&["--json", "bounds", "--d", "1..3"]);
    let j2 = run(&["--json", "bounds", "--d", "1..3"]);
    assert_eq!(j1.stdout, j2.stdout);
    let v: serde_json::Value = serde_json::from_slice(&j1.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);
}

#[test]
fn walk_and_brute_force_on_a_generated_instance() {
    let out = scratch("small.json");
    let p = out.to_str().unwrap();
    assert_eq!(run(&["gen", "unweighted-multipartite", "--s", "1", "--out", p]).status.code(), Some(0));
    let w = run(&["--json", "walk", p, "--order", "reverse"]);
    assert_eq!(w.status.code(), Some(0));
    let t: serde_json::Value = serde_json::from_slice(&w.stdout).unwrap();
    assert_eq!(t["steps"].as_array().unwrap().len(), 4);
    let b = run(&["poa-brute", p]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(stdout(&b).lines().nth(1).unwrap(), "0,6,6,1");
}

#[test]
fn input_errors_exit_three() {
    assert_eq!(run(&["gen", "no-such-family"]).status.code(), Some(3));
    assert_eq!(run(&["verify", "/nonexistent/game.json"]).status.code(), Some(3));
    assert_eq!(run(&["reproduce", "other"]).status.code(), Some(3));
    assert_eq!(run(&["gen", "identical-weighted", "--m", "7"]).status.code(), Some(3));
    let o = bin()
        .args(["gen", "weighted-tree", "--s", "4", "--n", "8"])
        .env("POA_LAB_CAPS", "players=1000")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}
