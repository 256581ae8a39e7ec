use std::path::Path;
use std::process::{Command, Output};

use n3body::io::loop_from_json;
use serde_json::Value;

const N4: [&str; 10] = ["--n", "4", "--r", "7", "--d", "3", "--k1", "3", "--k2", "-4"];
const N5: [&str; 10] = ["--n", "5", "--r", "8", "--d", "3", "--k1", "3", "--k2", "-5"];
const N7: [&str; 10] = ["--n", "7", "--r", "10", "--d", "3", "--k1", "3", "--k2", "-7"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_n3body")).args(args).output().expect("binary runs")
}

fn run_with(sub: &str, params: &[&str], extra: &[&str]) -> Output {
    let mut args = vec![sub];
    args.extend_from_slice(params);
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bounds_table_n4() {
    let o = run_with("bounds", &N4, &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for v in ["144.6215", "138.9586", "170.7479", "139.2196"] {
        assert!(text.contains(v), "{v} missing from\n{text}");
    }
    assert!(text.contains("threshold B̃"));
}

#[test]
fn bounds_threshold_n5_json() {
    let o = run_with("bounds", &N5, &["--format", "json", "--pi", "3.1415"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let t = v["reports"][0]["threshold"].as_f64().unwrap();
    assert!((t - 181.0305).abs() < 5e-4);
    assert_eq!(v["reports"][0]["parity"], "odd");
}

#[test]
fn bounds_rejects_n_divisible_by_three() {
    let o = run(&["bounds", "--n", "6", "--r", "7", "--d", "3", "--k1", "3", "--k2", "-18"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gcd(N,3) ≠ 1"), "{}", stderr(&o));
}

#[test]
fn missing_parameters_are_invalid_input() {
    let o = run(&["bounds", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_csv_has_full_precision() {
    let o = run_with("bounds", &N4, &["--format", "csv", "--pi", "exact"]);
    let text = stdout(&o);
    assert!(text.starts_with("pi,case,constant,i,j,bound\n"));
    let row = text.lines().nth(1).unwrap();
    let value = row.rsplit(',').next().unwrap();
    assert_eq!(value.split('e').next().unwrap().len(), 18, "{value}");
}

#[test]
fn certify_n4_margin() {
    let o = run_with("certify", &N4, &["--a", "0.23", "--b", "0.088", "--pi", "3.1415", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["margin"].as_f64().unwrap() - 3.45).abs() < 0.05);
    assert_eq!(v["verdict"], "certified");
}

#[test]
fn certify_n7_and_table() {
    let o = run_with("certify", &N7, &["--a", "0.25", "--b", "0.064"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("certified"));
}

#[test]
fn certify_large_orbit_is_negative() {
    let o = run_with("certify", &N4, &["--a", "10", "--b", "0.001"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("not certified"));
}

#[test]
fn lemmas_exit_codes() {
    assert_eq!(run_with("lemmas", &N4, &[]).status.code(), Some(0));
    assert_eq!(run_with("lemmas", &N7, &[]).status.code(), Some(0));
    let bad = ["--n", "4", "--r", "9", "--d", "3", "--k1", "3", "--k2", "12"];
    assert_eq!(run_with("lemmas", &bad, &[]).status.code(), Some(2));
    let o = run_with("lemmas", &bad, &["--force"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stdout(&o).contains("(i, j, k) = (0, 3, 2)"));
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn minimize_writes_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(format!("{name}.json"));
        let plot = dir.path().join(format!("{name}.plot.csv"));
        let o = run_with(
            "minimize",
            &N4,
            &[
                "--a", "0.23", "--b", "0.088", "--modes", "24", "--grid", "1344",
                "--out", out.to_str().unwrap(), "--emit-plot", plot.to_str().unwrap(),
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let line = stdout(&o);
        assert!(line.starts_with("action="), "{line}");
        assert!(line.contains("windings=(3,-4)"));
        let files = [
            out.clone(),
            dir.path().join(format!("{name}.trajectory.csv")),
            dir.path().join(format!("{name}.log.csv")),
            plot,
        ];
        outputs.push((line, files.iter().map(|f| read(f)).collect::<Vec<_>>()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let doc: Value = serde_json::from_slice(&outputs[0].1[0]).unwrap();
    assert_eq!(doc["termination"], "converged");
    assert!(doc["action"].as_f64().unwrap() <= 135.5123);
    assert!(doc["gradnorm"].as_f64().unwrap() <= 1e-8);
    let log = String::from_utf8(outputs[0].1[2].clone()).unwrap();
    assert!(log.starts_with("iter,action,gradnorm,minsep,step\n"));

    // resume from the stored spectra
    let stored = dir.path().join("first.json");
    let resumed = dir.path().join("resumed.json");
    let o = run(&["minimize", "--loop-in", stored.to_str().unwrap(), "--out", resumed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc2: Value = serde_json::from_slice(&read(&resumed)).unwrap();
    assert!(doc2["iterations"].as_u64().unwrap() <= 2);
    assert!((doc2["action"].as_f64().unwrap() - doc["action"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn loop_in_with_conflicting_flags_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loop.json");
    let o = run_with("sample", &N4, &["--a", "0.23", "--b", "0.088", "--grid", "84", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run_with("action", &N5, &["--loop-in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_round_trips_through_loop_import() {
    let o = run_with("sample", &N4, &["--a", "0.23", "--b", "0.088", "--grid", "84", "--format", "json"]);
    let text = stdout(&o);
    let system = loop_from_json(&text).unwrap();
    let expected = n3body::build_test_orbit(&n3body::SymmetryParams::new(4, 7, 3, 3, -4), 0.23, 0.088).unwrap();
    assert_eq!(system, expected);

    let o = run_with("action", &N4, &["--a", "0.23", "--b", "0.088", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["total"].as_f64().unwrap() - 135.5150).abs() < 1e-3);
    assert_eq!(loop_from_json(&stdout(&o)).unwrap(), expected);
}

#[test]
fn sample_csv_layout() {
    let o = run_with("sample", &N4, &["--a", "0.23", "--b", "0.088", "--grid", "84"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,body,x,y,vx,vy"));
    assert_eq!(text.lines().count(), 1 + 84 * 7);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1], "1");
    assert_eq!(first[2].parse::<f64>().unwrap(), 0.23);
}

#[test]
fn membership_of_test_orbit() {
    let o = run_with("membership", &N4, &["--a", "0.23", "--b", "0.088", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["symmetry_residual"].as_f64().unwrap() <= 1e-10);
    assert!(v["ode_residual"].as_f64().unwrap() > 0.1);
    let entries = v["windings"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 9);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("n5.cfg");
    std::fs::write(&cfg, "n=5\nr=8\nd=3\nk1=3\nk2=-5\npi=3.1415\nformat=json\n").unwrap();
    let o = run(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["reports"][0]["threshold"].as_f64().unwrap() - 181.0305).abs() < 5e-4);

    let o = run(&[
        "bounds", "--config", cfg.to_str().unwrap(),
        "--n", "7", "--r", "10", "--k2", "-7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["reports"][0]["threshold"].as_f64().unwrap() - 274.1354).abs() < 5e-4);
}

#[test]
fn out_file_is_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.txt");
    let o = run_with("bounds", &N4, &["--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().contains("138.9586"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
