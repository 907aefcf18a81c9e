//! End-to-end command-line tests driven in-process through `cli::run`.

use pie_forge::cli;
use std::fs;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["pie-forge"];
    argv.extend_from_slice(args);
    cli::run(argv)
}

#[test]
fn check_builtin_is_admissible() {
    assert_eq!(run(&["check", "entropy"]), 0);
    assert_eq!(run(&["check", "datko"]), 0);
}

#[test]
fn check_rejects_inadmissible_conditions() {
    // Both conditions pin the same quantity: B_T is singular.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("degenerate.json");
    fs::write(
        &path,
        r#"{
            "name": "degenerate",
            "domain": [0, 1],
            "n": [0, 0, 1],
            "bc": { "B": [[1, 0, 0, 0], [1, 0, 0, 0]] },
            "pde": { "A0": [[0, 0, 1]] }
        }"#,
    )
    .unwrap();
    assert_eq!(run(&["check", path.to_str().unwrap()]), 3);
}

#[test]
fn unknown_key_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"domain": [0,1], "n": [0,1], "bogus": 1}"#).unwrap();
    assert_eq!(run(&["check", path.to_str().unwrap()]), 2);
}

#[test]
fn usage_error_exits_one() {
    assert_eq!(run(&["frobnicate"]), 1);
}

#[test]
fn convert_writes_pie_json_that_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("entropy.pie.json");
    assert_eq!(run(&["convert", "entropy", "-o", path.to_str().unwrap()]), 0);
    let text = fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["det"], "2");
    assert!(v["deviations"].as_array().unwrap().len() >= 4);

    // The saved operator tuple reloads to the exact same operators.
    let pie = pie_forge::converter::pie_from_value(&v["pie"]).unwrap();
    let conv = pie_forge::converter::convert_gpde(
        &pie_forge::models::load_builtin("entropy").unwrap().model,
    )
    .unwrap();
    assert_eq!(pie.t, conv.pie.t);
    assert_eq!(pie.a, conv.pie.a);
    let reencoded = pie_forge::converter::pie_to_value(&pie);
    assert_eq!(reencoded, v["pie"]);
}

#[test]
fn simulate_then_reconstruct_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let pie_path = dir.path().join("heat.pie.json");
    assert_eq!(run(&["convert", "heat", "-o", pie_path.to_str().unwrap()]), 0);

    let csv = dir.path().join("run.csv");
    assert_eq!(
        run(&[
            "simulate",
            "heat",
            "--tend",
            "0.02",
            "--modes",
            "12",
            "-o",
            csv.to_str().unwrap(),
        ]),
        0
    );
    let outputs = fs::read_to_string(&csv).unwrap();
    let mut lines = outputs.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with('t') && header.ends_with("energy"));
    // The diffusion benchmark dissipates: the energy column is monotone.
    let energy_idx = header.split(',').count() - 1;
    let energies: Vec<f64> = lines
        .map(|l| l.split(',').nth(energy_idx).unwrap().parse().unwrap())
        .collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    let states = dir.path().join("run.states.csv");
    let states_text = fs::read_to_string(&states).unwrap();
    assert!(states_text.starts_with("t,s,channel,value"));

    let rec = dir.path().join("reconstructed.csv");
    assert_eq!(
        run(&[
            "reconstruct",
            pie_path.to_str().unwrap(),
            states.to_str().unwrap(),
            "-o",
            rec.to_str().unwrap(),
        ]),
        0
    );
    // The reconstructed field honors the left Dirichlet condition: the
    // first node value of every snapshot is zero.
    let rec_text = fs::read_to_string(&rec).unwrap();
    let mut prev_t = String::new();
    for line in rec_text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] != prev_t {
            prev_t = cols[0].to_string();
            let v: f64 = cols[3].parse().unwrap();
            assert!(v.abs() < 1e-10, "left boundary value {v}");
        }
    }
}

#[test]
fn simulate_converted_pie_file_directly() {
    let dir = tempfile::tempdir().unwrap();
    let pie_path = dir.path().join("heat.pie.json");
    assert_eq!(run(&["convert", "heat", "-o", pie_path.to_str().unwrap()]), 0);
    let csv = dir.path().join("direct.csv");
    assert_eq!(
        run(&[
            "simulate",
            pie_path.to_str().unwrap(),
            "--dt",
            "0.001",
            "--tend",
            "0.01",
            "--modes",
            "10",
            "--ic",
            "sin(pi*s/2)",
            "-o",
            csv.to_str().unwrap(),
        ]),
        0
    );
    assert!(fs::read_to_string(&csv).unwrap().lines().count() >= 11);
}

#[test]
fn verify_builtin_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    assert_eq!(
        run(&["verify", "--builtin", "datko", "-o", path.to_str().unwrap()]),
        0
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["status"] == "PASS"));
    let deviations = v["deviations"].as_array().unwrap();
    assert!(deviations.iter().any(|d| d["object"] == "B_T" && d["matches"] == true));
}

#[test]
fn verify_random_batch_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    assert_eq!(
        run(&[
            "verify",
            "--seed",
            "3",
            "--cases",
            "6",
            "-o",
            path.to_str().unwrap(),
        ]),
        0
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["seed"], 3);
}
