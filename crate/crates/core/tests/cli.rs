use std::process::{Command, Output};

use serde_json::Value;

fn gupest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gupest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

#[test]
fn sweep_beta_fig1_trends() {
    let out = gupest(&["sweep-beta", "--state", "n:0", "--beta", "1e-4:1e-2:20", "--log"]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["beta", "H", "F", "I_mu", "F_amended", "F_classical_full", "R", "Q"]);
    assert_eq!(rows.len(), 20);
    let beta = column(&header, &rows, "beta");
    assert_eq!(beta[0], 1e-4);
    assert_eq!(beta[19], 1e-2);
    let q = column(&header, &rows, "Q");
    let h = column(&header, &rows, "H");
    assert!(q.windows(2).all(|w| w[1] > w[0]));
    assert!(h.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn report_is_a_single_json_record() {
    let out = gupest(&["report", "--state", "n:1", "--beta", "0.01"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["meta"]["toolkit"], "gupest");
    assert_eq!(v["meta"]["config"]["state"], "n:1");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let h = rows[0]["H"].as_f64().unwrap();
    assert!(((h - 5.2101) / 5.2101).abs() < 1e-3, "{h}");
}

#[test]
fn sweep_temperature_grows_at_high_temperature() {
    let out = gupest(&["sweep-temperature", "--beta", "0.01", "--T", "0.3:1.0:8"]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[0], "T");
    for name in ["H", "F_amended"] {
        let c = column(&header, &rows, name);
        assert!(c.windows(2).all(|w| w[1] > w[0]), "{name}: {c:?}");
    }
}

#[test]
fn qutrit_rows_are_theta_major() {
    let out = gupest(&["sweep-qutrit", "--theta", "0:0.5pi:2", "--phi", "0:0.5pi:3"]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(&header[..2], ["theta", "phi"]);
    let theta = column(&header, &rows, "theta");
    assert_eq!(theta, [0.0, 0.0, 0.0, 0.5 * std::f64::consts::PI, 0.5 * std::f64::consts::PI, 0.5 * std::f64::consts::PI]);
}

#[test]
fn omegam_sweep_reports_ratio_column() {
    let out = gupest(&["sweep-omegam", "--beta", "0.01", "--mw", "0.01:10:4"]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[0], "mw_over_beta");
    let x = column(&header, &rows, "mw_over_beta");
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[3] - 1e3).abs() < 1e-9);
    let h = column(&header, &rows, "H");
    assert!(h.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn json_format_for_sweeps_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("angle.json");
    let out = gupest(&[
        "sweep-angle",
        "--family",
        "mix",
        "--theta",
        "0:0.5pi:5",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows[1..4] {
        assert!(r["F"].as_f64().unwrap() < r["H"].as_f64().unwrap());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("run.ini");
    std::fs::write(&ini, "state = n:2\nbeta = 1e-4:1e-2:4\n").unwrap();
    let out = gupest(&["sweep-beta", "--config", ini.to_str().unwrap(), "--beta", "1e-3:1e-2:3"]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 3);
    // ψ_2 has H ≈ 15.3 at small β.
    assert!(rows[0][1] > 15.0);
}

#[test]
fn exit_codes() {
    let bad = gupest(&["report", "--beta", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");

    assert_eq!(gupest(&["sweep-beta", "--beta", "0.01"]).status.code(), Some(2));
    assert_eq!(gupest(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gupest(&["report", "--state", "n:99"]).status.code(), Some(2));
    assert_eq!(
        gupest(&["report", "--state", "n:20", "--beta", "1", "--max-refinements", "1", "--half-width", "0.5"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(gupest(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_gupest"))
            .args(["sweep-angle", "--phi", "0:0.5pi:9"])
            .env("GUPEST_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("3").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn mc_summary_json() {
    let out = gupest(&["mc", "--state", "n:2", "--beta", "0.5", "--replicas", "10", "--count", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &v["rows"][0];
    assert_eq!(s["beta_hats"].as_array().unwrap().len(), 10);
    let labels: Vec<&str> = s["predictions"].as_array().unwrap().iter().map(|p| p["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["1/(M*F)", "1/(M*F_amended)", "1/(M*F_classical_full)"]);
    assert!(s["variance"].as_f64().unwrap() > 0.0);
}
