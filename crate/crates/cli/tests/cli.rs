use std::path::Path;
use std::process::{Command, Output};

use fogran::bounds::BoundsReport;
use fogran::dof::DefaultDof;
use fogran::model::NetworkConfig;
use fogran::scheduler::DeliverySchedule;

fn fogran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogran")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = fogran(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

const FIG2: &[&str] = &["--nt", "2", "--nr", "5", "--mut", "0.5", "--mur", "0.2"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

/// Rows of a CSV body as field vectors, header dropped.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn bounds_matches_library() {
    let out = ok(&with(&["bounds"], &with(FIG2, &["--r", "2"])));
    let rep: BoundsReport = serde_json::from_str(&out).unwrap();
    let cfg = NetworkConfig::new(2, 5, 0.5, 0.2, 2.0);
    assert_eq!(rep, BoundsReport::compute(&cfg, &DefaultDof));
    assert!(rep.tau_upper > rep.tau_lower && rep.gap > 1.0);
}

#[test]
fn bounds_with_full_ue_cache() {
    let out = ok(&["bounds", "--nt", "3", "--nr", "3", "--mut", "0.2", "--mur", "1", "--r", "1"]);
    let rep: BoundsReport = serde_json::from_str(&out).unwrap();
    assert_eq!((rep.tau_upper, rep.tau_lower, rep.gap), (0.0, 0.0, 1.0));
}

#[test]
fn bad_input_exits_2_without_output() {
    for args in [
        vec!["bounds", "--nt", "two"],
        vec!["bounds", "--nt", "1", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r", "1"],
        vec!["bounds", "--nt", "2", "--nr", "3", "--mut", "0.5", "--mur", "0.5"],
        vec!["bounds", "--nt", "2", "--nr", "3", "--mut", "1.5", "--mur", "0.5", "--r", "1"],
        vec!["sweep", "--nt", "2", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--axis", "r", "--values", "geom:0:1:3"],
        vec!["sweep", "--nt", "2", "--nr", "3", "--mut", "0.5", "--r", "1", "--axis", "mu_r", "--values", "0.5,2"],
    ] {
        let o = fogran(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
    let o = fogran(&["bounds", "--nt", "2", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r=-1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fronthaul_r"));
}

#[test]
fn r_sweep_decreases_to_the_limit() {
    let out = ok(&with(&["sweep"], &with(FIG2, &["--axis", "r", "--values", "geom:0.01:1e9:40", "--format", "csv"])));
    let header = out.lines().next().unwrap();
    assert_eq!(header, format!("value,{}", fogran::bounds::CSV_HEADER));
    let rows = rows(&out);
    assert_eq!(rows.len(), 40);
    let col = |name: &str| header.split(',').position(|h| h == name).unwrap();
    let (up, low, lim) = (col("tau_upper"), col("tau_lower"), col("limit_inf_r"));
    let f = |r: &Vec<String>, c: usize| r[c].parse::<f64>().unwrap();
    assert!(rows.windows(2).all(|w| f(&w[1], up) <= f(&w[0], up)));
    assert!(rows.windows(2).all(|w| f(&w[1], low) <= f(&w[0], low)));
    let last = rows.last().unwrap();
    assert_eq!(last[0], "1000000000");
    assert!((f(last, up) - f(last, lim)).abs() < 1e-6);
}

#[test]
fn single_point_sweep_equals_bounds() {
    let sweep = ok(&with(&["sweep"], &with(FIG2, &["--r", "7", "--axis", "r", "--values", "3", "--format", "csv"])));
    let bounds = ok(&with(&["bounds"], &with(FIG2, &["--r", "3", "--format", "csv"])));
    let sweep_row = sweep.lines().nth(1).unwrap();
    let bounds_row = bounds.lines().nth(1).unwrap();
    assert_eq!(sweep_row.split_once(',').unwrap(), ("3", bounds_row));
}

#[test]
fn sweep_rows_match_bounds_pointwise() {
    let sweep = ok(&with(&["sweep"], &with(FIG2, &["--r", "1", "--axis", "mu_t", "--values", "lin:0:1:6", "--format", "csv"])));
    for line in sweep.lines().skip(1) {
        let (v, rest) = line.split_once(',').unwrap();
        let bounds = ok(&["bounds", "--nt", "2", "--nr", "5", "--mut", v, "--mur", "0.2", "--r", "1", "--format", "csv"]);
        assert_eq!(rest, bounds.lines().nth(1).unwrap());
    }
}

#[test]
fn mu_r_sweep_ending_at_one() {
    let out = ok(&["sweep", "--nt", "3", "--nr", "4", "--mut", "0.3", "--r", "1", "--axis", "mu_r", "--values", "lin:0:1:5", "--format", "csv"]);
    let last = rows(&out).pop().unwrap();
    assert_eq!(last[0], "1");
    assert_eq!(last[6], "0");
}

#[test]
fn sweep_json() {
    let out = ok(&with(&["sweep"], &with(FIG2, &["--axis", "r", "--values", "1,10"])));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["axis"], "r");
    assert_eq!(v[1]["report"]["r"], 10.0);
}

#[test]
fn simulate_2x2() {
    let o = fogran(&["simulate", "--nt", "2", "--nr", "2", "--mut", "0.5", "--mur", "0.5", "--r", "1", "--file-bits", "100000", "--seed", "7"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["report"]["per_ue_success"].as_array().unwrap().iter().all(|s| s == true));
    assert!(v["relative_error"].as_f64().unwrap() < 0.05);
    assert_eq!(v["analytic"]["tau"], 0.75);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("relative error"), "{stderr}");
}

#[test]
fn simulate_full_ue_cache_sends_nothing() {
    let out = ok(&["simulate", "--nt", "2", "--nr", "3", "--mut", "0.5", "--mur", "1", "--r", "1", "--file-bits", "1000", "--format", "csv"]);
    let row = &rows(&out)[0];
    assert_eq!(&row[2..6], ["true", "0", "0", "0"]);
}

#[test]
fn simulate_rejects_bad_demand() {
    for demand in ["1,2", "1,2,9", "1,x,2"] {
        let o = fogran(&["simulate", "--nt", "2", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r", "1", "--demand", demand]);
        assert_eq!(o.status.code(), Some(2), "{demand}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn simulate_replays_exported_placement() {
    let dir = tempfile::tempdir().unwrap();
    let placement = dir.path().join("placement.json");
    let p = placement.to_str().unwrap();
    let net = ["--nt", "3", "--nr", "2", "--nfiles", "4", "--mut", "0.4", "--mur", "0.3", "--r", "2", "--demand", "4,4"];
    let first = ok(&with(&["simulate"], &with(&net, &["--file-bits", "3000", "--seed", "11", "--placement-out", p])));
    assert!(Path::new(p).exists());
    let replay = ok(&with(&["simulate"], &with(&net, &["--placement", p])));
    assert_eq!(first, replay);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = ["simulate", "--nt", "3", "--nr", "3", "--mut", "0.5", "--mur", "0.25", "--r", "10", "--file-bits", "20000", "--seed", "3"];
    assert_eq!(ok(&args), ok(&args));
    let scan = ["gap-scan", "--format", "csv"];
    assert_eq!(ok(&scan), ok(&scan));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, r#"{"num_ens": 2, "num_ues": 5, "mu_t": 0.5, "mu_r": 0.2, "fronthaul_r": 9.0}"#).unwrap();
    let p = path.to_str().unwrap();
    let from_file = ok(&["bounds", "--config", p, "--r", "2", "--format", "csv"]);
    let from_flags = ok(&with(&["bounds"], &with(FIG2, &["--r", "2", "--format", "csv"])));
    assert_eq!(from_file, from_flags);

    std::fs::write(&path, r#"{"num_ens": 2, "bogus": 1}"#).unwrap();
    assert_eq!(fogran(&["bounds", "--config", p]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let o = fogran(&with(&["bounds"], &with(FIG2, &["--r", "2", "--format", "csv", "--out", path.to_str().unwrap()])));
    assert!(o.status.success() && o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("n_t,n_r,"));
}

#[test]
fn schedule_export_round_trips() {
    let out = ok(&["schedule-export", "--nt", "3", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r", "10"]);
    let s: DeliverySchedule = serde_json::from_str(&out).unwrap();
    let b: BoundsReport = serde_json::from_str(&ok(&["bounds", "--nt", "3", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r", "10"])).unwrap();
    assert_eq!(s.breakdown.total, b.tau_upper);
    let csv = ok(&["schedule-export", "--nt", "3", "--nr", "3", "--mut", "0.5", "--mur", "0.5", "--r", "10", "--format", "csv"]);
    assert_eq!(rows(&csv).len(), s.groups.len());
}

#[test]
fn default_gap_scan_within_twelve() {
    let o = fogran(&["gap-scan", "--format", "csv"]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 25);
    for r in &rows {
        assert_eq!(r[2], "75");
        assert!(r[4].parse::<f64>().unwrap() <= 12.0);
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("max gap"));
}

#[test]
fn gap_scan_flags_degenerate_points() {
    let out = ok(&["gap-scan", "--nt-values", "2", "--nr-values", "3", "--mur-values", "0.5,1", "--format", "csv"]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 1);
    // 5 mu_t values x 3 r values at mu_r = 1
    assert_eq!((rows[0][2].as_str(), rows[0][3].as_str()), ("15", "15"));

    let only = ok(&["gap-scan", "--nt-values", "2", "--nr-values", "3", "--mur-values", "1", "--format", "csv"]);
    assert_eq!(only.lines().nth(1).unwrap(), "2,3,0,15,,,,");
}

#[test]
fn single_cell_gap_scan_equals_bounds() {
    let scan = ok(&["gap-scan", "--nt-values", "2", "--nr-values", "5", "--mut-values", "0.5", "--mur-values", "0.2", "--r-values", "2", "--format", "csv"]);
    let b: BoundsReport = serde_json::from_str(&ok(&with(&["bounds"], &with(FIG2, &["--r", "2"])))).unwrap();
    let row = &rows(&scan)[0];
    assert_eq!(row[4].parse::<f64>().unwrap(), b.gap);
}

fn dof_table(dir: &Path, d_single: f64, d_full: f64) -> String {
    let mut entries = Vec::new();
    for m in 0..2 {
        for (j, d) in [(1, d_single), (2, d_full)] {
            entries.push(format!(r#"{{"m": {m}, "j": {j}, "n_t": 2, "n_r": 2, "d": {d}}}"#));
        }
    }
    let path = dir.join("dof.json");
    std::fs::write(&path, format!(r#"{{"entries": [{}]}}"#, entries.join(", "))).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dof_table_validation_and_gap_violation() {
    let dir = tempfile::tempdir().unwrap();
    let net = ["--nt", "2", "--nr", "2", "--mut", "0.5", "--mur", "0.5", "--r", "1"];

    let good = dof_table(dir.path(), 0.5, 1.0);
    let out = ok(&with(&["bounds"], &with(&net, &["--dof-table", &good])));
    let rep: BoundsReport = serde_json::from_str(&out).unwrap();
    assert!(rep.tau_upper > 0.0);

    let decreasing = dof_table(dir.path(), 1.0, 0.5);
    let o = fogran(&with(&["bounds"], &with(&net, &["--dof-table", &decreasing])));
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());

    // Tiny DoF inflates the upper bound far beyond 12 times the lower one.
    let tiny = dof_table(dir.path(), 0.001, 0.001);
    let o = fogran(&["gap-scan", "--nt-values", "2", "--nr-values", "2", "--dof-table", &tiny, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(rows(&stdout(&o)).len(), 1);
}
