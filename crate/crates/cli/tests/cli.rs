//! End-to-end runs of the binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use snake_locomanip::gait::GaitName;
use snake_locomanip::planner::{DecisionSpace, THREADS_ENV};
use snake_locomanip_cli::export::{read_table, BOX_POSE, CONTACT_FILES, JOINTS, ROBOT_POSE};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_snake-locomanip");

fn cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove(THREADS_ENV);
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let o = cli(args, &[]);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_files() -> Vec<String> {
    let mut v: Vec<String> = [ROBOT_POSE, BOX_POSE, JOINTS]
        .into_iter()
        .chain(CONTACT_FILES.iter().map(|(f, _)| *f))
        .map(str::to_string)
        .collect();
    v.sort();
    v
}

fn assert_same_files(a: &Path, b: &Path, files: &[String]) {
    for f in files {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn simulate_writes_all_artifacts_at_equal_cadence() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    ok(&["simulate", "--gait", "sidewinding", "--duration", "10", "--out", out.to_str().unwrap()]);
    let mut rows = BTreeSet::new();
    for f in csv_files() {
        let text = fs::read_to_string(out.join(&f)).unwrap();
        let mut lines = text.lines();
        let cols = lines.next().unwrap().split(',').count();
        let mut n = 0;
        for l in lines {
            assert_eq!(l.split(',').count(), cols, "{f}: ragged row");
            n += 1;
        }
        rows.insert(n);
        let t: Vec<f64> = read_table(&out.join(&f)).unwrap().iter().map(|r| r[0]).collect();
        assert!(t.windows(2).all(|w| w[1] > w[0]), "{f}: timestamps not increasing");
    }
    assert_eq!(rows.into_iter().collect::<Vec<_>>(), [1001]);
    let manifest = json(&out.join("run_manifest.json"));
    assert_eq!(manifest["config"]["gait"]["name"], "sidewinding");
    assert_eq!(manifest["constants_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["error"].is_null());
    let metrics = json(&out.join("metrics.json"));
    assert!(metrics["efficiency"]["work_loc"].as_f64().unwrap() > 0.0);
}

#[test]
fn identical_simulations_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["simulate", "--gait", "j_roll", "--duration", "3", "--out", d.to_str().unwrap()]);
    }
    let mut files = csv_files();
    files.extend(["metrics.json".to_string(), "run_manifest.json".to_string()]);
    assert_same_files(&a, &b, &files);
}

#[test]
fn ramp_ascent_raises_the_box() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ramp");
    ok(&["simulate", "--scenario", "ramp_ascent", "--out", out.to_str().unwrap()]);
    let rows = read_table(&out.join(BOX_POSE)).unwrap();
    let (z0, z1) = (rows[0][3], rows.last().unwrap()[3]);
    assert!(z1 > z0, "box z {z0} -> {z1}");
}

#[test]
fn serial_and_parallel_plans_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "plan.json", r#"{"planner":{"budget":12,"horizon":1.0},"seed":3}"#);
    let (a, b) = (tmp.path().join("serial"), tmp.path().join("parallel"));
    for (d, threads) in [(&a, "1"), (&b, "4")] {
        let o = cli(&["plan", "--config", &cfg, "--out", d.to_str().unwrap()], &[(THREADS_ENV, threads)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut files = csv_files();
    files.extend(["planner_result.json".to_string(), "run_manifest.json".to_string()]);
    assert_same_files(&a, &b, &files);
    let r = json(&a.join("planner_result.json"));
    let h: Vec<f64> = r["cost_history"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(h.len(), 12);
    assert!(h.windows(2).all(|w| w[1] <= w[0]), "history not monotone: {h:?}");
}

#[test]
fn budget_one_exports_the_seed_and_the_manifest_goal_error_matches_the_csv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("seed");
    ok(&["plan", "--budget", "1", "--goal", "1.0,0.4,0.1", "--out", out.to_str().unwrap()]);
    let r = json(&out.join("planner_result.json"));
    assert_eq!(r["evaluations"], 1);
    assert_eq!(r["best"]["total"], r["seed_cost"]);
    let seed = snake_locomanip::gait::preset(GaitName::CRoll).cpg().cloned().unwrap();
    let expected = DecisionSpace::around(&seed).encode(&seed);
    let decision: Vec<f64> = serde_json::from_value(r["decision"].clone()).unwrap();
    assert_eq!(decision, expected);

    let manifest = json(&out.join("run_manifest.json"));
    let goal: Vec<f64> = serde_json::from_value(manifest["goal"].clone()).unwrap();
    assert_eq!(goal, [1.0, 0.4, 0.1]);
    let rows = read_table(&out.join(BOX_POSE)).unwrap();
    let last = rows.last().unwrap();
    let err = ((last[1] - goal[0]).powi(2) + (last[2] - goal[1]).powi(2) + (last[3] - goal[2]).powi(2)).sqrt();
    let reported = manifest["goal_error"].as_f64().unwrap();
    assert!((err - reported).abs() < 1e-12, "{err} vs {reported}");
    assert!((r["best"]["goal_error"].as_f64().unwrap() - reported).abs() < 1e-12);
}

#[test]
fn compare_ranks_the_four_gaits() {
    let tmp = TempDir::new().unwrap();
    let gaits = ["sidewinding", "c_roll", "s_roll", "j_roll"];
    let dirs: Vec<String> = gaits
        .iter()
        .map(|g| {
            let d = tmp.path().join(g).to_str().unwrap().to_string();
            ok(&["simulate", "--gait", g, "--out", &d]);
            d
        })
        .collect();
    let out = tmp.path().join("cmp");
    ok(&["compare", "--runs", &dirs.join(","), "--out", out.to_str().unwrap()]);
    let rows = fs::read_to_string(out.join("work_efficiency.csv")).unwrap();
    let series: BTreeSet<&str> = rows.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series, gaits.into_iter().collect());
    for f in ["power.csv", "distance.csv", "torque_j5_j6.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let ranking = json(&out.join("ranking.json"));
    assert_eq!(ranking["rankings"]["distance"][0], "sidewinding");
    assert!(ranking["warnings"].as_array().unwrap().is_empty());

    let short = tmp.path().join("short").to_str().unwrap().to_string();
    ok(&["simulate", "--gait", "c_roll", "--duration", "5", "--out", &short]);
    let out2 = tmp.path().join("cmp2");
    ok(&["compare", "--runs", &format!("{},{short}", dirs[0]), "--out", out2.to_str().unwrap()]);
    let ranking = json(&out2.join("ranking.json"));
    let warnings = ranking["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("per second")));
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let out = |n: &str| d.join(n).to_str().unwrap().to_string();
    let code = |args: &[&str]| cli(args, &[]).status.code().unwrap();

    let bad = write_config(d, "bad.json", r#"{"duration":-1}"#);
    assert_eq!(code(&["simulate", "--config", &bad, "--out", &out("bad")]), 1);
    let unknown = write_config(d, "unknown.json", r#"{"not_a_key":1}"#);
    assert_eq!(code(&["validate", "--config", &unknown]), 1);
    assert_eq!(code(&["simulate", "--scenario", "moon_walk", "--out", &out("moon")]), 1);
    assert_eq!(code(&["compare", "--runs", &out("nothing"), "--out", &out("c")]), 1);
    let good = write_config(d, "good.json", r#"{"scenario":"lift_place"}"#);
    assert_eq!(code(&["validate", "--config", &good]), 0);

    let stiff = write_config(d, "stiff.json", r#"{"contact":{"k":1e9},"integrator":{"dt":0.001},"duration":1}"#);
    assert_eq!(code(&["simulate", "--config", &stiff, "--out", &out("stiff")]), 2);
    let manifest = json(&d.join("stiff/run_manifest.json"));
    assert!(manifest["error"].is_string());
    assert!(d.join("stiff").join(BOX_POSE).exists());

    let stiff_plan = write_config(
        d,
        "stiff_plan.json",
        r#"{"contact":{"k":1e9},"integrator":{"dt":0.001},"planner":{"budget":2,"horizon":0.5}}"#,
    );
    assert_eq!(code(&["plan", "--config", &stiff_plan, "--out", &out("stiff_plan")]), 3);
}
