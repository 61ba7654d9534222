use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbar-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn fbar_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "1,2,3,1,2,3\n");
    let o = run(&["sym", "fbar", "--file-a", &a, "--file-b", &a]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn fbar_of_shifted_words() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "1,2,3,4");
    let b = write(dir.path(), "b.csv", "2,3,4,1");
    let o = run(&["sym", "fbar", "--file-a", &a, "--file-b", &b]);
    assert_eq!(stdout(&o).trim(), "0.25");
    let out = dir.path().join("out");
    let o = run(&["sym", "fbar", "--file-a", &a, "--file-b", &b, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sym-fbar.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["hamming"], 1.0);
}

#[test]
fn schedule_alpha_column_is_monotone() {
    let o = run(&["tower", "schedule", "--law", "(n+1)^-0.25", "--steps", "300"]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["n", "size", "alpha", "delta", "seed"]);
    let alpha: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(alpha.len(), 301);
    assert!(alpha.windows(2).all(|w| w[1] > w[0]));
    assert!(alpha.iter().all(|a| *a < 1.0));
}

#[test]
fn missing_config_exits_two() {
    let o = run(&["--config", "/definitely/not/here.json", "rot", "build"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));
}

#[test]
fn near_resonance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"[{"k": [1, 0], "re": 0.5, "im": 0.0}, {"k": [-1, 0], "re": 0.5, "im": 0.0}]"#);
    let o = run(&["poly", "solve-cohomological", "--file", &p, "--floor", "10"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["poly", "solve-cohomological", "--file", &p, "--points", "200"]);
    let v = json(&o);
    assert!(v["report"]["max_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn reports_carry_schema_and_seed() {
    let o = run(&["--seed", "99", "rot", "build"]);
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 99);
    assert_eq!(v["report"]["convergents"][1]["q_x"], "1");
}

#[test]
fn config_file_drives_rotation_and_roof() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"rotation": {"pq_x": [3, 1365], "pq_y": [6]}, "roof": {"depth": 1, "plateaus": [{"n": 1, "mu": 0.05}]}, "seed": 5}"#,
    );
    let v = json(&run(&["--config", &cfg, "roof", "verify-plateau"]));
    assert_eq!(v["seed"], 5);
    assert_eq!(v["report"]["terms"][0]["q"], 3);
    assert_eq!(v["report"]["terms"][0]["inv_eta"], 12);

    let o = run(&["--config", &cfg, "roof", "build"]);
    let roof = write(dir.path(), "roof.json", &stdout(&o));
    let cfg2 = write(dir.path(), "run2.json", &format!(r#"{{"rotation": {{"pq_x": [3, 1365], "pq_y": [6]}}, "roof": {{"file": "{roof}"}}}}"#));
    let a = json(&run(&["--config", &cfg, "flow", "orbit", "--point", "0.1,0.2,0.3", "--steps", "5"]));
    let b = json(&run(&["--config", &cfg2, "flow", "orbit", "--point", "0.1,0.2,0.3", "--steps", "5"]));
    assert_eq!(a["report"], b["report"]);

    let bad = write(dir.path(), "bad.json", r#"{"rotaton": {}}"#);
    assert_eq!(run(&["--config", &bad, "rot", "build"]).status.code(), Some(2));
}

#[test]
fn unit_roof_matches_translation() {
    let v = json(&run(&["flow", "constant-check", "--points", "2000"]));
    assert_eq!(v["report"]["pass"], true);
}

#[test]
fn flow_orbit_csv_columns() {
    let o = run(&["flow", "orbit", "--point", "0.1,0.2,0.3", "--steps", "4", "--emit", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,x,y,z,seed"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn product_on_translation_checks_levels() {
    let v = json(&run(&[
        "tower",
        "product",
        "--plus",
        "0,0.3,0,1,0,1",
        "--plus-height",
        "3",
        "--minus",
        "0,1,0,0.45,0,1",
        "--minus-height",
        "2",
        "--translation",
        "0.33333333333333333,0.5,0",
        "--samples",
        "20000",
    ]));
    assert_eq!(v["report"]["exhaustive"]["levels"], 6);
    assert_eq!(v["report"]["exhaustive"]["overlapping"].as_array().unwrap().len(), 0);
    let o = run(&["tower", "product", "--plus", "0,0.3,0,1,0,1", "--plus-height", "4", "--minus", "0,1,0,0.45,0,1", "--minus-height", "2", "--translation", "0.25,0.5,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn name_is_a_single_csv_line() {
    let o = run(&["sym", "name", "--point", "0.1,0.2,0.3", "--n", "6", "--translation", "0.5,0,0"]);
    assert_eq!(stdout(&o), "1,5,1,5,1,5\n");
}

#[test]
fn tower_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.json", r#"{"base": "0,0.1,0,1,0,1", "height": 9}"#);
    let v = json(&run(&["tower", "verify", "--tower", &t, "--translation", "0.1,0,0", "--samples", "1000"]));
    assert_eq!(v["report"]["pass"], true);
    let t = write(dir.path(), "t2.json", r#"{"base": "0,0.1,0,1,0,1", "height": 11}"#);
    let v = json(&run(&["tower", "verify", "--tower", &t, "--translation", "0.1,0,0", "--samples", "1000"]));
    assert_eq!(v["report"]["pass"], false);
    assert_eq!(run(&["tower", "verify", "--base", "0,1,0,1,0,1"]).status.code(), Some(2));
}

#[test]
fn criterion_reports_margins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"rotation": {"pq_x": [3, 4, 314], "pq_y": [6, 5]}, "roof": {"depth": 2, "plateaus": [{"n": 1, "mu": 0.02}]}}"#,
    );
    let v = json(&run(&["--config", &cfg, "diag", "criterion", "--n", "2", "--m", "10,100", "--grid", "128"]));
    assert_eq!(v["report"]["margins"].as_array().unwrap().len(), 2);
    assert_eq!(v["report"]["kind"], "cosine");
}

#[test]
fn correlation_csv_has_one_row_per_lag() {
    let o = run(&["diag", "correlation", "--a", "0,0.5,0,1,0,1", "--b", "0,0.5,0,1,0,1", "--lags", "1,2,3", "--samples", "1e4", "--emit", "csv", "--translation", "0.5,0,0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("1,0e0,"));
    let joint: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((joint - 0.5).abs() < 0.02, "{joint}");
}
