use std::path::PathBuf;
use std::process::{Command, Output};

fn msekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msekit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("msekit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn datasets_lists_the_catalog() {
    let o = msekit(&["datasets"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("name,lists,n_obs,overlap,timeframe\n"));
    assert!(out.contains("uk,5,2744,"));
    assert_eq!(out.lines().count(), 6);
}

#[test]
fn unknown_dataset_fails_and_lists_names() {
    let o = msekit(&["estimate", "--data", "atlantis", "--estimator", "independence"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    for name in ["uk", "new-orleans", "netherlands", "western-us", "australia"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_estimator_lists_the_four() {
    let o = msekit(&["estimate", "--data", "uk", "--estimator", "magic"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("independence, sparsemse, dga, lcmcr"), "{err}");
}

#[test]
fn fixed_seed_replays_byte_for_byte() {
    let args = ["estimate", "--data", "australia", "--estimator", "independence", "--replicates", "200", "--seed", "11"];
    let a = msekit(&args);
    let b = msekit(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stderr(&a).contains("seed: 11"));
}

#[test]
fn missing_seed_is_reported() {
    let o = msekit(&["estimate", "--data", "australia", "--estimator", "dga"]);
    assert!(o.status.success());
    let err = stderr(&o);
    let seed: u64 = err.lines().find_map(|l| l.strip_prefix("seed: ")).unwrap().parse().unwrap();
    let replay = msekit(&["estimate", "--data", "australia", "--estimator", "dga", "--seed", &seed.to_string()]);
    assert_eq!(o.stdout, replay.stdout);
}

#[test]
fn output_writes_a_run_record() {
    let path = scratch("estimate.json");
    let p = path.to_str().unwrap();
    let o = msekit(&["estimate", "--data", "uk", "--estimator", "dga", "--seed", "5", "--format", "json", "--output", p]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let estimate: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(estimate["estimator"], "dga");
    assert_eq!(estimate["dataset"], "uk");
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{p}.run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 5);
    assert_eq!(record["fingerprint"], estimate["fingerprint"]);
    assert_eq!(record["outputs"][0], p);
    assert!(record["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(record["command_line"].as_array().unwrap().iter().any(|a| a == "--output"));
}

#[test]
fn lcmcr_draws_are_dumped() {
    let draws = scratch("draws.csv");
    let d = draws.to_str().unwrap();
    let o = msekit(&[
        "estimate", "--data", "australia", "--estimator", "lcmcr", "--chains", "2", "--iters", "400", "--thin", "10",
        "--seed", "3", "--draws", d,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&draws).unwrap();
    assert!(text.starts_with("chain,draw,n0,p0,kstar\n"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn simulated_table_round_trips_through_input() {
    let table = scratch("sim.csv");
    let t = table.to_str().unwrap();
    let o = msekit(&["simulate", "--n", "20000", "--inclusion", "0.3,0.5,0.4", "--seed", "9", "--output", t]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = msekit(&["estimate", "--input", t, "--estimator", "independence", "--replicates", "100", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let point: f64 = row[2].parse().unwrap();
    assert!((point / 20000.0 - 1.0).abs() < 0.05, "{point}");
}

#[test]
fn bias_summary_matches_closed_form() {
    let o = msekit(&["bias", "--a", "1", "--b", "8", "--lists", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[4] - 0.8).abs() < 1e-12);
    assert!((row[5] + 4.0 / 9.0).abs() < 1e-12);
}

#[test]
fn bias_curve_renders_svg() {
    let o = msekit(&["bias", "--curve", "--p0", "0.9", "--lists", "2,3", "--precision", "0.5:100:log", "--points", "5", "--format", "svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("<svg"));
    assert!(out.trim_end().ends_with("</svg>"));
}

#[test]
fn graph_counts() {
    for (lists, expected) in [(3, 8), (4, 61)] {
        let o = msekit(&["graphs", "--lists", &lists.to_string(), "--include-complete"]);
        assert!(o.status.success());
        assert_eq!(stdout(&o).lines().count() - 1, expected);
    }
}

#[test]
fn sweep_parses_range_grids() {
    let o = msekit(&["sweep", "--data", "australia", "--kind", "dga-beta", "--grid", "0.2:0.8", "--points", "3", "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let values: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(values, ["0.2", "0.5", "0.8"]);
}

#[test]
fn bad_grid_is_rejected() {
    let o = msekit(&["sweep", "--data", "uk", "--kind", "dga-kappa", "--grid", "0:1:cubic"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cubic"));
}

#[test]
fn unsupported_format_is_an_error() {
    let o = msekit(&["graphs", "--lists", "3", "--format", "svg"]);
    assert!(!o.status.success());
}
