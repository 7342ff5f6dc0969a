use std::process::{Command, Output};

use serde_json::Value;
use tibs::bounds::{BoundVariant, ErrorSpec, Plan};

fn tibs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tibs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn plan_reports_thresholds() {
    let o = tibs(&["plan", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["n_max"], 139);
    assert_eq!(v["k_threshold"], 42);
    assert_eq!(v["chernoff_hoeffding_n"], 150);
    assert_eq!(v["variant"], "simplified");
    assert_eq!(v["overridden"], false);

    let human = stdout(&tibs(&["plan", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1"]));
    assert!(human.contains("n_max (max trials)      139"), "{human}");
}

#[test]
fn plan_gain_for_tiny_alpha() {
    let o = tibs(&["plan", "--alpha", "1e-6", "--beta", "1e-2", "--delta", "1e-3", "--format", "json"]);
    let g = json(&o)["gain_ratio"].as_f64().unwrap();
    assert!((2375.0..=2625.0).contains(&g), "{g}");
}

#[test]
fn plan_csv_has_header_and_row() {
    let o = tibs(&["plan", "--alpha", "0.05", "--beta", "0.4", "--delta", "0.05", "--variant", "exact", "--format", "csv"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), row.len());
    let plan = Plan::new(ErrorSpec::new(0.05, 0.4, 0.05).unwrap(), BoundVariant::Exact).unwrap();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("n_max"), plan.n_max().to_string());
    assert_eq!(col("variant"), "exact");
}

#[test]
fn invalid_specs_are_usage_errors() {
    let o = tibs(&["plan", "--alpha", "0.5", "--beta", "0.5", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    for args in [
        &["plan", "--alpha", "0.1", "--beta", "0.5"][..],
        &["plan", "--alpha", "0.1", "--beta", "0.5", "--delta", "1.5"],
        &["plan", "--alpha", "0.45", "--beta", "0.9", "--delta", "0.1"],
        &["plan", "--alpha", "0.1", "--beta", "1.5", "--delta", "0.1", "--variant", "loose"],
        &["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1"],
        &["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--p-true", "1.0"],
        &["estimate", "--rule", "ibs", "--beta", "0.5", "--delta", "0.1", "--p-true", "0.5"],
        &["verify", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--grid", "0.5:0.1:0.1"],
        &["bogus"],
    ] {
        assert_eq!(tibs(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn table_human_and_csv() {
    let o = tibs(&["table"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for n in ["3,800,452", "380,045,123", "38,004,512,298", "3,800,451,229,772", "380,045,122,977,105"] {
        assert!(text.contains(n), "{n} missing from\n{text}");
    }
    let csv = stdout(&tibs(&["table", "--format", "csv"]));
    assert!(csv.lines().any(|l| l == "1e-7,380045122977105"), "{csv}");
    let v = json(&tibs(&["table", "--format", "json"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn estimate_is_deterministic() {
    let args = ["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--p-true", "0.3", "--seed", "42", "--format", "json"];
    let a = tibs(&args);
    let b = tibs(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["rule"], "truncated");
    assert_eq!(v["n_max"], 139);
    let m = v["m"].as_u64().unwrap();
    let s = v["successes"].as_u64().unwrap();
    assert_eq!(v["p_hat"].as_f64().unwrap(), s as f64 / m as f64);
    let other = tibs(&["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--p-true", "0.3", "--seed", "43", "--format", "json"]);
    assert_eq!(other.status.code(), Some(0));
}

#[test]
fn estimate_fixed_and_ibs_rules() {
    let v = json(&tibs(&["estimate", "--rule", "fixed", "--n", "107", "--p-true", "0.5", "--format", "json"]));
    assert_eq!(v["m"], 107);
    assert_eq!(v["stop_reason"], "length_exit");

    // without --n the fixed rule uses the exact-bound sample size
    let v = json(&tibs(&["estimate", "--rule", "fixed", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--p-true", "0.5", "--format", "json"]));
    assert_eq!(v["m"], 107);

    let v = json(&tibs(&[
        "estimate", "--rule", "ibs", "--beta", "0.5", "--delta", "0.1", "--cap", "100000", "--p-true", "0.5", "--seed", "7", "--format", "json",
    ]));
    assert_eq!(v["successes"], 42);
    assert_eq!(v["truncated"], false);
    assert_eq!(v["stop_reason"], "height_exit");
}

#[test]
fn estimate_ibs_cap_warns() {
    let o = tibs(&["estimate", "--rule", "ibs", "--beta", "0.5", "--delta", "0.1", "--cap", "10", "--p-true", "0.01", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["truncated"], true);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn estimate_from_external_command() {
    let o = tibs(&["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--cmd", "sh -c 'while :; do echo 1; done'", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!((v["m"].as_u64(), v["successes"].as_u64()), (Some(42), Some(42)));
    assert!(v["source"].as_str().unwrap().starts_with("external("));
    assert!(v["seed"].is_null());
}

#[test]
fn source_failures_exit_three() {
    let o = tibs(&["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--cmd", "printf '1\\n0\\n'"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("trials consumed: 2"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let o = tibs(&["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--cmd", "echo yes"]);
    assert_eq!(o.status.code(), Some(3));

    let o = tibs(&["estimate", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--cmd", "/nonexistent/simulator"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_exact_passes_for_every_variant() {
    for variant in ["exact", "simplified", "loose"] {
        let o = tibs(&["verify", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--variant", variant]);
        assert_eq!(o.status.code(), Some(0), "{variant}: {}", stdout(&o));
        assert!(stdout(&o).lines().last().unwrap().starts_with("PASS:"));
    }
}

#[test]
fn verify_json_round_trips() {
    let o = tibs(&["verify", "--alpha", "0.05", "--beta", "0.4", "--delta", "0.05", "--grid", "0.1,0.5,0.9", "--format", "json"]);
    let v = json(&o);
    assert_eq!(v["verdict"], "PASS");
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let plan = Plan::new(ErrorSpec::new(0.05, 0.4, 0.05).unwrap(), BoundVariant::Simplified).unwrap();
    let crit = tibs::oracle::CriterionSpec::mixed(0.05, 0.4).unwrap();
    for r in reports {
        let p = r["p_true"].as_f64().unwrap();
        let direct = tibs::oracle::exact_walk_coverage(&plan, p, &crit, &Default::default()).unwrap();
        assert_eq!(r["coverage"].as_f64().unwrap(), direct.coverage);
        assert_eq!(r["expected_m"].as_f64().unwrap(), direct.expected_m);
    }
}

#[test]
fn verify_empirical_passes() {
    let o = tibs(&[
        "verify", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--method", "empirical", "--replications", "10000", "--master-seed", "1",
        "--grid", "0.1:0.9:0.1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_flags_undersized_override() {
    let plan = Plan::new(ErrorSpec::new(0.1, 0.5, 0.1).unwrap(), BoundVariant::Simplified).unwrap();
    let length = format!("{}", 0.3 * plan.length());
    let o = tibs(&["verify", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--override-length", &length]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).lines().last().unwrap().starts_with("FAIL:"));
    assert!(stdout(&o).contains("[OVERRIDDEN]"));
    assert!(stderr(&o).contains("NO coverage guarantee"));
}

#[test]
fn override_below_bound_is_rejected_in_library_but_allowed_in_cli() {
    let spec = ErrorSpec::new(0.1, 0.5, 0.1).unwrap();
    assert!(Plan::with_budget(spec, BoundVariant::Simplified, 50.0, 50.0).is_err());
    let v = json(&tibs(&["plan", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--override-length", "50", "--format", "json"]));
    assert_eq!(v["n_max"], 51);
    assert_eq!(v["overridden"], true);
}

#[test]
fn in_process_runner_matches_binary() {
    let args = ["tibs", "plan", "--alpha", "0.1", "--beta", "0.5", "--delta", "0.1", "--format", "json"];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(tibs::cli::run(args, &mut out, &mut err), 0);
    assert_eq!(out, tibs(&args[1..]).stdout);
}

#[test]
fn help_and_version_exit_zero() {
    let o = tibs(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["plan", "table", "estimate", "verify"] {
        assert!(stdout(&o).contains(sub));
    }
}
