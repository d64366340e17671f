use nsgap_cli::{run_with, EXIT_OK, EXIT_UNKNOWN_SUBCOMMAND, EXIT_VALIDATION};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("nsgap").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn run_json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, EXIT_OK, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

fn value(report: &Value, name: &str) -> f64 {
    report["result"]["values"][name]["value"].as_f64().unwrap_or_else(|| panic!("no value {name} in {report}"))
}

fn provenance<'a>(report: &'a Value, name: &str) -> &'a str {
    report["result"]["values"][name]["provenance"].as_str().unwrap()
}

#[test]
fn reports_carry_the_envelope() {
    let r = run_json(&["--seed", "5", "gap", "--chain", "flip", "--space", "two-point", "--p", "1"]);
    for key in ["tool", "version", "command", "config", "config_hash", "seed", "result"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["command"], "gap");
    assert_eq!(r["seed"], 5);
    assert_eq!(r["config"]["chain"], "flip");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(value(&r, "gamma"), 0.5);
    assert_eq!(provenance(&r, "gamma"), "brute_force");
}

#[test]
fn every_reported_value_has_a_known_provenance() {
    let reports = [
        run_json(&["gap", "--chain", "cycle:5", "--space", "lp:2:3"]),
        run_json(&["embed", "--metric", "cycle:4"]),
        run_json(&["john", "--space", "lp:inf:3"]),
        run_json(&["expander", "--n", "16"]),
        run_json(&["bounds", "avg-distortion", "--n", "1024", "--d", "4", "--gamma", "2"]),
    ];
    for r in &reports {
        let values = r["result"]["values"].as_object().unwrap();
        assert!(!values.is_empty());
        for (k, v) in values {
            let p = v["provenance"].as_str().unwrap();
            assert!(["exact", "brute_force", "heuristic", "fitted"].contains(&p), "{k}: {p}");
        }
    }
}

#[test]
fn hilbert_gap_is_exact_under_auto() {
    let r = run_json(&["gap", "--chain", "cycle:5", "--space", "lp:2:3"]);
    assert_eq!(provenance(&r, "gamma"), "exact");
    assert!((value(&r, "gamma") - value(&r, "gamma_classical")).abs() < 1e-12);
}

#[test]
fn embed_cycle_at_half_snowflake_is_isometric_on_average() {
    let r = run_json(&["embed", "--metric", "cycle:4", "--theta", "0.5", "--mu", "uniform"]);
    assert!((value(&r, "D_achieved") - 1.0).abs() < 1e-5);
    assert!(value(&r, "D_lower_bound") <= value(&r, "D_achieved") + 1e-12);
    assert_eq!(provenance(&r, "D_achieved"), "heuristic");
}

#[test]
fn embed_csv_dumps_pairs() {
    let (code, out, _) = run(&["--format", "csv", "embed", "--metric", "complete:4"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "i,j,distance,snowflaked,embedded");
    assert_eq!(lines.len(), 1 + 6);
}

#[test]
fn generic_csv_flattens_the_report() {
    let (code, out, _) = run(&["--format", "csv", "bounds", "tstar", "--lambda2", "0.5", "--dx", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("path,value\n"));
    assert!(out.contains("result.values.tstar.value,5"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).0, EXIT_UNKNOWN_SUBCOMMAND);
    assert_eq!(run(&[]).0, EXIT_VALIDATION);
    assert_eq!(run(&["gap", "--chain", "flip"]).0, EXIT_VALIDATION);
    assert_eq!(run(&["gap", "--chain", "/no/such/file", "--space", "two-point"]).0, EXIT_VALIDATION);
    assert_eq!(run(&["gap", "--chain", "cycle:3", "--space", "lp:0.5:2"]).0, EXIT_VALIDATION);
    assert_eq!(run(&["gap-plus", "--chain", "cycle:3", "--space", "lp:3:2"]).0, EXIT_VALIDATION);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
    assert_eq!(run(&["--version"]).0, EXIT_OK);
}

#[test]
fn checks_report_pass_or_invalid_input() {
    assert_eq!(run(&["verify-duality", "--metric", "cycle:6", "--chain", "lazy-cycle:6"]).0, EXIT_OK);
    assert_eq!(run(&["rayleigh-check", "--mode", "sandwich", "--chain", "cycle:3", "--space", "cycle:4"]).0, EXIT_OK);
    let bad_eta = ["rayleigh-check", "--mode", "pointwise", "--chain", "lazy-cycle:4", "--space", "lp:inf:2", "--eta", "-1", "--trials", "5"];
    assert_eq!(run(&bad_eta).0, EXIT_VALIDATION);
}

#[test]
fn reports_are_deterministic_per_seed() {
    let args = ["--seed", "11", "rayleigh-check", "--chain", "cycle:4", "--space", "lp:3:2", "--trials", "200"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.0, EXIT_OK);
    assert_eq!(a.1, b.1);
    let other = run(&["--seed", "12", "rayleigh-check", "--chain", "cycle:4", "--space", "lp:3:2", "--trials", "200"]);
    let (ra, ro): (Value, Value) = (serde_json::from_str(&a.1).unwrap(), serde_json::from_str(&other.1).unwrap());
    assert_eq!(ra["config"], ro["config"]);
    assert_ne!(ra["config_hash"], ro["config_hash"]);
}

#[test]
fn thread_cap_does_not_change_reports() {
    let args = ["--seed", "3", "rayleigh-check", "--chain", "lazy-cycle:5", "--space", "cycle:4", "--trials", "300"];
    let free = run(&args).1;
    std::env::set_var(nsgap_cli::THREADS_ENV, "1");
    let capped = run(&args).1;
    std::env::remove_var(nsgap_cli::THREADS_ENV);
    assert_eq!(free, capped);
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let (code, out, _) = run(&["john", "--space", "lp:1:2", "--output", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((value(&r, "D_X") - 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn chain_and_space_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    let space = dir.path().join("space.json");
    std::fs::write(&chain, r#"{"rows": [[0.0, 1.0], [1.0, 0.0]]}"#).unwrap();
    std::fs::write(&space, r#"{"kind": "finite", "dist": [[0.0, 1.0], [1.0, 0.0]]}"#).unwrap();
    let r = run_json(&["gap", "--chain", chain.to_str().unwrap(), "--space", space.to_str().unwrap(), "--p", "2"]);
    assert_eq!(value(&r, "gamma"), 0.5);
}

#[test]
fn calibration_round_trip_tags_bounds_as_fitted() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.json");
    let cal = cal.to_str().unwrap();
    let fit = run_json(&["calibrate", "--constant", "C_thm4", "--count", "6", "--max-n", "4", "--max-dim", "3", "--calibration", cal]);
    let c = value(&fit, "C_thm4");
    assert!(c > 0.0 && c.is_finite());
    assert_eq!(provenance(&fit, "C_thm4"), "fitted");
    let b = run_json(&["bounds", "thm4", "--lambda2", "0.5", "--dx", "2", "--calibration", cal]);
    assert_eq!(provenance(&b, "bound"), "fitted");
    assert!((value(&b, "bound") - c * 3f64.ln() / 0.5).abs() < 1e-12);
    let explicit = run_json(&["bounds", "thm4", "--lambda2", "0.5", "--dx", "2", "--c", "1"]);
    assert_eq!(provenance(&explicit, "bound"), "exact");
}

#[test]
fn single_instance_family_fits_its_own_ratio() {
    let r = run_json(&["calibrate", "--constant", "C_pq", "--count", "1"]);
    let inst = &r["result"]["detail"]["instances"];
    assert_eq!(inst.as_array().unwrap().len(), 1);
    assert_eq!(value(&r, "C_pq"), inst[0]["ratio"].as_f64().unwrap());
}

#[test]
fn empty_family_is_a_validation_error() {
    let (code, _, err) = run(&["calibrate", "--constant", "C_pq", "--count", "0"]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("empty"));
}

#[test]
fn bound_worked_values() {
    let d = run_json(&["bounds", "dimension", "--n", "1024", "--d", "4", "--gamma", "1", "--distortion", "1", "--c-q", "1"]);
    assert!((value(&d, "bound") - 5f64.exp()).abs() < 1e-9);
    let a = run_json(&["bounds", "avg-distortion", "--n", "1024", "--d", "4", "--gamma", "2"]);
    assert!((value(&a, "bound") - 5.0 / 2f64.sqrt()).abs() < 1e-12);
    let c = run_json(&["bounds", "coarse", "--gamma", "2", "--omega1", "1", "--n", "1024", "--d", "4"]);
    assert!((value(&c, "max_modulus") - 2.0).abs() < 1e-12);
}

#[test]
fn expander_reports_spectrum_and_graph() {
    let r = run_json(&["--seed", "2", "expander", "--n", "32", "--emit-graph"]);
    assert_eq!(value(&r, "d"), 3.0);
    assert!(value(&r, "lambda2") < 1.0);
    assert_eq!(r["result"]["detail"]["edges"], 48);
    assert!(r["result"]["detail"]["graph"].is_object());
    let odd = run(&["expander", "--n", "7", "--d", "3"]);
    assert_eq!(odd.0, EXIT_VALIDATION);
}

#[test]
fn smoke_suite_passes() {
    let r = run_json(&["suite", "--name", "smoke"]);
    let criteria = r["result"]["detail"]["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 9);
    assert!(criteria.iter().all(|c| c["passed"] == true));
}

#[test]
fn fitted_c_q_is_the_family_minimum() {
    let fit = run_json(&["--seed", "4", "calibrate", "--constant", "c_q", "--count", "8", "--max-n", "16"]);
    let c = value(&fit, "c_q");
    for inst in fit["result"]["detail"]["instances"].as_array().unwrap() {
        let n = inst["n"].as_u64().unwrap() as usize;
        let ratio = inst["ratio"].as_f64().unwrap();
        assert!(c <= ratio + 1e-12, "fit {c} above instance ratio {ratio} (n = {n})");
    }
}
