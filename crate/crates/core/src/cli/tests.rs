use super::*;

fn cfg(text: &str) -> RunConfig {
    RunConfig::from_json(text).unwrap()
}

fn predicted(text: &str) -> PredictionRecord {
    predictions(&cfg(text)).unwrap().remove(0)
}

#[test]
fn predict_examples() {
    let r = predicted(r#"{"functions":[{"family":"fejer","sigma":1.5}],"n":2,"quantities":["C"]}"#);
    assert!((r.value - (0.75 - 1.0 / 432.0)).abs() < 1e-6, "{r:?}");
    assert_eq!(r.method, Method::ClosedFormQuadrature);
    assert_eq!(r.n, 2);

    let r = predicted(r#"{"functions":[{"family":"fejer"}],"n":3,"quantities":["C0"]}"#);
    assert_eq!(r.value, 0.0);

    let r = predicted(r#"{"functions":[{"family":"fejer","sigma":1.5}],"quantities":["C_even"]}"#);
    assert!((r.value + 1.0 / 12.0).abs() < 1e-6, "{r:?}");
}

#[test]
fn predict_output_round_trips() {
    let c = cfg(r#"{"functions":[{"family":"fejer","sigma":0.9},{"family":"cubic_bspline","sigma":1.2}],"quantities":["C","C0","C2"]}"#);
    let out = run_predict(&c).unwrap();
    let back: Vec<PredictionRecord> = serde_json::from_str(&out.text).unwrap();
    assert_eq!(back, predictions(&c).unwrap());
    assert!(back.iter().all(|r| r.config_hash == c.config_hash()));
    assert_eq!(run_predict(&c).unwrap().text, out.text);
}

#[test]
fn zero_function_compares_exactly() {
    let c = cfg(r#"{"functions":[{"family":"zero"}],"n":2,"quantities":["C","C_even","C_odd"],"ensemble_N":[3],"samples":200}"#);
    let cmp = comparison(&c).unwrap();
    assert_eq!(cmp.rows.len(), 3);
    for r in &cmp.rows {
        assert_eq!((r.prediction, r.mc_mean, r.mc_stderr, r.z), (0.0, 0.0, 0.0, 0.0), "{r:?}");
    }
    assert!(cmp.passed);
}

#[test]
fn gaussian_regime_comparison_passes() {
    let c = cfg(r#"{"functions":[{"family":"fejer","sigma":0.9}],"n":2,"ensemble_N":[40],"samples":10000,"seed":11}"#);
    let cmp = comparison(&c).unwrap();
    let r = &cmp.rows[0];
    assert_eq!(r.ensemble, Group::OFull);
    assert!((r.prediction - 0.27).abs() < 1e-9);
    assert!(r.z.abs() <= 3.0, "{r:?}");
}

#[test]
fn sigma_sweep_is_monotone() {
    let c = cfg(r#"{"functions":[{"family":"fejer"}],"n":2,"output":{"format":"csv"}}"#);
    let out = run_sweep(&c, &parse_grid("0.5:1.5:0.5").unwrap()).unwrap();
    let mut reader = csv::Reader::from_reader(out.text.as_bytes());
    let values: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| w[0] < w[1]), "{values:?}");
    assert!((values[0] - 0.25 / 3.0).abs() < 1e-9);
}

#[test]
fn csv_floats_keep_seventeen_digits() {
    assert_eq!(csv_float(0.1), "1.0000000000000001e-1");
    assert_eq!(csv_float(0.1).parse::<f64>().unwrap(), 0.1);
}

#[test]
fn grids_parse_inclusively() {
    assert_eq!(parse_grid("0.5:1.5:0.5").unwrap(), vec![0.5, 1.0, 1.5]);
    assert_eq!(parse_grid("1:1:0.1").unwrap(), vec![1.0]);
    assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
    for bad in ["1:0:0.1", "0:1:0", "0:1", "a:b:c"] {
        assert!(parse_grid(bad).is_err(), "{bad}");
    }
}

#[test]
fn sweeps_reject_custom_functions_and_large_support() {
    let c = cfg(r#"{"functions":[{"breakpoints":[-1,1],"pieces":[[1]]}],"n":2}"#);
    assert!(matches!(sweep(&c, &[1.0]), Err(Error::Config(_))));
    let c = cfg(r#"{"functions":[{"family":"fejer"}],"n":2}"#);
    assert!(matches!(sweep(&c, &[1.0, 2.0]), Err(Error::Config(_))));
}

#[test]
fn quantities_without_simulation_are_config_errors() {
    let c = cfg(r#"{"functions":[{"family":"fejer"}],"n":2,"quantities":["C2"],"samples":100}"#);
    let e = comparison(&c).unwrap_err();
    assert_eq!(exit_code(&e), EXIT_CONFIG);
}

#[test]
fn exit_codes_follow_error_kinds() {
    assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    assert_eq!(exit_code(&Error::SupportCondition("x".into())), EXIT_CONFIG);
    assert_eq!(
        exit_code(&Error::EstimateInvalid { failures: 5, attempts: 100 }),
        EXIT_NUMERICAL
    );
    assert_eq!(
        exit_code(&Error::Accuracy { value: 0.0, error: 1.0, tol: 1e-9 }),
        EXIT_NUMERICAL
    );
}

#[test]
fn validation_reports_marginal_for_rank_one() {
    let v = validation(EnsembleKind::so_even(1), 20_000, 3, Sampler::Matrix).unwrap();
    assert!(v.passed, "{v:?}");
    assert!(v.diagnostics.marginal.is_some());
    let v = validation(EnsembleKind::usp(3), 500, 3, Sampler::Matrix).unwrap();
    assert!(v.passed && v.diagnostics.marginal.is_none(), "{v:?}");
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["kind"]["group"], "usp");
}
