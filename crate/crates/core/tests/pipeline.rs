use greyfit::grey::{fit_grey, GreyFitConfig};
use greyfit::matching::{fit_matching, forecast_matching};
use greyfit::scenario::{bundled, parse_sweep};
use greyfit::simulate::{
    add_noise, generate_clean, run_monte_carlo, summarize, Estimator, ScenarioConfig, Truth, FAILURE_NAME,
};
use greyfit::ModelSpec;
use proptest::prelude::*;

fn clean(truth: Truth, t_end: f64, h: f64) -> greyfit::TimeSeries {
    generate_clean(&ScenarioConfig::new("clean", truth, t_end, h, 0.0)).unwrap()
}

fn max_rel(est: &[f64], truth: &[f64]) -> f64 {
    est.iter()
        .zip(truth)
        .map(|(e, t)| (e - t).abs() / t.abs())
        .fold(0.0, f64::max)
}

#[test]
fn lotka_volterra_noise_free_recovery() {
    let truth = Truth::lotka_volterra_default();
    let ts = clean(truth, 5.0, 0.01);
    let fit = fit_matching(&ts, &truth.spec()).unwrap();
    let err = max_rel(&truth.named_estimates(&fit.params), &truth.true_values());
    assert!(err < 0.01, "{err}");
    let fc = forecast_matching(&fit, 0).unwrap();
    assert!(fc.is_complete());
    let gap = (&fc.values - ts.values()).amax();
    assert!(gap < 0.01 * ts.values().amax(), "{gap}");
}

#[test]
fn grey_and_matching_agree_on_clean_verhulst() {
    let truth = Truth::verhulst_default();
    let ts = clean(truth, 4.0, 0.01);
    let m = fit_matching(&ts, &ModelSpec::verhulst()).unwrap();
    let g = fit_grey(&ts, &ModelSpec::verhulst(), &GreyFitConfig::default()).unwrap();
    let tv = truth.true_values();
    assert!(max_rel(&truth.named_estimates(&m.params), &tv) < 1e-4);
    assert!(max_rel(&truth.named_estimates(&g.params), &tv) < 0.02);
    let fm = forecast_matching(&m, 5).unwrap();
    assert_eq!(fm.values.nrows(), ts.len() + 5);
}

#[test]
fn bundled_sweep_runs_end_to_end() {
    let mut sweep = parse_sweep(bundled("lv-n-sweep").unwrap()).unwrap();
    sweep.scenarios.iter_mut().for_each(|s| s.replications = 8);
    let report = run_monte_carlo(&sweep.scenarios, Some(2)).unwrap();
    assert_eq!(report.scenarios.len(), 4);
    let rows = summarize(&report).unwrap();
    for s in &sweep.scenarios {
        for est in &s.estimators {
            let ok = report
                .records
                .iter()
                .filter(|r| r.scenario_id == s.id && r.estimator == *est && r.name == "a1")
                .count();
            assert_eq!(ok + report.failures(&s.id, *est).len(), 8);
        }
    }
    assert!(rows.iter().all(|r| r.count + r.failures == 8));
    assert!(report
        .records
        .iter()
        .filter(|r| r.name == FAILURE_NAME)
        .all(|r| r.value.is_none() && r.status != "ok"));
}

#[test]
fn matching_is_consistent_under_mild_noise() {
    let truth = Truth::verhulst_default();
    let ts = add_noise(&clean(truth, 4.0, 0.01), 0.01, 3);
    let fit = fit_matching(&ts, &ModelSpec::verhulst()).unwrap();
    assert!(max_rel(&truth.named_estimates(&fit.params), &truth.true_values()) < 0.05);
    assert!(Estimator::parse(Estimator::IntegralMatching.label()) == Some(Estimator::IntegralMatching));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recovery_holds_across_verhulst_truths(a in 0.5f64..1.5, b in -0.8f64..-0.2, eta in 0.2f64..0.8) {
        let truth = Truth::Verhulst { a, b, eta };
        let ts = clean(truth, 4.0, 0.01);
        let fit = fit_matching(&ts, &truth.spec()).unwrap();
        let err = max_rel(&truth.named_estimates(&fit.params), &truth.true_values());
        prop_assert!(err < 1e-3, "{}", err);
    }
}
