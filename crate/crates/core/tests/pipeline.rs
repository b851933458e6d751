use uncertain_eval::io;
use uncertain_eval::simulate::{draw_trials, generate_population, PopulationSpec};
use uncertain_eval::strategies::{
    run_strategy_comparison, DenoiseConfig, OmissionConfig, PredictorNoiseConfig, Resampler,
    StrategyInputs, StrategyPlan,
};
use uncertain_eval::{
    barrier_distribution, distinguishability_test, fit_uncertainty, rmse_distribution, McConfig,
    RatingScale, SigmaFallback,
};

fn spec() -> PopulationSpec {
    PopulationSpec {
        n_users: 40,
        n_items: 30,
        scale: RatingScale::new(1.0, 5.0, None).unwrap(),
        sigma_lo: 0.3,
        sigma_hi: 1.2,
        density: 0.5,
        prediction_bias_sd: 0.3,
        seed: None,
    }
}

#[test]
fn simulate_csv_fit_and_score() {
    let spec = PopulationSpec {
        prediction_bias_sd: 1.0,
        ..spec()
    };
    let truth = generate_population(&spec, 11).unwrap();
    let obs = draw_trials(&truth, 30, false, 12).unwrap();
    assert_eq!(truth.dataset.len(), 600);

    let mut buf = Vec::new();
    io::write_observations(&mut buf, &obs).unwrap();
    let reread = io::read_observations(buf.as_slice(), "obs").unwrap();
    assert_eq!(reread.observations(), obs.observations());

    let fitted = fit_uncertainty(&reread, SigmaFallback::Pooled).unwrap();
    let mut buf = Vec::new();
    io::write_feedback(&mut buf, &fitted).unwrap();
    let fitted = io::read_feedback(buf.as_slice(), "fb").unwrap();
    assert_eq!(fitted.keys().collect::<Vec<_>>(), truth.dataset.keys().collect::<Vec<_>>());

    // 30 trials per pair: the barrier computed from fitted sigmas is close to
    // the one from the true sigmas.
    let b_true = barrier_distribution(&truth.dataset).unwrap();
    let b_fit = barrier_distribution(&fitted).unwrap();
    assert!((b_fit.mean() - b_true.mean()).abs() / b_true.mean() < 0.05);

    let preds = truth.predictions.as_ref().unwrap();
    let dist = rmse_distribution(&fitted, preds, &McConfig::new(2000, 3)).unwrap();
    let v = distinguishability_test(dist.mean, b_fit.mean(), &b_fit).unwrap();
    // Prediction bias of sd 1 puts the RMSE well above the barrier.
    assert!(dist.mean > b_fit.mean());
    assert!(v.distinguishable, "{v:?}");
}

#[test]
fn all_strategies_on_simulated_data() {
    let truth = generate_population(&spec(), 21).unwrap();
    let obs = draw_trials(&truth, 5, false, 22).unwrap();
    let preds = truth.predictions.as_ref().unwrap();
    let plan = StrategyPlan {
        denoise: Some(DenoiseConfig {
            seed: 5,
            ..DenoiseConfig::new(1.0, Resampler::ReplaceWithMedian)
        }),
        predictor_noise: Some(PredictorNoiseConfig {
            tau: 0.5,
            mc: McConfig::new(500, 5),
        }),
        omission: Some(OmissionConfig { alpha: 0.05 }),
    };
    let inputs = StrategyInputs {
        observations: Some(&obs),
        feedback: Some(&truth.dataset),
        predictions: preds,
    };
    let reports = run_strategy_comparison(&inputs, &plan).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.strategy.as_str()).collect();
    assert_eq!(names, ["denoise", "predictor_noise", "omission"]);

    let denoise = &reports[0];
    assert!(denoise.score_after.unwrap() <= denoise.score_before);
    let noise = &reports[1];
    assert!(noise.score_after.unwrap() > noise.score_before);
    let omission = &reports[2];
    let frac = omission.retained_fraction.unwrap();
    assert!(frac > 0.0 && frac <= 1.0);
    assert!(omission.distinguishable.is_none());

    let json = serde_json::to_value(&reports).unwrap();
    assert!(json[2]["z_gap"].is_null());
}
