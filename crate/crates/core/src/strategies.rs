//! Strategies for dealing with uncertain feedback, and a harness measuring
//! whether they change scores by more than rating uncertainty can explain.
//!
//! * re-rating de-noising: repeated ratings that lie too far apart are
//!   replaced until every group fits within a distance threshold;
//! * predictor noise: predictions carry their own Gaussian noise, so the
//!   deviation `X - Π` is a difference of two random variables;
//! * deviation omission: the metric is computed only over deviations a z-test
//!   cannot attribute to rating uncertainty.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::barrier::{barrier_distribution, distinguishability_test, DistinguishabilityResult, GaussianDistribution};
use crate::error::{Error, Result};
use crate::feedback::{
    fit_uncertainty, FeedbackDataset, FeedbackKey, ObservationSet, PredictionSet,
    RatingObservation, SigmaFallback, UncertainFeedback,
};
use crate::json;
use crate::metrics::{rmse, rmse_distribution, McConfig};
use crate::normal;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampler {
    /// Draw a fresh rating from the pair's generating model.
    RedrawFromModel,
    ReplaceWithMedian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Largest allowed distance between two ratings of the same pair.
    pub threshold: f64,
    /// Cap on replacement passes per group, and on redraw attempts per replacement.
    pub max_iterations: usize,
    pub resampler: Resampler,
    pub seed: u64,
}

impl DenoiseConfig {
    pub fn new(threshold: f64, resampler: Resampler) -> Self {
        DenoiseConfig {
            threshold,
            max_iterations: 100,
            resampler,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::invalid(format!(
                "denoise threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("denoise max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStatus {
    pub key: FeedbackKey,
    pub converged: bool,
    /// A redraw ran out of attempts and the median was used instead.
    pub fell_back_to_median: bool,
    pub replacements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutcome {
    pub observations: ObservationSet,
    pub groups: Vec<GroupStatus>,
}

impl DenoiseOutcome {
    pub fn unconverged(&self) -> impl Iterator<Item = &GroupStatus> {
        self.groups.iter().filter(|g| !g.converged)
    }
}

pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Index of the value farthest from the median; ties go to the earliest trial.
fn farthest_from_median(values: &[f64]) -> usize {
    let med = median(values);
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - med).abs() > (values[best] - med).abs() {
            best = i;
        }
    }
    best
}

fn denoise_group(
    values: &mut [f64],
    model: Option<&UncertainFeedback>,
    cfg: &DenoiseConfig,
    scale_ok: impl Fn(f64) -> bool,
    rng: &mut rng::StreamRng,
) -> (bool, bool, usize) {
    let mut fell_back = false;
    let mut passes = 0;
    while spread(values) > cfg.threshold && passes < cfg.max_iterations {
        passes += 1;
        let target = farthest_from_median(values);
        let replacement = match (cfg.resampler, model) {
            (Resampler::RedrawFromModel, Some(m)) => {
                let fits = |x: f64| {
                    scale_ok(x)
                        && values
                            .iter()
                            .enumerate()
                            .all(|(i, v)| i == target || (x - v).abs() <= cfg.threshold)
                };
                let mut found = None;
                for _ in 0..cfg.max_iterations {
                    let z: f64 = StandardNormal.sample(rng);
                    let x = m.mu + m.sigma * z;
                    if fits(x) {
                        found = Some(x);
                        break;
                    }
                }
                found.unwrap_or_else(|| {
                    fell_back = true;
                    median(values)
                })
            }
            _ => median(values),
        };
        values[target] = replacement;
    }
    (spread(values) <= cfg.threshold, fell_back, passes)
}

/// Replaces repeated ratings until every group's ratings lie within
/// `cfg.threshold` of each other.
///
/// Each pass removes the rating farthest from the group median and replaces it
/// either with the median or with a fresh draw from `truth`. Keys, trial
/// indices and group sizes are left untouched. Groups that still exceed the
/// threshold after `max_iterations` passes are reported as unconverged.
pub fn denoise_preprocess(
    obs: &ObservationSet,
    truth: Option<&FeedbackDataset>,
    cfg: &DenoiseConfig,
) -> Result<DenoiseOutcome> {
    cfg.validate()?;
    let groups = obs.groups();
    if cfg.resampler == Resampler::RedrawFromModel {
        let truth = truth.ok_or_else(|| {
            Error::invalid("redraw-from-model de-noising needs the generating model")
        })?;
        for (key, _) in &groups {
            if truth.get(key).is_none() {
                return Err(Error::invalid(format!("no generating model for {key}")));
            }
        }
    }
    let scale = *obs.scale();

    let results: Vec<(Vec<RatingObservation>, GroupStatus)> = groups
        .par_iter()
        .enumerate()
        .map(|(gi, (key, group))| {
            let mut values: Vec<f64> = group.iter().map(|o| o.value).collect();
            let model = truth.and_then(|t| t.get(key));
            let mut rng = rng::stream(cfg.seed, gi as u64);
            let (converged, fell_back, replacements) =
                denoise_group(&mut values, model, cfg, |x| scale.contains(x), &mut rng);
            let rows = group
                .iter()
                .zip(values)
                .map(|(o, value)| RatingObservation { value, ..o.clone() })
                .collect();
            let status = GroupStatus {
                key: (*key).clone(),
                converged,
                fell_back_to_median: fell_back,
                replacements,
            };
            (rows, status)
        })
        .collect();

    let mut rows = Vec::with_capacity(obs.len());
    let mut statuses = Vec::with_capacity(results.len());
    for (r, s) in results {
        if !s.converged {
            log::warn!("de-noising did not converge for {}", s.key);
        }
        rows.extend(r);
        statuses.push(s);
    }
    let observations = ObservationSet::new(scale, rows)?.with_discretised(obs.is_discretised());
    Ok(DenoiseOutcome {
        observations,
        groups: statuses,
    })
}

/// Exact law of `X - Π` with `X ~ N(mu, sigma²)` and `Π ~ N(prediction, tau²)`.
pub fn predictor_noise_deviation(
    fb: &UncertainFeedback,
    prediction: f64,
    tau: f64,
) -> Result<GaussianDistribution> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be >= 0, got {tau}")));
    }
    if !prediction.is_finite() {
        return Err(Error::invalid("prediction must be finite"));
    }
    GaussianDistribution::new(fb.mu - prediction, fb.variance() + tau * tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmissionConfig {
    pub alpha: f64,
}

impl Default for OmissionConfig {
    fn default() -> Self {
        OmissionConfig { alpha: 0.05 }
    }
}

impl OmissionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmissionOutcome {
    pub retained: Vec<FeedbackKey>,
    /// RMSE over retained pairs; `None` when nothing was retained.
    pub filtered_rmse: Option<f64>,
    pub retained_fraction: f64,
}

/// Two-sided p-value of a deviation under `N(0, sigma²)`. With `sigma = 0`
/// any non-zero deviation has p = 0.
pub fn deviation_p_value(deviation: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        normal::two_sided_p(deviation / sigma)
    } else if deviation == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Keeps only the pairs whose deviation `rating - prediction` is significant
/// at level `alpha` given the pair's uncertainty, and scores them.
pub fn omit_insignificant(
    data: &FeedbackDataset,
    predictions: &PredictionSet,
    point_ratings: &BTreeMap<FeedbackKey, f64>,
    cfg: &OmissionConfig,
) -> Result<OmissionOutcome> {
    cfg.validate()?;
    let mut retained = BTreeMap::new();
    for e in data.entries() {
        let rating = *point_ratings
            .get(&e.key)
            .ok_or_else(|| Error::invalid(format!("no point rating for {}", e.key)))?;
        let d = rating - predictions.require(&e.key)?;
        if deviation_p_value(d, e.sigma) < cfg.alpha {
            retained.insert(e.key.clone(), rating);
        }
    }
    let filtered_rmse = if retained.is_empty() {
        None
    } else {
        Some(rmse(predictions, &retained)?)
    };
    Ok(OmissionOutcome {
        retained_fraction: retained.len() as f64 / data.len() as f64,
        retained: retained.into_keys().collect(),
        filtered_rmse,
    })
}

/// Before/after scores of one strategy and the barrier verdict on the pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub strategy: String,
    #[serde(serialize_with = "json::number")]
    pub score_before: f64,
    #[serde(serialize_with = "json::optional_number")]
    pub score_after: Option<f64>,
    #[serde(serialize_with = "json::optional_number")]
    pub retained_fraction: Option<f64>,
    pub distinguishable: Option<bool>,
    #[serde(serialize_with = "json::optional_number")]
    pub z_gap: Option<f64>,
    /// Mean per-pair variance of `X - Π`; predictor-noise reports only.
    #[serde(serialize_with = "json::optional_number")]
    pub deviation_variance: Option<f64>,
    #[serde(skip)]
    pub verdict: Option<DistinguishabilityResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorNoiseConfig {
    pub tau: f64,
    pub mc: McConfig,
}

/// Which strategies to run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyPlan {
    pub denoise: Option<DenoiseConfig>,
    pub predictor_noise: Option<PredictorNoiseConfig>,
    pub omission: Option<OmissionConfig>,
}

pub struct StrategyInputs<'a> {
    /// Repeated-trial ratings; required for de-noising.
    pub observations: Option<&'a ObservationSet>,
    /// Per-pair models; fitted from `observations` when absent.
    pub feedback: Option<&'a FeedbackDataset>,
    pub predictions: &'a PredictionSet,
}

fn rmse_over_observations(obs: &ObservationSet, predictions: &PredictionSet) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::invalid("no observations to score"));
    }
    let mut sum = 0.0;
    for o in obs.observations() {
        let d = o.value - predictions.require(&o.key)?;
        sum += d * d;
    }
    Ok((sum / obs.len() as f64).sqrt())
}

/// Runs each requested strategy and tests the before/after scores against the
/// dataset's barrier.
///
/// De-noising scores every repeated rating before and after replacement.
/// Predictor noise compares Monte Carlo RMSE means without and with noise on
/// the predictions. Omission reports the filtered RMSE but no verdict, since
/// it scores a different set of deviations than the baseline.
pub fn run_strategy_comparison(
    inputs: &StrategyInputs<'_>,
    plan: &StrategyPlan,
) -> Result<Vec<StrategyReport>> {
    let fitted;
    let data = match (inputs.feedback, inputs.observations) {
        (Some(d), _) => d,
        (None, Some(obs)) => {
            fitted = fit_uncertainty(obs, SigmaFallback::Pooled)?;
            &fitted
        }
        (None, None) => {
            return Err(Error::invalid("strategy comparison needs observations or feedback"))
        }
    };
    let barrier = barrier_distribution(data)?;
    inputs.predictions.check_covers(data.keys())?;
    let mut reports = Vec::new();

    if let Some(cfg) = &plan.denoise {
        let obs = inputs
            .observations
            .ok_or_else(|| Error::invalid("de-noising needs repeated-trial observations"))?;
        let before = rmse_over_observations(obs, inputs.predictions)?;
        let outcome = denoise_preprocess(obs, Some(data), cfg)?;
        let after = rmse_over_observations(&outcome.observations, inputs.predictions)?;
        let verdict = distinguishability_test(before, after, &barrier)?;
        reports.push(StrategyReport {
            strategy: "denoise".into(),
            score_before: before,
            score_after: Some(after),
            retained_fraction: None,
            distinguishable: Some(verdict.distinguishable),
            z_gap: Some(verdict.z_gap),
            deviation_variance: None,
            verdict: Some(verdict),
        });
    }

    if let Some(cfg) = &plan.predictor_noise {
        let plain = McConfig {
            predictor_tau: None,
            ..cfg.mc
        };
        let noisy = McConfig {
            predictor_tau: Some(cfg.tau),
            ..cfg.mc
        };
        let before = rmse_distribution(data, inputs.predictions, &plain)?.mean;
        let after = rmse_distribution(data, inputs.predictions, &noisy)?.mean;
        let mut var_sum = 0.0;
        for e in data.entries() {
            let p = inputs.predictions.require(&e.key)?;
            var_sum += predictor_noise_deviation(e, p, cfg.tau)?.variance;
        }
        let verdict = distinguishability_test(before, after, &barrier)?;
        reports.push(StrategyReport {
            strategy: "predictor_noise".into(),
            score_before: before,
            score_after: Some(after),
            retained_fraction: None,
            distinguishable: Some(verdict.distinguishable),
            z_gap: Some(verdict.z_gap),
            deviation_variance: Some(var_sum / data.len() as f64),
            verdict: Some(verdict),
        });
    }

    if let Some(cfg) = &plan.omission {
        let points = match inputs.observations {
            Some(obs) => obs.first_trials(),
            None => data.mus(),
        };
        let before = rmse(inputs.predictions, &points)?;
        let outcome = omit_insignificant(data, inputs.predictions, &points, cfg)?;
        reports.push(StrategyReport {
            strategy: "omission".into(),
            score_before: before,
            score_after: outcome.filtered_rmse,
            retained_fraction: Some(outcome.retained_fraction),
            distinguishable: None,
            z_gap: None,
            deviation_variance: None,
            verdict: None,
        });
    }

    Ok(reports)
}
