//! Synthetic populations of uncertain users and their repeated ratings.
//!
//! Generation is seeded per pair, so outputs depend only on the spec and the
//! seeds, not on scheduling.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{
    fit_uncertainty, FeedbackDataset, FeedbackKey, ObservationSet, PredictionSet,
    RatingObservation, RatingScale, SigmaFallback, UncertainFeedback,
};
use crate::rng;

// Stream indices reserved for population-level draws. Per-pair streams use the
// pair's linear index, which stays far below these.
const PAIR_SELECTION_STREAM: u64 = u64::MAX;
const TRIALS_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub scale: RatingScale,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Fraction of all user-item pairs that are realised.
    pub density: f64,
    /// Std of the Gaussian bias added to each true `mu` to form a prediction.
    #[serde(default)]
    pub prediction_bias_sd: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::invalid("n_users must be at least 1"));
        }
        if self.n_items == 0 {
            return Err(Error::invalid("n_items must be at least 1"));
        }
        self.scale.validate()?;
        if !(self.scale.min.is_finite() && self.scale.max.is_finite()) {
            return Err(Error::invalid("scale must be bounded"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if !(self.sigma_lo >= 0.0 && self.sigma_lo.is_finite()) {
            return Err(Error::invalid("sigma_lo must be finite and >= 0"));
        }
        if !(self.sigma_hi >= self.sigma_lo && self.sigma_hi.is_finite()) {
            return Err(Error::invalid("sigma_hi must be finite and >= sigma_lo"));
        }
        if !(self.prediction_bias_sd >= 0.0 && self.prediction_bias_sd.is_finite()) {
            return Err(Error::invalid("prediction_bias_sd must be finite and >= 0"));
        }
        Ok(())
    }

    /// Number of realised pairs, `ceil(density · n_users · n_items)`.
    pub fn pair_count(&self) -> usize {
        let total = (self.n_users * self.n_items) as f64;
        let exact = self.density * total;
        let nearest = exact.round();
        // Absorb representation error such as 0.3 · 10 = 3.0000000000000004.
        let count = if (exact - nearest).abs() <= 1e-9 * total.max(1.0) {
            nearest
        } else {
            exact.ceil()
        };
        count as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dataset: FeedbackDataset,
    pub predictions: Option<PredictionSet>,
}

fn id(prefix: char, i: usize, count: usize) -> String {
    let width = (count.saturating_sub(1)).to_string().len();
    format!("{prefix}{i:0width$}")
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws the generating `(mu, sigma)` of every realised pair and a biased
/// prediction for it.
pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<GroundTruth> {
    spec.validate()?;
    let total = spec.n_users * spec.n_items;
    let count = spec.pair_count();
    if count == 0 {
        return Err(Error::invalid("population has zero pairs"));
    }
    let mut chosen = if count == total {
        (0..total).collect::<Vec<_>>()
    } else {
        index::sample(&mut rng::stream(seed, PAIR_SELECTION_STREAM), total, count).into_vec()
    };
    chosen.sort_unstable();

    let drawn: Vec<(UncertainFeedback, f64)> = chosen
        .par_iter()
        .map(|&p| {
            let mut rng = rng::stream(seed, p as u64);
            let mu = uniform(&mut rng, spec.scale.min, spec.scale.max);
            let sigma = uniform(&mut rng, spec.sigma_lo, spec.sigma_hi);
            let z: f64 = StandardNormal.sample(&mut rng);
            let key = FeedbackKey::new(
                id('u', p / spec.n_items, spec.n_users),
                id('i', p % spec.n_items, spec.n_items),
            );
            let entry = UncertainFeedback::new(key, mu, sigma);
            (entry, mu + spec.prediction_bias_sd * z)
        })
        .collect();

    let predictions: BTreeMap<_, _> = drawn.iter().map(|(e, p)| (e.key.clone(), *p)).collect();
    let dataset = FeedbackDataset::new(Some(spec.scale), drawn.into_iter().map(|(e, _)| e).collect())?;
    Ok(GroundTruth {
        dataset,
        predictions: Some(PredictionSet::new(predictions)?),
    })
}

/// Draws `k` ratings per pair from its generating Gaussian.
///
/// With `discretise`, values are snapped to the scale's steps and clamped to
/// its bounds; otherwise they are left unbounded and the returned set uses an
/// unbounded scale.
pub fn draw_trials(truth: &GroundTruth, k: u32, discretise: bool, seed: u64) -> Result<ObservationSet> {
    if k == 0 {
        return Err(Error::invalid("trials per pair must be at least 1"));
    }
    let scale = match (discretise, truth.dataset.scale()) {
        (false, _) => RatingScale::unbounded(),
        (true, Some(s)) => *s,
        (true, None) => return Err(Error::invalid("discretised draws need a rating scale")),
    };
    let trial_seed = rng::child_seed(seed, TRIALS_STREAM);
    let rows: Vec<RatingObservation> = truth
        .dataset
        .entries()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(p, e)| {
            let mut rng = rng::stream(trial_seed, p as u64);
            (0..k)
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let x = e.mu + e.sigma * z;
                    RatingObservation {
                        key: e.key.clone(),
                        trial: t,
                        value: if discretise { scale.discretise(x) } else { x },
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ObservationSet::new(scale, rows)?.with_discretised(discretise))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins `[lo, lo + width)` starting at the smallest value and
/// running until the largest value is covered.
pub fn histogram(values: &[f64], width: f64) -> Result<Vec<HistogramBin>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid(format!("bin width must be positive, got {width}")));
    }
    if values.is_empty() {
        return Err(Error::invalid("histogram of no observations"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("histogram values must be finite"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = ((hi - lo) / width).floor() as usize + 1;
    let mut counts = vec![0usize; n_bins];
    for v in values {
        let i = (((v - lo) / width).floor() as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count,
        })
        .collect())
}

pub fn histogram_for_key(obs: &ObservationSet, key: &FeedbackKey, width: f64) -> Result<Vec<HistogramBin>> {
    let values = obs.values_for(key);
    if values.is_empty() {
        return Err(Error::invalid(format!("no observations for {key}")));
    }
    histogram(&values, width)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripReport {
    /// Largest `|sigma_fit - sigma_true| / sigma_true` over pairs with
    /// `sigma_true >= 0.1`; zero when there are none.
    pub max_relative_error: f64,
    pub within_tolerance: bool,
}

/// Generates a population, draws `k` continuous trials per pair, refits, and
/// compares the fitted uncertainties with the generating ones.
pub fn fit_roundtrip_check(spec: &PopulationSpec, k: u32, tolerance: f64, seed: u64) -> Result<RoundtripReport> {
    if k < 2 {
        return Err(Error::invalid("roundtrip check needs at least two trials per pair"));
    }
    let truth = generate_population(spec, seed)?;
    let obs = draw_trials(&truth, k, false, seed)?;
    let fitted = fit_uncertainty(&obs, SigmaFallback::Zero)?;
    let mut worst = 0.0f64;
    for e in truth.dataset.entries() {
        if e.sigma < 0.1 {
            continue;
        }
        let fit = fitted.get(&e.key).expect("fitted every drawn key");
        worst = worst.max((fit.sigma - e.sigma).abs() / e.sigma);
    }
    Ok(RoundtripReport {
        max_relative_error: worst,
        within_tolerance: worst < tolerance,
    })
}
