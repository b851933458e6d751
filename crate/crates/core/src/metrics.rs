//! RMSE as a point score and as a random variable under rating uncertainty.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::barrier::barrier_distribution;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackDataset, FeedbackKey, PredictionSet};
use crate::json;
use crate::rng;

/// Monte Carlo samples per independently seeded chunk.
pub const CHUNK_SIZE: usize = 1024;
pub const MIN_SAMPLES: usize = 100;

pub fn rmse(predictions: &PredictionSet, ratings: &BTreeMap<FeedbackKey, f64>) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::invalid("rmse over an empty set of ratings"));
    }
    let mut sum = 0.0;
    for (key, rating) in ratings {
        let d = rating - predictions.require(key)?;
        sum += d * d;
    }
    Ok((sum / ratings.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub sample_count: usize,
    pub seed: u64,
    /// Std of the artificial Gaussian noise attached to each prediction.
    pub predictor_tau: Option<f64>,
}

impl McConfig {
    pub fn new(sample_count: usize, seed: u64) -> Self {
        McConfig {
            sample_count,
            seed,
            predictor_tau: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.predictor_tau = Some(tau);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "sample_count must be at least {MIN_SAMPLES}, got {}",
                self.sample_count
            )));
        }
        if let Some(tau) = self.predictor_tau {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::invalid(format!("predictor_tau must be >= 0, got {tau}")));
            }
        }
        Ok(())
    }
}

/// Empirical law of a metric score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricScoreDistribution {
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(serialize_with = "json::number")]
    pub mean: f64,
    #[serde(serialize_with = "json::number")]
    pub variance: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl MetricScoreDistribution {
    /// Summary statistics over samples; variance uses the n−1 denominator.
    pub fn from_samples(samples: Vec<f64>, seed: u64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let n = samples.len() as f64;
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (samples.iter().sum::<f64>() / n).clamp(lo, hi);
        if lo == hi {
            return Ok(MetricScoreDistribution {
                sample_count: samples.len(),
                samples,
                mean,
                variance: 0.0,
                seed,
            });
        }
        let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(MetricScoreDistribution {
            sample_count: samples.len(),
            samples,
            mean,
            variance,
            seed,
        })
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

struct PairModel {
    mu: f64,
    sigma: f64,
    prediction: f64,
}

/// Draws RMSE samples with ratings `x ~ N(mu, sigma²)` per pair and, when
/// `predictor_tau` is set, predictions `p ~ N(pi, tau²)`.
///
/// Samples are produced in chunks of [`CHUNK_SIZE`], each with its own child
/// seed, so the output is identical for any number of worker threads.
/// Sampled values are not clamped to the rating scale.
pub fn rmse_distribution(
    data: &FeedbackDataset,
    predictions: &PredictionSet,
    cfg: &McConfig,
) -> Result<MetricScoreDistribution> {
    cfg.validate()?;
    let pairs = data
        .entries()
        .iter()
        .map(|e| {
            Ok(PairModel {
                mu: e.mu,
                sigma: e.sigma,
                prediction: predictions.require(&e.key)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tau = cfg.predictor_tau.unwrap_or(0.0);
    let with_tau = cfg.predictor_tau.is_some();
    let n = pairs.len() as f64;

    let chunks = cfg.sample_count.div_ceil(CHUNK_SIZE);
    let per_chunk: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(cfg.sample_count - c * CHUNK_SIZE);
            let mut rng = rng::stream(cfg.seed, c as u64);
            (0..len)
                .map(|_| {
                    let mut ss = 0.0;
                    for p in &pairs {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let mut d = p.mu + p.sigma * z - p.prediction;
                        if with_tau {
                            let w: f64 = StandardNormal.sample(&mut rng);
                            d -= tau * w;
                        }
                        ss += d * d;
                    }
                    (ss / n).sqrt()
                })
                .collect()
        })
        .collect();

    MetricScoreDistribution::from_samples(per_chunk.concat(), cfg.seed)
}

/// Relative gap between the Monte Carlo variance of a perfect predictor's
/// RMSE and the closed-form barrier variance.
///
/// The closed form is a large-`N` approximation; for small datasets the
/// gap is reported but expected to be large.
pub fn variance_match_check(data: &FeedbackDataset, cfg: &McConfig) -> Result<f64> {
    let barrier = barrier_distribution(data)?;
    if barrier.variance() == 0.0 {
        return Err(Error::invalid("barrier variance is zero"));
    }
    if data.len() < 1000 {
        log::warn!(
            "variance match checked on {} pairs; the barrier law is a large-N approximation",
            data.len()
        );
    }
    let cfg = McConfig {
        predictor_tau: None,
        ..*cfg
    };
    let dist = rmse_distribution(data, &PredictionSet::perfect(data), &cfg)?;
    Ok((dist.variance - barrier.variance()).abs() / barrier.variance())
}
