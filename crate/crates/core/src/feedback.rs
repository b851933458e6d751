//! Probabilistic model of user feedback.
//!
//! A rating for a user-item pair is treated as a Gaussian random variable
//! `X ~ N(mu, sigma^2)`. `mu` is the central tendency of the user's repeated
//! responses and `sigma` their uncertainty. Both are estimated from repeated
//! trials by [`fit_uncertainty`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds of a rating axis, optionally discrete.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub discrete_step: Option<f64>,
}

impl RatingScale {
    pub fn new(min: f64, max: f64, discrete_step: Option<f64>) -> Result<Self> {
        let scale = RatingScale {
            min,
            max,
            discrete_step,
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn continuous(min: f64, max: f64) -> Result<Self> {
        Self::new(min, max, None)
    }

    /// The whole real line. Used for continuous draws and for observations
    /// read from files, which carry no scale.
    pub fn unbounded() -> Self {
        RatingScale {
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
            discrete_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.is_nan() || self.max.is_nan() || self.min >= self.max {
            return Err(Error::invalid(format!(
                "scale: min ({}) must be below max ({})",
                self.min, self.max
            )));
        }
        if let Some(step) = self.discrete_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("scale.discrete_step must be positive"));
            }
            if !(self.min.is_finite() && self.max.is_finite()) {
                return Err(Error::invalid("scale: a discrete scale must be bounded"));
            }
            let steps = (self.max - self.min) / step;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(Error::invalid(
                    "scale: max - min must be a whole multiple of discrete_step",
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    /// Rounds to the nearest scale step (if discrete) and clamps to the bounds.
    pub fn discretise(&self, value: f64) -> f64 {
        let snapped = match self.discrete_step {
            Some(step) => self.min + ((value - self.min) / step).round() * step,
            None => value,
        };
        snapped.clamp(self.min, self.max)
    }
}

/// Identifies one user-item pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeedbackKey {
    pub user_id: String,
    pub item_id: String,
}

impl FeedbackKey {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>) -> Self {
        FeedbackKey {
            user_id: user_id.into(),
            item_id: item_id.into(),
        }
    }
}

impl fmt::Display for FeedbackKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.user_id, self.item_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingObservation {
    pub key: FeedbackKey,
    pub trial: u32,
    pub value: f64,
}

/// Raw repeated-trial ratings on a common scale.
///
/// Observations are kept sorted by `(user_id, item_id, trial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    scale: RatingScale,
    observations: Vec<RatingObservation>,
    discretised: bool,
}

impl ObservationSet {
    pub fn new(scale: RatingScale, mut observations: Vec<RatingObservation>) -> Result<Self> {
        scale.validate()?;
        for o in &observations {
            if !o.value.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite rating for {} trial {}",
                    o.key, o.trial
                )));
            }
            if !scale.contains(o.value) {
                return Err(Error::invalid(format!(
                    "rating {} for {} trial {} lies outside [{}, {}]",
                    o.value, o.key, o.trial, scale.min, scale.max
                )));
            }
        }
        observations.sort_by(|a, b| a.key.cmp(&b.key).then(a.trial.cmp(&b.trial)));
        if let Some(w) = observations
            .windows(2)
            .find(|w| w[0].key == w[1].key && w[0].trial == w[1].trial)
        {
            return Err(Error::invalid(format!(
                "duplicate trial {} for {}",
                w[0].trial, w[0].key
            )));
        }
        Ok(ObservationSet {
            scale,
            observations,
            discretised: false,
        })
    }

    pub(crate) fn with_discretised(mut self, discretised: bool) -> Self {
        self.discretised = discretised;
        self
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn observations(&self) -> &[RatingObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Whether values were rounded and clamped to the scale when drawn.
    pub fn is_discretised(&self) -> bool {
        self.discretised
    }

    /// Observations grouped per key, each group in trial order.
    pub fn groups(&self) -> Vec<(&FeedbackKey, &[RatingObservation])> {
        self.observations
            .chunk_by(|a, b| a.key == b.key)
            .map(|g| (&g[0].key, g))
            .collect()
    }

    pub fn values_for(&self, key: &FeedbackKey) -> Vec<f64> {
        self.observations
            .iter()
            .filter(|o| &o.key == key)
            .map(|o| o.value)
            .collect()
    }

    /// The rating with the lowest trial index for every key.
    pub fn first_trials(&self) -> BTreeMap<FeedbackKey, f64> {
        self.groups()
            .into_iter()
            .map(|(k, g)| (k.clone(), g[0].value))
            .collect()
    }
}

/// The Gaussian feedback model for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainFeedback {
    pub key: FeedbackKey,
    pub mu: f64,
    pub sigma: f64,
    /// Number of trials `sigma` was estimated from; `None` when the entry came
    /// from an external source.
    #[serde(skip)]
    pub trials: Option<usize>,
}

impl UncertainFeedback {
    pub fn new(key: FeedbackKey, mu: f64, sigma: f64) -> Self {
        UncertainFeedback {
            key,
            mu,
            sigma,
            trials: None,
        }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// A collection of per-pair feedback models with unique keys, sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDataset {
    scale: Option<RatingScale>,
    entries: Vec<UncertainFeedback>,
}

impl FeedbackDataset {
    pub fn new(scale: Option<RatingScale>, mut entries: Vec<UncertainFeedback>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("feedback dataset is empty"));
        }
        for e in &entries {
            if !e.mu.is_finite() {
                return Err(Error::invalid(format!("non-finite mu for {}", e.key)));
            }
            if !(e.sigma >= 0.0 && e.sigma.is_finite()) {
                return Err(Error::invalid(format!(
                    "sigma for {} must be finite and non-negative, got {}",
                    e.key, e.sigma
                )));
            }
        }
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        if let Some(w) = entries.windows(2).find(|w| w[0].key == w[1].key) {
            return Err(Error::invalid(format!("duplicate key {}", w[0].key)));
        }
        Ok(FeedbackDataset { scale, entries })
    }

    pub fn scale(&self) -> Option<&RatingScale> {
        self.scale.as_ref()
    }

    pub fn entries(&self) -> &[UncertainFeedback] {
        &self.entries
    }

    /// Number of pairs, `N`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &FeedbackKey) -> Option<&UncertainFeedback> {
        self.entries
            .binary_search_by(|e| e.key.cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn keys(&self) -> impl Iterator<Item = &FeedbackKey> {
        self.entries.iter().map(|e| &e.key)
    }

    /// Central tendencies as a point-rating map.
    pub fn mus(&self) -> BTreeMap<FeedbackKey, f64> {
        self.entries.iter().map(|e| (e.key.clone(), e.mu)).collect()
    }
}

/// Model predictions per pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    entries: BTreeMap<FeedbackKey, f64>,
}

impl PredictionSet {
    pub fn new(entries: BTreeMap<FeedbackKey, f64>) -> Result<Self> {
        if let Some((k, v)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite prediction {v} for {k}")));
        }
        Ok(PredictionSet { entries })
    }

    /// Predictions equal to each pair's central tendency.
    pub fn perfect(data: &FeedbackDataset) -> Self {
        PredictionSet { entries: data.mus() }
    }

    pub fn get(&self, key: &FeedbackKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn require(&self, key: &FeedbackKey) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::MissingPrediction(key.clone()))
    }

    pub fn entries(&self) -> &BTreeMap<FeedbackKey, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails with the first dataset key that has no prediction.
    pub fn check_covers<'a>(&self, keys: impl IntoIterator<Item = &'a FeedbackKey>) -> Result<()> {
        keys.into_iter().try_for_each(|k| self.require(k).map(|_| ()))
    }
}

/// How to assign `sigma` to pairs observed only once.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SigmaFallback {
    Zero,
    /// Root mean of sigma² over pairs with at least two trials.
    #[default]
    Pooled,
    Fixed(f64),
}

impl FromStr for SigmaFallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SigmaFallback::Zero),
            "pooled" => Ok(SigmaFallback::Pooled),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "fallback must be zero, pooled or fixed:<value>, got `{s}`"
                        ))
                    })?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::invalid("fixed fallback sigma must be non-negative"));
                }
                Ok(SigmaFallback::Fixed(v))
            }
        }
    }
}

/// Sample mean and Bessel-corrected standard deviation. `mu` is kept inside
/// the observed range.
fn mean_and_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mu = (values.iter().sum::<f64>() / n).clamp(lo, hi);
    if values.len() < 2 {
        return (mu, None);
    }
    if lo == hi {
        return (mu, Some(0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    (mu, Some((ss / (n - 1.0)).sqrt()))
}

/// Estimates `(mu, sigma)` for every pair from its repeated trials.
pub fn fit_uncertainty(obs: &ObservationSet, fallback: SigmaFallback) -> Result<FeedbackDataset> {
    if obs.is_empty() {
        return Err(Error::invalid("observation set is empty"));
    }
    let mut entries = Vec::new();
    let mut single = Vec::new();
    for (key, group) in obs.groups() {
        let values: Vec<f64> = group.iter().map(|o| o.value).collect();
        let (mu, sigma) = mean_and_std(&values);
        if sigma.is_none() {
            single.push(entries.len());
        }
        entries.push(UncertainFeedback {
            key: key.clone(),
            mu,
            sigma: sigma.unwrap_or(0.0),
            trials: Some(values.len()),
        });
    }

    if !single.is_empty() {
        let fill = match fallback {
            SigmaFallback::Zero => 0.0,
            SigmaFallback::Fixed(v) => v,
            SigmaFallback::Pooled => pooled_sigma_of(&entries)?,
        };
        for i in single {
            entries[i].sigma = fill;
        }
    }

    FeedbackDataset::new(Some(*obs.scale()), entries)
}

fn pooled_sigma_of(entries: &[UncertainFeedback]) -> Result<f64> {
    let (sum, count) = entries
        .iter()
        .filter(|e| e.trials.is_none_or(|t| t >= 2))
        .fold((0.0, 0usize), |(s, c), e| (s + e.variance(), c + 1));
    if count == 0 {
        return Err(Error::Unavailable(
            "pooled sigma needs at least one pair with two or more trials".into(),
        ));
    }
    Ok((sum / count as f64).sqrt())
}

/// Root mean of sigma² over entries estimated from at least two trials.
///
/// Entries of unknown provenance (loaded from a feedback file) count as
/// multi-trial estimates.
pub fn pooled_sigma(data: &FeedbackDataset) -> Result<f64> {
    pooled_sigma_of(data.entries())
}
