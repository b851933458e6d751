//! Evaluation of rating predictors under human uncertainty.
//!
//! Each rating is modelled as a Gaussian random variable whose spread is the
//! rater's own uncertainty. From that model the crate derives
//!
//! * the *magic barrier*, the distribution of the RMSE a perfect predictor
//!   would still obtain ([`barrier`]);
//! * a test of whether two metric scores can be told apart at all, given that
//!   uncertainty ([`barrier::distinguishability_test`]);
//! * RMSE as a Monte Carlo random variable ([`metrics`]);
//! * three common strategies for handling noisy ratings, and a harness that
//!   checks whether their score changes are significant ([`strategies`]);
//! * a seeded generator of synthetic raters ([`simulate`]).
//!
//! ```
//! use uncertain_eval::barrier::{distinguishability_test, BarrierDistribution};
//!
//! let barrier = BarrierDistribution::from_sigmas(std::iter::repeat_n(1.0, 2000)).unwrap();
//! let verdict = distinguishability_test(0.86, 0.90, &barrier).unwrap();
//! assert!(!verdict.distinguishable);
//! ```

pub mod barrier;
pub mod error;
pub mod feedback;
pub mod io;
pub mod json;
pub mod metrics;
pub mod normal;
pub mod rng;
pub mod simulate;
pub mod strategies;

pub use barrier::{
    barrier_distribution, confidence_interval, distinguishability_test, relation_test,
    BarrierDistribution, DistinguishabilityResult, GaussianDistribution, RelationResult,
};
pub use error::{Error, Result};
pub use feedback::{
    fit_uncertainty, pooled_sigma, FeedbackDataset, FeedbackKey, ObservationSet, PredictionSet,
    RatingObservation, RatingScale, SigmaFallback, UncertainFeedback,
};
pub use metrics::{rmse, rmse_distribution, variance_match_check, McConfig, MetricScoreDistribution};
