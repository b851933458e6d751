//! The magic barrier and the tests built on it.
//!
//! Under the Gaussian feedback model, the RMSE of a perfect predictor is
//! itself a random variable. For `N` pairs with uncertainties `sigma_v` it is
//! approximately
//!
//! ```text
//! MB ~ N( sqrt(sum sigma² / N),  (1 / 2N) * sum sigma⁴ / sum sigma² )
//! ```
//!
//! Two observed scores are called indistinguishable when the barrier, shifted
//! so that its mean sits at their midpoint, covers both within its 95%
//! confidence interval.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::FeedbackDataset;
use crate::json;
use crate::normal::{self, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianDistribution {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid(format!("gaussian mean must be finite, got {mean}")));
        }
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!(
                "gaussian variance must be finite and non-negative, got {variance}"
            )));
        }
        Ok(GaussianDistribution { mean, variance })
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.variance == 0.0
    }
}

/// The barrier law together with the sums it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierDistribution {
    pub gaussian: GaussianDistribution,
    pub n: usize,
    /// Σσ²
    pub sum_sigma2: f64,
    /// Σσ⁴
    pub sum_sigma4: f64,
}

impl BarrierDistribution {
    pub fn mean(&self) -> f64 {
        self.gaussian.mean
    }

    pub fn variance(&self) -> f64 {
        self.gaussian.variance
    }

    pub fn std(&self) -> f64 {
        self.gaussian.std()
    }

    /// Barrier law from a list of per-pair uncertainties.
    pub fn from_sigmas(sigmas: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut n = 0usize;
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for s in sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("sigma must be finite and >= 0, got {s}")));
            }
            let v = s * s;
            n += 1;
            s2 += v;
            s4 += v * v;
        }
        if n == 0 {
            return Err(Error::invalid("barrier needs at least one pair"));
        }
        let nf = n as f64;
        let mean = (s2 / nf).sqrt();
        let variance = if s2 > 0.0 { (s4 / s2) / (2.0 * nf) } else { 0.0 };
        Ok(BarrierDistribution {
            gaussian: GaussianDistribution::new(mean, variance)?,
            n,
            sum_sigma2: s2,
            sum_sigma4: s4,
        })
    }
}

pub fn barrier_distribution(data: &FeedbackDataset) -> Result<BarrierDistribution> {
    BarrierDistribution::from_sigmas(data.entries().iter().map(|e| e.sigma))
}

/// Two-sided confidence interval `mean ± z·std` at the given coverage.
pub fn confidence_interval(g: &GaussianDistribution, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let half = normal::two_sided_quantile(level) * g.std();
    Ok((g.mean - half, g.mean + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinguishabilityResult {
    #[serde(serialize_with = "json::number")]
    pub s1: f64,
    #[serde(serialize_with = "json::number")]
    pub s2: f64,
    #[serde(serialize_with = "json::number")]
    pub barrier_mean: f64,
    #[serde(serialize_with = "json::number")]
    pub barrier_variance: f64,
    #[serde(serialize_with = "json::number")]
    pub shift_mean: f64,
    #[serde(serialize_with = "json::number")]
    pub ci_low: f64,
    #[serde(serialize_with = "json::number")]
    pub ci_high: f64,
    pub distinguishable: bool,
    /// `|s1 - s2| / (2·std)`; infinite for a degenerate barrier and distinct scores.
    #[serde(serialize_with = "json::number")]
    pub z_gap: f64,
}

impl DistinguishabilityResult {
    /// Whether the reported interval covers both scores.
    pub fn covers_both(&self) -> bool {
        let inside = |s: f64| self.ci_low <= s && s <= self.ci_high;
        inside(self.s1) && inside(self.s2)
    }
}

/// Shifted-barrier test for a barrier of the given variance.
///
/// The verdict is decided by `|s1 - s2| > 2·z95·std`; the interval bounds are
/// then placed around the midpoint and widened by the scores themselves when
/// rounding would otherwise leave a covered score a few ulps outside.
pub fn distinguish(s1: f64, s2: f64, barrier_mean: f64, variance: f64) -> Result<DistinguishabilityResult> {
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let g = GaussianDistribution::new(barrier_mean, variance)?;
    let std = g.std();
    let gap = (s1 - s2).abs();
    let distinguishable = gap > 2.0 * Z95 * std;
    let z_gap = if gap == 0.0 {
        0.0
    } else if std == 0.0 {
        f64::INFINITY
    } else {
        gap / (2.0 * std)
    };

    let shift_mean = 0.5 * (s1 + s2);
    let half = Z95 * std;
    let (mut ci_low, mut ci_high) = (shift_mean - half, shift_mean + half);
    let (lo, hi) = (s1.min(s2), s1.max(s2));
    if distinguishable {
        // Keep at least one score outside; only matters when rounding placed
        // a bound exactly on it.
        if ci_low <= lo && hi <= ci_high {
            ci_low = ci_low.max(lo.next_up());
        }
    } else {
        ci_low = ci_low.min(lo);
        ci_high = ci_high.max(hi);
    }

    Ok(DistinguishabilityResult {
        s1,
        s2,
        barrier_mean,
        barrier_variance: variance,
        shift_mean,
        ci_low,
        ci_high,
        distinguishable,
        z_gap,
    })
}

pub fn distinguishability_test(
    s1: f64,
    s2: f64,
    barrier: &BarrierDistribution,
) -> Result<DistinguishabilityResult> {
    distinguish(s1, s2, barrier.mean(), barrier.variance())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationResult {
    /// P(S1 ≥ S2) for independent Gaussian scores.
    #[serde(serialize_with = "json::number")]
    pub p_opposite: f64,
    /// True iff `p_opposite < 0.05`, i.e. S1 < S2 is accepted.
    pub holds: bool,
}

pub const RELATION_ALPHA: f64 = 0.05;

/// Tests `S1 < S2` by bounding the probability of the opposite case.
pub fn relation_test(s1: &GaussianDistribution, s2: &GaussianDistribution) -> RelationResult {
    let var = s1.variance + s2.variance;
    let diff = s1.mean - s2.mean;
    let p_opposite = if var > 0.0 {
        normal::cdf(diff / var.sqrt())
    } else if diff == 0.0 {
        0.5
    } else if diff > 0.0 {
        1.0
    } else {
        0.0
    };
    RelationResult {
        p_opposite,
        holds: p_opposite < RELATION_ALPHA,
    }
}
