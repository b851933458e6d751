//! Standard-normal helpers shared by the tests and intervals.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Two-sided 95% standard-normal quantile, z such that Φ(z) = 0.975.
pub const Z95: f64 = 1.959_963_984_540_054;

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper-tail quantile for a two-sided interval of the given coverage.
pub fn two_sided_quantile(level: f64) -> f64 {
    if level == 0.95 {
        return Z95;
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    std_normal.inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantile_matches_table() {
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(std_normal.inverse_cdf(0.975), Z95, epsilon = 1e-9);
        assert_abs_diff_eq!(two_sided_quantile(0.90), 1.644_853_626_951_472, epsilon = 1e-9);
        assert_abs_diff_eq!(two_sided_quantile(0.99), 2.575_829_303_548_901, epsilon = 1e-9);
    }

    #[test]
    fn cdf_values() {
        assert_abs_diff_eq!(cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cdf(-1.788_854_381_999_832), 0.036_819, epsilon = 1e-6);
        assert_abs_diff_eq!(two_sided_p(2.4), 0.016_395, epsilon = 1e-6);
        assert_abs_diff_eq!(two_sided_p(0.0), 1.0, epsilon = 1e-15);
    }
}
