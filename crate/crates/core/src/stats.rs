//! Binomial confidence intervals used for trend claims.

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid counts: {successes} successes out of {trials} trials")]
    Counts { successes: u64, trials: u64 },
    #[error("confidence {0} outside (0, 1)")]
    Confidence(f64),
}

/// Two-sided standard normal quantile for `confidence`.
pub fn z_for(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Confidence(confidence));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + confidence / 2.0))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::Counts { successes, trials });
    }
    let z = z_for(confidence)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let mut lo = (center - half).max(0.0);
    let mut hi = (center + half).min(1.0);
    // Endpoints are exact at the boundary counts.
    if successes == 0 {
        lo = 0.0;
    }
    if successes == trials {
        hi = 1.0;
    }
    Ok((lo, hi))
}

/// Newcombe's hybrid-score interval for `p1 - p2` built from the two Wilson
/// intervals.
pub fn newcombe_difference(
    s1: u64,
    n1: u64,
    s2: u64,
    n2: u64,
    confidence: f64,
) -> Result<(f64, f64), StatsError> {
    let (l1, u1) = wilson_interval(s1, n1, confidence)?;
    let (l2, u2) = wilson_interval(s2, n2, confidence)?;
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let d = p1 - p2;
    let lo = d - ((p1 - l1).powi(2) + (u2 - p2).powi(2)).sqrt();
    let hi = d + ((u1 - p1).powi(2) + (p2 - l2).powi(2)).sqrt();
    Ok((lo, hi))
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_counts() {
        let (lo, _) = wilson_interval(0, 40, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_interval(40, 40, 0.95).unwrap();
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn half_of_fifty() {
        // z = 1.959964; centre 0.5, half-width z*sqrt(0.25/50 + z^2/10000)/(1+z^2/50)
        let (lo, hi) = wilson_interval(25, 50, 0.95).unwrap();
        assert!((lo - 0.366).abs() < 0.002, "{lo}");
        assert!((hi - 0.634).abs() < 0.002, "{hi}");
    }

    #[test]
    fn invalid() {
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
        assert!(wilson_interval(1, 2, 1.0).is_err());
    }

    #[test]
    fn z_values() {
        assert!((z_for(0.95).unwrap() - 1.959964).abs() < 1e-5);
        assert!((z_for(0.99).unwrap() - 2.575829).abs() < 1e-5);
    }

    #[test]
    fn newcombe_separates_clear_gap() {
        let (lo, _) = newcombe_difference(450, 500, 300, 500, 0.95).unwrap();
        assert!(lo > 0.0);
        let (lo, hi) = newcombe_difference(250, 500, 250, 500, 0.95).unwrap();
        assert!(lo < 0.0 && hi > 0.0);
    }
}
