//! Binary plan-outcome verdicts and the virtual-time latency model.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Millis;
use crate::policy::PlanRecord;
use crate::taskworld::{eval_predicate, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("candidate count must be at least 1, got {0}")]
    ZeroK(usize),
    #[error("invalid verifier config: {0}")]
    Config(String),
}

/// Outcome of one verification query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub candidate: usize,
    pub accept: bool,
    /// Instant the candidate finished generating and joined the queue.
    pub issued_at: Millis,
    /// Instant a verifier slot picked the query up.
    pub started_at: Millis,
    pub arrived_at: Millis,
}

/// Verifier service-time distribution in virtual milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceTime {
    Uniform { lo: Millis, hi: Millis },
    Constant { ms: Millis },
}

impl ServiceTime {
    pub fn mean(&self) -> Millis {
        match *self {
            ServiceTime::Uniform { lo, hi } => 0.5 * (lo + hi),
            ServiceTime::Constant { ms } => ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierConfig {
    /// Probability of accepting a misaligned outcome.
    pub alpha: f64,
    /// Probability of rejecting an aligned outcome.
    pub beta: f64,
    pub service_time: ServiceTime,
    /// Maximum verifications in flight.
    pub pool_limit: usize,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.05,
            service_time: ServiceTime::Uniform { lo: 7000.0, hi: 10000.0 },
            pool_limit: 10,
        }
    }
}

impl VerifierConfig {
    /// Noise-free verifier with the default service time.
    pub fn oracle() -> Self {
        Self { alpha: 0.0, beta: 0.0, ..Self::default() }
    }

    /// Accepts everything instantly.
    pub fn accept_all() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            service_time: ServiceTime::Constant { ms: 0.0 },
            pool_limit: 1,
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(VerifyError::Config(format!("{name} = {v} is not a probability")));
            }
        }
        match self.service_time {
            ServiceTime::Uniform { lo, hi } if !(lo >= 0.0 && lo <= hi && hi.is_finite()) => {
                return Err(VerifyError::Config(format!("uniform({lo}, {hi}) is not a valid range")));
            }
            ServiceTime::Constant { ms } if !(ms >= 0.0 && ms.is_finite()) => {
                return Err(VerifyError::Config(format!("constant({ms}) is negative")));
            }
            _ => {}
        }
        if self.pool_limit < 1 {
            return Err(VerifyError::Config("pool_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyModel {
    pub sample_c0: Millis,
    pub sample_c1: Millis,
    pub verifier: VerifierConfig,
}

/// Per-step batched sampling cost at K = 1 and K = 10.
pub const SAMPLE_MS_K1: Millis = 86.0;
pub const SAMPLE_MS_K10: Millis = 184.0;

/// Line through the two sampling endpoints: `(c0, c1)`.
pub fn fit_sampling_endpoints() -> (Millis, Millis) {
    let c1 = (SAMPLE_MS_K10 - SAMPLE_MS_K1) / 9.0;
    (SAMPLE_MS_K1 - c1, c1)
}

impl Default for LatencyModel {
    fn default() -> Self {
        let (sample_c0, sample_c1) = fit_sampling_endpoints();
        Self { sample_c0, sample_c1, verifier: VerifierConfig::default() }
    }
}

impl LatencyModel {
    /// Benchmark preset whose amortized per-step verification wait lands on
    /// the measured 61 ms (K = 1) and 163 ms (K = 10) figures for the default
    /// policy on the `id` suite.
    ///
    /// The raw 7 to 10 s query time cannot be amortized to tens of
    /// milliseconds over gridworld segments of roughly ten actions, so this
    /// preset keeps the 7:10 shape of the service-time range but shrinks its
    /// scale, and allows three queries in flight. Both numbers were fitted by
    /// sweeping the simulator, not derived.
    pub fn calibrated() -> Self {
        Self {
            verifier: VerifierConfig {
                service_time: ServiceTime::Uniform {
                    lo: CALIBRATED_SERVICE_LO,
                    hi: CALIBRATED_SERVICE_LO * 10.0 / 7.0,
                },
                pool_limit: CALIBRATED_POOL_LIMIT,
                ..VerifierConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.sample_c0 >= 0.0 && self.sample_c1 >= 0.0) {
            return Err(VerifyError::Config("sampling coefficients must be non-negative".into()));
        }
        self.verifier.validate()
    }
}

pub const CALIBRATED_SERVICE_LO: Millis = 1100.0;
pub const CALIBRATED_POOL_LIMIT: usize = 3;

/// Accepts iff the predicted final state satisfies the plan's target.
/// `initial` is part of the verifier interface but the oracle ignores it.
pub fn verdict_oracle(_initial: &WorldState, final_state: &WorldState, plan: &PlanRecord) -> bool {
    eval_predicate(final_state, &plan.target).unwrap_or(false)
}

/// Passes `truth` through the verifier's confusion channel. Always consumes
/// exactly one draw.
pub fn verdict_noisy<R: Rng>(truth: bool, cfg: &VerifierConfig, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    if truth {
        u >= cfg.beta
    } else {
        u < cfg.alpha
    }
}

/// Per-step cost of sampling a batch of `k` candidates.
pub fn sampling_step_cost(k: usize, lat: &LatencyModel) -> Result<Millis, VerifyError> {
    if k < 1 {
        return Err(VerifyError::ZeroK(k));
    }
    Ok(lat.sample_c0 + lat.sample_c1 * k as f64)
}

/// Always consumes exactly one draw.
pub fn draw_service_time<R: Rng>(cfg: &VerifierConfig, rng: &mut R) -> Millis {
    let u: f64 = rng.gen();
    match cfg.service_time {
        ServiceTime::Uniform { lo, hi } => lo + (hi - lo) * u,
        ServiceTime::Constant { ms } => ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn sampling_endpoints() {
        let lat = LatencyModel::default();
        assert!((sampling_step_cost(1, &lat).unwrap() - 86.0).abs() < 1e-9);
        assert!((sampling_step_cost(10, &lat).unwrap() - 184.0).abs() < 1e-9);
        assert!(sampling_step_cost(0, &lat).is_err());
        assert!((lat.sample_c0 - 75.111).abs() < 1e-3);
        assert!((lat.sample_c1 - 10.889).abs() < 1e-3);
    }

    #[test]
    fn noise_channel_extremes() {
        let mut rng = stream(&[1]);
        let exact = VerifierConfig::oracle();
        for _ in 0..100 {
            assert!(verdict_noisy(true, &exact, &mut rng));
            assert!(!verdict_noisy(false, &exact, &mut rng));
        }
        let lenient = VerifierConfig { alpha: 1.0, ..exact };
        assert!((0..100).all(|_| verdict_noisy(false, &lenient, &mut rng)));
    }

    #[test]
    fn constant_service_time() {
        let cfg = VerifierConfig { service_time: ServiceTime::Constant { ms: 61.0 }, ..Default::default() };
        let mut rng = stream(&[2]);
        assert!((0..10).all(|_| draw_service_time(&cfg, &mut rng) == 61.0));
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let lat = LatencyModel::calibrated();
        let json = serde_json::to_string(&lat).unwrap();
        assert_eq!(serde_json::from_str::<LatencyModel>(&json).unwrap(), lat);
        let bad = r#"{"sample_c0": 1.0, "sample_c2": 3.0}"#;
        assert!(serde_json::from_str::<LatencyModel>(bad).is_err());
        let st: ServiceTime = serde_json::from_str(r#"{"dist":"constant","ms":61}"#).unwrap();
        assert_eq!(st, ServiceTime::Constant { ms: 61.0 });
    }

    #[test]
    fn invalid_configs() {
        let mut v = VerifierConfig::default();
        v.pool_limit = 0;
        assert!(v.validate().is_err());
        v = VerifierConfig { service_time: ServiceTime::Uniform { lo: 5.0, hi: 1.0 }, ..Default::default() };
        assert!(v.validate().is_err());
        assert!(VerifierConfig { beta: -0.1, ..Default::default() }.validate().is_err());
    }
}
