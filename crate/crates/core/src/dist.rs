//! Duration distributions used for link latency and service times.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::engine::SimDuration;

/// A non-negative duration distribution, configured in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DurationDist {
    Fixed { ms: f64 },
    Uniform { min_ms: f64, max_ms: f64 },
    Exp { mean_ms: f64 },
}

impl DurationDist {
    pub fn fixed_ms(ms: f64) -> Self {
        DurationDist::Fixed { ms }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimDuration {
        match *self {
            DurationDist::Fixed { ms } => SimDuration::from_millis_f64(ms),
            DurationDist::Uniform { min_ms, max_ms } => {
                let lo = SimDuration::from_millis_f64(min_ms).as_micros();
                let hi = SimDuration::from_millis_f64(max_ms).as_micros();
                if hi <= lo {
                    SimDuration(lo)
                } else {
                    SimDuration(rng.random_range(lo..=hi))
                }
            }
            DurationDist::Exp { mean_ms } => {
                if mean_ms <= 0.0 {
                    return SimDuration::ZERO;
                }
                let us: f64 = Exp::new(1.0 / (mean_ms * 1_000.0))
                    .expect("positive rate")
                    .sample(rng);
                SimDuration(us.round() as u64)
            }
        }
    }

    /// Whether sampling consumes randomness. Fixed values never draw, which
    /// keeps unrelated streams aligned across architectures.
    pub fn is_random(&self) -> bool {
        !matches!(self, DurationDist::Fixed { .. })
    }

    pub fn mean(&self) -> SimDuration {
        match *self {
            DurationDist::Fixed { ms } => SimDuration::from_millis_f64(ms),
            DurationDist::Uniform { min_ms, max_ms } => {
                SimDuration::from_millis_f64((min_ms + max_ms) / 2.0)
            }
            DurationDist::Exp { mean_ms } => SimDuration::from_millis_f64(mean_ms),
        }
    }

    /// Largest value a sample can take; the mean for unbounded distributions.
    pub fn upper(&self) -> SimDuration {
        match *self {
            DurationDist::Fixed { ms } => SimDuration::from_millis_f64(ms),
            DurationDist::Uniform { min_ms, max_ms } => {
                SimDuration::from_millis_f64(min_ms.max(max_ms))
            }
            DurationDist::Exp { mean_ms } => SimDuration::from_millis_f64(mean_ms),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            DurationDist::Fixed { ms } if !ok(ms) => Err(format!("negative duration {ms} ms")),
            DurationDist::Uniform { min_ms, max_ms } if !ok(min_ms) || !ok(max_ms) => {
                Err("negative duration in uniform range".into())
            }
            DurationDist::Uniform { min_ms, max_ms } if min_ms > max_ms => {
                Err(format!("uniform range min {min_ms} > max {max_ms}"))
            }
            DurationDist::Exp { mean_ms } if !ok(mean_ms) => {
                Err(format!("negative mean {mean_ms} ms"))
            }
            _ => Ok(()),
        }
    }
}
