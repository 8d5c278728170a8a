//! Historical-data estimates feeding the sparse-CV fallback: penetration,
//! incremental queue accumulation, the travel-time state estimate and the
//! parameter-error model.

mod historical;

use rand::Rng;

use crate::error::{Error, Result};

pub use historical::{HistoricalStats, PeriodStats};

/// Penetration used when a window saw no CVs at all.
pub const PSI_FLOOR: f64 = 0.01;

/// Arrival-rate floor (veh/s) for movements with no observed traffic.
pub const LAMBDA_FLOOR: f64 = 1e-4;

/// Error levels accepted by [`ErrorModel`].
pub const ERROR_LEVELS: [f64; 9] = [-0.5, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.5];

/// `count / (lambda * period)` clamped into `(0, 1]`.
pub fn estimate_penetration(cv_count: u64, lambda: f64, period: f64) -> Result<f64> {
    let denom = lambda * period;
    if !(denom > 0.0) {
        return Err(Error::config(format!(
            "penetration estimate needs lambda * period > 0, got {lambda} * {period}"
        )));
    }
    if cv_count == 0 {
        return Ok(PSI_FLOOR);
    }
    Ok((cv_count as f64 / denom).clamp(PSI_FLOOR, 1.0))
}

/// One decision step of the expected-queue recursion.
///
/// `anchor` replaces the carried estimate when CVs supplied a queue reading.
pub fn iqa_step(
    expected: f64,
    green: bool,
    lambda: f64,
    depart: f64,
    t0: f64,
    anchor: Option<f64>,
) -> f64 {
    let base = anchor.unwrap_or(expected);
    let s = if green { 1.0 } else { 0.0 };
    (base + lambda * t0 - s * depart * t0).max(0.0)
}

/// Normalized upstream travel-time state built from the expected queue: the
/// sampled queue plus the triangle of accumulated waiting, both scaled by
/// the penetration estimate.
pub fn tau_hat(expected: f64, psi: f64, lambda: f64, ett: f64) -> f64 {
    let linear = psi * expected;
    let denom = 2.0 * lambda * ett;
    if denom <= 0.0 {
        return linear;
    }
    linear + psi * expected * expected / denom
}

/// Multiplicative error with a uniformly jittered level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub level: f64,
    pub jitter: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            level: 0.0,
            jitter: 0.0,
        }
    }
}

impl ErrorModel {
    pub fn new(level: f64, jitter: f64) -> Result<Self> {
        if !ERROR_LEVELS.iter().any(|l| (l - level).abs() < 1e-9) {
            return Err(Error::config(format!(
                "error level {level} not in {ERROR_LEVELS:?}"
            )));
        }
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::config(format!(
                "error jitter {jitter} outside [0, 1)"
            )));
        }
        Ok(Self { level, jitter })
    }

    pub fn is_identity(&self) -> bool {
        self.level == 0.0 && self.jitter == 0.0
    }

    pub fn multiplier<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter == 0.0 {
            return 1.0 + self.level;
        }
        let u = rng.random_range(self.level - self.jitter..=self.level + self.jitter);
        1.0 + u
    }
}

pub fn inject_error<R: Rng + ?Sized>(value: f64, model: &ErrorModel, rng: &mut R) -> f64 {
    value * model.multiplier(rng)
}

/// Expected queue carried for one movement between decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IqaState {
    pub expected: f64,
    /// Queue reading taken from CVs at the previous decision, if any.
    pub anchor: Option<f64>,
    pub last_anchor_time: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn penetration_examples() {
        assert_eq!(estimate_penetration(90, 0.1, 900.0).unwrap(), 1.0);
        assert!((estimate_penetration(9, 0.1, 900.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(estimate_penetration(0, 0.1, 900.0).unwrap(), PSI_FLOOR);
        assert!(estimate_penetration(3, 0.0, 900.0).unwrap_err().is_config());
    }

    #[test]
    fn iqa_examples() {
        assert!((iqa_step(5.0, false, 0.2, 0.5, 10.0, None) - 7.0).abs() < 1e-12);
        assert!((iqa_step(5.0, true, 0.2, 0.5, 10.0, None) - 2.0).abs() < 1e-12);
        assert_eq!(iqa_step(0.0, true, 0.0, 0.5, 10.0, None), 0.0);
        assert!((iqa_step(5.0, false, 0.2, 0.5, 10.0, Some(1.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_hat_examples() {
        let v = tau_hat(7.0, 0.1, 0.2, 30.0);
        assert!((v - (0.7 + 0.1 * 49.0 / 12.0)).abs() < 1e-12);
        assert!((v - 1.108_333_333_333).abs() < 1e-9);
        assert_eq!(tau_hat(0.0, 0.1, 0.2, 30.0), 0.0);
        assert!((tau_hat(1.0, 1.0, 0.25, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_band() {
        let m = ErrorModel::new(-0.2, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let k = m.multiplier(&mut rng);
            assert!((0.75..=0.85).contains(&k), "{k}");
        }
        let id = ErrorModel::new(0.0, 0.0).unwrap();
        assert_eq!(inject_error(4.2, &id, &mut rng), 4.2);
        assert!(ErrorModel::new(0.15, 0.05).is_err());
    }

    #[test]
    fn error_mean() {
        let m = ErrorModel::new(0.3, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| m.multiplier(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.3).abs() < 0.005, "{mean}");
    }
}
