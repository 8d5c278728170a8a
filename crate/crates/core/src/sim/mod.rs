//! Time-stepped mesoscopic dynamics.
//!
//! Each link keeps its vehicles ordered from the stopline back. Moving
//! vehicles advance at free-flow speed until they reach the tail of the
//! standing queue, which is packed at jam spacing from the stopline. Every
//! movement discharges its own queued vehicles, so a red movement never
//! blocks a green one sharing the link.

mod transit;
mod vehicle;
mod world;

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::network::LinkId;

pub use transit::{serve_stop, DwellModel, Stop, StopVisit, TransitLine};
pub use vehicle::{Motion, TransitState, Vehicle, VehicleClass};
pub use world::{
    necessary_condition_monitor, DelayTotals, MovementCounters, PhaseViolation, SignalDecision,
    Snapshot, SnapshotWriter, SourceQueue, Trip, World,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalTiming {
    pub decision_step: f64,
    pub yellow: f64,
    pub lost: f64,
}

impl SignalTiming {
    pub fn effective_saturation(&self, c: f64, switching: bool) -> f64 {
        effective_saturation(c, switching, self.decision_step, self.yellow, self.lost)
    }
}

/// Saturation flow discounted by yellow and lost time over the decision step
/// that follows a phase change.
pub fn effective_saturation(c: f64, switching: bool, t0: f64, ty: f64, tl: f64) -> f64 {
    if switching {
        c * (t0 - ty - tl) / t0
    } else {
        c
    }
}

/// CV penetration, optionally overridden per entry link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Penetration {
    pub global: f64,
    pub by_link: HashMap<LinkId, f64>,
}

impl Penetration {
    pub fn uniform(p: f64) -> Self {
        Self {
            global: p,
            by_link: HashMap::new(),
        }
    }

    pub fn for_link(&self, link: LinkId) -> f64 {
        self.by_link.get(&link).copied().unwrap_or(self.global)
    }
}

/// Bernoulli CV draw; transit vehicles are always connected.
pub fn sample_cv<R: Rng + ?Sized>(class: VehicleClass, p: f64, rng: &mut R) -> bool {
    match class {
        VehicleClass::Transit(_) => true,
        VehicleClass::Car => rng.random_bool(p.clamp(0.0, 1.0)),
    }
}

/// Discrete distribution of persons per private car.
#[derive(Debug, Clone)]
pub struct OccupancyDist {
    values: Vec<u32>,
    index: WeightedIndex<f64>,
}

impl OccupancyDist {
    /// Panics on weights a validated scenario cannot produce.
    pub fn new(values: Vec<u32>, weights: Vec<f64>) -> Self {
        let index = WeightedIndex::new(&weights).expect("validated occupancy weights");
        Self { values, index }
    }

    pub fn single(p: u32) -> Self {
        Self::new(vec![p], vec![1.0])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        self.values[self.index.sample(rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lost_time_discount() {
        assert!((effective_saturation(0.5, true, 10.0, 3.0, 1.0) - 0.3).abs() < 1e-12);
        assert_eq!(effective_saturation(0.5, false, 10.0, 3.0, 1.0), 0.5);
        assert_eq!(effective_saturation(0.5, true, 10.0, 0.0, 0.0), 0.5);
    }

    #[test]
    fn cv_sampling_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(sample_cv(VehicleClass::Car, 1.0, &mut rng));
            assert!(!sample_cv(VehicleClass::Car, 0.0, &mut rng));
            assert!(sample_cv(VehicleClass::Transit(0), 0.0, &mut rng));
        }
    }

    #[test]
    fn cv_sampling_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_cv(VehicleClass::Car, 0.1, &mut rng))
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.1).abs() < 0.01, "{rate}");
    }
}
