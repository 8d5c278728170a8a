//! Max-pressure controllers and per-node phase selection.

mod controller;
mod observe;
mod pressure;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::estimation::ErrorModel;
use crate::network::SegmentationStrategy;

pub use controller::{Controller, DecisionOutcome};
pub use observe::{
    beta_eta, beta_position, observe_movement, tau, MovementObservation, ObservationConfig,
    ObservedVehicle,
};
pub use pressure::{
    cvmp_movement, cvmp_pressure, eocc_pressure, mtransit_movement, mtransit_pressure,
    occ_movement, occ_pressure, phase_pressures, select_phase, select_phases, transit_movement,
    transit_pressure, Fallback, MovementPressure, PressureTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    CvMp,
    TransitMp,
    MTransitMp,
    OccMp,
    EoccMp,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::CvMp,
        ControllerKind::TransitMp,
        ControllerKind::MTransitMp,
        ControllerKind::OccMp,
        ControllerKind::EoccMp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::CvMp => "cv-mp",
            ControllerKind::TransitMp => "transit-mp",
            ControllerKind::MTransitMp => "mtransit-mp",
            ControllerKind::OccMp => "occ-mp",
            ControllerKind::EoccMp => "eocc-mp",
        }
    }

    pub fn needs_historical(self) -> bool {
        self == ControllerKind::MTransitMp
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.name().replace('-', "") == norm)
            .ok_or_else(|| format!("unknown controller `{s}`"))
    }
}

/// How transit vehicles are gated out of the pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    /// Counted once past the station nearest the stopline.
    Position,
    /// Counted when expected at the stopline within one decision step.
    Eta { theta: f64 },
}

/// Where the expected-queue recursion is re-anchored when CVs are visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorPolicy {
    /// Stopped CVs on the movement expanded by the penetration estimate.
    StoppedCv,
    /// The simulator's true queue; for ideal-case experiments.
    GroundTruth,
}

impl AnchorPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stopped-cv" => Some(AnchorPolicy::StoppedCv),
            "ground-truth" => Some(AnchorPolicy::GroundTruth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub segmentation: SegmentationStrategy,
    pub beta_mode: BetaMode,
    /// Apply the negative-difference clamp when the historical estimate
    /// stands in for the upstream state.
    pub clamp_fallback: bool,
    pub historical: Option<PathBuf>,
    pub anchor: AnchorPolicy,
    pub error: ErrorModel,
    /// Treat every vehicle as connected (calibration runs).
    pub full_observation: bool,
    pub tod_period: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::TransitMp,
            segmentation: SegmentationStrategy::S0,
            beta_mode: BetaMode::Position,
            clamp_fallback: true,
            historical: None,
            anchor: AnchorPolicy::StoppedCv,
            error: ErrorModel::default(),
            full_observation: false,
            tod_period: 1800.0,
        }
    }
}
