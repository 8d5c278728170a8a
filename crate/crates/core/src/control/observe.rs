use crate::network::{segment_vehicle_window, MovementId, SegmentationStrategy};
use crate::sim::{Motion, Vehicle, VehicleClass, World};

use super::BetaMode;

/// Normalized link travel time.
pub fn tau(ltt: f64, ett: f64) -> f64 {
    debug_assert!(ett > 0.0, "ETT must be positive");
    ltt / ett
}

/// Position gating: transit counts only once past the station nearest the
/// stopline, and not while dwelling there.
pub fn beta_position(transit: bool, x: f64, dwelling: bool, station: Option<f64>) -> f64 {
    if !transit {
        return 1.0;
    }
    if dwelling {
        return 0.0;
    }
    match station {
        Some(s) if x < s => 0.0,
        _ => 1.0,
    }
}

/// Arrival-time gating: transit counts when its expected arrival at the
/// stopline, including any remaining dwell and a buffer, falls inside the
/// decision step.
#[allow(clippy::too_many_arguments)]
pub fn beta_eta(
    transit: bool,
    x: f64,
    length: f64,
    station: Option<f64>,
    speed: f64,
    theta: f64,
    t0: f64,
    dwell: f64,
) -> f64 {
    if !transit {
        return 1.0;
    }
    let eta = match station {
        Some(s) if x <= s => (s - x) / speed + dwell + (length - s) / speed + theta,
        _ => (length - x) / speed + theta,
    };
    if eta < t0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedVehicle {
    pub position: f64,
    pub tau: f64,
    pub beta: f64,
    pub occupancy: f64,
    pub transit: bool,
    pub stopped: bool,
}

impl ObservedVehicle {
    pub fn car(tau: f64) -> Self {
        Self {
            position: 0.0,
            tau,
            beta: 1.0,
            occupancy: 1.0,
            transit: false,
            stopped: false,
        }
    }
}

/// What a controller sees of one movement at a decision instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementObservation {
    pub movement: MovementId,
    pub saturation: f64,
    /// Visible vehicles bound for this movement inside the window.
    pub upstream: Vec<ObservedVehicle>,
    /// `(turning ratio, visible vehicles)` per movement leaving the outgoing link.
    pub downstream: Vec<(f64, Vec<ObservedVehicle>)>,
    /// Length of the observation window on the incoming link.
    pub upstream_len: f64,
    /// Length of the observation window on the outgoing link.
    pub downstream_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationConfig {
    pub segmentation: SegmentationStrategy,
    pub beta_mode: BetaMode,
    pub full_observation: bool,
    pub decision_step: f64,
}

fn dwell_estimate(world: &World<'_>, v: &Vehicle) -> f64 {
    let VehicleClass::Transit(k) = v.class else {
        return 0.0;
    };
    if v.motion == Motion::Dwelling {
        return v.remaining_dwell();
    }
    let line = &world.scenario().transit_lines[k];
    let pending = v
        .transit
        .as_ref()
        .and_then(|ts| line.stops.get(ts.next_stop))
        .is_some_and(|s| s.link == v.link);
    if pending {
        line.dwell.base
    } else {
        0.0
    }
}

fn observe_vehicle(
    world: &World<'_>,
    v: &Vehicle,
    ett: f64,
    cfg: &ObservationConfig,
) -> ObservedVehicle {
    let link = world.scenario().network.link(v.link);
    let station = link.nearest_station();
    let transit = v.is_transit();
    let beta = match cfg.beta_mode {
        BetaMode::Position => {
            beta_position(transit, v.position, v.motion == Motion::Dwelling, station)
        }
        BetaMode::Eta { theta } => beta_eta(
            transit,
            v.position,
            link.length,
            station,
            link.free_flow_speed,
            theta,
            cfg.decision_step,
            dwell_estimate(world, v),
        ),
    };
    ObservedVehicle {
        position: v.position,
        tau: tau(v.link_travel_time(world.time()), ett),
        beta,
        occupancy: f64::from(v.occupancy),
        transit,
        stopped: v.motion == Motion::Queued,
    }
}

fn visible(
    world: &World<'_>,
    movement: MovementId,
    cfg: &ObservationConfig,
) -> (Vec<ObservedVehicle>, f64) {
    let net = &world.scenario().network;
    let m = net.movement(movement);
    let link = net.link(m.from);
    let (lo, hi) = segment_vehicle_window(link, cfg.segmentation);
    let seen = world
        .movement_vehicles(movement)
        .filter(|v| (v.is_cv || cfg.full_observation) && v.position >= lo && v.position <= hi)
        .map(|v| observe_vehicle(world, v, m.ett, cfg))
        .collect();
    (seen, hi - lo)
}

pub fn observe_movement(
    world: &World<'_>,
    movement: MovementId,
    cfg: &ObservationConfig,
) -> MovementObservation {
    let net = &world.scenario().network;
    let m = net.movement(movement);
    let (upstream, upstream_len) = visible(world, movement, cfg);
    let (lo, hi) = segment_vehicle_window(net.link(m.to), cfg.segmentation);
    let downstream = net
        .outgoing(m.to)
        .iter()
        .map(|&k| {
            let (seen, _) = visible(world, k, cfg);
            (net.movement(k).turning_ratio, seen)
        })
        .collect();
    MovementObservation {
        movement,
        saturation: m.saturation,
        upstream,
        downstream,
        upstream_len,
        downstream_len: hi - lo,
    }
}
