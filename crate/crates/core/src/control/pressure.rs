use crate::network::{MovementId, Node};
use crate::sim::SignalDecision;

use super::observe::{MovementObservation, ObservedVehicle};

/// Weight pair and resulting pressure for one movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementPressure {
    pub movement: MovementId,
    pub upstream: f64,
    /// Upstream state without occupancy weighting; drives the clamp.
    pub unweighted: f64,
    pub downstream: f64,
    /// Saturation actually applied, zero when clamped.
    pub saturation: f64,
    pub pressure: f64,
    /// Upstream came from the historical estimate.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureTable {
    pub movements: Vec<MovementPressure>,
    /// Sum of member movement pressures per phase.
    pub phases: Vec<f64>,
}

/// Historical stand-in for an unobserved upstream state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fallback {
    pub p_hat: f64,
    pub tau_hat: f64,
}

fn sum(vs: &[ObservedVehicle], f: impl Fn(&ObservedVehicle) -> f64) -> f64 {
    vs.iter().map(f).sum()
}

fn downstream(obs: &MovementObservation, f: impl Fn(&ObservedVehicle) -> f64 + Copy) -> f64 {
    obs.downstream.iter().map(|(r, vs)| r * sum(vs, f)).sum()
}

fn clamped(
    obs: &MovementObservation,
    upstream: f64,
    unweighted: f64,
    down: f64,
    clamp: bool,
    fallback: bool,
) -> MovementPressure {
    let c = if clamp && unweighted - down < 0.0 {
        0.0
    } else {
        obs.saturation
    };
    MovementPressure {
        movement: obs.movement,
        upstream,
        unweighted,
        downstream: down,
        saturation: c,
        pressure: c * (upstream - down),
        fallback,
    }
}

/// Plain travel-time pressure: every visible vehicle counts once.
pub fn cvmp_movement(obs: &MovementObservation) -> MovementPressure {
    let up = sum(&obs.upstream, |v| v.tau);
    let down = downstream(obs, |v| v.tau);
    clamped(obs, up, up, down, false, false)
}

/// Occupancy-weighted, station-gated travel-time pressure with the
/// negative-difference clamp.
pub fn transit_movement(obs: &MovementObservation) -> MovementPressure {
    let up = sum(&obs.upstream, |v| v.beta * v.occupancy * v.tau);
    let unweighted = sum(&obs.upstream, |v| v.beta * v.tau);
    let down = downstream(obs, |v| v.beta * v.tau);
    clamped(obs, up, unweighted, down, true, false)
}

/// Transit pressure that falls back to `p_hat * tau_hat` when no CV is
/// visible upstream.
pub fn mtransit_movement(
    obs: &MovementObservation,
    fallback: Option<Fallback>,
    clamp_fallback: bool,
) -> MovementPressure {
    match fallback {
        Some(f) if obs.upstream.is_empty() => {
            let down = downstream(obs, |v| v.beta * v.tau);
            clamped(
                obs,
                f.p_hat * f.tau_hat,
                f.tau_hat,
                down,
                clamp_fallback,
                true,
            )
        }
        _ => transit_movement(obs),
    }
}

/// Length-normalized count pressure scaled by mean upstream occupancy;
/// `gated` swaps counts for station-gated counts.
pub fn occ_movement(obs: &MovementObservation, p_bar: f64, gated: bool) -> MovementPressure {
    let w = |v: &ObservedVehicle| if gated { v.beta } else { 1.0 };
    let up = p_bar * sum(&obs.upstream, w) / obs.upstream_len.sqrt();
    let down = if obs.downstream.is_empty() {
        0.0
    } else {
        p_bar * downstream(obs, w) / obs.downstream_len.sqrt()
    };
    clamped(obs, up, up, down, false, false)
}

/// Phase pressures from movement pressures; movements missing from the
/// list contribute nothing.
pub fn phase_pressures(node: &Node, movements: &[MovementPressure]) -> Vec<f64> {
    node.phases
        .iter()
        .map(|p| {
            movements
                .iter()
                .filter(|m| p.movements.contains(&m.movement))
                .map(|m| m.pressure)
                .sum()
        })
        .collect()
}

fn table(node: &Node, movements: Vec<MovementPressure>) -> PressureTable {
    let phases = phase_pressures(node, &movements);
    PressureTable { movements, phases }
}

pub fn cvmp_pressure(node: &Node, obs: &[MovementObservation]) -> PressureTable {
    table(node, obs.iter().map(cvmp_movement).collect())
}

pub fn transit_pressure(node: &Node, obs: &[MovementObservation]) -> PressureTable {
    table(node, obs.iter().map(transit_movement).collect())
}

pub fn mtransit_pressure(
    node: &Node,
    obs: &[MovementObservation],
    fallbacks: &[Option<Fallback>],
    clamp_fallback: bool,
) -> PressureTable {
    let ms = obs
        .iter()
        .zip(fallbacks)
        .map(|(o, f)| mtransit_movement(o, *f, clamp_fallback))
        .collect();
    table(node, ms)
}

pub fn occ_pressure(node: &Node, obs: &[MovementObservation], p_bar: &[f64]) -> PressureTable {
    let ms = obs
        .iter()
        .zip(p_bar)
        .map(|(o, &p)| occ_movement(o, p, false))
        .collect();
    table(node, ms)
}

pub fn eocc_pressure(node: &Node, obs: &[MovementObservation], p_bar: &[f64]) -> PressureTable {
    let ms = obs
        .iter()
        .zip(p_bar)
        .map(|(o, &p)| occ_movement(o, p, true))
        .collect();
    table(node, ms)
}

/// Index of the largest pressure. Exact ties keep the active phase, then
/// the lowest index. NaN never wins.
pub fn select_phase(pressures: &[f64], active: usize) -> usize {
    let best = pressures
        .iter()
        .copied()
        .filter(|p| !p.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if pressures.get(active) == Some(&best) {
        return active;
    }
    pressures.iter().position(|&p| p == best).unwrap_or(active)
}

pub fn select_phases(tables: &[PressureTable], active: &[usize]) -> SignalDecision {
    SignalDecision {
        phases: tables
            .iter()
            .zip(active)
            .map(|(t, &a)| select_phase(&t.phases, a))
            .collect(),
    }
}
