use std::path::Path;

use crate::control::{Controller, ControllerKind};
use crate::error::Result;
use crate::estimation::{estimate_penetration, HistoricalStats, PeriodStats, LAMBDA_FLOOR};
use crate::network::Scenario;
use crate::sim::{MovementCounters, World};

use super::create_file;

/// Seed used when a run needs historical stats and none were supplied.
pub const CALIBRATION_SEED: u64 = 0;

/// Full-observation run that measures per-movement rates in time-of-day windows.
///
/// CV flags still follow the scenario penetration so the penetration
/// estimate reflects it; the controller sees every vehicle.
pub fn calibrate(scenario: &Scenario, seed: u64) -> Result<HistoricalStats> {
    let mut s = scenario.clone();
    if s.controller.kind.needs_historical() {
        s.controller.kind = ControllerKind::TransitMp;
    }
    s.controller.full_observation = true;
    let net = &s.network;
    let period = s.controller.tod_period;
    let mut controller = Controller::new(&s, None, seed)?;
    let mut world = World::new(&s, seed);
    let steps = (s.horizon / s.substep).round() as u64;
    let every = s.decision_substeps().max(1) as u64;

    let mut out = HistoricalStats::default();
    let mut start = 0.0;
    let mut base: Vec<MovementCounters> = world.counters().to_vec();
    let mut close =
        |world: &World<'_>, start: f64, end: f64, base: &[MovementCounters]| -> Result<()> {
            let len = end - start;
            if len <= 0.0 {
                return Ok(());
            }
            for m in net.signalized_movements() {
                let mv = net.movement(m);
                let now = &world.counters()[m.0];
                let b = &base[m.0];
                let arrivals = now.arrivals - b.arrivals;
                let cvs = now.cv_arrivals - b.cv_arrivals;
                let occ = now.cv_occupancy - b.cv_occupancy;
                let dep = now.departures - b.departures;
                // Discharge rate while a queue is present; the IQA clamp
                // already covers greens that run the queue dry.
                let green = now.discharge_time - b.discharge_time;
                let mut flagged = false;
                let mut lambda = arrivals as f64 / len;
                if lambda < LAMBDA_FLOOR {
                    lambda = LAMBDA_FLOOR;
                    flagged = true;
                }
                let psi = estimate_penetration(cvs, lambda, len)?;
                flagged |= cvs == 0;
                let p_hat = if cvs > 0 {
                    occ as f64 / cvs as f64
                } else {
                    flagged = true;
                    1.0
                };
                let depart = if dep > 0 && green > 0.0 {
                    dep as f64 / green
                } else {
                    flagged = true;
                    mv.saturation
                };
                out.insert(
                    &mv.id,
                    PeriodStats {
                        start,
                        end,
                        lambda,
                        psi,
                        p_hat,
                        depart,
                        ett: mv.ett,
                        flagged,
                    },
                );
            }
            Ok(())
        };

    for k in 0..steps {
        if k % every == 0 {
            let d = controller.decide(&world);
            world.set_phases(&d.decision);
        }
        world.step();
        let t = world.time();
        if t - start >= period - 1e-9 {
            close(&world, start, t, &base)?;
            base = world.counters().to_vec();
            start = t;
        }
    }
    if world.time() - start > 1e-9 {
        close(&world, start, world.time(), &base)?;
    }
    Ok(out)
}

pub fn calibrate_to_file(scenario: &Scenario, seed: u64, path: &Path) -> Result<HistoricalStats> {
    let h = calibrate(scenario, seed)?;
    h.write(create_file(path)?)?;
    Ok(h)
}
