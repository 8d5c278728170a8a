use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    detect_starvation, metrics_frame, stability_verdict, trend_is_flat, MetricsFrame,
    MetricsWriter, StabilityThresholds, Verdict,
};
use crate::control::Controller;
use crate::error::Result;
use crate::estimation::HistoricalStats;
use crate::network::{MovementId, Scenario};
use crate::sim::{necessary_condition_monitor, PhaseViolation, Snapshot, SnapshotWriter, World};

use super::{create_dir, create_file, prepare, thread_pool, Overrides};

/// Starvation window, seconds.
pub const STARVATION_WINDOW: f64 = 600.0;

#[derive(Debug, Clone, Default)]
pub struct RecordOptions {
    /// Keep per-decision served/queue histories and phase choices.
    pub histories: bool,
    /// Write a per-substep snapshot CSV here.
    pub snapshots: Option<PathBuf>,
    pub thresholds: StabilityThresholds,
}

/// Per-seed headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub penetration: f64,
    pub segmentation: String,
    pub error_level: f64,
    pub max_vehicle_count: usize,
    pub max_spillover: usize,
    pub max_unserved: usize,
    /// Mean time loss over vehicles arriving after warmup, s.
    pub mean_vehicle_delay: f64,
    pub mean_car_delay: f64,
    pub mean_transit_delay: f64,
    /// Person-seconds of transit rider delay after warmup.
    pub passenger_delay: f64,
    /// Per transit person carried after warmup, s.
    pub mean_passenger_delay: f64,
    pub unserved_slope: f64,
    pub verdict: String,
    pub lyapunov_flat: bool,
    pub starved_movements: usize,
    pub monitor_violations: usize,
    pub nonnegative_violations: usize,
    pub fallback_decisions: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub verdict: Verdict,
    pub frames: Vec<MetricsFrame>,
    pub decision_times: Vec<f64>,
    /// Phase chosen per node at every decision.
    pub decisions: Vec<Vec<usize>>,
    /// Green flag per movement at every decision (when histories are kept).
    pub served: Vec<Vec<bool>>,
    /// Queued vehicles per movement at every decision (when histories are kept).
    pub queues: Vec<Vec<usize>>,
    /// First decision time each phase tripped the necessary-condition monitor.
    pub monitor: Vec<(f64, PhaseViolation)>,
    pub starved: Vec<MovementId>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// One seeded simulation of a prepared scenario.
pub fn simulate(
    scenario: &Scenario,
    historical: Option<&HistoricalStats>,
    seed: u64,
    opts: &RecordOptions,
) -> Result<RunResult> {
    let net = &scenario.network;
    let mut controller = Controller::new(scenario, historical.cloned(), seed)?;
    let mut world = World::new(scenario, seed);
    let mut snap = match &opts.snapshots {
        Some(p) => Some(SnapshotWriter::new(create_file(p)?, scenario)?),
        None => None,
    };
    let steps = (scenario.horizon / scenario.substep).round() as u64;
    let every = scenario.decision_substeps().max(1) as u64;

    let mut frames = Vec::new();
    let mut decision_times = Vec::new();
    let mut decisions = Vec::new();
    let mut served = Vec::new();
    let mut queues = Vec::new();
    let mut monitor: Vec<(f64, PhaseViolation)> = Vec::new();
    let mut monitor_hits = 0;
    let mut nonneg = 0;
    let mut fallback = 0;
    let mut warm_passenger = (0.0, 0u64);

    for k in 0..steps {
        if k % every == 0 {
            let t = world.time();
            frames.push(metrics_frame(&world));
            if warm_passenger.1 == 0 && t >= scenario.warmup {
                warm_passenger = (world.delays().passenger, world.transit_persons().max(1));
            }
            for v in necessary_condition_monitor(&world) {
                monitor_hits += 1;
                if !monitor.iter().any(|(_, u)| *u == v) {
                    monitor.push((t, v));
                }
            }
            if opts.histories {
                queues.push(
                    (0..net.movements.len())
                        .map(|m| world.queued_count(MovementId(m)))
                        .collect(),
                );
            }
            let out = controller.decide(&world);
            nonneg += out.nonnegative_violations;
            fallback += out.fallback_count;
            world.set_phases(&out.decision);
            if opts.histories {
                served.push(
                    net.movements
                        .iter()
                        .enumerate()
                        .map(|(m, mv)| match mv.node {
                            None => true,
                            Some(n) => net
                                .node(n)
                                .phase_serves(out.decision.phases[n.0], MovementId(m)),
                        })
                        .collect(),
                );
            }
            decision_times.push(t);
            decisions.push(out.decision.phases);
        }
        world.step();
        if let Some(w) = snap.as_mut() {
            w.write(&Snapshot::capture(&world))?;
        }
    }
    frames.push(metrics_frame(&world));
    if let Some(mut w) = snap {
        w.flush()?;
    }

    let post: Vec<&MetricsFrame> = frames.iter().filter(|f| f.t >= scenario.warmup).collect();
    let unserved: Vec<(f64, f64)> = post
        .iter()
        .map(|f| (f.t, f.unserved_count as f64))
        .collect();
    let window = (scenario.warmup, scenario.horizon);
    let (verdict, slope) = stability_verdict(&unserved, window, &opts.thresholds);
    let lyap: Vec<(f64, f64)> = post.iter().map(|f| (f.t, f.lyapunov)).collect();

    let trips: Vec<_> = world
        .finished_trips()
        .iter()
        .copied()
        .chain(world.open_trips())
        .filter(|t| t.arrival_time >= scenario.warmup)
        .collect();
    let last = frames.last().copied().unwrap_or_default();
    let passenger_delay = last.passenger_delay - warm_passenger.0;
    let persons = world.transit_persons().saturating_sub(warm_passenger.1);

    let starved: Vec<MovementId> = if opts.histories {
        detect_starvation(&decision_times, &served, &queues, STARVATION_WINDOW)
            .into_iter()
            .map(MovementId)
            .collect()
    } else {
        Vec::new()
    };

    let c = &scenario.controller;
    let summary = RunSummary {
        scenario: scenario.name.clone(),
        controller: c.kind.to_string(),
        seed,
        penetration: scenario.penetration.global,
        segmentation: c.segmentation.to_string(),
        error_level: c.error.level,
        max_vehicle_count: frames.iter().map(|f| f.vehicle_count).max().unwrap_or(0),
        max_spillover: frames.iter().map(|f| f.spillover_count).max().unwrap_or(0),
        max_unserved: frames.iter().map(|f| f.unserved_count).max().unwrap_or(0),
        mean_vehicle_delay: mean(trips.iter().map(|t| t.delay)),
        mean_car_delay: mean(trips.iter().filter(|t| !t.is_transit()).map(|t| t.delay)),
        mean_transit_delay: mean(trips.iter().filter(|t| t.is_transit()).map(|t| t.delay)),
        passenger_delay,
        mean_passenger_delay: if persons > 0 {
            passenger_delay / persons as f64
        } else {
            0.0
        },
        unserved_slope: slope.unwrap_or(f64::NAN),
        verdict: verdict.to_string(),
        lyapunov_flat: trend_is_flat(&lyap, &opts.thresholds),
        starved_movements: starved.len(),
        monitor_violations: monitor_hits,
        nonnegative_violations: nonneg,
        fallback_decisions: fallback,
    };
    Ok(RunResult {
        summary,
        verdict,
        frames,
        decision_times,
        decisions,
        served,
        queues,
        monitor,
        starved,
    })
}

#[derive(Debug, Clone)]
pub struct RunDescriptor {
    pub scenario: PathBuf,
    pub overrides: Overrides,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub snapshots: bool,
}

/// Per-seed summaries plus the seeds that failed.
pub type RunOutcome = (Vec<RunSummary>, Vec<(u64, crate::Error)>);

/// Runs every seed, writing `seed-<n>.csv` metrics and `summary.csv` under
/// `<out>/<scenario>/<controller>/`. Seeds that fail are reported, not fatal.
pub fn run(d: &RunDescriptor) -> Result<RunOutcome> {
    if d.seeds.is_empty() {
        return Err(crate::Error::config("at least one seed is required"));
    }
    let scenario = prepare(&d.scenario, &d.overrides)?;
    let historical = super::sweep::historical_for(&scenario)?;
    Controller::new(&scenario, historical.clone(), 0)?;
    let name = if scenario.name.is_empty() {
        "scenario".to_string()
    } else {
        scenario.name.clone()
    };
    let dir = d.out.join(name).join(scenario.controller.kind.name());
    create_dir(&dir)?;
    let pool = thread_pool(d.workers)?;
    let results: Vec<(u64, Result<RunSummary>)> = pool.install(|| {
        d.seeds
            .par_iter()
            .map(|&seed| {
                let opts = RecordOptions {
                    histories: true,
                    snapshots: d
                        .snapshots
                        .then(|| dir.join(format!("snapshots-{seed}.csv"))),
                    ..RecordOptions::default()
                };
                let res = simulate(&scenario, historical.as_ref(), seed, &opts).and_then(|r| {
                    let mut w =
                        MetricsWriter::new(create_file(&dir.join(format!("seed-{seed}.csv")))?)?;
                    for f in &r.frames {
                        w.write(f)?;
                    }
                    w.finish()?;
                    Ok(r.summary)
                });
                (seed, res)
            })
            .collect()
    });
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => failed.push((seed, e)),
        }
    }
    write_summaries(&dir.join("summary.csv"), &ok)?;
    Ok((ok, failed))
}

pub(super) fn write_summaries(path: &std::path::Path, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
