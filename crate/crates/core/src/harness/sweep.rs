use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{Controller, ControllerKind};
use crate::error::{Error, Result};
use crate::estimation::HistoricalStats;
use crate::network::{Scenario, SegmentationStrategy};

use super::run::{simulate, write_summaries, RecordOptions, RunDescriptor, RunSummary};
use super::{
    calibrate, create_dir, create_file, load_historical, prepare, thread_pool, PenetrationArg,
    CALIBRATION_SEED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Penetration,
    Segmentation,
    ErrorLevel,
    Controller,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "penetration" => Ok(SweepAxis::Penetration),
            "segmentation" => Ok(SweepAxis::Segmentation),
            "error-level" | "error_level" => Ok(SweepAxis::ErrorLevel),
            "controller" => Ok(SweepAxis::Controller),
            _ => Err(format!("unknown sweep axis `{s}`")),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Penetration => "penetration",
            SweepAxis::Segmentation => "segmentation",
            SweepAxis::ErrorLevel => "error-level",
            SweepAxis::Controller => "controller",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepDescriptor {
    pub base: RunDescriptor,
    pub axis: SweepAxis,
    pub values: Vec<String>,
    /// Controllers crossed with every axis value; ignored on the controller axis.
    pub controllers: Vec<ControllerKind>,
}

/// Seed-averaged results for one (axis value, controller) pair, or the
/// standard deviation across axis values when `axis_value` is `STD`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub axis_value: String,
    pub controller: String,
    pub runs: usize,
    pub max_vehicle_count: f64,
    pub max_spillover: f64,
    pub max_unserved: f64,
    pub mean_vehicle_delay: f64,
    pub mean_car_delay: f64,
    pub mean_transit_delay: f64,
    pub passenger_delay: f64,
    pub mean_passenger_delay: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub runs: Vec<(String, RunSummary)>,
    pub groups: Vec<GroupRow>,
    pub failures: Vec<(String, String, u64, String)>,
}

impl SweepReport {
    pub fn group(&self, value: &str, controller: ControllerKind) -> Option<&GroupRow> {
        self.groups
            .iter()
            .find(|g| g.axis_value == value && g.controller == controller.name())
    }
}

fn apply_axis(d: &SweepDescriptor, value: &str, kind: ControllerKind) -> Result<super::Overrides> {
    let mut o = d.base.overrides.clone();
    o.controller = Some(kind);
    let bad = |e: String| Error::config(format!("sweep value `{value}`: {e}"));
    match d.axis {
        SweepAxis::Penetration => {
            o.penetration = Some(value.parse::<PenetrationArg>().map_err(bad)?)
        }
        SweepAxis::Segmentation => {
            o.segmentation = Some(value.parse::<SegmentationStrategy>().map_err(bad)?)
        }
        SweepAxis::ErrorLevel => {
            let v = value.trim().trim_end_matches('%');
            let x: f64 = v.parse().map_err(|_| bad("not a number".into()))?;
            o.error_level = Some(if value.ends_with('%') || x.abs() > 1.0 {
                x / 100.0
            } else {
                x
            });
        }
        SweepAxis::Controller => {}
    }
    Ok(o)
}

fn group_row(value: &str, controller: &str, rows: &[&RunSummary]) -> GroupRow {
    let n = rows.len().max(1) as f64;
    let avg = |f: &dyn Fn(&RunSummary) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    GroupRow {
        axis_value: value.to_string(),
        controller: controller.to_string(),
        runs: rows.len(),
        max_vehicle_count: avg(&|r| r.max_vehicle_count as f64),
        max_spillover: avg(&|r| r.max_spillover as f64),
        max_unserved: avg(&|r| r.max_unserved as f64),
        mean_vehicle_delay: avg(&|r| r.mean_vehicle_delay),
        mean_car_delay: avg(&|r| r.mean_car_delay),
        mean_transit_delay: avg(&|r| r.mean_transit_delay),
        passenger_delay: avg(&|r| r.passenger_delay),
        mean_passenger_delay: avg(&|r| r.mean_passenger_delay),
    }
}

fn std_row(controller: &str, groups: &[&GroupRow]) -> GroupRow {
    let sd = |f: &dyn Fn(&GroupRow) -> f64| {
        let n = groups.len() as f64;
        if groups.len() < 2 {
            return 0.0;
        }
        let m = groups.iter().map(|g| f(g)).sum::<f64>() / n;
        (groups.iter().map(|g| (f(g) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    GroupRow {
        axis_value: "STD".into(),
        controller: controller.to_string(),
        runs: groups.iter().map(|g| g.runs).sum(),
        max_vehicle_count: sd(&|g| g.max_vehicle_count),
        max_spillover: sd(&|g| g.max_spillover),
        max_unserved: sd(&|g| g.max_unserved),
        mean_vehicle_delay: sd(&|g| g.mean_vehicle_delay),
        mean_car_delay: sd(&|g| g.mean_car_delay),
        mean_transit_delay: sd(&|g| g.mean_transit_delay),
        passenger_delay: sd(&|g| g.passenger_delay),
        mean_passenger_delay: sd(&|g| g.mean_passenger_delay),
    }
}

/// Historical stats for a prepared scenario: the configured file, or an
/// in-memory calibration run when the controller needs one and none is set.
pub(super) fn historical_for(s: &Scenario) -> Result<Option<HistoricalStats>> {
    match load_historical(s)? {
        Some(h) => Ok(Some(h)),
        None if s.controller.kind.needs_historical() => calibrate(s, CALIBRATION_SEED).map(Some),
        None => Ok(None),
    }
}

/// Runs every (axis value, controller, seed) combination in parallel and
/// writes `runs.csv` and `report.csv` under `<out>/sweep-<axis>/`.
pub fn sweep(d: &SweepDescriptor) -> Result<SweepReport> {
    if d.base.seeds.is_empty() || d.values.is_empty() {
        return Err(Error::config("sweep needs at least one seed and one value"));
    }
    let mut cells: Vec<(String, ControllerKind)> = Vec::new();
    for v in &d.values {
        if d.axis == SweepAxis::Controller {
            let k = v.parse::<ControllerKind>().map_err(Error::Config)?;
            cells.push((v.clone(), k));
        } else {
            for &k in &d.controllers {
                cells.push((v.clone(), k));
            }
        }
    }
    let pool = thread_pool(d.base.workers)?;
    let prepared: Vec<(String, ControllerKind, Scenario, Option<HistoricalStats>)> =
        pool.install(|| {
            cells
                .par_iter()
                .map(|(v, k)| {
                    let s = prepare(&d.base.scenario, &apply_axis(d, v, *k)?)?;
                    let h = historical_for(&s)?;
                    Controller::new(&s, h.clone(), 0)?;
                    Ok((v.clone(), *k, s, h))
                })
                .collect::<Result<Vec<_>>>()
        })?;
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|c| d.base.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes: Vec<(usize, u64, Result<RunSummary>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let (_, _, s, h) = &prepared[c];
                let r = simulate(s, h.as_ref(), seed, &RecordOptions::default()).map(|r| r.summary);
                (c, seed, r)
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (c, seed, r) in outcomes {
        let (v, k, _, _) = &prepared[c];
        match r {
            Ok(s) => runs.push((v.clone(), s)),
            Err(e) => failures.push((v.clone(), k.to_string(), seed, e.to_string())),
        }
    }

    let mut groups = Vec::new();
    for (v, k, _, _) in &prepared {
        let rows: Vec<&RunSummary> = runs
            .iter()
            .filter(|(rv, s)| rv == v && s.controller == k.name())
            .map(|(_, s)| s)
            .collect();
        groups.push(group_row(v, k.name(), &rows));
    }
    if d.axis == SweepAxis::ErrorLevel {
        for &k in &d.controllers {
            let gs: Vec<&GroupRow> = groups.iter().filter(|g| g.controller == k.name()).collect();
            let row = std_row(k.name(), &gs);
            groups.push(row);
        }
    }

    let dir = d.base.out.join(format!("sweep-{}", d.axis));
    create_dir(&dir)?;
    let flat: Vec<RunSummary> = runs.iter().map(|(_, s)| s.clone()).collect();
    write_summaries(&dir.join("runs.csv"), &flat)?;
    let mut w = csv::Writer::from_writer(create_file(&dir.join("report.csv"))?);
    for g in &groups {
        w.serialize(g)?;
    }
    w.flush().map_err(csv::Error::from)?;

    Ok(SweepReport {
        axis: d.axis,
        runs,
        groups,
        failures,
    })
}
