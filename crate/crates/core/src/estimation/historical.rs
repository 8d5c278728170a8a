use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// Estimates for one movement over one time-of-day window. Rates in veh/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStats {
    pub start: f64,
    pub end: f64,
    pub lambda: f64,
    pub psi: f64,
    pub p_hat: f64,
    pub depart: f64,
    pub ett: f64,
    /// Set when a floor or fallback replaced an observed value.
    pub flagged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    movement: String,
    period_start_s: f64,
    period_end_s: f64,
    lambda_vph: f64,
    psi: f64,
    p_hat: f64,
    depart_vph: f64,
    ett_s: f64,
    flagged: bool,
}

/// Per-movement, per-window estimates keyed by movement id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoricalStats {
    pub periods: BTreeMap<String, Vec<PeriodStats>>,
}

impl HistoricalStats {
    pub fn insert(&mut self, movement: &str, stats: PeriodStats) {
        let v = self.periods.entry(movement.to_string()).or_default();
        v.push(stats);
        v.sort_by(|a, b| a.start.total_cmp(&b.start));
    }

    /// Window covering `t`; times outside the table use the nearest window.
    pub fn lookup(&self, movement: &str, t: f64) -> Option<&PeriodStats> {
        let v = self.periods.get(movement)?;
        v.iter().find(|p| p.start <= t && t < p.end).or_else(|| {
            if t < v.first()?.start {
                v.first()
            } else {
                v.last()
            }
        })
    }

    /// Every signalized movement must have at least one window.
    pub fn check_covers(&self, net: &Network) -> Result<()> {
        let missing: Vec<&str> = net
            .signalized_movements()
            .map(|m| net.movement(m).id.as_str())
            .filter(|id| !self.periods.contains_key(*id))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "historical stats missing for movements: {}",
                missing.join(", ")
            )))
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut out = Self::default();
        for row in rdr.deserialize() {
            let r: Row = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            if !(r.lambda_vph > 0.0 && r.psi > 0.0 && r.psi <= 1.0 && r.p_hat >= 1.0) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("movement `{}`: estimates out of range", r.movement),
                });
            }
            out.insert(
                &r.movement,
                PeriodStats {
                    start: r.period_start_s,
                    end: r.period_end_s,
                    lambda: r.lambda_vph / 3600.0,
                    psi: r.psi,
                    p_hat: r.p_hat,
                    depart: r.depart_vph / 3600.0,
                    ett: r.ett_s,
                    flagged: r.flagged,
                },
            );
        }
        Ok(out)
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (movement, periods) in &self.periods {
            for p in periods {
                w.serialize(Row {
                    movement: movement.clone(),
                    period_start_s: p.start,
                    period_end_s: p.end,
                    lambda_vph: p.lambda * 3600.0,
                    psi: p.psi,
                    p_hat: p.p_hat,
                    depart_vph: p.depart * 3600.0,
                    ett_s: p.ett,
                    flagged: p.flagged,
                })?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(start: f64, lambda: f64) -> PeriodStats {
        PeriodStats {
            start,
            end: start + 1800.0,
            lambda,
            psi: 0.5,
            p_hat: 1.2,
            depart: 0.4,
            ett: 30.0,
            flagged: false,
        }
    }

    #[test]
    fn lookup_picks_window_and_clamps() {
        let mut h = HistoricalStats::default();
        h.insert("a>b", stats(1800.0, 0.2));
        h.insert("a>b", stats(0.0, 0.1));
        assert_eq!(h.lookup("a>b", 10.0).unwrap().lambda, 0.1);
        assert_eq!(h.lookup("a>b", 2000.0).unwrap().lambda, 0.2);
        assert_eq!(h.lookup("a>b", 99_999.0).unwrap().lambda, 0.2);
        assert!(h.lookup("x", 0.0).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let mut h = HistoricalStats::default();
        h.insert("a>b", stats(0.0, 0.125));
        let mut buf = Vec::new();
        h.write(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        std::fs::write(&p, &buf).unwrap();
        let back = HistoricalStats::read(&p).unwrap();
        let a = back.lookup("a>b", 0.0).unwrap();
        assert!((a.lambda - 0.125).abs() < 1e-12);
        assert!((a.depart - 0.4).abs() < 1e-12);
    }
}
