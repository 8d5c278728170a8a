//! Batch orchestration: single runs, sweeps, calibration and region checks.

mod calibrate;
mod run;
mod sweep;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{
    admissible_region_check, demand_vector, penetration_ratio, RegionCertificate,
};
use crate::control::ControllerKind;
use crate::error::{Error, Result};
use crate::estimation::{ErrorModel, HistoricalStats};
use crate::network::{load_scenario, Scenario, SegmentationStrategy};
use crate::sim::Penetration;

pub use calibrate::{calibrate, calibrate_to_file, CALIBRATION_SEED};
pub use run::{run, simulate, RecordOptions, RunDescriptor, RunOutcome, RunResult, RunSummary};
pub use sweep::{sweep, GroupRow, SweepAxis, SweepDescriptor, SweepReport};

/// Global penetration or a per-link map (`link=p,...`; unlisted links use `*=p` or 0).
#[derive(Debug, Clone, PartialEq)]
pub enum PenetrationArg {
    Global(f64),
    PerLink {
        default: f64,
        links: BTreeMap<String, f64>,
    },
}

impl FromStr for PenetrationArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let prob = |v: &str| -> Result<f64, String> {
            let p: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("bad penetration `{v}`"))?;
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(format!("penetration {p} outside [0, 1]"))
            }
        };
        if !s.contains('=') {
            return prob(s).map(PenetrationArg::Global);
        }
        let mut default = 0.0;
        let mut links = BTreeMap::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected link=p, got `{part}`"))?;
            let p = prob(v)?;
            if k.trim() == "*" {
                default = p;
            } else {
                links.insert(k.trim().to_string(), p);
            }
        }
        Ok(PenetrationArg::PerLink { default, links })
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub controller: Option<ControllerKind>,
    pub penetration: Option<PenetrationArg>,
    pub segmentation: Option<SegmentationStrategy>,
    pub error_level: Option<f64>,
    pub horizon: Option<f64>,
    pub warmup: Option<f64>,
    pub historical: Option<PathBuf>,
}

pub fn apply_overrides(s: &mut Scenario, o: &Overrides) -> Result<()> {
    if let Some(k) = o.controller {
        s.controller.kind = k;
    }
    if let Some(seg) = o.segmentation {
        if !seg.is_valid() {
            return Err(Error::config("segment length must be > 0"));
        }
        s.controller.segmentation = seg;
    }
    if let Some(level) = o.error_level {
        s.controller.error = ErrorModel::new(level, s.controller.error.jitter)?;
    }
    if let Some(h) = o.horizon {
        s.horizon = h;
    }
    if let Some(w) = o.warmup {
        s.warmup = w;
    }
    if !(s.horizon > s.warmup && s.warmup >= 0.0) {
        return Err(Error::config(format!(
            "horizon ({}) must exceed warmup ({}) >= 0",
            s.horizon, s.warmup
        )));
    }
    if let Some(p) = &o.historical {
        // Command-line paths are relative to the working directory.
        s.controller.historical = Some(std::path::absolute(p).unwrap_or_else(|_| p.clone()));
    }
    match &o.penetration {
        None => {}
        Some(PenetrationArg::Global(p)) => s.penetration = Penetration::uniform(check_prob(*p)?),
        Some(PenetrationArg::PerLink { default, links }) => {
            let mut by_link = HashMap::new();
            for (name, p) in links {
                check_prob(*p)?;
                let id = s.network.link_id(name).ok_or_else(|| {
                    Error::config(format!("penetration for unknown link `{name}`"))
                })?;
                by_link.insert(id, *p);
            }
            s.penetration = Penetration {
                global: check_prob(*default)?,
                by_link,
            };
        }
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::config(format!("penetration {p} outside [0, 1]")))
    }
}

/// Historical stats named by the scenario, if any.
pub fn load_historical(s: &Scenario) -> Result<Option<HistoricalStats>> {
    match &s.controller.historical {
        None => Ok(None),
        Some(p) => {
            let path = s.resolve(p);
            if !path.exists() {
                return Err(Error::config(format!(
                    "historical stats file {} not found",
                    path.display()
                )));
            }
            HistoricalStats::read(&path).map(Some)
        }
    }
}

/// Loads a scenario and applies overrides.
pub fn prepare(path: &Path, o: &Overrides) -> Result<Scenario> {
    let mut s = load_scenario(path)?;
    apply_overrides(&mut s, o)?;
    Ok(s)
}

/// Admissible-region LP for the scenario's peak demand; `reduced` scales
/// the region by the spread of entry-link penetration.
pub fn check_region(s: &Scenario, reduced: bool) -> Result<RegionCertificate> {
    let kappa = if reduced { penetration_ratio(s) } else { 1.0 };
    if kappa <= 0.0 {
        return Err(Error::config(
            "reduced region is empty: some entry link has zero penetration",
        ));
    }
    admissible_region_check(&s.network, &demand_vector(s), kappa)
}

pub fn write_region_report(cert: &RegionCertificate, path: &Path) -> Result<()> {
    let text =
        toml::to_string(cert).map_err(|e| Error::config(format!("cannot encode report: {e}")))?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn create_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
