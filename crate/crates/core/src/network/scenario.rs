//! Scenario document: one TOML file holding the network, demand, transit
//! lines and controller block.
//!
//! Units in the file are the traffic-engineering ones (km/h, veh/km, veh/h);
//! everything is converted to SI on build.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    ArrivalProcess, DemandProfile, Link, LinkId, Movement, MovementId, Network, Node, NodeId,
    Phase, SegmentationStrategy, Source,
};
use crate::control::{AnchorPolicy, BetaMode, ControllerConfig, ControllerKind};
use crate::error::{Error, Result};
use crate::estimation::ErrorModel;
use crate::sim::{DwellModel, OccupancyDist, Penetration, SignalTiming, Stop, TransitLine};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub simulation: SimulationDoc,
    #[serde(default)]
    pub signals: SignalDoc,
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub movements: Vec<MovementDoc>,
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub sources: Vec<SourceDoc>,
    #[serde(default)]
    pub transit_lines: Vec<TransitLineDoc>,
    #[serde(default)]
    pub car_occupancy: OccupancyDoc,
    #[serde(default)]
    pub controller: ControllerDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationDoc {
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub substep_s: f64,
}

impl Default for SimulationDoc {
    fn default() -> Self {
        Self {
            horizon_s: 10_800.0,
            warmup_s: 600.0,
            substep_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalDoc {
    pub decision_step_s: f64,
    pub yellow_s: f64,
    pub lost_time_s: f64,
}

impl Default for SignalDoc {
    fn default() -> Self {
        Self {
            decision_step_s: 10.0,
            yellow_s: 3.0,
            lost_time_s: 1.0,
        }
    }
}

fn default_jam_density() -> f64 {
    133.0
}
fn default_speed() -> f64 {
    50.0
}
fn default_lanes() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub id: String,
    pub length_m: f64,
    /// Per lane.
    #[serde(default = "default_jam_density")]
    pub jam_density_vpkm: f64,
    #[serde(default = "default_speed")]
    pub speed_kmh: f64,
    #[serde(default = "default_lanes")]
    pub lanes: u32,
    #[serde(default)]
    pub stations_m: Vec<f64>,
}

fn default_saturation() -> f64 {
    1800.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementDoc {
    /// Defaults to `"<from>><to>"`.
    #[serde(default)]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    #[serde(default = "default_saturation")]
    pub saturation_vph: f64,
    pub turning_ratio: f64,
}

impl MovementDoc {
    pub fn name(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}>{}", self.from, self.to))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub phases: Vec<PhaseDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub movements: Vec<String>,
}

fn default_source_saturation() -> f64 {
    3600.0
}
fn default_arrivals() -> String {
    "poisson".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    pub link: String,
    /// Maximum loading rate onto the entry link.
    #[serde(default = "default_source_saturation")]
    pub saturation_vph: f64,
    /// `[start_s, veh_per_h]` pairs, piecewise constant.
    pub profile: Vec<[f64; 2]>,
    /// `poisson` or `deterministic`.
    #[serde(default = "default_arrivals")]
    pub arrivals: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopDoc {
    pub link: String,
    pub position_m: f64,
}

fn default_capacity() -> u32 {
    80
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitLineDoc {
    pub id: String,
    pub route: Vec<String>,
    #[serde(default)]
    pub stops: Vec<StopDoc>,
    pub headway_s: f64,
    #[serde(default)]
    pub first_departure_s: f64,
    #[serde(default)]
    pub dwell_base_s: f64,
    #[serde(default)]
    pub dwell_per_pax_s: f64,
    /// Persons including the driver.
    #[serde(default = "default_capacity")]
    pub capacity: u32,
    /// Passengers already on board at dispatch.
    #[serde(default)]
    pub initial_passengers: u32,
    /// `[from_stop, to_stop, persons_per_h]` triples over stop indices.
    #[serde(default)]
    pub od_ph: Vec<[f64; 3]>,
    /// Rate applied to every ordered stop pair without an explicit entry.
    #[serde(default)]
    pub uniform_od_ph: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyDoc {
    pub values: Vec<u32>,
    pub weights: Vec<f64>,
}

impl Default for OccupancyDoc {
    fn default() -> Self {
        Self {
            values: vec![1],
            weights: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerDoc {
    pub variant: String,
    pub segmentation: String,
    /// `position` or `eta`.
    pub beta_mode: String,
    pub theta_s: f64,
    pub penetration: f64,
    pub penetration_by_link: BTreeMap<String, f64>,
    pub clamp_fallback: bool,
    /// Historical stats CSV, relative to the scenario file.
    pub historical: Option<PathBuf>,
    /// `stopped-cv` or `ground-truth`.
    pub anchor: String,
    pub error_level: f64,
    pub error_jitter: f64,
    pub full_observation: bool,
    pub tod_period_s: f64,
}

impl Default for ControllerDoc {
    fn default() -> Self {
        Self {
            variant: "transit-mp".into(),
            segmentation: "S0".into(),
            beta_mode: "position".into(),
            theta_s: 2.0,
            penetration: 1.0,
            penetration_by_link: BTreeMap::new(),
            clamp_fallback: true,
            historical: None,
            anchor: "stopped-cv".into(),
            error_level: 0.0,
            error_jitter: 0.05,
            full_observation: false,
            tod_period_s: 1800.0,
        }
    }
}

/// A validated, unit-converted scenario. Immutable once built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub network: Network,
    pub transit_lines: Vec<TransitLine>,
    pub horizon: f64,
    pub warmup: f64,
    pub substep: f64,
    pub timing: SignalTiming,
    pub car_occupancy: OccupancyDist,
    pub penetration: Penetration,
    pub controller: ControllerConfig,
    /// Directory the scenario was loaded from, for relative paths.
    pub base_dir: Option<PathBuf>,
}

/// Reads, validates and builds a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => {
            Error::config(format!("scenario file {} not found", path.display()))
        }
        _ => Error::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let doc: ScenarioDoc = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut scenario = Scenario::from_doc(&doc)?;
    scenario.base_dir = path.parent().map(Path::to_path_buf);
    Ok(scenario)
}

impl ScenarioDoc {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })
    }
}

fn parse_variant(s: &str) -> Option<ControllerKind> {
    s.parse().ok()
}

/// Every invariant and reference violated by the document; empty when valid.
pub fn validate_network(doc: &ScenarioDoc) -> Vec<String> {
    let mut v = Vec::new();

    let sim = &doc.simulation;
    if !(sim.substep_s > 0.0) {
        v.push(format!(
            "simulation.substep_s must be > 0, got {}",
            sim.substep_s
        ));
    }
    if !(sim.horizon_s > sim.warmup_s) || sim.warmup_s < 0.0 {
        v.push(format!(
            "simulation.horizon_s ({}) must exceed warmup_s ({}) >= 0",
            sim.horizon_s, sim.warmup_s
        ));
    }
    let sig = &doc.signals;
    if sig.yellow_s < 0.0
        || sig.lost_time_s < 0.0
        || sig.decision_step_s <= sig.yellow_s + sig.lost_time_s
    {
        v.push(format!(
            "signals: need decision_step_s > yellow_s + lost_time_s >= 0, got {} / {} / {}",
            sig.decision_step_s, sig.yellow_s, sig.lost_time_s
        ));
    } else if sim.substep_s > 0.0 {
        let ratio = sig.decision_step_s / sim.substep_s;
        if (ratio - ratio.round()).abs() > 1e-9 {
            v.push("signals.decision_step_s must be a multiple of simulation.substep_s".into());
        }
    }

    let mut links: HashMap<&str, &LinkDoc> = HashMap::new();
    for l in &doc.links {
        if links.insert(l.id.as_str(), l).is_some() {
            v.push(format!("duplicate link id `{}`", l.id));
        }
        if !(l.length_m > 0.0) {
            v.push(format!(
                "link `{}`: length must be > 0, got {}",
                l.id, l.length_m
            ));
        }
        if !(l.jam_density_vpkm > 0.0) {
            v.push(format!("link `{}`: jam density must be > 0", l.id));
        }
        if !(l.speed_kmh > 0.0) {
            v.push(format!("link `{}`: free-flow speed must be > 0", l.id));
        }
        if l.lanes == 0 {
            v.push(format!("link `{}`: needs at least one lane", l.id));
        }
        for &s in &l.stations_m {
            if !(0.0..=l.length_m).contains(&s) {
                v.push(format!(
                    "link `{}`: station at {} m lies outside [0, {}]",
                    l.id, s, l.length_m
                ));
            }
        }
        if l.length_m > 0.0 && l.jam_density_vpkm > 0.0 && l.lanes > 0 {
            let cap = l.jam_density_vpkm / 1000.0 * l.length_m * f64::from(l.lanes);
            if cap < 1.0 {
                v.push(format!("link `{}`: stores less than one vehicle", l.id));
            }
        }
    }

    let mut movements: HashMap<String, &MovementDoc> = HashMap::new();
    let mut ratio_sum: BTreeMap<&str, f64> = BTreeMap::new();
    for m in &doc.movements {
        let name = m.name();
        if movements.insert(name.clone(), m).is_some() {
            v.push(format!("duplicate movement id `{name}`"));
        }
        for (role, l) in [("from", &m.from), ("to", &m.to)] {
            if !links.contains_key(l.as_str()) {
                v.push(format!(
                    "movement `{name}`: {role} link `{l}` does not exist"
                ));
            }
        }
        if m.from == m.to {
            v.push(format!("movement `{name}`: from and to are the same link"));
        }
        if !(m.saturation_vph > 0.0) {
            v.push(format!("movement `{name}`: saturation flow must be > 0"));
        }
        if !(0.0..=1.0).contains(&m.turning_ratio) {
            v.push(format!(
                "movement `{name}`: turning ratio {} outside [0, 1]",
                m.turning_ratio
            ));
        }
        *ratio_sum.entry(m.from.as_str()).or_default() += m.turning_ratio;
    }
    for (link, sum) in &ratio_sum {
        if *sum > 1.0 + 1e-9 {
            v.push(format!("link `{link}`: turning ratios sum to {sum:.3} > 1"));
        }
    }

    let mut node_ids = HashSet::new();
    let mut owner: HashMap<String, &str> = HashMap::new();
    let mut link_node: HashMap<&str, &str> = HashMap::new();
    for n in &doc.nodes {
        if !node_ids.insert(n.id.as_str()) {
            v.push(format!("duplicate node id `{}`", n.id));
        }
        if n.phases.is_empty() {
            v.push(format!("node `{}`: no phases", n.id));
        }
        for (k, p) in n.phases.iter().enumerate() {
            if p.movements.is_empty() {
                v.push(format!("node `{}` phase {k}: serves no movement", n.id));
            }
            for mid in &p.movements {
                let Some(m) = movements.get(mid) else {
                    v.push(format!(
                        "node `{}` phase {k}: unknown movement `{mid}`",
                        n.id
                    ));
                    continue;
                };
                match owner.get(mid) {
                    Some(other) if *other != n.id => v.push(format!(
                        "movement `{mid}` appears in phases of nodes `{other}` and `{}`",
                        n.id
                    )),
                    _ => {
                        owner.insert(mid.clone(), n.id.as_str());
                    }
                }
                match link_node.get(m.from.as_str()) {
                    Some(other) if *other != n.id => v.push(format!(
                        "link `{}` feeds movements at both `{other}` and `{}`",
                        m.from, n.id
                    )),
                    _ => {
                        link_node.insert(m.from.as_str(), n.id.as_str());
                    }
                }
            }
        }
    }
    for m in &doc.movements {
        let name = m.name();
        if !owner.contains_key(&name) {
            v.push(format!("movement `{name}` belongs to no phase"));
        }
    }

    let mut sourced = HashSet::new();
    for s in &doc.sources {
        if !links.contains_key(s.link.as_str()) {
            v.push(format!("source: link `{}` does not exist", s.link));
        }
        if !sourced.insert(s.link.as_str()) {
            v.push(format!("link `{}` has more than one source", s.link));
        }
        if !(s.saturation_vph > 0.0) {
            v.push(format!("source `{}`: saturation must be > 0", s.link));
        }
        if s.profile.is_empty() {
            v.push(format!("source `{}`: empty demand profile", s.link));
        }
        let mut prev = f64::NEG_INFINITY;
        for &[start, rate] in &s.profile {
            if start < prev {
                v.push(format!("source `{}`: profile starts must ascend", s.link));
            }
            if rate < 0.0 || !rate.is_finite() {
                v.push(format!("source `{}`: negative or non-finite rate", s.link));
            }
            prev = start;
        }
        if !matches!(s.arrivals.as_str(), "poisson" | "deterministic") {
            v.push(format!(
                "source `{}`: unknown arrival process `{}`",
                s.link, s.arrivals
            ));
        }
    }

    let connected: HashSet<(&str, &str)> = doc
        .movements
        .iter()
        .map(|m| (m.from.as_str(), m.to.as_str()))
        .collect();
    for line in &doc.transit_lines {
        let id = &line.id;
        if line.route.is_empty() {
            v.push(format!("transit line `{id}`: empty route"));
        }
        for l in &line.route {
            if !links.contains_key(l.as_str()) {
                v.push(format!(
                    "transit line `{id}`: route link `{l}` does not exist"
                ));
            }
        }
        for w in line.route.windows(2) {
            if !connected.contains(&(w[0].as_str(), w[1].as_str())) {
                v.push(format!(
                    "transit line `{id}`: no movement from `{}` to `{}`",
                    w[0], w[1]
                ));
            }
        }
        if let Some(first) = line.route.first() {
            if !sourced.contains(first.as_str()) {
                v.push(format!(
                    "transit line `{id}`: first route link `{first}` has no source"
                ));
            }
        }
        let mut last = (0usize, f64::NEG_INFINITY);
        for stop in &line.stops {
            let Some(idx) = line.route.iter().position(|l| *l == stop.link) else {
                v.push(format!(
                    "transit line `{id}`: stop on `{}` is off the route",
                    stop.link
                ));
                continue;
            };
            if let Some(l) = links.get(stop.link.as_str()) {
                if !l
                    .stations_m
                    .iter()
                    .any(|s| (s - stop.position_m).abs() < 1e-6)
                {
                    v.push(format!(
                        "transit line `{id}`: no station at {} m on `{}`",
                        stop.position_m, stop.link
                    ));
                }
            }
            if (idx, stop.position_m) < last {
                v.push(format!("transit line `{id}`: stops are not in route order"));
            }
            last = (idx, stop.position_m);
        }
        if !(line.headway_s > 0.0) {
            v.push(format!("transit line `{id}`: headway must be > 0"));
        }
        if line.dwell_base_s < 0.0 || line.dwell_per_pax_s < 0.0 {
            v.push(format!("transit line `{id}`: negative dwell parameters"));
        }
        if line.capacity < 1 || line.initial_passengers + 1 > line.capacity {
            v.push(format!(
                "transit line `{id}`: capacity must hold driver and initial load"
            ));
        }
        let n = line.stops.len();
        for &[from, to, rate] in &line.od_ph {
            let ok = from >= 0.0
                && to >= 0.0
                && from.fract() == 0.0
                && to.fract() == 0.0
                && (from as usize) < (to as usize)
                && (to as usize) < n;
            if !ok {
                v.push(format!("transit line `{id}`: bad OD pair ({from}, {to})"));
            }
            if rate < 0.0 {
                v.push(format!("transit line `{id}`: negative OD rate"));
            }
        }
    }

    let occ = &doc.car_occupancy;
    if occ.values.is_empty()
        || occ.values.len() != occ.weights.len()
        || occ.values.iter().any(|&p| p < 1)
        || occ.weights.iter().any(|&w| w < 0.0)
        || occ.weights.iter().sum::<f64>() <= 0.0
    {
        v.push("car_occupancy: need matching values >= 1 and non-negative weights".into());
    }

    let c = &doc.controller;
    if parse_variant(&c.variant).is_none() {
        v.push(format!("controller: unknown variant `{}`", c.variant));
    }
    if let Err(e) = c.segmentation.parse::<SegmentationStrategy>() {
        v.push(format!("controller: {e}"));
    }
    if !matches!(c.beta_mode.as_str(), "position" | "eta") {
        v.push(format!("controller: unknown beta mode `{}`", c.beta_mode));
    }
    if c.theta_s < 0.0 {
        v.push("controller: theta_s must be >= 0".into());
    }
    if !(0.0..=1.0).contains(&c.penetration) {
        v.push(format!(
            "controller: penetration {} outside [0, 1]",
            c.penetration
        ));
    }
    for (l, p) in &c.penetration_by_link {
        if !links.contains_key(l.as_str()) {
            v.push(format!("controller: penetration for unknown link `{l}`"));
        }
        if !(0.0..=1.0).contains(p) {
            v.push(format!(
                "controller: penetration {p} for `{l}` outside [0, 1]"
            ));
        }
    }
    if AnchorPolicy::parse(&c.anchor).is_none() {
        v.push(format!("controller: unknown anchor policy `{}`", c.anchor));
    }
    if let Err(e) = ErrorModel::new(c.error_level, c.error_jitter) {
        v.push(format!("controller: {e}"));
    }
    if !(c.tod_period_s > 0.0) {
        v.push("controller: tod_period_s must be > 0".into());
    }

    v
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_doc(&ScenarioDoc::from_toml(text)?)
    }

    pub fn from_doc(doc: &ScenarioDoc) -> Result<Self> {
        let violations = validate_network(doc);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }

        let mut links: Vec<Link> = doc
            .links
            .iter()
            .map(|l| {
                let mut stations = l.stations_m.clone();
                stations.sort_by(f64::total_cmp);
                Link {
                    id: l.id.clone(),
                    length: l.length_m,
                    jam_density: l.jam_density_vpkm / 1000.0,
                    free_flow_speed: l.speed_kmh / 3.6,
                    lanes: l.lanes,
                    stations,
                    is_fictitious: false,
                }
            })
            .collect();
        let link_id: HashMap<&str, LinkId> = doc
            .links
            .iter()
            .enumerate()
            .map(|(k, l)| (l.id.as_str(), LinkId(k)))
            .collect();

        let movement_node: HashMap<String, usize> = doc
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(k, n)| {
                n.phases
                    .iter()
                    .flat_map(move |p| p.movements.iter().map(move |m| (m.clone(), k)))
            })
            .collect();

        let mut movements: Vec<Movement> = doc
            .movements
            .iter()
            .map(|m| {
                let from = link_id[m.from.as_str()];
                let l = &links[from.0];
                Movement {
                    id: m.name(),
                    node: Some(NodeId(movement_node[&m.name()])),
                    from,
                    to: link_id[m.to.as_str()],
                    saturation: m.saturation_vph / 3600.0,
                    turning_ratio: m.turning_ratio,
                    ett: l.length / l.free_flow_speed,
                }
            })
            .collect();
        let movement_id: HashMap<String, MovementId> = movements
            .iter()
            .enumerate()
            .map(|(k, m)| (m.id.clone(), MovementId(k)))
            .collect();

        let nodes = doc
            .nodes
            .iter()
            .map(|n| {
                let phases: Vec<Phase> = n
                    .phases
                    .iter()
                    .enumerate()
                    .map(|(k, p)| Phase {
                        name: p.name.clone().unwrap_or_else(|| format!("P{}", k + 1)),
                        movements: p.movements.iter().map(|m| movement_id[m]).collect(),
                    })
                    .collect();
                let mut served: Vec<MovementId> = phases
                    .iter()
                    .flat_map(|p| p.movements.iter().copied())
                    .collect();
                served.sort();
                served.dedup();
                Node {
                    id: n.id.clone(),
                    phases,
                    movements: served,
                }
            })
            .collect();

        let mut sources = Vec::new();
        for s in &doc.sources {
            let entry = link_id[s.link.as_str()];
            let fictitious_link = LinkId(links.len());
            links.push(Link {
                id: format!("src:{}", s.link),
                length: 0.0,
                jam_density: f64::INFINITY,
                free_flow_speed: links[entry.0].free_flow_speed,
                lanes: 1,
                stations: vec![],
                is_fictitious: true,
            });
            let movement = MovementId(movements.len());
            movements.push(Movement {
                id: format!("src:{}>{}", s.link, s.link),
                node: None,
                from: fictitious_link,
                to: entry,
                saturation: s.saturation_vph / 3600.0,
                turning_ratio: 1.0,
                ett: 0.0,
            });
            sources.push(Source {
                entry,
                fictitious_link,
                movement,
                profile: DemandProfile {
                    segments: s.profile.iter().map(|&[t, r]| (t, r / 3600.0)).collect(),
                },
                arrivals: if s.arrivals == "deterministic" {
                    ArrivalProcess::Deterministic
                } else {
                    ArrivalProcess::Poisson
                },
            });
        }

        let network = Network::new(links, movements, nodes, sources);

        let transit_lines = doc
            .transit_lines
            .iter()
            .map(|t| {
                let n = t.stops.len();
                let mut od = vec![vec![0.0; n]; n];
                if let Some(u) = t.uniform_od_ph {
                    for (i, row) in od.iter_mut().enumerate() {
                        for cell in row.iter_mut().skip(i + 1) {
                            *cell = u / 3600.0;
                        }
                    }
                }
                for &[i, j, r] in &t.od_ph {
                    od[i as usize][j as usize] = r / 3600.0;
                }
                TransitLine {
                    id: t.id.clone(),
                    route: t.route.iter().map(|l| link_id[l.as_str()]).collect(),
                    stops: t
                        .stops
                        .iter()
                        .map(|s| Stop {
                            link: link_id[s.link.as_str()],
                            position: s.position_m,
                        })
                        .collect(),
                    headway: t.headway_s,
                    first_departure: t.first_departure_s,
                    dwell: DwellModel {
                        base: t.dwell_base_s,
                        per_passenger: t.dwell_per_pax_s,
                    },
                    capacity: t.capacity,
                    initial_passengers: t.initial_passengers,
                    od,
                }
            })
            .collect();

        let c = &doc.controller;
        let penetration = Penetration {
            global: c.penetration,
            by_link: c
                .penetration_by_link
                .iter()
                .map(|(l, p)| (link_id[l.as_str()], *p))
                .collect(),
        };
        let controller = ControllerConfig {
            kind: parse_variant(&c.variant).expect("validated"),
            segmentation: c.segmentation.parse().expect("validated"),
            beta_mode: if c.beta_mode == "eta" {
                BetaMode::Eta { theta: c.theta_s }
            } else {
                BetaMode::Position
            },
            clamp_fallback: c.clamp_fallback,
            historical: c.historical.clone(),
            anchor: AnchorPolicy::parse(&c.anchor).expect("validated"),
            error: ErrorModel::new(c.error_level, c.error_jitter).expect("validated"),
            full_observation: c.full_observation,
            tod_period: c.tod_period_s,
        };

        Ok(Scenario {
            name: doc.name.clone(),
            network,
            transit_lines,
            horizon: doc.simulation.horizon_s,
            warmup: doc.simulation.warmup_s,
            substep: doc.simulation.substep_s,
            timing: SignalTiming {
                decision_step: doc.signals.decision_step_s,
                yellow: doc.signals.yellow_s,
                lost: doc.signals.lost_time_s,
            },
            car_occupancy: OccupancyDist::new(
                doc.car_occupancy.values.clone(),
                doc.car_occupancy.weights.clone(),
            ),
            penetration,
            controller,
            base_dir: None,
        })
    }

    /// Resolves a path from the controller block against the scenario directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn decision_substeps(&self) -> usize {
        (self.timing.decision_step / self.substep).round() as usize
    }
}
