//! Road network graph: links, movements, phases and fictitious demand sources.
//!
//! Real links carry physical storage; every demand source is modelled as a
//! zero-length fictitious link whose single movement loads the entry link.

mod scenario;
mod segment;

use std::collections::HashMap;

pub use scenario::{
    load_scenario, validate_network, ControllerDoc, LinkDoc, MovementDoc, NodeDoc, OccupancyDoc,
    PhaseDoc, Scenario, ScenarioDoc, SignalDoc, SimulationDoc, SourceDoc, StopDoc, TransitLineDoc,
};
pub use segment::{segment_vehicle_window, SegmentationStrategy};

macro_rules! index_newtype {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_newtype!(
    /// Index into [`Network::links`].
    LinkId
);
index_newtype!(
    /// Index into [`Network::movements`].
    MovementId
);
index_newtype!(
    /// Index into [`Network::nodes`].
    NodeId
);

#[derive(Debug, Clone)]
pub struct Link {
    pub id: String,
    /// Metres; zero for fictitious links.
    pub length: f64,
    /// Vehicles per metre per lane; infinite for fictitious links.
    pub jam_density: f64,
    /// Metres per second.
    pub free_flow_speed: f64,
    pub lanes: u32,
    /// Station positions measured from the inlet, ascending.
    pub stations: Vec<f64>,
    pub is_fictitious: bool,
}

impl Link {
    /// Storage in vehicles: `floor(jam_density * length * lanes)`.
    pub fn capacity(&self) -> usize {
        if self.is_fictitious {
            return usize::MAX;
        }
        (self.jam_density * self.length * f64::from(self.lanes) + 1e-9).floor() as usize
    }

    /// Longitudinal distance between consecutive stopped vehicles when the
    /// queue is packed across all lanes.
    pub fn jam_spacing(&self) -> f64 {
        1.0 / (self.jam_density * f64::from(self.lanes))
    }

    /// Station nearest to the stopline.
    pub fn nearest_station(&self) -> Option<f64> {
        self.stations
            .iter()
            .copied()
            .fold(None, |acc, x| match acc {
                Some(a) if a >= x => Some(a),
                _ => Some(x),
            })
    }

    pub fn free_flow_time(&self) -> f64 {
        if self.is_fictitious {
            0.0
        } else {
            self.length / self.free_flow_speed
        }
    }
}

#[derive(Debug, Clone)]
pub struct Movement {
    pub id: String,
    /// Signalized node, `None` for fictitious source movements (always served).
    pub node: Option<NodeId>,
    pub from: LinkId,
    pub to: LinkId,
    /// Saturation flow at the stopline, veh/s.
    pub saturation: f64,
    pub turning_ratio: f64,
    /// Expected free-flow travel time on the incoming link, s.
    pub ett: f64,
}

impl Movement {
    pub fn is_fictitious(&self) -> bool {
        self.node.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Phase {
    pub name: String,
    pub movements: Vec<MovementId>,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub phases: Vec<Phase>,
    /// Every movement controlled here, ascending.
    pub movements: Vec<MovementId>,
}

impl Node {
    pub fn phase_serves(&self, phase: usize, movement: MovementId) -> bool {
        self.phases[phase].movements.contains(&movement)
    }
}

/// Piecewise-constant arrival rate; `segments` hold `(start_s, veh_per_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub segments: Vec<(f64, f64)>,
}

impl DemandProfile {
    pub fn constant(rate: f64) -> Self {
        Self {
            segments: vec![(0.0, rate)],
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(0.0, |&(_, r)| r)
    }

    /// Time-averaged rate over `[t0, t1)`.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return self.rate_at(t0);
        }
        let mut area = 0.0;
        for (k, &(start, rate)) in self.segments.iter().enumerate() {
            let end = self.segments.get(k + 1).map_or(f64::INFINITY, |s| s.0);
            let lo = start.max(t0);
            let hi = end.min(t1);
            if hi > lo {
                area += rate * (hi - lo);
            }
        }
        area / (t1 - t0)
    }

    pub fn peak_rate(&self) -> f64 {
        self.segments.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|&(s, r)| (s, r * k)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalProcess {
    Poisson,
    /// Evenly spaced arrivals at the profile rate.
    Deterministic,
}

/// Exogenous demand feeding one entry link through a fictitious link.
#[derive(Debug, Clone)]
pub struct Source {
    pub entry: LinkId,
    pub fictitious_link: LinkId,
    pub movement: MovementId,
    pub profile: DemandProfile,
    pub arrivals: ArrivalProcess,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub links: Vec<Link>,
    pub movements: Vec<Movement>,
    pub nodes: Vec<Node>,
    pub sources: Vec<Source>,
    outgoing: Vec<Vec<MovementId>>,
    link_index: HashMap<String, LinkId>,
    movement_index: HashMap<String, MovementId>,
}

impl Network {
    pub fn new(
        links: Vec<Link>,
        movements: Vec<Movement>,
        nodes: Vec<Node>,
        sources: Vec<Source>,
    ) -> Self {
        let mut outgoing = vec![Vec::new(); links.len()];
        for (k, m) in movements.iter().enumerate() {
            if !m.is_fictitious() {
                outgoing[m.from.0].push(MovementId(k));
            }
        }
        let link_index = links
            .iter()
            .enumerate()
            .map(|(k, l)| (l.id.clone(), LinkId(k)))
            .collect();
        let movement_index = movements
            .iter()
            .enumerate()
            .map(|(k, m)| (m.id.clone(), MovementId(k)))
            .collect();
        Self {
            links,
            movements,
            nodes,
            sources,
            outgoing,
            link_index,
            movement_index,
        }
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn movement(&self, id: MovementId) -> &Movement {
        &self.movements[id.0]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link_id(&self, name: &str) -> Option<LinkId> {
        self.link_index.get(name).copied()
    }

    pub fn movement_id(&self, name: &str) -> Option<MovementId> {
        self.movement_index.get(name).copied()
    }

    /// Signalized movements whose incoming link is `link`.
    pub fn outgoing(&self, link: LinkId) -> &[MovementId] {
        &self.outgoing[link.0]
    }

    /// Links without downstream movements: vehicles leave the network at their end.
    pub fn is_exit_link(&self, link: LinkId) -> bool {
        !self.links[link.0].is_fictitious && self.outgoing[link.0].is_empty()
    }

    pub fn movement_between(&self, from: LinkId, to: LinkId) -> Option<MovementId> {
        self.outgoing[from.0]
            .iter()
            .copied()
            .find(|&m| self.movements[m.0].to == to)
    }

    pub fn signalized_movements(&self) -> impl Iterator<Item = MovementId> + '_ {
        self.movements
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_fictitious())
            .map(|(k, _)| MovementId(k))
    }

    pub fn real_links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_fictitious)
            .map(|(k, _)| LinkId(k))
    }

    pub fn source_for_entry(&self, link: LinkId) -> Option<usize> {
        self.sources.iter().position(|s| s.entry == link)
    }
}
