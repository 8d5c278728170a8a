use crate::network::{LinkId, MovementId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleClass {
    Car,
    /// Index into the scenario's transit lines.
    Transit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Moving,
    Queued,
    /// Pulled into a station bay; does not occupy a queue slot.
    Dwelling,
}

/// Per-bus trip state.
#[derive(Debug, Clone)]
pub struct TransitState {
    /// Position in the line's route.
    pub route_pos: usize,
    /// Next stop index to serve (equals the stop count once all are served).
    pub next_stop: usize,
    pub remaining_dwell: f64,
    /// Passengers on board keyed by alighting stop; the last slot rides to the end.
    pub onboard: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: u64,
    pub class: VehicleClass,
    pub is_cv: bool,
    /// Persons on board, driver included.
    pub occupancy: u32,
    pub link: LinkId,
    /// Movement taken at the end of the current link; `None` leaves the network.
    pub next: Option<MovementId>,
    pub entry_time: f64,
    /// Metres from the link inlet.
    pub position: f64,
    pub motion: Motion,
    /// Time the vehicle first joined its source queue.
    pub arrival_time: f64,
    /// Accumulated time loss against free-flow travel, dwell excluded.
    pub delay: f64,
    pub transit: Option<TransitState>,
}

impl Vehicle {
    pub fn is_transit(&self) -> bool {
        matches!(self.class, VehicleClass::Transit(_))
    }

    pub fn link_travel_time(&self, now: f64) -> f64 {
        (now - self.entry_time).max(0.0)
    }

    pub fn remaining_dwell(&self) -> f64 {
        match (&self.transit, self.motion) {
            (Some(ts), Motion::Dwelling) => ts.remaining_dwell.max(0.0),
            _ => 0.0,
        }
    }
}
