use crate::network::LinkId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub link: LinkId,
    /// Metres from the link inlet.
    pub position: f64,
}

/// Dwell time is `base + per_passenger * (boarding + alighting)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellModel {
    pub base: f64,
    pub per_passenger: f64,
}

impl DwellModel {
    pub fn dwell(&self, boarding: u32, alighting: u32) -> f64 {
        self.base + self.per_passenger * f64::from(boarding + alighting)
    }
}

#[derive(Debug, Clone)]
pub struct TransitLine {
    pub id: String,
    pub route: Vec<LinkId>,
    pub stops: Vec<Stop>,
    pub headway: f64,
    pub first_departure: f64,
    pub dwell: DwellModel,
    /// Persons, driver included.
    pub capacity: u32,
    pub initial_passengers: u32,
    /// `od[i][j]`: persons/s travelling from stop `i` to stop `j`.
    pub od: Vec<Vec<f64>>,
}

/// Outcome of one station visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopVisit {
    pub boarded: u32,
    pub alighted: u32,
    pub dwell: f64,
    pub occupancy: u32,
}

/// Alights everyone bound for `stop`, then boards waiting passengers in
/// destination order until the vehicle is full. Leftovers keep waiting.
///
/// `onboard` and `waiting` are keyed by destination stop; `onboard` has one
/// extra trailing slot for riders staying past the last stop.
pub fn serve_stop(
    stop: usize,
    onboard: &mut [u32],
    waiting: &mut [u32],
    capacity: u32,
    dwell: &DwellModel,
) -> StopVisit {
    let alighted = std::mem::take(&mut onboard[stop]);
    let riding: u32 = onboard.iter().sum();
    let mut free = capacity.saturating_sub(1 + riding);
    let mut boarded = 0;
    for (dest, w) in waiting.iter_mut().enumerate().skip(stop + 1) {
        let n = (*w).min(free);
        *w -= n;
        onboard[dest] += n;
        free -= n;
        boarded += n;
    }
    StopVisit {
        boarded,
        alighted,
        dwell: dwell.dwell(boarded, alighted),
        occupancy: 1 + riding + boarded,
    }
}
