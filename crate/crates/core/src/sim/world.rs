use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::sample_cv;
use super::transit::serve_stop;
use super::vehicle::{Motion, TransitState, Vehicle, VehicleClass};
use crate::error::Result;
use crate::network::{ArrivalProcess, LinkId, MovementId, NodeId, Scenario};

const EPS: f64 = 1e-9;

/// Active phase index per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalDecision {
    pub phases: Vec<usize>,
}

/// Point queue in front of an entry link.
#[derive(Debug, Clone, Default)]
pub struct SourceQueue {
    pub pending: VecDeque<Vehicle>,
    credit: f64,
    arrival_acc: f64,
    /// Vehicle-steps refused because the entry link was full.
    pub cumulative_blocked: u64,
    pub loaded: u64,
}

impl SourceQueue {
    pub fn backlog(&self) -> usize {
        self.pending.len()
    }
}

/// Cumulative per-movement counts, sampled by calibration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MovementCounters {
    /// Vehicles that entered the incoming link bound for this movement.
    pub arrivals: u64,
    pub cv_arrivals: u64,
    /// Sum of occupancy over CV arrivals.
    pub cv_occupancy: u64,
    pub departures: u64,
    /// Seconds of green.
    pub green_time: f64,
    /// Seconds of green that began with a queue waiting.
    pub discharge_time: f64,
}

/// Per-vehicle delay record for averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub arrival_time: f64,
    pub delay: f64,
    pub class: VehicleClass,
    pub is_cv: bool,
}

impl Trip {
    pub fn is_transit(&self) -> bool {
        matches!(self.class, VehicleClass::Transit(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelayTotals {
    pub cv_car: f64,
    pub nv: f64,
    pub transit: f64,
    /// Person-seconds accumulated by transit riders.
    pub passenger: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseViolation {
    pub node: NodeId,
    pub phase: usize,
}

struct Streams {
    demand: ChaCha8Rng,
    cv: ChaCha8Rng,
    turn: ChaCha8Rng,
    occupancy: ChaCha8Rng,
    passengers: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            demand: stream(1),
            cv: stream(2),
            turn: stream(3),
            occupancy: stream(4),
            passengers: stream(5),
        }
    }
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u32)
}

/// Full mutable simulation state for one run.
pub struct World<'a> {
    scenario: &'a Scenario,
    t: f64,
    step_index: u64,
    links: Vec<Vec<Vehicle>>,
    sources: Vec<SourceQueue>,
    active: Vec<usize>,
    switched: Vec<bool>,
    credit: Vec<f64>,
    counters: Vec<MovementCounters>,
    waiting: Vec<Vec<Vec<u32>>>,
    last_visit: Vec<Vec<f64>>,
    next_dispatch: Vec<f64>,
    rng: Streams,
    next_id: u64,
    created: u64,
    exited: u64,
    delays: DelayTotals,
    trips: Vec<Trip>,
    transit_persons: u64,
}

impl<'a> World<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Self {
        let net = &scenario.network;
        let lines = &scenario.transit_lines;
        Self {
            scenario,
            t: 0.0,
            step_index: 0,
            links: vec![Vec::new(); net.links.len()],
            sources: vec![SourceQueue::default(); net.sources.len()],
            active: vec![0; net.nodes.len()],
            switched: vec![false; net.nodes.len()],
            credit: vec![0.0; net.movements.len()],
            counters: vec![MovementCounters::default(); net.movements.len()],
            waiting: lines
                .iter()
                .map(|l| vec![vec![0; l.stops.len()]; l.stops.len()])
                .collect(),
            last_visit: lines.iter().map(|l| vec![0.0; l.stops.len()]).collect(),
            next_dispatch: lines.iter().map(|l| l.first_departure).collect(),
            rng: Streams::new(seed),
            next_id: 0,
            created: 0,
            exited: 0,
            delays: DelayTotals::default(),
            trips: Vec::new(),
            transit_persons: 0,
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Vehicles on `link`, nearest to the stopline first.
    pub fn vehicles(&self, link: LinkId) -> &[Vehicle] {
        &self.links[link.0]
    }

    pub fn sources(&self) -> &[SourceQueue] {
        &self.sources
    }

    pub fn active_phases(&self) -> &[usize] {
        &self.active
    }

    pub fn switched(&self, node: NodeId) -> bool {
        self.switched[node.0]
    }

    pub fn counters(&self) -> &[MovementCounters] {
        &self.counters
    }

    pub fn delays(&self) -> DelayTotals {
        self.delays
    }

    pub fn finished_trips(&self) -> &[Trip] {
        &self.trips
    }

    /// Drivers, initial riders and boardings carried by transit so far.
    pub fn transit_persons(&self) -> u64 {
        self.transit_persons
    }

    pub fn vehicle_count(&self) -> usize {
        self.scenario
            .network
            .real_links()
            .map(|l| self.links[l.0].len())
            .sum()
    }

    pub fn spillover_count(&self) -> usize {
        self.sources.iter().map(SourceQueue::backlog).sum()
    }

    pub fn created(&self) -> u64 {
        self.created
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    /// Every trip not yet finished, with delay so far.
    pub fn open_trips(&self) -> impl Iterator<Item = Trip> + '_ {
        let on_links = self.links.iter().flatten();
        let pending = self.sources.iter().flat_map(|s| s.pending.iter());
        on_links.chain(pending).map(|v| Trip {
            arrival_time: v.arrival_time,
            delay: v.delay,
            class: v.class,
            is_cv: v.is_cv,
        })
    }

    /// Vehicles on `link` bound for `movement`.
    pub fn movement_vehicles(&self, movement: MovementId) -> impl Iterator<Item = &Vehicle> + '_ {
        let from = self.scenario.network.movement(movement).from;
        self.links[from.0]
            .iter()
            .filter(move |v| v.next == Some(movement))
    }

    pub fn queued_count(&self, movement: MovementId) -> usize {
        let net = &self.scenario.network;
        let m = net.movement(movement);
        if m.is_fictitious() {
            return self
                .sources
                .iter()
                .zip(&net.sources)
                .find(|(_, s)| s.movement == movement)
                .map_or(0, |(q, _)| q.backlog());
        }
        self.movement_vehicles(movement)
            .filter(|v| v.motion == Motion::Queued)
            .count()
    }

    /// Installs the decision for the coming decision step.
    pub fn set_phases(&mut self, decision: &SignalDecision) {
        for (n, &p) in decision.phases.iter().enumerate() {
            self.switched[n] = p != self.active[n];
            self.active[n] = p;
        }
    }

    /// Places a vehicle directly on a real link, moving, with zero travel time.
    pub fn place_vehicle(
        &mut self,
        link: LinkId,
        position: f64,
        next: Option<MovementId>,
        is_cv: bool,
        occupancy: u32,
    ) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.created += 1;
        let v = Vehicle {
            id,
            class: VehicleClass::Car,
            is_cv,
            occupancy,
            link,
            next,
            entry_time: self.t,
            position,
            motion: Motion::Moving,
            arrival_time: self.t,
            delay: 0.0,
            transit: None,
        };
        let list = &mut self.links[link.0];
        let at = list.partition_point(|u| u.position >= position);
        list.insert(at, v);
        id
    }

    /// Advances one substep.
    pub fn step(&mut self) {
        let dt = self.scenario.substep;
        self.generate_arrivals(dt);
        self.update_dwell(dt);
        self.move_vehicles(dt);
        self.discharge(dt);
        self.load_sources(dt);
        let mut added = DelayTotals::default();
        for q in &mut self.sources {
            for v in &mut q.pending {
                v.delay += dt;
                add_delay(&mut added, v, dt);
            }
        }
        self.accumulate(added);
        self.t += dt;
        self.step_index += 1;
    }

    fn accumulate(&mut self, d: DelayTotals) {
        self.delays.cv_car += d.cv_car;
        self.delays.nv += d.nv;
        self.delays.transit += d.transit;
        self.delays.passenger += d.passenger;
    }

    fn new_vehicle(&mut self, class: VehicleClass, entry: LinkId) -> Vehicle {
        let scenario = self.scenario;
        let id = self.next_id;
        self.next_id += 1;
        self.created += 1;
        let is_cv = sample_cv(
            class,
            scenario.penetration.for_link(entry),
            &mut self.rng.cv,
        );
        let (occupancy, transit) = match class {
            VehicleClass::Car => (scenario.car_occupancy.sample(&mut self.rng.occupancy), None),
            VehicleClass::Transit(k) => {
                let line = &scenario.transit_lines[k];
                let mut onboard = vec![0; line.stops.len() + 1];
                onboard[line.stops.len()] = line.initial_passengers;
                let occ = 1 + line.initial_passengers;
                self.transit_persons += u64::from(occ);
                (
                    occ,
                    Some(TransitState {
                        route_pos: 0,
                        next_stop: 0,
                        remaining_dwell: 0.0,
                        onboard,
                    }),
                )
            }
        };
        Vehicle {
            id,
            class,
            is_cv,
            occupancy,
            link: entry,
            next: None,
            entry_time: self.t,
            position: 0.0,
            motion: Motion::Moving,
            arrival_time: self.t,
            delay: 0.0,
            transit,
        }
    }

    fn generate_arrivals(&mut self, dt: f64) {
        let scenario = self.scenario;
        let net = &scenario.network;
        for k in 0..net.sources.len() {
            let src = &net.sources[k];
            let rate = src.profile.rate_at(self.t);
            let n = match src.arrivals {
                ArrivalProcess::Poisson => poisson(rate * dt, &mut self.rng.demand),
                ArrivalProcess::Deterministic => {
                    let q = &mut self.sources[k];
                    q.arrival_acc += rate * dt;
                    let n = (q.arrival_acc + EPS).floor();
                    q.arrival_acc -= n;
                    n as u32
                }
            };
            for _ in 0..n {
                let v = self.new_vehicle(VehicleClass::Car, src.entry);
                self.sources[k].pending.push_back(v);
            }
            self.counters[src.movement.0].arrivals += u64::from(n);
        }
        let end = self.t + dt;
        for k in 0..self.scenario.transit_lines.len() {
            while self.next_dispatch[k] < end - EPS {
                let line = &scenario.transit_lines[k];
                self.next_dispatch[k] += line.headway;
                let entry = line.route[0];
                let Some(s) = net.source_for_entry(entry) else {
                    continue;
                };
                let v = self.new_vehicle(VehicleClass::Transit(k), entry);
                self.sources[s].pending.push_back(v);
                self.counters[net.sources[s].movement.0].arrivals += 1;
            }
        }
    }

    fn update_dwell(&mut self, dt: f64) {
        for list in &mut self.links {
            for v in list.iter_mut().filter(|v| v.motion == Motion::Dwelling) {
                let ts = v.transit.as_mut().expect("only transit dwells");
                ts.remaining_dwell -= dt;
                if ts.remaining_dwell <= EPS {
                    ts.remaining_dwell = 0.0;
                    ts.next_stop += 1;
                    v.motion = Motion::Moving;
                }
            }
        }
    }

    /// Stop position still to be served on the vehicle's current link.
    fn pending_stop(&self, v: &Vehicle) -> Option<(usize, f64)> {
        let VehicleClass::Transit(k) = v.class else {
            return None;
        };
        let ts = v.transit.as_ref()?;
        let stop = self.scenario.transit_lines[k].stops.get(ts.next_stop)?;
        (stop.link == v.link).then_some((ts.next_stop, stop.position))
    }

    fn move_vehicles(&mut self, dt: f64) {
        let scenario = self.scenario;
        let net = &scenario.network;
        let mut added = DelayTotals::default();
        for l in net.real_links() {
            let link = net.link(l);
            let spacing = link.jam_spacing();
            let speed = link.free_flow_speed;
            let mut list = std::mem::take(&mut self.links[l.0]);
            let mut rank = 0usize;
            let mut cap = link.length;
            let mut keep = Vec::with_capacity(list.len());
            for mut v in list.drain(..) {
                if v.motion == Motion::Dwelling {
                    keep.push(v);
                    continue;
                }
                let target = link.length - rank as f64 * spacing;
                let stop = self.pending_stop(&v);
                let mut limit = cap.min(target);
                if let Some((_, s)) = stop {
                    limit = limit.min(s.max(v.position));
                }
                let x0 = v.position;
                let x1 = x0.max((x0 + speed * dt).min(limit));
                let loss = dt - (x1 - x0) / speed;
                v.delay += loss;
                add_delay(&mut added, &v, loss);
                v.position = x1;
                if let Some((idx, s)) = stop {
                    if x1 >= s - EPS {
                        v.position = s;
                        self.arrive_at_stop(&mut v, idx);
                        if v.motion == Motion::Dwelling {
                            keep.push(v);
                            continue;
                        }
                    }
                }
                if x1 >= target - EPS && self.pending_stop(&v).is_none() {
                    if v.next.is_none() {
                        self.finish(v);
                        continue;
                    }
                    v.motion = Motion::Queued;
                    rank += 1;
                } else {
                    v.motion = Motion::Moving;
                }
                cap = v.position;
                keep.push(v);
            }
            keep.sort_by(|a, b| b.position.total_cmp(&a.position));
            self.links[l.0] = keep;
        }
        self.accumulate(added);
    }

    fn arrive_at_stop(&mut self, v: &mut Vehicle, stop: usize) {
        let VehicleClass::Transit(k) = v.class else {
            return;
        };
        let scenario = self.scenario;
        let line = &scenario.transit_lines[k];
        let elapsed = self.t - self.last_visit[k][stop];
        self.last_visit[k][stop] = self.t;
        for dest in stop + 1..line.stops.len() {
            let n = poisson(line.od[stop][dest] * elapsed, &mut self.rng.passengers);
            self.waiting[k][stop][dest] += n;
        }
        let ts = v.transit.as_mut().expect("transit state");
        let visit = serve_stop(
            stop,
            &mut ts.onboard,
            &mut self.waiting[k][stop],
            line.capacity,
            &line.dwell,
        );
        self.transit_persons += u64::from(visit.boarded);
        v.occupancy = visit.occupancy;
        if visit.dwell > EPS {
            ts.remaining_dwell = visit.dwell;
            v.motion = Motion::Dwelling;
        } else {
            ts.next_stop += 1;
        }
    }

    fn finish(&mut self, v: Vehicle) {
        self.exited += 1;
        self.trips.push(Trip {
            arrival_time: v.arrival_time,
            delay: v.delay,
            class: v.class,
            is_cv: v.is_cv,
        });
    }

    /// Assigns the movement a vehicle will take at the end of `link`.
    fn route_vehicle(&mut self, v: &mut Vehicle, link: LinkId) {
        let scenario = self.scenario;
        let net = &scenario.network;
        v.link = link;
        v.position = 0.0;
        v.motion = Motion::Moving;
        v.entry_time = self.t + scenario.substep;
        v.next = match v.class {
            VehicleClass::Car => {
                let u: f64 = self.rng.turn.random();
                let mut acc = 0.0;
                let mut pick = None;
                for &m in net.outgoing(link) {
                    acc += net.movement(m).turning_ratio;
                    if u < acc {
                        pick = Some(m);
                        break;
                    }
                }
                pick
            }
            VehicleClass::Transit(k) => {
                let route = &scenario.transit_lines[k].route;
                let ts = v.transit.as_mut().expect("transit state");
                if route[ts.route_pos] != link {
                    ts.route_pos += 1;
                }
                route
                    .get(ts.route_pos + 1)
                    .and_then(|&to| net.movement_between(link, to))
            }
        };
        if let Some(m) = v.next {
            let c = &mut self.counters[m.0];
            c.arrivals += 1;
            if v.is_cv {
                c.cv_arrivals += 1;
                c.cv_occupancy += u64::from(v.occupancy);
            }
        }
    }

    fn discharge(&mut self, dt: f64) {
        let scenario = self.scenario;
        let net = &scenario.network;
        let counts: Vec<usize> = self.links.iter().map(Vec::len).collect();
        let mut reserved = vec![0usize; net.links.len()];
        let mut moved: Vec<(LinkId, Vehicle)> = Vec::new();
        for (n, node) in net.nodes.iter().enumerate() {
            let phase = self.active[n];
            for &m in &node.movements {
                if !node.phase_serves(phase, m) {
                    self.credit[m.0] = 0.0;
                    continue;
                }
                let mv = net.movement(m);
                let c = scenario
                    .timing
                    .effective_saturation(mv.saturation, self.switched[n]);
                self.counters[m.0].green_time += dt;
                self.credit[m.0] += c * dt;
                let spare = net
                    .link(mv.to)
                    .capacity()
                    .saturating_sub(counts[mv.to.0] + reserved[mv.to.0]);
                let allowed = ((self.credit[m.0] + EPS).floor() as usize).min(spare);
                let list = &mut self.links[mv.from.0];
                if list
                    .iter()
                    .any(|v| v.next == Some(m) && v.motion == Motion::Queued)
                {
                    self.counters[m.0].discharge_time += dt;
                }
                let mut k = 0;
                let mut served = 0;
                while k < list.len() && served < allowed {
                    let v = &list[k];
                    if v.next == Some(m) && v.motion == Motion::Queued {
                        moved.push((mv.to, list.remove(k)));
                        served += 1;
                    } else {
                        k += 1;
                    }
                }
                reserved[mv.to.0] += served;
                self.counters[m.0].departures += served as u64;
                self.credit[m.0] = (self.credit[m.0] - served as f64).min((c * dt).max(1.0));
            }
        }
        for (to, mut v) in moved {
            self.route_vehicle(&mut v, to);
            self.links[to.0].push(v);
        }
    }

    fn load_sources(&mut self, dt: f64) {
        let scenario = self.scenario;
        let net = &scenario.network;
        for k in 0..net.sources.len() {
            let src = &net.sources[k];
            let sat = net.movement(src.movement).saturation;
            let q = &mut self.sources[k];
            q.credit += sat * dt;
            let wanted = ((q.credit + EPS).floor() as usize).min(q.pending.len());
            let spare = net
                .link(src.entry)
                .capacity()
                .saturating_sub(self.links[src.entry.0].len());
            let n = wanted.min(spare);
            q.cumulative_blocked += (wanted - n) as u64;
            q.loaded += n as u64;
            q.credit = (q.credit - n as f64).min((sat * dt).max(1.0));
            let batch: Vec<Vehicle> = q.pending.drain(..n).collect();
            self.counters[src.movement.0].departures += n as u64;
            for mut v in batch {
                self.route_vehicle(&mut v, src.entry);
                self.links[src.entry.0].push(v);
            }
        }
    }
}

fn add_delay(acc: &mut DelayTotals, v: &Vehicle, d: f64) {
    match v.class {
        VehicleClass::Transit(_) => {
            acc.transit += d;
            acc.passenger += d * f64::from(v.occupancy);
        }
        VehicleClass::Car if v.is_cv => acc.cv_car += d,
        VehicleClass::Car => acc.nv += d,
    }
}

/// Phases whose every movement sits on a jammed link with no CV bound for it.
pub fn necessary_condition_monitor(world: &World<'_>) -> Vec<PhaseViolation> {
    let net = &world.scenario().network;
    let mut out = Vec::new();
    for (n, node) in net.nodes.iter().enumerate() {
        for (p, phase) in node.phases.iter().enumerate() {
            let starved = phase.movements.iter().all(|&m| {
                let from = net.movement(m).from;
                world.vehicles(from).len() >= net.link(from).capacity()
                    && !world.movement_vehicles(m).any(|v| v.is_cv)
            });
            if starved {
                out.push(PhaseViolation {
                    node: NodeId(n),
                    phase: p,
                });
            }
        }
    }
    out
}

/// Per-step debugging record.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    /// Vehicles and CVs bound for each signalized movement.
    pub movement_counts: Vec<(usize, usize)>,
    pub phases: Vec<usize>,
}

impl Snapshot {
    pub fn capture(world: &World<'_>) -> Self {
        let net = &world.scenario().network;
        Self {
            step: world.step_index(),
            t: world.time(),
            movement_counts: net
                .signalized_movements()
                .map(|m| {
                    let (all, cv) = world
                        .movement_vehicles(m)
                        .fold((0, 0), |(a, c), v| (a + 1, c + usize::from(v.is_cv)));
                    (all, cv)
                })
                .collect(),
            phases: world.active_phases().to_vec(),
        }
    }
}

/// Streams snapshots as CSV rows.
pub struct SnapshotWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(out: W, scenario: &Scenario) -> Result<Self> {
        let net = &scenario.network;
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        for m in net.signalized_movements() {
            let id = &net.movement(m).id;
            header.push(format!("veh:{id}"));
            header.push(format!("cv:{id}"));
        }
        header.extend(net.nodes.iter().map(|n| format!("phase:{}", n.id)));
        inner.write_record(&header)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, s: &Snapshot) -> Result<()> {
        let mut row = vec![s.step.to_string(), s.t.to_string()];
        for (a, c) in &s.movement_counts {
            row.push(a.to_string());
            row.push(c.to_string());
        }
        row.extend(s.phases.iter().map(usize::to_string));
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| csv::Error::from(e).into())
    }
}
