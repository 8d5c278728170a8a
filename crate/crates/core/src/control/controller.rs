use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimation::{iqa_step, tau_hat, HistoricalStats, IqaState};
use crate::network::{MovementId, Scenario};
use crate::sim::{SignalDecision, World};

use super::observe::{observe_movement, MovementObservation, ObservationConfig};
use super::pressure::{
    cvmp_pressure, eocc_pressure, mtransit_pressure, occ_pressure, select_phases, transit_pressure,
    Fallback, PressureTable,
};
use super::{AnchorPolicy, ControllerConfig, ControllerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub decision: SignalDecision,
    /// One table per node.
    pub tables: Vec<PressureTable>,
    /// Selected-phase movements with a negative clamped difference.
    pub nonnegative_violations: usize,
    /// Movements whose upstream state came from the historical estimate.
    pub fallback_count: usize,
}

/// Stateful controller: holds the expected-queue recursion and the error stream.
pub struct Controller {
    config: ControllerConfig,
    decision_step: f64,
    historical: Option<HistoricalStats>,
    iqa: Vec<IqaState>,
    last_decision: Option<f64>,
    rng: ChaCha8Rng,
}

impl Controller {
    pub fn new(
        scenario: &Scenario,
        historical: Option<HistoricalStats>,
        seed: u64,
    ) -> Result<Self> {
        let config = scenario.controller.clone();
        if config.kind.needs_historical() {
            let h = historical.as_ref().ok_or_else(|| {
                Error::config(format!("{} requires historical stats", config.kind))
            })?;
            h.check_covers(&scenario.network)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(6);
        Ok(Self {
            config,
            decision_step: scenario.timing.decision_step,
            historical,
            iqa: vec![IqaState::default(); scenario.network.movements.len()],
            last_decision: None,
            rng,
        })
    }

    pub fn kind(&self) -> ControllerKind {
        self.config.kind
    }

    pub fn iqa(&self, movement: MovementId) -> &IqaState {
        &self.iqa[movement.0]
    }

    fn observation_config(&self) -> ObservationConfig {
        ObservationConfig {
            segmentation: self.config.segmentation,
            beta_mode: self.config.beta_mode,
            full_observation: self.config.full_observation,
            decision_step: self.decision_step,
        }
    }

    /// Advances the expected queue of `movement` and returns its fallback state.
    fn fallback(
        &mut self,
        world: &World<'_>,
        obs: &MovementObservation,
        was_green: bool,
        update: bool,
    ) -> Option<Fallback> {
        let net = &world.scenario().network;
        let m = net.movement(obs.movement);
        let stats = *self.historical.as_ref()?.lookup(&m.id, world.time())?;
        let err = self.config.error;
        let lambda = if err.is_identity() {
            stats.lambda
        } else {
            stats.lambda * err.multiplier(&mut self.rng)
        };
        let state = &mut self.iqa[obs.movement.0];
        if update {
            let anchor = state.anchor.take();
            state.expected = iqa_step(
                state.expected,
                was_green,
                lambda,
                stats.depart,
                self.decision_step,
                anchor,
            );
        }
        if !obs.upstream.is_empty() {
            let reading = match self.config.anchor {
                AnchorPolicy::StoppedCv => {
                    obs.upstream.iter().filter(|v| v.stopped).count() as f64 / stats.psi
                }
                AnchorPolicy::GroundTruth => world.queued_count(obs.movement) as f64,
            };
            let reading = if err.is_identity() {
                reading
            } else {
                reading * err.multiplier(&mut self.rng)
            };
            state.anchor = Some(reading);
            state.last_anchor_time = Some(world.time());
        }
        let ett = if stats.ett > 0.0 { stats.ett } else { m.ett };
        Some(Fallback {
            p_hat: stats.p_hat,
            tau_hat: tau_hat(state.expected, stats.psi, lambda, ett),
        })
    }

    fn mean_occupancy(&self, world: &World<'_>, obs: &MovementObservation, gated: bool) -> f64 {
        let (n, total) = obs
            .upstream
            .iter()
            .filter(|v| !gated || v.beta > 0.0)
            .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v.occupancy));
        if n > 0 {
            return total / n as f64;
        }
        let id = &world.scenario().network.movement(obs.movement).id;
        self.historical
            .as_ref()
            .and_then(|h| h.lookup(id, world.time()))
            .map_or(1.0, |s| s.p_hat)
    }

    pub fn decide(&mut self, world: &World<'_>) -> DecisionOutcome {
        let net = &world.scenario().network;
        let cfg = self.observation_config();
        let update = self.last_decision.is_some_and(|t| world.time() > t);
        self.last_decision = Some(world.time());
        let active = world.active_phases().to_vec();
        let mut tables = Vec::with_capacity(net.nodes.len());
        for (n, node) in net.nodes.iter().enumerate() {
            let obs: Vec<MovementObservation> = node
                .movements
                .iter()
                .map(|&m| observe_movement(world, m, &cfg))
                .collect();
            let table = match self.config.kind {
                ControllerKind::CvMp => cvmp_pressure(node, &obs),
                ControllerKind::TransitMp => transit_pressure(node, &obs),
                ControllerKind::MTransitMp => {
                    let fallbacks: Vec<Option<Fallback>> = obs
                        .iter()
                        .map(|o| {
                            let green = node.phase_serves(active[n], o.movement);
                            self.fallback(world, o, green, update)
                        })
                        .collect();
                    mtransit_pressure(node, &obs, &fallbacks, self.config.clamp_fallback)
                }
                ControllerKind::OccMp | ControllerKind::EoccMp => {
                    let gated = self.config.kind == ControllerKind::EoccMp;
                    let p_bar: Vec<f64> = obs
                        .iter()
                        .map(|o| self.mean_occupancy(world, o, gated))
                        .collect();
                    if gated {
                        eocc_pressure(node, &obs, &p_bar)
                    } else {
                        occ_pressure(node, &obs, &p_bar)
                    }
                }
            };
            tables.push(table);
        }
        let decision = select_phases(&tables, &active);
        let mut violations = 0;
        let mut fallback_count = 0;
        for ((node, table), &p) in net.nodes.iter().zip(&tables).zip(&decision.phases) {
            fallback_count += table.movements.iter().filter(|m| m.fallback).count();
            if !matches!(
                self.config.kind,
                ControllerKind::TransitMp | ControllerKind::MTransitMp
            ) {
                continue;
            }
            for mp in &table.movements {
                if !node.phase_serves(p, mp.movement) {
                    continue;
                }
                let plain = mp.saturation * (mp.unweighted - mp.downstream);
                let weighted = mp.saturation * (mp.upstream - mp.downstream);
                if plain < -1e-12 || weighted < -1e-12 {
                    violations += 1;
                }
            }
        }
        DecisionOutcome {
            decision,
            tables,
            nonnegative_violations: violations,
            fallback_count,
        }
    }
}
