use std::path::PathBuf;

use proptest::prelude::*;

use transit_mp::analysis::{admissible_region_check, demand_vector, lyapunov_from_parts};
use transit_mp::control::{
    beta_eta, beta_position, cvmp_pressure, select_phase, transit_movement, Controller,
    ControllerKind, MovementObservation, ObservedVehicle,
};
use transit_mp::estimation::{iqa_step, tau_hat};
use transit_mp::harness::{self, Overrides, PenetrationArg};
use transit_mp::network::{MovementId, Node, Phase, Scenario};
use transit_mp::sim::World;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn load(name: &str, kind: ControllerKind, penetration: f64) -> Scenario {
    let o = Overrides {
        controller: Some(kind),
        penetration: Some(PenetrationArg::Global(penetration)),
        ..Overrides::default()
    };
    harness::prepare(&fixture(name), &o).unwrap()
}

fn controller_kind() -> impl Strategy<Value = ControllerKind> {
    prop_oneof![
        Just(ControllerKind::CvMp),
        Just(ControllerKind::TransitMp),
        Just(ControllerKind::OccMp),
        Just(ControllerKind::EoccMp),
    ]
}

fn vehicle() -> impl Strategy<Value = ObservedVehicle> {
    (1.0f64..6.0, prop::bool::ANY, 1u32..40, prop::bool::ANY).prop_map(
        |(tau, gated, occ, transit)| ObservedVehicle {
            position: 0.0,
            tau,
            beta: if transit && gated { 0.0 } else { 1.0 },
            occupancy: if transit { f64::from(occ) } else { 1.0 },
            transit,
            stopped: false,
        },
    )
}

fn observation() -> impl Strategy<Value = MovementObservation> {
    (
        0.1f64..1.0,
        prop::collection::vec(vehicle(), 0..10),
        prop::collection::vec((0.0f64..1.0, prop::collection::vec(vehicle(), 0..10)), 0..3),
    )
        .prop_map(|(saturation, upstream, downstream)| MovementObservation {
            movement: MovementId(0),
            saturation,
            upstream,
            downstream,
            upstream_len: 300.0,
            downstream_len: 300.0,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vehicles_are_conserved_and_links_respect_capacity(
        seed in 0u64..1000,
        kind in controller_kind(),
        pen in 0.0f64..=1.0,
        scale in 0.3f64..2.5,
    ) {
        let mut s = load("corridor.toml", kind, pen);
        for src in &mut s.network.sources {
            src.profile = src.profile.scaled(scale);
        }
        let mut controller = Controller::new(&s, None, seed).unwrap();
        let mut world = World::new(&s, seed);
        for k in 0..1500u64 {
            if k % 10 == 0 {
                let d = controller.decide(&world);
                world.set_phases(&d.decision);
            }
            world.step();
            let now = world.time();
            let on_network = world.vehicle_count() as u64;
            let backlog = world.spillover_count() as u64;
            prop_assert_eq!(world.created(), world.exited() + on_network + backlog);
            for l in s.network.real_links() {
                let link = s.network.link(l);
                let vs = world.vehicles(l);
                prop_assert!(vs.len() <= link.capacity(), "{} holds {} > {}", link.id, vs.len(), link.capacity());
                for v in vs {
                    prop_assert!(v.position >= 0.0 && v.position <= link.length + 1e-9);
                    // Nobody outruns free flow.
                    prop_assert!(
                        v.link_travel_time(now) + 1e-9 >= v.position / link.free_flow_speed,
                        "vehicle {} at {} m after {} s on {}", v.id, v.position, v.link_travel_time(now), link.id
                    );
                }
                for w in vs.windows(2) {
                    prop_assert!(w[0].position >= w[1].position, "link {} not ordered front to back", link.id);
                }
            }
        }
    }

    #[test]
    fn position_beta_is_monotone_in_position(x in 0.0f64..500.0, dx in 0.0f64..100.0, station in 0.0f64..500.0) {
        let a = beta_position(true, x, false, Some(station));
        let b = beta_position(true, x + dx, false, Some(station));
        prop_assert!(a <= b);
        prop_assert_eq!(beta_position(false, x, true, Some(station)), 1.0);
        prop_assert_eq!(beta_position(true, x, false, None), 1.0);
    }

    #[test]
    fn eta_beta_is_monotone_in_position(
        x in 0.0f64..400.0,
        dx in 0.0f64..100.0,
        station in 0.0f64..500.0,
        dwell in 0.0f64..30.0,
    ) {
        let at = |x: f64| beta_eta(true, x, 500.0, Some(station), 13.9, 2.0, 10.0, dwell);
        prop_assert!(at(x) <= at((x + dx).min(500.0)));
    }

    #[test]
    fn scaling_saturation_never_changes_the_choice(
        obs in prop::collection::vec(observation(), 1..4),
        k in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0]),
        active in 0usize..2,
    ) {
        let movements: Vec<MovementId> = (0..obs.len()).map(MovementId).collect();
        let obs: Vec<MovementObservation> = obs
            .into_iter()
            .enumerate()
            .map(|(i, mut o)| { o.movement = MovementId(i); o })
            .collect();
        let node = Node {
            id: "n".into(),
            phases: vec![
                Phase { name: "a".into(), movements: movements.iter().copied().step_by(2).collect() },
                Phase { name: "b".into(), movements: movements.iter().copied().skip(1).step_by(2).collect() },
            ],
            movements,
        };
        let scaled: Vec<MovementObservation> = obs
            .iter()
            .cloned()
            .map(|mut o| { o.saturation *= k; o })
            .collect();
        let a = cvmp_pressure(&node, &obs);
        let b = cvmp_pressure(&node, &scaled);
        prop_assert_eq!(select_phase(&a.phases, active), select_phase(&b.phases, active));
    }

    #[test]
    fn downstream_occupancy_does_not_enter_transit_pressure(mut obs in observation(), occ in 1.0f64..60.0) {
        let before = transit_movement(&obs);
        for (_, vs) in &mut obs.downstream {
            for v in vs {
                v.occupancy = occ;
            }
        }
        let after = transit_movement(&obs);
        prop_assert_eq!(before.pressure, after.pressure);
        prop_assert!(after.pressure >= 0.0);
    }

    #[test]
    fn iqa_is_monotone_and_nonnegative(
        e in 0.0f64..50.0,
        lambda in 0.0f64..1.0,
        dl in 0.0f64..0.5,
        depart in 0.0f64..1.0,
        dd in 0.0f64..0.5,
        green in prop::bool::ANY,
    ) {
        let t0 = 10.0;
        let base = iqa_step(e, green, lambda, depart, t0, None);
        prop_assert!(base >= 0.0);
        prop_assert!(iqa_step(e, green, lambda + dl, depart, t0, None) >= base);
        prop_assert!(iqa_step(e, green, lambda, depart + dd, t0, None) <= base);
        prop_assert!(iqa_step(e, true, lambda, depart, t0, None) <= iqa_step(e, false, lambda, depart, t0, None));
    }

    #[test]
    fn iqa_under_red_matches_closed_form(q0 in 0.0f64..30.0, lambda in 0.0f64..1.0, n in 1usize..200) {
        let mut q = q0;
        for _ in 0..n {
            q = iqa_step(q, false, lambda, 0.5, 10.0, None);
        }
        let closed = q0 + n as f64 * lambda * 10.0;
        prop_assert!((q - closed).abs() <= 1e-9 * closed.max(1.0));
    }

    #[test]
    fn tau_hat_strictly_increases_with_expected_queue(
        e in 0.01f64..100.0,
        de in 0.01f64..10.0,
        psi in 0.01f64..1.0,
        lambda in 0.001f64..1.0,
        ett in 1.0f64..120.0,
    ) {
        prop_assert!(tau_hat(e + de, psi, lambda, ett) > tau_hat(e, psi, lambda, ett));
    }

    #[test]
    fn lyapunov_matches_pairwise_double_sum(
        backlogs in prop::collection::vec(0u32..500, 0..5),
        groups in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 0..25), 0..6),
    ) {
        let b: Vec<f64> = backlogs.iter().map(|&x| f64::from(x)).collect();
        let mut want = b.iter().map(|x| 0.5 * x * x).sum::<f64>();
        for g in &groups {
            for x in g {
                for y in g {
                    want += 0.5 * (x + y);
                }
            }
        }
        let got = lyapunov_from_parts(&b, &groups);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn select_phase_matches_brute_force(
        pressures in prop::collection::vec(prop_oneof![
            (-4i32..5).prop_map(f64::from),
            Just(f64::NAN),
        ], 1..6),
        active_pick in 0usize..6,
    ) {
        let active = active_pick % pressures.len();
        let got = select_phase(&pressures, active);
        let finite: Vec<(usize, f64)> = pressures.iter().copied().enumerate().filter(|p| !p.1.is_nan()).collect();
        if finite.is_empty() {
            prop_assert_eq!(got, active);
        } else {
            let best = finite.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let want = if pressures[active] == best {
                active
            } else {
                finite.iter().find(|p| p.1 == best).unwrap().0
            };
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn region_feasibility_is_monotone_in_demand(k in 0.1f64..1.5) {
        let s = load("boundary.toml", ControllerKind::TransitMp, 1.0);
        let a: Vec<f64> = demand_vector(&s).iter().map(|x| x * k).collect();
        let half: Vec<f64> = a.iter().map(|x| x * 0.5).collect();
        let full = admissible_region_check(&s.network, &a, 1.0).unwrap();
        let lower = admissible_region_check(&s.network, &half, 1.0).unwrap();
        prop_assert!(lower.epsilon >= full.epsilon - 1e-9);
        if full.feasible {
            prop_assert!(lower.feasible);
        }
    }
}
