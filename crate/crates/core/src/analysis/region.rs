use std::collections::BTreeMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{MovementId, Network, Scenario};

/// Result of the admissible-region LP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCertificate {
    pub feasible: bool,
    /// Largest uniform slack, veh/s; negative when demand lies outside.
    pub epsilon: f64,
    pub kappa: f64,
    /// Phase time shares per node id.
    pub weights: BTreeMap<String, Vec<f64>>,
    /// Service share of each fictitious source movement.
    pub source_shares: BTreeMap<String, f64>,
}

/// Demand per movement: peak source rates plus transit dispatches on the
/// fictitious movements, zero on signalized ones.
pub fn demand_vector(scenario: &Scenario) -> Vec<f64> {
    let net = &scenario.network;
    let mut a = vec![0.0; net.movements.len()];
    for s in &net.sources {
        a[s.movement.0] += s.profile.peak_rate();
    }
    for line in &scenario.transit_lines {
        if let Some(k) = net.source_for_entry(line.route[0]) {
            a[net.sources[k].movement.0] += 1.0 / line.headway;
        }
    }
    a
}

/// `pi_min / pi_max` across entry links.
pub fn penetration_ratio(scenario: &Scenario) -> f64 {
    let ps: Vec<f64> = scenario
        .network
        .sources
        .iter()
        .map(|s| scenario.penetration.for_link(s.entry))
        .collect();
    let max = ps.iter().copied().fold(0.0, f64::max);
    let min = ps.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        0.0
    } else {
        min / max
    }
}

const EPS_BOUND: f64 = 1e6;

/// Maximizes the slack `eps` such that `a_m + eps <= kappa * (c_m s_m -
/// r_m * sum of c_h s_h over movements h feeding m's incoming link)` for
/// every movement, with signalized service shares drawn from a per-node
/// convex combination of phases and source shares in `[0, 1]`.
pub fn admissible_region_check(
    net: &Network,
    demand: &[f64],
    kappa: f64,
) -> Result<RegionCertificate> {
    if demand.len() != net.movements.len() {
        return Err(Error::config(format!(
            "demand vector has {} entries for {} movements",
            demand.len(),
            net.movements.len()
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::config(format!(
            "region scale must be > 0, got {kappa}"
        )));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let eps = lp.add_var(1.0, (-EPS_BOUND, EPS_BOUND));
    let phase_vars: Vec<Vec<Variable>> = net
        .nodes
        .iter()
        .map(|n| {
            n.phases
                .iter()
                .map(|_| lp.add_var(0.0, (0.0, 1.0)))
                .collect()
        })
        .collect();
    for vars in &phase_vars {
        let row: Vec<(Variable, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(&row, ComparisonOp::Eq, 1.0);
    }
    let mut source_vars = BTreeMap::new();
    for s in &net.sources {
        source_vars.insert(s.movement, lp.add_var(0.0, (0.0, 1.0)));
    }

    // Service share of movement m as (variable, coefficient) terms.
    let share = |m: MovementId| -> Vec<(Variable, f64)> {
        let mv = net.movement(m);
        match mv.node {
            None => vec![(source_vars[&m], 1.0)],
            Some(n) => net.nodes[n.0]
                .phases
                .iter()
                .zip(&phase_vars[n.0])
                .filter(|(p, _)| p.movements.contains(&m))
                .map(|(_, &v)| (v, 1.0))
                .collect(),
        }
    };

    for (k, mv) in net.movements.iter().enumerate() {
        let m = MovementId(k);
        let mut coef: BTreeMap<usize, (Variable, f64)> = BTreeMap::new();
        let mut add = |v: Variable, c: f64| {
            coef.entry(v.idx()).or_insert((v, 0.0)).1 += c;
        };
        add(eps, 1.0);
        for (v, c) in share(m) {
            add(v, -kappa * mv.saturation * c);
        }
        if mv.turning_ratio > 0.0 {
            for (h, up) in net.movements.iter().enumerate() {
                if up.to != mv.from {
                    continue;
                }
                for (v, c) in share(MovementId(h)) {
                    add(v, kappa * mv.turning_ratio * up.saturation * c);
                }
            }
        }
        let row: Vec<(Variable, f64)> = coef.into_values().filter(|(_, c)| *c != 0.0).collect();
        lp.add_constraint(&row, ComparisonOp::Le, -demand[k]);
    }

    let sol = lp
        .solve()
        .map_err(|e| Error::Solver(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Solver("solve interrupted before a usable assignment".into()))?;
    let epsilon = sol[eps];
    let weights = net
        .nodes
        .iter()
        .zip(&phase_vars)
        .map(|(n, vars)| (n.id.clone(), vars.iter().map(|&v| sol[v]).collect()))
        .collect();
    let source_shares = source_vars
        .iter()
        .map(|(m, &v)| (net.movement(*m).id.clone(), sol[v]))
        .collect();
    Ok(RegionCertificate {
        feasible: epsilon > 1e-9,
        epsilon,
        kappa,
        weights,
        source_shares,
    })
}
