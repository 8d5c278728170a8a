use crate::control::beta_position;
use crate::sim::{Motion, World};

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSample {
    pub t: f64,
    pub value: f64,
    /// `(movement id, contribution)`; exit-bound vehicles are grouped as `<link>>exit`.
    pub contributions: Vec<(String, f64)>,
}

/// `0.5 * sum(backlog^2) + sum over groups of N * sum(beta * tau)`.
pub fn lyapunov_from_parts(backlogs: &[f64], groups: &[Vec<f64>]) -> f64 {
    let sources: f64 = backlogs.iter().map(|b| 0.5 * b * b).sum();
    let links: f64 = groups
        .iter()
        .map(|g| g.len() as f64 * g.iter().sum::<f64>())
        .sum();
    sources + links
}

/// Evaluated with every vehicle visible, whatever the CV penetration.
pub fn lyapunov_value(world: &World<'_>) -> LyapunovSample {
    let net = &world.scenario().network;
    let now = world.time();
    let mut contributions = Vec::new();
    let mut value = 0.0;
    for q in world.sources() {
        value += 0.5 * (q.backlog() as f64).powi(2);
    }
    for l in net.real_links() {
        let link = net.link(l);
        let station = link.nearest_station();
        let ett = link.free_flow_time();
        let mut groups: Vec<(Option<usize>, usize, f64)> = Vec::new();
        for v in world.vehicles(l) {
            let key = v.next.map(|m| m.0);
            let b = beta_position(
                v.is_transit(),
                v.position,
                v.motion == Motion::Dwelling,
                station,
            );
            let w = b * v.link_travel_time(now) / ett;
            match groups.iter_mut().find(|g| g.0 == key) {
                Some(g) => {
                    g.1 += 1;
                    g.2 += w;
                }
                None => groups.push((key, 1, w)),
            }
        }
        for (key, n, w) in groups {
            let c = n as f64 * w;
            value += c;
            let name = match key {
                Some(m) => net.movements[m].id.clone(),
                None => format!("{}>exit", link.id),
            };
            contributions.push((name, c));
        }
    }
    LyapunovSample {
        t: now,
        value,
        contributions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(lyapunov_from_parts(&[], &[]), 0.0);
        assert_eq!(lyapunov_from_parts(&[4.0], &[vec![]]), 8.0);
        assert_eq!(lyapunov_from_parts(&[], &[vec![0.5, 1.5]]), 4.0);
    }
}
