#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Slope bounds in veh/s on the unserved count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityThresholds {
    pub stable_max: f64,
    pub unstable_min: f64,
    pub min_points: usize,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self {
            stable_max: 0.005,
            unstable_min: 0.05,
            min_points: 10,
        }
    }
}

/// Least-squares slope; `None` with fewer than two distinct abscissae.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Regression-slope verdict over the points with `t` inside `window`.
pub fn stability_verdict(
    series: &[(f64, f64)],
    window: (f64, f64),
    th: &StabilityThresholds,
) -> (Verdict, Option<f64>) {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < th.min_points {
        return (Verdict::Inconclusive, None);
    }
    let Some(slope) = ols_slope(&pts) else {
        return (Verdict::Inconclusive, None);
    };
    let v = if slope <= th.stable_max {
        Verdict::Stable
    } else if slope >= th.unstable_min {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    (v, Some(slope))
}

/// Regression slope of √(2V). V is quadratic in the backlog, so its root is
/// in vehicles and shares the stable bound with the unserved count.
pub fn lyapunov_trend(series: &[(f64, f64)]) -> Option<f64> {
    let roots: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, v)| (t, (2.0 * v.max(0.0)).sqrt()))
        .collect();
    ols_slope(&roots)
}

pub fn trend_is_flat(series: &[(f64, f64)], th: &StabilityThresholds) -> bool {
    lyapunov_trend(series).is_none_or(|s| s <= th.stable_max)
}
