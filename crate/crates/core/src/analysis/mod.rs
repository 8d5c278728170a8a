//! Metrics, stability instrumentation and the starvation detector.

mod lyapunov;
mod metrics;
mod region;
mod stability;
mod starvation;

pub use lyapunov::{lyapunov_from_parts, lyapunov_value, LyapunovSample};
pub use metrics::{metrics_frame, MetricsFrame, MetricsWriter};
pub use region::{admissible_region_check, demand_vector, penetration_ratio, RegionCertificate};
pub use stability::{
    lyapunov_trend, ols_slope, stability_verdict, trend_is_flat, StabilityThresholds, Verdict,
};
pub use starvation::detect_starvation;
