use std::io::Write;

use crate::error::Result;
use crate::sim::World;

use super::lyapunov::lyapunov_value;

/// Network state at one decision instant. Delays are cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsFrame {
    pub t: f64,
    pub vehicle_count: usize,
    pub spillover_count: usize,
    pub unserved_count: usize,
    pub delay_cv: f64,
    pub delay_nv: f64,
    pub delay_transit: f64,
    pub passenger_delay: f64,
    pub lyapunov: f64,
}

pub fn metrics_frame(world: &World<'_>) -> MetricsFrame {
    let vehicle_count = world.vehicle_count();
    let spillover_count = world.spillover_count();
    let d = world.delays();
    MetricsFrame {
        t: world.time(),
        vehicle_count,
        spillover_count,
        unserved_count: vehicle_count + spillover_count,
        delay_cv: d.cv_car,
        delay_nv: d.nv,
        delay_transit: d.transit,
        passenger_delay: d.passenger,
        lyapunov: lyapunov_value(world).value,
    }
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub const HEADER: [&'static str; 9] = [
        "t",
        "vehicle_count",
        "spillover_count",
        "unserved_count",
        "delay_cv",
        "delay_nv",
        "delay_transit",
        "passenger_delay",
        "lyapunov",
    ];

    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(Self::HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, f: &MetricsFrame) -> Result<()> {
        self.inner.write_record([
            format!("{}", f.t),
            f.vehicle_count.to_string(),
            f.spillover_count.to_string(),
            f.unserved_count.to_string(),
            format!("{:.3}", f.delay_cv),
            format!("{:.3}", f.delay_nv),
            format!("{:.3}", f.delay_transit),
            format!("{:.3}", f.passenger_delay),
            format!("{:.6}", f.lyapunov),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
