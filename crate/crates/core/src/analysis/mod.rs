//! Evaluation: variance score, per-image projections, radar plots and the
//! attribute probe.

mod probe;
mod project;
mod radar;
mod variance;

pub use probe::{attribute_probe, Mlp, ProbeConfig, ProbeResult};
pub use project::{project, ProjectionTable};
pub use radar::{radar_export, write_radar, RadarAxis, RadarPlot, RADAR_SIZE};
pub use variance::{variance_score, VarianceReport};
