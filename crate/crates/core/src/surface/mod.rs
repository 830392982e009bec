//! Simple surfaces in isothermal coordinates: metric presets, the geodesic frame,
//! geodesic tracing, simplicity constants and Santalo's formula.

pub mod frame;
pub mod geodesic;
pub mod metric;
pub mod santalo;
pub mod simplicity;

pub use frame::{FrameConvention, Tangent3};
pub use metric::{IsothermalMetric, MetricJet, MetricKind, SplineTable};
pub use geodesic::{exit_map, exit_time, trace_geodesic, ExitRecord, GeodesicTrace};
pub use simplicity::{simplicity_report, SimplicityOptions, SimplicityReport};
