//! Heat flow, optimal transport and entropy functionals on the Heisenberg
//! group and abelian baselines, with a battery of numerical certificates for
//! the weak Bakry–Émery and entropic curvature inequalities.
//!
//! The numerical core is generic over [`scalar::Real`]; the aliases below fix
//! it to `f64`, which is what the certifiers and the CLI use.

pub mod certify;
pub mod error;
pub mod functionals;
pub mod group;
pub mod heat;
pub mod metric;
pub mod runner;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};

pub type Model = group::GroupModel<f64>;
pub type Point = group::GroupPoint<f64>;
pub type Metric = metric::CcMetric<f64>;
pub type Chart = heat::GridChart<f64>;
pub type Field = heat::ScalarField<f64>;
pub type Density = heat::DensityField<f64>;
pub type Operator = heat::HeatOperator<f64>;
pub type Flow = heat::HeatFlow<f64>;
pub type Cloud = transport::PointCloudMeasure<f64>;
pub type Plan = transport::TransportPlan<f64>;
