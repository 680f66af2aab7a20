//! Discrete optimal transport between point clouds on the supported groups.

pub mod convolve;
pub mod hopf_lax;
pub mod measure;
pub mod plan;
pub mod simplex;
pub mod sinkhorn;

pub use convolve::{ball_quadrature, convolve_cloud, convolve_measure, regularize_curve, MeasureRef};
pub use hopf_lax::{hopf_lax, hopf_lax_at, kantorovich_ascent, kantorovich_dual_value, DualAscent, Potential};
pub use measure::{density_to_cloud, density_to_cloud_blocked, Discretization, PointCloudMeasure};
pub use plan::{
    cost_matrix, displacement_interpolate, w1_dual, w2_densities, w2_exact, w2_sinkhorn, PlanMethod, TransportConfig,
    TransportPlan,
};
pub use sinkhorn::SinkhornConfig;
