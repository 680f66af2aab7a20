//! Discrete sub-elliptic heat semigroup on grid charts.

pub mod field;
pub mod grid;
pub mod io;
pub mod operator;
pub mod semigroup;
pub mod sparse;

pub use field::{DensityField, ScalarField};
pub use grid::{Boundary, GridChart, Window};
pub use operator::{Frame, HeatOperator};
pub use semigroup::{HeatFlow, KernelInit, SmoothKernel, Stepping};
