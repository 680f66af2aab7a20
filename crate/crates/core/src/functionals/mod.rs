//! Entropy, Fisher information, moments, Lipschitz estimates, the
//! curvature function and the defect functions along right translations.

pub mod curvature;
pub mod defect;
pub mod entropy;
pub mod moments;

pub use curvature::CurvatureFn;
pub use defect::{defect_w, sigma_bound, sigma_bound_from_fisher};
pub use entropy::{entropy, entropy_truncated, fisher, EntropyValue};
pub use moments::{lip_estimate, second_moment};
