//! Scalar abstraction shared by every numerical module.
//!
//! The geometry, heat and transport code is written once against [`Real`];
//! `f64` is the working precision used by the certifiers and the CLI, `f32`
//! is available for memory-bound experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rayon::prelude::*;

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest relative CG residual worth asking for at this precision.
    #[inline]
    fn solver_floor() -> Self {
        Self::epsilon() * Self::c(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum with a fixed pairwise tree so the result does not depend on how
/// the caller chunked the work.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 256;
    if xs.len() <= LEAF {
        let mut acc = T::zero();
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Dot product over fixed blocks combined pairwise; blocks run in
/// parallel but the result is independent of the thread count.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    const BLOCK: usize = 4096;
    let partial: Vec<T> = a
        .par_chunks(BLOCK)
        .zip(b.par_chunks(BLOCK))
        .map(|(x, y)| {
            let mut acc = T::zero();
            for (&u, &v) in x.iter().zip(y) {
                acc += u * v;
            }
            acc
        })
        .collect();
    pairwise_sum(&partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn literal_conversion_is_exact_for_f32() {
        assert_eq!(<f32 as Real>::c(0.5), 0.5f32);
        assert_eq!(<f64 as Real>::of_usize(7), 7.0);
    }
}
