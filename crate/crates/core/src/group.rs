//! Group algebra in exponential coordinates.
//!
//! Three models are supported: the abelian box `R^n`, the flat torus
//! `R^n / (L_1 Z x ... x L_n Z)` and the first Heisenberg group `H^1`
//! with law `(x1,y1,z1)(x2,y2,z2) = (x1+x2, y1+y2, z1+z2+(x1 y2 - y1 x2)/2)`.
//! Haar measure is Lebesgue measure in these coordinates, normalized with
//! constant 1.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFamily {
    AbelianBox,
    AbelianTorus,
    Heisenberg1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPoint<T> {
    pub coords: Vec<T>,
}

impl<T: Real> GroupPoint<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Self {
            coords: coords.iter().map(|&c| T::c(c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.f64()).collect()
    }
}

impl<T> std::ops::Index<usize> for GroupPoint<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

/// The ambient group together with its stratification data.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupModel<T> {
    family: GroupFamily,
    dimension: usize,
    step: usize,
    homogeneous_dimension: usize,
    periods: Option<Vec<T>>,
}

impl<T: Real> GroupModel<T> {
    pub fn abelian_box(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return invalid("abelian dimension must be positive");
        }
        Ok(Self {
            family: GroupFamily::AbelianBox,
            dimension,
            step: 1,
            homogeneous_dimension: dimension,
            periods: None,
        })
    }

    pub fn torus(periods: Vec<T>) -> Result<Self> {
        if periods.is_empty() {
            return invalid("torus needs at least one period");
        }
        if periods.iter().any(|p| !(*p > T::zero()) || !p.is_finite()) {
            return invalid("torus periods must be positive and finite");
        }
        Ok(Self {
            family: GroupFamily::AbelianTorus,
            dimension: periods.len(),
            step: 1,
            homogeneous_dimension: periods.len(),
            periods: Some(periods),
        })
    }

    pub fn heisenberg() -> Self {
        // V1 = span{X1, X2}, V2 = span{Z}: Q = 1*2 + 2*1.
        Self {
            family: GroupFamily::Heisenberg1,
            dimension: 3,
            step: 2,
            homogeneous_dimension: 4,
            periods: None,
        }
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn homogeneous_dimension(&self) -> usize {
        self.homogeneous_dimension
    }

    pub fn periods(&self) -> Option<&[T]> {
        self.periods.as_deref()
    }

    pub fn is_abelian(&self) -> bool {
        self.family != GroupFamily::Heisenberg1
    }

    /// Dilation degree of each coordinate.
    pub fn degrees(&self) -> Vec<u32> {
        match self.family {
            GroupFamily::Heisenberg1 => vec![1, 1, 2],
            _ => vec![1; self.dimension],
        }
    }

    pub fn identity(&self) -> GroupPoint<T> {
        GroupPoint::new(vec![T::zero(); self.dimension])
    }

    pub fn check(&self, a: &GroupPoint<T>) -> Result<()> {
        if a.dim() != self.dimension {
            return invalid(format!(
                "point has {} coordinates, model expects {}",
                a.dim(),
                self.dimension
            ));
        }
        if a.coords.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        Ok(())
    }

    /// Reduces torus coordinates into `[0, period)`; identity otherwise.
    pub fn reduce(&self, mut a: GroupPoint<T>) -> GroupPoint<T> {
        if let Some(periods) = &self.periods {
            for (c, &p) in a.coords.iter_mut().zip(periods) {
                *c = wrap(*c, p);
            }
        }
        a
    }

    pub fn multiply(&self, a: &GroupPoint<T>, b: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.multiply_unchecked(&a.coords, &b.coords))
    }

    pub(crate) fn multiply_unchecked(&self, a: &[T], b: &[T]) -> GroupPoint<T> {
        let mut out: Vec<T> = a.iter().zip(b).map(|(&u, &v)| u + v).collect();
        if self.family == GroupFamily::Heisenberg1 {
            out[2] += T::c(0.5) * (a[0] * b[1] - a[1] * b[0]);
        }
        self.reduce(GroupPoint::new(out))
    }

    pub fn inverse(&self, a: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check(a)?;
        Ok(self.reduce(GroupPoint::new(a.coords.iter().map(|&c| -c).collect())))
    }

    /// `a^{-1} b`, the relative position used by every left-invariant quantity.
    pub fn relative(&self, a: &GroupPoint<T>, b: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check(a)?;
        self.check(b)?;
        let neg: Vec<T> = a.coords.iter().map(|&c| -c).collect();
        Ok(self.multiply_unchecked(&neg, &b.coords))
    }

    pub fn dilate(&self, lambda: T, a: &GroupPoint<T>) -> Result<GroupPoint<T>> {
        self.check(a)?;
        if self.family == GroupFamily::AbelianTorus {
            return Err(Error::Unsupported("dilations are not defined on the torus".into()));
        }
        if !(lambda >= T::zero()) {
            return invalid("dilation factor must be nonnegative");
        }
        let coords = a
            .coords
            .iter()
            .zip(self.degrees())
            .map(|(&c, d)| c * lambda.powi(d as i32))
            .collect();
        Ok(GroupPoint::new(coords))
    }

    /// Left-invariant horizontal frame evaluated at `a`, one coordinate
    /// vector per field.
    pub fn horizontal_frame(&self, a: &GroupPoint<T>) -> Result<Vec<Vec<T>>> {
        self.check(a)?;
        Ok(self.frame_at(&a.coords, false))
    }

    /// Right-invariant horizontal frame `X~1 = (1,0,y/2)`, `X~2 = (0,1,-x/2)`.
    pub fn right_horizontal_frame(&self, a: &GroupPoint<T>) -> Result<Vec<Vec<T>>> {
        self.check(a)?;
        Ok(self.frame_at(&a.coords, true))
    }

    pub(crate) fn frame_at(&self, p: &[T], right: bool) -> Vec<Vec<T>> {
        match self.family {
            GroupFamily::Heisenberg1 => {
                let half = if right { T::c(0.5) } else { T::c(-0.5) };
                vec![
                    vec![T::one(), T::zero(), half * p[1]],
                    vec![T::zero(), T::one(), -half * p[0]],
                ]
            }
            _ => (0..self.dimension)
                .map(|i| {
                    let mut e = vec![T::zero(); self.dimension];
                    e[i] = T::one();
                    e
                })
                .collect(),
        }
    }

    /// Number of horizontal frame fields.
    pub fn rank(&self) -> usize {
        match self.family {
            GroupFamily::Heisenberg1 => 2,
            _ => self.dimension,
        }
    }
}

pub(crate) fn wrap<T: Real>(c: T, p: T) -> T {
    let r = c - (c / p).floor() * p;
    if r >= p || r < T::zero() {
        T::zero()
    } else {
        r
    }
}
