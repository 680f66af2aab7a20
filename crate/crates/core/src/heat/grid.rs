use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{GroupFamily, GroupModel, GroupPoint};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Reflecting,
    Periodic,
}

/// Regular cell-centred grid over a box (or the fundamental domain of a torus).
///
/// Node `(i_0, .., i_{n-1})` sits at `lo + (i + 1/2) * spacing`; values are
/// stored row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridChart<T> {
    model: GroupModel<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    shape: Vec<usize>,
    spacing: Vec<T>,
    strides: Vec<usize>,
    boundary: Boundary,
}

/// Index box `[start, end)` per axis, used to quarantine boundary effects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Vec<usize>,
    pub end: Vec<usize>,
}

impl Window {
    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(self.start.iter().zip(&self.end))
            .all(|(&i, (&s, &e))| i >= s && i < e)
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .start
            .iter()
            .zip(&self.end)
            .map(|(s, e)| format!("{s}..{e}"))
            .collect();
        parts.join("x")
    }
}

impl<T: Real> GridChart<T> {
    pub fn new(model: GroupModel<T>, lo: Vec<T>, hi: Vec<T>, shape: Vec<usize>) -> Result<Self> {
        let n = model.dimension();
        if lo.len() != n || hi.len() != n || shape.len() != n {
            return invalid(format!("grid extents must have {n} entries"));
        }
        if shape.iter().any(|&s| s < 2) {
            return invalid("every grid axis needs at least two cells");
        }
        let boundary = match model.family() {
            GroupFamily::AbelianTorus => {
                let periods = model.periods().expect("torus");
                for k in 0..n {
                    if lo[k] != T::zero() || (hi[k] - periods[k]).abs() > T::epsilon() * periods[k] {
                        return invalid("a torus chart must cover [0, period) on every axis");
                    }
                }
                Boundary::Periodic
            }
            _ => Boundary::Reflecting,
        };
        let mut spacing = Vec::with_capacity(n);
        for k in 0..n {
            if !(hi[k] > lo[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return invalid("grid extents must satisfy lo < hi");
            }
            spacing.push((hi[k] - lo[k]) / T::of_usize(shape[k]));
        }
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        Ok(Self {
            model,
            lo,
            hi,
            shape,
            spacing,
            strides,
            boundary,
        })
    }

    /// Symmetric box `[-half, half]^n` with `cells` cells per axis.
    pub fn centered_cube(model: GroupModel<T>, half: T, cells: usize) -> Result<Self> {
        let n = model.dimension();
        Self::new(model, vec![-half; n], vec![half; n], vec![cells; n])
    }

    /// Grid over the fundamental domain of a torus model.
    pub fn torus(model: GroupModel<T>, cells: Vec<usize>) -> Result<Self> {
        let periods = model
            .periods()
            .ok_or_else(|| Error::InvalidInput("torus chart needs a torus model".into()))?
            .to_vec();
        Self::new(model, vec![T::zero(); periods.len()], periods, cells)
    }

    pub fn model(&self) -> &GroupModel<T> {
        &self.model
    }
    pub fn lo(&self) -> &[T] {
        &self.lo
    }
    pub fn hi(&self) -> &[T] {
        &self.hi
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn ndim(&self) -> usize {
        self.shape.len()
    }
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    pub fn min_spacing(&self) -> T {
        self.spacing.iter().fold(T::infinity(), |m, &h| m.min(h))
    }

    pub fn volume(&self) -> T {
        self.cell_volume() * T::of_usize(self.len())
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for k in 0..self.ndim() {
            out[k] = flat / self.strides[k];
            flat %= self.strides[k];
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> T {
        self.lo[axis] + (T::of_usize(i) + T::c(0.5)) * self.spacing[axis]
    }

    pub fn node_into(&self, flat: usize, out: &mut [T]) {
        let mut rem = flat;
        for k in 0..self.ndim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.coordinate(k, i);
        }
    }

    pub fn node(&self, flat: usize) -> GroupPoint<T> {
        let mut c = vec![T::zero(); self.ndim()];
        self.node_into(flat, &mut c);
        GroupPoint::new(c)
    }

    /// All node coordinates, row-major, `ndim` values per node.
    pub fn nodes(&self) -> Vec<T> {
        let n = self.ndim();
        let mut out = vec![T::zero(); self.len() * n];
        for (flat, chunk) in out.chunks_mut(n).enumerate() {
            self.node_into(flat, chunk);
        }
        out
    }

    pub fn contains(&self, p: &[T]) -> bool {
        if self.boundary == Boundary::Periodic {
            return p.len() == self.ndim() && p.iter().all(|c| c.is_finite());
        }
        p.len() == self.ndim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&c, (&l, &h))| c >= l && c <= h)
    }

    /// Flat index of the cell containing `p` (nodes are cell centres).
    pub fn nearest_index(&self, p: &GroupPoint<T>) -> Result<usize> {
        if !self.contains(&p.coords) {
            return Err(Error::Domain(format!("point {:?} lies outside the chart", p.to_f64())));
        }
        let p = self.model.reduce(p.clone());
        let mut flat = 0;
        for k in 0..self.ndim() {
            let s = ((p.coords[k] - self.lo[k]) / self.spacing[k]).floor().to_f64().unwrap_or(0.0);
            let i = (s.max(0.0) as usize).min(self.shape[k] - 1);
            flat += i * self.strides[k];
        }
        Ok(flat)
    }

    /// Interior window leaving `margin` (fraction of each axis) on both sides.
    /// The torus has no boundary, so its window is the whole grid.
    pub fn interior_window(&self, margin: f64) -> Window {
        if self.boundary == Boundary::Periodic {
            return Window {
                start: vec![0; self.ndim()],
                end: self.shape.clone(),
            };
        }
        let start: Vec<usize> = self.shape.iter().map(|&s| (s as f64 * margin).ceil() as usize).collect();
        let end: Vec<usize> = self
            .shape
            .iter()
            .zip(&start)
            .map(|(&s, &b)| s.saturating_sub(b).max(b + 1))
            .collect();
        Window { start, end }
    }

    /// Flat indices inside a window, in storage order.
    pub fn window_indices(&self, w: &Window) -> Vec<usize> {
        let mut idx = vec![0usize; self.ndim()];
        (0..self.len())
            .filter(|&flat| {
                self.multi_index(flat, &mut idx);
                w.contains(&idx)
            })
            .collect()
    }

    pub fn same_as(&self, other: &GridChart<T>) -> bool {
        std::ptr::eq(self, other) || self == other
    }

    pub fn ensure_same(&self, other: &GridChart<T>) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch(format!(
                "shape {:?} vs {:?}",
                self.shape, other.shape
            )))
        }
    }
}
