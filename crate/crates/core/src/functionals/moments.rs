use crate::error::Result;
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::{DensityField, ScalarField, Window};
use crate::metric::CcMetric;
use crate::scalar::{pairwise_sum, Real};

/// `sum f(x) d^2(x, x0) * cellvol`.
pub fn second_moment<T: Real>(mu: &DensityField<T>, x0: &GroupPoint<T>, metric: &CcMetric<T>) -> Result<T> {
    metric.model.check(x0)?;
    let c = &mu.chart;
    let mut p = vec![T::zero(); c.ndim()];
    let terms: Vec<T> = mu
        .values
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            if f == T::zero() {
                return T::zero();
            }
            c.node_into(k, &mut p);
            let d = metric.dist(&x0.coords, &p);
            f * d * d
        })
        .collect();
    Ok(pairwise_sum(&terms) * c.cell_volume())
}

/// Largest difference quotient `|f(x) - f(y)| / d(x, y)` over grid pairs
/// adjacent along one axis; with a window both nodes must lie inside it.
///
/// On `H^1` a coordinate step in x or y is not horizontal away from the
/// axes, so the partner of `p` is the horizontal neighbour `p (h e_i)` at
/// distance exactly `h`, with `f` interpolated linearly between z-layers.
pub fn lip_estimate<T: Real>(f: &ScalarField<T>, metric: &CcMetric<T>, window: Option<&Window>) -> T {
    if metric.model.family() == GroupFamily::Heisenberg1 {
        return heisenberg_lip(f, window);
    }
    let c = &f.chart;
    let n = c.ndim();
    let periodic = c.boundary() == crate::heat::Boundary::Periodic;
    let mut idx = vec![0usize; n];
    let mut jdx = vec![0usize; n];
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut best = T::zero();
    for flat in 0..c.len() {
        c.multi_index(flat, &mut idx);
        if let Some(w) = window {
            if !w.contains(&idx) {
                continue;
            }
        }
        c.node_into(flat, &mut p);
        for axis in 0..n {
            jdx.copy_from_slice(&idx);
            if idx[axis] + 1 < c.shape()[axis] {
                jdx[axis] += 1;
            } else if periodic {
                jdx[axis] = 0;
            } else {
                continue;
            }
            if let Some(w) = window {
                if !w.contains(&jdx) {
                    continue;
                }
            }
            let other = c.flat_index(&jdx);
            c.node_into(other, &mut q);
            let d = metric.dist(&p, &q);
            if d > T::zero() {
                best = best.max((f.values[flat] - f.values[other]).abs() / d);
            }
        }
    }
    best
}

fn heisenberg_lip<T: Real>(f: &ScalarField<T>, window: Option<&Window>) -> T {
    let c = &f.chart;
    let (sh, st, h) = (c.shape(), c.strides(), c.spacing());
    let mut idx = [0usize; 3];
    let mut best = T::zero();
    for flat in 0..c.len() {
        c.multi_index(flat, &mut idx);
        if let Some(w) = window {
            if !w.contains(&idx) {
                continue;
            }
        }
        let x = c.coordinate(0, idx[0]);
        let y = c.coordinate(1, idx[1]);
        for axis in 0..2 {
            if idx[axis] + 1 >= sh[axis] {
                continue;
            }
            let mut j = idx;
            j[axis] += 1;
            // z-shift of p (h e_axis): -y h / 2 along x, +x h / 2 along y.
            let dz = if axis == 0 { -y * h[0] } else { x * h[1] } * T::c(0.5);
            let s = T::of_usize(idx[2]) + dz / h[2];
            let k0 = s.floor();
            let w = s - k0;
            let Some(k0) = k0.to_i64() else { continue };
            if k0 < 0 || k0 as usize + 1 >= sh[2] {
                continue;
            }
            let k0 = k0 as usize;
            if let Some(win) = window {
                if !win.contains(&[j[0], j[1], k0]) || !win.contains(&[j[0], j[1], k0 + 1]) {
                    continue;
                }
            }
            let base = j[0] * st[0] + j[1] * st[1];
            let fq = f.values[base + k0] * (T::one() - w) + f.values[base + k0 + 1] * w;
            best = best.max((fq - f.values[flat]).abs() / h[axis]);
        }
    }
    best
}
