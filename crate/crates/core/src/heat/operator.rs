//! Discrete sub-Laplacian and carré du champ.
//!
//! Each frame field `X_i = sum_k a_ik(p) d_k` is discretized by one-sided
//! differences with coefficients frozen at the node,
//!
//! `D_i^+ f(p) = sum_k a_ik(p) (f(p + e_k) - f(p)) / h_k`,
//!
//! where a term is dropped when `p + e_k` leaves a reflecting box and wraps
//! on the torus. The operator is `Delta = -sum_i (D_i^+)^T D_i^+`: symmetric,
//! negative semidefinite, annihilating constants on every row, and on the
//! interior a compact second-order stencil for `sum_i X_i^2`. The forward
//! differences keep even and odd nodes coupled, which a product of two
//! centred differences would not.

use std::sync::Arc;

use crate::error::Result;
use crate::heat::field::ScalarField;
use crate::heat::grid::{Boundary, GridChart};
use crate::heat::sparse::Csr;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    #[default]
    Left,
    /// Right-invariant frame (it generates left translations).
    Right,
}

#[derive(Debug)]
pub struct HeatOperator<T> {
    chart: Arc<GridChart<T>>,
    laplacian: Csr<T>,
    diag: Vec<T>,
    /// Forward and backward difference matrices per frame field.
    left: Vec<(Csr<T>, Csr<T>)>,
    right: Vec<(Csr<T>, Csr<T>)>,
    pub symmetrized: bool,
}

fn neighbour<T: Real>(chart: &GridChart<T>, idx: &[usize], axis: usize, side: Side) -> Option<usize> {
    let n = chart.shape()[axis];
    let i = idx[axis];
    let j = match (side, chart.boundary()) {
        (Side::Forward, _) if i + 1 < n => i + 1,
        (Side::Forward, Boundary::Periodic) => 0,
        (Side::Backward, _) if i > 0 => i - 1,
        (Side::Backward, Boundary::Periodic) => n - 1,
        _ => return None,
    };
    let flat = chart.flat_index(idx);
    let s = chart.strides()[axis];
    Some(flat - i * s + j * s)
}

fn difference_matrix<T: Real>(chart: &GridChart<T>, field: usize, frame: Frame, side: Side) -> Csr<T> {
    let n = chart.ndim();
    let model = chart.model();
    let mut idx = vec![0usize; n];
    let mut p = vec![T::zero(); n];
    let mut trip = Vec::with_capacity(chart.len() * 3);
    for flat in 0..chart.len() {
        chart.multi_index(flat, &mut idx);
        chart.node_into(flat, &mut p);
        let coeffs = &model.frame_at(&p, frame == Frame::Right)[field];
        for k in 0..n {
            let a = coeffs[k];
            if a == T::zero() {
                continue;
            }
            let Some(q) = neighbour(chart, &idx, k, side) else { continue };
            let w = a / chart.spacing()[k];
            match side {
                Side::Forward => {
                    trip.push((flat, q, w));
                    trip.push((flat, flat, -w));
                }
                Side::Backward => {
                    trip.push((flat, flat, w));
                    trip.push((flat, q, -w));
                }
            }
        }
    }
    Csr::from_triplets(chart.len(), trip)
}

impl<T: Real> HeatOperator<T> {
    pub fn assemble(chart: Arc<GridChart<T>>) -> Result<Self> {
        let rank = chart.model().rank();
        let build = |frame: Frame| -> Vec<(Csr<T>, Csr<T>)> {
            (0..rank)
                .map(|i| {
                    (
                        difference_matrix(&chart, i, frame, Side::Forward),
                        difference_matrix(&chart, i, frame, Side::Backward),
                    )
                })
                .collect()
        };
        let left = build(Frame::Left);
        let right = if chart.model().is_abelian() { left.clone() } else { build(Frame::Right) };
        let mut trip = Vec::new();
        for (d, _) in &left {
            // -(D^T D)(q, q') = -sum_p D(p, q) D(p, q')
            for p in 0..d.n {
                let row: Vec<(usize, T)> = d.row(p).collect();
                for &(q, u) in &row {
                    for &(q2, v) in &row {
                        trip.push((q, q2, -u * v));
                    }
                }
            }
        }
        let laplacian = Csr::from_triplets(chart.len(), trip);
        let diag = laplacian.diagonal();
        Ok(Self {
            chart,
            laplacian,
            diag,
            left,
            right,
            symmetrized: true,
        })
    }

    pub fn chart(&self) -> &Arc<GridChart<T>> {
        &self.chart
    }

    pub fn matrix(&self) -> &Csr<T> {
        &self.laplacian
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Largest diagonal magnitude, a cheap proxy for the stiffness.
    pub fn stiffness(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, &d| m.max(d.abs()))
    }

    pub fn apply_values(&self, f: &[T], out: &mut [T]) {
        self.laplacian.apply_into(f, out);
    }

    pub fn sublaplacian_apply(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.chart.ensure_same(&f.chart)?;
        Ok(ScalarField {
            chart: self.chart.clone(),
            values: self.laplacian.apply(&f.values),
        })
    }

    /// Frame derivatives `(D_i^+ f, D_i^- f)` for every frame field.
    pub fn frame_differences(&self, f: &[T], frame: Frame) -> Vec<(Vec<T>, Vec<T>)> {
        let ops = match frame {
            Frame::Left => &self.left,
            Frame::Right => &self.right,
        };
        ops.iter().map(|(fw, bw)| (fw.apply(f), bw.apply(f))).collect()
    }

    /// `Gamma(f, g) = 1/2 sum_i (D_i^+ f D_i^+ g + D_i^- f D_i^- g)`.
    pub fn carre_du_champ_values(&self, f: &[T], g: &[T], frame: Frame) -> Vec<T> {
        let df = self.frame_differences(f, frame);
        let same = std::ptr::eq(f, g);
        let dg = if same { Vec::new() } else { self.frame_differences(g, frame) };
        let half = T::c(0.5);
        let mut out = vec![T::zero(); f.len()];
        for (i, (fp, fm)) in df.iter().enumerate() {
            let (gp, gm) = if same { (fp, fm) } else { (&dg[i].0, &dg[i].1) };
            for (k, o) in out.iter_mut().enumerate() {
                *o += half * (fp[k] * gp[k] + fm[k] * gm[k]);
            }
        }
        out
    }

    pub fn carre_du_champ(&self, f: &ScalarField<T>, g: &ScalarField<T>, frame: Frame) -> Result<ScalarField<T>> {
        self.chart.ensure_same(&f.chart)?;
        self.chart.ensure_same(&g.chart)?;
        Ok(ScalarField {
            chart: self.chart.clone(),
            values: self.carre_du_champ_values(&f.values, &g.values, frame),
        })
    }

    pub fn gamma(&self, f: &ScalarField<T>, frame: Frame) -> Result<ScalarField<T>> {
        self.chart.ensure_same(&f.chart)?;
        Ok(ScalarField {
            chart: self.chart.clone(),
            values: self.carre_du_champ_values(&f.values, &f.values, frame),
        })
    }

    /// Dirichlet energy `-<f, Delta f>` with cell-volume weights.
    pub fn dirichlet_energy(&self, f: &[T]) -> T {
        let lf = self.laplacian.apply(f);
        -crate::scalar::dot(f, &lf) * self.chart.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;

    fn heis(n: usize) -> HeatOperator<f64> {
        let c = GridChart::centered_cube(GroupModel::heisenberg(), 1.0, n).unwrap();
        HeatOperator::assemble(Arc::new(c)).unwrap()
    }

    fn interior(chart: &GridChart<f64>, margin: usize) -> Vec<usize> {
        let mut idx = vec![0; chart.ndim()];
        (0..chart.len())
            .filter(|&f| {
                chart.multi_index(f, &mut idx);
                idx.iter().zip(chart.shape()).all(|(&i, &s)| i >= margin && i + margin < s)
            })
            .collect()
    }

    #[test]
    fn constants_are_annihilated_and_operator_is_symmetric() {
        let op = heis(8);
        let m = op.matrix();
        let ones = vec![1.0; m.n];
        assert!(m.apply(&ones).iter().all(|v| v.abs() < 1e-10));
        let t = m.transpose();
        for r in 0..m.n {
            for (c, v) in m.row(r) {
                assert!((t.get(r, c) - v).abs() < 1e-12);
            }
        }
        assert!(op.diagonal().iter().all(|&d| d <= 0.0));
    }

    #[test]
    fn heisenberg_radial_quadratic() {
        let op = heis(12);
        let f = ScalarField::from_fn(op.chart().clone(), |p| p[0] * p[0] + p[1] * p[1]);
        let lf = op.sublaplacian_apply(&f).unwrap();
        for k in interior(op.chart(), 1) {
            assert!((lf.values[k] - 4.0).abs() < 1e-9, "{}", lf.values[k]);
        }
    }

    #[test]
    fn abelian_line_quadratic_and_gradient() {
        let c = Arc::new(GridChart::centered_cube(GroupModel::abelian_box(1).unwrap(), 1.0, 20).unwrap());
        let op = HeatOperator::assemble(c.clone()).unwrap();
        let f = ScalarField::from_fn(c.clone(), |p: &[f64]| p[0] * p[0]);
        let lf = op.sublaplacian_apply(&f).unwrap();
        for k in 1..19 {
            assert!((lf.values[k] - 2.0).abs() < 1e-10);
        }
        let x = ScalarField::from_fn(c, |p: &[f64]| p[0]);
        let g = op.gamma(&x, Frame::Left).unwrap();
        for k in 1..19 {
            assert!((g.values[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_of_constant_and_chart_mismatch() {
        let op = heis(6);
        let one = ScalarField::constant(op.chart().clone(), 3.0);
        let f = ScalarField::from_fn(op.chart().clone(), |p| p[0] * p[2]);
        let g = op.carre_du_champ(&one, &f, Frame::Left).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-12));
        let other = heis(4);
        let wrong = ScalarField::constant(other.chart().clone(), 0.0);
        assert!(op.sublaplacian_apply(&wrong).is_err());
    }

    #[test]
    fn heisenberg_frame_derivatives_of_coordinates() {
        // X_1 z = -y/2 and right-invariant variant +y/2.
        let op = heis(10);
        let z = ScalarField::from_fn(op.chart().clone(), |p| p[2]);
        let left = op.frame_differences(&z.values, Frame::Left);
        let right = op.frame_differences(&z.values, Frame::Right);
        for k in interior(op.chart(), 1) {
            let p = op.chart().node(k);
            assert!((left[0].0[k] + 0.5 * p[1]).abs() < 1e-9);
            assert!((right[0].0[k] - 0.5 * p[1]).abs() < 1e-9);
            assert!((left[1].1[k] - 0.5 * p[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn chain_rule_defect_shrinks_with_h() {
        // Gamma(f^2) - 4 f^2 Gamma(f) on interior nodes, halving h.
        let mut errs = Vec::new();
        for n in [12, 24] {
            let op = heis(n);
            let f = ScalarField::from_fn(op.chart().clone(), |p| (0.7 * p[0] + 0.4 * p[2] - 0.3 * p[1]).sin() + 1.5);
            let f2 = f.map(|v| v * v);
            let g1 = op.gamma(&f, Frame::Left).unwrap();
            let g2 = op.gamma(&f2, Frame::Left).unwrap();
            let err = interior(op.chart(), 2)
                .into_iter()
                .map(|k| (g2.values[k] - 4.0 * f.values[k].powi(2) * g1.values[k]).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }
}
