//! Crank–Nicolson time stepping for `d/dt f = Delta f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::GroupPoint;
use crate::heat::field::{DensityField, ScalarField};
use crate::heat::operator::HeatOperator;
use crate::scalar::{dot, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelInit {
    /// One cell of mass one.
    Delta,
    /// Normalized Gaussian of the given standard deviation in grid spacings.
    Bump { width: f64 },
}

impl Default for KernelInit {
    fn default() -> Self {
        KernelInit::Delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stepping<T> {
    /// Time step as a multiple of `min(spacing)^2`.
    pub dt_factor: T,
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for Stepping<T> {
    fn default() -> Self {
        Self {
            dt_factor: T::c(0.5),
            tolerance: T::c(1e-10).max(T::solver_floor()),
            max_iterations: 10_000,
        }
    }
}

/// Heat semigroup on one operator with a fixed stepping policy.
#[derive(Debug)]
pub struct HeatFlow<T> {
    pub op: HeatOperator<T>,
    pub stepping: Stepping<T>,
}

impl<T: Real> HeatFlow<T> {
    pub fn new(op: HeatOperator<T>, stepping: Stepping<T>) -> Result<Self> {
        if !(stepping.dt_factor > T::zero()) || !(stepping.tolerance > T::zero()) {
            return invalid("dt_factor and tolerance must be positive");
        }
        Ok(Self { op, stepping })
    }

    pub fn with_defaults(op: HeatOperator<T>) -> Self {
        Self {
            op,
            stepping: Stepping::default(),
        }
    }

    pub fn base_dt(&self) -> T {
        let h = self.op.chart().min_spacing();
        self.stepping.dt_factor * h * h
    }

    /// `P_t f` with the default time step.
    pub fn evolve(&self, f: &ScalarField<T>, t: T) -> Result<ScalarField<T>> {
        self.heat_evolve(f, t, self.base_dt())
    }

    /// `P_t f` in `ceil(t / dt)` equal Crank–Nicolson steps.
    pub fn heat_evolve(&self, f: &ScalarField<T>, t: T, dt: T) -> Result<ScalarField<T>> {
        self.op.chart().ensure_same(&f.chart)?;
        if !(t >= T::zero()) || !(dt > T::zero()) {
            return invalid("heat_evolve needs t >= 0 and dt > 0");
        }
        let mut values = f.values.clone();
        self.evolve_values(&mut values, t, dt)?;
        Ok(ScalarField {
            chart: f.chart.clone(),
            values,
        })
    }

    /// Evolves through increasing checkpoints, returning `P_t f` for each.
    pub fn evolve_through(&self, f: &ScalarField<T>, times: &[T]) -> Result<Vec<ScalarField<T>>> {
        self.op.chart().ensure_same(&f.chart)?;
        let mut out = Vec::with_capacity(times.len());
        let mut values = f.values.clone();
        let mut now = T::zero();
        for &t in times {
            if t < now {
                return invalid("checkpoint times must be nondecreasing");
            }
            self.evolve_values(&mut values, t - now, self.base_dt())?;
            now = t;
            out.push(ScalarField {
                chart: f.chart.clone(),
                values: values.clone(),
            });
        }
        Ok(out)
    }

    pub fn evolve_values(&self, values: &mut Vec<T>, t: T, dt: T) -> Result<()> {
        if t == T::zero() {
            return Ok(());
        }
        let ratio = (t / dt).to_f64().unwrap_or(f64::INFINITY);
        if !ratio.is_finite() || ratio > 1e8 {
            return invalid("too many time steps requested");
        }
        let steps = ((ratio * (1.0 - 1e-12)).ceil() as usize).max(1);
        let h = t / T::of_usize(steps);
        let mut rhs = vec![T::zero(); values.len()];
        let mut work = CgWork::new(values.len());
        for _ in 0..steps {
            self.cn_rhs(values, h, &mut rhs);
            self.solve(&rhs, values, h, &mut work)?;
        }
        Ok(())
    }

    fn cn_rhs(&self, u: &[T], dt: T, rhs: &mut [T]) {
        self.op.apply_values(u, rhs);
        let half = dt * T::c(0.5);
        rhs.par_iter_mut().zip(u.par_iter()).for_each(|(r, &x)| *r = x + half * *r);
    }

    /// `y = (I - dt/2 Delta) x`.
    fn apply_system(&self, x: &[T], dt: T, y: &mut [T]) {
        self.op.apply_values(x, y);
        let half = dt * T::c(0.5);
        y.par_iter_mut().zip(x.par_iter()).for_each(|(o, &v)| *o = v - half * *o);
    }

    /// Jacobi-preconditioned CG, warm-started from `x`.
    fn solve(&self, b: &[T], x: &mut [T], dt: T, w: &mut CgWork<T>) -> Result<()> {
        let half = dt * T::c(0.5);
        let n = b.len();
        let inv_diag: Vec<T> = self.op.diagonal().iter().map(|&d| T::one() / (T::one() - half * d)).collect();
        let bnorm = dot(b, b).sqrt();
        if bnorm == T::zero() {
            x.iter_mut().for_each(|v| *v = T::zero());
            return Ok(());
        }
        let tol = self.stepping.tolerance.max(T::solver_floor()) * bnorm;
        self.apply_system(x, dt, &mut w.q);
        for i in 0..n {
            w.r[i] = b[i] - w.q[i];
            w.z[i] = w.r[i] * inv_diag[i];
        }
        w.p.copy_from_slice(&w.z);
        let mut rz = dot(&w.r, &w.z);
        let mut rnorm = dot(&w.r, &w.r).sqrt();
        let mut it = 0;
        while rnorm > tol {
            if it >= self.stepping.max_iterations {
                return Err(Error::Numerical {
                    message: "conjugate gradients did not converge".into(),
                    iterations: it,
                    residual: (rnorm / bnorm).f64(),
                });
            }
            self.apply_system(&w.p, dt, &mut w.q);
            let alpha = rz / dot(&w.p, &w.q);
            let (p, q) = (&w.p, &w.q);
            x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, &pi)| *xi += alpha * pi);
            w.r.par_iter_mut().zip(q.par_iter()).for_each(|(ri, &qi)| *ri -= alpha * qi);
            w.z.par_iter_mut()
                .zip(w.r.par_iter().zip(inv_diag.par_iter()))
                .for_each(|(zi, (&ri, &di))| *zi = ri * di);
            let rz_new = dot(&w.r, &w.z);
            let beta = rz_new / rz;
            rz = rz_new;
            let z = &w.z;
            w.p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, &zi)| *pi = zi + beta * *pi);
            rnorm = dot(&w.r, &w.r).sqrt();
            it += 1;
        }
        Ok(())
    }

    /// `H_t mu = (P_t f) m`; the result is not clamped.
    pub fn dual_heat_on_measure(&self, mu: &DensityField<T>, t: T) -> Result<DensityField<T>> {
        if !mu.is_probability(1e-6) {
            return invalid(format!("measure has mass {}, expected 1", mu.mass));
        }
        let f = self.evolve(&mu.as_scalar(), t)?;
        Ok(DensityField::from_scalar(f))
    }

    /// Initial density used for `p_t[x0]`.
    pub fn kernel_seed(&self, x0: &GroupPoint<T>, init: KernelInit) -> Result<DensityField<T>> {
        let chart = self.op.chart();
        let node = chart.nearest_index(x0)?;
        match init {
            KernelInit::Delta => Ok(DensityField::delta(chart.clone(), node)),
            KernelInit::Bump { width } => {
                if !(width > 0.0) {
                    return invalid("bump width must be positive");
                }
                let n = chart.ndim();
                let mut centre = vec![0usize; n];
                chart.multi_index(node, &mut centre);
                let mut idx = vec![0usize; n];
                let periodic = chart.boundary() == crate::heat::grid::Boundary::Periodic;
                let values: Vec<T> = (0..chart.len())
                    .map(|k| {
                        chart.multi_index(k, &mut idx);
                        let mut r2 = 0.0;
                        for a in 0..n {
                            let mut d = (idx[a] as f64 - centre[a] as f64).abs();
                            if periodic {
                                d = d.min(chart.shape()[a] as f64 - d);
                            }
                            r2 += d * d;
                        }
                        T::c((-0.5 * r2 / (width * width)).exp())
                    })
                    .collect();
                DensityField::new(chart.clone(), values)?.normalized()
            }
        }
    }

    pub fn heat_kernel(&self, x0: &GroupPoint<T>, t: T, init: KernelInit) -> Result<DensityField<T>> {
        if !(t > T::zero()) {
            return invalid("heat_kernel needs t > 0");
        }
        let seed = self.kernel_seed(x0, init)?;
        self.dual_heat_on_measure(&seed, t)
    }

    /// `h^eps f = int_0^inf P_{eps r} f kappa(r) dr` for `kappa` supported in
    /// `[a, b]`, by composite Simpson on `panels` (even) panels with weights
    /// renormalized to integrate `kappa` to one.
    pub fn mollify_semigroup(
        &self,
        f: &ScalarField<T>,
        eps: T,
        kernel: &SmoothKernel,
        panels: usize,
    ) -> Result<ScalarField<T>> {
        let (times, weights) = self.mollifier_quadrature(eps, kernel, panels, false)?;
        self.weighted_flow(f, &times, &weights)
    }

    /// `-(1/eps) int P_{eps r} f kappa'(r) dr`, which equals `Delta h^eps f`.
    pub fn mollifier_laplacian_identity(
        &self,
        f: &ScalarField<T>,
        eps: T,
        kernel: &SmoothKernel,
        panels: usize,
    ) -> Result<ScalarField<T>> {
        let (times, weights) = self.mollifier_quadrature(eps, kernel, panels, true)?;
        let mut g = self.weighted_flow(f, &times, &weights)?;
        let s = -T::one() / eps;
        g.values.iter_mut().for_each(|v| *v *= s);
        Ok(g)
    }

    fn mollifier_quadrature(
        &self,
        eps: T,
        kernel: &SmoothKernel,
        panels: usize,
        derivative: bool,
    ) -> Result<(Vec<T>, Vec<T>)> {
        if !(eps > T::zero()) || panels < 2 || panels % 2 == 1 {
            return invalid("mollifier needs eps > 0 and an even panel count");
        }
        let (a, b) = kernel.support;
        let h = (b - a) / panels as f64;
        let simpson = |k: usize| if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let mass: f64 = (0..=panels).map(|k| simpson(k) * kernel.value(a + k as f64 * h)).sum::<f64>() * h / 3.0;
        let mut times = Vec::new();
        let mut weights = Vec::new();
        for k in 0..=panels {
            let r = a + k as f64 * h;
            let v = if derivative { kernel.derivative(r) } else { kernel.value(r) };
            times.push(eps * T::c(r));
            weights.push(T::c(simpson(k) * v * h / 3.0 / mass));
        }
        Ok((times, weights))
    }

    fn weighted_flow(&self, f: &ScalarField<T>, times: &[T], weights: &[T]) -> Result<ScalarField<T>> {
        let snaps = self.evolve_through(f, times)?;
        let mut acc = vec![T::zero(); f.values.len()];
        for (s, &w) in snaps.iter().zip(weights) {
            for (a, &v) in acc.iter_mut().zip(&s.values) {
                *a += w * v;
            }
        }
        Ok(ScalarField {
            chart: f.chart.clone(),
            values: acc,
        })
    }
}

struct CgWork<T> {
    r: Vec<T>,
    z: Vec<T>,
    p: Vec<T>,
    q: Vec<T>,
}

impl<T: Real> CgWork<T> {
    fn new(n: usize) -> Self {
        Self {
            r: vec![T::zero(); n],
            z: vec![T::zero(); n],
            p: vec![T::zero(); n],
            q: vec![T::zero(); n],
        }
    }
}

/// Smooth compactly supported profile `kappa` on `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothKernel {
    pub support: (f64, f64),
}

impl Default for SmoothKernel {
    fn default() -> Self {
        Self { support: (0.5, 2.0) }
    }
}

impl SmoothKernel {
    /// Unnormalized bump `exp(-1 / ((r - a)(b - r)))`.
    pub fn value(&self, r: f64) -> f64 {
        let (a, b) = self.support;
        if r <= a || r >= b {
            return 0.0;
        }
        (-1.0 / ((r - a) * (b - r))).exp()
    }

    /// Derivative of the normalized-shape bump (normalization applied by
    /// the quadrature, which divides by the same mass).
    pub fn derivative(&self, r: f64) -> f64 {
        let (a, b) = self.support;
        if r <= a || r >= b {
            return 0.0;
        }
        let q = (r - a) * (b - r);
        let dq = (b - r) - (r - a);
        self.value(r) * dq / (q * q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;
    use crate::heat::grid::GridChart;
    use std::sync::Arc;

    fn flow(model: GroupModel<f64>, half: f64, n: usize) -> HeatFlow<f64> {
        let c = Arc::new(GridChart::centered_cube(model, half, n).unwrap());
        HeatFlow::with_defaults(HeatOperator::assemble(c).unwrap())
    }

    fn torus_flow(n: usize) -> HeatFlow<f64> {
        let c = Arc::new(GridChart::torus(GroupModel::torus(vec![1.0, 1.0]).unwrap(), vec![n, n]).unwrap());
        HeatFlow::with_defaults(HeatOperator::assemble(c).unwrap())
    }

    #[test]
    fn constants_are_fixed() {
        let fl = flow(GroupModel::heisenberg(), 1.0, 8);
        let c = ScalarField::constant(fl.op.chart().clone(), 2.5);
        let out = fl.evolve(&c, 0.1).unwrap();
        assert!(out.values.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let fl = flow(GroupModel::heisenberg(), 1.0, 10);
        let chart = fl.op.chart().clone();
        let f = ScalarField::from_fn(chart, |p| (-(p[0] * p[0] + 2.0 * p[1] * p[1] + p[2] * p[2])).exp());
        let dt = fl.base_dt();
        let g = fl.heat_evolve(&f, dt, dt).unwrap();
        assert!((g.integral() - f.integral()).abs() <= 1e-8);
    }

    #[test]
    fn symmetric_kernel_on_torus_and_uniform_limit() {
        let fl = torus_flow(16);
        let x = GroupPoint::from_f64(&[0.1, 0.2]);
        let y = GroupPoint::from_f64(&[0.6, 0.9]);
        let px = fl.heat_kernel(&x, 0.05, KernelInit::Delta).unwrap();
        let py = fl.heat_kernel(&y, 0.05, KernelInit::Delta).unwrap();
        let ix = fl.op.chart().nearest_index(&x).unwrap();
        let iy = fl.op.chart().nearest_index(&y).unwrap();
        assert!((px.values[iy] - py.values[ix]).abs() < 1e-6);
        assert!((px.mass - 1.0).abs() < 1e-6);
        let late = fl.heat_kernel(&x, 2.0, KernelInit::Delta).unwrap();
        assert!(late.values.iter().all(|v| (v - 1.0).abs() < 1e-3));
    }

    #[test]
    fn semigroup_property_at_commensurate_times() {
        let fl = flow(GroupModel::abelian_box(2).unwrap(), 1.0, 16);
        let f = ScalarField::from_fn(fl.op.chart().clone(), |p| (3.0 * p[0]).cos() * p[1]);
        let dt = fl.base_dt();
        let a = fl.heat_evolve(&f, 20.0 * dt, dt).unwrap();
        let b = fl.heat_evolve(&fl.heat_evolve(&f, 12.0 * dt, dt).unwrap(), 8.0 * dt, dt).unwrap();
        let err = a.values.iter().zip(&b.values).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn linearity_and_identity_on_measures() {
        let fl = flow(GroupModel::abelian_box(1).unwrap(), 2.0, 64);
        let c = fl.op.chart().clone();
        let mu = DensityField::normalized_from_fn(c.clone(), |p| (-(p[0] - 0.5).powi(2) * 8.0).exp()).unwrap();
        let nu = DensityField::normalized_from_fn(c, |p| (-(p[0] + 0.5).powi(2) * 8.0).exp()).unwrap();
        assert_eq!(fl.dual_heat_on_measure(&mu, 0.0).unwrap(), mu);
        let mix = mu.mix(&nu, 0.5).unwrap();
        let lhs = fl.dual_heat_on_measure(&mix, 0.1).unwrap();
        let a = fl.dual_heat_on_measure(&mu, 0.1).unwrap();
        let b = fl.dual_heat_on_measure(&nu, 0.1).unwrap();
        let rhs = a.mix(&b, 0.5).unwrap();
        let err = lhs.values.iter().zip(&rhs.values).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10 * 4.0, "{err}");
        let bad = DensityField::from_values_unchecked(mu.chart.clone(), vec![0.0; 64]);
        assert!(fl.dual_heat_on_measure(&bad, 0.1).is_err());
    }

    #[test]
    fn mollifier_converges_and_satisfies_laplacian_identity() {
        let fl = torus_flow(32);
        let f = ScalarField::from_fn(fl.op.chart().clone(), |p| (std::f64::consts::TAU * p[0]).sin() + (std::f64::consts::TAU * p[1]).cos() * 0.5);
        let k = SmoothKernel::default();
        let mut errs = Vec::new();
        for eps in [0.01, 0.005, 0.0025] {
            let h = fl.mollify_semigroup(&f, eps, &k, 16).unwrap();
            let d = ScalarField {
                chart: f.chart.clone(),
                values: h.values.iter().zip(&f.values).map(|(a, b)| a - b).collect(),
            };
            errs.push(d.lp_norm(2.0));
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let eps = 0.01;
        let h = fl.mollify_semigroup(&f, eps, &k, 32).unwrap();
        let lh = fl.op.sublaplacian_apply(&h).unwrap();
        let id = fl.mollifier_laplacian_identity(&f, eps, &k, 32).unwrap();
        let scale = lh.lp_norm(2.0);
        let diff = ScalarField {
            chart: f.chart.clone(),
            values: lh.values.iter().zip(&id.values).map(|(a, b)| a - b).collect(),
        };
        assert!(diff.lp_norm(2.0) < 1e-2 * scale, "{} vs {}", diff.lp_norm(2.0), scale);
    }

    #[test]
    fn bump_seed_has_unit_mass() {
        let fl = flow(GroupModel::heisenberg(), 1.0, 12);
        let s = fl.kernel_seed(&GroupPoint::from_f64(&[0.0, 0.0, 0.0]), KernelInit::Bump { width: 2.0 }).unwrap();
        assert!((s.mass - 1.0).abs() < 1e-12);
        assert!(fl.kernel_seed(&GroupPoint::from_f64(&[3.0, 0.0, 0.0]), KernelInit::Delta).is_err());
    }
}
