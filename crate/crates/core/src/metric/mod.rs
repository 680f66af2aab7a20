//! Carnot–Carathéodory distance and geodesics.
//!
//! Abelian models use the Euclidean (or flat-torus) metric. On `H^1` the
//! distance is computed from the circular-arc parametrization of
//! geodesics: a geodesic from the origin whose xy-projection is an arc of
//! central angle `theta` and chord `r` reaches height
//! `|z| = r^2 (theta - sin theta) / (8 sin^2(theta/2))` with length
//! `r theta / (2 sin(theta/2))`. That closed form is validated against the
//! lattice oracle in [`graph`], which knows nothing about arcs.

pub mod graph;

use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::group::{wrap, GroupFamily, GroupModel, GroupPoint};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMethod {
    ClosedForm,
    HorizontalGraph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricOracle<T> {
    pub method: MetricMethod,
    pub graph_resolution: usize,
    pub root_tolerance: T,
}

impl<T: Real> Default for MetricOracle<T> {
    fn default() -> Self {
        Self {
            method: MetricMethod::ClosedForm,
            graph_resolution: 32,
            root_tolerance: T::c(1e-12).max(T::solver_floor()),
        }
    }
}

impl<T: Real> MetricOracle<T> {
    pub fn closed_form() -> Self {
        Self::default()
    }

    pub fn graph(resolution: usize) -> Result<Self> {
        let o = Self {
            method: MetricMethod::HorizontalGraph,
            graph_resolution: resolution,
            ..Self::default()
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph_resolution < 8 {
            return invalid("graph_resolution must be at least 8");
        }
        if !(self.root_tolerance > T::zero() && self.root_tolerance <= T::c(1e-3)) {
            return invalid("root_tolerance must lie in (0, 1e-3]");
        }
        Ok(())
    }
}

/// Distance value together with how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOutcome<T> {
    pub value: T,
    pub method: MetricMethod,
    /// Set when the closed form could not bracket its root and the graph
    /// oracle answered instead.
    pub fell_back: bool,
}

/// A model paired with an oracle; the workhorse for cost matrices.
#[derive(Clone, Debug)]
pub struct CcMetric<T> {
    pub model: GroupModel<T>,
    pub oracle: MetricOracle<T>,
}

impl<T: Real> CcMetric<T> {
    pub fn new(model: GroupModel<T>, oracle: MetricOracle<T>) -> Result<Self> {
        oracle.validate()?;
        Ok(Self { model, oracle })
    }

    pub fn closed_form(model: GroupModel<T>) -> Self {
        Self {
            model,
            oracle: MetricOracle::default(),
        }
    }

    /// Distance between raw coordinate slices (no validation).
    pub fn dist(&self, a: &[T], b: &[T]) -> T {
        self.outcome(a, b).map(|o| o.value).unwrap_or(T::nan())
    }

    pub fn outcome(&self, a: &[T], b: &[T]) -> Result<DistanceOutcome<T>> {
        match self.model.family() {
            GroupFamily::AbelianBox => Ok(exact(euclid(a, b))),
            GroupFamily::AbelianTorus => {
                let periods = self.model.periods().expect("torus has periods");
                let mut s = T::zero();
                for ((&u, &v), &p) in a.iter().zip(b).zip(periods) {
                    let d = wrap(v - u, p);
                    let d = d.min(p - d);
                    s += d * d;
                }
                Ok(exact(s.sqrt()))
            }
            GroupFamily::Heisenberg1 => {
                let rel = self.model.multiply_unchecked(&[-a[0], -a[1], -a[2]], b);
                let (x, y, z) = (rel[0], rel[1], rel[2]);
                match self.oracle.method {
                    MetricMethod::HorizontalGraph => Ok(DistanceOutcome {
                        value: graph::heisenberg_graph_norm(x, y, z, self.oracle.graph_resolution)?,
                        method: MetricMethod::HorizontalGraph,
                        fell_back: false,
                    }),
                    MetricMethod::ClosedForm => match heisenberg_norm(x, y, z, self.oracle.root_tolerance) {
                        Some(v) => Ok(exact(v)),
                        None => Ok(DistanceOutcome {
                            value: graph::heisenberg_graph_norm(x, y, z, self.oracle.graph_resolution)?,
                            method: MetricMethod::HorizontalGraph,
                            fell_back: true,
                        }),
                    },
                }
            }
        }
    }

    pub fn distance(&self, a: &GroupPoint<T>, b: &GroupPoint<T>) -> Result<T> {
        self.model.check(a)?;
        self.model.check(b)?;
        Ok(self.outcome(&a.coords, &b.coords)?.value)
    }

    /// Point at parameter `s` of the constant-speed geodesic from `a` to `b`.
    pub fn geodesic_point(&self, a: &[T], b: &[T], s: T) -> GroupPoint<T> {
        match self.model.family() {
            GroupFamily::AbelianBox => {
                GroupPoint::new(a.iter().zip(b).map(|(&u, &v)| u + s * (v - u)).collect())
            }
            GroupFamily::AbelianTorus => {
                let periods = self.model.periods().expect("torus has periods");
                let coords = a
                    .iter()
                    .zip(b)
                    .zip(periods)
                    .map(|((&u, &v), &p)| {
                        let mut d = wrap(v - u, p);
                        if d > p * T::c(0.5) {
                            d -= p;
                        }
                        wrap(u + s * d, p)
                    })
                    .collect();
                GroupPoint::new(coords)
            }
            GroupFamily::Heisenberg1 => {
                let rel = self.model.multiply_unchecked(&[-a[0], -a[1], -a[2]], b);
                let local = heisenberg_geodesic_from_origin(rel[0], rel[1], rel[2], s, self.oracle.root_tolerance);
                self.model.multiply_unchecked(a, &local)
            }
        }
    }
}

fn exact<T>(value: T) -> DistanceOutcome<T> {
    DistanceOutcome {
        value,
        method: MetricMethod::ClosedForm,
        fell_back: false,
    }
}

fn euclid<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&u, &v)| (v - u) * (v - u))
        .fold(T::zero(), |acc, d| acc + d)
        .sqrt()
}

/// `(theta - sin theta) / (8 sin^2(theta/2))`, increasing from 0 to +inf on `(0, 2 pi)`.
fn height_ratio<T: Real>(theta: T) -> T {
    let half = theta * T::c(0.5);
    let s = half.sin();
    let num = if theta < T::c(1e-2) {
        // theta - sin theta, cancellation-free.
        let t2 = theta * theta;
        theta * t2 / T::c(6.0) * (T::one() - t2 / T::c(20.0) * (T::one() - t2 / T::c(42.0)))
    } else {
        theta - theta.sin()
    };
    num / (T::c(8.0) * s * s)
}

/// Solves `height_ratio(theta) = target` by bisection; `None` when the
/// target exceeds what can be bracketed below `2 pi`.
fn solve_angle<T: Real>(target: T, tol: T) -> Option<T> {
    let two_pi = T::TAU();
    let mut lo = T::zero();
    let mut hi = two_pi * (T::one() - T::c(64.0) * T::epsilon());
    if height_ratio(hi) < target {
        return None;
    }
    // Small targets: theta ~ 12 * target.
    if target < T::c(1e-6) {
        return Some(T::c(12.0) * target);
    }
    let tol = tol.max(T::solver_floor());
    for _ in 0..200 {
        let mid = T::c(0.5) * (lo + hi);
        if height_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Some(T::c(0.5) * (lo + hi))
}

fn arc_length_factor<T: Real>(theta: T) -> T {
    // theta / (2 sin(theta/2))
    if theta < T::c(1e-4) {
        T::one() + theta * theta / T::c(24.0)
    } else {
        theta / (T::c(2.0) * (theta * T::c(0.5)).sin())
    }
}

/// CC norm `d(o, (x, y, z))` on `H^1`; `None` when the root is not bracketable.
pub fn heisenberg_norm<T: Real>(x: T, y: T, z: T, tol: T) -> Option<T> {
    let r2 = x * x + y * y;
    let az = z.abs();
    if az == T::zero() {
        return Some(r2.sqrt());
    }
    if r2 == T::zero() {
        return Some(T::c(2.0) * (T::PI() * az).sqrt());
    }
    let target = az / r2;
    let theta = solve_angle(target, tol)?;
    Some(r2.sqrt() * arc_length_factor(theta))
}

/// Geodesic from the origin to `(x,y,z)` evaluated at parameter `s`.
fn heisenberg_geodesic_from_origin<T: Real>(x: T, y: T, z: T, s: T, tol: T) -> Vec<T> {
    let r = (x * x + y * y).sqrt();
    let az = z.abs();
    if az == T::zero() {
        return vec![s * x, s * y, T::zero()];
    }
    let (theta, alpha) = if r == T::zero() {
        (T::TAU(), T::zero())
    } else {
        let theta = solve_angle(az / (r * r), tol).unwrap_or(T::TAU());
        let sign = z.signum();
        (theta, y.atan2(x) - sign * theta * T::c(0.5))
    };
    let length = if r == T::zero() {
        T::c(2.0) * (T::PI() * az).sqrt()
    } else {
        r * arc_length_factor(theta)
    };
    let radius = length / theta;
    let sign = z.signum();
    let phi = s * theta;
    let px = radius * sign * ((alpha + sign * phi).sin() - alpha.sin());
    let py = radius * sign * (alpha.cos() - (alpha + sign * phi).cos());
    let swept = if phi < T::c(1e-2) {
        let p2 = phi * phi;
        phi * p2 / T::c(6.0) * (T::one() - p2 / T::c(20.0))
    } else {
        phi - phi.sin()
    };
    let pz = sign * radius * radius * swept * T::c(0.5);
    vec![px, py, pz]
}

/// Ordered samples of a geodesic with the length of the horizontal polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct PathPolyline<T> {
    pub points: Vec<GroupPoint<T>>,
    pub length: T,
}

/// Length of the horizontal segment between consecutive samples: the
/// length of the straight horizontal lift of the projected chord.
pub fn segment_length<T: Real>(model: &GroupModel<T>, a: &[T], b: &[T]) -> T {
    match model.family() {
        GroupFamily::Heisenberg1 => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
        GroupFamily::AbelianTorus => CcMetric::closed_form(model.clone()).dist(a, b),
        GroupFamily::AbelianBox => euclid(a, b),
    }
}

pub fn cc_distance<T: Real>(
    model: &GroupModel<T>,
    oracle: &MetricOracle<T>,
    a: &GroupPoint<T>,
    b: &GroupPoint<T>,
) -> Result<T> {
    CcMetric::new(model.clone(), oracle.clone())?.distance(a, b)
}

pub fn cc_geodesic<T: Real>(
    model: &GroupModel<T>,
    a: &GroupPoint<T>,
    b: &GroupPoint<T>,
    samples: usize,
) -> Result<PathPolyline<T>> {
    if samples < 2 {
        return invalid("a geodesic needs at least two samples");
    }
    model.check(a)?;
    model.check(b)?;
    let metric = CcMetric::closed_form(model.clone());
    let mut points = Vec::with_capacity(samples);
    for k in 0..samples {
        let s = T::of_usize(k) / T::of_usize(samples - 1);
        let p = if k == 0 {
            a.clone()
        } else if k + 1 == samples {
            b.clone()
        } else {
            metric.geodesic_point(&a.coords, &b.coords, s)
        };
        points.push(p);
    }
    let length = points
        .windows(2)
        .map(|w| segment_length(model, &w[0].coords, &w[1].coords))
        .fold(T::zero(), |acc, l| acc + l);
    Ok(PathPolyline { points, length })
}

/// Lebesgue volume of the CC ball of radius `r` (independent of the centre).
pub fn ball_volume<T: Real>(model: &GroupModel<T>, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return invalid("ball radius must be positive");
    }
    let n = model.dimension();
    match model.family() {
        GroupFamily::AbelianBox => Ok(euclidean_ball(n, r)),
        GroupFamily::AbelianTorus => {
            let half = model
                .periods()
                .expect("torus")
                .iter()
                .fold(T::infinity(), |m, &p| m.min(p))
                * T::c(0.5);
            if r > half {
                return Err(Error::Unsupported(
                    "torus balls wider than half a period are not round".into(),
                ));
            }
            Ok(euclidean_ball(n, r))
        }
        GroupFamily::Heisenberg1 => Ok(T::c(heisenberg_unit_ball_volume()) * r.powi(4)),
    }
}

fn euclidean_ball<T: Real>(n: usize, r: T) -> T {
    // omega_{k+2} = omega_k * 2 pi / (k + 2), from omega_0 = 1 and omega_1 = 2.
    let (mut k, mut omega) = if n % 2 == 0 { (0, 1.0f64) } else { (1, 2.0f64) };
    while k < n {
        k += 2;
        omega *= 2.0 * std::f64::consts::PI / k as f64;
    }
    T::c(omega) * r.powi(n as i32)
}

/// Volume of `B_1(o)` in `H^1`, integrating the height profile of the unit
/// sphere traced by arcs of angle `theta in [0, 2 pi]`.
pub fn heisenberg_unit_ball_volume() -> f64 {
    use std::f64::consts::{PI, TAU};
    let f = |theta: f64| {
        if theta <= 0.0 {
            return 0.0;
        }
        let h = 0.5 * theta;
        let r = 2.0 * h.sin() / theta;
        let dr = (theta * h.cos() - 2.0 * h.sin()) / (theta * theta);
        let z = (theta - theta.sin()) / (2.0 * theta * theta);
        4.0 * PI * z * r * dr.abs()
    };
    let n = 4000;
    let h = TAU / n as f64;
    let mut s = f(0.0) + f(TAU);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hm() -> CcMetric<f64> {
        CcMetric::closed_form(GroupModel::heisenberg())
    }

    #[test]
    fn horizontal_segment_distance() {
        let m = hm();
        assert!((m.dist(&[0.0, 0.0, 0.0], &[3.0, 4.0, 0.0]) - 5.0).abs() < 1e-12);
        assert_eq!(m.dist(&[0.4, 0.1, -2.0], &[0.4, 0.1, -2.0]), 0.0);
    }

    #[test]
    fn vertical_distance_limit() {
        let m = hm();
        let v = m.dist(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        assert!((v - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // approaching the vertical axis is continuous
        let near = m.dist(&[0.0, 0.0, 0.0], &[1e-7, 0.0, 1.0]);
        assert!((near - v).abs() < 1e-5);
    }

    #[test]
    fn abelian_and_torus_distances() {
        let box2 = CcMetric::closed_form(GroupModel::<f64>::abelian_box(2).unwrap());
        assert!((box2.dist(&[0.0, 0.0], &[3.0, 4.0]) - 5.0).abs() < 1e-15);
        let torus = CcMetric::closed_form(GroupModel::torus(vec![1.0, 1.0]).unwrap());
        assert!((torus.dist(&[0.1, 0.1], &[0.9, 0.9]) - (0.08f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn abelian_geodesic_samples() {
        let model = GroupModel::<f64>::abelian_box(2).unwrap();
        let g = cc_geodesic(&model, &GroupPoint::from_f64(&[0.0, 0.0]), &GroupPoint::from_f64(&[1.0, 0.0]), 3)
            .unwrap();
        let pts: Vec<Vec<f64>> = g.points.iter().map(|p| p.coords.clone()).collect();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]]);
        assert!((g.length - 1.0).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_straight_midpoint() {
        let model = GroupModel::<f64>::heisenberg();
        let g = cc_geodesic(&model, &model.identity(), &GroupPoint::from_f64(&[3.0, 4.0, 0.0]), 3).unwrap();
        assert_eq!(g.points[1].coords, vec![1.5, 2.0, 0.0]);
    }

    #[test]
    fn geodesic_hits_endpoint_and_is_horizontal() {
        let m = hm();
        let a = [0.3, -0.2, 0.1];
        let b = [-0.5, 0.9, 0.8];
        let end = m.geodesic_point(&a, &b, 1.0);
        for k in 0..3 {
            assert!((end[k] - b[k]).abs() < 1e-9, "{:?}", end);
        }
        // Each short step is nearly horizontal: z-increment matches the
        // symplectic area of the xy-step.
        let n = 2000;
        for k in 0..n {
            let p = m.geodesic_point(&a, &b, k as f64 / n as f64);
            let q = m.geodesic_point(&a, &b, (k + 1) as f64 / n as f64);
            let dz = q[2] - p[2] - 0.5 * (p[0] * q[1] - p[1] * q[0]);
            assert!(dz.abs() < 1e-6);
        }
    }

    #[test]
    fn unit_ball_volume_matches_cell_count() {
        // Count cells of a fine grid whose centre lies in B_1(o).
        let m = hm();
        let n = 80;
        let (lo_xy, hi_xy, lo_z, hi_z) = (-1.0, 1.0, -0.5, 0.5);
        let (hx, hz) = ((hi_xy - lo_xy) / n as f64, (hi_z - lo_z) / n as f64);
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = [
                        lo_xy + (i as f64 + 0.5) * hx,
                        lo_xy + (j as f64 + 0.5) * hx,
                        lo_z + (k as f64 + 0.5) * hz,
                    ];
                    if m.dist(&[0.0, 0.0, 0.0], &p) <= 1.0 {
                        count += 1;
                    }
                }
            }
        }
        let est = count as f64 * hx * hx * hz;
        let exact = heisenberg_unit_ball_volume();
        assert!((est - exact).abs() / exact < 1e-2, "{est} vs {exact}");
    }

    #[test]
    fn euclidean_ball_volumes() {
        let v1: f64 = euclidean_ball(1, 2.0);
        let v2: f64 = euclidean_ball(2, 1.0);
        let v3: f64 = euclidean_ball(3, 1.0);
        assert!((v1 - 4.0).abs() < 1e-12);
        assert!((v2 - std::f64::consts::PI).abs() < 1e-12);
        assert!((v3 - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    fn pt() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(-1.0f64..1.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn left_invariance(z in pt(), a in pt(), b in pt()) {
            let m = hm();
            let g = &m.model;
            let za = g.multiply_unchecked(&z, &a).coords;
            let zb = g.multiply_unchecked(&z, &b).coords;
            prop_assert!((m.dist(&za, &zb) - m.dist(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn symmetry_and_triangle(a in pt(), b in pt(), c in pt()) {
            let m = hm();
            let ab = m.dist(&a, &b);
            prop_assert!((ab - m.dist(&b, &a)).abs() < 1e-9);
            prop_assert!(ab <= m.dist(&a, &c) + m.dist(&c, &b) + 1e-9);
        }

        #[test]
        fn homogeneity(a in pt(), b in pt(), lambda in 0.1f64..3.0) {
            let m = hm();
            let g = &m.model;
            let da = g.dilate(lambda, &GroupPoint::new(a.to_vec())).unwrap();
            let db = g.dilate(lambda, &GroupPoint::new(b.to_vec())).unwrap();
            let lhs = m.dist(&da.coords, &db.coords);
            prop_assert!((lhs - lambda * m.dist(&a, &b)).abs() < 1e-8 * (1.0 + lhs));
        }

        #[test]
        fn balls_at_identity_are_symmetric(x in pt()) {
            let m = hm();
            let o = [0.0; 3];
            prop_assert!((m.dist(&o, &x) - m.dist(&o, &[-x[0], -x[1], -x[2]])).abs() < 1e-10);
        }

        #[test]
        fn polyline_length_tracks_distance(a in pt(), b in pt()) {
            let model = GroupModel::<f64>::heisenberg();
            let path = cc_geodesic(&model, &GroupPoint::new(a.to_vec()), &GroupPoint::new(b.to_vec()), 64).unwrap();
            let d = hm().dist(&a, &b);
            prop_assert!((path.length - d).abs() <= 0.02 * d + 1e-12);
            let sum: f64 = path.points.windows(2)
                .map(|w| segment_length(&model, &w[0].coords, &w[1].coords)).sum();
            prop_assert!((sum - path.length).abs() < 1e-9);
        }
    }
}
