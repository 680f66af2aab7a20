use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::{Boundary, DensityField, GridChart};
use crate::metric::CcMetric;
use crate::scalar::Real;

use super::measure::PointCloudMeasure;

/// Input of a convolution: a grid density (its cells act as atoms) or a cloud.
#[derive(Clone, Copy, Debug)]
pub enum MeasureRef<'a, T> {
    Density(&'a DensityField<T>),
    Cloud(&'a PointCloudMeasure<T>),
}

fn atoms<T: Real>(mu: MeasureRef<'_, T>) -> Vec<(GroupPoint<T>, f64)> {
    match mu {
        MeasureRef::Cloud(c) => c.points.iter().cloned().zip(c.weights.iter().map(|w| w.f64())).collect(),
        MeasureRef::Density(d) => {
            let vol = d.chart.cell_volume();
            d.values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > T::zero())
                .map(|(k, &v)| (d.chart.node(k), (v * vol).f64()))
                .collect()
        }
    }
}

/// Half-extent per axis of the set `B_r(o) . y`.
fn reach<T: Real>(family: GroupFamily, r: f64, y: &[T]) -> Vec<f64> {
    match family {
        GroupFamily::Heisenberg1 => {
            let h = (y[0].f64().powi(2) + y[1].f64().powi(2)).sqrt();
            vec![r, r, r * r / 4.0 + r * h / 2.0]
        }
        _ => vec![r; y.len()],
    }
}

/// Nodes `x` of the chart with `d(o, x y^{-1}) <= r`.
fn ball_nodes<T: Real>(metric: &CcMetric<T>, chart: &GridChart<T>, r: T, y: &GroupPoint<T>) -> Vec<usize> {
    let model = &metric.model;
    let n = chart.ndim();
    let ext = reach(model.family(), r.f64(), &y.coords);
    let periodic = chart.boundary() == Boundary::Periodic;
    let mut ranges = Vec::with_capacity(n);
    for a in 0..n {
        let h = chart.spacing()[a].f64();
        let lo = chart.lo()[a].f64();
        // node i sits at lo + (i + 1/2) h
        let first = ((y.coords[a].f64() - ext[a] - lo) / h - 0.5).ceil() as i64;
        let last = ((y.coords[a].f64() + ext[a] - lo) / h - 0.5).floor() as i64;
        let (first, last) = if periodic {
            (first, last.min(first + chart.shape()[a] as i64 - 1))
        } else {
            (first.max(0), last.min(chart.shape()[a] as i64 - 1))
        };
        if first > last {
            return Vec::new();
        }
        ranges.push((first, last));
    }
    let origin = model.identity();
    let y_inv: Vec<T> = y.coords.iter().map(|&c| -c).collect();
    let mut out = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut x = vec![T::zero(); n];
    loop {
        let mut flat = 0;
        for a in 0..n {
            let s = chart.shape()[a] as i64;
            let i = cur[a].rem_euclid(s);
            // unwrapped on the torus; the flat index wraps
            x[a] = chart.lo()[a] + (T::c(cur[a] as f64) + T::c(0.5)) * chart.spacing()[a];
            flat += i as usize * chart.strides()[a];
        }
        let rel = model.multiply_unchecked(&x, &y_inv);
        if metric.dist(&origin.coords, &rel.coords) <= r {
            out.push(flat);
        }
        let mut a = n;
        loop {
            if a == 0 {
                out.sort_unstable();
                out.dedup();
                return out;
            }
            a -= 1;
            cur[a] += 1;
            if cur[a] <= ranges[a].1 {
                break;
            }
            cur[a] = ranges[a].0;
        }
    }
}

/// Left convolution `(rho_r * mu)(x) = int rho_r(x y^{-1}) dmu(y)` on the
/// chart, with the normalized ball indicator `rho_r`. Each atom spreads its
/// mass evenly over the nodes of its translated ball, so mass is kept
/// exactly for atoms whose ball meets the chart.
pub fn convolve_measure<T: Real>(
    metric: &CcMetric<T>,
    chart: Arc<GridChart<T>>,
    r: T,
    mu: MeasureRef<'_, T>,
) -> Result<DensityField<T>> {
    if chart.model() != &metric.model {
        return invalid("chart and metric use different group models");
    }
    if !(r >= T::c(2.0) * chart.min_spacing()) {
        return invalid(format!(
            "ball radius {} is below two grid spacings ({})",
            r,
            T::c(2.0) * chart.min_spacing()
        ));
    }
    if let MeasureRef::Density(d) = mu {
        chart.ensure_same(&d.chart)?;
    }
    let atoms = atoms(mu);
    let vol = chart.cell_volume().f64();
    let mut values = vec![0.0f64; chart.len()];
    if metric.model.family() == GroupFamily::Heisenberg1 {
        // The ball is thin in z (height ~ r^2), so node counting over a
        // translated ball is biased; push a fine ball quadrature forward
        // and deposit in the nearest cell instead.
        let origin = metric.model.identity();
        let ext = reach(metric.model.family(), r.f64(), &origin.coords);
        let counts: Vec<usize> = (0..3)
            .map(|a| ((4.0 * ext[a] / chart.spacing()[a].f64()).ceil() as usize).max(4))
            .collect();
        let ball = ball_lattice(metric, r, &counts)?;
        let k = ball.len() as f64;
        for block in atoms.chunks(1024) {
            let lists: Vec<Vec<usize>> = block
                .par_iter()
                .map(|(y, _)| {
                    ball.iter()
                        .filter_map(|xi| {
                            let p = metric.model.multiply_unchecked(&xi.coords, &y.coords);
                            chart.nearest_index(&p).ok()
                        })
                        .collect()
                })
                .collect();
            for ((_, m), nodes) in block.iter().zip(&lists) {
                let share = m / (k * vol);
                for &n in nodes {
                    values[n] += share;
                }
            }
        }
    } else {
        for block in atoms.chunks(4096) {
            let lists: Vec<Vec<usize>> = block.par_iter().map(|(y, _)| ball_nodes(metric, &chart, r, y)).collect();
            for ((_, m), nodes) in block.iter().zip(&lists) {
                if nodes.is_empty() {
                    continue;
                }
                let share = m / (nodes.len() as f64 * vol);
                for &k in nodes {
                    values[k] += share;
                }
            }
        }
    }
    let d = DensityField::new(chart, values.into_iter().map(T::c).collect())?;
    d.normalized()
}

/// Midpoint lattice of `per_axis` points per axis over a box containing
/// `B_r(o)`, restricted to the ball.
pub fn ball_quadrature<T: Real>(metric: &CcMetric<T>, r: T, per_axis: usize) -> Result<Vec<GroupPoint<T>>> {
    ball_lattice(metric, r, &vec![per_axis; metric.model.dimension()])
}

fn ball_lattice<T: Real>(metric: &CcMetric<T>, r: T, counts: &[usize]) -> Result<Vec<GroupPoint<T>>> {
    if !(r > T::zero()) || counts.iter().any(|&c| c == 0) {
        return invalid("ball quadrature needs r > 0 and at least one point per axis");
    }
    let n = metric.model.dimension();
    let origin = metric.model.identity();
    let ext = reach(metric.model.family(), r.f64(), &origin.coords);
    let total: usize = counts.iter().product();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    for k in 0..total {
        let mut rem = k;
        for a in (0..n).rev() {
            idx[a] = rem % counts[a];
            rem /= counts[a];
        }
        let coords: Vec<T> = (0..n)
            .map(|a| T::c(-ext[a] + (idx[a] as f64 + 0.5) * 2.0 * ext[a] / counts[a] as f64))
            .collect();
        if metric.dist(&origin.coords, &coords) <= r {
            out.push(metric.model.reduce(GroupPoint::new(coords)));
        }
    }
    if out.is_empty() {
        return invalid("ball quadrature lattice missed the ball");
    }
    Ok(out)
}

/// Cloud version: atoms `xi_k . y_j` with weight `w_j / K`. Coupling
/// `(xi_k y, xi_k y')` keeps every pair distance by left invariance.
pub fn convolve_cloud<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    ball: &[GroupPoint<T>],
) -> Result<PointCloudMeasure<T>> {
    if ball.is_empty() {
        return invalid("empty ball quadrature");
    }
    let k = T::of_usize(ball.len());
    let mut points = Vec::with_capacity(ball.len() * mu.len());
    let mut weights = Vec::with_capacity(ball.len() * mu.len());
    for (y, &w) in mu.points.iter().zip(&mu.weights) {
        for xi in ball {
            points.push(metric.model.multiply(xi, y)?);
            weights.push(w / k);
        }
    }
    PointCloudMeasure::normalized(points, weights)
}

/// Constant extension by `j` steps at both ends, left convolution by
/// `rho_r`, then a centred moving average of width `2j + 1` in time.
pub fn regularize_curve<T: Real>(
    metric: &CcMetric<T>,
    chart: Arc<GridChart<T>>,
    curve: &[PointCloudMeasure<T>],
    r: T,
    j: usize,
) -> Result<Vec<DensityField<T>>> {
    if curve.is_empty() {
        return invalid("curve has no samples");
    }
    for mu in curve {
        for p in &mu.points {
            if !chart.contains(&p.coords) {
                return invalid(format!("curve atom {:?} lies outside the chart", p.to_f64()));
            }
        }
    }
    let smoothed: Vec<DensityField<T>> = curve
        .iter()
        .map(|mu| convolve_measure(metric, chart.clone(), r, MeasureRef::Cloud(mu)))
        .collect::<Result<_>>()?;
    let n = curve.len();
    let at = |k: i64| &smoothed[k.clamp(0, n as i64 - 1) as usize];
    let width = T::of_usize(2 * j + 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n as i64 {
        let mut acc = vec![T::zero(); chart.len()];
        for k in i - j as i64..=i + j as i64 {
            for (a, &v) in acc.iter_mut().zip(&at(k).values) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= width);
        out.push(DensityField::new(chart.clone(), acc)?.normalized()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;
    use crate::transport::measure::density_to_cloud;
    use crate::transport::plan::{w2_densities, w2_exact, TransportConfig};

    fn peak_of(d: &DensityField<f64>) -> f64 {
        d.values.iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn delta_becomes_normalized_ball_indicator() {
        let model = GroupModel::<f64>::abelian_box(2).unwrap();
        let metric = CcMetric::closed_form(model.clone());
        let chart = Arc::new(GridChart::centered_cube(model, 1.0, 40).unwrap());
        let o = PointCloudMeasure::dirac(GroupPoint::from_f64(&[0.0, 0.0]));
        let out = convolve_measure(&metric, chart.clone(), 0.3, MeasureRef::Cloud(&o)).unwrap();
        assert!((out.mass - 1.0).abs() < 1e-12);
        let peak = peak_of(&out);
        for (k, &v) in out.values.iter().enumerate() {
            let p = chart.node(k);
            let inside = (p[0] * p[0] + p[1] * p[1]).sqrt() <= 0.3;
            assert!(if inside { (v - peak).abs() < 1e-12 } else { v == 0.0 });
        }
        assert!(convolve_measure(&metric, chart, 0.04, MeasureRef::Cloud(&o)).is_err());
    }

    #[test]
    fn heisenberg_mass_and_grid_input() {
        let model = GroupModel::<f64>::heisenberg();
        let metric = CcMetric::closed_form(model.clone());
        let chart = Arc::new(GridChart::centered_cube(model, 2.0, 24).unwrap());
        let mu = DensityField::normalized_from_fn(chart.clone(), |p| {
            (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) * 3.0).exp()
        })
        .unwrap();
        let out = convolve_measure(&metric, chart, 0.5, MeasureRef::Density(&mu)).unwrap();
        assert!((out.mass - 1.0).abs() < 1e-6);
        assert!(peak_of(&out) < peak_of(&mu));
    }

    #[test]
    fn heisenberg_cloud_convolution_does_not_increase_w2() {
        let model = GroupModel::<f64>::heisenberg();
        let metric = CcMetric::closed_form(model);
        let ball = ball_quadrature(&metric, 0.4, 5).unwrap();
        assert!(ball.len() > 10 && ball.len() <= 125);
        let cfg = TransportConfig::default();
        let pts = |shift: f64| {
            (0..3)
                .map(|k| GroupPoint::from_f64(&[k as f64 * 0.3 + shift, 0.2 - shift, 0.1 * k as f64]))
                .collect::<Vec<_>>()
        };
        let mu = PointCloudMeasure::uniform(pts(0.0)).unwrap();
        let nu = PointCloudMeasure::uniform(pts(0.5)).unwrap();
        let before = w2_exact(&metric, &mu, &nu, &cfg).unwrap().w2();
        let a = convolve_cloud(&metric, &mu, &ball).unwrap();
        let b = convolve_cloud(&metric, &nu, &ball).unwrap();
        let after = w2_exact(&metric, &a, &b, &cfg).unwrap().w2();
        assert!(after <= before + 1e-9, "{after} vs {before}");
    }

    fn line_curve(shift: f64) -> Vec<PointCloudMeasure<f64>> {
        (0..5)
            .map(|i| {
                let s = i as f64 / 4.0;
                PointCloudMeasure::uniform(vec![
                    GroupPoint::from_f64(&[-0.5 + shift * s]),
                    GroupPoint::from_f64(&[0.5 + shift * s]),
                ])
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn constant_curve_stays_constant() {
        let model = GroupModel::<f64>::abelian_box(1).unwrap();
        let metric = CcMetric::closed_form(model.clone());
        let chart = Arc::new(GridChart::centered_cube(model, 3.0, 300).unwrap());
        let c = vec![line_curve(0.0)[0].clone(); 4];
        let out = regularize_curve(&metric, chart, &c, 0.2, 1).unwrap();
        for d in &out[1..] {
            assert!(d.values.iter().zip(&out[0].values).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn endpoint_drift_decreases_with_radius() {
        let model = GroupModel::<f64>::abelian_box(1).unwrap();
        let metric = CcMetric::closed_form(model.clone());
        let chart = Arc::new(GridChart::centered_cube(model, 3.0, 600).unwrap());
        let curve = line_curve(1.0);
        let cfg = TransportConfig::default();
        let mut drift = Vec::new();
        for r in [0.4, 0.2, 0.1] {
            let out = regularize_curve(&metric, chart.clone(), &curve, r, 1).unwrap();
            let (cloud, _) = density_to_cloud(&out[0], 1e-12, usize::MAX).unwrap();
            drift.push(w2_exact(&metric, &cloud, &curve[0], &cfg).unwrap().w2());
        }
        assert!(drift[0] > drift[1] && drift[1] > drift[2], "{drift:?}");
        // sup-speed does not grow beyond discretization error
        let out = regularize_curve(&metric, chart, &curve, 0.2, 1).unwrap();
        let ds = 0.25;
        let speed = |k: usize| w2_densities(&metric, &out[k], &out[k + 1], &cfg).unwrap().0 / ds;
        let input = (0..4)
            .map(|k| w2_exact(&metric, &curve[k], &curve[k + 1], &cfg).unwrap().w2() / ds)
            .fold(0.0, f64::max);
        let output = (0..4).map(speed).fold(0.0, f64::max);
        assert!(output <= input + 0.02, "{output} vs {input}");
    }
}
