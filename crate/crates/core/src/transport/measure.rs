use std::io::Write;

use crate::error::{invalid, Result};
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::DensityField;
use crate::scalar::Real;

/// Probability measure on finitely many points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudMeasure<T> {
    pub points: Vec<GroupPoint<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> PointCloudMeasure<T> {
    /// Validates weights (nonnegative, summing to one within 1e-10) and
    /// merges coincident points.
    pub fn new(points: Vec<GroupPoint<T>>, weights: Vec<T>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return invalid("a point cloud needs one weight per point and at least one point");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return invalid("point weights must be finite and nonnegative");
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if (total.f64() - 1.0).abs() > 1e-10 {
            return invalid(format!("point weights sum to {total}, expected 1"));
        }
        Ok(Self::merged(points, weights))
    }

    /// Rescales nonnegative weights to sum to one, then validates.
    pub fn normalized(points: Vec<GroupPoint<T>>, weights: Vec<T>) -> Result<Self> {
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if !(total > T::zero()) {
            return invalid("point weights have zero total");
        }
        Self::new(points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(p: GroupPoint<T>) -> Self {
        Self {
            points: vec![p],
            weights: vec![T::one()],
        }
    }

    pub fn uniform(points: Vec<GroupPoint<T>>) -> Result<Self> {
        let n = points.len();
        Self::normalized(points, vec![T::one(); n])
    }

    fn merged(points: Vec<GroupPoint<T>>, weights: Vec<T>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let key = |p: &GroupPoint<T>| -> Vec<u64> { p.coords.iter().map(|c| c.f64().to_bits()).collect() };
        order.sort_by_key(|&i| key(&points[i]));
        let mut out_p: Vec<GroupPoint<T>> = Vec::with_capacity(points.len());
        let mut out_w: Vec<T> = Vec::with_capacity(points.len());
        let mut last: Option<Vec<u64>> = None;
        for i in order {
            let k = key(&points[i]);
            if last.as_ref() == Some(&k) {
                *out_w.last_mut().expect("entry") += weights[i];
            } else {
                out_p.push(points[i].clone());
                out_w.push(weights[i]);
                last = Some(k);
            }
        }
        Self {
            points: out_p,
            weights: out_w,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Image under a point map.
    pub fn pushforward(&self, f: impl Fn(&GroupPoint<T>) -> GroupPoint<T>) -> Self {
        let pts = self.points.iter().map(f).collect();
        Self::merged(pts, self.weights.clone())
    }

    /// One CSV row per atom: coordinates then weight.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.points.first().map(|p| p.dim()).unwrap_or(0);
        let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        wr.write_record(&header)?;
        for (p, wgt) in self.points.iter().zip(&self.weights) {
            let mut rec: Vec<String> = p.coords.iter().map(|c| format!("{}", c.f64())).collect();
            rec.push(format!("{}", wgt.f64()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// How a grid density was turned into a point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    /// Cells per block edge of a uniform coarsening (1 = cell centres, 0 =
    /// adaptive splitting).
    pub block: usize,
    /// Mass dropped by the threshold, before renormalization.
    pub dropped_mass: f64,
    pub atoms: usize,
}

/// Cell centres with mass above `threshold`, merged in cubic blocks of
/// `block` cells per edge (at the mass-weighted block centroid).
pub fn density_to_cloud_blocked<T: Real>(
    mu: &DensityField<T>,
    threshold: f64,
    block: usize,
) -> Result<(PointCloudMeasure<T>, Discretization)> {
    let c = &mu.chart;
    let n = c.ndim();
    let vol = c.cell_volume();
    let block = block.max(1);
    let bshape: Vec<usize> = c.shape().iter().map(|&s| s.div_ceil(block)).collect();
    let nb: usize = bshape.iter().product();
    let mut mass = vec![0.0f64; nb];
    let mut moments = vec![0.0f64; nb * n];
    let mut idx = vec![0usize; n];
    let mut p = vec![T::zero(); n];
    let mut dropped = 0.0;
    let mut total = 0.0;
    for (k, &f) in mu.values.iter().enumerate() {
        let m = (f * vol).f64();
        if !(m > threshold) {
            dropped += m.max(0.0);
            continue;
        }
        total += m;
        c.multi_index(k, &mut idx);
        c.node_into(k, &mut p);
        let mut b = 0;
        for a in 0..n {
            b = b * bshape[a] + idx[a] / block;
        }
        mass[b] += m;
        for a in 0..n {
            moments[b * n + a] += m * p[a].f64();
        }
    }
    if !(total > 0.0) {
        return invalid("density has no mass above the threshold");
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for b in 0..nb {
        if mass[b] > 0.0 {
            let coords = (0..n).map(|a| T::c(moments[b * n + a] / mass[b])).collect();
            points.push(GroupPoint::new(coords));
            weights.push(T::c(mass[b] / total));
        }
    }
    let cloud = PointCloudMeasure::normalized(points, weights)?;
    let atoms = cloud.len();
    Ok((
        cloud,
        Discretization {
            block,
            dropped_mass: dropped,
            atoms,
        },
    ))
}

struct Cluster {
    cells: Vec<(usize, f64)>,
    spread: f64,
    axis: usize,
}

/// Spread of a cluster along each axis: mass-weighted squared deviation,
/// or `4π|δ|` along the Heisenberg centre, where the distance behaves like
/// the square root of the coordinate.
fn cluster<T: Real>(coords: &[f64], n: usize, vertical: Option<usize>, cells: Vec<(usize, f64)>) -> Cluster {
    let m: f64 = cells.iter().map(|c| c.1).sum();
    let mut mean = vec![0.0; n];
    for &(k, w) in &cells {
        for a in 0..n {
            mean[a] += w * coords[k * n + a];
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut spread = vec![0.0; n];
    for &(k, w) in &cells {
        for a in 0..n {
            let d = coords[k * n + a] - mean[a];
            spread[a] += w * if Some(a) == vertical { 4.0 * std::f64::consts::PI * d.abs() } else { d * d };
        }
    }
    let axis = (0..n).fold(0, |b, a| if spread[a] > spread[b] { a } else { b });
    Cluster {
        spread: spread.iter().sum(),
        axis,
        cells,
    }
}

/// Adaptive coarsening: starting from all cells above `threshold`, split
/// the cluster with the largest spread at the mass median of its widest
/// axis until `cap` clusters exist, then place one atom per cluster at the
/// mass-weighted centroid.
pub fn density_to_cloud<T: Real>(
    mu: &DensityField<T>,
    threshold: f64,
    cap: usize,
) -> Result<(PointCloudMeasure<T>, Discretization)> {
    let c = &mu.chart;
    let n = c.ndim();
    let vol = c.cell_volume();
    let vertical = (c.model().family() == GroupFamily::Heisenberg1).then_some(2);
    let mut coords = vec![0.0f64; c.len() * n];
    let mut p = vec![T::zero(); n];
    let mut cells = Vec::new();
    let mut dropped = 0.0;
    for (k, &f) in mu.values.iter().enumerate() {
        let m = (f * vol).f64();
        if !(m > threshold) {
            dropped += m.max(0.0);
            continue;
        }
        c.node_into(k, &mut p);
        for a in 0..n {
            coords[k * n + a] = p[a].f64();
        }
        cells.push((k, m));
    }
    if cells.is_empty() {
        return invalid("density has no mass above the threshold");
    }
    let cap = cap.max(1);
    if cells.len() <= cap {
        return density_to_cloud_blocked(mu, threshold, 1);
    }
    let mut done = Vec::new();
    let mut open = vec![cluster::<T>(&coords, n, vertical, cells)];
    while open.len() + done.len() < cap {
        let Some(i) = (0..open.len()).max_by(|&a, &b| open[a].spread.total_cmp(&open[b].spread)) else {
            break;
        };
        let mut cl = open.swap_remove(i);
        if cl.cells.len() < 2 || !(cl.spread > 0.0) {
            done.push(cl);
            continue;
        }
        let a = cl.axis;
        cl.cells.sort_by(|x, y| coords[x.0 * n + a].total_cmp(&coords[y.0 * n + a]).then(x.0.cmp(&y.0)));
        let half: f64 = 0.5 * cl.cells.iter().map(|c| c.1).sum::<f64>();
        let mut acc = 0.0;
        let mut cut = 1;
        for (j, c) in cl.cells.iter().enumerate() {
            acc += c.1;
            if acc >= half {
                cut = j + 1;
                break;
            }
        }
        // never cut between cells sharing the coordinate
        let key = coords[cl.cells[cut.min(cl.cells.len() - 1) - 1].0 * n + a];
        while cut < cl.cells.len() && coords[cl.cells[cut].0 * n + a] == key {
            cut += 1;
        }
        if cut == cl.cells.len() {
            let first = coords[cl.cells[0].0 * n + a];
            cut = cl.cells.iter().position(|c| coords[c.0 * n + a] != first).unwrap_or(cl.cells.len());
        }
        if cut == cl.cells.len() {
            done.push(cl);
            continue;
        }
        let right = cl.cells.split_off(cut);
        open.push(cluster::<T>(&coords, n, vertical, cl.cells));
        open.push(cluster::<T>(&coords, n, vertical, right));
    }
    done.extend(open);
    // cluster order is canonical: by smallest cell index
    let mut atoms: Vec<(usize, Vec<f64>, f64)> = done
        .iter()
        .map(|cl| {
            let m: f64 = cl.cells.iter().map(|c| c.1).sum();
            let mut x = vec![0.0; n];
            for &(k, w) in &cl.cells {
                for a in 0..n {
                    x[a] += w * coords[k * n + a];
                }
            }
            let first = cl.cells.iter().map(|c| c.0).min().unwrap_or(0);
            (first, x.into_iter().map(|v| v / m).collect(), m)
        })
        .collect();
    atoms.sort_by_key(|a| a.0);
    let total: f64 = atoms.iter().map(|a| a.2).sum();
    let points = atoms.iter().map(|a| GroupPoint::new(a.1.iter().map(|&v| T::c(v)).collect())).collect();
    let weights = atoms.iter().map(|a| T::c(a.2 / total)).collect();
    let cloud = PointCloudMeasure::normalized(points, weights)?;
    let atoms = cloud.len();
    Ok((
        cloud,
        Discretization {
            block: 0,
            dropped_mass: dropped,
            atoms,
        },
    ))
}
