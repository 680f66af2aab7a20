use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::GroupFamily;
use crate::heat::DensityField;
use crate::metric::CcMetric;
use crate::scalar::Real;

use super::measure::{density_to_cloud, Discretization, PointCloudMeasure};
use super::sinkhorn::{self, SinkhornConfig};
use super::simplex;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportConfig {
    /// Largest support size on either side handled by the exact LP.
    pub lp_cap: usize,
    /// Cells below this mass are dropped when a grid becomes a cloud.
    pub mass_threshold: f64,
    pub sinkhorn: SinkhornConfig,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            lp_cap: 400,
            mass_threshold: 1e-12,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanMethod {
    /// Transportation simplex optimum.
    Exact,
    /// Sorted (quantile) coupling on the line, optimal for convex costs.
    Monotone,
    Sinkhorn { epsilon: f64, violation: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<T> {
    pub source: PointCloudMeasure<T>,
    pub target: PointCloudMeasure<T>,
    /// Sparse coupling `(i, j, mass)`.
    pub coupling: Vec<(usize, usize, T)>,
    /// `sum mass * d^p` for the cost exponent the plan was solved with.
    pub cost: T,
    pub method: PlanMethod,
}

impl<T: Real> TransportPlan<T> {
    pub fn w2(&self) -> T {
        self.cost.max(T::zero()).sqrt()
    }

    /// One CSV row per coupling atom: `i, j, mass`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "mass"])?;
        for &(i, j, m) in &self.coupling {
            wr.write_record(&[i.to_string(), j.to_string(), format!("{}", m.f64())])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn marginal_error(&self) -> f64 {
        let mut rows = vec![0.0; self.source.len()];
        let mut cols = vec![0.0; self.target.len()];
        for &(i, j, m) in &self.coupling {
            rows[i] += m.f64();
            cols[j] += m.f64();
        }
        let er = rows.iter().zip(&self.source.weights).map(|(r, w)| (r - w.f64()).abs());
        let ec = cols.iter().zip(&self.target.weights).map(|(c, w)| (c - w.f64()).abs());
        er.chain(ec).fold(0.0, f64::max)
    }
}

/// Row-major matrix of `d^power` between supports.
pub fn cost_matrix<T: Real>(metric: &CcMetric<T>, mu: &PointCloudMeasure<T>, nu: &PointCloudMeasure<T>, power: i32) -> Vec<f64> {
    let n = nu.len();
    let mut out = vec![0.0; mu.len() * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = metric.dist(&mu.points[i].coords, &nu.points[j].coords).f64().powi(power);
        }
    });
    out
}

fn weights<T: Real>(m: &PointCloudMeasure<T>) -> Vec<f64> {
    m.weights.iter().map(|w| w.f64()).collect()
}

fn is_line<T: Real>(metric: &CcMetric<T>) -> bool {
    metric.model.family() == GroupFamily::AbelianBox && metric.model.dimension() == 1
}

/// Quantile coupling of two measures on the line.
fn monotone_plan<T: Real>(mu: &PointCloudMeasure<T>, nu: &PointCloudMeasure<T>, power: i32) -> TransportPlan<T> {
    let mut si: Vec<usize> = (0..mu.len()).collect();
    let mut sj: Vec<usize> = (0..nu.len()).collect();
    si.sort_by(|&a, &b| mu.points[a][0].partial_cmp(&mu.points[b][0]).expect("finite"));
    sj.sort_by(|&a, &b| nu.points[a][0].partial_cmp(&nu.points[b][0]).expect("finite"));
    let mut ra: Vec<f64> = si.iter().map(|&i| mu.weights[i].f64()).collect();
    let mut rb: Vec<f64> = sj.iter().map(|&j| nu.weights[j].f64()).collect();
    let (mut a, mut b) = (0usize, 0usize);
    let mut coupling = Vec::with_capacity(mu.len() + nu.len());
    let mut cost = 0.0;
    while a < ra.len() && b < rb.len() {
        let x = ra[a].min(rb[b]);
        if x > 0.0 {
            let (i, j) = (si[a], sj[b]);
            coupling.push((i, j, T::c(x)));
            cost += x * (mu.points[i][0] - nu.points[j][0]).abs().f64().powi(power);
        }
        ra[a] -= x;
        rb[b] -= x;
        let last_a = a + 1 == ra.len();
        let last_b = b + 1 == rb.len();
        if (ra[a] <= rb[b] && !last_a) || last_b {
            if last_a {
                break;
            }
            a += 1;
        } else {
            b += 1;
        }
    }
    TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling,
        cost: T::c(cost),
        method: PlanMethod::Monotone,
    }
}

fn exact_plan<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
    power: i32,
    cfg: &TransportConfig,
) -> Result<TransportPlan<T>> {
    metric.model.check(&mu.points[0])?;
    metric.model.check(&nu.points[0])?;
    if is_line(metric) {
        return Ok(monotone_plan(mu, nu, power));
    }
    if mu.len() > cfg.lp_cap || nu.len() > cfg.lp_cap {
        return Err(Error::Capacity(format!(
            "supports {}x{} exceed the exact LP cap {}; use w2_sinkhorn",
            mu.len(),
            nu.len(),
            cfg.lp_cap
        )));
    }
    let cost = cost_matrix(metric, mu, nu, power);
    let sol = simplex::solve(&weights(mu), &weights(nu), &cost)?;
    Ok(TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling: sol.flows.iter().map(|&(i, j, x)| (i, j, T::c(x))).collect(),
        cost: T::c(sol.cost),
        method: PlanMethod::Exact,
    })
}

/// Optimal plan for the squared CC distance.
pub fn w2_exact<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
    cfg: &TransportConfig,
) -> Result<TransportPlan<T>> {
    exact_plan(metric, mu, nu, 2, cfg)
}

/// `W_1` by the exact LP with cost `d`. The LP optimum equals the
/// Kantorovich–Rubinstein dual value by strong duality.
pub fn w1_dual<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
    cfg: &TransportConfig,
) -> Result<T> {
    Ok(exact_plan(metric, mu, nu, 1, cfg)?.cost)
}

pub fn w2_sinkhorn<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
    cfg: &SinkhornConfig,
) -> Result<TransportPlan<T>> {
    metric.model.check(&mu.points[0])?;
    metric.model.check(&nu.points[0])?;
    let cost = cost_matrix(metric, mu, nu, 2);
    let sol = sinkhorn::solve(&weights(mu), &weights(nu), &cost, cfg)?;
    let n = nu.len();
    let coupling = sol
        .plan
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (k / n, k % n, T::c(p)))
        .collect();
    Ok(TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        coupling,
        cost: T::c(sol.cost),
        method: PlanMethod::Sinkhorn {
            epsilon: sol.epsilon,
            violation: sol.violation,
        },
    })
}

/// `W_2` between grid densities: exact on the full grid for the line,
/// otherwise through thresholded (and if needed adaptively coarsened) clouds.
pub fn w2_densities<T: Real>(
    metric: &CcMetric<T>,
    mu: &DensityField<T>,
    nu: &DensityField<T>,
    cfg: &TransportConfig,
) -> Result<(T, Discretization)> {
    let cap = if is_line(metric) { usize::MAX } else { cfg.lp_cap };
    let (a, da) = density_to_cloud(mu, cfg.mass_threshold, cap)?;
    let (b, db) = density_to_cloud(nu, cfg.mass_threshold, cap)?;
    let plan = w2_exact(metric, &a, &b, cfg)?;
    let info = Discretization {
        block: da.block.max(db.block),
        dropped_mass: da.dropped_mass.max(db.dropped_mass),
        atoms: da.atoms.max(db.atoms),
    };
    Ok((plan.w2(), info))
}

/// Atom-wise geodesic interpolation of a plan; `s = 0, 1` return the marginals.
pub fn displacement_interpolate<T: Real>(metric: &CcMetric<T>, plan: &TransportPlan<T>, s: T) -> Result<PointCloudMeasure<T>> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::InvalidInput("interpolation parameter must lie in [0, 1]".into()));
    }
    if s == T::zero() {
        return Ok(plan.source.clone());
    }
    if s == T::one() {
        return Ok(plan.target.clone());
    }
    let mut points = Vec::with_capacity(plan.coupling.len());
    let mut w = Vec::with_capacity(plan.coupling.len());
    for &(i, j, m) in &plan.coupling {
        points.push(metric.geodesic_point(&plan.source.points[i].coords, &plan.target.points[j].coords, s));
        w.push(m);
    }
    PointCloudMeasure::normalized(points, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupModel, GroupPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[&[f64]]) -> Vec<GroupPoint<f64>> {
        v.iter().map(|p| GroupPoint::from_f64(p)).collect()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> PointCloudMeasure<f64> {
        let p = (0..n)
            .map(|_| GroupPoint::new((0..dim).map(|_| (rng.gen::<f64>() - 0.5) * scale).collect()))
            .collect();
        let w = (0..n).map(|_| rng.gen::<f64>() + 0.1).collect();
        PointCloudMeasure::normalized(p, w).unwrap()
    }

    fn plane() -> CcMetric<f64> {
        CcMetric::closed_form(GroupModel::abelian_box(2).unwrap())
    }

    #[test]
    fn shift_on_the_line() {
        let line = CcMetric::closed_form(GroupModel::<f64>::abelian_box(1).unwrap());
        let mu = PointCloudMeasure::uniform(pts(&[&[0.0], &[1.0]])).unwrap();
        let nu = PointCloudMeasure::uniform(pts(&[&[2.0], &[3.0]])).unwrap();
        let cfg = TransportConfig::default();
        assert!((w2_exact(&line, &mu, &nu, &cfg).unwrap().cost - 4.0).abs() < 1e-12);
        assert!((w1_dual(&line, &mu, &nu, &cfg).unwrap() - 2.0).abs() < 1e-12);
        // the simplex agrees with the monotone coupling in the plane embedding
        let mu2 = PointCloudMeasure::uniform(pts(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        let nu2 = PointCloudMeasure::uniform(pts(&[&[2.0, 0.0], &[3.0, 0.0]])).unwrap();
        assert!((w2_exact(&plane(), &mu2, &nu2, &cfg).unwrap().cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn diracs_and_identity() {
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let a = PointCloudMeasure::dirac(GroupPoint::from_f64(&[0.0, 0.0, 0.0]));
        let b = PointCloudMeasure::dirac(GroupPoint::from_f64(&[0.3, 0.4, 0.0]));
        let cfg = TransportConfig::default();
        assert!((w2_exact(&m, &a, &b, &cfg).unwrap().w2() - 0.5).abs() < 1e-12);
        assert!((w1_dual(&m, &a, &b, &cfg).unwrap() - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = random_cloud(&mut rng, 20, 3, 1.0);
        assert!(w2_exact(&m, &mu, &mu, &cfg).unwrap().cost.abs() < 1e-12);
        let s = w2_sinkhorn(&m, &a, &b, &cfg.sinkhorn).unwrap();
        assert!((s.cost - 0.25).abs() < 1e-6);
    }

    #[test]
    fn monotone_matches_simplex_on_random_line_instances() {
        let line = CcMetric::closed_form(GroupModel::<f64>::abelian_box(1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = TransportConfig::default();
        for _ in 0..10 {
            let mu = random_cloud(&mut rng, 15, 1, 2.0);
            let nu = random_cloud(&mut rng, 11, 1, 2.0);
            let mono = w2_exact(&line, &mu, &nu, &cfg).unwrap();
            assert!(mono.marginal_error() < 1e-12);
            let cost = cost_matrix(&line, &mu, &nu, 2);
            let lp = simplex::solve(&weights(&mu), &weights(&nu), &cost).unwrap();
            assert!((mono.cost - lp.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_error_names_sinkhorn() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = random_cloud(&mut rng, 12, 2, 1.0);
        let cfg = TransportConfig {
            lp_cap: 10,
            ..TransportConfig::default()
        };
        match w2_exact(&plane(), &mu, &mu, &cfg) {
            Err(Error::Capacity(msg)) => assert!(msg.contains("w2_sinkhorn")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sinkhorn_agrees_with_exact_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = TransportConfig::default();
        for _ in 0..3 {
            let mu = random_cloud(&mut rng, 50, 2, 1.0);
            let nu = random_cloud(&mut rng, 50, 2, 1.0);
            let exact = w2_exact(&plane(), &mu, &nu, &cfg).unwrap().cost;
            let s = w2_sinkhorn(&plane(), &mu, &nu, &cfg.sinkhorn).unwrap();
            assert!(s.marginal_error() <= 1e-7);
            assert!((s.cost - exact) / exact <= 1e-2, "{} vs {}", s.cost, exact);
            let back = w2_sinkhorn(&plane(), &nu, &mu, &cfg.sinkhorn).unwrap();
            assert!((back.cost - s.cost).abs() < 1e-8);
        }
    }

    #[test]
    fn triangle_symmetry_and_w1_below_w2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let cfg = TransportConfig::default();
        for _ in 0..5 {
            let a = random_cloud(&mut rng, 8, 3, 2.0);
            let b = random_cloud(&mut rng, 9, 3, 2.0);
            let c = random_cloud(&mut rng, 7, 3, 2.0);
            let ab = w2_exact(&m, &a, &b, &cfg).unwrap().w2();
            let ba = w2_exact(&m, &b, &a, &cfg).unwrap().w2();
            let ac = w2_exact(&m, &a, &c, &cfg).unwrap().w2();
            let cb = w2_exact(&m, &c, &b, &cfg).unwrap().w2();
            assert!((ab - ba).abs() < 1e-10);
            assert!(ab <= ac + cb + 1e-10);
            assert!(w1_dual(&m, &a, &b, &cfg).unwrap() <= ab + 1e-10);
        }
    }

    #[test]
    fn left_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let cfg = TransportConfig::default();
        let a = random_cloud(&mut rng, 10, 3, 2.0);
        let b = random_cloud(&mut rng, 10, 3, 2.0);
        let x = GroupPoint::from_f64(&[0.7, -1.1, 0.4]);
        let tr = |p: &GroupPoint<f64>| m.model.multiply(&x, p).unwrap();
        let before = w2_exact(&m, &a, &b, &cfg).unwrap().w2();
        let after = w2_exact(&m, &a.pushforward(tr), &b.pushforward(tr), &cfg).unwrap().w2();
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn displacement_interpolation() {
        let cfg = TransportConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mu = random_cloud(&mut rng, 12, 2, 1.0);
        let nu = random_cloud(&mut rng, 12, 2, 1.0);
        let plan = w2_exact(&plane(), &mu, &nu, &cfg).unwrap();
        assert_eq!(displacement_interpolate(&plane(), &plan, 0.0).unwrap(), mu);
        assert_eq!(displacement_interpolate(&plane(), &plan, 1.0).unwrap(), nu);
        for s in [0.25, 0.5, 0.8] {
            let ms = displacement_interpolate(&plane(), &plan, s).unwrap();
            let d = w2_exact(&plane(), &mu, &ms, &cfg).unwrap().w2();
            assert!((d - s * plan.w2()).abs() < 1e-9);
        }
        let h = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let a = PointCloudMeasure::dirac(GroupPoint::from_f64(&[0.0, 0.0, 0.0]));
        let b = PointCloudMeasure::dirac(GroupPoint::from_f64(&[1.0, 0.0, 0.3]));
        let p = w2_exact(&h, &a, &b, &cfg).unwrap();
        let mid = displacement_interpolate(&h, &p, 0.5).unwrap();
        let g = h.geodesic_point(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.3], 0.5);
        assert_eq!(mid.points, vec![g]);
    }
}
