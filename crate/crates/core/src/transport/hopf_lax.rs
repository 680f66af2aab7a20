use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::group::GroupPoint;
use crate::metric::CcMetric;
use crate::scalar::Real;

use super::measure::PointCloudMeasure;
use super::plan::cost_matrix;
use super::sinkhorn::{self, SinkhornConfig};

/// Function sampled on a finite point set.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<T> {
    pub base: Vec<GroupPoint<T>>,
    pub values: Vec<T>,
}

impl<T: Real> Potential<T> {
    pub fn new(base: Vec<GroupPoint<T>>, values: Vec<T>) -> Result<Self> {
        if base.len() != values.len() {
            return invalid("potential needs one value per base point");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("potential values must be finite");
        }
        Ok(Self { base, values })
    }

    pub fn constant(base: Vec<GroupPoint<T>>, c: T) -> Self {
        let values = vec![c; base.len()];
        Self { base, values }
    }

    pub fn integrate(&self, mu: &PointCloudMeasure<T>) -> Result<T> {
        if self.base != mu.points {
            return invalid("potential base differs from the measure support");
        }
        Ok(self.values.iter().zip(&mu.weights).fold(T::zero(), |a, (&v, &w)| a + v * w))
    }
}

/// `Q_s phi(x) = min_y phi(y) + d(y, x)^2 / (2s)` at the given points,
/// minimizing exactly over the base of `phi`.
pub fn hopf_lax_at<T: Real>(metric: &CcMetric<T>, phi: &Potential<T>, s: T, points: &[GroupPoint<T>]) -> Result<Potential<T>> {
    if !(s > T::zero()) {
        return invalid("Hopf-Lax time must be positive");
    }
    if phi.base.is_empty() {
        return invalid("potential has empty support");
    }
    let two_s = T::c(2.0) * s;
    let values = points
        .par_iter()
        .map(|x| {
            phi.base
                .iter()
                .zip(&phi.values)
                .map(|(y, &v)| {
                    let d = metric.dist(&y.coords, &x.coords);
                    v + d * d / two_s
                })
                .fold(T::infinity(), |a, b| a.min(b))
        })
        .collect();
    Potential::new(points.to_vec(), values)
}

/// Hopf–Lax on the potential's own base.
pub fn hopf_lax<T: Real>(metric: &CcMetric<T>, phi: &Potential<T>, s: T) -> Result<Potential<T>> {
    hopf_lax_at(metric, phi, s, &phi.base)
}

/// `int Q_1 phi dmu - int phi dnu`, with `phi` on the support of `nu`.
pub fn kantorovich_dual_value<T: Real>(
    metric: &CcMetric<T>,
    phi: &Potential<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
) -> Result<T> {
    let q = hopf_lax_at(metric, phi, T::one(), &mu.points)?;
    Ok(q.integrate(mu)? - phi.integrate(nu)?)
}

#[derive(Clone, Debug)]
pub struct DualAscent<T> {
    pub phi: Potential<T>,
    pub value: T,
    /// Dual value after each stage: Sinkhorn start, then each double
    /// c-transform sweep.
    pub history: Vec<T>,
}

/// Builds a dual potential from entropic potentials for the cost `d^2/2`,
/// then improves it with exact double c-transforms
/// `phi <- -Q_1(-Q_1 phi)` (computed over the finite supports).
pub fn kantorovich_ascent<T: Real>(
    metric: &CcMetric<T>,
    mu: &PointCloudMeasure<T>,
    nu: &PointCloudMeasure<T>,
    cfg: &SinkhornConfig,
    sweeps: usize,
) -> Result<DualAscent<T>> {
    let half: Vec<f64> = cost_matrix(metric, mu, nu, 2).into_iter().map(|c| c / 2.0).collect();
    let a: Vec<f64> = mu.weights.iter().map(|w| w.f64()).collect();
    let b: Vec<f64> = nu.weights.iter().map(|w| w.f64()).collect();
    let sol = sinkhorn::solve(&a, &b, &half, cfg)?;
    // Zero-weight atoms carry -inf potentials; they do not occur after merge
    // unless weights are exactly zero.
    let g: Vec<T> = sol.g.iter().map(|&x| T::c(if x.is_finite() { -x } else { 0.0 })).collect();
    let mut phi = Potential::new(nu.points.clone(), g)?;
    let mut value = kantorovich_dual_value(metric, &phi, mu, nu)?;
    let mut history = vec![value];
    let n = nu.len();
    for _ in 0..sweeps {
        // psi = Q_1 phi on mu, then phi(y) = max_x psi(x) - c(x, y).
        let psi = hopf_lax_at(metric, &phi, T::one(), &mu.points)?;
        let next: Vec<T> = (0..n)
            .map(|j| {
                (0..mu.len())
                    .map(|i| psi.values[i] - T::c(half[i * n + j]))
                    .fold(T::neg_infinity(), |a, b| a.max(b))
            })
            .collect();
        let cand = Potential::new(nu.points.clone(), next)?;
        let v = kantorovich_dual_value(metric, &cand, mu, nu)?;
        history.push(v);
        if v >= value {
            let done = v - value <= T::c(1e-15) * value.abs().max(T::one());
            value = v;
            phi = cand;
            if done {
                break;
            }
        } else {
            break;
        }
    }
    Ok(DualAscent { phi, value, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;
    use crate::transport::plan::{w2_exact, TransportConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line() -> CcMetric<f64> {
        CcMetric::closed_form(GroupModel::abelian_box(1).unwrap())
    }

    fn grid(h: f64, half: f64) -> Vec<GroupPoint<f64>> {
        let n = (2.0 * half / h).round() as i64;
        (0..=n).map(|k| GroupPoint::from_f64(&[-half + k as f64 * h])).collect()
    }

    #[test]
    fn constants_are_fixed() {
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let base: Vec<_> = (0..6).map(|k| GroupPoint::from_f64(&[k as f64 * 0.3, 0.1, -0.2])).collect();
        let q = hopf_lax(&m, &Potential::constant(base, 1.5), 0.7).unwrap();
        assert!(q.values.iter().all(|&v| (v - 1.5).abs() < 1e-15));
        assert!(hopf_lax(&m, &q, 0.0).is_err());
    }

    #[test]
    fn non_increasing_in_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let base: Vec<_> = (0..30)
            .map(|_| GroupPoint::new((0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()))
            .collect();
        let vals = (0..30).map(|_| rng.gen::<f64>()).collect();
        let phi = Potential::new(base, vals).unwrap();
        let mut prev = phi.values.clone();
        for s in [0.1, 0.3, 1.0, 3.0] {
            let q = hopf_lax(&m, &phi, s).unwrap();
            assert!(q.values.iter().zip(&prev).all(|(a, b)| *a <= *b + 1e-15));
            prev = q.values;
        }
    }

    /// max over interior nodes of |dQ/ds + |DQ|^2/2| for phi = |x|.
    fn hj_residual(h: f64) -> f64 {
        let base = grid(h, 2.0);
        let phi = Potential::new(base.clone(), base.iter().map(|p| p[0].abs()).collect()).unwrap();
        let (s, tau) = (0.5, h);
        let q0 = hopf_lax(&line(), &phi, s).unwrap();
        let q1 = hopf_lax(&line(), &phi, s + tau).unwrap();
        let mut worst = 0.0f64;
        for k in 1..base.len() - 1 {
            let x = base[k][0];
            if x.abs() > 1.0 {
                continue;
            }
            let dt = (q1.values[k] - q0.values[k]) / tau;
            let fw = (q0.values[k + 1] - q0.values[k]) / h;
            let bw = (q0.values[k] - q0.values[k - 1]) / h;
            let slope = fw.abs().max(bw.abs());
            worst = worst.max((dt + 0.5 * slope * slope).abs());
        }
        worst
    }

    #[test]
    fn hamilton_jacobi_residual_shrinks_under_refinement() {
        let r: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| hj_residual(h)).collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
        assert!(r[2] < 0.1);
    }

    #[test]
    fn weak_duality_and_ascent_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let metric = CcMetric::closed_form(GroupModel::<f64>::abelian_box(2).unwrap());
        let cfg = TransportConfig::default();
        for _ in 0..4 {
            let cloud = |rng: &mut ChaCha8Rng| {
                let p = (0..30).map(|_| GroupPoint::new(vec![rng.gen::<f64>(), rng.gen::<f64>()])).collect();
                let w = (0..30).map(|_| rng.gen::<f64>() + 0.2).collect();
                PointCloudMeasure::normalized(p, w).unwrap()
            };
            let mu = cloud(&mut rng);
            let nu = cloud(&mut rng);
            let half_w2 = 0.5 * w2_exact(&metric, &mu, &nu, &cfg).unwrap().cost;
            let zero = Potential::constant(nu.points.clone(), 0.0);
            let v0 = kantorovich_dual_value(&metric, &zero, &mu, &nu).unwrap();
            assert!(v0 <= half_w2 + 1e-9);
            let asc = kantorovich_ascent(&metric, &mu, &nu, &cfg.sinkhorn, 5).unwrap();
            assert!(asc.value <= half_w2 + 1e-9);
            assert!((half_w2 - asc.value) / half_w2 <= 0.05, "{} vs {}", asc.value, half_w2);
            let same = kantorovich_ascent(&metric, &mu, &mu, &cfg.sinkhorn, 5).unwrap();
            assert!(same.value.abs() < 1e-6);
        }
    }
}
