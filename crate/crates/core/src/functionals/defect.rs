use crate::error::{invalid, Result};
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::{DensityField, Frame, HeatOperator};
use crate::metric::CcMetric;
use crate::scalar::Real;

use super::entropy::fisher;

/// `w(s) = -2 ((1-s) log(1-s) + s log s)`, extended by 0 at the endpoints.
pub fn defect_w(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return invalid("w(s) needs s in [0, 1]");
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    Ok(-2.0 * (xlogx(1.0 - s) + xlogx(s)))
}

/// `d_cc(u, o) sqrt(2 s (1-s) (C^2 - 1) F~)` for a precomputed
/// right-invariant Fisher information `F~`.
pub fn sigma_bound_from_fisher<T: Real>(s: f64, u: &GroupPoint<T>, metric: &CcMetric<T>, ftilde: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return invalid("sigma bound needs s in [0, 1]");
    }
    metric.model.check(u)?;
    if metric.model.family() == GroupFamily::Heisenberg1 && u.coords[2] != T::zero() {
        return invalid("sigma bound needs a horizontal point (u_z = 0)");
    }
    if !(ftilde >= 0.0) || !(c >= 1.0) {
        return invalid("sigma bound needs F~ >= 0 and C >= 1");
    }
    let o = metric.model.identity();
    let d = metric.distance(u, &o)?.f64();
    Ok(d * (2.0 * s * (1.0 - s) * (c * c - 1.0) * ftilde).sqrt())
}

pub fn sigma_bound<T: Real>(
    s: f64,
    u: &GroupPoint<T>,
    f0: &DensityField<T>,
    op: &HeatOperator<T>,
    metric: &CcMetric<T>,
    c: f64,
) -> Result<f64> {
    let ftilde = fisher(op, f0, Frame::Right)?.f64();
    sigma_bound_from_fisher(s, u, metric, ftilde, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;

    #[test]
    fn w_values() {
        assert!((defect_w(0.5).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(defect_w(1e-3).unwrap() <= 0.02);
        assert!(defect_w(1.0 - 1e-3).unwrap() <= 0.02);
        assert_eq!(defect_w(0.0).unwrap(), 0.0);
        assert!(defect_w(1.5).is_err());
    }

    #[test]
    fn w_is_concave() {
        let n = 200;
        let vals: Vec<f64> = (0..=n).map(|k| defect_w(k as f64 / n as f64).unwrap()).collect();
        for k in 1..n {
            assert!(vals[k - 1] - 2.0 * vals[k] + vals[k + 1] <= 1e-9);
        }
    }

    #[test]
    fn sigma_bound_vanishes_for_unit_constant_and_rejects_vertical() {
        let m = CcMetric::closed_form(GroupModel::<f64>::heisenberg());
        let u = GroupPoint::from_f64(&[1.0, 0.0, 0.0]);
        assert_eq!(sigma_bound_from_fisher(0.5, &u, &m, 3.0, 1.0).unwrap(), 0.0);
        let v = sigma_bound_from_fisher(0.5, &u, &m, 2.0, 2f64.sqrt()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let up = GroupPoint::from_f64(&[1.0, 0.0, 0.1]);
        assert!(sigma_bound_from_fisher(0.5, &up, &m, 1.0, 1.5).is_err());
    }
}
