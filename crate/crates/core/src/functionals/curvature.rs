//! The curvature function `c(t)` and its moments
//! `I_p(t) = int_0^t c^p`, `RI(t0, t1) = int_0^1 c^{-2}((1-s) t0 + s t1) ds`
//! and `B[h] = (1 / RI(0, h) - 1) / h`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurvatureFn {
    /// `c(t) = C` for all `t >= 0`.
    Constant { c: f64 },
    /// `c(t) = C e^{-K t}`.
    Exponential { c: f64, k: f64 },
    /// Piecewise linear through the knots. Before the first knot the first
    /// value is used; beyond the last knot `c` is undefined.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl CurvatureFn {
    pub fn constant(c: f64) -> Result<Self> {
        let f = CurvatureFn::Constant { c };
        f.validate()?;
        Ok(f)
    }

    pub fn exponential(c: f64, k: f64) -> Result<Self> {
        let f = CurvatureFn::Exponential { c, k };
        f.validate()?;
        Ok(f)
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let f = CurvatureFn::Tabulated { knots, values };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CurvatureFn::Constant { c } if !(*c > 0.0 && c.is_finite()) => invalid("c must be positive"),
            CurvatureFn::Exponential { c, k } if !(*c > 0.0 && c.is_finite() && k.is_finite()) => {
                invalid("exponential curvature needs C > 0 and finite K")
            }
            CurvatureFn::Tabulated { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return invalid("tabulated curvature needs matching, nonempty knots and values");
                }
                if knots[0] < 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("knots must be nonnegative and strictly increasing");
                }
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return invalid("tabulated values must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Upper end of the domain (`inf` for analytic kinds).
    pub fn t_max(&self) -> f64 {
        match self {
            CurvatureFn::Tabulated { knots, .. } => *knots.last().expect("validated"),
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("c(t) needs t >= 0, got {t}")));
        }
        match self {
            CurvatureFn::Constant { c } => Ok(*c),
            CurvatureFn::Exponential { c, k } => Ok(c * (-k * t).exp()),
            CurvatureFn::Tabulated { knots, values } => {
                let last = *knots.last().expect("validated");
                if t > last * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::Domain(format!("c({t}) is beyond the last knot {last}")));
                }
                if t <= knots[0] {
                    return Ok(values[0]);
                }
                let j = knots.partition_point(|&k| k < t).min(knots.len() - 1);
                let (t0, t1) = (knots[j - 1], knots[j]);
                let w = (t - t0) / (t1 - t0);
                Ok(values[j - 1] * (1.0 - w) + values[j] * w)
            }
        }
    }

    /// Breakpoints inside `(a, b)` where the tabulated interpolant kinks.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        if let CurvatureFn::Tabulated { knots, .. } = self {
            pts.extend(knots.iter().copied().filter(|&k| k > a && k < b));
        }
        pts.push(b);
        pts
    }

    fn integrate(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        if b > self.t_max() * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Domain(format!("integration up to {b} exceeds the tabulated range")));
        }
        let pts = self.breakpoints(a, b);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let f = |t: f64| self.eval(t).map(&g).unwrap_or(f64::NAN);
            total += adaptive_simpson(&f, w[0], w[1], QUAD_TOL);
        }
        if !total.is_finite() {
            return Err(Error::Numerical {
                message: "curvature quadrature produced a non-finite value".into(),
                iterations: 0,
                residual: f64::NAN,
            });
        }
        Ok(total)
    }

    /// `I_p(t)` by adaptive quadrature.
    pub fn moment_quadrature(&self, p: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return invalid("I_p needs t >= 0");
        }
        self.integrate(0.0, t, |c| c.powf(p))
    }

    /// `I_p(t)` in closed form where available.
    pub fn moment_closed_form(&self, p: f64, t: f64) -> Option<f64> {
        match *self {
            CurvatureFn::Constant { c } => Some(c.powf(p) * t),
            CurvatureFn::Exponential { c, k } => {
                let pk = p * k;
                if pk.abs() < 1e-14 {
                    Some(c.powf(p) * t)
                } else {
                    Some(c.powf(p) * (-(-pk * t).exp_m1()) / pk)
                }
            }
            CurvatureFn::Tabulated { .. } => None,
        }
    }

    pub fn moment(&self, p: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return invalid("I_p needs t >= 0");
        }
        match self.moment_closed_form(p, t) {
            Some(v) => Ok(v),
            None => self.moment_quadrature(p, t),
        }
    }

    pub fn mean_ri_quadrature(&self, t0: f64, t1: f64) -> Result<f64> {
        check_interval(t0, t1)?;
        if t1 == t0 {
            return Ok(self.eval(t0)?.powi(-2));
        }
        Ok(self.integrate(t0, t1, |c| c.powi(-2))? / (t1 - t0))
    }

    pub fn mean_ri_closed_form(&self, t0: f64, t1: f64) -> Option<f64> {
        match *self {
            CurvatureFn::Constant { c } => Some(c.powi(-2)),
            CurvatureFn::Exponential { c, k } => {
                let d = t1 - t0;
                if d == 0.0 || (k * d).abs() < 1e-14 {
                    Some((2.0 * k * t0).exp() / (c * c))
                } else {
                    // (e^{2K t1} - e^{2K t0}) / (2K (t1 - t0) C^2)
                    Some((2.0 * k * t0).exp() * (2.0 * k * d).exp_m1() / (2.0 * k * d * c * c))
                }
            }
            CurvatureFn::Tabulated { .. } => None,
        }
    }

    /// `RI(t0, t1)`; equals `c^{-2}(t0)` when `t1 = t0`.
    pub fn mean_ri(&self, t0: f64, t1: f64) -> Result<f64> {
        check_interval(t0, t1)?;
        match self.mean_ri_closed_form(t0, t1) {
            Some(v) => Ok(v),
            None => self.mean_ri_quadrature(t0, t1),
        }
    }

    pub fn heated_coefficient_b(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return invalid("B[h] needs h > 0");
        }
        Ok((1.0 / self.mean_ri(0.0, h)? - 1.0) / h)
    }

    pub fn heated_coefficient_b_quadrature(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return invalid("B[h] needs h > 0");
        }
        Ok((1.0 / self.mean_ri_quadrature(0.0, h)? - 1.0) / h)
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0 >= 0.0 && t1 >= t0) {
        return invalid(format!("RI needs 0 <= t0 <= t1, got ({t0}, {t1})"));
    }
    Ok(())
}

/// Adaptive Simpson with Richardson correction; `tol` is absolute on the
/// whole interval, split in half at every refinement.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_curvature_is_trivial() {
        let c = CurvatureFn::constant(1.0).unwrap();
        assert_eq!(c.moment(2.0, 0.3).unwrap(), 0.3);
        assert_eq!(c.moment(-2.0, 0.3).unwrap(), 0.3);
        assert_eq!(c.mean_ri(0.1, 0.4).unwrap(), 1.0);
        assert_eq!(c.heated_coefficient_b(0.05).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for c in [
            CurvatureFn::constant(1.7).unwrap(),
            CurvatureFn::exponential(2f64.sqrt(), 2.0).unwrap(),
            CurvatureFn::exponential(1.3, -0.7).unwrap(),
        ] {
            for &(p, t) in &[(-2.0, 0.3), (2.0, 1.0), (1.0, 0.05)] {
                let q = c.moment_quadrature(p, t).unwrap();
                let e = c.moment_closed_form(p, t).unwrap();
                assert!((q - e).abs() <= 1e-9 * e.abs().max(1.0), "{c:?} {p} {t}: {q} {e}");
            }
            for &(t0, t1) in &[(0.0, 0.1), (0.1, 0.3), (0.2, 0.2)] {
                let q = c.mean_ri_quadrature(t0, t1).unwrap();
                let e = c.mean_ri_closed_form(t0, t1).unwrap();
                assert!((q - e).abs() <= 1e-9 * e, "{q} {e}");
            }
            let b = c.heated_coefficient_b_quadrature(0.1).unwrap();
            assert!((b - c.heated_coefficient_b(0.1).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn su2_factor() {
        let c = CurvatureFn::exponential(2f64.sqrt(), 2.0).unwrap();
        let (t0, t1): (f64, f64) = (0.1, 0.35);
        let factor = 4.0 * (t1 - t0) / ((4.0 * t1).exp() - (4.0 * t0).exp());
        let ri = c.mean_ri_quadrature(t0, t1).unwrap();
        assert!((1.0 / ri - 2.0 * factor).abs() < 1e-9);
    }

    #[test]
    fn tabulated_interpolation_and_domain() {
        let c = CurvatureFn::tabulated(vec![0.1, 0.2, 0.4], vec![1.2, 1.4, 1.3]).unwrap();
        assert_eq!(c.eval(0.0).unwrap(), 1.2);
        assert!((c.eval(0.15).unwrap() - 1.3).abs() < 1e-14);
        assert!(matches!(c.eval(0.5), Err(Error::Domain(_))));
        assert!(matches!(c.moment(-2.0, 0.41), Err(Error::Domain(_))));
        // piecewise linear c^{-2} integrates exactly when split at knots
        let i = c.moment(1.0, 0.4).unwrap();
        let exact = 0.1 * 1.2 + 0.1 * 1.3 + 0.2 * 1.35;
        assert!((i - exact).abs() < 1e-12);
        assert!((c.mean_ri(0.3, 0.3).unwrap() - 1.35f64.powi(-2)).abs() < 1e-14);
        assert!(CurvatureFn::tabulated(vec![0.2, 0.1], vec![1.0, 1.0]).is_err());
        assert!(CurvatureFn::constant(0.0).is_err());
    }
}
