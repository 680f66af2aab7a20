//! Entropy regularization along the dual heat flow.

use rayon::prelude::*;

use crate::error::Result;
use crate::functionals::{entropy, fisher, second_moment};
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::Frame;
use crate::metric::ball_volume;

use super::report::CertReport;
use super::scenario::Scenario;

pub const NAME: &str = "entropy_regularization";
const ANCHOR_LLOGL: &str = "L log L regularization Ent(H_tμ) ≤ (r² + ∫d²(x,x₀)dμ)/(2 I₋₂(t)) − log m(B_r(x₀))";
const ANCHOR_MOMENT: &str = "second moment estimate ∫d²(x,x₀)dμ_t ≤ e^{4t}(Ent(μ) + 2∫d²(x,x₀)dμ)";
const ANCHOR_FISHER: &str = "entropy and Fisher information ∫₀ᵀF(f_t)dt + 2∫₀ᵀ∫d²dμ_t dt ≤ 2e^{4T}(Ent(μ) + 2∫d²dμ)";
const ANCHOR_MONO: &str = "entropy is non-increasing along H_t";

fn chart_radius(sc: &Scenario) -> f64 {
    let c = &sc.chart;
    match sc.model().family() {
        GroupFamily::AbelianTorus => sc.model().periods().expect("torus").iter().fold(f64::INFINITY, |m, &p| m.min(p)) * 0.5,
        _ => (0..c.ndim()).map(|a| 0.5 * (c.hi()[a] - c.lo()[a])).fold(f64::INFINITY, f64::min),
    }
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

fn case(sc: &Scenario, name: &str) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.entropy;
    let tol = sc.tol();
    let curv = sc.curvature()?;
    let x0 = match &set.base_point {
        Some(p) => GroupPoint::new(p.clone()),
        None => sc.model().identity(),
    };
    let mu = sc.measure_at(name, 0.0)?;
    let ent0 = entropy(&mu)?.value;
    let m0 = second_moment(&mu, &x0, &sc.metric)?;
    let radius = chart_radius(sc);
    let mut out = Vec::new();
    let mut prev = (0.0, ent0);
    for &t in sc.config.time_grid.iter().filter(|&&t| t > 0.0) {
        let ht = sc.measure_at(name, t)?;
        let ent = entropy(&ht)?.value;
        let im2 = curv.moment(-2.0, t)?;
        let mut best = (f64::INFINITY, 0.0);
        for &f in &set.radius_fractions {
            let r = f * radius;
            let b = (r * r + m0) / (2.0 * im2) - ball_volume(sc.model(), r)?.ln();
            if b < best.0 {
                best = (b, r);
            }
        }
        let label = format!("{}: mu={name} t={t}", sc.name());
        let mut rep = CertReport::new(NAME, ANCHOR_LLOGL, label.clone(), ent, best.0, tol.integral_rel, tol.noise_floor).with_t(t);
        rep.meta("r", best.1);
        rep.meta("I_minus2", im2);
        out.push(rep);
        let mt = second_moment(&ht, &x0, &sc.metric)?;
        let mut rep = CertReport::new(
            NAME,
            ANCHOR_MOMENT,
            label.clone(),
            mt,
            (4.0 * t).exp() * (ent0 + 2.0 * m0),
            tol.integral_rel,
            tol.noise_floor,
        )
        .with_t(t);
        rep.meta("ent0", ent0);
        rep.meta("moment0", m0);
        out.push(rep);
        let mut rep = CertReport::new(NAME, ANCHOR_MONO, label, ent, prev.1, tol.integral_rel, tol.noise_floor).with_t(t);
        rep.meta("t_prev", prev.0);
        out.push(rep);
        prev = (t, ent);
    }
    let ft = sc.config.settings.fisher_times(sc);
    let mut fis = Vec::with_capacity(ft.len());
    let mut mom = Vec::with_capacity(ft.len());
    for &t in &ft {
        let ht = sc.measure_at(name, t)?;
        fis.push(fisher(&sc.flow.op, &ht, Frame::Left)?);
        mom.push(second_moment(&ht, &x0, &sc.metric)?);
    }
    let t_end = *ft.last().expect("nonempty");
    let lhs = trapezoid(&ft, &fis) + 2.0 * trapezoid(&ft, &mom);
    let rhs = 2.0 * (4.0 * t_end).exp() * (ent0 + 2.0 * m0);
    let mut rep = CertReport::new(NAME, ANCHOR_FISHER, format!("{}: mu={name} T={t_end}", sc.name()), lhs, rhs, tol.integral_rel, tol.noise_floor)
        .with_t(t_end);
    rep.meta("panels", ft.len() - 1);
    rep.meta("fisher_t0", fis[0]);
    out.push(rep);
    Ok(out)
}

pub fn certify(sc: &Scenario) -> Result<Vec<CertReport>> {
    let names: Vec<String> = match &sc.config.settings.entropy.measures {
        Some(l) => l.clone(),
        None => sc.config.measures.iter().map(|m| m.name.clone()).collect(),
    };
    let out: Vec<Vec<CertReport>> = names.par_iter().map(|n| case(sc, n)).collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}
