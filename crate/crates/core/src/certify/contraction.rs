//! Wasserstein contraction of the dual heat flow and the weak EVI.

use rayon::prelude::*;

use crate::error::Result;
use crate::functionals::entropy;
use crate::group::GroupFamily;
use crate::heat::DensityField;
use crate::transport::{density_to_cloud, w1_dual, w2_densities, Discretization};

use super::report::CertReport;
use super::scenario::Scenario;

pub const NAME_W: &str = "w_contraction";
pub const NAME_EVI: &str = "evi";
const ANCHOR_W2: &str = "Kuwada duality W₂(H_tμ, H_tν) ≤ c(t) W₂(μ, ν)";
const ANCHOR_W1: &str = "W₁ contraction W₁(H_tμ, H_tν) ≤ c(t) W₁(μ, ν)";
const ANCHOR_EVI: &str =
    "weak EVI ½W₂²(H_{t1}μ₁, H_{t0}μ₀) − W₂²(μ₁, μ₀)/(2RI(t0,t1)) ≤ (t1−t0)(Ent(H_{t0}μ₀) − Ent(H_{t1}μ₁))";

fn is_line(sc: &Scenario) -> bool {
    sc.model().family() == GroupFamily::AbelianBox && sc.model().dimension() == 1
}

pub fn w2(sc: &Scenario, a: &DensityField<f64>, b: &DensityField<f64>) -> Result<(f64, Discretization)> {
    w2_densities(&sc.metric, a, b, &sc.transport)
}

pub fn w1(sc: &Scenario, a: &DensityField<f64>, b: &DensityField<f64>) -> Result<f64> {
    let cap = if is_line(sc) { usize::MAX } else { sc.transport.lp_cap };
    let (ca, _) = density_to_cloud(a, sc.transport.mass_threshold, cap)?;
    let (cb, _) = density_to_cloud(b, sc.transport.mass_threshold, cap)?;
    w1_dual(&sc.metric, &ca, &cb, &sc.transport)
}

/// `(W_2(H_t mu, H_t nu), W_2(mu, nu))`, shared by the Kuwada and the
/// degenerate EVI certificates so that both see identical numbers.
pub fn kuwada_pair(sc: &Scenario, mu: &str, nu: &str, t: f64) -> Result<(f64, f64, Discretization)> {
    let (lhs, info) = heated_w2(sc, mu, t, nu, t)?;
    let (w0, _) = heated_w2(sc, mu, 0.0, nu, 0.0)?;
    Ok((lhs, w0, info))
}

/// `W_2(H_s mu, H_t nu)` for named measures, memoized on the scenario.
pub fn heated_w2(sc: &Scenario, mu: &str, s: f64, nu: &str, t: f64) -> Result<(f64, Discretization)> {
    sc.distance_cached(&format!("w2:{mu}@{s}|{nu}@{t}"), || w2(sc, &sc.measure_at(mu, s)?, &sc.measure_at(nu, t)?))
}

fn heated_w1(sc: &Scenario, mu: &str, nu: &str, t: f64) -> Result<f64> {
    let (v, _) = sc.distance_cached(&format!("w1:{mu}@{t}|{nu}@{t}"), || {
        let v = w1(sc, &sc.measure_at(mu, t)?, &sc.measure_at(nu, t)?)?;
        Ok((v, Discretization { block: 0, dropped_mass: 0.0, atoms: 0 }))
    })?;
    Ok(v)
}

fn contraction_case(sc: &Scenario, mu: &str, nu: &str, t: f64) -> Result<Vec<CertReport>> {
    let tol = sc.tol();
    let c = sc.curvature()?.eval(t)?;
    let (lhs, w0, info) = kuwada_pair(sc, mu, nu, t)?;
    let case = format!("{}: {mu}|{nu} t={t}", sc.name());
    let mut r = CertReport::new(NAME_W, ANCHOR_W2, case.clone(), lhs, c * w0, tol.ot_rel, tol.noise_floor).with_t(t);
    r.meta("c", c);
    r.meta("w2_initial", w0);
    r.meta("block", info.block);
    r.meta("atoms", info.atoms);
    let mut out = vec![r];
    if sc.config.settings.contraction.w1 {
        let a = heated_w1(sc, mu, nu, t)?;
        let b = heated_w1(sc, mu, nu, 0.0)?;
        let mut r = CertReport::new(NAME_W, ANCHOR_W1, case, a, c * b, tol.ot_rel, tol.noise_floor).with_t(t);
        r.meta("c", c);
        r.meta("w1_initial", b);
        out.push(r);
    }
    Ok(out)
}

pub fn certify_w_contraction(sc: &Scenario) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.contraction;
    let times = set.times.clone().unwrap_or_else(|| sc.times_with_zero());
    let cases: Vec<(&[String; 2], f64)> = set.pairs.iter().flat_map(|p| times.iter().map(move |&t| (p, t))).collect();
    let out: Vec<Vec<CertReport>> = cases
        .par_iter()
        .map(|(p, t)| contraction_case(sc, &p[0], &p[1], *t))
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn evi_case(sc: &Scenario, mu0: &str, mu1: &str, t0: f64, t1: f64) -> Result<CertReport> {
    let tol = sc.tol();
    let curv = sc.curvature()?;
    let ri = curv.mean_ri(t0, t1)?;
    let case = format!("{}: {mu0}|{mu1} t0={t0} t1={t1}", sc.name());
    let mut r = if t0 == t1 {
        let (lhs, w0, info) = kuwada_pair(sc, mu0, mu1, t0)?;
        let mut r = CertReport::new(NAME_EVI, ANCHOR_EVI, case, lhs, w0 / ri.sqrt(), tol.ot_rel, tol.noise_floor);
        r.meta("form", "t0 = t1: W₂(H_tμ₀, H_tμ₁) ≤ RI(t,t)^{-1/2} W₂(μ₀, μ₁)");
        r.meta("block", info.block);
        r
    } else {
        let a1 = sc.measure_at(mu1, t1)?;
        let a0 = sc.measure_at(mu0, t0)?;
        let (wt, info) = heated_w2(sc, mu1, t1, mu0, t0)?;
        let (w0, _) = heated_w2(sc, mu1, 0.0, mu0, 0.0)?;
        let e0 = entropy(&a0)?.value;
        let e1 = entropy(&a1)?.value;
        let lhs = 0.5 * wt * wt - w0 * w0 / (2.0 * ri);
        let rhs = (t1 - t0) * (e0 - e1);
        let mut r = CertReport::new(NAME_EVI, ANCHOR_EVI, case, lhs, rhs, tol.ot_rel, tol.noise_floor);
        r.meta("w2_heated", wt);
        r.meta("w2_initial", w0);
        r.meta("ent_t0", e0);
        r.meta("ent_t1", e1);
        r.meta("block", info.block);
        r
    };
    r.meta("ri", ri);
    r.t = Some(t1);
    r.meta("t0", t0);
    Ok(r)
}

pub fn certify_evi(sc: &Scenario) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.evi;
    let cases: Vec<(&[String; 2], [f64; 2])> =
        set.pairs.iter().flat_map(|p| set.time_pairs.iter().map(move |&t| (p, t))).collect();
    cases
        .par_iter()
        .map(|(p, t)| evi_case(sc, &p[0], &p[1], t[0], t[1]))
        .collect()
}
