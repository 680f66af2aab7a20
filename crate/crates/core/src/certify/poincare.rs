//! Local Poincaré sandwich, strong Feller bound and Lipschitz propagation.

use rayon::prelude::*;

use crate::error::Result;
use crate::functionals::lip_estimate;
use crate::heat::Frame;

use super::report::{pointwise_report, CertReport};
use super::scenario::Scenario;

pub const NAME: &str = "variance_poincare";
const ANCHOR_LOWER: &str = "reverse local Poincaré 2 I₋₂(t) Γ(P_t f) ≤ P_t(f²) − (P_t f)²";
const ANCHOR_UPPER: &str = "local Poincaré P_t(f²) − (P_t f)² ≤ 2 I₂(t) P_t Γ(f)";
const ANCHOR_FELLER: &str = "strong Feller bound √(2 I₋₂(t)) Lip(P_t f) ≤ ‖f‖_∞";
const ANCHOR_LIP: &str = "Lipschitz propagation Lip(P_t f) ≤ c(t) Lip(f)";

fn case(sc: &Scenario, name: &str, times: &[f64]) -> Result<Vec<CertReport>> {
    let tol = sc.tol();
    let op = &sc.flow.op;
    let curv = sc.curvature()?;
    let f = sc.field(name)?;
    let pf = sc.function_flow(name, times)?;
    let pf2 = sc.flow_cached(&format!("sq:{name}"), || Ok(f.map(|v| v * v)), times)?;
    let gam = op.gamma(&f, Frame::Left)?;
    let pg = sc.flow_cached(&format!("gamma:{name}"), || Ok(gam), times)?;
    let sup = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lip0 = lip_estimate(&f, &sc.metric, Some(&sc.window));
    let mut out = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let im2 = curv.moment(-2.0, t)?;
        let ip2 = curv.moment(2.0, t)?;
        let var: Vec<f64> = pf2[k].values.iter().zip(&pf[k].values).map(|(a, b)| a - b * b).collect();
        let g: Vec<f64> = op.gamma(&pf[k], Frame::Left)?.values.iter().map(|v| 2.0 * im2 * v).collect();
        let up: Vec<f64> = pg[k].values.iter().map(|v| 2.0 * ip2 * v).collect();
        let label = format!("{}: f={name} t={t}", sc.name());
        let mut r = pointwise_report(NAME, ANCHOR_LOWER, label.clone(), &g, &var, &sc.window_nodes, tol.pointwise_rel, tol.pointwise_floor, &sc.chart)
            .with_t(t)
            .with_window(sc.window_label());
        r.meta("I_minus2", im2);
        out.push(r);
        let mut r = pointwise_report(NAME, ANCHOR_UPPER, label.clone(), &var, &up, &sc.window_nodes, tol.pointwise_rel, tol.pointwise_floor, &sc.chart)
            .with_t(t)
            .with_window(sc.window_label());
        r.meta("I_2", ip2);
        out.push(r);
        let lip = lip_estimate(&pf[k], &sc.metric, Some(&sc.window));
        let r = CertReport::new(NAME, ANCHOR_FELLER, label.clone(), (2.0 * im2).sqrt() * lip, sup, tol.pointwise_rel, tol.noise_floor)
            .with_t(t)
            .with_window(sc.window_label());
        out.push(r);
        let c = curv.eval(t)?;
        let mut r = CertReport::new(NAME, ANCHOR_LIP, label, lip, c * lip0, tol.pointwise_rel, tol.noise_floor)
            .with_t(t)
            .with_window(sc.window_label());
        r.meta("c", c);
        out.push(r);
    }
    Ok(out)
}

pub fn certify(sc: &Scenario) -> Result<Vec<CertReport>> {
    let times: Vec<f64> = sc.config.time_grid.iter().copied().filter(|&t| t > 0.0).collect();
    let names: Vec<String> = match &sc.config.settings.poincare.functions {
        Some(l) => l.clone(),
        None => sc.config.functions.iter().map(|f| f.name.clone()).collect(),
    };
    let out: Vec<Vec<CertReport>> = names.par_iter().map(|n| case(sc, n, &times)).collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}
