//! Metric speed bounds along curves of measures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::fisher;
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::Frame;
use crate::transport::{ball_quadrature, convolve_cloud, w2_exact, PointCloudMeasure};

use super::contraction::w2;
use super::report::CertReport;
use super::scenario::Scenario;
use super::settings::CloudCurve;

pub const NAME: &str = "velocity";
const ANCHOR_HEAT: &str = "W₂-velocity of the heat flow |μ̇_t|² ≤ F(f_t)";
const ANCHOR_CONV: &str = "convolution does not increase W₂-velocity |(ρ_r∗μ)˙_s| ≤ |μ̇_s|";
const ANCHOR_LISINI: &str = "Lisini bound |d/ds ∫φ dμ_s|² ≤ |μ̇_s|² ∫|Dφ|² dμ_s";

fn heat_reports(sc: &Scenario) -> Result<Vec<CertReport>> {
    let Some(curve) = &sc.config.settings.velocity.heat_curve else {
        return Ok(Vec::new());
    };
    let tol = sc.tol();
    let mut jobs = Vec::new();
    for &t in &curve.times {
        for &h in &curve.h {
            jobs.push((t, h));
        }
    }
    jobs.par_iter()
        .map(|&(t, h)| {
            let a = sc.measure_at(&curve.measure, t)?;
            let b = sc.measure_at(&curve.measure, t + h)?;
            let (w, info) = w2(sc, &b, &a)?;
            let speed2 = (w / h).powi(2);
            let f = fisher(&sc.flow.op, &a, Frame::Left)?;
            let mut r = CertReport::new(
                NAME,
                ANCHOR_HEAT,
                format!("{}: heat curve mu={} t={t} h={h}", sc.name(), curve.measure),
                speed2,
                f,
                tol.ot_rel,
                tol.noise_floor,
            )
            .with_t(t)
            .with_h(h);
            r.meta("relative_slack", (f - speed2) / f.max(f64::MIN_POSITIVE));
            r.meta("block", info.block);
            Ok(r)
        })
        .collect()
}

fn translate(sc: &Scenario, mu: &PointCloudMeasure<f64>, u: &[f64], s: f64) -> Result<PointCloudMeasure<f64>> {
    let step = GroupPoint::new(u.iter().map(|c| s * c).collect());
    let model = sc.model();
    let points = mu
        .points
        .iter()
        .map(|p| model.multiply(p, &step))
        .collect::<Result<Vec<_>>>()?;
    PointCloudMeasure::new(points, mu.weights.clone())
}

fn cloud_reports(sc: &Scenario, curve: &CloudCurve) -> Result<Vec<CertReport>> {
    let tol = sc.tol();
    if sc.model().family() == GroupFamily::Heisenberg1 && curve.u.get(2).copied().unwrap_or(0.0) != 0.0 {
        return Err(Error::InvalidInput("cloud curve needs a horizontal u".into()));
    }
    let base = sc.cloud(&sc.measure_at(&curve.measure, 0.0)?, curve.atoms)?;
    let ball = ball_quadrature(&sc.metric, curve.radius, curve.ball_points)?;
    let ds = curve.ds;
    let s_grid = &sc.config.s_grid;
    let potentials = &sc.config.settings.velocity.potentials;
    let per_s: Vec<Vec<CertReport>> = s_grid
        .par_iter()
        .map(|&s| -> Result<Vec<CertReport>> {
            let a = translate(sc, &base, &curve.u, s)?;
            let b = translate(sc, &base, &curve.u, s + ds)?;
            let raw = w2_exact(&sc.metric, &a, &b, &sc.transport)?.w2() / ds;
            let ca = convolve_cloud(&sc.metric, &a, &ball)?;
            let cb = convolve_cloud(&sc.metric, &b, &ball)?;
            let conv = w2_exact(&sc.metric, &ca, &cb, &sc.transport)?.w2() / ds;
            let label = format!("{}: cloud curve mu={} s={s} ds={ds}", sc.name(), curve.measure);
            let mut r = CertReport::new(NAME, ANCHOR_CONV, label.clone(), conv, raw, tol.ot_rel, tol.noise_floor).with_s(s);
            r.meta("radius", curve.radius);
            r.meta("atoms", a.len());
            r.meta("convolved_atoms", ca.len());
            let mut out = vec![r];
            let mid = translate(sc, &base, &curve.u, s + 0.5 * ds)?;
            for name in potentials {
                let phi = sc.function(name)?;
                let integral = |m: &PointCloudMeasure<f64>| -> f64 {
                    m.points.iter().zip(&m.weights).map(|(p, w)| w * phi.eval(&p.coords)).sum()
                };
                let dphi = (integral(&b) - integral(&a)) / ds;
                let energy: f64 = mid
                    .points
                    .iter()
                    .zip(&mid.weights)
                    .map(|(p, w)| w * sc.horizontal_grad_sq(phi, &p.coords))
                    .sum();
                let mut r = CertReport::new(
                    NAME,
                    ANCHOR_LISINI,
                    format!("{label} phi={name}"),
                    dphi * dphi,
                    raw * raw * energy,
                    tol.ot_rel,
                    tol.noise_floor,
                )
                .with_s(s);
                r.meta("speed", raw);
                r.meta("dirichlet", energy);
                out.push(r);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_s.into_iter().flatten().collect())
}

pub fn certify(sc: &Scenario) -> Result<Vec<CertReport>> {
    let mut out = heat_reports(sc)?;
    if let Some(curve) = &sc.config.settings.velocity.cloud_curve {
        out.extend(cloud_reports(sc, curve)?);
    }
    if out.is_empty() {
        out.push(CertReport::degenerate(NAME, ANCHOR_HEAT, format!("{}: no curves", sc.name()), "no curves configured"));
    }
    Ok(out)
}
