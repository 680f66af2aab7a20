//! Heated convexity of the entropy along geodesics, and the Heisenberg
//! extras along right translations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{defect_w, entropy, fisher, sigma_bound, sigma_bound_from_fisher};
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::{DensityField, Frame, GridChart};
use crate::transport::{density_to_cloud, displacement_interpolate, w2_exact, PointCloudMeasure};

use super::contraction::w2;
use super::report::CertReport;
use super::scenario::{deposit, Scenario};
use super::settings::{merge_times, Geodesic};

pub const NAME: &str = "heated_convexity";
const ANCHOR_HEATED: &str = "heated convexity Ent(H_{t+h}μ_s) ≤ (1−s)Ent(H_tμ₀) + s Ent(H_tμ₁) + s(1−s)/(2h)(W₂²(μ₀,μ₁)/RI(t,t+h) − W₂²(H_tμ₀,H_tμ₁))";
const ANCHOR_RT: &str = "right translations are optimal: W₂(μ₀, μ₀(u)) = d_cc(u, o)";
const ANCHOR_CONST: &str = "right translations preserve Haar measure, so Ent(μ_s) = Ent(μ₀)";
const ANCHOR_W: &str = "weak convexity of Ent on H¹ with defect w(s) = −2 log((1−s)^{1−s} s^s)";
const ANCHOR_SIGMA: &str = "σ(s) ≤ d_cc(u,o) √(2s(1−s)(C²−1) F̃(f₀)) for right translations";

/// Entropy constancy along right translations must hold to this absolute
/// accuracy.
const ENT_CONST_ABS: f64 = 1e-8;

struct Geo {
    label: String,
    /// Density of `mu_s` for each `s` in the grid.
    curve: Vec<DensityField<f64>>,
    mu0: String,
    mu1: Option<String>,
}

impl Geo {
    fn endpoint(&self, sc: &Scenario, which: usize, t: f64, s_grid: &[f64]) -> Result<DensityField<f64>> {
        let name = if which == 0 { Some(&self.mu0) } else { self.mu1.as_ref() };
        match name {
            Some(n) => sc.measure_at(n, t),
            None => {
                let k = s_grid.iter().position(|&s| s == 1.0).ok_or_else(|| Error::Config("s_grid needs s = 1".into()))?;
                heat(sc, &self.label, k, &self.curve[k], &[t]).map(|mut v| v.remove(0))
            }
        }
    }
}

fn heat(sc: &Scenario, label: &str, k: usize, mu: &DensityField<f64>, times: &[f64]) -> Result<Vec<DensityField<f64>>> {
    let all = curve_times(sc);
    let snaps = sc.flow_cached(&format!("geo:{label}:{k}"), || Ok(mu.as_scalar()), &all)?;
    times
        .iter()
        .map(|&t| {
            let j = all
                .iter()
                .position(|&x| (x - t).abs() <= 1e-12 * t.max(1.0))
                .ok_or_else(|| Error::Config(format!("time {t} missing from the geodesic flow")))?;
            Ok(DensityField::from_scalar(snaps[j].clone()))
        })
        .collect()
}

/// `t`, `t + h` and the sigma quadrature times.
fn curve_times(sc: &Scenario) -> Vec<f64> {
    let set = &sc.config.settings.convexity;
    let mut t = vec![0.0];
    for &a in &set.times {
        t.push(a);
        t.extend(set.h.iter().map(|h| a + h));
    }
    let n = set.sigma_panels.max(1);
    for &h in &set.h {
        t.extend((0..=n).map(|k| h * k as f64 / n as f64));
    }
    merge_times(t)
}

fn heated_reports(sc: &Scenario, geo: &Geo, w0: f64, wt_of: &dyn Fn(f64) -> Result<f64>) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.convexity;
    let tol = sc.tol();
    let curv = sc.curvature()?;
    let s_grid = &sc.config.s_grid;
    let mut out = Vec::new();
    for &t in &set.times {
        let e0 = entropy(&geo.endpoint(sc, 0, t, s_grid)?)?.value;
        let e1 = entropy(&geo.endpoint(sc, 1, t, s_grid)?)?.value;
        let wt = wt_of(t)?;
        for &h in &set.h {
            let ri = curv.mean_ri(t, t + h)?;
            for (k, &s) in s_grid.iter().enumerate() {
                let lhs = entropy(&heat(sc, &geo.label, k, &geo.curve[k], &[t + h])?[0])?.value;
                let rhs = (1.0 - s) * e0 + s * e1 + s * (1.0 - s) / (2.0 * h) * (w0 * w0 / ri - wt * wt);
                let mut r = CertReport::new(
                    NAME,
                    ANCHOR_HEATED,
                    format!("{}: {} s={s} t={t} h={h}", sc.name(), geo.label),
                    lhs,
                    rhs,
                    tol.integral_rel,
                    tol.noise_floor,
                )
                .with_s(s)
                .with_t(t)
                .with_h(h);
                r.meta("ri", ri);
                r.meta("w2_initial", w0);
                r.meta("w2_heated", wt);
                out.push(r);
            }
        }
    }
    Ok(out)
}

fn displacement(sc: &Scenario, from: &str, to: &str) -> Result<Vec<CertReport>> {
    let line = sc.model().family() == GroupFamily::AbelianBox && sc.model().dimension() == 1;
    let cap = if line { usize::MAX } else { sc.transport.lp_cap };
    let m0 = sc.measure_at(from, 0.0)?;
    let m1 = sc.measure_at(to, 0.0)?;
    let (a, _) = density_to_cloud(&m0, sc.transport.mass_threshold, cap)?;
    let (b, _) = density_to_cloud(&m1, sc.transport.mass_threshold, cap)?;
    let plan = w2_exact(&sc.metric, &a, &b, &sc.transport)?;
    let curve = sc
        .config
        .s_grid
        .par_iter()
        .map(|&s| -> Result<DensityField<f64>> {
            if s == 0.0 {
                return Ok(m0.clone());
            }
            if s == 1.0 {
                return Ok(m1.clone());
            }
            deposit(&displacement_interpolate(&sc.metric, &plan, s)?, &sc.chart)
        })
        .collect::<Result<Vec<_>>>()?;
    let geo = Geo {
        label: format!("displacement {from}->{to}"),
        curve,
        mu0: from.to_string(),
        mu1: Some(to.to_string()),
    };
    let w0 = plan.w2();
    let wt = |t: f64| -> Result<f64> {
        if t == 0.0 {
            return Ok(w0);
        }
        Ok(w2(sc, &sc.measure_at(from, t)?, &sc.measure_at(to, t)?)?.0)
    };
    heated_reports(sc, &geo, w0, &wt)
}

/// Right-invariant Fisher information of a Gaussian density
/// `N(c, sigma^2 I)` in exponential coordinates, in closed form.
fn gaussian_ftilde(c: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    2.0 / s2 + (c[0] * c[0] + c[1] * c[1]) / (4.0 * s2) + 0.5
}

/// The same quantity by a midpoint rule on the chart nodes, using the
/// analytic score `-(x - c) / sigma^2` against the right-invariant frame.
fn gaussian_ftilde_quadrature(sc: &Scenario, chart: &GridChart<f64>, c: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let norm = (2.0 * std::f64::consts::PI * s2).powf(-(c.len() as f64) / 2.0);
    let mut p = vec![0.0; chart.ndim()];
    let mut sum = 0.0;
    for k in 0..chart.len() {
        chart.node_into(k, &mut p);
        let r2: f64 = p.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
        let f = norm * (-r2 / (2.0 * s2)).exp();
        let score: f64 = sc
            .model()
            .frame_at(&p, true)
            .iter()
            .map(|v| v.iter().zip(p.iter().zip(c)).map(|(v, (x, c))| v * (c - x) / s2).sum::<f64>().powi(2))
            .sum();
        sum += f * score;
    }
    sum * chart.cell_volume()
}

fn right_translation(sc: &Scenario, measure: &str, u: &[f64], cloud_atoms: usize) -> Result<Vec<CertReport>> {
    if sc.model().family() != GroupFamily::Heisenberg1 {
        return Err(Error::InvalidInput("right-translation geodesics are set up on H^1".into()));
    }
    if u.len() != 3 || u[2] != 0.0 {
        return Err(Error::InvalidInput("right-translation geodesic needs a horizontal u = (a, b, 0)".into()));
    }
    let tol = sc.tol();
    let set = &sc.config.settings.convexity;
    let s_grid = &sc.config.s_grid;
    let curve = s_grid
        .par_iter()
        .map(|&s| sc.translated(measure, &u.iter().map(|c| s * c).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let up = GroupPoint::new(u.to_vec());
    let d = sc.metric.distance(&up, &sc.model().identity())?;
    let label = format!("right translation {measure} u={u:?}");
    let geo = Geo {
        label: label.clone(),
        curve,
        mu0: measure.to_string(),
        mu1: None,
    };
    let k1 = s_grid.iter().position(|&s| s == 1.0).ok_or_else(|| Error::Config("s_grid needs s = 1".into()))?;
    let (w0, info) = w2(sc, &geo.curve[0], &geo.curve[k1])?;
    let wt = |t: f64| -> Result<f64> {
        if t == 0.0 {
            return Ok(w0);
        }
        let a = geo.endpoint(sc, 0, t, s_grid)?;
        let b = geo.endpoint(sc, 1, t, s_grid)?;
        Ok(w2(sc, &a, &b)?.0)
    };
    let mut out = heated_reports(sc, &geo, w0, &wt)?;

    // W_2 of the exact push-forward on a cloud discretization of mu_0.
    let c0 = sc.cloud(&geo.curve[0], cloud_atoms)?;
    let model = sc.model();
    let pts = c0.points.iter().map(|p| model.multiply(p, &up)).collect::<Result<Vec<_>>>()?;
    let c1 = PointCloudMeasure::new(pts, c0.weights.clone())?;
    let w_cloud = w2_exact(&sc.metric, &c0, &c1, &sc.transport)?.w2();
    let mut r = CertReport::new(NAME, ANCHOR_RT, format!("{}: {label}", sc.name()), (w_cloud - d).abs(), tol.ot_rel * d, 0.0, tol.noise_floor);
    r.tolerance = tol.ot_rel;
    r.meta("w2_cloud", w_cloud);
    r.meta("d_cc", d);
    r.meta("cloud_atoms", c0.len());
    r.meta("w2_grid_coarsened", w0);
    r.meta("grid_block", info.block);
    out.push(r);

    let ents: Vec<f64> = geo.curve.iter().map(|m| entropy(m).map(|e| e.value)).collect::<Result<_>>()?;
    let (e0, e1) = (ents[0], ents[k1]);
    let c_big = sc.curvature_sup()?;
    let analytic = sc.gaussian_params(measure)?;
    let ftilde_quad = match &analytic {
        Some((c, sigma)) => gaussian_ftilde_quadrature(sc, &geo.curve[0].chart, c, *sigma),
        None => 0.0,
    };
    for (k, &s) in s_grid.iter().enumerate() {
        let case = format!("{}: {label} s={s}", sc.name());
        let mut r = CertReport::new(NAME, ANCHOR_CONST, case.clone(), (ents[k] - e0).abs(), ENT_CONST_ABS, 0.0, f64::MIN_POSITIVE).with_s(s);
        r.meta("ent", ents[k]);
        out.push(r);
        let w = defect_w(s)?;
        let mut r = CertReport::new(NAME, ANCHOR_W, case.clone(), ents[k], (1.0 - s) * e0 + s * e1 + w, tol.integral_rel, tol.noise_floor)
            .with_s(s);
        r.meta("w", w);
        let sb = sigma_bound(s, &up, &geo.curve[0], &sc.flow.op, &sc.metric, c_big)?;
        r.meta("sigma_bound", sb);
        out.push(r);
        if let Some((c, sigma)) = &analytic {
            if s > 0.0 && s < 1.0 {
                let exact = sigma_bound_from_fisher(s, &up, &sc.metric, gaussian_ftilde(c, *sigma), c_big)?;
                let quad = sigma_bound_from_fisher(s, &up, &sc.metric, ftilde_quad, c_big)?;
                let mut r = CertReport::new(NAME, ANCHOR_SIGMA, case, (quad - exact).abs(), tol.integral_rel * exact, 0.0, tol.noise_floor)
                    .with_s(s);
                r.tolerance = tol.integral_rel;
                r.meta("sigma_bound_quadrature", quad);
                r.meta("sigma_bound_closed_form", exact);
                r.meta("sigma_bound_grid", sb);
                r.meta("grid_rel_error", (sb - exact) / exact);
                r.meta("C", c_big);
                r.meta("w", w);
                if s == 0.5 {
                    r.meta("sigma_numerical", sigma_numerical(sc, &geo, k, d, c_big, s)?);
                }
                out.push(r);
            }
        }
    }
    let w_half = defect_w(0.5)?;
    let mut r = CertReport::new(NAME, ANCHOR_W, format!("{}: w(1/2) = log 4", sc.name()), (w_half - 4f64.ln()).abs(), 4.0 * f64::EPSILON, 0.0, f64::MIN_POSITIVE)
        .with_s(0.5);
    r.meta("w_half", w_half);
    out.push(r);
    let _ = set;
    Ok(out)
}

/// `inf_h s(1-s)(C^2-1) d^2 / (2h) + int_0^h F(P_r mu_s) dr` over the
/// configured `h`, with a trapezoid rule in `r`. Diagnostic only.
fn sigma_numerical(sc: &Scenario, geo: &Geo, k: usize, d: f64, c: f64, s: f64) -> Result<f64> {
    let set = &sc.config.settings.convexity;
    let n = set.sigma_panels.max(1);
    let mut best = f64::INFINITY;
    for &h in &set.h {
        let times: Vec<f64> = (0..=n).map(|j| h * j as f64 / n as f64).collect();
        let snaps = heat(sc, &geo.label, k, &geo.curve[k], &times)?;
        let f: Vec<f64> = snaps.iter().map(|m| fisher(&sc.flow.op, m, Frame::Left)).collect::<Result<_>>()?;
        let integral: f64 = f.windows(2).map(|w| 0.5 * (h / n as f64) * (w[0] + w[1])).sum();
        best = best.min(s * (1.0 - s) * (c * c - 1.0) * d * d / (2.0 * h) + integral);
    }
    Ok(best)
}

pub fn certify(sc: &Scenario) -> Result<Vec<CertReport>> {
    match &sc.config.settings.convexity.geodesic {
        None => Ok(vec![CertReport::degenerate(NAME, ANCHOR_HEATED, format!("{}: no geodesic", sc.name()), "no geodesic configured")]),
        Some(Geodesic::Displacement { from, to }) => displacement(sc, from, to),
        Some(Geodesic::RightTranslation { measure, u, cloud_atoms }) => right_translation(sc, measure, u, *cloud_atoms),
    }
}
