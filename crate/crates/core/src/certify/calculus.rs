//! Discrete calculus self-checks on the scenario model. These run before any
//! inequality certifier.

use std::sync::Arc;

use crate::error::Result;
use crate::group::{GroupFamily, GroupModel};
use crate::heat::{Frame, GridChart, HeatFlow, HeatOperator, ScalarField, SmoothKernel, Stepping};

use super::report::CertReport;
use super::scenario::Scenario;
use super::settings::CalculusSettings;

pub const NAME: &str = "calculus_self_checks";
const ANCHOR_AB: &str = "differentiation formula ∂_s A_t[f;φ](s) = B_t[f;φ](s)";
const ANCHOR_LAP: &str = "Laplacian chain rule Δ(φ∘f) = φ′(f)Δf + φ″(f)Γ(f)";
const ANCHOR_GAMMA: &str = "Γ chain rule Γ(φ(f), f) = φ′(f)Γ(f)";
const ANCHOR_MOLL: &str = "Laplacian of the semigroup mollification −Δ(h^ε f) = (1/ε)∫P_{εr}f κ′(r)dr";

struct Level {
    flow: HeatFlow<f64>,
    nodes: Vec<usize>,
    f: ScalarField<f64>,
    phi: ScalarField<f64>,
}

fn chart(model: &GroupModel<f64>, set: &CalculusSettings, cells: usize) -> Result<GridChart<f64>> {
    match model.family() {
        GroupFamily::AbelianTorus => GridChart::torus(model.clone(), vec![cells; model.dimension()]),
        _ => GridChart::centered_cube(model.clone(), set.half, cells),
    }
}

/// Smooth test data: Gaussian bumps on boxes, exponentials of cosines on
/// tori. Returns `(f, phi)`, with `phi` positive.
fn test_data(model: &GroupModel<f64>, set: &CalculusSettings) -> (Box<dyn Fn(&[f64]) -> f64 + Sync>, Box<dyn Fn(&[f64]) -> f64 + Sync>) {
    match model.periods() {
        Some(p) if model.family() == GroupFamily::AbelianTorus => {
            let tau = 2.0 * std::f64::consts::PI;
            let (p1, p2) = (p.to_vec(), p.to_vec());
            (
                Box::new(move |x| (0.5 * x.iter().zip(&p1).map(|(x, l)| (tau * x / l).cos()).sum::<f64>()).exp()),
                Box::new(move |x| (0.5 * x.iter().zip(&p2).map(|(x, l)| (tau * (x / l - 0.3)).cos()).sum::<f64>()).exp()),
            )
        }
        _ => {
            let w = set.width;
            (
                Box::new(move |x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * w * w)).exp()),
                Box::new(move |x| {
                    let d2: f64 = x.iter().enumerate().map(|(a, v)| (v - if a == 0 { 0.3 } else { 0.0 }).powi(2)).sum();
                    0.2 + (-d2 / (2.0 * (1.5 * w).powi(2))).exp()
                }),
            )
        }
    }
}

fn level(sc: &Scenario, set: &CalculusSettings, cells: usize) -> Result<Level> {
    let chart = Arc::new(chart(sc.model(), set, cells)?);
    let stepping = Stepping {
        dt_factor: sc.config.stepping.dt_factor,
        tolerance: sc.config.stepping.tolerance,
        ..Stepping::default()
    };
    let flow = HeatFlow::new(HeatOperator::assemble(chart.clone())?, stepping)?;
    let nodes = chart.window_indices(&chart.interior_window(sc.config.window_margin));
    let (f, phi) = test_data(sc.model(), set);
    Ok(Level {
        f: ScalarField::from_fn(chart.clone(), f),
        phi: ScalarField::from_fn(chart, phi),
        flow,
        nodes,
    })
}

/// Largest residual over the window and the scale it is measured against.
fn residual(lv: &Level, kind: &str) -> Result<(f64, f64)> {
    let op = &lv.flow.op;
    let f = &lv.f;
    let (phi, d1, d2): (fn(f64) -> f64, fn(f64) -> f64, fn(f64) -> f64) = match kind {
        "square" => (|r| r * r, |r| 2.0 * r, |_| 2.0),
        _ => (f64::sin, f64::cos, |r| -r.sin()),
    };
    let pf = f.map(phi);
    let (lhs, rhs) = if kind == "gamma" {
        let lhs = op.carre_du_champ(&pf, f, Frame::Left)?.values;
        let g = op.gamma(f, Frame::Left)?;
        let rhs: Vec<f64> = g.values.iter().zip(&f.values).map(|(g, v)| d1(*v) * g).collect();
        (lhs, rhs)
    } else {
        let lhs = op.sublaplacian_apply(&pf)?.values;
        let lf = op.sublaplacian_apply(f)?;
        let g = op.gamma(f, Frame::Left)?;
        let rhs: Vec<f64> = (0..f.values.len())
            .map(|k| d1(f.values[k]) * lf.values[k] + d2(f.values[k]) * g.values[k])
            .collect();
        (lhs, rhs)
    };
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &lv.nodes {
        res = res.max((lhs[k] - rhs[k]).abs());
        scale = scale.max(lhs[k].abs()).max(rhs[k].abs());
    }
    Ok((res, scale))
}

fn refinement(sc: &Scenario, set: &CalculusSettings, levels: &[Level; 2], kind: &str, anchor: &'static str) -> Result<CertReport> {
    let (rc, _) = residual(&levels[0], kind)?;
    let (rf, scale) = residual(&levels[1], kind)?;
    let label = format!("{}: {kind} cells={}->{}", sc.name(), set.cells[0], set.cells[1]);
    let mut r = if rf <= set.exact_floor * scale {
        let mut r = CertReport::new(NAME, anchor, label, rf, set.exact_floor * scale, 0.0, f64::MIN_POSITIVE);
        r.meta("form", "exact to rounding");
        r
    } else {
        let ratio = rc / rf;
        let mut r = CertReport::new(NAME, anchor, label, set.ratio_min, ratio, 0.0, f64::MIN_POSITIVE);
        r.meta("form", "residual ratio under halving");
        r
    };
    r.tolerance = set.ratio_min;
    r.meta("residual_coarse", rc);
    r.meta("residual_fine", rf);
    r.meta("scale", scale);
    Ok(r)
}

/// Squared ratio of the torus period to the box width, so the torus runs
/// the same number of relaxation times as a box.
fn time_scale(model: &GroupModel<f64>, set: &CalculusSettings) -> f64 {
    match model.periods() {
        Some(p) if model.family() == GroupFamily::AbelianTorus => {
            let l = p.iter().copied().fold(f64::INFINITY, f64::min);
            (l / (2.0 * set.half)).powi(2)
        }
        _ => 1.0,
    }
}

fn ab_formula(sc: &Scenario, set: &CalculusSettings, lv: &Level) -> Result<CertReport> {
    let scale = time_scale(sc.model(), set);
    let (t, ds) = (set.t * scale, set.ds * scale);
    let s = 0.5 * t;
    let op = &lv.flow.op;
    let vol = lv.f.chart.cell_volume();
    let pf = lv.flow.evolve_through(&lv.f, &[t - s - ds, t - s, t - s + ds])?;
    let pp = lv.flow.evolve_through(&lv.phi, &[s - ds, s, s + ds])?;
    let a = |g: &ScalarField<f64>, p: &ScalarField<f64>| -> f64 {
        0.5 * g.values.iter().zip(&p.values).map(|(g, p)| g * g * p).sum::<f64>() * vol
    };
    // A(s + ds) pairs P_{t-s-ds} f with P_{s+ds} phi.
    let da = (a(&pf[0], &pp[2]) - a(&pf[2], &pp[0])) / (2.0 * ds);
    let g = op.gamma(&pf[1], Frame::Left)?;
    let b: f64 = g.values.iter().zip(&pp[1].values).map(|(g, p)| g * p).sum::<f64>() * vol;
    let mut r = CertReport::new(NAME, ANCHOR_AB, format!("{}: t={t} s={s} ds={ds}", sc.name()), (da - b).abs(), set.ab_rel * b.abs(), 0.0, sc.tol().noise_floor)
        .with_t(t)
        .with_s(s);
    r.tolerance = set.ab_rel;
    r.meta("dA_ds", da);
    r.meta("B", b);
    Ok(r)
}

fn mollifier(sc: &Scenario, set: &CalculusSettings, lv: &Level) -> Result<CertReport> {
    let kernel = SmoothKernel::default();
    let eps = set.mollifier_eps * time_scale(sc.model(), set);
    let h = lv.flow.mollify_semigroup(&lv.f, eps, &kernel, set.mollifier_panels)?;
    let lhs = lv.flow.op.sublaplacian_apply(&h)?;
    let rhs = lv.flow.mollifier_laplacian_identity(&lv.f, eps, &kernel, set.mollifier_panels)?;
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &lv.nodes {
        res = res.max((lhs.values[k] - rhs.values[k]).abs());
        scale = scale.max(lhs.values[k].abs());
    }
    let mut r = CertReport::new(NAME, ANCHOR_MOLL, format!("{}: eps={eps}", sc.name()), res, set.ab_rel * scale, 0.0, sc.tol().noise_floor);
    r.tolerance = set.ab_rel;
    r.meta("scale", scale);
    r.meta("panels", set.mollifier_panels);
    Ok(r)
}

pub fn certify(sc: &Scenario) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.calculus;
    let levels = [level(sc, set, set.cells[0])?, level(sc, set, set.cells[1])?];
    Ok(vec![
        ab_formula(sc, set, &levels[0])?,
        refinement(sc, set, &levels, "square", ANCHOR_LAP)?,
        refinement(sc, set, &levels, "sine", ANCHOR_LAP)?,
        refinement(sc, set, &levels, "gamma", ANCHOR_GAMMA)?,
        mollifier(sc, set, &levels[1])?,
    ])
}
