//! Wang's log-Harnack inequality and the heat kernel lower bound.

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::group::{GroupFamily, GroupPoint};
use crate::heat::KernelInit;

use super::report::{pointwise_report, CertReport};
use super::scenario::Scenario;

pub const NAME_LH: &str = "log_harnack";
pub const NAME_KERNEL: &str = "kernel_lower_bound";
const ANCHOR_LH: &str = "Wang log-Harnack P_t log(f+ε)(y) ≤ log(P_t f(x)+ε) + d²(x,y)/(4 I₋₂(t))";
const ANCHOR_KERNEL: &str = "heat kernel lower bound p_{2t}[y](x) ≥ exp(−d²(x,y)/(4 I₋₂(t))) for m ∈ P(X)";
const ANCHOR_ORACLE: &str = "heat kernel on the flat torus equals the theta series";
const ANCHOR_SYM: &str = "heat kernel symmetry p_t[x](y) = p_t[y](x)";

/// `(x, y)` node pairs in the window, the first with `x = y`.
fn sample_pairs(sc: &Scenario) -> Result<Vec<(usize, usize)>> {
    let set = &sc.config.settings.log_harnack;
    let mut rng = sc.rng(0x4c48);
    let nodes = &sc.window_nodes;
    let n = sc.chart.ndim();
    let mut idx = vec![0usize; n];
    let mut out = Vec::with_capacity(set.pairs);
    let centre = nodes[nodes.len() / 2];
    out.push((centre, centre));
    let mut guard = 0;
    while out.len() < set.pairs && guard < 100_000 {
        guard += 1;
        let x = nodes[rng.gen_range(0..nodes.len())];
        let mut p = sc.chart.node(x).coords;
        for c in p.iter_mut() {
            *c += rng.gen_range(-set.max_offset..=set.max_offset);
        }
        let p = GroupPoint::new(p);
        if !sc.chart.contains(&p.coords) {
            continue;
        }
        let y = sc.chart.nearest_index(&p)?;
        sc.chart.multi_index(y, &mut idx);
        if sc.window.contains(&idx) {
            out.push((x, y));
        }
    }
    Ok(out)
}

fn log_flow(sc: &Scenario, name: &str, eps: f64, times: &[f64]) -> Result<std::sync::Arc<Vec<crate::heat::ScalarField<f64>>>> {
    sc.flow_cached(&format!("log:{name}:{eps}"), || Ok(sc.field(name)?.map(|v| (v + eps).ln())), times)
}

pub fn certify_log_harnack(sc: &Scenario) -> Result<Vec<CertReport>> {
    let set = &sc.config.settings.log_harnack;
    let tol = sc.tol();
    let curv = sc.curvature()?;
    let names: Vec<String> = match &set.functions {
        Some(l) => l.clone(),
        None => sc
            .config
            .functions
            .iter()
            .filter(|f| f.function.is_nonnegative() && !f.function.is_constant())
            .map(|f| f.name.clone())
            .collect(),
    };
    let pairs = sample_pairs(sc)?;
    let times = &set.times;
    let mut jobs = Vec::new();
    for n in &names {
        for &e in set.eps.iter().chain(&set.diagnostic_eps) {
            jobs.push((n.clone(), e));
        }
    }
    jobs.par_iter()
        .map(|(n, e)| log_flow(sc, n, *e, times).map(|_| ()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for name in &names {
        let pf = sc.function_flow(name, times)?;
        for (k, &t) in times.iter().enumerate() {
            let im2 = curv.moment(-2.0, t)?;
            let slack_of = |eps: f64, x: usize, y: usize| -> Result<(f64, f64, f64)> {
                let pl = log_flow(sc, name, eps, times)?;
                let d = sc.metric.dist(&sc.chart.node(x).coords, &sc.chart.node(y).coords);
                let lhs = pl[k].values[y];
                let rhs = (pf[k].values[x] + eps).ln() + d * d / (4.0 * im2);
                Ok((lhs, rhs, d))
            };
            for &eps in &set.eps {
                for &(x, y) in &pairs {
                    let (lhs, rhs, d) = slack_of(eps, x, y)?;
                    let mut r = CertReport::new(
                        NAME_LH,
                        ANCHOR_LH,
                        format!("{}: f={name} t={t} eps={eps} x={x} y={y}", sc.name()),
                        lhs,
                        rhs,
                        tol.integral_rel,
                        tol.noise_floor,
                    )
                    .with_t(t)
                    .with_window(sc.window_label());
                    r.meta("eps", eps);
                    r.meta("d", d);
                    for &de in &set.diagnostic_eps {
                        let (l, rr, _) = slack_of(de, x, y)?;
                        r.meta(&format!("slack_eps_{de}"), rr - l);
                    }
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

/// Theta series for `p_s` on a flat torus, `s` the heat time.
fn theta(x: &[f64], y: &[f64], periods: &[f64], s: f64, terms: usize) -> f64 {
    let k = terms as i64;
    let mut p = 1.0;
    for a in 0..x.len() {
        let l = periods[a];
        let d = x[a] - y[a];
        let sum: f64 = (-k..=k).map(|j| (-(d - j as f64 * l).powi(2) / (4.0 * s)).exp()).sum();
        p *= sum / (4.0 * std::f64::consts::PI * s).sqrt();
    }
    p
}

pub fn certify_kernel_lower_bound(sc: &Scenario) -> Result<Vec<CertReport>> {
    let periods = match sc.model().periods() {
        Some(p) if sc.model().family() == GroupFamily::AbelianTorus => p.to_vec(),
        _ => {
            return Ok(vec![CertReport::degenerate(
                NAME_KERNEL,
                ANCHOR_KERNEL,
                format!("{}: unsupported", sc.name()),
                "the bound needs a probability reference measure; this scenario is not a unit torus",
            )]);
        }
    };
    let vol: f64 = periods.iter().product();
    if (vol - 1.0).abs() > 1e-12 {
        return Ok(vec![CertReport::degenerate(
            NAME_KERNEL,
            ANCHOR_KERNEL,
            format!("{}: unsupported", sc.name()),
            "torus volume differs from one, so m is not a probability measure",
        )]);
    }
    let set = &sc.config.settings.kernel;
    let tol = sc.tol();
    let curv = sc.curvature()?;
    let chart = &sc.chart;
    let o = sc.model().identity();
    let y0 = chart.node(chart.nearest_index(&o)?);
    let xs = match &set.symmetry_point {
        Some(p) => GroupPoint::new(p.clone()),
        None => GroupPoint::new(periods.iter().map(|l| 0.3 * l).collect()),
    };
    let x_node = chart.nearest_index(&xs)?;
    let xs = chart.node(x_node);
    let y_node = chart.nearest_index(&y0)?;
    let all: Vec<usize> = (0..chart.len()).collect();
    let per_t: Vec<Vec<CertReport>> = set
        .times
        .par_iter()
        .map(|&t| -> Result<Vec<CertReport>> {
            let im2 = curv.moment(-2.0, t)?;
            let p = sc.flow.heat_kernel(&y0, 2.0 * t, KernelInit::Delta)?;
            let mut bound = Vec::with_capacity(chart.len());
            let mut worst_rel = 0.0f64;
            for k in 0..chart.len() {
                let x = chart.node(k);
                let d = sc.metric.dist(&x.coords, &y0.coords);
                bound.push((-d * d / (4.0 * im2)).exp());
                let th = theta(&x.coords, &y0.coords, &periods, 2.0 * t, set.theta_terms);
                worst_rel = worst_rel.max((p.values[k] - th).abs() / th);
            }
            let label = format!("{}: t={t}", sc.name());
            let mut r = pointwise_report(NAME_KERNEL, ANCHOR_KERNEL, label.clone(), &bound, &p.values, &all, tol.kernel_rel, tol.noise_floor, chart)
                .with_t(t);
            r.meta("I_minus2", im2);
            let mut o = CertReport::new(NAME_KERNEL, ANCHOR_ORACLE, label.clone(), worst_rel, set.oracle_rel, 0.0, tol.noise_floor).with_t(2.0 * t);
            o.tolerance = set.oracle_rel;
            o.meta("form", "max relative deviation from the theta series");
            let q = sc.flow.heat_kernel(&xs, 2.0 * t, KernelInit::Delta)?;
            let (a, b) = (p.values[x_node], q.values[y_node]);
            let mut s = CertReport::new(NAME_KERNEL, ANCHOR_SYM, label, (a - b).abs(), set.symmetry_tol * a.abs().max(b.abs()), 0.0, f64::MIN_POSITIVE)
                .with_t(2.0 * t);
            s.tolerance = set.symmetry_tol;
            s.meta("p_y_at_x", a);
            s.meta("p_x_at_y", b);
            Ok(vec![r, o, s])
        })
        .collect::<Result<_>>()?;
    Ok(per_t.into_iter().flatten().collect())
}
