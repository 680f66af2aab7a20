//! Pointwise gradient bound, the estimate `c_hat`, and its structure.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::functionals::CurvatureFn;
use crate::group::GroupFamily;
use crate::heat::Frame;

use super::report::{pointwise_report, CertReport};
use super::scenario::Scenario;

pub const NAME: &str = "gradient_contraction";
const ANCHOR: &str = "weak Bakry–Émery gradient bound Γ(P_t f) ≤ c²(t) P_t Γ(f)";
const ANCHOR_ONE: &str = "c★ ≥ 1, with equality iff the group is commutative";
const ANCHOR_SUB: &str = "submultiplicativity c★(s+t) ≤ c★(s) c★(t)";
const ANCHOR_EXP: &str = "exponential bound c★(t) ≤ M e^{-Kt}";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CHatRow {
    pub t: f64,
    pub c_hat: f64,
    pub witness: String,
}

/// `c_hat(t)` on the positive part of the time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CHatTable {
    pub scenario: String,
    pub rows: Vec<CHatRow>,
    /// Envelope `M e^{-K t}` from a log-linear fit, with `M` raised until it
    /// dominates every row.
    pub m: f64,
    pub k: f64,
}

/// Boxes hold charts of Carnot groups; tori are compact and carry no dilations.
pub(crate) fn dilation_invariant(sc: &Scenario) -> bool {
    sc.model().family() != GroupFamily::AbelianTorus
}

impl CHatTable {
    /// Piecewise linear `c_hat` with the knot `c_hat(0) = 1`. On dilation
    /// invariant groups `c★` is one constant for all `t > 0`, so the best
    /// estimate of it is the constant `max_t c_hat(t)`, valid at every `t`.
    pub fn curvature(&self, dilation_invariant: bool) -> Result<CurvatureFn> {
        if dilation_invariant {
            return CurvatureFn::constant(self.rows.iter().map(|r| r.c_hat).fold(1.0, f64::max));
        }
        let mut knots = vec![0.0];
        let mut values = vec![1.0];
        for r in &self.rows {
            knots.push(r.t);
            values.push(r.c_hat);
        }
        CurvatureFn::tabulated(knots, values)
    }

    pub fn lookup(&self, t: f64) -> Option<f64> {
        self.rows.iter().find(|r| (r.t - t).abs() <= 1e-12).map(|r| r.c_hat)
    }
}

struct Case {
    name: String,
    /// Per time: `Gamma(P_t f)`, `P_t Gamma(f)`, checked nodes, ratio sup.
    per_t: Vec<(Vec<f64>, Vec<f64>, Vec<usize>, f64)>,
    constant: bool,
}

fn evaluate(sc: &Scenario, name: &str, times: &[f64]) -> Result<Case> {
    let floor = sc.tol().pointwise_floor;
    let op = &sc.flow.op;
    let pf = sc.function_flow(name, times)?;
    let f = sc.field(name)?;
    let gam = op.gamma(&f, Frame::Left)?;
    let pg = sc.flow_cached(&format!("gamma:{name}"), || Ok(gam.clone()), times)?;
    let mut per_t = Vec::with_capacity(times.len());
    for (k, _) in times.iter().enumerate() {
        let lhs = op.gamma(&pf[k], Frame::Left)?.values;
        let rhs = pg[k].values.clone();
        let peak = sc.window_nodes.iter().map(|&i| rhs[i]).fold(0.0, f64::max);
        let nodes: Vec<usize> = sc
            .window_nodes
            .iter()
            .copied()
            .filter(|&i| peak > 0.0 && rhs[i] >= floor * peak)
            .collect();
        let ratio = nodes.iter().map(|&i| (lhs[i] / rhs[i]).sqrt()).fold(0.0, f64::max);
        per_t.push((lhs, rhs, nodes, ratio));
    }
    Ok(Case {
        name: name.to_string(),
        per_t,
        constant: sc.function(name)?.is_constant(),
    })
}

fn selected(sc: &Scenario) -> Vec<String> {
    match &sc.config.settings.gradient.functions {
        Some(l) => l.clone(),
        None => sc.config.functions.iter().map(|f| f.name.clone()).collect(),
    }
}

/// Least squares `log c = log M - K t`, then `M` raised to dominate.
fn envelope(rows: &[CHatRow]) -> (f64, f64) {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return (rows.first().map_or(1.0, |r| r.c_hat), 0.0);
    }
    let (st, sl) = rows.iter().fold((0.0, 0.0), |(a, b), r| (a + r.t, b + r.c_hat.ln()));
    let (mt, ml) = (st / n, sl / n);
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        num += (r.t - mt) * (r.c_hat.ln() - ml);
        den += (r.t - mt).powi(2);
    }
    let k = -num / den;
    let m = rows.iter().map(|r| r.c_hat * (k * r.t).exp()).fold(0.0, f64::max);
    (m, k)
}

/// Runs the pointwise checks against the scenario curvature, or against
/// `c_hat` itself when the curvature is estimated.
pub fn certify(sc: &Scenario) -> Result<(Vec<CertReport>, CHatTable)> {
    let times: Vec<f64> = sc.config.time_grid.iter().copied().filter(|&t| t > 0.0).collect();
    let names = selected(sc);
    let cases: Vec<Case> = names
        .par_iter()
        .map(|n| evaluate(sc, n, &times))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mut best = (0.0, String::new());
        for c in cases.iter().filter(|c| !c.constant) {
            if c.per_t[k].3 > best.0 {
                best = (c.per_t[k].3, c.name.clone());
            }
        }
        rows.push(CHatRow {
            t,
            c_hat: best.0,
            witness: best.1,
        });
    }
    let (m, kfit) = envelope(&rows);
    let table = CHatTable {
        scenario: sc.name().to_string(),
        rows,
        m,
        k: kfit,
    };
    let estimated = sc.curvature_estimated();
    let curv = if estimated { table.curvature(dilation_invariant(sc))? } else { sc.curvature()?.clone() };
    let tol = sc.tol();
    let chart = &sc.chart;
    let mut reports = Vec::new();
    for c in &cases {
        for (k, &t) in times.iter().enumerate() {
            let (lhs, rhs, nodes, ratio) = &c.per_t[k];
            let c2 = curv.eval(t)?.powi(2);
            let scaled: Vec<f64> = rhs.iter().map(|v| c2 * v).collect();
            let mut r = pointwise_report(
                NAME,
                ANCHOR,
                format!("{}: f={} t={t}", sc.name(), c.name),
                lhs,
                &scaled,
                nodes,
                tol.pointwise_rel,
                tol.pointwise_floor,
                chart,
            )
            .with_t(t)
            .with_window(sc.window_label());
            r.meta("ratio_sup", ratio);
            r.meta("ratio_floor_excluded", sc.window_nodes.len() - nodes.len());
            r.meta("c", c2.sqrt());
            reports.push(r);
        }
    }
    if !sc.model().is_abelian() {
        for row in &table.rows {
            let mut r = CertReport::new(NAME, ANCHOR_ONE, format!("{}: c_hat(t) >= 1 t={}", sc.name(), row.t), 1.0, row.c_hat, 0.0, tol.noise_floor)
                .with_t(row.t);
            r.meta("witness", &row.witness);
            reports.push(r);
        }
        let (best, at) = table
            .rows
            .iter()
            .fold((0.0, 0.0), |(b, t), r| if r.c_hat > b { (r.c_hat, r.t) } else { (b, t) });
        let wmin = sc.config.settings.gradient.witness_min;
        let mut r = CertReport::new(NAME, ANCHOR_ONE, format!("{}: noncommutativity witness max c_hat >= {wmin}", sc.name()), wmin, best, 0.0, tol.noise_floor)
            .with_t(at);
        r.meta("witness", table.rows.iter().find(|x| x.t == at).map(|x| x.witness.clone()));
        reports.push(r);
    }
    for (i, a) in table.rows.iter().enumerate() {
        for b in &table.rows[i..] {
            let sum = a.t + b.t;
            if let Some(ab) = table.rows.iter().find(|r| (r.t - sum).abs() <= 1e-9 * sum) {
                let r = CertReport::new(
                    NAME,
                    ANCHOR_SUB,
                    format!("{}: s={} t={}", sc.name(), a.t, b.t),
                    ab.c_hat,
                    a.c_hat * b.c_hat,
                    tol.submult_rel,
                    tol.noise_floor,
                )
                .with_s(a.t)
                .with_t(b.t);
                reports.push(r);
            }
        }
    }
    if let Some(last) = table.rows.last() {
        let mut r = CertReport::new(
            NAME,
            ANCHOR_EXP,
            format!("{}: envelope at t={}", sc.name(), last.t),
            last.c_hat,
            m * (-kfit * last.t).exp(),
            tol.pointwise_rel,
            tol.noise_floor,
        )
        .with_t(last.t);
        r.meta("M", m);
        r.meta("K", kfit);
        reports.push(r);
    }
    Ok((reports, table))
}

