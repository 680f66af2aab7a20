//! Numerical certificates for the Bakry–Émery and entropic inequalities on
//! scenario grids.

pub mod calculus;
pub mod contraction;
pub mod convexity;
pub mod entropy;
pub mod gradient;
pub mod harnack;
pub mod poincare;
pub mod report;
pub mod scenario;
pub mod settings;
pub mod velocity;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use gradient::{CHatRow, CHatTable};
pub use report::{canonicalize, judge, CertReport, ToleranceSpec, Verdict};
pub use scenario::{Scenario, ScenarioConfig};

type Certifier = fn(&Scenario) -> Result<Vec<CertReport>>;

fn gradient_only(sc: &Scenario) -> Result<Vec<CertReport>> {
    gradient::certify(sc).map(|r| r.0)
}

/// Every certifier in suite order.
pub const CERTIFIERS: [(&str, Certifier); 10] = [
    (calculus::NAME, calculus::certify),
    (gradient::NAME, gradient_only),
    (contraction::NAME_W, contraction::certify_w_contraction),
    (poincare::NAME, poincare::certify),
    (harnack::NAME_LH, harnack::certify_log_harnack),
    (harnack::NAME_KERNEL, harnack::certify_kernel_lower_bound),
    (entropy::NAME, entropy::certify),
    (velocity::NAME, velocity::certify),
    (contraction::NAME_EVI, contraction::certify_evi),
    (convexity::NAME, convexity::certify),
];

/// Resolve a suite selection; `"all"` selects every certifier.
pub fn resolve_suite(names: &[String]) -> Result<Vec<&'static str>> {
    if names.iter().any(|n| n == "all") {
        return Ok(CERTIFIERS.iter().map(|c| c.0).collect());
    }
    for n in names {
        if !CERTIFIERS.iter().any(|c| c.0 == n) {
            return Err(Error::Config(format!("unknown certifier {n}")));
        }
    }
    Ok(CERTIFIERS.iter().map(|c| c.0).filter(|c| names.iter().any(|n| n == c)).collect())
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<CertReport>,
    pub c_hat: Option<CHatTable>,
    /// Wall-clock seconds per certifier.
    pub timings: BTreeMap<String, f64>,
}

/// Run the selected certifiers on one scenario.
///
/// The calculus self-checks always run first; if any of them fails the
/// remaining certifiers are reported as skipped. With an estimated
/// curvature the gradient certifier runs next and its `c_hat` table becomes
/// the curvature function of the scenario (see [`CHatTable::curvature`]).
pub fn run_suite(sc: &mut Scenario, names: &[String]) -> Result<SuiteOutcome> {
    let selected = resolve_suite(names)?;
    let mut timings = BTreeMap::new();
    let mut reports = Vec::new();

    let clock = Instant::now();
    let calc = calculus::certify(sc)?;
    timings.insert(calculus::NAME.to_string(), clock.elapsed().as_secs_f64());
    let calc_ok = calc.iter().all(|r| r.verdict != Verdict::Fail);
    reports.extend(calc);
    let rest: Vec<&str> = selected.into_iter().filter(|&n| n != calculus::NAME).collect();
    if !calc_ok {
        for n in rest {
            reports.push(CertReport::degenerate(n, "", format!("{}: skipped", sc.name()), "calculus self-checks failed"));
        }
        canonicalize(&mut reports);
        return Ok(SuiteOutcome { reports, c_hat: None, timings });
    }

    let mut c_hat = None;
    if rest.contains(&gradient::NAME) || sc.curvature_estimated() {
        let clock = Instant::now();
        let (g, table) = gradient::certify(sc)?;
        timings.insert(gradient::NAME.to_string(), clock.elapsed().as_secs_f64());
        if sc.curvature_estimated() {
            sc.set_curvature(table.curvature(gradient::dilation_invariant(sc))?);
        }
        reports.extend(g);
        c_hat = Some(table);
    }

    let sc: &Scenario = sc;
    let jobs: Vec<(&str, Certifier)> = CERTIFIERS
        .iter()
        .copied()
        .filter(|(n, _)| *n != gradient::NAME && rest.contains(n))
        .collect();
    let done: Vec<(Vec<CertReport>, f64)> = jobs
        .par_iter()
        .map(|(_, f)| {
            let clock = Instant::now();
            f(sc).map(|r| (r, clock.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    for ((n, _), (r, dt)) in jobs.iter().zip(done) {
        timings.insert(n.to_string(), dt);
        reports.extend(r);
    }
    canonicalize(&mut reports);
    Ok(SuiteOutcome { reports, c_hat, timings })
}
