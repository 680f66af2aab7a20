use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::heat::GridChart;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Degenerate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Degenerate => "degenerate",
        }
    }
}

/// Relative tolerances used by the certifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub pointwise_rel: f64,
    pub integral_rel: f64,
    pub ot_rel: f64,
    /// Submultiplicativity of the estimated curvature.
    pub submult_rel: f64,
    /// Heat kernel lower bound.
    pub kernel_rel: f64,
    /// Values whose magnitude is below `noise_floor * field scale` are
    /// treated as zero.
    pub noise_floor: f64,
    /// Pointwise checks skip nodes below `pointwise_floor * window scale`,
    /// where the flow's solver residual dominates the values.
    pub pointwise_floor: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            pointwise_rel: 5e-2,
            integral_rel: 1e-2,
            ot_rel: 2e-2,
            submult_rel: 2e-2,
            kernel_rel: 2e-2,
            noise_floor: 1e-12,
            pointwise_floor: 1e-6,
        }
    }
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<()> {
        let rel = [
            ("pointwise_rel", self.pointwise_rel),
            ("integral_rel", self.integral_rel),
            ("ot_rel", self.ot_rel),
            ("submult_rel", self.submult_rel),
            ("kernel_rel", self.kernel_rel),
        ];
        for (name, v) in rel {
            if !(v > 0.0 && v <= 0.2) {
                return Err(Error::Config(format!("tolerance {name} = {v} must lie in (0, 0.2]")));
            }
        }
        if !(self.noise_floor > 0.0 && self.noise_floor < 1e-3) {
            return Err(Error::Config(format!("noise_floor = {} must lie in (0, 1e-3)", self.noise_floor)));
        }
        if !(self.pointwise_floor >= self.noise_floor && self.pointwise_floor < 1e-2) {
            return Err(Error::Config("pointwise_floor must lie in [noise_floor, 1e-2)".into()));
        }
        Ok(())
    }
}

/// One checked inequality instance `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub name: String,
    pub anchor: String,
    pub case: String,
    /// Canonical position within the certifier's output.
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub scale: f64,
    pub verdict: Verdict,
    pub window: String,
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub metadata: BTreeMap<String, Value>,
}

/// `slack = rhs - lhs`; pass iff `slack >= -tol * max(|lhs|, |rhs|, floor)`,
/// degenerate when both sides are below `floor`.
pub fn judge(lhs: f64, rhs: f64, tol: f64, floor: f64) -> (f64, f64, Verdict) {
    let slack = rhs - lhs;
    let mag = lhs.abs().max(rhs.abs());
    if !(slack.is_finite()) && !(lhs == f64::NEG_INFINITY || rhs == f64::INFINITY) {
        return (slack, mag, Verdict::Fail);
    }
    if mag < floor {
        return (slack, floor, Verdict::Degenerate);
    }
    let scale = mag.max(floor);
    let v = if slack >= -tol * scale { Verdict::Pass } else { Verdict::Fail };
    (slack, scale, v)
}

impl CertReport {
    pub fn new(name: &str, anchor: &str, case: impl Into<String>, lhs: f64, rhs: f64, tol: f64, floor: f64) -> Self {
        let (slack, scale, verdict) = judge(lhs, rhs, tol, floor);
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            case: case.into(),
            index: 0,
            lhs,
            rhs,
            slack,
            tolerance: tol,
            scale,
            verdict,
            window: String::new(),
            t: None,
            s: None,
            h: None,
            metadata: BTreeMap::new(),
        }
    }

    /// A report that records an unsupported or vacuous case.
    pub fn degenerate(name: &str, anchor: &str, case: impl Into<String>, reason: &str) -> Self {
        let mut r = Self::new(name, anchor, case, 0.0, 0.0, 0.0, 1.0);
        r.verdict = Verdict::Degenerate;
        r.meta("reason", reason);
        r
    }

    pub fn meta(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        let value = serde_json::to_value(v).unwrap_or(Value::Null);
        self.metadata.insert(key.to_string(), value);
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_window(mut self, w: impl Into<String>) -> Self {
        self.window = w.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// Worst node of a pointwise inequality `lhs_i <= rhs_i` over `nodes`.
/// Nodes with `max(|lhs|, |rhs|)` below `floor_rel` times its window
/// maximum are skipped.
#[allow(clippy::too_many_arguments)]
pub fn pointwise_report(
    name: &str,
    anchor: &str,
    case: impl Into<String>,
    lhs: &[f64],
    rhs: &[f64],
    nodes: &[usize],
    tol: f64,
    floor_rel: f64,
    chart: &GridChart<f64>,
) -> CertReport {
    let field_scale = nodes
        .iter()
        .map(|&k| lhs[k].abs().max(rhs[k].abs()))
        .fold(0.0, f64::max);
    let floor = (floor_rel * field_scale).max(f64::MIN_POSITIVE);
    let mut worst: Option<(f64, usize)> = None;
    let mut skipped = 0usize;
    for &k in nodes {
        let mag = lhs[k].abs().max(rhs[k].abs());
        if mag < floor || field_scale == 0.0 {
            skipped += 1;
            continue;
        }
        let rel = (rhs[k] - lhs[k]) / mag;
        if worst.is_none_or(|(w, _)| rel < w) {
            worst = Some((rel, k));
        }
    }
    let case = case.into();
    let mut r = match worst {
        None => {
            let mut r = CertReport::degenerate(name, anchor, case, "all window values below the noise floor");
            r.window = String::new();
            r
        }
        Some((_, k)) => {
            let mut r = CertReport::new(name, anchor, case, lhs[k], rhs[k], tol, floor);
            r.meta("worst_node", chart.node(k).coords);
            r
        }
    };
    r.meta("nodes_checked", nodes.len() - skipped);
    r.meta("nodes_below_floor", skipped);
    r.meta("boundary_excluded", chart.len() - nodes.len());
    r
}

/// Assigns canonical indices and orders reports by `(name, index)`.
pub fn canonicalize(reports: &mut Vec<CertReport>) {
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    for r in reports.iter_mut() {
        let c = counters.entry(r.name.clone()).or_insert(0);
        r.index = *c;
        *c += 1;
    }
    reports.sort_by(|a, b| a.name.cmp(&b.name).then(a.index.cmp(&b.index)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert_eq!(judge(1.0, 1.0, 1e-2, 1e-12).2, Verdict::Pass);
        assert_eq!(judge(1.005, 1.0, 1e-2, 1e-12).2, Verdict::Pass);
        assert_eq!(judge(1.02, 1.0, 1e-2, 1e-12).2, Verdict::Fail);
        assert_eq!(judge(1e-15, 0.0, 1e-2, 1e-12).2, Verdict::Degenerate);
        assert_eq!(judge(f64::NAN, 1.0, 1e-2, 1e-12).2, Verdict::Fail);
    }

    #[test]
    fn loosening_never_flips_pass_to_fail() {
        for &(l, r) in &[(1.0, 0.97), (2.0, 2.1), (-1.0, -1.04), (0.3, 0.0)] {
            let mut passed = false;
            for tol in [1e-3, 1e-2, 5e-2, 0.1, 0.2] {
                let v = judge(l, r, tol, 1e-12).2;
                if passed {
                    assert_ne!(v, Verdict::Fail);
                }
                passed |= v == Verdict::Pass;
            }
        }
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceSpec::default().validate().is_ok());
        let bad = ToleranceSpec {
            ot_rel: 0.5,
            ..ToleranceSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
