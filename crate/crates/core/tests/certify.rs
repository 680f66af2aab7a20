//! Certifier behaviour on small scenarios: verdicts follow the curvature,
//! and suites resolve as documented.

use carnot_core::certify::{resolve_suite, run_suite, CertReport, Scenario, Verdict};
use carnot_core::runner::ConfigFile;

fn plane(curvature: &str, suite: &str) -> Scenario {
    let text = format!(
        r#"
[[scenario]]
name = "p"
model = {{ family = "abelian_box", dimension = 2 }}
chart = {{ cells = [40, 40], half = 3.0 }}
curvature = {curvature}
suite = [{suite}]
time_grid = [0.05, 0.1]

[[scenario.functions]]
name = "bump"
function = {{ kind = "gaussian", width = 0.7 }}

[[scenario.functions]]
name = "x_bump"
function = {{ kind = "monomial", powers = [1, 0], width = 0.8 }}

[[scenario.measures]]
name = "a"
measure = {{ kind = "gaussian", center = [-0.5, 0.0], sigma = 0.3 }}

[[scenario.measures]]
name = "b"
measure = {{ kind = "gaussian", center = [0.5, 0.0], sigma = 0.3 }}

[scenario.settings.contraction]
pairs = [["a", "b"]]
"#
    );
    let cfg = ConfigFile::parse(&text, "inline").unwrap();
    Scenario::build(cfg.scenario.into_iter().next().unwrap()).unwrap()
}

fn run(sc: &mut Scenario) -> Vec<CertReport> {
    let suite = sc.config.suite.clone();
    run_suite(sc, &suite).unwrap().reports
}

fn by<'a>(rs: &'a [CertReport], name: &str) -> Vec<&'a CertReport> {
    rs.iter().filter(|r| r.name == name).collect()
}

#[test]
fn flat_curvature_passes_and_subunit_curvature_fails() {
    let suite = r#""gradient_contraction", "variance_poincare", "w_contraction""#;
    let good = run(&mut plane("{ kind = \"constant\", c = 1.0 }", suite));
    assert!(good.iter().all(|r| r.verdict != Verdict::Fail), "{:#?}", good.iter().filter(|r| r.verdict == Verdict::Fail).collect::<Vec<_>>());
    let bad = run(&mut plane("{ kind = \"constant\", c = 0.8 }", suite));
    for name in ["gradient_contraction", "w_contraction"] {
        assert!(by(&bad, name).iter().any(|r| r.verdict == Verdict::Fail), "{name} did not fail");
    }
}

#[test]
fn larger_curvature_only_adds_slack() {
    let suite = r#""gradient_contraction""#;
    let a = run(&mut plane("{ kind = \"constant\", c = 1.0 }", suite));
    let b = run(&mut plane("{ kind = \"constant\", c = 1.5 }", suite));
    let pick = |rs: &[CertReport]| -> Vec<(String, f64)> {
        rs.iter()
            .filter(|r| r.anchor.contains("gradient bound"))
            .map(|r| (r.case.clone(), r.slack / r.scale))
            .collect()
    };
    let (pa, pb) = (pick(&a), pick(&b));
    assert_eq!(pa.len(), 4);
    for ((ca, sa), (cb, sb)) in pa.iter().zip(&pb) {
        assert_eq!(ca, cb);
        assert!(sb >= sa, "{ca}: {sb} < {sa}");
    }
}

#[test]
fn estimated_curvature_on_the_plane_is_flat() {
    let mut sc = plane("{ kind = \"estimated\" }", r#""gradient_contraction""#);
    let out = run_suite(&mut sc, &["gradient_contraction".to_string()]).unwrap();
    let table = out.c_hat.unwrap();
    // witnesses only approach c★ = 1 from below on a commutative group
    for row in &table.rows {
        assert!(row.c_hat > 0.8 && row.c_hat <= 1.0 + 1e-2, "{row:?}");
    }
    assert_eq!(sc.curvature().unwrap().eval(0.1).unwrap(), 1.0);
    assert!(out.reports.iter().all(|r| r.verdict != Verdict::Fail));
    assert!(out.timings.contains_key("calculus_self_checks"));
}

#[test]
fn suite_resolution() {
    let all = resolve_suite(&["all".to_string()]).unwrap();
    assert_eq!(all.len(), 10);
    assert_eq!(all[0], "calculus_self_checks");
    let some = resolve_suite(&["evi".to_string(), "gradient_contraction".to_string()]).unwrap();
    assert_eq!(some, vec!["gradient_contraction", "evi"]);
    assert!(resolve_suite(&["nope".to_string()]).is_err());
}

#[test]
fn reports_are_canonical_and_indexed() {
    let rs = run(&mut plane("{ kind = \"constant\", c = 1.0 }", r#""w_contraction""#));
    let mut seen = std::collections::BTreeMap::new();
    for r in &rs {
        let next = seen.entry(r.name.clone()).or_insert(0);
        assert_eq!(r.index, *next);
        *next += 1;
    }
    assert!(rs.windows(2).all(|w| (&w[0].name, w[0].index) < (&w[1].name, w[1].index)));
    assert!(rs.iter().any(|r| r.name == "calculus_self_checks"));
    assert_eq!(by(&rs, "w_contraction").len(), 6);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let text = r#"
[[scenario]]
name = "bad"
model = { family = "abelian_box", dimension = 2 }
chart = { cells = [16, 16], half = 1.0 }
curvature = { kind = "constant", c = 1.0 }
time_grid = [0.1]
window_margin = 0.7
"#;
    let cfg = ConfigFile::parse(text, "inline").unwrap();
    assert!(Scenario::build(cfg.scenario.into_iter().next().unwrap()).is_err());
    let err = ConfigFile::parse("[[scenario]]\nname = 3\n", "x.toml").unwrap_err().to_string();
    assert!(err.contains("x.toml:2:"), "{err}");
}
