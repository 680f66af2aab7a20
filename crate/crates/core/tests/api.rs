//! Public API of the numerical core against closed forms.

use std::f64::consts::PI;
use std::sync::Arc;

use carnot_core::functionals::{defect_w, entropy, fisher};
use carnot_core::group::GroupPoint;
use carnot_core::heat::{DensityField, Frame, GridChart, HeatFlow, HeatOperator, ScalarField};
use carnot_core::metric::CcMetric;
use carnot_core::transport::{w1_dual, w2_exact, PointCloudMeasure, TransportConfig};
use carnot_core::{Model, Point};

fn pt(c: &[f64]) -> Point {
    GroupPoint::from_f64(c)
}

#[test]
fn heisenberg_law_is_a_graded_group() {
    let h = Model::heisenberg();
    let (a, b, c) = (pt(&[0.3, -1.2, 0.5]), pt(&[2.0, 0.7, -0.1]), pt(&[-0.4, 0.9, 1.3]));
    let ab_c = h.multiply(&h.multiply(&a, &b).unwrap(), &c).unwrap();
    let a_bc = h.multiply(&a, &h.multiply(&b, &c).unwrap()).unwrap();
    for k in 0..3 {
        assert!((ab_c[k] - a_bc[k]).abs() < 1e-14);
    }
    // (a, b) -> z_a + z_b + (x_a y_b - y_a x_b) / 2
    let ab = h.multiply(&a, &b).unwrap();
    assert!((ab[2] - (0.5 - 0.1 + 0.5 * (0.3 * 0.7 - (-1.2) * 2.0))).abs() < 1e-14);
    let e = h.multiply(&a, &h.inverse(&a).unwrap()).unwrap();
    assert!(e.coords.iter().all(|v| v.abs() < 1e-15));
    let lam = 1.7;
    let lhs = h.dilate(lam, &ab).unwrap();
    let rhs = h.multiply(&h.dilate(lam, &a).unwrap(), &h.dilate(lam, &b).unwrap()).unwrap();
    for k in 0..3 {
        assert!((lhs[k] - rhs[k]).abs() < 1e-13);
    }
    assert_eq!(h.homogeneous_dimension(), 4);
    assert!(!h.is_abelian());
}

#[test]
fn cc_distance_closed_forms() {
    let h = Model::heisenberg();
    let m = CcMetric::closed_form(h.clone());
    let o = h.identity();
    // horizontal segments are geodesics; the centre is reached at 2 sqrt(pi |z|)
    assert!((m.distance(&o, &pt(&[0.6, -0.8, 0.0])).unwrap() - 1.0).abs() < 1e-12);
    for z in [0.1, 1.0, -2.5] {
        let d = m.distance(&o, &pt(&[0.0, 0.0, z])).unwrap();
        assert!((d - 2.0 * (PI * z.abs()).sqrt()).abs() < 1e-9, "z = {z}: {d}");
    }
    let (a, b, g) = (pt(&[0.2, 0.1, -0.3]), pt(&[-0.5, 0.4, 0.8]), pt(&[1.5, -2.0, 0.7]));
    let d = m.distance(&a, &b).unwrap();
    let dg = m.distance(&h.multiply(&g, &a).unwrap(), &h.multiply(&g, &b).unwrap()).unwrap();
    assert!((d - dg).abs() < 1e-9 * d);
    let lam = 0.6;
    let dl = m.distance(&h.dilate(lam, &a).unwrap(), &h.dilate(lam, &b).unwrap()).unwrap();
    assert!((dl - lam * d).abs() < 1e-9 * d);
    // strictly above the Euclidean length of the horizontal projection
    assert!(d > ((0.7f64).powi(2) + 0.3f64.powi(2)).sqrt());
}

#[test]
fn torus_distance_wraps() {
    let t = Model::torus(vec![1.0, 1.0]).unwrap();
    let m = CcMetric::closed_form(t);
    assert!((m.distance(&pt(&[0.05, 0.5]), &pt(&[0.95, 0.5])).unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn heat_flow_preserves_mass_and_bounds() {
    let chart = Arc::new(GridChart::centered_cube(Model::heisenberg(), 2.0, 16).unwrap());
    let flow = HeatFlow::with_defaults(HeatOperator::assemble(chart.clone()).unwrap());
    let f = ScalarField::from_fn(chart.clone(), |p| (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp());
    let g = flow.evolve(&f, 0.1).unwrap();
    assert!((g.integral() - f.integral()).abs() < 1e-8 * f.integral());
    assert!(g.max() <= f.max() + 1e-12);
    assert!(g.min() >= -1e-12);
    assert!(g.lp_norm(2.0) <= f.lp_norm(2.0) + 1e-12);
}

#[test]
fn torus_fourier_mode_decays_at_its_eigenvalue() {
    let chart = Arc::new(GridChart::torus(Model::torus(vec![1.0]).unwrap(), vec![128]).unwrap());
    let flow = HeatFlow::with_defaults(HeatOperator::assemble(chart.clone()).unwrap());
    let f = ScalarField::from_fn(chart.clone(), |p| (2.0 * PI * p[0]).cos());
    let t = 0.02;
    let g = flow.evolve(&f, t).unwrap();
    let decay = (-4.0 * PI * PI * t).exp();
    let k = 17;
    assert!((g.values[k] / f.values[k] - decay).abs() < 2e-3 * decay);
}

#[test]
fn gaussian_entropy_and_fisher() {
    let sigma = 0.5;
    let chart = Arc::new(GridChart::centered_cube(Model::abelian_box(2).unwrap(), 4.0, 128).unwrap());
    let mu = DensityField::normalized_from_fn(chart.clone(), |p| (-(p[0] * p[0] + p[1] * p[1]) / (2.0 * sigma * sigma)).exp()).unwrap();
    let ent = entropy(&mu).unwrap().value;
    let exact = -(2.0 * PI * std::f64::consts::E * sigma * sigma).ln();
    assert!((ent - exact).abs() < 1e-3, "{ent} vs {exact}");
    let op = HeatOperator::assemble(chart.clone()).unwrap();
    let fi = fisher(&op, &mu, Frame::Left).unwrap();
    // grid bias of the forward/backward carre du champ is about (h / sigma)^2 / 2
    assert!((fi / (2.0 / (sigma * sigma)) - 1.0).abs() < 0.02, "{fi}");
    let uniform = DensityField::uniform(chart);
    assert!((entropy(&uniform).unwrap().value + 64f64.ln()).abs() < 1e-12);
}

#[test]
fn defect_function() {
    assert!((defect_w(0.5).unwrap() - 4f64.ln()).abs() <= 4.0 * f64::EPSILON);
    let s: f64 = 0.3;
    let expect = -2.0 * ((1.0 - s) * (1.0 - s).ln() + s * s.ln());
    assert!((defect_w(s).unwrap() - expect).abs() < 1e-14);
}

#[test]
fn transport_between_point_clouds() {
    let h = Model::heisenberg();
    let m = CcMetric::closed_form(h);
    let cfg = TransportConfig::default();
    let a = PointCloudMeasure::uniform(vec![pt(&[0.0, 0.0, 0.0])]).unwrap();
    let b = PointCloudMeasure::uniform(vec![pt(&[0.0, 0.0, 1.0])]).unwrap();
    let w = w2_exact(&m, &a, &b, &cfg).unwrap().w2();
    assert!((w - 2.0 * PI.sqrt()).abs() < 1e-9);

    let line = CcMetric::closed_form(Model::abelian_box(1).unwrap());
    let xs = [0.0, 0.4, 1.1, 2.0];
    let a = PointCloudMeasure::uniform(xs.iter().map(|&x| pt(&[x])).collect()).unwrap();
    let b = PointCloudMeasure::uniform(xs.iter().map(|&x| pt(&[x + 0.3])).collect()).unwrap();
    assert!((w2_exact(&line, &a, &b, &cfg).unwrap().w2() - 0.3).abs() < 1e-12);
    assert!((w1_dual(&line, &a, &b, &cfg).unwrap() - 0.3).abs() < 1e-12);

    let plane = CcMetric::closed_form(Model::abelian_box(2).unwrap());
    let a = PointCloudMeasure::new(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0])], vec![0.5, 0.5]).unwrap();
    let b = PointCloudMeasure::new(vec![pt(&[0.0, 1.0]), pt(&[1.0, 1.0])], vec![0.5, 0.5]).unwrap();
    let plan = w2_exact(&plane, &a, &b, &cfg).unwrap();
    assert!((plan.w2() - 1.0).abs() < 1e-12);
    assert!(plan.marginal_error() < 1e-12);
}
