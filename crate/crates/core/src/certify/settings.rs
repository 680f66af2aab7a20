//! Per-certifier settings. Every field has a default so scenario files only
//! name what differs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scenario::Scenario;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub gradient: GradientSettings,
    pub contraction: ContractionSettings,
    pub poincare: PoincareSettings,
    pub log_harnack: LogHarnackSettings,
    pub kernel: KernelSettings,
    pub entropy: EntropySettings,
    pub velocity: VelocitySettings,
    pub evi: EviSettings,
    pub convexity: ConvexitySettings,
    pub calculus: CalculusSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientSettings {
    /// Test functions to use; all scenario functions when absent.
    pub functions: Option<Vec<String>>,
    /// Noncommutativity witness threshold for `max c_hat`.
    pub witness_min: f64,
}

impl Default for GradientSettings {
    fn default() -> Self {
        Self {
            functions: None,
            witness_min: 1.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionSettings {
    pub pairs: Vec<[String; 2]>,
    /// Defaults to the time grid with `t = 0` prepended.
    pub times: Option<Vec<f64>>,
    pub w1: bool,
}

impl Default for ContractionSettings {
    fn default() -> Self {
        Self {
            pairs: Vec::new(),
            times: None,
            w1: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSettings {
    pub functions: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogHarnackSettings {
    /// Nonnegative functions; defaults to every nonnegative scenario function.
    pub functions: Option<Vec<String>>,
    pub times: Vec<f64>,
    pub eps: Vec<f64>,
    /// Extra epsilons whose slack is recorded in metadata only.
    pub diagnostic_eps: Vec<f64>,
    pub pairs: usize,
    /// Largest coordinate offset of `y` from `x`.
    pub max_offset: f64,
}

impl Default for LogHarnackSettings {
    fn default() -> Self {
        Self {
            functions: None,
            times: vec![0.1, 0.25],
            eps: vec![1.0, 0.1],
            diagnostic_eps: vec![0.01],
            pairs: 20,
            max_offset: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSettings {
    pub times: Vec<f64>,
    /// Images per axis on each side in the theta series.
    pub theta_terms: usize,
    pub oracle_rel: f64,
    pub symmetry_tol: f64,
    /// Second point of the symmetry check.
    pub symmetry_point: Option<Vec<f64>>,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            times: vec![0.05, 0.1],
            theta_terms: 6,
            oracle_rel: 1e-3,
            symmetry_tol: 1e-6,
            symmetry_point: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySettings {
    pub measures: Option<Vec<String>>,
    /// Ball radii as fractions of the chart radius.
    pub radius_fractions: Vec<f64>,
    /// `x0` of the moment bounds; the identity when absent.
    pub base_point: Option<Vec<f64>>,
    /// Trapezoid panels for the Fisher time integral.
    pub fisher_steps: usize,
}

impl Default for EntropySettings {
    fn default() -> Self {
        Self {
            measures: None,
            radius_fractions: vec![0.25, 0.5, 1.0],
            base_point: None,
            fisher_steps: 16,
        }
    }
}

/// `t -> H_t mu` sampled at `t` and `t + h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatCurve {
    pub measure: String,
    pub times: Vec<f64>,
    pub h: Vec<f64>,
}

/// `s -> mu_0 (s u)` on a cloud discretization of `mu_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudCurve {
    pub measure: String,
    pub u: Vec<f64>,
    /// Atom cap for the discretization of `mu_0`.
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_ball_points")]
    pub ball_points: usize,
    #[serde(default = "default_ds")]
    pub ds: f64,
}

fn default_atoms() -> usize {
    12
}
fn default_radius() -> f64 {
    0.2
}
fn default_ball_points() -> usize {
    3
}
fn default_ds() -> f64 {
    0.05
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocitySettings {
    pub heat_curve: Option<HeatCurve>,
    pub cloud_curve: Option<CloudCurve>,
    /// Test potentials for the Lisini bound along the cloud curve.
    pub potentials: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EviSettings {
    pub pairs: Vec<[String; 2]>,
    pub time_pairs: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Geodesic {
    /// Displacement interpolation of an exact plan between two measures.
    Displacement { from: String, to: String },
    /// `mu_s = mu_0 (s u)` for a horizontal `u`.
    RightTranslation {
        measure: String,
        u: Vec<f64>,
        #[serde(default = "default_cloud_cap")]
        cloud_atoms: usize,
    },
}

fn default_cloud_cap() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexitySettings {
    pub geodesic: Option<Geodesic>,
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    /// Panels of the Fisher integral in the numerical sigma diagnostic.
    pub sigma_panels: usize,
}

impl Default for ConvexitySettings {
    fn default() -> Self {
        Self {
            geodesic: None,
            times: vec![0.0, 0.1],
            h: vec![0.05, 0.1],
            sigma_panels: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalculusSettings {
    /// Cells per axis of the coarse and fine check charts.
    pub cells: [usize; 2],
    pub half: f64,
    pub t: f64,
    pub ds: f64,
    /// Width of the Gaussian test data.
    pub width: f64,
    pub ab_rel: f64,
    /// Smallest accepted residual ratio under halving.
    pub ratio_min: f64,
    /// Residuals below this fraction of the scale count as exact.
    pub exact_floor: f64,
    pub mollifier_eps: f64,
    pub mollifier_panels: usize,
}

impl Default for CalculusSettings {
    fn default() -> Self {
        Self {
            cells: [32, 64],
            half: 2.0,
            t: 0.2,
            ds: 0.01,
            width: 0.5,
            ab_rel: 2e-2,
            ratio_min: 3.0,
            exact_floor: 1e-10,
            mollifier_eps: 0.05,
            mollifier_panels: 32,
        }
    }
}

fn positive(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    Ok(())
}

/// Sorted union with near-duplicates merged.
pub fn merge_times(mut t: Vec<f64>) -> Vec<f64> {
    t.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(t.len());
    for x in t {
        if out.last().is_none_or(|&l| (x - l).abs() > 1e-12 * x.max(1.0)) {
            out.push(x);
        }
    }
    out
}

impl Settings {
    pub fn fisher_times(&self, sc: &Scenario) -> Vec<f64> {
        let t_end = *sc.config.time_grid.last().expect("validated");
        let n = self.entropy.fisher_steps.max(1);
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    pub fn heat_times(&self, sc: &Scenario) -> Vec<f64> {
        let mut t = sc.times_with_zero();
        t.extend(self.contraction.times.iter().flatten());
        t.extend(self.evi.time_pairs.iter().flatten());
        t.extend(&self.convexity.times);
        if let Some(c) = &self.velocity.heat_curve {
            for &a in &c.times {
                t.push(a);
                t.extend(c.h.iter().map(|h| a + h));
            }
        }
        t.extend(self.fisher_times(sc));
        merge_times(t)
    }

    pub fn validate(&self, sc: &Scenario) -> Result<()> {
        let fns = |list: &Option<Vec<String>>| -> Result<()> {
            for n in list.iter().flatten() {
                sc.function(n)?;
            }
            Ok(())
        };
        let mus = |names: &[&String]| -> Result<()> {
            for n in names {
                sc.is_delta(n)?;
            }
            Ok(())
        };
        fns(&self.gradient.functions)?;
        fns(&self.poincare.functions)?;
        fns(&self.log_harnack.functions)?;
        mus(&self.contraction.pairs.iter().flatten().collect::<Vec<_>>())?;
        mus(&self.evi.pairs.iter().flatten().collect::<Vec<_>>())?;
        if let Some(list) = &self.entropy.measures {
            mus(&list.iter().collect::<Vec<_>>())?;
        }
        positive("log_harnack.times", &self.log_harnack.times)?;
        positive("log_harnack.eps", &self.log_harnack.eps)?;
        positive("kernel.times", &self.kernel.times)?;
        positive("entropy.radius_fractions", &self.entropy.radius_fractions)?;
        positive("convexity.h", &self.convexity.h)?;
        for p in &self.evi.time_pairs {
            if !(p[0] >= 0.0 && p[1] >= p[0]) {
                return Err(Error::Config("evi.time_pairs need 0 <= t0 <= t1".into()));
            }
        }
        if let Some(c) = &self.velocity.heat_curve {
            mus(&[&c.measure])?;
            positive("velocity.heat_curve.h", &c.h)?;
        }
        if let Some(c) = &self.velocity.cloud_curve {
            mus(&[&c.measure])?;
            positive("velocity.cloud_curve.ds", &[c.ds, c.radius])?;
        }
        for p in &self.velocity.potentials {
            sc.function(p)?;
        }
        match &self.convexity.geodesic {
            Some(Geodesic::Displacement { from, to }) => mus(&[from, to])?,
            Some(Geodesic::RightTranslation { measure, .. }) => mus(&[measure])?,
            None => {}
        }
        let c = &self.calculus;
        if c.cells[1] != 2 * c.cells[0] || c.cells[0] < 8 || !(c.half > 0.0) || !(c.t > 2.0 * c.ds) || !(c.ds > 0.0) {
            return Err(Error::Config("calculus needs cells [n, 2n] with n >= 8, half > 0 and t > 2 ds > 0".into()));
        }
        Ok(())
    }
}
