//! Scenario configuration and the shared, read-only state built from it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::CurvatureFn;
use crate::group::{GroupFamily, GroupModel, GroupPoint};
use crate::heat::semigroup::Stepping;
use crate::heat::{Boundary, DensityField, GridChart, HeatFlow, HeatOperator, ScalarField, Window};
use crate::metric::CcMetric;
use crate::transport::{density_to_cloud, Discretization, PointCloudMeasure, SinkhornConfig, TransportConfig};

use super::report::ToleranceSpec;
use super::settings::Settings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", deny_unknown_fields)]
pub enum ModelSpec {
    AbelianBox { dimension: usize },
    Torus { periods: Vec<f64> },
    Heisenberg,
}

impl ModelSpec {
    pub fn build(&self) -> Result<GroupModel<f64>> {
        match self {
            ModelSpec::AbelianBox { dimension } => GroupModel::abelian_box(*dimension),
            ModelSpec::Torus { periods } => GroupModel::torus(periods.clone()),
            ModelSpec::Heisenberg => Ok(GroupModel::heisenberg()),
        }
    }
}

/// Cells per axis; boxes are `[-half, half]` per axis, tori use their
/// fundamental domain and ignore `half`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub cells: Vec<usize>,
    #[serde(default)]
    pub half: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CurvatureSpec {
    Constant { c: f64 },
    Exponential { c: f64, k: f64 },
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
    /// `c = c_hat` from the gradient contraction certifier, tabulated on
    /// the time grid with `c_hat(0) = 1`.
    Estimated,
}

impl CurvatureSpec {
    fn fixed(&self) -> Result<Option<CurvatureFn>> {
        Ok(match self {
            CurvatureSpec::Constant { c } => Some(CurvatureFn::constant(*c)?),
            CurvatureSpec::Exponential { c, k } => Some(CurvatureFn::exponential(*c, *k)?),
            CurvatureSpec::Tabulated { knots, values } => Some(CurvatureFn::tabulated(knots.clone(), values.clone())?),
            CurvatureSpec::Estimated => None,
        })
    }
}

fn default_c() -> Option<Vec<f64>> {
    None
}

/// Smooth test functions with analytic values and gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `exp(-|x - c|^2 / (2 w^2))`.
    Gaussian {
        #[serde(default = "default_c")]
        center: Option<Vec<f64>>,
        width: f64,
    },
    /// `prod (x_a - c_a)^{k_a}` times the Gaussian bump.
    Monomial {
        powers: Vec<u32>,
        #[serde(default = "default_c")]
        center: Option<Vec<f64>>,
        width: f64,
    },
    /// `(x + a y z)` times the Gaussian bump at the origin (`H^1` only).
    Witness { a: f64, width: f64 },
    /// `sin(k . x)`, optionally times a bump of the given width.
    Sine {
        k: Vec<f64>,
        #[serde(default)]
        width: Option<f64>,
    },
    Constant { c: f64 },
}

impl FunctionSpec {
    fn bump(center: &Option<Vec<f64>>, width: f64, p: &[f64]) -> (f64, Vec<f64>) {
        let d: Vec<f64> = (0..p.len())
            .map(|a| p[a] - center.as_ref().map_or(0.0, |c| c[a]))
            .collect();
        let r2: f64 = d.iter().map(|x| x * x).sum();
        let g = (-0.5 * r2 / (width * width)).exp();
        let grad = d.iter().map(|x| -g * x / (width * width)).collect();
        (g, grad)
    }

    fn validate(&self, n: usize, model: &GroupModel<f64>) -> Result<()> {
        let check_c = |c: &Option<Vec<f64>>| match c {
            Some(c) if c.len() != n => invalid(format!("function center needs {n} coordinates")),
            _ => Ok(()),
        };
        match self {
            FunctionSpec::Gaussian { center, width } => {
                check_c(center)?;
                if !(*width > 0.0) {
                    return invalid("function width must be positive");
                }
            }
            FunctionSpec::Monomial { powers, center, width } => {
                check_c(center)?;
                if powers.len() != n || !(*width > 0.0) {
                    return invalid(format!("monomial needs {n} powers and a positive width"));
                }
            }
            FunctionSpec::Witness { width, .. } => {
                if model.family() != GroupFamily::Heisenberg1 || !(*width > 0.0) {
                    return invalid("witness functions are defined on H^1 with a positive width");
                }
            }
            FunctionSpec::Sine { k, width } => {
                if k.len() != n || width.is_some_and(|w| !(w > 0.0)) {
                    return invalid(format!("sine needs {n} wave numbers"));
                }
            }
            FunctionSpec::Constant { .. } => {}
        }
        Ok(())
    }

    /// Value and coordinate gradient at `p`.
    pub fn eval_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let n = p.len();
        match self {
            FunctionSpec::Gaussian { center, width } => Self::bump(center, *width, p),
            FunctionSpec::Monomial { powers, center, width } => {
                let (g, dg) = Self::bump(center, *width, p);
                let d: Vec<f64> = (0..n).map(|a| p[a] - center.as_ref().map_or(0.0, |c| c[a])).collect();
                let m: f64 = (0..n).map(|a| d[a].powi(powers[a] as i32)).product();
                let grad = (0..n)
                    .map(|a| {
                        let dm = if powers[a] == 0 {
                            0.0
                        } else {
                            let rest: f64 = (0..n).filter(|&b| b != a).map(|b| d[b].powi(powers[b] as i32)).product();
                            powers[a] as f64 * d[a].powi(powers[a] as i32 - 1) * rest
                        };
                        dm * g + m * dg[a]
                    })
                    .collect();
                (m * g, grad)
            }
            FunctionSpec::Witness { a, width } => {
                let (g, dg) = Self::bump(&None, *width, p);
                let q = p[0] + a * p[1] * p[2];
                let dq = [1.0, a * p[2], a * p[1]];
                let grad = (0..3).map(|i| dq[i] * g + q * dg[i]).collect();
                (q * g, grad)
            }
            FunctionSpec::Sine { k, width } => {
                let phase: f64 = k.iter().zip(p).map(|(a, b)| a * b).sum();
                let (s, c) = phase.sin_cos();
                match width {
                    None => (s, k.iter().map(|ka| ka * c).collect()),
                    Some(w) => {
                        let (g, dg) = Self::bump(&None, *w, p);
                        (s * g, (0..n).map(|a| k[a] * c * g + s * dg[a]).collect())
                    }
                }
            }
            FunctionSpec::Constant { c } => (*c, vec![0.0; n]),
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.eval_grad(p).0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FunctionSpec::Constant { .. })
    }

    /// Nonnegative everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match self {
            FunctionSpec::Gaussian { .. } => true,
            FunctionSpec::Constant { c } => *c >= 0.0,
            FunctionSpec::Monomial { powers, .. } => powers.iter().all(|k| k % 2 == 0),
            _ => false,
        }
    }
}

/// Probability measures, sampled on the chart and renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Density proportional to `exp(-|x - c|^2 / (2 sigma^2))` in coordinates.
    Gaussian { center: Vec<f64>, sigma: f64 },
    Mixture {
        centers: Vec<Vec<f64>>,
        sigma: f64,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// One cell of mass one at the node nearest to `at`.
    Delta { at: Vec<f64> },
    /// Push-forward of `base` by the right translation `x -> x u`.
    RightTranslate { base: String, u: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedFunction {
    pub name: String,
    pub function: FunctionSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMeasure {
    pub name: String,
    pub measure: MeasureSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSpec {
    pub lp_cap: usize,
    pub mass_threshold: f64,
    pub epsilon_schedule: Vec<f64>,
}

impl Default for TransportSpec {
    fn default() -> Self {
        let t = TransportConfig::default();
        Self {
            lp_cap: t.lp_cap,
            mass_threshold: t.mass_threshold,
            epsilon_schedule: t.sinkhorn.schedule,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteppingSpec {
    pub dt_factor: f64,
    pub tolerance: f64,
}

impl Default for SteppingSpec {
    fn default() -> Self {
        let s = Stepping::<f64>::default();
        Self {
            dt_factor: s.dt_factor,
            tolerance: s.tolerance,
        }
    }
}

fn default_margin() -> f64 {
    0.2
}

fn default_s_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_suite() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSpec,
    pub chart: ChartSpec,
    pub curvature: CurvatureSpec,
    #[serde(default = "default_suite")]
    pub suite: Vec<String>,
    pub time_grid: Vec<f64>,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    /// Fraction of each axis excluded on both sides by pointwise checks.
    #[serde(default = "default_margin")]
    pub window_margin: f64,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub functions: Vec<NamedFunction>,
    #[serde(default)]
    pub measures: Vec<NamedMeasure>,
    #[serde(default)]
    pub transport: TransportSpec,
    #[serde(default)]
    pub stepping: SteppingSpec,
    #[serde(default)]
    pub settings: Settings,
}

type FlowSlot = Arc<Mutex<Option<Arc<Vec<ScalarField<f64>>>>>>;

/// Everything the certifiers share. Built once, then read-only apart from
/// the flow cache and the estimated curvature.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub metric: CcMetric<f64>,
    pub chart: Arc<GridChart<f64>>,
    pub flow: HeatFlow<f64>,
    pub window: Window,
    pub window_nodes: Vec<usize>,
    pub transport: TransportConfig,
    /// Union of every time at which some certifier needs `H_t mu`.
    pub heat_times: Vec<f64>,
    curvature: Option<CurvatureFn>,
    cache: Mutex<HashMap<String, FlowSlot>>,
    distances: Mutex<HashMap<String, (f64, Discretization)>>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("name", &self.config.name).finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.tolerances.validate()?;
        let model = config.model.build()?;
        let n = model.dimension();
        let cfg = &config.chart;
        let chart = match model.family() {
            GroupFamily::AbelianTorus => GridChart::torus(model.clone(), cfg.cells.clone())?,
            _ => {
                let half = cfg
                    .half
                    .ok_or_else(|| Error::Config("chart.half is required for boxes".into()))?;
                if cfg.cells.len() != n {
                    return Err(Error::Config(format!("chart.cells needs {n} entries")));
                }
                GridChart::new(model.clone(), vec![-half; n], vec![half; n], cfg.cells.clone())?
            }
        };
        let chart = Arc::new(chart);
        let t = &config.time_grid;
        if t.is_empty() || t.iter().any(|&x| !(x >= 0.0)) || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time_grid must be nonempty, nonnegative and increasing".into()));
        }
        if config.s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Config("s_grid values must lie in [0, 1]".into()));
        }
        if !(0.0..0.5).contains(&config.window_margin) {
            return Err(Error::Config("window_margin must lie in [0, 0.5)".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &config.functions {
            if !seen.insert(f.name.clone()) {
                return Err(Error::Config(format!("duplicate function name {}", f.name)));
            }
            f.function.validate(n, &model)?;
        }
        for m in &config.measures {
            if !seen.insert(m.name.clone()) {
                return Err(Error::Config(format!("duplicate measure name {}", m.name)));
            }
        }
        let stepping = Stepping {
            dt_factor: config.stepping.dt_factor,
            tolerance: config.stepping.tolerance,
            ..Stepping::default()
        };
        let flow = HeatFlow::new(HeatOperator::assemble(chart.clone())?, stepping)?;
        let window = chart.interior_window(config.window_margin);
        let window_nodes = chart.window_indices(&window);
        let transport = TransportConfig {
            lp_cap: config.transport.lp_cap,
            mass_threshold: config.transport.mass_threshold,
            sinkhorn: SinkhornConfig {
                schedule: config.transport.epsilon_schedule.clone(),
                ..SinkhornConfig::default()
            },
        };
        let curvature = config.curvature.fixed()?;
        let mut sc = Self {
            metric: CcMetric::closed_form(model),
            chart,
            flow,
            window,
            window_nodes,
            transport,
            heat_times: Vec::new(),
            curvature,
            cache: Mutex::new(HashMap::new()),
            distances: Mutex::new(HashMap::new()),
            config,
        };
        for m in &sc.config.measures {
            sc.measure(&m.name)?;
        }
        sc.config.settings.validate(&sc)?;
        sc.heat_times = sc.config.settings.heat_times(&sc);
        Ok(sc)
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn model(&self) -> &GroupModel<f64> {
        &self.metric.model
    }

    pub fn tol(&self) -> &ToleranceSpec {
        &self.config.tolerances
    }

    pub fn floor(&self) -> f64 {
        self.config.tolerances.noise_floor
    }

    pub fn window_label(&self) -> String {
        self.window.label()
    }

    pub fn curvature_estimated(&self) -> bool {
        self.config.curvature == CurvatureSpec::Estimated
    }

    /// The curvature function used on the right-hand sides.
    pub fn curvature(&self) -> Result<&CurvatureFn> {
        self.curvature
            .as_ref()
            .ok_or_else(|| Error::Config("estimated curvature requested before gradient_contraction ran".into()))
    }

    pub fn set_curvature(&mut self, c: CurvatureFn) {
        self.curvature = Some(c);
    }

    /// `sup c` over the time grid; the constant `C` of the group.
    pub fn curvature_sup(&self) -> Result<f64> {
        let c = self.curvature()?;
        let mut best = c.eval(0.0)?;
        for &t in &self.config.time_grid {
            best = best.max(c.eval(t)?);
        }
        Ok(best)
    }

    pub fn function(&self, name: &str) -> Result<&FunctionSpec> {
        self.config
            .functions
            .iter()
            .find(|f| f.name == name)
            .map(|f| &f.function)
            .ok_or_else(|| Error::Config(format!("unknown function {name}")))
    }

    pub fn field(&self, name: &str) -> Result<ScalarField<f64>> {
        let f = self.function(name)?;
        Ok(ScalarField::from_fn(self.chart.clone(), |p| f.eval(p)))
    }

    fn measure_spec(&self, name: &str) -> Result<&MeasureSpec> {
        self.config
            .measures
            .iter()
            .find(|m| m.name == name)
            .map(|m| &m.measure)
            .ok_or_else(|| Error::Config(format!("unknown measure {name}")))
    }

    /// Unnormalized analytic density; `None` for deltas.
    fn density_fn(&self, name: &str, p: &[f64], depth: usize) -> Result<Option<f64>> {
        if depth > 8 {
            return Err(Error::Config(format!("measure {name} nests too deeply")));
        }
        let n = p.len();
        let gauss = |c: &[f64], sigma: f64| {
            let r2: f64 = (0..n).map(|a| (p[a] - c[a]).powi(2)).sum();
            (-0.5 * r2 / (sigma * sigma)).exp()
        };
        Ok(match self.measure_spec(name)? {
            MeasureSpec::Gaussian { center, sigma } => {
                if center.len() != n || !(*sigma > 0.0) {
                    return Err(Error::Config(format!("measure {name}: bad center or sigma")));
                }
                Some(gauss(center, *sigma))
            }
            MeasureSpec::Mixture { centers, sigma, weights } => {
                let w = weights.clone().unwrap_or_else(|| vec![1.0; centers.len()]);
                if centers.is_empty() || w.len() != centers.len() || centers.iter().any(|c| c.len() != n) || !(*sigma > 0.0) {
                    return Err(Error::Config(format!("measure {name}: bad mixture")));
                }
                Some(centers.iter().zip(&w).map(|(c, wi)| wi * gauss(c, *sigma)).sum())
            }
            MeasureSpec::Delta { .. } => None,
            MeasureSpec::RightTranslate { base, u } => {
                let model = self.model();
                let u = GroupPoint::new(u.clone());
                let q = model.multiply(&GroupPoint::new(p.to_vec()), &model.inverse(&u)?)?;
                match self.density_fn(base, &q.coords, depth + 1)? {
                    Some(v) => Some(v),
                    None => return Err(Error::Config(format!("measure {name}: cannot translate a delta"))),
                }
            }
        })
    }

    pub fn is_delta(&self, name: &str) -> Result<bool> {
        Ok(matches!(self.measure_spec(name)?, MeasureSpec::Delta { .. }))
    }

    pub fn measure(&self, name: &str) -> Result<DensityField<f64>> {
        if let MeasureSpec::Delta { at } = self.measure_spec(name)? {
            let p = GroupPoint::new(at.clone());
            self.model().check(&p)?;
            let node = self.chart.nearest_index(&p)?;
            return Ok(DensityField::delta(self.chart.clone(), node));
        }
        let n = self.chart.ndim();
        let mut p = vec![0.0; n];
        let mut values = Vec::with_capacity(self.chart.len());
        for k in 0..self.chart.len() {
            self.chart.node_into(k, &mut p);
            values.push(self.density_fn(name, &p, 0)?.expect("analytic"));
        }
        DensityField::new(self.chart.clone(), values)?.normalized()
    }

    /// `mu (v)`, the push-forward of an analytic measure by `x -> x v`,
    /// sampled on the chart.
    pub fn translated(&self, name: &str, v: &[f64]) -> Result<DensityField<f64>> {
        let model = self.model();
        let vinv = model.inverse(&GroupPoint::new(v.to_vec()))?;
        let n = self.chart.ndim();
        let mut p = vec![0.0; n];
        let mut values = Vec::with_capacity(self.chart.len());
        for k in 0..self.chart.len() {
            self.chart.node_into(k, &mut p);
            let q = model.multiply(&GroupPoint::new(p.clone()), &vinv)?;
            let f = self
                .density_fn(name, &q.coords, 0)?
                .ok_or_else(|| Error::Config(format!("measure {name} has no analytic density")))?;
            values.push(f);
        }
        DensityField::new(self.chart.clone(), values)?.normalized()
    }

    /// `(center, sigma)` of a Gaussian measure.
    pub fn gaussian_params(&self, name: &str) -> Result<Option<(Vec<f64>, f64)>> {
        Ok(match self.measure_spec(name)? {
            MeasureSpec::Gaussian { center, sigma } => Some((center.clone(), *sigma)),
            _ => None,
        })
    }

    /// Grid measure as a point cloud under the scenario's LP cap.
    pub fn cloud(&self, mu: &DensityField<f64>, cap: usize) -> Result<PointCloudMeasure<f64>> {
        Ok(density_to_cloud(mu, self.transport.mass_threshold, cap.min(self.transport.lp_cap))?.0)
    }

    /// `P_t` of a field at each of `times`, cached under `key`.
    pub fn flow_cached(&self, key: &str, init: impl FnOnce() -> Result<ScalarField<f64>>, times: &[f64]) -> Result<Arc<Vec<ScalarField<f64>>>> {
        let full = format!("{key}@{times:?}");
        let slot = {
            let mut map = self.cache.lock().expect("flow cache poisoned");
            map.entry(full).or_default().clone()
        };
        let mut guard = slot.lock().expect("flow slot poisoned");
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        let f = init()?;
        let snaps = Arc::new(self.flow.evolve_through(&f, times)?);
        *guard = Some(snaps.clone());
        Ok(snaps)
    }

    /// A transport distance memoized under `key`, so certifiers asking for
    /// the same pair share one solve.
    pub fn distance_cached(&self, key: &str, solve: impl FnOnce() -> Result<(f64, Discretization)>) -> Result<(f64, Discretization)> {
        if let Some(v) = self.distances.lock().expect("distance cache poisoned").get(key) {
            return Ok(v.clone());
        }
        let v = solve()?;
        self.distances.lock().expect("distance cache poisoned").insert(key.to_string(), v.clone());
        Ok(v)
    }

    /// `P_t f` for a named test function.
    pub fn function_flow(&self, name: &str, times: &[f64]) -> Result<Arc<Vec<ScalarField<f64>>>> {
        self.flow_cached(&format!("fn:{name}"), || self.field(name), times)
    }

    /// `H_t mu` for a named measure, as densities.
    pub fn measure_flow(&self, name: &str, times: &[f64]) -> Result<Vec<DensityField<f64>>> {
        let snaps = self.flow_cached(&format!("mu:{name}"), || Ok(self.measure(name)?.as_scalar()), times)?;
        Ok(snaps.iter().map(|s| DensityField::from_scalar(s.clone())).collect())
    }

    /// `H_t mu` at one of the scenario's `heat_times`, sharing one flow per
    /// measure across certifiers.
    pub fn measure_at(&self, name: &str, t: f64) -> Result<DensityField<f64>> {
        let k = self
            .heat_times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
            .ok_or_else(|| Error::Config(format!("time {t} is not among the scenario heat times")))?;
        let snaps = self.flow_cached(&format!("mu:{name}"), || Ok(self.measure(name)?.as_scalar()), &self.heat_times)?;
        Ok(DensityField::from_scalar(snaps[k].clone()))
    }

    /// Time grid with `t = 0` prepended.
    pub fn times_with_zero(&self) -> Vec<f64> {
        let mut t = self.config.time_grid.clone();
        if t[0] > 0.0 {
            t.insert(0, 0.0);
        }
        t
    }

    /// Deterministic RNG for one certifier.
    pub fn rng(&self, salt: u64) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(self.config.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// `|D phi|^2` from the analytic gradient and the left frame.
    pub fn horizontal_grad_sq(&self, f: &FunctionSpec, p: &[f64]) -> f64 {
        let (_, g) = f.eval_grad(p);
        self.model()
            .frame_at(p, false)
            .iter()
            .map(|x| x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum()
    }

    pub fn is_periodic(&self) -> bool {
        self.chart.boundary() == Boundary::Periodic
    }
}

/// Multilinear deposit of a cloud onto the chart (mass preserving); atoms
/// are clamped to the span of the cell centres.
pub fn deposit(cloud: &PointCloudMeasure<f64>, chart: &Arc<GridChart<f64>>) -> Result<DensityField<f64>> {
    let n = chart.ndim();
    let mut values = vec![0.0; chart.len()];
    let vol = chart.cell_volume();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    let mut idx = vec![0usize; n];
    for (p, &w) in cloud.points.iter().zip(&cloud.weights) {
        for a in 0..n {
            let h = chart.spacing()[a];
            let s = ((p.coords[a] - chart.lo()[a]) / h - 0.5).clamp(0.0, (chart.shape()[a] - 1) as f64);
            let i = (s.floor() as usize).min(chart.shape()[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        for corner in 0..(1usize << n) {
            let mut wt = w;
            for a in 0..n {
                let up = corner >> a & 1 == 1;
                idx[a] = base[a] + up as usize;
                wt *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            values[chart.flat_index(&idx)] += wt / vol;
        }
    }
    DensityField::new(chart.clone(), values)?.normalized()
}
