use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::heat::grid::GridChart;
use crate::scalar::{pairwise_sum, Real};

/// Signed nodal values (test functions, potentials).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub chart: Arc<GridChart<T>>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(chart: Arc<GridChart<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != chart.len() {
            return invalid(format!("field has {} values, chart has {} nodes", values.len(), chart.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("field values must be finite");
        }
        Ok(Self { chart, values })
    }

    pub fn constant(chart: Arc<GridChart<T>>, c: T) -> Self {
        let values = vec![c; chart.len()];
        Self { chart, values }
    }

    /// Samples `f` at every node.
    pub fn from_fn(chart: Arc<GridChart<T>>, f: impl Fn(&[T]) -> T) -> Self {
        let n = chart.ndim();
        let mut p = vec![T::zero(); n];
        let values = (0..chart.len())
            .map(|i| {
                chart.node_into(i, &mut p);
                f(&p)
            })
            .collect();
        Self { chart, values }
    }

    pub fn integral(&self) -> T {
        pairwise_sum(&self.values) * self.chart.cell_volume()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            chart: self.chart.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    /// Discrete `L^p` norm with cell-volume weights (`p = inf` allowed).
    pub fn lp_norm(&self, p: f64) -> T {
        if p.is_infinite() {
            return self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        }
        let pp = T::c(p);
        let terms: Vec<T> = self.values.iter().map(|&v| v.abs().powf(pp)).collect();
        (pairwise_sum(&terms) * self.chart.cell_volume()).powf(T::one() / pp)
    }
}

/// Nonnegative density with respect to the Haar (Lebesgue) measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField<T> {
    pub chart: Arc<GridChart<T>>,
    pub values: Vec<T>,
    pub mass: T,
}

impl<T: Real> DensityField<T> {
    /// Validates nonnegativity and caches the mass.
    pub fn new(chart: Arc<GridChart<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != chart.len() {
            return invalid(format!("density has {} values, chart has {} nodes", values.len(), chart.len()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return invalid("density values must be finite and nonnegative");
        }
        Ok(Self::from_values_unchecked(chart, values))
    }

    /// Wraps evolved values that may carry tiny negative round-off; no
    /// clamping is applied.
    pub fn from_values_unchecked(chart: Arc<GridChart<T>>, values: Vec<T>) -> Self {
        let mass = pairwise_sum(&values) * chart.cell_volume();
        Self { chart, values, mass }
    }

    pub fn from_scalar(f: ScalarField<T>) -> Self {
        Self::from_values_unchecked(f.chart, f.values)
    }

    /// Samples an unnormalized profile and rescales it to mass one.
    pub fn normalized_from_fn(chart: Arc<GridChart<T>>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let s = ScalarField::from_fn(chart, f);
        let d = Self::new(s.chart, s.values)?;
        d.normalized()
    }

    pub fn uniform(chart: Arc<GridChart<T>>) -> Self {
        let v = T::one() / chart.volume();
        Self::from_values_unchecked(chart.clone(), vec![v; chart.len()])
    }

    /// Single-cell density of mass one at the given node.
    pub fn delta(chart: Arc<GridChart<T>>, node: usize) -> Self {
        let mut values = vec![T::zero(); chart.len()];
        values[node] = T::one() / chart.cell_volume();
        Self::from_values_unchecked(chart, values)
    }

    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass > T::zero()) {
            return invalid("cannot normalize a density of zero mass");
        }
        let s = T::one() / self.mass;
        Ok(Self::from_values_unchecked(
            self.chart.clone(),
            self.values.iter().map(|&v| v * s).collect(),
        ))
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.mass.f64() - 1.0).abs() <= tol
    }

    pub fn as_scalar(&self) -> ScalarField<T> {
        ScalarField {
            chart: self.chart.clone(),
            values: self.values.clone(),
        }
    }

    /// Convex combination `(1 - s) self + s other`.
    pub fn mix(&self, other: &Self, s: T) -> Result<Self> {
        self.chart.ensure_same(&other.chart)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (T::one() - s) * a + s * b)
            .collect();
        Ok(Self::from_values_unchecked(self.chart.clone(), values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupModel;

    fn chart() -> Arc<GridChart<f64>> {
        Arc::new(GridChart::centered_cube(GroupModel::abelian_box(2).unwrap(), 1.0, 8).unwrap())
    }

    #[test]
    fn mass_and_norms() {
        let c = chart();
        let u = DensityField::uniform(c.clone());
        assert!((u.mass - 1.0).abs() < 1e-14);
        let f = ScalarField::constant(c.clone(), -2.0);
        assert!((f.lp_norm(1.0) - 8.0).abs() < 1e-12);
        assert!((f.lp_norm(2.0) - 4.0).abs() < 1e-12);
        assert_eq!(f.lp_norm(f64::INFINITY), 2.0);
        let d = DensityField::delta(c, 5);
        assert!((d.mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let c = chart();
        assert!(DensityField::new(c.clone(), vec![-1.0; 64]).is_err());
        assert!(ScalarField::new(c.clone(), vec![0.0; 3]).is_err());
        let z = DensityField::new(c, vec![0.0; 64]).unwrap();
        assert!(z.normalized().is_err());
    }
}
