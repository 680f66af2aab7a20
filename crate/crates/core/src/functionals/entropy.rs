use crate::error::{invalid, Result};
use crate::heat::{DensityField, Frame, HeatOperator};
use crate::scalar::{pairwise_sum, Real};

const MASS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyValue<T> {
    pub value: T,
    /// Set for singular inputs; the value is then meaningless.
    pub infinite: bool,
    pub mass_checked: bool,
}

fn check_mass<T: Real>(mu: &DensityField<T>) -> Result<()> {
    if !mu.is_probability(MASS_TOL) {
        return invalid(format!("density has mass {}, expected 1", mu.mass));
    }
    Ok(())
}

/// `sum f log f * cellvol` with `0 log 0 = 0`. Nonpositive values (solver
/// round-off) contribute nothing.
pub fn entropy<T: Real>(mu: &DensityField<T>) -> Result<EntropyValue<T>> {
    check_mass(mu)?;
    let terms: Vec<T> = mu
        .values
        .iter()
        .map(|&f| if f > T::zero() { f * f.ln() } else { T::zero() })
        .collect();
    let value = pairwise_sum(&terms) * mu.chart.cell_volume();
    Ok(EntropyValue {
        value,
        infinite: !value.is_finite(),
        mass_checked: true,
    })
}

/// `E_eps(mu) = sum f log(eps + f) * cellvol`.
pub fn entropy_truncated<T: Real>(mu: &DensityField<T>, eps: T) -> Result<T> {
    if !(eps > T::zero()) {
        return invalid("truncation eps must be positive");
    }
    check_mass(mu)?;
    let terms: Vec<T> = mu
        .values
        .iter()
        .map(|&f| if f > T::zero() { f * (eps + f).ln() } else { T::zero() })
        .collect();
    Ok(pairwise_sum(&terms) * mu.chart.cell_volume())
}

/// `F(f) = sum_{f > tau} Gamma(f) / f * cellvol` with `tau = 1e-14 max f`.
pub fn fisher<T: Real>(op: &HeatOperator<T>, mu: &DensityField<T>, frame: Frame) -> Result<T> {
    check_mass(mu)?;
    op.chart().ensure_same(&mu.chart)?;
    let gamma = op.carre_du_champ_values(&mu.values, &mu.values, frame);
    let tau = mu.values.iter().fold(T::zero(), |m, &v| m.max(v)) * T::c(1e-14);
    let terms: Vec<T> = mu
        .values
        .iter()
        .zip(&gamma)
        .map(|(&f, &g)| if f > tau { g / f } else { T::zero() })
        .collect();
    Ok(pairwise_sum(&terms) * mu.chart.cell_volume())
}
