//! Log-domain Sinkhorn with epsilon annealing and marginal rounding.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornConfig {
    /// Regularization levels as multiples of the mean cost, decreasing.
    pub schedule: Vec<f64>,
    pub max_iterations: usize,
    /// L1 marginal violation accepted before rounding, per stage.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            schedule: vec![1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001],
            max_iterations: 20_000,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornSolution {
    /// Dense coupling, row-major, exactly on the marginals after rounding.
    pub plan: Vec<f64>,
    pub cost: f64,
    /// Dual potentials at the final regularization.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub epsilon: f64,
    pub iterations: usize,
    /// Marginal violation before rounding.
    pub violation: f64,
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn solve(a: &[f64], b: &[f64], cost: &[f64], cfg: &SinkhornConfig) -> Result<SinkhornSolution> {
    let (m, n) = (a.len(), b.len());
    assert_eq!(cost.len(), m * n);
    if cfg.schedule.is_empty() || cfg.schedule.windows(2).any(|w| !(w[1] < w[0])) || cfg.schedule.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("epsilon schedule must be positive and decreasing".into()));
    }
    let mean = cost.iter().sum::<f64>() / (m * n) as f64;
    let base = if mean > 0.0 { mean } else { 1.0 };
    let la: Vec<f64> = a.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
    let lb: Vec<f64> = b.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut eps = base;
    for &factor in &cfg.schedule {
        eps = factor * base;
        let mut converged = false;
        for _ in 0..cfg.max_iterations {
            iterations += 1;
            f.par_iter_mut().enumerate().for_each(|(i, fi)| {
                *fi = if a[i] > 0.0 {
                    eps * la[i] - eps * logsumexp((0..n).map(|j| (g[j] - cost[i * n + j]) / eps))
                } else {
                    f64::NEG_INFINITY
                };
            });
            g.par_iter_mut().enumerate().for_each(|(j, gj)| {
                *gj = if b[j] > 0.0 {
                    eps * lb[j] - eps * logsumexp((0..m).map(|i| (f[i] - cost[i * n + j]) / eps))
                } else {
                    f64::NEG_INFINITY
                };
            });
            // After the g-update columns are exact; measure the rows.
            let rows: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let r: f64 = (0..n).map(|j| ((f[i] + g[j] - cost[i * n + j]) / eps).exp()).sum();
                    (r - a[i]).abs()
                })
                .collect();
            violation = rows.iter().sum();
            if violation <= cfg.tolerance {
                converged = true;
                break;
            }
        }
        if !converged && factor == *cfg.schedule.last().expect("nonempty") && violation > 1e-4 {
            return Err(Error::Numerical {
                message: "Sinkhorn did not reach the marginal tolerance".into(),
                iterations,
                residual: violation,
            });
        }
    }
    let mut plan: Vec<f64> = (0..m * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            ((f[i] + g[j] - cost[k]) / eps).exp()
        })
        .collect();
    round_to_marginals(&mut plan, a, b);
    let cost_value = plan.iter().zip(cost).map(|(p, c)| p * c).sum();
    Ok(SinkhornSolution {
        plan,
        cost: cost_value,
        f,
        g,
        epsilon: eps,
        iterations,
        violation,
    })
}

/// Projects a nonnegative matrix onto the transport polytope: scale rows
/// and columns down to their targets, then spread the deficit as a rank-one
/// correction.
pub fn round_to_marginals(p: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let r: f64 = p[i * n..(i + 1) * n].iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            p[i * n..(i + 1) * n].iter_mut().for_each(|x| *x *= s);
        }
    }
    let mut cols = vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            cols[j] += p[i * n + j];
        }
    }
    for j in 0..n {
        if cols[j] > b[j] {
            let s = b[j] / cols[j];
            for i in 0..m {
                p[i * n + j] *= s;
            }
        }
    }
    let er: Vec<f64> = (0..m).map(|i| (a[i] - p[i * n..(i + 1) * n].iter().sum::<f64>()).max(0.0)).collect();
    let mut ec = vec![0.0; n];
    for j in 0..n {
        let c: f64 = (0..m).map(|i| p[i * n + j]).sum();
        ec[j] = (b[j] - c).max(0.0);
    }
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i * n + j] += er[i] * ec[j] / total;
            }
        }
    }
}
