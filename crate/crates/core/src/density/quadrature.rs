//! One-dimensional quadrature used as an oracle for KL divergences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Default tolerance on the grid-doubling check of [`quadrature_kl`].
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;

/// Uniform grid on `[lo, hi]`. Odd point counts integrate with composite
/// Simpson, even counts with the trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl QuadratureGrid {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("grid", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_points < 3 {
            return Err(Error::invalid("n_points", format!("need at least 3, got {n_points}")));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.n_points).map(move |i| self.lo + h * i as f64)
    }

    /// Same interval with every cell halved.
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points - 1,
            ..*self
        }
    }

    /// Quadrature weight of node `i`.
    fn weight(&self, i: usize) -> f64 {
        let h = self.step();
        let last = self.n_points - 1;
        if self.n_points % 2 == 1 {
            if i == 0 || i == last {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            }
        } else if i == 0 || i == last {
            h / 2.0
        } else {
            h
        }
    }

    /// ∫ f over the grid from precomputed node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.points().map(f).collect();
        self.integrate_values(&vals)
    }

    /// log ∫ exp(log_f) over the grid, computed with max subtraction.
    pub fn log_integral(&self, log_values: &[f64]) -> f64 {
        let terms: Vec<f64> = log_values
            .iter()
            .enumerate()
            .map(|(i, l)| l + self.weight(i).ln())
            .collect();
        log_sum_exp(&terms)
    }

    /// KL(q ‖ p) from log-density node values, both renormalized on the grid.
    pub fn kl_from_log_values(&self, log_q: &[f64], log_p: &[f64]) -> f64 {
        let zq = self.log_integral(log_q);
        let zp = self.log_integral(log_p);
        let integrand: Vec<f64> = log_q
            .iter()
            .zip(log_p)
            .map(|(&lq, &lp)| {
                let lqn = lq - zq;
                let qn = lqn.exp();
                if qn == 0.0 {
                    0.0
                } else {
                    qn * (lqn - (lp - zp))
                }
            })
            .collect();
        self.integrate_values(&integrand)
    }

    /// Single-resolution KL estimate, no refinement check.
    pub fn kl(&self, log_q: impl Fn(f64) -> f64, log_p: impl Fn(f64) -> f64) -> f64 {
        let lq: Vec<f64> = self.points().map(&log_q).collect();
        let lp: Vec<f64> = self.points().map(&log_p).collect();
        self.kl_from_log_values(&lq, &lp)
    }
}

/// KL(q ‖ p) by quadrature, with `p` (and `q`) renormalized over the grid so
/// unnormalized log-joints can be passed directly. The estimate is recomputed
/// on the refined grid; a shift larger than `DEFAULT_REFINE_TOL` is an error.
/// Returns the refined estimate.
pub fn quadrature_kl(
    log_q: impl Fn(f64) -> f64,
    log_p: impl Fn(f64) -> f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    quadrature_kl_with_tol(log_q, log_p, grid, DEFAULT_REFINE_TOL)
}

pub fn quadrature_kl_with_tol(
    log_q: impl Fn(f64) -> f64,
    log_p: impl Fn(f64) -> f64,
    grid: &QuadratureGrid,
    tolerance: f64,
) -> Result<f64> {
    let fine = grid.refined();
    // the refined grid contains every coarse node at even positions
    let lq: Vec<f64> = fine.points().map(&log_q).collect();
    let lp: Vec<f64> = fine.points().map(&log_p).collect();
    let coarse_q: Vec<f64> = lq.iter().step_by(2).copied().collect();
    let coarse_p: Vec<f64> = lp.iter().step_by(2).copied().collect();
    let coarse = grid.kl_from_log_values(&coarse_q, &coarse_p);
    let refined = fine.kl_from_log_values(&lq, &lp);
    let shift = (refined - coarse).abs();
    if !(shift <= tolerance) {
        return Err(Error::GridTooCoarse { shift, tolerance });
    }
    Ok(refined)
}
