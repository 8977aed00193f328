//! Numerical probes of the curvature of the KL objective along a
//! Frank-Wolfe segment.

use crate::density::{BaseDensity, Mixture, QuadratureGrid};
use crate::error::{Error, Result};
use crate::math::log_add_exp;

fn check_1d(s: &BaseDensity, q: &Mixture) -> Result<()> {
    if s.dim() != 1 || q.dim() != 1 {
        return Err(Error::invalid("curvature_probe", "needs one-dimensional densities"));
    }
    Ok(())
}

/// (2/γ²)·KL(q + γ(s - q) ‖ q) for each γ, by quadrature.
///
/// The integrand is m·log(m/q) - γ(s - q) with m the blend; the subtracted
/// term integrates to zero and makes the integrand pointwise nonnegative,
/// which keeps small-γ values accurate.
pub fn curvature_probe(
    s: &BaseDensity,
    q: &Mixture,
    gammas: &[f64],
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    check_1d(s, q)?;
    let nodes: Vec<f64> = grid.points().collect();
    let log_s: Vec<f64> = nodes.iter().map(|&z| s.log_prob_unchecked(&[z])).collect();
    let log_q: Vec<f64> = nodes.iter().map(|&z| q.log_prob_unchecked(&[z])).collect();
    gammas
        .iter()
        .map(|&gamma| {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
            }
            let mut vals = Vec::with_capacity(nodes.len());
            for (ls, lq) in log_s.iter().zip(&log_q) {
                let lr = ls - lq;
                // log(m/q) = log(1 - γ + γ s/q)
                let log_ratio = if lr < 700.0 {
                    (gamma * lr.exp_m1()).ln_1p()
                } else {
                    log_add_exp((1.0 - gamma).ln(), gamma.ln() + lr)
                };
                let log_m = lq + log_ratio;
                if !log_m.is_finite() && log_m != f64::NEG_INFINITY {
                    return Err(Error::invalid("curvature_probe", "blended density is not finite"));
                }
                let m = log_m.exp();
                let term = if m > 0.0 { m * log_ratio } else { 0.0 };
                vals.push(term - gamma * (ls.exp() - lq.exp()));
            }
            Ok(2.0 / (gamma * gamma) * grid.integrate_values(&vals))
        })
        .collect()
}

/// ∫ (s - q)² / q, the γ → 0 limit of [`curvature_probe`].
pub fn chi_square_divergence(s: &BaseDensity, q: &Mixture, grid: &QuadratureGrid) -> Result<f64> {
    check_1d(s, q)?;
    Ok(grid.integrate(|z| {
        let ls = s.log_prob_unchecked(&[z]);
        let lq = q.log_prob_unchecked(&[z]);
        // (s - q)²/q = q (s/q - 1)²
        let r = (ls - lq).exp_m1();
        let v = lq.exp() * r * r;
        if v.is_finite() { v } else { 0.0 }
    }))
}

/// ∫ (s - q)², the squared L2 distance between the densities.
pub fn l2_distance_sq(s: &BaseDensity, q: &Mixture, grid: &QuadratureGrid) -> Result<f64> {
    check_1d(s, q)?;
    Ok(grid.integrate(|z| {
        let d = s.log_prob_unchecked(&[z]).exp() - q.log_prob_unchecked(&[z]).exp();
        d * d
    }))
}
