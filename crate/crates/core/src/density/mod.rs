//! Mean-field base densities, their mixtures, and the closed-form and
//! quadrature quantities the boosting loop and its probes rely on.

mod base;
mod mixture;
mod quadrature;

pub use base::{kl_gaussian_closed, BaseDensity, Family, ParamBounds};
pub use mixture::Mixture;
pub use quadrature::{quadrature_kl, quadrature_kl_with_tol, QuadratureGrid, DEFAULT_REFINE_TOL};

/// log s(z) for a single atom.
pub fn base_log_prob(d: &BaseDensity, z: &[f64]) -> crate::Result<f64> {
    d.log_prob(z)
}

/// log q(z) for a mixture, max-shifted log-sum-exp over atoms.
pub fn mixture_log_prob(m: &Mixture, z: &[f64]) -> crate::Result<f64> {
    m.log_prob(z)
}

pub fn entropy_closed_form(d: &BaseDensity) -> f64 {
    d.entropy()
}

pub fn sup_norm(d: &BaseDensity) -> f64 {
    d.sup_norm()
}

/// Entropy plus log sup-norm. Nonnegative for every density; for these
/// families it is 1/2 (Gaussian) or 1 (Laplace) per coordinate.
pub fn entropy_sup_norm_slack(d: &BaseDensity) -> f64 {
    d.entropy() + d.log_sup_norm()
}
