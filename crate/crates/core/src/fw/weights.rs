use super::blend::{minimize_unit_interval, BlendObjective};
use crate::density::{BaseDensity, Mixture};
use crate::error::{Error, Result};
use crate::models::TargetModel;

/// Step size minimizing the Monte-Carlo negative ELBO of
/// (1 - γ) q + γ s over a uniform grid of `n_grid` points, refined by golden
/// section. `n_samples` draws per atom, shared across all γ.
pub fn line_search_gamma(
    q: &Mixture,
    s: &BaseDensity,
    model: &dyn TargetModel,
    n_grid: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    check(s.dim(), model, n_samples)?;
    if q.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: s.dim(),
        });
    }
    let mut atoms = q.atoms().to_vec();
    atoms.push(s.clone());
    let obj = BlendObjective::new(&atoms, model, n_samples, seed);
    let f = |gamma: f64| {
        let mut w: Vec<f64> = q.weights().iter().map(|qi| (1.0 - gamma) * qi).collect();
        w.push(gamma);
        obj.value(&w)
    };
    let (gamma, _) = minimize_unit_interval(f, n_grid);
    Ok(gamma)
}

/// Simplex weights over `atoms` minimizing the Monte-Carlo negative ELBO,
/// by Frank-Wolfe on the weight vector starting from uniform weights.
pub fn fully_corrective_weights(
    atoms: &[BaseDensity],
    model: &dyn TargetModel,
    n_samples: usize,
    seed: u64,
    inner_iters: usize,
) -> Result<Vec<f64>> {
    if atoms.is_empty() {
        return Err(Error::EmptyMixture);
    }
    let k = atoms.len();
    corrective_from(atoms, vec![1.0 / k as f64; k], model, n_samples, seed, inner_iters)
}

/// Fully corrective solve warm-started at `init`.
pub(crate) fn corrective_from(
    atoms: &[BaseDensity],
    init: Vec<f64>,
    model: &dyn TargetModel,
    n_samples: usize,
    seed: u64,
    inner_iters: usize,
) -> Result<Vec<f64>> {
    check(atoms[0].dim(), model, n_samples)?;
    if let Some(a) = atoms.iter().find(|a| a.dim() != model.dim()) {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: a.dim(),
        });
    }
    let k = atoms.len();
    if init.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: init.len() });
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let obj = BlendObjective::new(atoms, model, n_samples, seed);
    debug_assert_eq!(obj.n_atoms(), k);
    let mut w = init;
    for _ in 0..inner_iters {
        let log_m = obj.log_mixture(&w);
        let current = obj.value_with(&w, &log_m);
        let g = obj.gradient(&w, &log_m);
        let (vertex, g_min) = g
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (j, v)| if v < best.1 { (j, v) } else { best });
        let fw_gap: f64 = w.iter().zip(&g).map(|(wi, gi)| wi * gi).sum::<f64>() - g_min;
        if fw_gap <= 1e-10 {
            break;
        }
        let (eta, value) = minimize_unit_interval(|eta| obj.segment_value(&w, &log_m, vertex, eta), 11);
        if !(eta > 0.0 && value < current) {
            break;
        }
        for (j, wj) in w.iter_mut().enumerate() {
            *wj *= 1.0 - eta;
            if j == vertex {
                *wj += eta;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wj| *wj /= total);
    }
    Ok(w)
}

fn check(dim: usize, model: &dyn TargetModel, n_samples: usize) -> Result<()> {
    if dim != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: dim,
        });
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    Ok(())
}
