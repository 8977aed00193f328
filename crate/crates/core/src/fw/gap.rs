use super::blend::SharedNoise;
use crate::density::{BaseDensity, Mixture, ParamBounds};
use crate::error::{Error, Result};
use crate::math::mean_stderr;
use crate::models::TargetModel;
use crate::relbo::McEstimate;
use crate::rng;

fn check(q: &Mixture, model: &dyn TargetModel, n: usize) -> Result<()> {
    if q.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: q.dim(),
        });
    }
    if n < 2 {
        return Err(Error::invalid("gap_samples", "need at least 2 draws for a standard error"));
    }
    Ok(())
}

/// Frank-Wolfe duality gap at `q` with `s` standing in for the maximizing
/// atom: E_q[log q - log p] - E_s[log q - log p].
///
/// Draw `i` feeds the same standardized noise to `s` and to every atom of `q`
/// (the `q` expectation is stratified over atoms), so the per-draw
/// differences are i.i.d. and give the standard error directly. Constants in
/// `log p` cancel.
pub fn duality_gap_estimate(
    q: &Mixture,
    s: &BaseDensity,
    model: &dyn TargetModel,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check(q, model, n)?;
    if s.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: s.dim(),
        });
    }
    let mut refs: Vec<&BaseDensity> = q.atoms().iter().collect();
    refs.push(s);
    let noise = SharedNoise::draw(&refs, n, seed);
    let mut z = vec![0.0; q.dim()];
    let mut f = |atom: &BaseDensity, i: usize| {
        noise.place(atom, i, &mut z);
        q.log_prob_unchecked(&z) - model.log_joint(&z)
    };
    let diffs: Vec<f64> = (0..n)
        .map(|i| {
            let under_q: f64 = q
                .atoms()
                .iter()
                .zip(q.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, &w)| w * f(a, i))
                .sum();
            under_q - f(s, i)
        })
        .collect();
    let (mean, stderr) = mean_stderr(&diffs);
    Ok(McEstimate { mean, stderr })
}

/// Per-coordinate box spanning `SEARCH_RADIUS` scales around every atom
/// of `q` and `s`, intersected with the location box.
fn search_box(q: &Mixture, s: &BaseDensity, loc_bound: f64) -> Vec<(f64, f64)> {
    (0..s.dim())
        .map(|k| {
            let (lo, hi) = q.atoms().iter().chain(std::iter::once(s)).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), a| {
                    let r = SEARCH_RADIUS * a.scale()[k];
                    (lo.min(a.loc()[k] - r), hi.max(a.loc()[k] + r))
                },
            );
            (lo.max(-loc_bound), hi.min(loc_bound))
        })
        .collect()
}

const SEARCH_RADIUS: f64 = 4.0;

/// Local maximizer of log p - log q by gradient ascent with step-size
/// backtracking, started at `start` and kept inside `region`.
fn ascend_log_ratio(q: &Mixture, model: &dyn TargetModel, start: &[f64], region: &[(f64, f64)]) -> Option<Vec<f64>> {
    let h = |z: &[f64]| model.log_joint(z) - q.log_prob_unchecked(z);
    let grad = |z: &[f64]| {
        let mut g = model.grad_log_joint(z)?;
        q.add_grad_log_prob(z, -1.0, &mut g);
        Some(g)
    };
    let mut z: Vec<f64> = start.iter().zip(region).map(|(v, &(lo, hi))| v.clamp(lo, hi)).collect();
    let mut value = h(&z);
    let mut step = 0.1;
    for _ in 0..300 {
        let g = grad(&z)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-10) || !norm.is_finite() {
            break;
        }
        loop {
            let trial: Vec<f64> = z
                .iter()
                .zip(&g)
                .zip(region)
                .map(|((zi, gi), &(lo, hi))| (zi + step * gi / norm).clamp(lo, hi))
                .collect();
            let v = h(&trial);
            if v > value {
                z = trial;
                value = v;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return Some(z);
            }
        }
    }
    Some(z)
}

/// Duality gap with an improved inner maximizer: the larger of the
/// estimates obtained with `s` and with a sharp atom (at the scale floor)
/// centred on the best local maximizer of log p - log q found from a few
/// starting points. The search stays within four scales of the atoms of `q`
/// and `s`: where q is narrower than p in the tails the ratio grows without
/// bound, and an atom out there certifies nothing useful. The linear functional is
/// minimized by concentrated atoms, which the entropy term of the residual
/// ELBO discourages, so `s` alone can understate the gap. Any atom gives a
/// lower bound on the exact gap, so the maximum is still an estimate of it.
/// Without a model gradient only rescaled copies of `s` are tried.
pub fn certified_gap(
    q: &Mixture,
    s: &BaseDensity,
    model: &dyn TargetModel,
    n: usize,
    seed: u64,
    bounds: &ParamBounds,
) -> Result<McEstimate> {
    let mut candidates = vec![s.clone()];
    let sharp = |loc: Vec<f64>| {
        let scale = vec![bounds.scale_floor; loc.len()];
        BaseDensity::new_within(s.family(), loc, scale, bounds).ok()
    };
    if model.has_gradient() {
        let mut starts: Vec<Vec<f64>> = std::iter::once(s.loc())
            .chain(q.atoms().iter().map(|a| a.loc()))
            .map(<[f64]>::to_vec)
            .collect();
        // a few draws from widened copies of q and s, for maxima away from
        // the current atoms
        let mut r = rng::substream(seed, &[0x5747]);
        let widened = |a: &BaseDensity| {
            let scale = a.scale().iter().map(|v| 2.0 * v).collect();
            BaseDensity::new_within(a.family(), a.loc().to_vec(), scale, &ParamBounds::new(bounds.scale_floor, f64::INFINITY).expect("floor already validated"))
        };
        for a in q.atoms().iter().chain(std::iter::once(s)) {
            let w = widened(a)?;
            for _ in 0..4 {
                let mut z = vec![0.0; a.dim()];
                w.sample_into(&mut r, &mut z);
                starts.push(z);
            }
        }
        // a sharp atom scores about -h(z), so only the best local maximum
        // needs a Monte-Carlo estimate
        let h = |z: &[f64]| model.log_joint(z) - q.log_prob_unchecked(z);
        let region = search_box(q, s, bounds.loc_bound);
        let best = starts
            .iter()
            .filter_map(|start| ascend_log_ratio(q, model, start, &region))
            .map(|z| (h(&z), z))
            .filter(|(v, _)| v.is_finite())
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, z)) = best {
            candidates.extend(sharp(z));
        }
    } else {
        for shrink in [0.5, 0.1] {
            let scale: Vec<f64> = s.scale().iter().map(|v| (v * shrink).max(bounds.scale_floor)).collect();
            candidates.extend(BaseDensity::new_within(s.family(), s.loc().to_vec(), scale, bounds).ok());
        }
    }
    let mut best: Option<McEstimate> = None;
    for c in &candidates {
        let g = duality_gap_estimate(q, c, model, n, seed)?;
        if best.is_none_or(|b| g.mean > b.mean) {
            best = Some(g);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Stratified Monte-Carlo ELBO of a mixture, E_q[log p - log q].
pub fn mixture_elbo(q: &Mixture, model: &dyn TargetModel, n: usize, seed: u64) -> Result<McEstimate> {
    check(q, model, n)?;
    let refs: Vec<&BaseDensity> = q.atoms().iter().collect();
    let noise = SharedNoise::draw(&refs, n, seed);
    let mut z = vec![0.0; q.dim()];
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            q.atoms()
                .iter()
                .zip(q.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, &w)| {
                    noise.place(a, i, &mut z);
                    w * (model.log_joint(&z) - q.log_prob_unchecked(&z))
                })
                .sum()
        })
        .collect();
    let (mean, stderr) = mean_stderr(&vals);
    Ok(McEstimate { mean, stderr })
}
