use crate::density::{BaseDensity, Mixture};
use crate::error::{Error, Result};

/// Atoms whose parameters agree within this distance are merged.
pub const MERGE_TOL: f64 = 1e-9;

/// Step size of the fixed-step variant, 2 / (δt + 2).
pub fn fixed_step_gamma(t: usize, delta: f64) -> f64 {
    2.0 / (delta * t as f64 + 2.0)
}

/// (1 - γ) q + γ s. A duplicate of an existing atom absorbs the new weight;
/// zero-weight atoms are dropped.
pub fn mixture_step(q: &Mixture, s: &BaseDensity, gamma: f64) -> Result<Mixture> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma", format!("must lie in [0, 1], got {gamma}")));
    }
    if s.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: s.dim(),
        });
    }
    let mut atoms: Vec<BaseDensity> = q.atoms().to_vec();
    let mut weights: Vec<f64> = q.weights().iter().map(|w| (1.0 - gamma) * w).collect();
    match atoms.iter().position(|a| a.approx_eq(s, MERGE_TOL)) {
        Some(k) => weights[k] += gamma,
        None => {
            atoms.push(s.clone());
            weights.push(gamma);
        }
    }
    Ok(compact(atoms, weights))
}

/// Drops zero weights and renormalizes.
pub(crate) fn compact(atoms: Vec<BaseDensity>, weights: Vec<f64>) -> Mixture {
    let (atoms, weights): (Vec<_>, Vec<_>) = atoms
        .into_iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .unzip();
    Mixture::from_parts_normalized(atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn n(m: f64, s: f64) -> BaseDensity {
        BaseDensity::normal_1d(m, s)
    }

    #[test]
    fn gamma_schedule() {
        assert_eq!(fixed_step_gamma(0, 1.0), 1.0);
        assert_eq!(fixed_step_gamma(2, 1.0), 0.5);
        assert!((fixed_step_gamma(2, 0.5) - 0.666667).abs() < 1e-6);
    }

    #[test]
    fn step_scales_and_appends() {
        let q = Mixture::new(vec![n(-1.0, 1.0), n(1.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let m = mixture_step(&q, &n(3.0, 1.0), 0.2).unwrap();
        assert_eq!(m.len(), 3);
        for (w, e) in m.weights().iter().zip([0.4, 0.4, 0.2]) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoints() {
        let q = Mixture::new(vec![n(-1.0, 1.0), n(1.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let s = n(3.0, 0.5);
        assert_eq!(mixture_step(&q, &s, 1.0).unwrap(), Mixture::single(s.clone()));
        assert_eq!(mixture_step(&q, &s, 0.0).unwrap(), q);
    }

    #[test]
    fn duplicate_atom_merges() {
        let q = Mixture::new(vec![n(-1.0, 1.0), n(1.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let m = mixture_step(&q, &n(1.0 + 1e-12, 1.0), 0.2).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.weights()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn bad_gamma_rejected() {
        let q = Mixture::single(n(0.0, 1.0));
        assert!(mixture_step(&q, &n(1.0, 1.0), 1.5).is_err());
        assert!(mixture_step(&q, &n(1.0, 1.0), f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn step_stays_on_simplex(
            ws in prop::collection::vec(0.01f64..1.0, 1..8),
            gammas in prop::collection::vec(0.0f64..=1.0, 1..12),
        ) {
            let total: f64 = ws.iter().sum();
            let atoms = (0..ws.len()).map(|k| n(k as f64, 1.0)).collect();
            let mut q = Mixture::normalized(atoms, ws.clone()).unwrap();
            prop_assert!((ws.iter().map(|w| w / total).sum::<f64>() - 1.0).abs() < 1e-12);
            for (i, g) in gammas.iter().enumerate() {
                q = mixture_step(&q, &n(-(i as f64) - 1.0, 0.5), *g).unwrap();
                let sum: f64 = q.weights().iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(q.weights().iter().all(|w| *w > 0.0 && *w <= 1.0));
            }
        }
    }
}
