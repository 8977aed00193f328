use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::base::BaseDensity;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::rng;

const SIMPLEX_TOL: f64 = 1e-12;

/// Convex combination of atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct Mixture {
    atoms: Vec<BaseDensity>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMixture {
    atoms: Vec<BaseDensity>,
    weights: Vec<f64>,
}

impl TryFrom<RawMixture> for Mixture {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        Mixture::new(raw.atoms, raw.weights)
    }
}

impl Mixture {
    /// Weights must be nonnegative and sum to one within 1e-12; they are
    /// renormalized to absorb the rounding.
    pub fn new(atoms: Vec<BaseDensity>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let dim = atoms[0].dim();
        if let Some(a) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.dim(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(
                "weights",
                format!("must sum to 1, sum is {total}"),
            ));
        }
        Ok(Self::from_parts_normalized(atoms, weights))
    }

    /// Accepts any nonnegative weights with positive total and rescales them.
    pub fn normalized(atoms: Vec<BaseDensity>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("weights", "total must be positive"));
        }
        let w = weights.iter().map(|w| w / total).collect();
        Self::new(atoms, w)
    }

    pub(crate) fn from_parts_normalized(atoms: Vec<BaseDensity>, mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { atoms, weights }
    }

    pub fn single(atom: BaseDensity) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[BaseDensity] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn log_prob(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(self.log_prob_unchecked(z))
    }

    pub(crate) fn log_prob_unchecked(&self, z: &[f64]) -> f64 {
        if self.atoms.len() == 1 {
            return self.atoms[0].log_prob_unchecked(z);
        }
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(a, &w)| w.ln() + a.log_prob_unchecked(z))
            .collect();
        log_sum_exp(&terms)
    }

    /// ∇_z log q(z): responsibility-weighted atom scores.
    pub fn grad_log_prob(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let mut g = vec![0.0; self.dim()];
        self.add_grad_log_prob(z, 1.0, &mut g);
        Ok(g)
    }

    pub(crate) fn add_grad_log_prob(&self, z: &[f64], scale: f64, out: &mut [f64]) {
        let logs: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| {
                if w > 0.0 {
                    w.ln() + a.log_prob_unchecked(z)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let total = log_sum_exp(&logs);
        for (a, l) in self.atoms.iter().zip(&logs) {
            let r = (l - total).exp();
            if r > 0.0 {
                a.add_grad_log_prob(z, scale * r, out);
            }
        }
    }

    /// `n` draws, deterministic in `seed`. Row `i` is sample `i`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed);
        self.sample_with(&mut r, n)
    }

    pub(crate) fn sample_with<R: rand::Rng + ?Sized>(&self, r: &mut R, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let pick = if self.atoms.len() > 1 {
            Some(WeightedIndex::new(&self.weights).expect("simplex weights"))
        } else {
            None
        };
        (0..n)
            .map(|_| {
                let k = pick.as_ref().map_or(0, |p| p.sample(r));
                let mut z = vec![0.0; d];
                self.atoms[k].sample_into(r, &mut z);
                z
            })
            .collect()
    }
}

impl From<BaseDensity> for Mixture {
    fn from(atom: BaseDensity) -> Self {
        Mixture::single(atom)
    }
}
