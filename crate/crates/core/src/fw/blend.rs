//! Monte-Carlo negative ELBO of mixtures over a fixed atom set.
//!
//! Every atom is sampled with the same standardized noise at each sample
//! index, so objectives for different weight vectors are paired comparisons
//! (common random numbers). Expectations under a mixture are stratified over
//! its atoms.

use rayon::prelude::*;

use crate::density::{BaseDensity, Family};
use crate::math::{log_add_exp, log_sum_exp};
use crate::models::TargetModel;
use crate::rng;

/// Standardized noise shared by all atoms at one sample index.
pub(crate) struct SharedNoise {
    gaussian: Vec<Vec<f64>>,
    laplace: Vec<Vec<f64>>,
}

impl SharedNoise {
    pub(crate) fn draw(atoms: &[&BaseDensity], n: usize, seed: u64) -> Self {
        let d = atoms[0].dim();
        let want = |f: Family| atoms.iter().any(|a| a.family() == f);
        let mut r = rng::stream(seed);
        let mut block = |f: Family, on: bool| -> Vec<Vec<f64>> {
            if !on {
                return Vec::new();
            }
            (0..n)
                .map(|_| (0..d).map(|_| f.standard_noise(&mut r)).collect())
                .collect()
        };
        let gaussian = block(Family::Gaussian, want(Family::Gaussian));
        let laplace = block(Family::Laplace, want(Family::Laplace));
        Self { gaussian, laplace }
    }

    pub(crate) fn place(&self, atom: &BaseDensity, i: usize, out: &mut [f64]) {
        let eps = match atom.family() {
            Family::Gaussian => &self.gaussian[i],
            Family::Laplace => &self.laplace[i],
        };
        atom.transform(eps, out);
    }
}

pub(crate) struct BlendObjective {
    k: usize,
    n: usize,
    /// log atom_b(z_{a,i}) at index (a·k + b)·n + i.
    log_atoms: Vec<f64>,
    /// log p(z_{a,i}) at index a·n + i.
    log_p: Vec<f64>,
}

impl BlendObjective {
    pub(crate) fn new(atoms: &[BaseDensity], model: &dyn TargetModel, n: usize, seed: u64) -> Self {
        let k = atoms.len();
        let refs: Vec<&BaseDensity> = atoms.iter().collect();
        let noise = SharedNoise::draw(&refs, n, seed);
        let d = atoms[0].dim();
        let per_atom: Vec<(Vec<f64>, Vec<f64>)> = atoms
            .par_iter()
            .map(|a| {
                let mut z = vec![0.0; d];
                let mut la = vec![0.0; k * n];
                let mut lp = vec![0.0; n];
                for i in 0..n {
                    noise.place(a, i, &mut z);
                    lp[i] = model.log_joint(&z);
                    for (b, other) in atoms.iter().enumerate() {
                        la[b * n + i] = other.log_prob_unchecked(&z);
                    }
                }
                (la, lp)
            })
            .collect();
        let mut log_atoms = Vec::with_capacity(k * k * n);
        let mut log_p = Vec::with_capacity(k * n);
        for (la, lp) in per_atom {
            log_atoms.extend(la);
            log_p.extend(lp);
        }
        Self { k, n, log_atoms, log_p }
    }

    pub(crate) fn n_atoms(&self) -> usize {
        self.k
    }

    fn la(&self, a: usize, b: usize, i: usize) -> f64 {
        self.log_atoms[(a * self.k + b) * self.n + i]
    }

    /// log m(z_{a,i}) for the mixture with weights `w`, at index a·n + i.
    pub(crate) fn log_mixture(&self, w: &[f64]) -> Vec<f64> {
        let lw: Vec<f64> = w.iter().map(|w| w.ln()).collect();
        let mut terms = Vec::with_capacity(self.k);
        let mut out = vec![0.0; self.k * self.n];
        for a in 0..self.k {
            for i in 0..self.n {
                terms.clear();
                terms.extend((0..self.k).filter(|&b| w[b] > 0.0).map(|b| lw[b] + self.la(a, b, i)));
                out[a * self.n + i] = log_sum_exp(&terms);
            }
        }
        out
    }

    /// Σ_a w_a mean_i [log m(z_{a,i}) - log p(z_{a,i})].
    pub(crate) fn value_with(&self, w: &[f64], log_m: &[f64]) -> f64 {
        let n = self.n;
        (0..self.k)
            .filter(|&a| w[a] > 0.0)
            .map(|a| {
                let s: f64 = (0..n).map(|i| log_m[a * n + i] - self.log_p[a * n + i]).sum();
                w[a] * s / n as f64
            })
            .sum()
    }

    pub(crate) fn value(&self, w: &[f64]) -> f64 {
        self.value_with(w, &self.log_mixture(w))
    }

    /// Exact gradient of the sample objective in the weights.
    pub(crate) fn gradient(&self, w: &[f64], log_m: &[f64]) -> Vec<f64> {
        let n = self.n;
        let nf = n as f64;
        (0..self.k)
            .map(|j| {
                let direct: f64 = (0..n).map(|i| log_m[j * n + i] - self.log_p[j * n + i]).sum::<f64>() / nf;
                let through_mix: f64 = (0..self.k)
                    .filter(|&a| w[a] > 0.0)
                    .map(|a| {
                        let s: f64 = (0..n).map(|i| (self.la(a, j, i) - log_m[a * n + i]).exp()).sum();
                        w[a] * s / nf
                    })
                    .sum();
                direct + through_mix
            })
            .collect()
    }

    /// Objective along the segment w + η (e_j - w), reusing log m at w.
    pub(crate) fn segment_value(&self, w: &[f64], log_m: &[f64], j: usize, eta: f64) -> f64 {
        let n = self.n;
        let keep = (1.0 - eta).ln();
        let add = eta.ln();
        let mut total = 0.0;
        for a in 0..self.k {
            let wa = (1.0 - eta) * w[a] + if a == j { eta } else { 0.0 };
            if wa <= 0.0 {
                continue;
            }
            let s: f64 = (0..n)
                .map(|i| {
                    let lm = log_add_exp(keep + log_m[a * n + i], add + self.la(a, j, i));
                    lm - self.log_p[a * n + i]
                })
                .sum();
            total += wa * s / n as f64;
        }
        total
    }
}

/// Minimizes a function on [lo, hi] by golden-section search.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid search over [0, 1] refined by golden section around the grid
/// minimizer. Ties (within a relative 1e-12) resolve toward the smaller
/// argument; the refinement is kept only if it strictly improves.
pub(crate) fn minimize_unit_interval(f: impl Fn(f64) -> f64, n_grid: usize) -> (f64, f64) {
    let n_grid = n_grid.max(2);
    let tie = |best: f64| 1e-12 * (1.0 + best.abs());
    let mut best = (0.0, f(0.0));
    let h = 1.0 / (n_grid - 1) as f64;
    let mut best_i = 0;
    for i in 1..n_grid {
        let x = i as f64 * h;
        let v = f(x);
        if v < best.1 - tie(best.1) {
            best = (x, v);
            best_i = i;
        }
    }
    let lo = best_i.saturating_sub(1) as f64 * h;
    let hi = ((best_i + 1).min(n_grid - 1)) as f64 * h;
    let (x, v) = golden_section(&f, lo, hi, 40);
    if v < best.1 - tie(best.1) {
        best = (x, v);
    }
    best
}
