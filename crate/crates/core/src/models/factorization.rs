use super::{MatrixData, TargetModel};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LN_2PI};

/// Bayesian matrix factorization R ≈ UᵀV with unit observation noise and
/// standard-normal priors on every entry of U (K × rows) and V (K × cols).
///
/// The latent vector stacks U column by column (the K-vector of row `i` is
/// `z[i*K .. (i+1)*K]`) followed by V in the same layout.
#[derive(Debug, Clone)]
pub struct MatrixFactorization {
    data: MatrixData,
    latent_dim: usize,
}

pub fn matrix_factorization_model(data: MatrixData, latent_dim: usize) -> Result<MatrixFactorization> {
    if latent_dim < 1 {
        return Err(Error::invalid("latent_dim", "must be at least 1"));
    }
    Ok(MatrixFactorization { data, latent_dim })
}

impl MatrixFactorization {
    pub fn data(&self) -> &MatrixData {
        &self.data
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn row_factor<'a>(&self, z: &'a [f64], i: usize) -> &'a [f64] {
        row_factor(z, self.latent_dim, i)
    }

    pub fn col_factor<'a>(&self, z: &'a [f64], j: usize) -> &'a [f64] {
        col_factor(z, self.latent_dim, self.data.n_rows(), j)
    }

    /// (UᵀV)_ij for latent vector `z`.
    pub fn predict(&self, z: &[f64], i: usize, j: usize) -> f64 {
        dot(self.row_factor(z, i), self.col_factor(z, j))
    }
}

pub(crate) fn row_factor(z: &[f64], k: usize, i: usize) -> &[f64] {
    &z[i * k..(i + 1) * k]
}

pub(crate) fn col_factor(z: &[f64], k: usize, n_rows: usize, j: usize) -> &[f64] {
    let off = n_rows * k + j * k;
    &z[off..off + k]
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn unit_normal_log_pdf(r: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * r * r
}

impl TargetModel for MatrixFactorization {
    fn dim(&self) -> usize {
        self.latent_dim * (self.data.n_rows() + self.data.n_cols())
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        let prior: f64 = z.iter().map(|&x| unit_normal_log_pdf(x)).sum();
        let lik: f64 = self
            .data
            .cells()
            .iter()
            .map(|c| unit_normal_log_pdf(c.value - self.predict(z, c.row, c.col)))
            .sum();
        prior + lik
    }

    fn grad_log_joint(&self, z: &[f64]) -> Option<Vec<f64>> {
        let k = self.latent_dim;
        let n_rows = self.data.n_rows();
        let mut g: Vec<f64> = z.iter().map(|x| -x).collect();
        for c in self.data.cells() {
            let u = self.row_factor(z, c.row);
            let v = self.col_factor(z, c.col);
            let resid = c.value - dot(u, v);
            let (gu, gv) = (c.row * k, n_rows * k + c.col * k);
            for d in 0..k {
                g[gu + d] += resid * v[d];
                g[gv + d] += resid * u[d];
            }
        }
        Some(g)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn description(&self) -> String {
        format!(
            "Bayesian matrix factorization {}x{}, K={}, {} observed cells",
            self.data.n_rows(),
            self.data.n_cols(),
            self.latent_dim,
            self.data.len()
        )
    }

    fn train_log_likelihood(&self, samples: &[Vec<f64>]) -> Option<f64> {
        if self.data.is_empty() || samples.is_empty() {
            return None;
        }
        let ln_s = (samples.len() as f64).ln();
        let total: f64 = self
            .data
            .cells()
            .iter()
            .map(|c| {
                let terms: Vec<f64> = samples
                    .iter()
                    .map(|z| unit_normal_log_pdf(c.value - self.predict(z, c.row, c.col)))
                    .collect();
                log_sum_exp(&terms) - ln_s
            })
            .sum();
        Some(total / self.data.len() as f64)
    }
}
