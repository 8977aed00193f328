use super::TargetModel;
use crate::density::{BaseDensity, Mixture};
use crate::error::Result;

/// Two-component 1-D Gaussian mixture target. It lies inside the convex hull
/// of Gaussian atoms, so its optimal KL over mixtures is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalTarget {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub pi: [f64; 2],
    mixture: Mixture,
}

impl Default for BimodalTarget {
    fn default() -> Self {
        synthetic_bimodal_target([-1.0, 1.0], [0.5, 0.5], [0.4, 0.6]).expect("valid defaults")
    }
}

pub fn synthetic_bimodal_target(mu: [f64; 2], sigma: [f64; 2], pi: [f64; 2]) -> Result<BimodalTarget> {
    let atoms = vec![
        BaseDensity::gaussian(vec![mu[0]], vec![sigma[0]])?,
        BaseDensity::gaussian(vec![mu[1]], vec![sigma[1]])?,
    ];
    let mixture = Mixture::new(atoms, pi.to_vec())?;
    Ok(BimodalTarget {
        mu,
        sigma,
        pi,
        mixture,
    })
}

impl BimodalTarget {
    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }
}

impl TargetModel for BimodalTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_joint(&self, z: &[f64]) -> f64 {
        self.mixture().log_prob_unchecked(z)
    }

    fn grad_log_joint(&self, z: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0];
        self.mixture().add_grad_log_prob(z, 1.0, &mut g);
        Some(g)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn description(&self) -> String {
        format!(
            "bimodal Gaussian mixture mu={:?} sigma={:?} pi={:?}",
            self.mu, self.sigma, self.pi
        )
    }
}
