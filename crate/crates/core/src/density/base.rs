use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{LN_2, LN_2PI};

/// Base family of a mean-field location-scale atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Laplace,
}

impl Family {
    /// One draw of the standardized variable (loc 0, scale 1).
    pub fn standard_noise<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Laplace => {
                // inverse CDF; u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = 1.0 - 2.0 * u.abs();
                -u.signum() * tail.max(f64::MIN_POSITIVE).ln()
            }
        }
    }

    /// log density of the standardized variable.
    pub fn standard_log_prob(self, eps: f64) -> f64 {
        match self {
            Family::Gaussian => -0.5 * LN_2PI - 0.5 * eps * eps,
            Family::Laplace => -LN_2 - eps.abs(),
        }
    }

    /// d/dε of `standard_log_prob`.
    pub fn standard_score(self, eps: f64) -> f64 {
        match self {
            Family::Gaussian => -eps,
            Family::Laplace => -sign(eps),
        }
    }

    /// Entropy of the standardized variable.
    pub fn standard_entropy(self) -> f64 {
        match self {
            Family::Gaussian => 0.5 * (LN_2PI + 1.0),
            Family::Laplace => 1.0 + LN_2,
        }
    }

    /// Peak value of the standardized density.
    pub fn standard_peak(self) -> f64 {
        match self {
            Family::Gaussian => (-0.5 * LN_2PI).exp(),
            Family::Laplace => 0.5,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Admissible parameter region for atoms: scales bounded below, locations
/// inside a box. Keeps the sup-norm of every atom finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub scale_floor: f64,
    pub loc_bound: f64,
}

impl ParamBounds {
    pub const DEFAULT_SCALE_FLOOR: f64 = 1e-3;
    pub const DEFAULT_LOC_BOUND: f64 = 1e3;

    pub fn new(scale_floor: f64, loc_bound: f64) -> Result<Self> {
        if !(scale_floor > 0.0 && scale_floor.is_finite()) {
            return Err(Error::invalid(
                "scale_floor",
                format!("must be a positive finite number (degenerate family otherwise), got {scale_floor}"),
            ));
        }
        if !(loc_bound > 0.0) {
            return Err(Error::invalid(
                "loc_bound",
                format!("must be positive, got {loc_bound}"),
            ));
        }
        Ok(Self {
            scale_floor,
            loc_bound,
        })
    }

    pub fn clamp_loc(&self, x: f64) -> f64 {
        x.clamp(-self.loc_bound, self.loc_bound)
    }
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            scale_floor: Self::DEFAULT_SCALE_FLOOR,
            loc_bound: Self::DEFAULT_LOC_BOUND,
        }
    }
}

/// A fully factorized location-scale density: the atoms the mixture is built
/// from. `scale` is the standard deviation for Gaussians and the diversity `b`
/// for Laplace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBaseDensity")]
pub struct BaseDensity {
    family: Family,
    loc: Vec<f64>,
    scale: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBaseDensity {
    family: Family,
    loc: Vec<f64>,
    scale: Vec<f64>,
}

impl TryFrom<RawBaseDensity> for BaseDensity {
    type Error = Error;

    fn try_from(raw: RawBaseDensity) -> Result<Self> {
        BaseDensity::new(raw.family, raw.loc, raw.scale)
    }
}

impl BaseDensity {
    /// Validates against the default bounds.
    pub fn new(family: Family, loc: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        Self::new_within(family, loc, scale, &ParamBounds::default())
    }

    pub fn new_within(
        family: Family,
        loc: Vec<f64>,
        scale: Vec<f64>,
        bounds: &ParamBounds,
    ) -> Result<Self> {
        if loc.is_empty() {
            return Err(Error::invalid("loc", "dimension must be at least 1"));
        }
        if loc.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                expected: loc.len(),
                got: scale.len(),
            });
        }
        if let Some(&bad) = loc
            .iter()
            .find(|l| !l.is_finite() || l.abs() > bounds.loc_bound)
        {
            return Err(Error::invalid(
                "loc",
                format!("{bad} outside [-{b}, {b}]", b = bounds.loc_bound),
            ));
        }
        if let Some(&bad) = scale
            .iter()
            .find(|s| !s.is_finite() || **s < bounds.scale_floor)
        {
            return Err(Error::invalid(
                "scale",
                format!("{bad} below floor {}", bounds.scale_floor),
            ));
        }
        Ok(Self { family, loc, scale })
    }

    pub fn gaussian(loc: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        Self::new(Family::Gaussian, loc, scale)
    }

    pub fn laplace(loc: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        Self::new(Family::Laplace, loc, scale)
    }

    /// One-dimensional Gaussian; panics on invalid parameters.
    pub fn normal_1d(loc: f64, scale: f64) -> Self {
        Self::gaussian(vec![loc], vec![scale]).expect("valid 1-D Gaussian")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    pub fn log_prob(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.log_prob_unchecked(z))
    }

    pub(crate) fn log_prob_unchecked(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.loc)
            .zip(&self.scale)
            .map(|((&z, &m), &s)| self.family.standard_log_prob((z - m) / s) - s.ln())
            .sum()
    }

    /// ∇_z log s(z), accumulated into `out` scaled by `weight`.
    pub(crate) fn add_grad_log_prob(&self, z: &[f64], weight: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let s = self.scale[j];
            *o += weight * self.family.standard_score((z[j] - self.loc[j]) / s) / s;
        }
    }

    pub fn grad_log_prob(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut g = vec![0.0; self.dim()];
        self.add_grad_log_prob(z, 1.0, &mut g);
        Ok(g)
    }

    /// Gradient of log s(z) with respect to (loc, log scale) at fixed z.
    pub(crate) fn param_score(&self, z: &[f64], d_loc: &mut [f64], d_log_scale: &mut [f64]) {
        for j in 0..self.dim() {
            let s = self.scale[j];
            let eps = (z[j] - self.loc[j]) / s;
            let score = self.family.standard_score(eps);
            d_loc[j] = -score / s;
            d_log_scale[j] = -score * eps - 1.0;
        }
    }

    /// Writes one draw into `out`; also returns the standardized noise in `eps`.
    pub(crate) fn sample_with_noise<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        eps: &mut [f64],
        out: &mut [f64],
    ) {
        for j in 0..self.dim() {
            eps[j] = self.family.standard_noise(rng);
            out[j] = self.loc[j] + self.scale[j] * eps[j];
        }
    }

    /// Maps standardized noise to a draw: loc + scale·ε.
    pub(crate) fn transform(&self, eps: &[f64], out: &mut [f64]) {
        for j in 0..self.dim() {
            out[j] = self.loc[j] + self.scale[j] * eps[j];
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for j in 0..self.dim() {
            out[j] = self.loc[j] + self.scale[j] * self.family.standard_noise(rng);
        }
    }

    /// Closed-form differential entropy.
    pub fn entropy(&self) -> f64 {
        self.scale
            .iter()
            .map(|s| self.family.standard_entropy() + s.ln())
            .sum()
    }

    /// log of the maximum density value.
    pub fn log_sup_norm(&self) -> f64 {
        self.scale
            .iter()
            .map(|s| self.family.standard_peak().ln() - s.ln())
            .sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.log_sup_norm().exp()
    }

    /// Same family and all parameters within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.family == other.family
            && self.dim() == other.dim()
            && self
                .loc
                .iter()
                .zip(&other.loc)
                .chain(self.scale.iter().zip(&other.scale))
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// KL(p ‖ q) for two diagonal Gaussians.
pub fn kl_gaussian_closed(p: &BaseDensity, q: &BaseDensity) -> Result<f64> {
    if p.family != Family::Gaussian || q.family != Family::Gaussian {
        return Err(Error::FamilyMismatch(format!(
            "closed-form KL needs two Gaussians, got {:?} and {:?}",
            p.family, q.family
        )));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let kl = (0..p.dim())
        .map(|j| {
            let ratio = (p.scale[j] / q.scale[j]).powi(2);
            let d = (p.loc[j] - q.loc[j]) / q.scale[j];
            0.5 * (ratio + d * d - 1.0 - ratio.ln())
        })
        .sum();
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn log_prob_closed_forms() {
        let g = BaseDensity::normal_1d(0.0, 1.0);
        close(g.log_prob(&[0.0]).unwrap(), -0.918939, 1e-6);
        let l = BaseDensity::laplace(vec![0.0], vec![1.0]).unwrap();
        close(l.log_prob(&[0.0]).unwrap(), -0.693147, 1e-6);
        let g = BaseDensity::normal_1d(1.0, 0.5);
        close(g.log_prob(&[1.0]).unwrap(), -0.225791, 1e-6);
    }

    #[test]
    fn log_prob_rejects_wrong_dimension() {
        let g = BaseDensity::normal_1d(0.0, 1.0);
        assert!(matches!(
            g.log_prob(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn constructor_enforces_bounds() {
        assert!(BaseDensity::gaussian(vec![0.0], vec![1e-4]).is_err());
        assert!(BaseDensity::gaussian(vec![2e3], vec![1.0]).is_err());
        assert!(BaseDensity::gaussian(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(BaseDensity::gaussian(vec![], vec![]).is_err());
        assert!(ParamBounds::new(0.0, 1.0).is_err());
    }

    #[test]
    fn entropy_closed_forms() {
        close(BaseDensity::normal_1d(0.0, 1.0).entropy(), 1.418939, 1e-6);
        let l = BaseDensity::laplace(vec![0.0], vec![1.0]).unwrap();
        close(l.entropy(), 1.693147, 1e-6);
        let g2 = BaseDensity::gaussian(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        close(g2.entropy(), 2.837877, 1e-6);
    }

    #[test]
    fn sup_norm_closed_forms() {
        close(BaseDensity::normal_1d(0.0, 0.5).sup_norm(), 0.797885, 1e-6);
        close(BaseDensity::normal_1d(0.0, 1.0).sup_norm(), 0.398942, 1e-6);
        let l = BaseDensity::laplace(vec![0.0], vec![1.0]).unwrap();
        close(l.sup_norm(), 0.5, 1e-12);
    }

    #[test]
    fn sup_norm_is_the_peak_density() {
        let d = BaseDensity::laplace(vec![0.3, -1.0], vec![0.7, 2.0]).unwrap();
        close(d.log_prob(&[0.3, -1.0]).unwrap(), d.log_sup_norm(), 1e-12);
    }

    #[test]
    fn kl_gaussian_values() {
        let n01 = BaseDensity::normal_1d(0.0, 1.0);
        close(kl_gaussian_closed(&n01, &n01).unwrap(), 0.0, 1e-15);
        let n11 = BaseDensity::normal_1d(1.0, 1.0);
        close(kl_gaussian_closed(&n01, &n11).unwrap(), 0.5, 1e-15);
        // ½(σ² - 1 - ln σ²) with σ = 2
        let n02 = BaseDensity::normal_1d(0.0, 2.0);
        close(kl_gaussian_closed(&n02, &n01).unwrap(), 0.806853, 1e-6);
        // variance 2 instead of standard deviation 2: ½(2 - 1 - ln 2)
        let var2 = BaseDensity::normal_1d(0.0, 2f64.sqrt());
        close(kl_gaussian_closed(&var2, &n01).unwrap(), 0.153426, 1e-6);
        let lap = BaseDensity::laplace(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            kl_gaussian_closed(&lap, &n01),
            Err(Error::FamilyMismatch(_))
        ));
    }

    #[test]
    fn laplace_noise_has_unit_diversity() {
        let mut r = rng::stream(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| Family::Laplace.standard_noise(&mut r)).collect();
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let mean = xs.iter().sum::<f64>() / n as f64;
        // E|X| = b = 1, Var|X| = 1
        assert!((mean_abs - 1.0).abs() < 4.0 / (n as f64).sqrt());
        assert!(mean.abs() < 4.0 * 2f64.sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn param_score_matches_finite_differences() {
        for fam in [Family::Gaussian, Family::Laplace] {
            let d = BaseDensity::new(fam, vec![0.2, -0.4], vec![0.8, 1.3]).unwrap();
            let z = [0.9, -2.0];
            let mut dl = [0.0; 2];
            let mut ds = [0.0; 2];
            d.param_score(&z, &mut dl, &mut ds);
            let h = 1e-6;
            for j in 0..2 {
                let mut lp = d.loc.clone();
                lp[j] += h;
                let mut lm = d.loc.clone();
                lm[j] -= h;
                let fp = BaseDensity::new(fam, lp, d.scale.clone()).unwrap().log_prob(&z).unwrap();
                let fm = BaseDensity::new(fam, lm, d.scale.clone()).unwrap().log_prob(&z).unwrap();
                close(dl[j], (fp - fm) / (2.0 * h), 1e-6);

                let mut sp = d.scale.clone();
                sp[j] *= h.exp();
                let mut sm = d.scale.clone();
                sm[j] *= (-h).exp();
                let fp = BaseDensity::new(fam, d.loc.clone(), sp).unwrap().log_prob(&z).unwrap();
                let fm = BaseDensity::new(fam, d.loc.clone(), sm).unwrap().log_prob(&z).unwrap();
                close(ds[j], (fp - fm) / (2.0 * h), 1e-6);
            }
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let d = BaseDensity::laplace(vec![0.5], vec![2.0]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: BaseDensity = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        let bad = r#"{"family":"gaussian","loc":[0.0],"scale":[-1.0]}"#;
        assert!(serde_json::from_str::<BaseDensity>(bad).is_err());
    }
}
