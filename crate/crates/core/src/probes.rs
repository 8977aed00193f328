//! Numeric checks of the theory behind the boosting loop, each returning a
//! pass/fail report with the values it looked at.

use crate::density::{kl_gaussian_closed, BaseDensity, Family, Mixture, ParamBounds, QuadratureGrid};
use crate::error::Result;
use crate::fw::{certified_gap, chi_square_divergence, curvature_probe};
use crate::lmo::{lmo_solve, LmoConfig};
use crate::models::{BimodalTarget, TargetModel};

pub const DEFAULT_GAMMAS: [f64; 5] = [1e-3, 1e-2, 0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// One line per value examined.
    pub rows: Vec<String>,
}

impl ProbeReport {
    fn failed(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
            rows: Vec::new(),
        }
    }
}

/// Gaussian (s, q) pairs spanning locations in [-1, 1] and scales in
/// [0.6, 1.2]. No s is wider than its q, so s/q stays bounded away from the
/// equal-width case and the small-γ expansion holds uniformly.
pub fn curvature_pairs() -> Vec<(BaseDensity, BaseDensity)> {
    let s = [(0.0, 1.0), (1.0, 0.8), (-1.0, 0.6)];
    let q = [(0.0, 1.0), (0.5, 1.1), (-0.5, 1.2)];
    s.iter()
        .flat_map(|&(ms, ss)| {
            q.iter()
                .map(move |&(mq, sq)| (BaseDensity::normal_1d(ms, ss), BaseDensity::normal_1d(mq, sq)))
        })
        .collect()
}

fn curvature_grid() -> QuadratureGrid {
    QuadratureGrid::new(-20.0, 20.0, 8001).expect("valid grid")
}

fn label(d: &BaseDensity) -> String {
    format!("N({}, {})", d.loc()[0], d.scale()[0])
}

/// (2/γ²)·KL along the segment from q towards s: finite, nonnegative and
/// bounded by 2χ²(s‖q); equal to 2·KL(s‖q) at γ = 1 (to 1e-6) and within 5%
/// of χ²(s‖q) at γ ≤ 1e-3.
pub fn curvature_check(gammas: &[f64]) -> Result<ProbeReport> {
    let grid = curvature_grid();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (s, q) in curvature_pairs() {
        let qm = Mixture::single(q.clone());
        let values = curvature_probe(&s, &qm, gammas, &grid)?;
        let chi2 = chi_square_divergence(&s, &qm, &grid)?;
        let kl2 = 2.0 * kl_gaussian_closed(&s, &q)?;
        for (&gamma, &v) in gammas.iter().zip(&values) {
            let mut row = format!("s={} q={} gamma={gamma:e} value={v:.9}", label(&s), label(&q));
            let mut ok = v.is_finite() && v >= -1e-9 && v <= 2.0 * chi2 * (1.0 + 1e-6) + 1e-9;
            if gamma == 1.0 {
                row.push_str(&format!(" 2KL(s||q)={kl2:.9}"));
                ok &= (v - kl2).abs() <= 1e-6;
            }
            if gamma <= 1e-3 {
                row.push_str(&format!(" chi2={chi2:.9}"));
                ok &= (v - chi2).abs() <= 0.05 * chi2;
            }
            if !ok {
                failures.push(row.clone());
            }
            rows.push(row);
        }
    }
    Ok(ProbeReport {
        name: "curvature",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} values finite and bounded, limits matched", rows.len())
        } else {
            format!("{} of {} values out of range", failures.len(), rows.len())
        },
        rows,
    })
}

/// Entropy plus log sup-norm is 1/2 (Gaussian) or 1 (Laplace) per
/// coordinate, to 1e-10, for scales from the floor upward. A nonpositive
/// floor admits collapsing atoms and fails.
pub fn entropy_check(scale_floor: f64) -> ProbeReport {
    let bounds = match ParamBounds::new(scale_floor, ParamBounds::DEFAULT_LOC_BOUND) {
        Ok(b) => b,
        Err(e) => return ProbeReport::failed("entropy", format!("degenerate family rejected: {e}")),
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (family, per_dim) in [(Family::Gaussian, 0.5), (Family::Laplace, 1.0)] {
        for scale in [bounds.scale_floor, 0.1, 0.5, 1.0, 2.0, 5.0] {
            for dim in [1usize, 3] {
                let atom = match BaseDensity::new_within(family, vec![0.3; dim], vec![scale; dim], &bounds) {
                    Ok(a) => a,
                    Err(e) => return ProbeReport::failed("entropy", e.to_string()),
                };
                let slack = atom.entropy() + atom.log_sup_norm();
                let err = (slack - per_dim * dim as f64).abs();
                worst = worst.max(err);
                rows.push(format!("{family:?} scale={scale} dim={dim} H+log||s||={slack:.12}"));
            }
        }
    }
    ProbeReport {
        name: "entropy",
        passed: worst <= 1e-10,
        detail: format!("max deviation {worst:.2e} (floor {scale_floor})"),
        rows,
    }
}

/// On the bimodal target, the certified duality gap plus four standard
/// errors bounds the quadrature KL for a few approximations.
pub fn gap_check(scale_floor: f64, seed: u64) -> Result<ProbeReport> {
    let p = BimodalTarget::default();
    let lmo = LmoConfig {
        scale_floor,
        seed,
        n_steps: 1000,
        ..LmoConfig::default()
    };
    let bounds = lmo.bounds()?;
    let n = |m: f64, s: f64| BaseDensity::normal_1d(m, s);
    let cases = vec![
        Mixture::single(n(1.0, 0.6)),
        Mixture::single(n(0.2, 1.0)),
        Mixture::single(n(-1.0, 0.5)),
        Mixture::new(vec![n(-1.0, 0.6), n(1.0, 0.4)], vec![0.5, 0.5])?,
    ];
    let grid = QuadratureGrid::new(-12.0, 12.0, 6001)?;
    let mut rows = Vec::new();
    let mut violations = 0;
    for q in &cases {
        let s = lmo_solve(&p, Some(q), 1, &lmo)?;
        let gap = certified_gap(q, &s.atom, &p, 2048, seed, &bounds)?;
        let kl = grid.kl(|z| q.log_prob_unchecked(&[z]), |z| p.log_joint(&[z]));
        let ok = gap.mean + 4.0 * gap.stderr >= kl;
        if !ok {
            violations += 1;
        }
        rows.push(format!(
            "q with {} atom(s): gap={:.6} stderr={:.6} KL={kl:.6} {}",
            q.len(),
            gap.mean,
            gap.stderr,
            if ok { "ok" } else { "violated" }
        ));
    }
    Ok(ProbeReport {
        name: "gap",
        passed: violations == 0,
        detail: format!("{violations} violation(s) of gap + 4 stderr >= KL over {} cases", cases.len()),
        rows,
    })
}
