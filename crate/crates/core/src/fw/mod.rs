//! Functional Frank-Wolfe over mixtures: step-size policies, the boosting
//! loop, its duality-gap certificate and curvature probes.

mod blend;
mod boost;
mod curvature;
mod gap;
mod step;
mod weights;

pub use boost::{run_boosting, BoostTrace, FwConfig, TraceRecord, Variant};
pub use curvature::{chi_square_divergence, curvature_probe, l2_distance_sq};
pub use gap::{certified_gap, duality_gap_estimate, mixture_elbo};
pub use step::{fixed_step_gamma, mixture_step, MERGE_TOL};
pub use weights::{fully_corrective_weights, line_search_gamma};
