//! Contact QP, rollouts and the shooting planner.

mod qp;
mod rollout;
mod shoot;

pub use qp::{
    in_cone, normalized_complementarity, project_cone, solve_contact_qp, stationarity_residual, ContactQpProblem,
    QpSettings, QpSolution,
};
pub use rollout::{can_engage, contact_objective, docking_error, rollout, ForceMode, RolloutConfig};
pub use shoot::{
    score, shoot, thread_cap, CostTerms, CostWeights, DecisionSpace, PlannerResult, ShootingProblem, THREADS_ENV,
};

use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;

/// Force/gap orthogonality diagnostics per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub t: Vec<f64>,
    /// Σ |f_N · max(g − w, 0)|.
    pub gap_product: Vec<f64>,
    /// Σ |f_N · ġ_N| over penetrating points.
    pub rate_product: Vec<f64>,
    /// Σ f_T · v_T over the same points; non-positive under dissipative friction.
    pub tangential_power: Vec<f64>,
    pub max_gap_product: f64,
    pub mean_gap_product: f64,
    pub max_rate_product: f64,
    pub mean_rate_product: f64,
}

pub fn orthogonality_report(traj: &Trajectory, transition_width: f64) -> OrthogonalityReport {
    let mut rep = OrthogonalityReport {
        t: Vec::with_capacity(traj.samples.len()),
        gap_product: Vec::new(),
        rate_product: Vec::new(),
        tangential_power: Vec::new(),
        max_gap_product: 0.0,
        mean_gap_product: 0.0,
        max_rate_product: 0.0,
        mean_rate_product: 0.0,
    };
    for s in &traj.samples {
        let mut gp = 0.0;
        let mut rp = 0.0;
        let mut tp = 0.0;
        for c in &s.contacts {
            let gap = -c.depth;
            gp += (c.normal_force * (gap - transition_width).max(0.0)).abs();
            if c.depth > 0.0 {
                rp += (c.normal_force * c.depth_rate).abs();
                tp += c.friction_force.dot(&c.tangential_velocity);
            }
        }
        rep.t.push(s.t());
        rep.gap_product.push(gp);
        rep.rate_product.push(rp);
        rep.tangential_power.push(tp);
    }
    let n = rep.t.len().max(1) as f64;
    rep.max_gap_product = rep.gap_product.iter().copied().fold(0.0, f64::max);
    rep.max_rate_product = rep.rate_product.iter().copied().fold(0.0, f64::max);
    rep.mean_gap_product = rep.gap_product.iter().sum::<f64>() / n;
    rep.mean_rate_product = rep.rate_product.iter().sum::<f64>() / n;
    rep
}

#[cfg(test)]
mod tests;
