//! Single shooting over CPG parameters with a deterministic pattern search.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rollout::{rollout, RolloutConfig};
use crate::error::{Error, Result};
use crate::gait::{CpgParams, GaitTimeline};
use crate::model::{RobotModel, SceneSpec, SystemState, NUM_JOINTS};
use crate::trajectory::Trajectory;

/// Environment variable capping planner worker threads.
pub const THREADS_ENV: &str = "SNAKE_LOCOMANIP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub goal: f64,
    pub contact: f64,
    pub torque: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            goal: 10.0,
            contact: 1e-3,
            torque: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingProblem {
    pub scene: SceneSpec,
    pub initial: SystemState,
    pub horizon: f64,
    /// Target box COM position, world frame.
    pub goal: Vector3<f64>,
    pub weights: CostWeights,
    pub rollout: RolloutConfig,
    /// Seeds the coordinate polling order.
    pub seed: u64,
}

/// Bounded decision vector: yaw/pitch amplitude (deg), frequency (Hz),
/// per-joint offsets (deg) and per-joint phases (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

const OFFSET_BOUND_DEG: f64 = 30.0;
const AMPLITUDE_BOUND_DEG: f64 = 60.0;
const FREQUENCY_BOUNDS: (f64, f64) = (0.1, 1.0);

impl DecisionSpace {
    pub fn around(seed: &CpgParams) -> Self {
        let mut names = vec!["amplitude_yaw".to_string(), "amplitude_pitch".into(), "frequency".into()];
        let mut lower = vec![0.0, 0.0, FREQUENCY_BOUNDS.0];
        let mut upper = vec![AMPLITUDE_BOUND_DEG, AMPLITUDE_BOUND_DEG, FREQUENCY_BOUNDS.1];
        for k in 0..NUM_JOINTS {
            names.push(format!("offset_J{}", k + 1));
            lower.push(-OFFSET_BOUND_DEG);
            upper.push(OFFSET_BOUND_DEG);
        }
        for k in 0..NUM_JOINTS {
            names.push(format!("phase_J{}", k + 1));
            lower.push(seed.phase[k] - std::f64::consts::FRAC_PI_2);
            upper.push(seed.phase[k] + std::f64::consts::FRAC_PI_2);
        }
        Self { names, lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn encode(&self, p: &CpgParams) -> Vec<f64> {
        let mut x = vec![p.amplitude_yaw, p.amplitude_pitch, p.frequency];
        x.extend_from_slice(&p.offset);
        x.extend_from_slice(&p.phase);
        self.clip(&mut x);
        x
    }

    /// Parameters for decision `x`, keeping the seed's mirror and parity.
    pub fn decode(&self, x: &[f64], template: &CpgParams) -> CpgParams {
        let mut p = template.clone();
        p.amplitude_yaw = x[0];
        p.amplitude_pitch = x[1];
        p.frequency = x[2];
        p.offset.copy_from_slice(&x[3..3 + NUM_JOINTS]);
        p.phase.copy_from_slice(&x[3 + NUM_JOINTS..3 + 2 * NUM_JOINTS]);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub goal_error: f64,
    pub contact: f64,
    pub torque: f64,
    pub total: f64,
}

pub fn score(problem: &ShootingProblem, traj: &Trajectory) -> CostTerms {
    let nan = CostTerms {
        goal_error: f64::INFINITY,
        contact: f64::INFINITY,
        torque: f64::INFINITY,
        total: f64::INFINITY,
    };
    if traj.abort.is_some() {
        return nan;
    }
    let Some(last) = traj.last() else { return nan };
    let goal_error = (last.state.box_position - problem.goal).norm();
    // rectangle rule at the sample cadence
    let contact: f64 = traj
        .samples
        .windows(2)
        .map(|w| w[0].manipulation_objective * (w[1].t() - w[0].t()))
        .sum();
    let torque = last.effort;
    let w = &problem.weights;
    CostTerms {
        goal_error,
        contact,
        torque,
        total: w.goal * goal_error * goal_error + w.contact * contact + w.torque * torque,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult {
    pub space: DecisionSpace,
    pub decision: Vec<f64>,
    /// Gait generating the optimal joint reference trajectory.
    pub params: CpgParams,
    pub best: CostTerms,
    pub seed_cost: f64,
    /// Best cost after each evaluation.
    pub cost_history: Vec<f64>,
    pub evaluations: usize,
    pub sweeps: usize,
    pub trajectory: Trajectory,
}

struct Evaluated {
    x: Vec<f64>,
    cost: CostTerms,
    traj: Trajectory,
}

fn evaluate(model: &RobotModel, problem: &ShootingProblem, space: &DecisionSpace, template: &CpgParams, x: Vec<f64>) -> Evaluated {
    let params = space.decode(&x, template);
    let timeline = GaitTimeline::single(params, problem.horizon);
    let traj = rollout(model, &problem.scene, &problem.initial, &timeline, problem.horizon, &problem.rollout);
    let cost = score(problem, &traj);
    Evaluated { x, cost, traj }
}

/// Thread count from `SNAKE_LOCOMANIP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}

/// Coordinate pattern search from `seed` with at most `budget` rollouts.
pub fn shoot(model: &RobotModel, problem: &ShootingProblem, seed: &CpgParams, budget: usize) -> Result<PlannerResult> {
    if budget == 0 {
        return Err(Error::Planner("budget must be at least 1".into()));
    }
    if !(problem.horizon > 0.0) {
        return Err(Error::Planner("horizon must be positive".into()));
    }
    seed.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Planner(format!("thread pool: {e}")))?;
    pool.install(|| search(model, problem, seed, budget))
}

fn search(model: &RobotModel, problem: &ShootingProblem, seed: &CpgParams, budget: usize) -> Result<PlannerResult> {
    let space = DecisionSpace::around(seed);
    let n = space.dim();
    let x0 = space.encode(seed);
    let mut best = evaluate(model, problem, &space, seed, x0);
    let seed_cost = best.cost.total;
    let mut history = vec![seed_cost];
    let mut evaluations = 1;
    let mut step: Vec<f64> = (0..n).map(|i| 0.1 * space.range(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(problem.seed));
    let mut sweeps = 0;

    'outer: while evaluations < budget {
        if (0..n).all(|i| step[i] < 1e-3 * space.range(i)) {
            break;
        }
        sweeps += 1;
        for &i in &order {
            if evaluations >= budget {
                break 'outer;
            }
            if step[i] < 1e-3 * space.range(i) {
                continue;
            }
            let mut cands = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let mut x = best.x.clone();
                x[i] += sign * step[i];
                space.clip(&mut x);
                if x[i] != best.x[i] && !cands.contains(&x) {
                    cands.push(x);
                }
            }
            cands.truncate(budget - evaluations);
            if cands.is_empty() {
                step[i] *= 0.5;
                continue;
            }
            let results: Vec<Evaluated> = cands
                .into_par_iter()
                .map(|x| evaluate(model, problem, &space, seed, x))
                .collect();
            let mut improved = false;
            for r in results {
                evaluations += 1;
                if r.cost.total < best.cost.total {
                    best = r;
                    improved = true;
                }
                history.push(best.cost.total);
            }
            if !improved {
                step[i] *= 0.5;
            }
        }
    }
    if !best.cost.total.is_finite() {
        return Err(Error::Planner(format!(
            "no finite-cost rollout in {evaluations} evaluations"
        )));
    }
    Ok(PlannerResult {
        params: space.decode(&best.x, seed),
        decision: best.x,
        best: best.cost,
        seed_cost,
        cost_history: history,
        evaluations,
        sweeps,
        trajectory: best.traj,
        space,
    })
}
