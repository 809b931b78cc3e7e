use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use super::*;
use crate::contact::{delassus, detect_contacts, resolve_forces, Body, ContactSet, DelassusSystem};
use crate::dynamics::dynamics_terms;
use crate::gait::{preset, GaitName, GaitTimeline, LatchCommand, Segment};
use crate::model::{initial_pose, ScenarioName, SystemState, NUM_JOINTS, TORQUE_LIMIT};
use crate::testutil::{default_setup, random_state, rng};

fn hold(duration: f64) -> GaitTimeline {
    GaitTimeline {
        initial: [0.0; NUM_JOINTS],
        segments: vec![Segment::keyframe(duration, [0.0; NUM_JOINTS], LatchCommand::None)],
    }
}

fn settled_flat_push() -> (crate::model::RobotModel, crate::model::SceneSpec, SystemState) {
    let (model, scene) = default_setup();
    let s0 = initial_pose(&model, &scene, ScenarioName::FlatPush);
    let traj = rollout(&model, &scene, &s0, &hold(1.0), 1.0, &RolloutConfig::default());
    let s = traj.last().unwrap().state.clone();
    (model, scene, s)
}

#[test]
fn zero_horizon_gives_initial_sample() {
    let (model, scene) = default_setup();
    let s0 = initial_pose(&model, &scene, ScenarioName::FlatPush);
    let traj = rollout(&model, &scene, &s0, &hold(1.0), 0.0, &RolloutConfig::default());
    assert_eq!(traj.samples.len(), 1);
    assert_eq!(traj.samples[0].state, s0);
}

#[test]
fn weightless_contactless_robot_stays_put() {
    let (model, mut scene) = default_setup();
    scene.gravity = 0.0;
    let s0 = initial_pose(&model, &scene, ScenarioName::FlatPush);
    let cfg = RolloutConfig {
        contacts: false,
        ..RolloutConfig::default()
    };
    let traj = rollout(&model, &scene, &s0, &hold(1.0), 1.0, &cfg);
    let last = &traj.last().unwrap().state;
    assert!((last.base_position - s0.base_position).amax() < 1e-6);
    assert!(last.joint_angles.iter().all(|q| q.abs() < 1e-6));
    assert!((last.box_position - s0.box_position).amax() < 1e-6);
}

#[test]
fn qp_and_penalty_agree_on_resting_box() {
    let (model, scene, s) = settled_flat_push();
    let mut set = resolve_forces(detect_contacts(&model, &scene, &s), &scene.contact);
    set.points.retain(|p| p.pair == (Body::Ground, Body::Box));
    let penalty: f64 = set.points.iter().map(|p| p.normal_force).sum();
    let terms = dynamics_terms(&model, &scene, &s, &[0.0; NUM_JOINTS]).unwrap();
    let system = delassus(&set, &terms).unwrap();
    let mu = vec![scene.contact.friction.mu_s; set.len()];
    let sol = solve_contact_qp(&ContactQpProblem { system, mu }, &QpSettings::default()).unwrap();
    let qp: f64 = (0..set.len()).map(|i| sol.forces[3 * i]).sum();
    assert!((qp - 4.9).abs() < 0.049, "QP total {qp}");
    assert!((qp - penalty).abs() < 0.1 * penalty, "QP {qp} vs penalty {penalty}");
}

/// Grid search over the cone in Cartesian force coordinates, re-gridding a
/// shrinking box around the incumbent until the cell size falls below 1e-6 of
/// the force scale.
fn grid_minimum(sys: &DelassusSystem, mu: f64, scale: f64) -> f64 {
    const N: usize = 40;
    let g = Matrix3::from_fn(|i, j| sys.g[(i, j)]);
    let c = Vector3::new(sys.c[0], sys.c[1], sys.c[2]);
    let mut lo = [0.0, -mu * scale, -mu * scale];
    let mut hi = [scale, mu * scale, mu * scale];
    let mut best = (0.0, [0.0, 0.0, 0.0]);
    loop {
        let cell = (hi[0] - lo[0]) / N as f64;
        for a in 0..=N {
            for b in 0..=N {
                for k in 0..=N {
                    let f = Vector3::new(
                        lo[0] + (hi[0] - lo[0]) * a as f64 / N as f64,
                        lo[1] + (hi[1] - lo[1]) * b as f64 / N as f64,
                        lo[2] + (hi[2] - lo[2]) * k as f64 / N as f64,
                    );
                    if !in_cone(&f, mu, 0.0) {
                        continue;
                    }
                    let v = 0.5 * f.dot(&(g * f)) + f.dot(&c);
                    if v < best.0 {
                        best = (v, [f.x, f.y, f.z]);
                    }
                }
            }
        }
        if cell < 1e-6 * scale {
            return best.0;
        }
        for k in 0..3 {
            let half = 10.0 * (hi[k] - lo[k]) / N as f64;
            lo[k] = best.1[k] - half;
            hi[k] = best.1[k] + half;
        }
        if lo[0] < 0.0 {
            hi[0] -= lo[0];
            lo[0] = 0.0;
        }
    }
}

#[test]
fn single_contact_qp_matches_grid_search() {
    let mut r = rng(23);
    for _ in 0..50 {
        let x = DMatrix::from_fn(3, 3, |_, _| r.gen_range(-1.0..1.0));
        let g = &x * x.transpose() + DMatrix::identity(3, 3) * 0.1;
        let c = DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0));
        let mu = r.gen_range(0.2..1.0);
        let lambda_min = g.clone().symmetric_eigenvalues().min();
        // any f with cost ≤ 0 obeys ‖f‖ ≤ 2‖c‖/λ_min
        let scale = 2.0 * c.norm() / lambda_min;
        let system = DelassusSystem { g, c };
        let grid = grid_minimum(&system, mu, scale);
        let p = ContactQpProblem { system, mu: vec![mu] };
        let sol = solve_contact_qp(&p, &QpSettings::default()).unwrap();
        assert!(sol.cost <= grid + 0.01 * grid.abs() + 1e-12, "QP {} vs grid {grid}", sol.cost);
        assert!(sol.cost >= grid - 0.01 * grid.abs() - 1e-9, "QP {} below grid {grid}", sol.cost);
    }
}

#[test]
fn qp_solutions_are_complementary_on_real_contact_sets() {
    let (model, mut scene) = default_setup();
    scene.contact.self_contact = true;
    let mut r = rng(29);
    let mut solved = 0;
    for _ in 0..100 {
        let s = random_state(&mut r, &scene, 0.3);
        let set = detect_contacts(&model, &scene, &s);
        if set.is_empty() {
            continue;
        }
        let terms = dynamics_terms(&model, &scene, &s, &[0.0; NUM_JOINTS]).unwrap();
        let system = delassus(&set, &terms).unwrap();
        let p = ContactQpProblem {
            mu: vec![scene.contact.friction.mu_s; set.len()],
            system,
        };
        let sol = solve_contact_qp(&p, &QpSettings { tol: 1e-8, max_sweeps: 20000 }).unwrap();
        for i in 0..set.len() {
            assert!(in_cone(&sol.forces.fixed_rows::<3>(3 * i).into_owned(), p.mu[i], 1e-12));
        }
        assert!(sol.cost <= 1e-12);
        let res = normalized_complementarity(&p, &sol.forces);
        assert!(res <= 1e-6, "complementarity {res} with {} contacts", set.len());
        solved += 1;
    }
    assert!(solved > 25, "only {solved} non-empty sets");
}

fn short_problem(goal: Vector3<f64>, seed: u64) -> (crate::model::RobotModel, ShootingProblem) {
    let (model, scene) = default_setup();
    let initial = initial_pose(&model, &scene, ScenarioName::FlatPush);
    let problem = ShootingProblem {
        scene,
        initial,
        horizon: 0.4,
        goal,
        weights: CostWeights::default(),
        rollout: RolloutConfig {
            log_contacts: false,
            ..RolloutConfig::default()
        },
        seed,
    };
    (model, problem)
}

fn c_roll() -> crate::gait::CpgParams {
    preset(GaitName::CRoll).cpg().unwrap().clone()
}

#[test]
fn budget_of_one_returns_the_seed() {
    let (model, p) = short_problem(Vector3::new(0.8, 0.8, 0.1), 1);
    let res = shoot(&model, &p, &c_roll(), 1).unwrap();
    assert_eq!(res.evaluations, 1);
    assert_eq!(res.cost_history, vec![res.seed_cost]);
    assert_eq!(res.best.total, res.seed_cost);
    assert_eq!(res.params, c_roll());
}

#[test]
fn invalid_budget_and_horizon_are_rejected() {
    let (model, mut p) = short_problem(Vector3::zeros(), 1);
    assert!(matches!(shoot(&model, &p, &c_roll(), 0), Err(crate::Error::Planner(_))));
    p.horizon = 0.0;
    assert!(matches!(shoot(&model, &p, &c_roll(), 5), Err(crate::Error::Planner(_))));
}

#[test]
fn search_is_elitist_bounded_and_deterministic() {
    let (model, mut p) = short_problem(Vector3::zeros(), 7);
    let seed = c_roll();
    let unforced = rollout(&model, &p.scene, &p.initial, &GaitTimeline::single(seed.clone(), p.horizon), p.horizon, &p.rollout);
    p.goal = unforced.last().unwrap().state.box_position;
    let a = shoot(&model, &p, &seed, 12).unwrap();
    assert!(a.best.total <= a.seed_cost);
    assert!(a.cost_history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(a.cost_history.len(), a.evaluations);
    for (i, x) in a.decision.iter().enumerate() {
        assert!(*x >= a.space.lower[i] && *x <= a.space.upper[i]);
    }
    assert!(a.params.validate().is_ok());
    assert!(a.trajectory.max_abs_torque <= TORQUE_LIMIT);
    assert!(a.trajectory.max_abs_joint_angle <= PI / 2.0);
    let b = shoot(&model, &p, &seed, 12).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decision_space_round_trips() {
    let seed = c_roll();
    let space = DecisionSpace::around(&seed);
    assert_eq!(space.dim(), 3 + 2 * NUM_JOINTS);
    let x = space.encode(&seed);
    assert_eq!(space.decode(&x, &seed), seed);
    // amplitude and offset bounds together stay inside the joint limits
    assert!(space.upper[0] + space.upper[3] <= 90.0);
}

#[test]
fn orthogonality_diagnostics() {
    let (model, scene) = default_setup();
    let mut s0 = initial_pose(&model, &scene, ScenarioName::FlatPush);
    s0.base_position.z += 1.0;
    s0.box_position.z += 1.0;
    let mut weightless = scene.clone();
    weightless.gravity = 0.0;
    let traj = rollout(&model, &weightless, &s0, &hold(0.1), 0.1, &RolloutConfig::default());
    let rep = orthogonality_report(&traj, scene.contact.normal.w);
    assert_eq!(rep.max_gap_product, 0.0);
    assert_eq!(rep.max_rate_product, 0.0);

    let (model, scene, s) = settled_flat_push();
    let traj = rollout(&model, &scene, &s, &hold(0.2), 0.2, &RolloutConfig::default());
    let rep = orthogonality_report(&traj, scene.contact.normal.w);
    for (i, sample) in traj.samples.iter().enumerate() {
        let f_n: f64 = sample.contacts.iter().filter(|c| c.depth > 0.0).map(|c| c.normal_force).sum();
        assert!(rep.rate_product[i] <= f_n * 1e-4, "t = {}", sample.t());
        assert_eq!(rep.gap_product[i], 0.0);
    }

    let mut sliding = s.clone();
    sliding.velocity[crate::model::BOX_LINEAR] = 0.1;
    let traj = rollout(&model, &scene, &sliding, &hold(0.01), 0.01, &RolloutConfig::default());
    let rep = orthogonality_report(&traj, scene.contact.normal.w);
    assert!(rep.tangential_power.iter().all(|p| *p < 0.0));
}

#[test]
fn qp_force_mode_rollout_supports_the_box() {
    let (model, scene, s) = settled_flat_push();
    let cfg = RolloutConfig {
        force_mode: ForceMode::Qp,
        ..RolloutConfig::default()
    };
    let traj = rollout(&model, &scene, &s, &hold(0.05), 0.05, &cfg);
    assert!(traj.abort.is_none(), "{:?}", traj.abort);
    let last = traj.last().unwrap();
    let support: f64 = last
        .contacts
        .iter()
        .filter(|c| c.body_a == Body::Ground && c.body_b == Body::Box)
        .map(|c| c.normal_force)
        .sum();
    assert!((support - 4.9).abs() < 0.49, "QP support {support}");
    let _ = ContactSet::default();
}
