//! `simulate` and `plan`: roll out, export artifacts, write the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use snake_locomanip::config::RunConfig;
use snake_locomanip::metrics::efficiency_report;
use snake_locomanip::model::RobotModel;
use snake_locomanip::planner::{rollout, shoot};
use snake_locomanip::trajectory::Trajectory;

use crate::error::{CliError, CliResult};
use crate::export::write_trajectory;

pub const MANIFEST: &str = "run_manifest.json";
pub const METRICS: &str = "metrics.json";
pub const PLANNER_RESULT: &str = "planner_result.json";

/// Config keys that leave every rollout unchanged: where artifacts go and
/// how finished runs are scored. Both are recorded in the manifest config.
pub const NON_ROLLOUT_KEYS: [&str; 2] = ["/output/dir", "/metrics/work_convention"];

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub gait: Option<String>,
    pub duration: Option<f64>,
    pub goal: Option<[f64; 3]>,
    pub budget: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> CliResult<()> {
        if let Some(s) = &self.scenario {
            config.scenario = s.parse()?;
        }
        if let Some(g) = &self.gait {
            config.gait.name = Some(g.parse()?);
        }
        if let Some(d) = self.duration {
            config.duration = Some(d);
        }
        if self.goal.is_some() || self.budget.is_some() {
            let p = config.planner.get_or_insert_with(Default::default);
            if let Some(g) = self.goal {
                p.goal = Some(g);
            }
            if let Some(b) = self.budget {
                p.budget = b;
            }
        }
        Ok(())
    }
}

/// Loads `path` (defaults when absent), applies overrides and validates.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config)?;
    config.validate()?;
    Ok(config)
}

pub fn output_dir(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Config with scenario defaults written out.
pub fn resolved(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.duration = Some(config.duration());
    c.gait.name = Some(config.gait_name());
    c
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Every quantity the rollout reads, as it is handed to the simulator.
pub fn simulate_constants(config: &RunConfig) -> CliResult<Value> {
    let model = config.model();
    let scene = config.scene(&model);
    let initial = config.initial_state(&model, &scene);
    Ok(json!({
        "model": model,
        "scene": scene,
        "initial_state": initial,
        "timeline": config.timeline()?,
        "duration": config.duration(),
        "rollout": config.rollout_config(),
    }))
}

/// Every quantity the planner reads.
pub fn plan_constants(config: &RunConfig, model: &RobotModel) -> CliResult<Value> {
    let problem = config.shooting_problem(model, None);
    let planner = config.planner.clone().unwrap_or_default();
    Ok(json!({
        "model": model,
        "scene": problem.scene,
        "initial_state": problem.initial,
        "horizon": problem.horizon,
        "goal": problem.goal,
        "weights": problem.weights,
        "rollout": problem.rollout,
        "seed": problem.seed,
        "seed_params": config.seed_params()?,
        "budget": planner.budget,
    }))
}

fn constants_hash(constants: &Value) -> String {
    sha256_hex(constants.to_string().as_bytes())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn vec3(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn metrics(config: &RunConfig, model: &RobotModel, traj: &Trajectory) -> CliResult<Value> {
    let name = config.gait_name().to_string();
    let report = efficiency_report(&[(name.clone(), traj)], config.metrics.work_convention)?;
    Ok(json!({
        "gait": name,
        "work_convention": report.convention,
        "efficiency": report.gaits[0],
        "box_displacement": vec3(traj.box_displacement()),
        "robot_displacement": vec3(traj.robot_displacement(model)),
        "max_box_height": traj.max_box_height,
        "max_head_height": traj.max_head_height,
        "max_abs_torque": traj.max_abs_torque,
        "max_abs_joint_angle": traj.max_abs_joint_angle,
        "max_friction_ratio_excess": traj.max_friction_ratio_excess,
        "latch_events": traj.latch_events,
        "samples": traj.samples.len(),
        "abort": traj.abort,
    }))
}

/// Artifacts of one finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub trajectory: Trajectory,
    pub manifest: Value,
}

fn export(
    dir: &Path,
    config: &RunConfig,
    model: &RobotModel,
    traj: &Trajectory,
    mut manifest: Value,
) -> CliResult<Value> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_trajectory(dir, traj)?;
    write_json(&dir.join(METRICS), &metrics(config, model, traj)?)?;
    manifest["error"] = json!(traj.abort);
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn manifest(command: &str, config: &RunConfig, constants: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": resolved(config),
        "constants_hash": constants_hash(&constants),
        "constants": constants,
    })
}

/// Runs the configured scenario and writes its artifacts to `dir`.
pub fn simulate(config: &RunConfig, dir: &Path) -> CliResult<RunOutput> {
    let model = config.model();
    let scene = config.scene(&model);
    let initial = config.initial_state(&model, &scene);
    let timeline = config.timeline()?;
    let traj = rollout(&model, &scene, &initial, &timeline, config.duration(), &config.rollout_config());
    let manifest = manifest("simulate", config, simulate_constants(config)?);
    let manifest = export(dir, config, &model, &traj, manifest)?;
    if let Some(e) = &traj.abort {
        return Err(CliError::Numerical(e.clone()));
    }
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        trajectory: traj,
        manifest,
    })
}

/// Tunes the seed gait toward the goal and exports the best rollout.
pub fn plan(config: &RunConfig, dir: &Path) -> CliResult<RunOutput> {
    let Some(planner) = &config.planner else {
        return Err(CliError::Config("planner: section missing".into()));
    };
    let model = config.model();
    let problem = config.shooting_problem(&model, None);
    let result = shoot(&model, &problem, &config.seed_params()?, planner.budget)?;
    let traj = &result.trajectory;
    let mut manifest = manifest("plan", config, plan_constants(config, &model)?);
    let final_box = traj.last().map(|s| s.state.box_position);
    manifest["goal"] = json!(vec3(problem.goal));
    manifest["goal_error"] = json!(final_box.map(|b| (b - problem.goal).norm()));
    let manifest = export(dir, config, &model, traj, manifest)?;
    let record = json!({
        "goal": vec3(problem.goal),
        "space": result.space,
        "decision": result.decision,
        "params": result.params,
        "best": result.best,
        "seed_cost": result.seed_cost,
        "cost_history": result.cost_history,
        "evaluations": result.evaluations,
        "sweeps": result.sweeps,
    });
    write_json(&dir.join(PLANNER_RESULT), &record)?;
    if let Some(e) = &traj.abort {
        return Err(CliError::Planner(format!("best rollout aborted: {e}")));
    }
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        trajectory: result.trajectory,
        manifest,
    })
}
