#![allow(dead_code)]

use snake_locomanip::config::RunConfig;
use snake_locomanip::model::RobotModel;
use snake_locomanip::planner::rollout;
use snake_locomanip::trajectory::Trajectory;

pub struct Run {
    pub config: RunConfig,
    pub model: RobotModel,
    pub traj: Trajectory,
}

/// Rolls out a run configuration given as JSON.
pub fn run(json: &str) -> Run {
    let config = RunConfig::from_json(json).expect("valid config");
    config.validate().expect("valid config");
    let model = config.model();
    let scene = config.scene(&model);
    let initial = config.initial_state(&model, &scene);
    let timeline = config.timeline().expect("timeline");
    let traj = rollout(&model, &scene, &initial, &timeline, config.duration(), &config.rollout_config());
    assert!(traj.abort.is_none(), "rollout aborted: {:?}", traj.abort);
    Run { config, model, traj }
}

pub fn flat_push(gait: &str, extra: &str) -> Run {
    run(&format!(r#"{{"scenario":"flat_push","duration":10,"gait":{{"name":"{gait}"{extra}}}}}"#))
}
