//! `compare`: efficiency report over finished run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use snake_locomanip::config::RunConfig;
use snake_locomanip::metrics::{efficiency_report, EfficiencyReport};
use snake_locomanip::trajectory::Trajectory;

use crate::error::{CliError, CliResult};
use crate::export::{num, read_trajectory, time};
use crate::run::MANIFEST;

pub const WORK_EFFICIENCY: &str = "work_efficiency.csv";
pub const POWER: &str = "power.csv";
pub const DISTANCE: &str = "distance.csv";
pub const TORQUE: &str = "torque_j5_j6.csv";
pub const RANKING: &str = "ranking.json";

struct Run {
    name: String,
    config: RunConfig,
    traj: Trajectory,
}

fn load(dir: &Path) -> CliResult<Run> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: Value = serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))?;
    let config: RunConfig =
        serde_json::from_value(manifest["config"].clone()).map_err(|e| CliError::io(&path, e))?;
    let mut traj = read_trajectory(dir)?;
    traj.abort = manifest["error"].as_str().map(str::to_string);
    Ok(Run {
        name: config.gait_name().to_string(),
        config,
        traj,
    })
}

/// Series label per run; repeated gait names get the directory name appended.
fn labels(runs: &[Run], dirs: &[PathBuf]) -> Vec<String> {
    runs.iter()
        .zip(dirs)
        .map(|(r, d)| {
            if runs.iter().filter(|o| o.name == r.name).count() > 1 {
                let base = d.file_name().map_or_else(|| d.display().to_string(), |f| f.to_string_lossy().into());
                format!("{}@{base}", r.name)
            } else {
                r.name.clone()
            }
        })
        .collect()
}

fn write_series(
    path: &Path,
    columns: &[&str],
    runs: &[(String, &Trajectory)],
    row: impl Fn(&Trajectory, usize) -> Vec<f64>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header: Vec<&str> = ["series", "t"].into_iter().chain(columns.iter().copied()).collect();
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (name, traj) in runs {
        for (i, s) in traj.samples.iter().enumerate() {
            let rec: Vec<String> = [name.clone(), time(s.t())]
                .into_iter()
                .chain(row(traj, i).into_iter().map(num))
                .collect();
            w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads each run directory and writes plot data and rankings into `out`.
pub fn compare(dirs: &[PathBuf], out: &Path) -> CliResult<EfficiencyReport> {
    if dirs.len() < 2 {
        return Err(CliError::Config("compare: needs at least two runs".into()));
    }
    let runs = dirs.iter().map(|d| load(d)).collect::<CliResult<Vec<_>>>()?;
    let names = labels(&runs, dirs);
    let named: Vec<(String, &Trajectory)> = names.iter().cloned().zip(runs.iter().map(|r| &r.traj)).collect();
    let report = efficiency_report(&named, runs[0].config.metrics.work_convention)?;

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_series(&out.join(WORK_EFFICIENCY), &["work_box", "work_loc"], &named, |t, i| {
        let s = &t.samples[i];
        vec![s.work_box, s.work_loc]
    })?;
    write_series(&out.join(POWER), &["power"], &named, |t, i| vec![t.samples[i].power])?;
    write_series(&out.join(DISTANCE), &["box_path", "box_displacement"], &named, |t, i| {
        let s = &t.samples[i];
        vec![s.box_path, (s.state.box_position - t.samples[0].state.box_position).norm()]
    })?;
    write_series(&out.join(TORQUE), &["tau5", "tau6"], &named, |t, i| {
        let s = &t.samples[i];
        vec![s.tau[4], s.tau[5]]
    })?;
    let path = out.join(RANKING);
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::io(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}
