//! Work, power and distance figures for comparing gaits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointVector, SystemState, JOINT_RATES};
use crate::trajectory::Trajectory;

/// Actuator power magnitude Σ|τₖ·q̇ₖ| in watts.
pub fn instantaneous_power(state: &SystemState, tau: &JointVector) -> f64 {
    tau.iter()
        .enumerate()
        .map(|(k, t)| (t * state.velocity[JOINT_RATES + k]).abs())
        .sum()
}

/// Cumulative work of robot→box contact forces, trapezoidal over the logged
/// samples, plus the work done through the latch while the box is carried.
pub fn work_on_box(traj: &Trajectory) -> Result<Vec<f64>> {
    if !traj.contacts_logged {
        return Err(Error::InvalidInput("trajectory carries no contact log".into()));
    }
    let power: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| s.contacts.iter().map(|c| c.box_power).sum())
        .collect();
    let mut out = Vec::with_capacity(power.len());
    let mut acc = 0.0;
    for (i, s) in traj.samples.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (power[i - 1] + power[i]) * (s.t() - traj.samples[i - 1].t());
        }
        out.push(acc + s.latch_work);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkConvention {
    /// ∫ Σₖ |τₖ q̇ₖ| dt: braking joints count as work done.
    #[default]
    Absolute,
    /// ∫ |Σₖ τₖ q̇ₖ| dt.
    Net,
}

/// Running work and distance series of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t: Vec<f64>,
    pub power: Vec<f64>,
    pub work_loc: Vec<f64>,
    pub work_loc_net: Vec<f64>,
    pub work_box: Vec<f64>,
    pub box_path: Vec<f64>,
}

pub fn energy_ledger(traj: &Trajectory) -> EnergyLedger {
    let s = &traj.samples;
    EnergyLedger {
        t: s.iter().map(|x| x.t()).collect(),
        power: s.iter().map(|x| x.power).collect(),
        work_loc: s.iter().map(|x| x.work_loc).collect(),
        work_loc_net: s.iter().map(|x| x.work_loc_net).collect(),
        work_box: s.iter().map(|x| x.work_box).collect(),
        box_path: s.iter().map(|x| x.box_path).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitEfficiency {
    pub name: String,
    pub duration: f64,
    /// Headline locomotion work under the chosen convention.
    pub work_loc: f64,
    pub work_loc_absolute: f64,
    pub work_loc_net: f64,
    pub work_box: f64,
    /// W_loc / W_box; `None` when no work reached the box.
    pub slope: Option<f64>,
    pub box_path: f64,
    pub box_displacement: f64,
    /// Path length per second.
    pub box_speed: f64,
    pub peak_power: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    /// Descending box travel (per second when durations differ).
    pub distance: Vec<String>,
    pub work_box: Vec<String>,
    pub work_loc: Vec<String>,
    pub peak_power: Vec<String>,
    /// Ascending W_loc/W_box; gaits without box work last.
    pub slope: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub convention: WorkConvention,
    pub gaits: Vec<GaitEfficiency>,
    pub rankings: Rankings,
    pub warnings: Vec<String>,
}

impl EfficiencyReport {
    pub fn get(&self, name: &str) -> Option<&GaitEfficiency> {
        self.gaits.iter().find(|g| g.name == name)
    }
}

fn rank_by(gaits: &[GaitEfficiency], key: impl Fn(&GaitEfficiency) -> f64, descending: bool) -> Vec<String> {
    let mut idx: Vec<usize> = (0..gaits.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (key(&gaits[a]), key(&gaits[b]));
        let ord = ka.total_cmp(&kb);
        (if descending { ord.reverse() } else { ord }).then(a.cmp(&b))
    });
    idx.into_iter().map(|i| gaits[i].name.clone()).collect()
}

/// Per-gait totals and rankings over named trajectories.
pub fn efficiency_report(runs: &[(String, &Trajectory)], convention: WorkConvention) -> Result<EfficiencyReport> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("efficiency report needs at least one trajectory".into()));
    }
    let mut warnings = Vec::new();
    let gaits: Vec<GaitEfficiency> = runs
        .iter()
        .map(|(name, traj)| {
            let last = traj.last();
            let work_abs = last.map_or(0.0, |s| s.work_loc);
            let work_net = last.map_or(0.0, |s| s.work_loc_net);
            let work_box = last.map_or(0.0, |s| s.work_box);
            let work_loc = match convention {
                WorkConvention::Absolute => work_abs,
                WorkConvention::Net => work_net,
            };
            let duration = traj.duration();
            let box_path = last.map_or(0.0, |s| s.box_path);
            let mut flags = Vec::new();
            let slope = if work_box > 0.0 {
                Some(work_loc / work_box)
            } else {
                flags.push("no work done on the box: slope is infinite".to_string());
                None
            };
            if work_loc == 0.0 && box_path == 0.0 {
                flags.push("no motion".to_string());
            }
            if traj.abort.is_some() {
                flags.push("rollout aborted".to_string());
            }
            GaitEfficiency {
                name: name.clone(),
                duration,
                work_loc,
                work_loc_absolute: work_abs,
                work_loc_net: work_net,
                work_box,
                slope,
                box_path,
                box_displacement: traj.box_displacement().norm(),
                box_speed: if duration > 0.0 { box_path / duration } else { 0.0 },
                peak_power: traj.samples.iter().map(|s| s.power).fold(0.0, f64::max),
                flags,
            }
        })
        .collect();
    let d0 = gaits[0].duration;
    let unequal = gaits.iter().any(|g| (g.duration - d0).abs() > 1e-9);
    if unequal {
        warnings.push("durations differ; distances ranked per second".to_string());
    }
    let rankings = Rankings {
        distance: if unequal {
            rank_by(&gaits, |g| g.box_speed, true)
        } else {
            rank_by(&gaits, |g| g.box_path, true)
        },
        work_box: rank_by(&gaits, |g| g.work_box, true),
        work_loc: rank_by(&gaits, |g| g.work_loc, true),
        peak_power: rank_by(&gaits, |g| g.peak_power, true),
        slope: rank_by(&gaits, |g| g.slope.unwrap_or(f64::INFINITY), false),
    };
    Ok(EfficiencyReport {
        convention,
        gaits,
        rankings,
        warnings,
    })
}
