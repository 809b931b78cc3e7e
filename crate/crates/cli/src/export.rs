//! CSV artifacts for a trajectory and their inverse.
//!
//! Numbers use the shortest decimal that round-trips; timestamps use six
//! decimals. Every file carries one row per sample.

use std::fs::File;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use snake_locomanip::model::{GenVector, SystemState, NUM_JOINTS};
use snake_locomanip::trajectory::{ContactRecord, Sample, Trajectory};

use crate::error::{CliError, CliResult};

pub const ROBOT_POSE: &str = "robot_pose.csv";
pub const BOX_POSE: &str = "box_pose.csv";
pub const JOINTS: &str = "joints.csv";
pub const CONTACT_FILES: [(&str, ContactClass); 3] = [
    ("contacts_robot_ground.csv", ContactClass::RobotTerrain),
    ("contacts_box_ground.csv", ContactClass::BoxTerrain),
    ("contacts_robot_box.csv", ContactClass::RobotBox),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactClass {
    RobotTerrain,
    BoxTerrain,
    RobotBox,
}

impl ContactClass {
    fn matches(self, c: &ContactRecord) -> bool {
        match self {
            ContactClass::RobotTerrain => c.is_robot_terrain(),
            ContactClass::BoxTerrain => c.is_box_terrain(),
            ContactClass::RobotBox => c.is_robot_box(),
        }
    }
}

/// Shortest round-trip decimal, in exponent form when that is shorter.
pub fn num(x: f64) -> String {
    let plain = format!("{x}");
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

pub fn time(t: f64) -> String {
    format!("{t:.6}")
}

fn indexed(prefix: &str) -> impl Iterator<Item = String> + '_ {
    (1..=NUM_JOINTS).map(move |k| format!("{prefix}{k}"))
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn quat(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

fn strings(t: f64, values: impl IntoIterator<Item = f64>) -> Vec<String> {
    std::iter::once(time(t)).chain(values.into_iter().map(num)).collect()
}

fn robot_row(s: &Sample) -> Vec<String> {
    let st = &s.state;
    let v = st.velocity.rows(0, 6);
    strings(
        s.t(),
        st.base_position
            .iter()
            .copied()
            .chain(quat(&st.base_orientation))
            .chain(v.iter().copied()),
    )
}

fn box_row(s: &Sample) -> Vec<String> {
    let st = &s.state;
    let mut r = strings(
        s.t(),
        st.box_position
            .iter()
            .copied()
            .chain(quat(&st.box_orientation))
            .chain(st.box_linear_velocity().iter().copied())
            .chain(st.box_angular_velocity().iter().copied()),
    );
    r.push(u8::from(st.latched).to_string());
    r
}

fn joint_row(s: &Sample) -> Vec<String> {
    let st = &s.state;
    strings(
        s.t(),
        st.joint_angles
            .iter()
            .chain(&s.q_ref)
            .chain(&st.joint_rates())
            .chain(&s.tau)
            .copied()
            .chain([
                s.power,
                s.work_loc,
                s.work_loc_net,
                s.work_box,
                s.box_path,
                s.effort,
                s.latch_work,
            ]),
    )
}

fn contact_row(s: &Sample, class: ContactClass) -> Vec<String> {
    let mut count = 0usize;
    let (mut fn_sum, mut ft_sum, mut depth, mut slip, mut power) = (0.0, 0.0, 0.0f64, 0.0f64, 0.0);
    let mut net = Vector3::zeros();
    for c in s.contacts.iter().filter(|c| class.matches(c)) {
        count += 1;
        fn_sum += c.normal_force;
        ft_sum += c.friction_force.norm();
        net += c.normal * c.normal_force;
        depth = depth.max(c.depth);
        slip = slip.max(c.slip_speed());
        power += c.box_power;
    }
    let mut r = vec![time(s.t()), count.to_string()];
    r.extend([fn_sum, ft_sum, net.x, net.y, net.z, depth, slip, power].map(num));
    r
}

fn header(cols: impl IntoIterator<Item = String>) -> Vec<String> {
    std::iter::once("t".to_string()).chain(cols).collect()
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Writes the pose, joint and contact CSVs into `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> CliResult<()> {
    let pose = names(&["x", "y", "z", "qw", "qx", "qy", "qz"]);
    let lin_ang = names(&["vx", "vy", "vz", "wx", "wy", "wz"]);
    let samples = || traj.samples.iter();

    let robot = header(pose.iter().cloned().chain(lin_ang.iter().cloned()));
    write_rows(&dir.join(ROBOT_POSE), robot, samples().map(robot_row))?;

    let boxh = header(pose.iter().cloned().chain(lin_ang.iter().cloned()).chain(["latched".into()]));
    write_rows(&dir.join(BOX_POSE), boxh, samples().map(box_row))?;

    let joints = header(
        indexed("q")
            .chain(indexed("q_ref"))
            .chain(indexed("dq"))
            .chain(indexed("tau"))
            .chain(names(&["power", "work_loc", "work_loc_net", "work_box", "box_path", "effort", "latch_work"])),
    );
    write_rows(&dir.join(JOINTS), joints, samples().map(joint_row))?;

    let contacts = header(names(&[
        "count",
        "normal_force",
        "friction_force",
        "net_normal_x",
        "net_normal_y",
        "net_normal_z",
        "max_depth",
        "max_slip_speed",
        "box_power",
    ]));
    for (file, class) in CONTACT_FILES {
        write_rows(&dir.join(file), contacts.clone(), samples().map(|s| contact_row(s, class)))?;
    }
    Ok(())
}

/// Numeric table of a CSV artifact.
pub fn read_table(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(rows)
}

fn array<const N: usize>(row: &[f64], at: usize) -> [f64; N] {
    let mut a = [0.0; N];
    a.copy_from_slice(&row[at..at + N]);
    a
}

fn unit(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Rebuilds the sampled trajectory of a run directory. Contacts are not
/// recovered.
pub fn read_trajectory(dir: &Path) -> CliResult<Trajectory> {
    let robot = read_table(&dir.join(ROBOT_POSE))?;
    let boxes = read_table(&dir.join(BOX_POSE))?;
    let joints = read_table(&dir.join(JOINTS))?;
    let n = robot.len();
    if boxes.len() != n || joints.len() != n {
        return Err(CliError::Config(format!("{}: artifacts have unequal row counts", dir.display())));
    }
    let j = NUM_JOINTS;
    let samples = (0..n)
        .map(|i| {
            let (r, b, q) = (&robot[i], &boxes[i], &joints[i]);
            let mut velocity = GenVector::zeros();
            velocity.rows_mut(0, 6).copy_from_slice(&r[8..14]);
            velocity.rows_mut(6, j).copy_from_slice(&q[1 + 2 * j..1 + 3 * j]);
            velocity.rows_mut(6 + j, 6).copy_from_slice(&b[8..14]);
            let w = &q[1 + 4 * j..];
            Sample {
                state: SystemState {
                    t: r[0],
                    base_position: Vector3::from(array::<3>(r, 1)),
                    base_orientation: unit(array(r, 4)),
                    joint_angles: array(q, 1),
                    box_position: Vector3::from(array::<3>(b, 1)),
                    box_orientation: unit(array(b, 4)),
                    velocity,
                    latched: b[14] != 0.0,
                    dock: None,
                },
                q_ref: array(q, 1 + j),
                tau: array(q, 1 + 3 * j),
                contacts: Vec::new(),
                contact_objective: 0.0,
                manipulation_objective: 0.0,
                power: w[0],
                work_loc: w[1],
                work_loc_net: w[2],
                work_box: w[3],
                box_path: w[4],
                effort: w[5],
                latch_work: w[6],
            }
        })
        .collect();
    Ok(Trajectory {
        samples,
        dt: 0.0,
        contacts_logged: false,
        latch_events: Vec::new(),
        max_box_height: f64::NAN,
        max_head_height: f64::NAN,
        max_abs_torque: f64::NAN,
        max_abs_joint_angle: f64::NAN,
        max_friction_ratio_excess: f64::NAN,
        abort: None,
    })
}
