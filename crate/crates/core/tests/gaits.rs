//! Gait reproduction and efficiency ordering on the flat push scene.

mod common;

use std::sync::OnceLock;

use common::{flat_push, run, Run};
use snake_locomanip::metrics::{efficiency_report, energy_ledger, EfficiencyReport, WorkConvention};

const GAITS: [&str; 4] = ["sidewinding", "c_roll", "s_roll", "j_roll"];

fn runs() -> &'static Vec<Run> {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| GAITS.iter().map(|g| flat_push(g, "")).collect())
}

fn report() -> EfficiencyReport {
    let named: Vec<(String, &_)> = GAITS.iter().zip(runs()).map(|(g, r)| (g.to_string(), &r.traj)).collect();
    efficiency_report(&named, WorkConvention::Absolute).unwrap()
}

#[test]
fn sidewinding_locomotes_on_flat_ground() {
    let r = run(r#"{"scenario":"flat_push","duration":10,"gait":{"name":"sidewinding"},"box":{"position":[-5,-5]}}"#);
    let d = r.traj.robot_displacement(&r.model);
    assert!(d.xy().norm() > 0.2, "robot moved {:.3} m", d.xy().norm());
}

#[test]
fn every_pushing_gait_moves_the_box_forward() {
    for (g, r) in GAITS.iter().zip(runs()) {
        // forward: away from the body, the +y rolling direction
        let d = r.traj.box_displacement();
        assert!(d.y > 0.1, "{g}: box moved {:.3} m forward", d.y);
    }
}

#[test]
fn mirrored_j_roll_reverses_lateral_drift() {
    let plain = &runs()[3].traj;
    let mirrored = flat_push("j_roll", r#","mirror":true"#).traj;
    let a = plain.box_displacement().y;
    let b = mirrored.box_displacement().y;
    assert!(a > 0.0 && b < 0.0, "drift {a:.3} vs mirrored {b:.3}");
}

#[test]
fn sidewinding_does_the_most_work_and_uses_the_most_power() {
    let rep = report();
    assert_eq!(rep.rankings.work_box[0], "sidewinding", "{:?}", rep.rankings);
    assert_eq!(rep.rankings.work_loc[0], "sidewinding", "{:?}", rep.rankings);
    assert_eq!(rep.rankings.peak_power[0], "sidewinding", "{:?}", rep.rankings);
}

#[test]
fn s_and_j_roll_are_more_efficient_than_sidewinding() {
    let rep = report();
    let slope = |g: &str| rep.get(g).unwrap().slope.expect("box work");
    assert!(slope("s_roll") < slope("sidewinding"));
    assert!(slope("j_roll") < slope("sidewinding"));
}

#[test]
fn distance_ranking_covers_every_gait() {
    let rep = report();
    assert_eq!(rep.rankings.distance.len(), GAITS.len());
    assert!(rep.warnings.is_empty());
}

#[test]
fn box_work_never_exceeds_locomotion_work() {
    for (g, r) in GAITS.iter().zip(runs()) {
        let last = r.traj.last().unwrap();
        assert!(last.work_box <= 1.05 * last.work_loc, "{g}: {} > {}", last.work_box, last.work_loc);
    }
}

#[test]
fn cumulative_series_are_monotone_and_path_bounds_displacement() {
    for (g, r) in GAITS.iter().zip(runs()) {
        let l = energy_ledger(&r.traj);
        for w in l.work_loc.windows(2).chain(l.work_loc_net.windows(2)).chain(l.box_path.windows(2)) {
            assert!(w[1] >= w[0], "{g}: series decreases");
        }
        let path = *l.box_path.last().unwrap();
        assert!(path + 1e-12 >= r.traj.box_displacement().norm(), "{g}");
    }
}
