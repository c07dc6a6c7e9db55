//! End-to-end protocol runs over scripted intersections, checked against
//! the phase-safety, leadership, and liveness rules.

use vptl_core::geometry::Point;
use vptl_core::vptl::{
    run_scenario, verify_invariants, ApproachDirection, IntersectionScenario, PedestrianSpawn,
    VehicleSpawn,
};

fn vehicle(id: u32, spawn_time: f64, direction: ApproachDirection, distance: f64, speed: f64) -> VehicleSpawn {
    VehicleSpawn {
        id,
        spawn_time,
        direction,
        distance,
        speed,
    }
}

fn pedestrian(id: u32, spawn_time: f64, from: Point, to: Point) -> PedestrianSpawn {
    PedestrianSpawn {
        id,
        tag_id: 100 + id,
        spawn_time,
        position: from,
        target: to,
        walk_speed: 1.4,
    }
}

#[test]
fn empty_scenario_logs_only_markers() {
    let scenario = IntersectionScenario {
        name: "empty".into(),
        duration: 1.0,
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    assert_eq!(output.events.len(), 2);
    let log = output.render_log();
    assert!(log.starts_with("t=0.000 sim-start"));
    assert!(log.ends_with("t=1.000 sim-end\n"));
    assert!(output.timeline.iter().all(|r| r.ns.is_none()));
    assert!(verify_invariants(&output).is_clean());
}

#[test]
fn two_orthogonal_vehicles_run_one_episode() {
    let scenario = IntersectionScenario {
        name: "two-vehicle".into(),
        duration: 30.0,
        seed: 42,
        vehicles: vec![
            vehicle(1, 0.0, ApproachDirection::South, 100.0, 10.0),
            vehicle(2, 0.0, ApproachDirection::East, 100.0, 10.0),
        ],
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    let report = verify_invariants(&output);
    assert!(report.is_clean(), "violations: {:?}", report.violations);
    assert_eq!(report.elect_count, 1, "exactly one election");
    assert_eq!(report.release_count, 1, "exactly one release");
    assert_eq!(report.handover_count, 0);
    assert!(report.broadcast_count >= 1);
    assert_eq!(report.vehicles_cleared.len(), 2, "both vehicles clear");
}

#[test]
fn second_conflict_triggers_reelection() {
    let scenario = IntersectionScenario {
        name: "two-waves".into(),
        duration: 45.0,
        vehicles: vec![
            vehicle(1, 0.0, ApproachDirection::South, 100.0, 10.0),
            vehicle(2, 0.0, ApproachDirection::East, 100.0, 10.0),
            vehicle(3, 20.0, ApproachDirection::North, 80.0, 10.0),
            vehicle(4, 20.0, ApproachDirection::West, 80.0, 10.0),
        ],
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    let report = verify_invariants(&output);
    assert!(report.is_clean(), "violations: {:?}", report.violations);
    assert_eq!(report.elect_count, 2, "each conflict episode elects anew");
    assert_eq!(report.release_count, 2);
    assert_eq!(report.vehicles_cleared.len(), 4);
}

#[test]
fn pedestrian_gets_a_phase_and_is_detected() {
    let scenario = IntersectionScenario {
        name: "vehicle-and-pedestrian".into(),
        duration: 40.0,
        seed: 7,
        vehicles: vec![vehicle(1, 0.0, ApproachDirection::South, 30.0, 10.0)],
        pedestrians: vec![pedestrian(1, 0.0, Point::new(-7.0, 3.0), Point::new(7.0, 3.0))],
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    let report = verify_invariants(&output);
    assert!(report.is_clean(), "violations: {:?}", report.violations);

    let log = output.render_log();
    assert!(
        log.contains("role=vptl-leader"),
        "pedestrian conflict must promote the leader"
    );
    assert!(
        log.contains("crossing-detected leader=1 pedestrian=1 from=Left to=Right"),
        "the tracked crossing must be detected:\n{log}"
    );
    assert_eq!(report.pedestrian_active_streaks.len(), 1);
    let (_, streak) = report.pedestrian_active_streaks[0];
    let fixed_ticks = (scenario.pedestrian_phase_fixed / scenario.tick).round() as u64;
    assert!(
        streak < fixed_ticks,
        "detected crossing must end the phase early ({streak} ticks)"
    );
    assert_eq!(report.pedestrians_served, vec![1]);
    assert_eq!(report.vehicles_cleared, vec![1], "vehicle clears after the phase");
}

#[test]
fn untrackable_pedestrian_holds_fixed_phase() {
    let scenario = IntersectionScenario {
        name: "pedestrian-outside-coverage".into(),
        duration: 40.0,
        seed: 7,
        vehicles: vec![vehicle(1, 0.0, ApproachDirection::South, 30.0, 10.0)],
        // Crossing behind the stopped vehicle: outside anchor coverage.
        pedestrians: vec![pedestrian(1, 0.0, Point::new(-8.0, -20.0), Point::new(8.0, -20.0))],
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    let report = verify_invariants(&output);
    assert!(report.is_clean(), "violations: {:?}", report.violations);
    let fixed_ticks = (scenario.pedestrian_phase_fixed / scenario.tick).round() as u64;
    assert_eq!(
        report.pedestrian_active_streaks,
        vec![(50, fixed_ticks)],
        "untrackable pedestrian must hold the phase for exactly the fixed period"
    );
    assert!(!output.render_log().contains("crossing-detected"));
    assert_eq!(report.vehicles_cleared, vec![1]);
}

#[test]
fn runs_are_byte_identical() {
    let scenario = IntersectionScenario {
        name: "determinism".into(),
        duration: 40.0,
        seed: 99,
        vehicles: vec![
            vehicle(1, 0.0, ApproachDirection::South, 40.0, 10.0),
            vehicle(2, 2.0, ApproachDirection::East, 60.0, 12.0),
        ],
        pedestrians: vec![pedestrian(1, 1.0, Point::new(-7.0, 3.0), Point::new(7.0, 3.0))],
        ..IntersectionScenario::default()
    };
    let a = run_scenario(&scenario).unwrap();
    let b = run_scenario(&scenario).unwrap();
    assert_eq!(a.render_log(), b.render_log());
    assert_eq!(a.render_timeline_csv(), b.render_timeline_csv());
}

#[test]
fn timeline_covers_every_tick() {
    let scenario = IntersectionScenario {
        name: "timeline".into(),
        duration: 12.5,
        vehicles: vec![vehicle(1, 0.0, ApproachDirection::North, 30.0, 10.0)],
        ..IntersectionScenario::default()
    };
    let output = run_scenario(&scenario).unwrap();
    let expected = (scenario.duration / scenario.tick).round() as usize;
    assert_eq!(output.timeline.len(), expected);
    let csv = output.render_timeline_csv();
    assert!(csv.starts_with("t,ns,ew,pedestrian\n"));
    assert_eq!(csv.lines().count(), expected + 1);
}
