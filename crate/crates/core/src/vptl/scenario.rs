//! Scripted intersection scenarios and their on-disk TOML schema.
//!
//! ```toml
//! [scenario]
//! name = "two-vehicle"
//! duration = 60.0
//! tick = 0.1
//! seed = 42
//! comm_range = 300.0
//!
//! [timing]
//! phase_min = 5.0
//! phase_max = 30.0
//! pedestrian_phase_fixed = 15.0
//!
//! [geometry]
//! stopline_offset = 6.0
//! clear_distance = 15.0
//! headway = 7.0
//! baseline = 1.85
//!
//! [tracking]
//! sigma_e = 0.0185
//! bias = 0.0
//! window = 10
//! min_confidence = 0.999
//!
//! [[vehicles]]
//! id = 1
//! spawn_time = 0.0
//! direction = "north"
//! distance = 100.0
//! speed = 10.0
//!
//! [[pedestrians]]
//! id = 1
//! tag_id = 101
//! spawn_time = 2.0
//! position = [-7.0, 3.0]
//! target = [7.0, 3.0]
//! walk_speed = 1.4
//! ```
//!
//! Every block except the agent tables is optional and falls back to the
//! defaults shown above.

use serde::Deserialize;

use super::{ApproachDirection, ScenarioError};
use crate::geometry::{AnchorLayout, Point};
use crate::ranging::NoiseModel;

/// A vehicle entering the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSpawn {
    pub id: u32,
    /// Simulation time at which the vehicle appears (seconds).
    pub spawn_time: f64,
    /// Arm the vehicle approaches from.
    pub direction: ApproachDirection,
    /// Initial distance to the stop line (meters).
    pub distance: f64,
    /// Constant approach speed (meters/second).
    pub speed: f64,
}

/// A pedestrian entering the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianSpawn {
    pub id: u32,
    /// Id of the UWB tag the pedestrian carries.
    pub tag_id: u32,
    pub spawn_time: f64,
    /// Starting position in the intersection frame.
    pub position: Point,
    /// Where the crossing ends.
    pub target: Point,
    /// Walking speed once the pedestrian phase is observed (meters/second).
    pub walk_speed: f64,
}

/// A complete scripted scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionScenario {
    pub name: String,
    /// Simulation step (seconds).
    pub tick: f64,
    /// Total simulated time (seconds).
    pub duration: f64,
    pub seed: u64,
    /// V2X communication range (meters).
    pub comm_range: f64,
    /// Minimum vehicle phase (seconds).
    pub phase_min: f64,
    /// Maximum vehicle phase (seconds).
    pub phase_max: f64,
    /// Fallback pedestrian phase (seconds).
    pub pedestrian_phase_fixed: f64,
    /// Distance from the intersection center to each stop line (meters).
    pub stopline_offset: f64,
    /// How far past the stop line a vehicle must travel to have cleared the
    /// intersection (meters).
    pub clear_distance: f64,
    /// Minimum spacing kept between queued vehicles (meters).
    pub headway: f64,
    /// Anchor layout shared by all vehicles.
    pub layout: AnchorLayout,
    /// Ranging noise applied when the leader tracks pedestrians.
    pub noise: NoiseModel,
    /// Samples per classification window in the crossing detector.
    pub tracking_window: usize,
    /// Confidence required to call a side in the crossing detector.
    pub min_confidence: f64,
    pub vehicles: Vec<VehicleSpawn>,
    pub pedestrians: Vec<PedestrianSpawn>,
}

impl Default for IntersectionScenario {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            tick: 0.1,
            duration: 60.0,
            seed: 0,
            comm_range: 300.0,
            phase_min: 5.0,
            phase_max: 30.0,
            pedestrian_phase_fixed: 15.0,
            stopline_offset: 6.0,
            clear_distance: 15.0,
            headway: 7.0,
            layout: AnchorLayout::default(),
            noise: NoiseModel::default(),
            tracking_window: 10,
            min_confidence: 0.999,
            vehicles: Vec::new(),
            pedestrians: Vec::new(),
        }
    }
}

impl IntersectionScenario {
    /// Check the structural constraints before running.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.tick > 0.0) {
            return Err(ScenarioError::Invalid("tick must be positive".into()));
        }
        if self.duration < 0.0 {
            return Err(ScenarioError::Invalid("duration must not be negative".into()));
        }
        if self.phase_min > self.phase_max {
            return Err(ScenarioError::Invalid(
                "phase_min must not exceed phase_max".into(),
            ));
        }
        if !(self.phase_min > 0.0 && self.pedestrian_phase_fixed > 0.0) {
            return Err(ScenarioError::Invalid(
                "phase durations must be positive".into(),
            ));
        }
        if !(self.comm_range > 0.0) {
            return Err(ScenarioError::Invalid("comm_range must be positive".into()));
        }
        if self.tracking_window < 2 {
            return Err(ScenarioError::Invalid(
                "tracking_window must be at least 2".into(),
            ));
        }
        self.layout
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let mut vehicle_ids: Vec<u32> = self.vehicles.iter().map(|v| v.id).collect();
        vehicle_ids.sort_unstable();
        vehicle_ids.dedup();
        if vehicle_ids.len() != self.vehicles.len() {
            return Err(ScenarioError::Invalid("duplicate vehicle id".into()));
        }
        let mut ped_ids: Vec<u32> = self.pedestrians.iter().map(|p| p.id).collect();
        ped_ids.sort_unstable();
        ped_ids.dedup();
        if ped_ids.len() != self.pedestrians.len() {
            return Err(ScenarioError::Invalid("duplicate pedestrian id".into()));
        }
        for v in &self.vehicles {
            if v.speed <= 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "vehicle {} speed must be positive",
                    v.id
                )));
            }
            if v.distance < 0.0 || v.spawn_time < 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "vehicle {} must spawn ahead of the stop line at a non-negative time",
                    v.id
                )));
            }
        }
        for p in &self.pedestrians {
            if p.walk_speed < 0.0 || p.spawn_time < 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "pedestrian {} must have non-negative walk speed and spawn time",
                    p.id
                )));
            }
        }
        Ok(())
    }

    /// Parse a scenario from its TOML representation.
    pub fn from_toml_str(input: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(input).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let scenario = file.into_scenario();
        scenario.validate()?;
        Ok(scenario)
    }
}

// On-disk representation. Kept apart from the runtime struct so the file
// schema can default blocks independently.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    scenario: ScenarioBlock,
    #[serde(default)]
    timing: TimingBlock,
    #[serde(default)]
    geometry: GeometryBlock,
    #[serde(default)]
    tracking: TrackingBlock,
    #[serde(default)]
    vehicles: Vec<VehicleRow>,
    #[serde(default)]
    pedestrians: Vec<PedestrianRow>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioBlock {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default = "default_duration")]
    duration: f64,
    #[serde(default = "default_tick")]
    tick: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_comm_range")]
    comm_range: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingBlock {
    #[serde(default = "default_phase_min")]
    phase_min: f64,
    #[serde(default = "default_phase_max")]
    phase_max: f64,
    #[serde(default = "default_pedestrian_phase_fixed")]
    pedestrian_phase_fixed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryBlock {
    #[serde(default = "default_stopline_offset")]
    stopline_offset: f64,
    #[serde(default = "default_clear_distance")]
    clear_distance: f64,
    #[serde(default = "default_headway")]
    headway: f64,
    #[serde(default = "default_baseline")]
    baseline: f64,
    #[serde(default = "default_front_range")]
    front_range: f64,
    #[serde(default = "default_side_range")]
    side_range: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackingBlock {
    #[serde(default = "default_sigma_e")]
    sigma_e: f64,
    #[serde(default)]
    bias: f64,
    #[serde(default = "default_window")]
    window: usize,
    #[serde(default = "default_min_confidence")]
    min_confidence: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleRow {
    id: u32,
    #[serde(default)]
    spawn_time: f64,
    direction: ApproachDirection,
    distance: f64,
    speed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PedestrianRow {
    id: u32,
    #[serde(default)]
    tag_id: Option<u32>,
    #[serde(default)]
    spawn_time: f64,
    position: (f64, f64),
    target: (f64, f64),
    #[serde(default = "default_walk_speed")]
    walk_speed: f64,
}

fn default_name() -> String {
    "unnamed".into()
}
fn default_duration() -> f64 {
    60.0
}
fn default_tick() -> f64 {
    0.1
}
fn default_comm_range() -> f64 {
    300.0
}
fn default_phase_min() -> f64 {
    5.0
}
fn default_phase_max() -> f64 {
    30.0
}
fn default_pedestrian_phase_fixed() -> f64 {
    15.0
}
fn default_stopline_offset() -> f64 {
    6.0
}
fn default_clear_distance() -> f64 {
    15.0
}
fn default_headway() -> f64 {
    7.0
}
fn default_baseline() -> f64 {
    1.85
}
fn default_front_range() -> f64 {
    50.0
}
fn default_side_range() -> f64 {
    5.0
}
fn default_sigma_e() -> f64 {
    0.0185
}
fn default_window() -> usize {
    10
}
fn default_min_confidence() -> f64 {
    0.999
}
fn default_walk_speed() -> f64 {
    1.4
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        Self {
            name: default_name(),
            duration: default_duration(),
            tick: default_tick(),
            seed: 0,
            comm_range: default_comm_range(),
        }
    }
}

impl Default for TimingBlock {
    fn default() -> Self {
        Self {
            phase_min: default_phase_min(),
            phase_max: default_phase_max(),
            pedestrian_phase_fixed: default_pedestrian_phase_fixed(),
        }
    }
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            stopline_offset: default_stopline_offset(),
            clear_distance: default_clear_distance(),
            headway: default_headway(),
            baseline: default_baseline(),
            front_range: default_front_range(),
            side_range: default_side_range(),
        }
    }
}

impl Default for TrackingBlock {
    fn default() -> Self {
        Self {
            sigma_e: default_sigma_e(),
            bias: 0.0,
            window: default_window(),
            min_confidence: default_min_confidence(),
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> IntersectionScenario {
        let layout = AnchorLayout {
            half_baseline: self.geometry.baseline / 2.0,
            front_range: self.geometry.front_range,
            side_range: self.geometry.side_range,
            ..AnchorLayout::default()
        };
        IntersectionScenario {
            name: self.scenario.name,
            tick: self.scenario.tick,
            duration: self.scenario.duration,
            seed: self.scenario.seed,
            comm_range: self.scenario.comm_range,
            phase_min: self.timing.phase_min,
            phase_max: self.timing.phase_max,
            pedestrian_phase_fixed: self.timing.pedestrian_phase_fixed,
            stopline_offset: self.geometry.stopline_offset,
            clear_distance: self.geometry.clear_distance,
            headway: self.geometry.headway,
            layout,
            noise: NoiseModel::new(self.tracking.sigma_e, self.tracking.bias),
            tracking_window: self.tracking.window,
            min_confidence: self.tracking.min_confidence,
            vehicles: self
                .vehicles
                .into_iter()
                .map(|v| VehicleSpawn {
                    id: v.id,
                    spawn_time: v.spawn_time,
                    direction: v.direction,
                    distance: v.distance,
                    speed: v.speed,
                })
                .collect(),
            pedestrians: self
                .pedestrians
                .into_iter()
                .map(|p| PedestrianSpawn {
                    id: p.id,
                    tag_id: p.tag_id.unwrap_or(p.id),
                    spawn_time: p.spawn_time,
                    position: Point::new(p.position.0, p.position.1),
                    target: Point::new(p.target.0, p.target.1),
                    walk_speed: p.walk_speed,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[scenario]
name = "two-vehicle"
duration = 45.0
tick = 0.1
seed = 42

[timing]
phase_max = 20.0

[[vehicles]]
id = 1
direction = "north"
distance = 100.0
speed = 10.0

[[vehicles]]
id = 2
spawn_time = 1.5
direction = "east"
distance = 80.0
speed = 8.0

[[pedestrians]]
id = 1
tag_id = 101
spawn_time = 2.0
position = [-7.0, 3.0]
target = [7.0, 3.0]
"#;

    #[test]
    fn parses_full_file() {
        let s = IntersectionScenario::from_toml_str(SAMPLE).unwrap();
        assert_eq!(s.name, "two-vehicle");
        assert_eq!(s.duration, 45.0);
        assert_eq!(s.seed, 42);
        assert_eq!(s.phase_max, 20.0);
        assert_eq!(s.phase_min, 5.0);
        assert_eq!(s.vehicles.len(), 2);
        assert_eq!(s.vehicles[1].spawn_time, 1.5);
        assert_eq!(s.pedestrians.len(), 1);
        assert_eq!(s.pedestrians[0].walk_speed, 1.4);
        assert_eq!(s.pedestrians[0].position, Point::new(-7.0, 3.0));
    }

    #[test]
    fn empty_file_gives_defaults() {
        let s = IntersectionScenario::from_toml_str("").unwrap();
        assert_eq!(s.tick, 0.1);
        assert_eq!(s.comm_range, 300.0);
        assert!(s.vehicles.is_empty());
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = IntersectionScenario::from_toml_str("[scenario]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn rejects_bad_direction() {
        let err = IntersectionScenario::from_toml_str(
            "[[vehicles]]\nid = 1\ndirection = \"up\"\ndistance = 10.0\nspeed = 5.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut s = IntersectionScenario::default();
        s.tick = 0.0;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));

        let mut s = IntersectionScenario::default();
        s.phase_min = 50.0;
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));

        let mut s = IntersectionScenario::default();
        s.vehicles = vec![
            VehicleSpawn {
                id: 1,
                spawn_time: 0.0,
                direction: ApproachDirection::North,
                distance: 10.0,
                speed: 5.0,
            },
            VehicleSpawn {
                id: 1,
                spawn_time: 0.0,
                direction: ApproachDirection::East,
                distance: 10.0,
                speed: 5.0,
            },
        ];
        assert!(matches!(s.validate(), Err(ScenarioError::Invalid(_))));
    }
}
