//! Virtual traffic light protocol with a pedestrian phase, exercised in a
//! deterministic simulated intersection.
//!
//! The protocol runs in five steps. Vehicles approaching the intersection
//! announce themselves; when movements conflict, a leader is elected that
//! temporarily serves as the traffic light, giving red to its own lane and
//! green to the orthogonal lanes; after its phase timer it hands leadership
//! over; when no conflict remains it gives green to its own lane and
//! releases. Three extensions embed the pedestrian phase: conflicts include
//! vehicle-pedestrian conflicts, the handover step can promote the leader
//! to a pedestrian-phase leader, and that leader tracks announced
//! pedestrians through the noisy UWB ranging pipeline, ending the phase
//! early once every tracked pedestrian has detectably crossed or after a
//! fixed fallback period when any of them cannot be ranged.
//!
//! [`sim::run_scenario`] drives the whole protocol from a scripted
//! [`scenario::IntersectionScenario`] and produces a deterministic event
//! log plus a per-tick phase timeline.

pub mod log;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod verify;

use serde::Deserialize;
use std::fmt;
use thiserror::Error;

use crate::geometry::Point;

pub use log::{SimEvent, SimulationOutput, TimedEvent, TimelineRow};
pub use protocol::{
    elect_leader, leader_step, sense_conflict, vptl_leader_step, ConflictReport, LeaderAction,
    LeaderState, PedestrianSensing, PedestrianView, ProtocolTiming, VehicleView, VptlAction,
    VptlStepResult,
};
pub use scenario::{IntersectionScenario, PedestrianSpawn, VehicleSpawn};
pub use sim::run_scenario;
pub use verify::{verify_invariants, InvariantReport};

/// Errors from protocol operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    /// The stepped agent does not hold the required leadership role.
    #[error("caller does not hold the required leadership role")]
    NotLeader,
    /// An election was requested with no candidate vehicles.
    #[error("no candidate vehicles to elect")]
    NoCandidates,
}

/// Scenario construction or parsing failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot parse scenario file: {0}")]
    Parse(String),
}

/// Compass arm a vehicle approaches the intersection from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachDirection {
    North,
    South,
    East,
    West,
}

impl ApproachDirection {
    pub fn axis(&self) -> Axis {
        match self {
            ApproachDirection::North | ApproachDirection::South => Axis::NorthSouth,
            ApproachDirection::East | ApproachDirection::West => Axis::EastWest,
        }
    }

    /// Unit vector pointing from the intersection center out along the arm.
    pub fn arm_unit(&self) -> Point {
        match self {
            ApproachDirection::North => Point::new(0.0, 1.0),
            ApproachDirection::South => Point::new(0.0, -1.0),
            ApproachDirection::East => Point::new(1.0, 0.0),
            ApproachDirection::West => Point::new(-1.0, 0.0),
        }
    }

    /// Unit heading of a vehicle on this arm (toward the center).
    pub fn heading(&self) -> Point {
        let arm = self.arm_unit();
        Point::new(-arm.x, -arm.y)
    }
}

impl fmt::Display for ApproachDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproachDirection::North => write!(f, "north"),
            ApproachDirection::South => write!(f, "south"),
            ApproachDirection::East => write!(f, "east"),
            ApproachDirection::West => write!(f, "west"),
        }
    }
}

/// One of the two orthogonal movement axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    NorthSouth,
    EastWest,
}

impl Axis {
    pub fn orthogonal(&self) -> Axis {
        match self {
            Axis::NorthSouth => Axis::EastWest,
            Axis::EastWest => Axis::NorthSouth,
        }
    }
}

/// Leadership role of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleRole {
    Normal,
    VtlLeader,
    VptlLeader,
}

impl fmt::Display for VehicleRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VehicleRole::Normal => write!(f, "normal"),
            VehicleRole::VtlLeader => write!(f, "vtl-leader"),
            VehicleRole::VptlLeader => write!(f, "vptl-leader"),
        }
    }
}

/// Signal shown to one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightPhase {
    Red,
    Green,
}

impl fmt::Display for LightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LightPhase::Red => write!(f, "red"),
            LightPhase::Green => write!(f, "green"),
        }
    }
}

/// Whether the pedestrian phase is being served.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PedestrianPhase {
    Active,
    Inactive,
}

impl fmt::Display for PedestrianPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PedestrianPhase::Active => write!(f, "active"),
            PedestrianPhase::Inactive => write!(f, "inactive"),
        }
    }
}

/// The full signal state broadcast by the current leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseState {
    pub ns: LightPhase,
    pub ew: LightPhase,
    pub pedestrian: PedestrianPhase,
}

impl PhaseState {
    /// Red to the given axis, green to the orthogonal one.
    pub fn red_for(axis: Axis) -> Self {
        match axis {
            Axis::NorthSouth => Self {
                ns: LightPhase::Red,
                ew: LightPhase::Green,
                pedestrian: PedestrianPhase::Inactive,
            },
            Axis::EastWest => Self {
                ns: LightPhase::Green,
                ew: LightPhase::Red,
                pedestrian: PedestrianPhase::Inactive,
            },
        }
    }

    /// Green to the given axis, red to the orthogonal one.
    pub fn green_for(axis: Axis) -> Self {
        Self::red_for(axis.orthogonal())
    }

    /// All vehicle lanes red, pedestrian phase active.
    pub fn pedestrian_phase() -> Self {
        Self {
            ns: LightPhase::Red,
            ew: LightPhase::Red,
            pedestrian: PedestrianPhase::Active,
        }
    }

    /// Whether a vehicle on the given axis may enter the intersection.
    pub fn allows(&self, axis: Axis) -> bool {
        let light = match axis {
            Axis::NorthSouth => self.ns,
            Axis::EastWest => self.ew,
        };
        light == LightPhase::Green
    }

    /// The safety predicate: the orthogonal axes are never green together,
    /// and an active pedestrian phase keeps every vehicle lane red.
    pub fn is_safe(&self) -> bool {
        if self.ns == LightPhase::Green && self.ew == LightPhase::Green {
            return false;
        }
        if self.pedestrian == PedestrianPhase::Active
            && (self.ns == LightPhase::Green || self.ew == LightPhase::Green)
        {
            return false;
        }
        true
    }
}

/// Announced pedestrian state. Intent only moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PedestrianIntent {
    WaitingToCross,
    Crossing,
    Done,
}

impl fmt::Display for PedestrianIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PedestrianIntent::WaitingToCross => write!(f, "waiting"),
            PedestrianIntent::Crossing => write!(f, "crossing"),
            PedestrianIntent::Done => write!(f, "done"),
        }
    }
}

/// Messages exchanged over the simulated V2X channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// A vehicle announces itself on entering communication range.
    Detect {
        sender: u32,
        direction: ApproachDirection,
        position: Point,
    },
    /// A leader has been elected.
    Elect { leader_id: u32 },
    /// The current leader's signal state; only ever sent by the leader.
    PhaseBroadcast { phase: PhaseState, remaining: f64 },
    /// Leadership transfer.
    Handover {
        from_id: u32,
        to_id: u32,
        to_role: VehicleRole,
    },
    /// The leader dissolves the virtual light.
    Release { leader_id: u32 },
}
