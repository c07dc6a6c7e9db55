//! Conflict sensing, leader election, and the per-tick leader state
//! machines.

use super::{
    ApproachDirection, Axis, PedestrianIntent, PhaseState, ProtocolError, VehicleRole,
};
use crate::geometry::{CoverageStatus, Point, TagPosition};
use crate::tracking::{CrossingEvent, CrossingMonitor};

/// Snapshot of one active vehicle as seen over V2X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleView {
    pub id: u32,
    pub direction: ApproachDirection,
    /// Distance to the stop line (meters). Zero means stopped at the line;
    /// negative means the vehicle has entered the intersection.
    pub distance_to_stopline: f64,
    /// Position in the intersection frame.
    pub position: Point,
    /// Range within which this vehicle can detect a pedestrian tag.
    pub front_range: f64,
}

impl VehicleView {
    /// Approaching vehicles have not yet entered the intersection.
    fn is_approaching(&self) -> bool {
        self.distance_to_stopline >= 0.0
    }
}

/// Snapshot of one announced pedestrian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianView {
    pub id: u32,
    pub position: Point,
    pub intent: PedestrianIntent,
}

/// Protocol timing parameters shared by all leaders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolTiming {
    /// Simulation step (seconds).
    pub tick: f64,
    /// Minimum vehicle phase length (seconds).
    pub phase_min: f64,
    /// Maximum vehicle phase length (seconds).
    pub phase_max: f64,
    /// Fallback pedestrian phase length (seconds).
    pub pedestrian_phase_fixed: f64,
    /// V2X communication range (meters).
    pub comm_range: f64,
}

impl ProtocolTiming {
    pub fn ticks(&self, seconds: f64) -> u64 {
        (seconds / self.tick).round() as u64
    }
}

/// Result of scanning the intersection for conflicting movements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictReport {
    /// Approaching vehicles occupy both orthogonal axes within
    /// communication range.
    pub vehicle_vehicle: bool,
    /// At least one waiting pedestrian is within detection range of an
    /// approaching vehicle.
    pub vehicle_pedestrian: bool,
    /// Vehicles involved in a conflict, candidates for leadership
    /// (ascending id).
    pub candidates: Vec<u32>,
    /// Waiting pedestrians currently in detection range (ascending id).
    pub waiting_pedestrians: Vec<u32>,
}

impl ConflictReport {
    pub fn any(&self) -> bool {
        self.vehicle_vehicle || self.vehicle_pedestrian
    }
}

/// Scan the world for vehicle-vehicle and vehicle-pedestrian conflicts.
///
/// A vehicle-vehicle conflict exists when approaching vehicles on both
/// orthogonal axes are within `comm_range` of the intersection. A
/// vehicle-pedestrian conflict exists when a pedestrian with announced
/// intent to cross stands within the detection range of any approaching
/// vehicle.
pub fn sense_conflict(
    vehicles: &[VehicleView],
    pedestrians: &[PedestrianView],
    comm_range: f64,
) -> ConflictReport {
    let in_range: Vec<&VehicleView> = vehicles
        .iter()
        .filter(|v| v.is_approaching() && v.distance_to_stopline <= comm_range)
        .collect();
    let ns_present = in_range.iter().any(|v| v.direction.axis() == Axis::NorthSouth);
    let ew_present = in_range.iter().any(|v| v.direction.axis() == Axis::EastWest);
    let vehicle_vehicle = ns_present && ew_present;

    let mut waiting_pedestrians = Vec::new();
    let mut ped_conflict_vehicles = Vec::new();
    for ped in pedestrians {
        if ped.intent != PedestrianIntent::WaitingToCross {
            continue;
        }
        let mut detected = false;
        for v in &in_range {
            if v.position.distance_to(ped.position) <= v.front_range {
                detected = true;
                ped_conflict_vehicles.push(v.id);
            }
        }
        if detected {
            waiting_pedestrians.push(ped.id);
        }
    }
    let vehicle_pedestrian = !waiting_pedestrians.is_empty();

    let mut candidates: Vec<u32> = if vehicle_vehicle {
        in_range.iter().map(|v| v.id).collect()
    } else {
        ped_conflict_vehicles
    };
    candidates.sort_unstable();
    candidates.dedup();
    waiting_pedestrians.sort_unstable();
    waiting_pedestrians.dedup();

    ConflictReport {
        vehicle_vehicle,
        vehicle_pedestrian,
        candidates,
        waiting_pedestrians,
    }
}

/// Pick the leader among the conflict candidates: the vehicle closest to
/// its stop line, lowest id on ties. The choice is a pure function of the
/// candidate set, so it is invariant under reordering.
pub fn elect_leader(
    report: &ConflictReport,
    vehicles: &[VehicleView],
) -> Result<u32, ProtocolError> {
    vehicles
        .iter()
        .filter(|v| report.candidates.contains(&v.id))
        .min_by(|a, b| {
            a.distance_to_stopline
                .partial_cmp(&b.distance_to_stopline)
                .expect("distances are finite")
                .then(a.id.cmp(&b.id))
        })
        .map(|v| v.id)
        .ok_or(ProtocolError::NoCandidates)
}

/// Pick the next leader among all approaching vehicles in communication
/// range, by the same closest-then-lowest-id rule.
fn elect_among_approaching(vehicles: &[VehicleView], comm_range: f64) -> Option<u32> {
    vehicles
        .iter()
        .filter(|v| v.is_approaching() && v.distance_to_stopline <= comm_range)
        .min_by(|a, b| {
            a.distance_to_stopline
                .partial_cmp(&b.distance_to_stopline)
                .expect("distances are finite")
                .then(a.id.cmp(&b.id))
        })
        .map(|v| v.id)
}

/// Tracks one announced pedestrian through noisy ranging until a crossing
/// is detected.
#[derive(Debug, Clone)]
pub struct PedestrianTracker {
    pub pedestrian_id: u32,
    monitor: CrossingMonitor,
    pub crossed: Option<CrossingEvent>,
}

/// State carried by the current leader between ticks.
#[derive(Debug, Clone)]
pub struct LeaderState {
    pub vehicle_id: u32,
    pub direction: ApproachDirection,
    pub role: VehicleRole,
    pub phase: PhaseState,
    pub elapsed_ticks: u64,
    pub duration_ticks: u64,
    trackers: Vec<PedestrianTracker>,
    untrackable_seen: bool,
}

impl LeaderState {
    /// Fresh leadership for an elected vehicle: red to its own lane, green
    /// to the orthogonal lanes. The phase runs `phase_max` when the served
    /// (green) axis is occupied and `phase_min` otherwise.
    pub fn new_vtl(
        vehicle_id: u32,
        direction: ApproachDirection,
        vehicles: &[VehicleView],
        timing: &ProtocolTiming,
    ) -> Self {
        let axis = direction.axis();
        let green_axis = axis.orthogonal();
        let green_occupied = vehicles.iter().any(|v| {
            v.id != vehicle_id
                && v.direction.axis() == green_axis
                && v.is_approaching()
                && v.distance_to_stopline <= timing.comm_range
        });
        let duration = if green_occupied {
            timing.phase_max
        } else {
            timing.phase_min
        };
        Self {
            vehicle_id,
            direction,
            role: VehicleRole::VtlLeader,
            phase: PhaseState::red_for(axis),
            elapsed_ticks: 0,
            duration_ticks: timing.ticks(duration).max(1),
            trackers: Vec::new(),
            untrackable_seen: false,
        }
    }

    /// Promote this leader to serve the pedestrian phase: every vehicle
    /// lane red, one tracker per announced pedestrian still on the move.
    pub fn promote_to_vptl(
        &mut self,
        pedestrians: &[PedestrianView],
        window: usize,
        min_confidence: f64,
        timing: &ProtocolTiming,
    ) {
        self.role = VehicleRole::VptlLeader;
        self.phase = PhaseState::pedestrian_phase();
        self.elapsed_ticks = 0;
        self.duration_ticks = timing.ticks(timing.pedestrian_phase_fixed).max(1);
        self.untrackable_seen = false;
        self.trackers = pedestrians
            .iter()
            .filter(|p| p.intent != PedestrianIntent::Done)
            .map(|p| PedestrianTracker {
                pedestrian_id: p.id,
                monitor: CrossingMonitor::new(window, min_confidence),
                crossed: None,
            })
            .collect();
        self.trackers.sort_by_key(|t| t.pedestrian_id);
    }

    /// Ids of tracked pedestrians whose crossing has not yet been detected.
    pub fn pending_pedestrians(&self) -> Vec<u32> {
        self.trackers
            .iter()
            .filter(|t| t.crossed.is_none())
            .map(|t| t.pedestrian_id)
            .collect()
    }

    /// Seconds left on the current phase timer.
    fn remaining(&self, timing: &ProtocolTiming) -> f64 {
        (self.duration_ticks.saturating_sub(self.elapsed_ticks)) as f64 * timing.tick
    }
}

/// What the vehicle-phase leader decided to do this tick.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderAction {
    /// Keep serving: broadcast the current phase with the remaining time.
    Broadcast { phase: PhaseState, remaining: f64 },
    /// No conflict remains: give green to the own lane, then release.
    Release { final_phase: PhaseState },
    /// Phase expired with a pedestrian conflict pending: the leader
    /// promotes itself to serve the pedestrian phase.
    HandoverToVptl,
    /// Phase expired with the vehicle conflict persisting: hand leadership
    /// to a vehicle in the served direction.
    Handover { to: u32 },
}

/// One tick of the vehicle-phase leader.
pub fn leader_step(
    state: &mut LeaderState,
    vehicles: &[VehicleView],
    pedestrians: &[PedestrianView],
    timing: &ProtocolTiming,
) -> Result<LeaderAction, ProtocolError> {
    if state.role != VehicleRole::VtlLeader {
        return Err(ProtocolError::NotLeader);
    }
    let report = sense_conflict(vehicles, pedestrians, timing.comm_range);
    if !report.any() {
        return Ok(LeaderAction::Release {
            final_phase: PhaseState::green_for(state.direction.axis()),
        });
    }
    state.elapsed_ticks += 1;
    if state.elapsed_ticks >= state.duration_ticks {
        if report.vehicle_pedestrian {
            return Ok(LeaderAction::HandoverToVptl);
        }
        let green_axis = state.direction.axis().orthogonal();
        let served: Vec<VehicleView> = vehicles
            .iter()
            .filter(|v| v.direction.axis() == green_axis)
            .copied()
            .collect();
        if let Some(to) = elect_among_approaching(&served, timing.comm_range) {
            return Ok(LeaderAction::Handover { to });
        }
        // The conflicting axis emptied between sensing and handover: fall
        // back to releasing.
        return Ok(LeaderAction::Release {
            final_phase: PhaseState::green_for(state.direction.axis()),
        });
    }
    Ok(LeaderAction::Broadcast {
        phase: state.phase,
        remaining: state.remaining(timing),
    })
}

/// One ranging observation of a tracked pedestrian, produced by the host
/// vehicle's anchor pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianSensing {
    pub pedestrian_id: u32,
    /// Coverage status of the pedestrian in the leader's vehicle frame.
    pub coverage: CoverageStatus,
    /// Localized estimate for this tick, when ranging succeeded.
    pub estimate: Option<TagPosition>,
}

/// What the pedestrian-phase leader decided to do this tick.
#[derive(Debug, Clone, PartialEq)]
pub enum VptlAction {
    /// Keep the pedestrian phase up.
    Broadcast { phase: PhaseState, remaining: f64 },
    /// Hand over to the next vehicle-phase leader, or release when no
    /// vehicle is around to take over.
    HandoverNext { to: Option<u32> },
}

/// Outcome of one pedestrian-phase tick: crossings newly detected from the
/// ranging stream, plus the action taken.
#[derive(Debug, Clone, PartialEq)]
pub struct VptlStepResult {
    pub detections: Vec<(u32, CrossingEvent)>,
    pub action: VptlAction,
}

/// One tick of the pedestrian-phase leader.
///
/// `sensing` carries this tick's ranging observation for each pedestrian in
/// [`LeaderState::pending_pedestrians`]. The phase ends early once every
/// tracked pedestrian has a detected crossing; if any tracked pedestrian
/// was ever out of ranging coverage, the phase instead runs for the full
/// fixed fallback period.
pub fn vptl_leader_step(
    state: &mut LeaderState,
    sensing: &[PedestrianSensing],
    vehicles: &[VehicleView],
    timing: &ProtocolTiming,
) -> Result<VptlStepResult, ProtocolError> {
    if state.role != VehicleRole::VptlLeader {
        return Err(ProtocolError::NotLeader);
    }
    let mut detections = Vec::new();
    for tracker in &mut state.trackers {
        if tracker.crossed.is_some() {
            continue;
        }
        let Some(obs) = sensing
            .iter()
            .find(|s| s.pedestrian_id == tracker.pedestrian_id)
        else {
            continue;
        };
        if obs.coverage != CoverageStatus::BothAnchors {
            state.untrackable_seen = true;
            continue;
        }
        if let Some(estimate) = obs.estimate {
            if let Some(event) = tracker.monitor.push(estimate) {
                tracker.crossed = Some(event);
                detections.push((tracker.pedestrian_id, event));
            }
        }
    }

    state.elapsed_ticks += 1;
    let all_crossed = state.trackers.iter().all(|t| t.crossed.is_some());
    let serve_complete = !state.untrackable_seen && all_crossed;
    let timer_expired = state.elapsed_ticks >= state.duration_ticks;
    if serve_complete || timer_expired {
        let to = elect_among_approaching(vehicles, timing.comm_range);
        return Ok(VptlStepResult {
            detections,
            action: VptlAction::HandoverNext { to },
        });
    }
    Ok(VptlStepResult {
        detections,
        action: VptlAction::Broadcast {
            phase: state.phase,
            remaining: state.remaining(timing),
        },
    })
}
