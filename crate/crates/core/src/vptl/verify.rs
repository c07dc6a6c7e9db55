//! Protocol invariant checking over a finished simulation run.
//!
//! Replays the event log and timeline and collects every violation of the
//! phase-safety and leadership rules, plus bookkeeping that scenario tests
//! assert liveness against. Used by the test suites; handy when writing new
//! scenarios.

use super::log::{SimEvent, SimulationOutput};
use super::{LightPhase, Message, PedestrianIntent, PedestrianPhase, VehicleRole};

/// Everything the checker extracted from one run.
#[derive(Debug, Clone, Default)]
pub struct InvariantReport {
    /// Human-readable rule violations; empty means the run is clean.
    pub violations: Vec<String>,
    pub elect_count: usize,
    pub handover_count: usize,
    pub release_count: usize,
    pub broadcast_count: usize,
    /// Maximal runs of the pedestrian phase: `(first_tick, length)`.
    pub pedestrian_active_streaks: Vec<(u64, u64)>,
    pub vehicles_spawned: Vec<u32>,
    pub vehicles_cleared: Vec<u32>,
    pub pedestrians_spawned: Vec<u32>,
    /// Pedestrians that observed the pedestrian phase (their intent left
    /// `WaitingToCross`).
    pub pedestrians_served: Vec<u32>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check a run against the protocol invariants.
///
/// - Phase safety: the orthogonal axes are never green together, and an
///   active pedestrian phase keeps both vehicle axes red.
/// - Leadership: at most one leader at a time; elections only happen
///   leaderless; handovers name the current leader; broadcasts only come
///   from the current leader; a release leaves the intersection leaderless
///   until the next election.
/// - Timeline consistency: the timeline shows a signal exactly while a
///   leader is serving.
pub fn verify_invariants(output: &SimulationOutput) -> InvariantReport {
    let mut report = InvariantReport::default();
    let mut leader: Option<(u32, VehicleRole)> = None;
    let mut intent_rank: std::collections::BTreeMap<u32, u8> = std::collections::BTreeMap::new();
    let mut events = output.events.iter().peekable();

    let mut check_events_up_to = |tick: u64,
                                  leader: &mut Option<(u32, VehicleRole)>,
                                  report: &mut InvariantReport| {
        while let Some(te) = events.peek() {
            if te.tick > tick {
                break;
            }
            let te = events.next().expect("peeked");
            match &te.event {
                SimEvent::SpawnVehicle { id, .. } => report.vehicles_spawned.push(*id),
                SimEvent::SpawnPedestrian { id, .. } => report.pedestrians_spawned.push(*id),
                SimEvent::VehicleCleared { id } => report.vehicles_cleared.push(*id),
                SimEvent::PedestrianIntentChanged { id, intent } => {
                    if *intent != PedestrianIntent::WaitingToCross
                        && !report.pedestrians_served.contains(id)
                    {
                        report.pedestrians_served.push(*id);
                    }
                    // Intent only moves forward: waiting -> crossing -> done.
                    let rank = match intent {
                        PedestrianIntent::WaitingToCross => 0,
                        PedestrianIntent::Crossing => 1,
                        PedestrianIntent::Done => 2,
                    };
                    let previous = intent_rank.insert(*id, rank);
                    if previous.map_or(false, |p| rank <= p) {
                        report.violations.push(format!(
                            "tick {}: pedestrian {} intent moved backwards",
                            te.tick, id
                        ));
                    }
                }
                SimEvent::Message { sender, message } => {
                    let current = *leader;
                    match message {
                        Message::Elect { leader_id } => {
                            report.elect_count += 1;
                            if let Some((current_id, _)) = current {
                                report.violations.push(format!(
                                    "tick {}: elect of {} while {} still leads",
                                    te.tick, leader_id, current_id
                                ));
                            }
                            *leader = Some((*leader_id, VehicleRole::VtlLeader));
                        }
                        Message::Handover {
                            from_id,
                            to_id,
                            to_role,
                        } => {
                            report.handover_count += 1;
                            if current.map(|(id, _)| id) != Some(*from_id) {
                                report.violations.push(format!(
                                    "tick {}: handover from {} but leader is {:?}",
                                    te.tick, from_id, current
                                ));
                            }
                            if *to_role == VehicleRole::Normal {
                                report
                                    .violations
                                    .push(format!("tick {}: handover to normal role", te.tick));
                            }
                            *leader = Some((*to_id, *to_role));
                        }
                        Message::Release { leader_id } => {
                            report.release_count += 1;
                            if current.map(|(id, _)| id) != Some(*leader_id) {
                                report.violations.push(format!(
                                    "tick {}: release by {} but leader is {:?}",
                                    te.tick, leader_id, current
                                ));
                            }
                            *leader = None;
                        }
                        Message::PhaseBroadcast { phase, .. } => {
                            report.broadcast_count += 1;
                            if current.map(|(id, _)| id) != Some(*sender) {
                                report.violations.push(format!(
                                    "tick {}: broadcast from {} but leader is {:?}",
                                    te.tick, sender, current
                                ));
                            }
                            if !phase.is_safe() {
                                report.violations.push(format!(
                                    "tick {}: unsafe phase broadcast {:?}",
                                    te.tick, phase
                                ));
                            }
                        }
                        Message::Detect { .. } => {}
                    }
                }
                SimEvent::SimStart { .. } | SimEvent::SimEnd | SimEvent::CrossingDetected { .. } => {}
            }
        }
    };

    let mut active_streak: Option<(u64, u64)> = None;
    for row in &output.timeline {
        check_events_up_to(row.tick, &mut leader, &mut report);

        // Phase safety on the recorded timeline.
        if row.ns == Some(LightPhase::Green) && row.ew == Some(LightPhase::Green) {
            report
                .violations
                .push(format!("tick {}: both axes green", row.tick));
        }
        if row.pedestrian == PedestrianPhase::Active
            && (row.ns != Some(LightPhase::Red) || row.ew != Some(LightPhase::Red))
        {
            report.violations.push(format!(
                "tick {}: pedestrian phase active without all-red",
                row.tick
            ));
        }

        // The timeline shows a signal exactly while someone leads.
        if row.ns.is_some() != leader.is_some() {
            report.violations.push(format!(
                "tick {}: timeline signal presence disagrees with leadership",
                row.tick
            ));
        }

        match (&mut active_streak, row.pedestrian) {
            (None, PedestrianPhase::Active) => active_streak = Some((row.tick, 1)),
            (Some((_, len)), PedestrianPhase::Active) => *len += 1,
            (streak @ Some(_), PedestrianPhase::Inactive) => {
                report.pedestrian_active_streaks.push(streak.take().expect("checked"));
            }
            (None, PedestrianPhase::Inactive) => {}
        }
    }
    if let Some(streak) = active_streak {
        report.pedestrian_active_streaks.push(streak);
    }
    let last_tick = output.timeline.last().map(|r| r.tick).unwrap_or(0);
    check_events_up_to(last_tick + 1, &mut leader, &mut report);

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vptl::log::{TimedEvent, TimelineRow};
    use crate::vptl::{Axis, PhaseState};

    #[test]
    fn clean_empty_run() {
        let output = SimulationOutput {
            events: vec![
                TimedEvent {
                    tick: 0,
                    event: SimEvent::SimStart {
                        name: "empty".into(),
                        seed: 0,
                    },
                },
                TimedEvent {
                    tick: 2,
                    event: SimEvent::SimEnd,
                },
            ],
            timeline: vec![TimelineRow::leaderless(0), TimelineRow::leaderless(1)],
            tick: 0.1,
        };
        let report = verify_invariants(&output);
        assert!(report.is_clean(), "{:?}", report.violations);
    }

    #[test]
    fn detects_double_election() {
        let elect = |tick, id| TimedEvent {
            tick,
            event: SimEvent::Message {
                sender: id,
                message: Message::Elect { leader_id: id },
            },
        };
        let output = SimulationOutput {
            events: vec![elect(0, 1), elect(1, 2)],
            timeline: vec![
                TimelineRow::from_phase(0, PhaseState::red_for(Axis::NorthSouth)),
                TimelineRow::from_phase(1, PhaseState::red_for(Axis::EastWest)),
            ],
            tick: 0.1,
        };
        let report = verify_invariants(&output);
        assert!(!report.is_clean());
        assert_eq!(report.elect_count, 2);
    }

    #[test]
    fn detects_unsafe_timeline_row() {
        let output = SimulationOutput {
            events: vec![TimedEvent {
                tick: 0,
                event: SimEvent::Message {
                    sender: 1,
                    message: Message::Elect { leader_id: 1 },
                },
            }],
            timeline: vec![TimelineRow {
                tick: 0,
                ns: Some(LightPhase::Green),
                ew: Some(LightPhase::Green),
                pedestrian: PedestrianPhase::Inactive,
            }],
            tick: 0.1,
        };
        assert!(!verify_invariants(&output).is_clean());
    }
}
