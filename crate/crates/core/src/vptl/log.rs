//! Deterministic event log and phase timeline produced by a simulation run.
//!
//! The text rendering is the external contract: one record per line,
//! `t=<seconds> <event-kind> <fields...>`, and a CSV phase timeline with
//! header `t,ns,ew,pedestrian`. Identical scenarios render byte-identical
//! output.

use std::fmt::Write as _;

use super::{
    ApproachDirection, LightPhase, Message, PedestrianIntent, PedestrianPhase, PhaseState,
};
use crate::tracking::SideLabel;

/// Everything the simulator records.
#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    SimStart { name: String, seed: u64 },
    SimEnd,
    SpawnVehicle {
        id: u32,
        direction: ApproachDirection,
        distance: f64,
        speed: f64,
    },
    SpawnPedestrian { id: u32, tag_id: u32, x: f64, y: f64 },
    /// A protocol message put on the air. `sender` is the emitting agent.
    Message { sender: u32, message: Message },
    /// The pedestrian-phase leader detected a crossing in the ranging
    /// stream.
    CrossingDetected {
        leader: u32,
        pedestrian: u32,
        from: SideLabel,
        to: SideLabel,
    },
    PedestrianIntentChanged { id: u32, intent: PedestrianIntent },
    VehicleCleared { id: u32 },
}

/// An event stamped with the tick it occurred on.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub tick: u64,
    pub event: SimEvent,
}

/// Signal state visible at one tick; `None` lights mean no leader was
/// serving (free flow).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineRow {
    pub tick: u64,
    pub ns: Option<LightPhase>,
    pub ew: Option<LightPhase>,
    pub pedestrian: PedestrianPhase,
}

impl TimelineRow {
    pub fn leaderless(tick: u64) -> Self {
        Self {
            tick,
            ns: None,
            ew: None,
            pedestrian: PedestrianPhase::Inactive,
        }
    }

    pub fn from_phase(tick: u64, phase: PhaseState) -> Self {
        Self {
            tick,
            ns: Some(phase.ns),
            ew: Some(phase.ew),
            pedestrian: phase.pedestrian,
        }
    }
}

/// Full output of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub events: Vec<TimedEvent>,
    pub timeline: Vec<TimelineRow>,
    /// Tick length used to convert tick indices to seconds.
    pub tick: f64,
}

impl SimulationOutput {
    fn seconds(&self, tick: u64) -> f64 {
        tick as f64 * self.tick
    }

    /// Render the line-oriented event log.
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        for te in &self.events {
            let t = self.seconds(te.tick);
            write!(out, "t={t:.3} ").expect("writing to a String cannot fail");
            match &te.event {
                SimEvent::SimStart { name, seed } => {
                    writeln!(out, "sim-start name={name} seed={seed}")
                }
                SimEvent::SimEnd => writeln!(out, "sim-end"),
                SimEvent::SpawnVehicle {
                    id,
                    direction,
                    distance,
                    speed,
                } => writeln!(
                    out,
                    "spawn-vehicle id={id} direction={direction} distance={distance:.3} speed={speed:.3}"
                ),
                SimEvent::SpawnPedestrian { id, tag_id, x, y } => {
                    writeln!(out, "spawn-pedestrian id={id} tag={tag_id} x={x:.3} y={y:.3}")
                }
                SimEvent::Message { sender, message } => match message {
                    Message::Detect {
                        sender: v,
                        direction,
                        position,
                    } => writeln!(
                        out,
                        "detect sender={v} direction={direction} x={:.3} y={:.3}",
                        position.x, position.y
                    ),
                    Message::Elect { leader_id } => writeln!(out, "elect leader={leader_id}"),
                    Message::PhaseBroadcast { phase, remaining } => writeln!(
                        out,
                        "phase-broadcast leader={sender} ns={} ew={} pedestrian={} remaining={remaining:.3}",
                        phase.ns, phase.ew, phase.pedestrian
                    ),
                    Message::Handover {
                        from_id,
                        to_id,
                        to_role,
                    } => writeln!(out, "handover from={from_id} to={to_id} role={to_role}"),
                    Message::Release { leader_id } => writeln!(out, "release leader={leader_id}"),
                },
                SimEvent::CrossingDetected {
                    leader,
                    pedestrian,
                    from,
                    to,
                } => writeln!(
                    out,
                    "crossing-detected leader={leader} pedestrian={pedestrian} from={from} to={to}"
                ),
                SimEvent::PedestrianIntentChanged { id, intent } => {
                    writeln!(out, "pedestrian-intent id={id} intent={intent}")
                }
                SimEvent::VehicleCleared { id } => writeln!(out, "vehicle-cleared id={id}"),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Render the CSV phase timeline (`t,ns,ew,pedestrian`).
    pub fn render_timeline_csv(&self) -> String {
        let mut out = String::from("t,ns,ew,pedestrian\n");
        for row in &self.timeline {
            let light = |l: Option<LightPhase>| match l {
                Some(LightPhase::Red) => "red",
                Some(LightPhase::Green) => "green",
                None => "none",
            };
            writeln!(
                out,
                "{:.3},{},{},{}",
                self.seconds(row.tick),
                light(row.ns),
                light(row.ew),
                row.pedestrian
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::vptl::Axis;

    #[test]
    fn log_lines_render_stably() {
        let output = SimulationOutput {
            events: vec![
                TimedEvent {
                    tick: 0,
                    event: SimEvent::SimStart {
                        name: "demo".into(),
                        seed: 42,
                    },
                },
                TimedEvent {
                    tick: 3,
                    event: SimEvent::Message {
                        sender: 1,
                        message: Message::Detect {
                            sender: 1,
                            direction: ApproachDirection::North,
                            position: Point::new(0.0, 106.0),
                        },
                    },
                },
                TimedEvent {
                    tick: 5,
                    event: SimEvent::Message {
                        sender: 1,
                        message: Message::PhaseBroadcast {
                            phase: PhaseState::red_for(Axis::NorthSouth),
                            remaining: 29.9,
                        },
                    },
                },
                TimedEvent {
                    tick: 600,
                    event: SimEvent::SimEnd,
                },
            ],
            timeline: vec![],
            tick: 0.1,
        };
        let log = output.render_log();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], "t=0.000 sim-start name=demo seed=42");
        assert_eq!(lines[1], "t=0.300 detect sender=1 direction=north x=0.000 y=106.000");
        assert_eq!(
            lines[2],
            "t=0.500 phase-broadcast leader=1 ns=red ew=green pedestrian=inactive remaining=29.900"
        );
        assert_eq!(lines[3], "t=60.000 sim-end");
    }

    #[test]
    fn timeline_renders_none_for_leaderless_ticks() {
        let output = SimulationOutput {
            events: vec![],
            timeline: vec![
                TimelineRow::leaderless(0),
                TimelineRow::from_phase(1, PhaseState::pedestrian_phase()),
            ],
            tick: 0.1,
        };
        let csv = output.render_timeline_csv();
        assert_eq!(
            csv,
            "t,ns,ew,pedestrian\n0.000,none,none,inactive\n0.100,red,red,active\n"
        );
    }
}
