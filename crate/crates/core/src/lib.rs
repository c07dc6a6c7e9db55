//! Vehicle-mounted two-anchor UWB localization and the Virtual Pedestrian
//! Traffic Light (VPTL) protocol.
//!
//! A pair of UWB anchors mounted on a vehicle's rear-view mirrors measures
//! the distances to a nearby tag (a pedestrian's phone or wearable). This
//! crate provides:
//!
//! - [`geometry`] — closed-form two-anchor triangulation in the vehicle
//!   frame, worst-case perturbation, error sensitivities, and the coverage
//!   predicate for the on-vehicle anchor layout.
//! - [`ranging`] — seeded Monte-Carlo generation of noisy range
//!   measurements and the localization error profile over distance.
//! - [`tracking`] — batch localization, smoothing, left/right side
//!   classification via a one-sample location test, and street-crossing
//!   detection.
//! - [`vptl`] — the virtual traffic light state machine extended with a
//!   pedestrian phase, run inside a deterministic simulated intersection
//!   where pedestrian sensing goes through the noisy ranging pipeline.
//! - [`stats`] — small statistics helpers shared by the above.
//!
//! All randomness is drawn from seeded ChaCha streams: identical inputs
//! produce bit-identical outputs.

pub mod geometry;
pub mod ranging;
pub mod stats;
pub mod tracking;
pub mod vptl;

pub use geometry::{
    coverage, perturbed_triangulate, resolve_side, sensitivity, sensitivity_frontal, triangulate,
    AnchorLayout, CoverageStatus, GeometryError, PerturbationMode, Point, RangePair, Sensitivity,
    TagPosition,
};
pub use ranging::{
    error_profile, simulate_batch, ErrorProfile, ErrorProfileRow, MeasurementBatch, NoiseModel,
    RangingError, RangingMode,
};
pub use tracking::{
    classify_side, detect_crossing, localize_batch, run_side_test, smooth, CrossingEvent,
    CrossingMonitor, LocalizedBatch, SideLabel, SideTestRow, TrackingError,
};
