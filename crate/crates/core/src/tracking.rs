//! Batch localization, smoothing, left/right side classification, and
//! street-crossing detection.
//!
//! Side classification is a one-sample location test on the lateral
//! coordinate with a normal approximation: the tag is declared `Left` when
//! the windowed mean lateral offset is significantly negative at the
//! requested confidence, `Right` when significantly positive, `Undecided`
//! otherwise. Crossing detection slides that classifier along an ordered
//! stream of position estimates and reports every decided-label flip.

use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;
use thiserror::Error;

use crate::geometry::{triangulate, AnchorLayout, TagPosition};
use crate::ranging::MeasurementBatch;
use crate::stats::{mean, sample_std};

/// Errors from the tracking operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackingError {
    /// Every sample of the batch failed triangulation.
    #[error("no sample in the batch could be localized")]
    EmptyResult,
    /// The classifier needs at least two points.
    #[error("too few points to classify (need at least 2)")]
    TooFewPoints,
}

/// Which side of the vehicle the tracked tag is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideLabel {
    Left,
    Right,
    Undecided,
}

impl fmt::Display for SideLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideLabel::Left => write!(f, "Left"),
            SideLabel::Right => write!(f, "Right"),
            SideLabel::Undecided => write!(f, "Undecided"),
        }
    }
}

/// A detected side transition in a tracked stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingEvent {
    /// Index of the sample at which the new side was first decided.
    pub time_index: usize,
    pub from: SideLabel,
    pub to: SideLabel,
}

/// Crossing events rendered as CSV: header `index,from,to`.
pub fn crossing_events_to_csv(events: &[CrossingEvent]) -> String {
    let mut out = String::from("index,from,to\n");
    for e in events {
        writeln!(out, "{},{},{}", e.time_index, e.from, e.to)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Triangulated positions of a measurement batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedBatch {
    /// Successfully localized points, in sample order.
    pub points: Vec<TagPosition>,
    /// Samples dropped as infeasible.
    pub dropped: usize,
    /// The batch the points came from.
    pub source: MeasurementBatch,
}

impl LocalizedBatch {
    /// Render as CSV: header `x_m,y_m`, nine decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m\n");
        for p in &self.points {
            writeln!(out, "{:.9},{:.9}", p.x, p.y).expect("writing to a String cannot fail");
        }
        out
    }
}

/// Triangulate every sample of a batch with the front-solution rule,
/// dropping samples that are infeasible beyond the clamp tolerance.
pub fn localize_batch(
    layout: &AnchorLayout,
    batch: MeasurementBatch,
) -> Result<LocalizedBatch, TrackingError> {
    let points: Vec<TagPosition> = batch
        .samples
        .iter()
        .filter_map(|s| triangulate(layout, s).ok())
        .collect();
    if points.is_empty() && !batch.samples.is_empty() {
        return Err(TrackingError::EmptyResult);
    }
    let dropped = batch.samples.len() - points.len();
    Ok(LocalizedBatch {
        points,
        dropped,
        source: batch,
    })
}

/// Classify which side of the vehicle a point cloud sits on.
///
/// Tests the mean lateral coordinate against zero with a normal
/// approximation; a side is returned only when the evidence reaches
/// `min_confidence` (one-sided).
pub fn classify_side(
    points: &[TagPosition],
    min_confidence: f64,
) -> Result<SideLabel, TrackingError> {
    if points.len() < 2 {
        return Err(TrackingError::TooFewPoints);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let m = mean(&xs);
    let se = sample_std(&xs) / (xs.len() as f64).sqrt();
    if se == 0.0 {
        // Identical points carry no sampling uncertainty: the sign decides.
        return Ok(if m < 0.0 {
            SideLabel::Left
        } else if m > 0.0 {
            SideLabel::Right
        } else {
            SideLabel::Undecided
        });
    }
    let z_crit = Normal::standard().inverse_cdf(min_confidence);
    let z = m / se;
    Ok(if z <= -z_crit {
        SideLabel::Left
    } else if z >= z_crit {
        SideLabel::Right
    } else {
        SideLabel::Undecided
    })
}

/// Centered moving average over both coordinates independently. The window
/// shrinks at the edges so the output has the same length as the input.
pub fn smooth(points: &[TagPosition], window: usize) -> Vec<TagPosition> {
    let w = window.max(1);
    let half_before = (w - 1) / 2;
    let half_after = w / 2;
    let n = points.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_before);
            let hi = (i + half_after).min(n - 1);
            let count = (hi - lo + 1) as f64;
            let sx: f64 = points[lo..=hi].iter().map(|p| p.x).sum();
            let sy: f64 = points[lo..=hi].iter().map(|p| p.y).sum();
            TagPosition::new(sx / count, sy / count)
        })
        .collect()
}

/// Streaming crossing detector: feeds position estimates one at a time and
/// reports a [`CrossingEvent`] whenever the windowed side label flips
/// between `Left` and `Right`. `Undecided` windows never emit and never
/// update the remembered side.
#[derive(Debug, Clone)]
pub struct CrossingMonitor {
    window: usize,
    min_confidence: f64,
    buffer: VecDeque<TagPosition>,
    next_index: usize,
    last_decided: Option<SideLabel>,
}

impl CrossingMonitor {
    pub fn new(window: usize, min_confidence: f64) -> Self {
        Self {
            window: window.max(2),
            min_confidence,
            buffer: VecDeque::new(),
            next_index: 0,
            last_decided: None,
        }
    }

    /// Side most recently decided by a full window, if any.
    pub fn current_side(&self) -> Option<SideLabel> {
        self.last_decided
    }

    /// Push the next position estimate; returns an event if the decided
    /// side flipped.
    pub fn push(&mut self, point: TagPosition) -> Option<CrossingEvent> {
        let index = self.next_index;
        self.next_index += 1;
        self.buffer.push_back(point);
        if self.buffer.len() > self.window {
            self.buffer.pop_front();
        }
        if self.buffer.len() < self.window {
            return None;
        }
        let window_points: Vec<TagPosition> = self.buffer.iter().copied().collect();
        let label = classify_side(&window_points, self.min_confidence)
            .expect("window holds at least two points");
        if label == SideLabel::Undecided {
            return None;
        }
        let event = match self.last_decided {
            Some(prev) if prev != label => Some(CrossingEvent {
                time_index: index,
                from: prev,
                to: label,
            }),
            _ => None,
        };
        self.last_decided = Some(label);
        event
    }
}

/// Detect every side transition in an ordered stream of position estimates
/// using a sliding window of `window` samples classified at
/// `min_confidence`.
pub fn detect_crossing(
    points: &[TagPosition],
    window: usize,
    min_confidence: f64,
) -> Vec<CrossingEvent> {
    let mut monitor = CrossingMonitor::new(window, min_confidence);
    points
        .iter()
        .filter_map(|&p| monitor.push(p))
        .collect()
}

/// Result of the side-separation experiment at one distance.
#[derive(Debug, Clone)]
pub struct SideTestRow {
    /// Forward distance of the two tag positions (meters).
    pub distance: f64,
    /// Localized cloud for the tag at `(-lateral, distance)`.
    pub left: LocalizedBatch,
    /// Localized cloud for the tag at `(+lateral, distance)`.
    pub right: LocalizedBatch,
    pub left_label: SideLabel,
    pub right_label: SideLabel,
    /// Whether the two clouds are disjoint along the lateral axis.
    pub separated: bool,
}

/// Measure both sides of the vehicle at each distance: simulate `n` range
/// measurements of a tag `lateral` meters to the left and to the right,
/// localize them, classify each cloud, and check that the clouds stay
/// disjoint along the lateral axis.
pub fn run_side_test(
    layout: &AnchorLayout,
    lateral: f64,
    distances: &[f64],
    n: usize,
    noise: &crate::ranging::NoiseModel,
    seed: u64,
    min_confidence: f64,
) -> Result<Vec<SideTestRow>, TrackingError> {
    use crate::geometry::Point;
    use crate::ranging::{simulate_batch, RangingMode};

    distances
        .iter()
        .enumerate()
        .map(|(i, &distance)| {
            let left_batch = simulate_batch(
                layout,
                Point::new(-lateral, distance),
                noise,
                n,
                seed.wrapping_add(2 * i as u64),
                RangingMode::default(),
            );
            let right_batch = simulate_batch(
                layout,
                Point::new(lateral, distance),
                noise,
                n,
                seed.wrapping_add(2 * i as u64 + 1),
                RangingMode::default(),
            );
            let left = localize_batch(layout, left_batch)?;
            let right = localize_batch(layout, right_batch)?;
            let left_label = classify_side(&left.points, min_confidence)?;
            let right_label = classify_side(&right.points, min_confidence)?;
            let left_max = left.points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let right_min = right.points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            Ok(SideTestRow {
                distance,
                left,
                right,
                left_label,
                right_label,
                separated: left_max < right_min,
            })
        })
        .collect()
}
