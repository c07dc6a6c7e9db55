//! Seeded Monte-Carlo generation of noisy range measurements and the
//! localization error profile over distance.
//!
//! Ranging noise is modeled with two independent Gaussian components per
//! sample, each of standard deviation `sigma_e`: a common-mode component
//! that shifts both ranges together (pushing the estimate radially) and a
//! differential component that splits them apart (pushing the estimate
//! laterally). Under this decomposition the Monte-Carlo statistics line up
//! with the closed-form worst-case sensitivities: the standard deviation of
//! the lateral estimate grows as `(r/x) * sigma_e` while the longitudinal
//! standard deviation stays near `sigma_e` itself. Each individual range
//! then carries a total standard deviation of `sqrt(2) * sigma_e`.
//!
//! Batches are generated from a ChaCha stream keyed by the caller's seed:
//! the same `(seed, n)` always reproduces the same samples bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use thiserror::Error;

use crate::geometry::{triangulate, AnchorLayout, Point, RangePair};
use crate::stats::sample_std;

/// Errors from the ranging simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RangingError {
    /// A requested profile distance does not clear the half-baseline.
    #[error("profile distance {distance} must exceed the half-baseline {half_baseline}")]
    InvalidDistance { distance: f64, half_baseline: f64 },
}

/// Additive per-range error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of each noise component (meters). See the module
    /// docs for how the two components map onto the measured ranges.
    pub sigma_e: f64,
    /// Constant offset added to every range (meters).
    pub bias: f64,
}

impl Default for NoiseModel {
    /// `sigma_e` defaults to 18.5 mm, the value at which the lateral error
    /// extrapolates to one meter at 50 m range for the default 1.85 m
    /// baseline.
    fn default() -> Self {
        Self {
            sigma_e: 0.0185,
            bias: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn new(sigma_e: f64, bias: f64) -> Self {
        Self { sigma_e, bias }
    }
}

/// Two-way ranging scheme. The schemes differ in their message exchange but
/// produce statistically identical distance estimates, so the mode is
/// carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangingMode {
    /// Single-sided two-way ranging.
    SS,
    /// Double-sided two-way ranging (the mode used throughout).
    #[default]
    DS,
    /// Auto-acknowledgement two-way ranging.
    AA,
}

/// A batch of simulated range measurements of one tag position.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    /// Ground-truth tag position in the vehicle frame.
    pub true_position: Point,
    /// Measured `(r1, r2)` pairs, in generation order.
    pub samples: Vec<RangePair>,
    /// Seed the batch was generated from.
    pub seed: u64,
    /// Ranging scheme metadata.
    pub mode: RangingMode,
}

/// Localization error profile: the standard deviation of the triangulated
/// coordinates at each tested distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    pub rows: Vec<ErrorProfileRow>,
}

/// One row of the error profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProfileRow {
    /// Range from either anchor to the tag (meters); the tag sits straight
    /// ahead so both true ranges equal this value.
    pub distance: f64,
    /// Sample standard deviation of the lateral estimates (meters).
    pub std_x: f64,
    /// Sample standard deviation of the longitudinal estimates (meters).
    pub std_y: f64,
    /// Number of samples that triangulated successfully.
    pub n: usize,
    /// Number of samples dropped as infeasible beyond the clamp tolerance.
    pub dropped: usize,
}

impl ErrorProfile {
    /// The distance grid used by the standard experiment.
    pub const DEFAULT_DISTANCES: [f64; 7] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0];

    /// Render as CSV: header `distance_m,std_x_m,std_y_m,n`, nine decimal
    /// places on every value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance_m,std_x_m,std_y_m,n\n");
        for row in &self.rows {
            writeln!(
                out,
                "{:.9},{:.9},{:.9},{}",
                row.distance, row.std_x, row.std_y, row.n
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Rows whose drop count exceeds the given fraction of attempted
    /// samples; reported by callers, never fatal.
    pub fn rows_with_excess_drops(&self, max_fraction: f64) -> Vec<&ErrorProfileRow> {
        self.rows
            .iter()
            .filter(|row| {
                let attempted = row.n + row.dropped;
                attempted > 0 && (row.dropped as f64) > max_fraction * attempted as f64
            })
            .collect()
    }
}

/// Generate `n` noisy range measurements of a tag at `true_position`.
///
/// Each sample is `(d1 + bias + a + b, d2 + bias + a - b)` with `d1`, `d2`
/// the exact anchor distances and `a`, `b` independent zero-mean Gaussian
/// draws of standard deviation `sigma_e`. Deterministic in `(seed, n)`.
pub fn simulate_batch(
    layout: &AnchorLayout,
    true_position: Point,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
    mode: RangingMode,
) -> MeasurementBatch {
    let truth = layout.true_ranges(true_position);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let common: f64 = rng.sample::<f64, _>(StandardNormal) * noise.sigma_e;
            let split: f64 = rng.sample::<f64, _>(StandardNormal) * noise.sigma_e;
            RangePair::new(
                truth.r1 + noise.bias + common + split,
                truth.r2 + noise.bias + common - split,
            )
        })
        .collect();
    MeasurementBatch {
        true_position,
        samples,
        seed,
        mode,
    }
}

/// Run the error-profile experiment: at each distance the tag sits straight
/// ahead (both true ranges equal the distance), `n` measurements are
/// simulated and triangulated, and the standard deviations of the resulting
/// coordinates are collected.
///
/// Samples that fail triangulation beyond the clamp tolerance are dropped
/// and counted in [`ErrorProfileRow::dropped`].
pub fn error_profile(
    layout: &AnchorLayout,
    distances: &[f64],
    n: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ErrorProfile, RangingError> {
    let x = layout.half_baseline;
    for &d in distances {
        if d <= x {
            return Err(RangingError::InvalidDistance {
                distance: d,
                half_baseline: x,
            });
        }
    }
    let rows = distances
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            // Straight ahead at height sqrt(d^2 - x^2): both anchor
            // distances equal d exactly.
            let position = Point::new(0.0, (d * d - x * x).sqrt());
            let batch = simulate_batch(
                layout,
                position,
                noise,
                n,
                seed.wrapping_add(i as u64),
                RangingMode::default(),
            );
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for sample in &batch.samples {
                if let Ok(p) = triangulate(layout, sample) {
                    xs.push(p.x);
                    ys.push(p.y);
                }
            }
            ErrorProfileRow {
                distance: d,
                std_x: sample_std(&xs),
                std_y: sample_std(&ys),
                n: xs.len(),
                dropped: n - xs.len(),
            }
        })
        .collect();
    Ok(ErrorProfile { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> AnchorLayout {
        AnchorLayout::default()
    }

    #[test]
    fn noiseless_batch_reproduces_true_ranges() {
        let pos = Point::new(3.0, 20.0);
        let truth = layout().true_ranges(pos);
        let batch = simulate_batch(
            &layout(),
            pos,
            &NoiseModel::new(0.0, 0.0),
            50,
            7,
            RangingMode::DS,
        );
        assert_eq!(batch.samples.len(), 50);
        for s in &batch.samples {
            assert_eq!(s.r1, truth.r1);
            assert_eq!(s.r2, truth.r2);
        }
    }

    #[test]
    fn bias_shifts_every_range() {
        let pos = Point::new(0.0, 10.0);
        let truth = layout().true_ranges(pos);
        let batch = simulate_batch(
            &layout(),
            pos,
            &NoiseModel::new(0.0, 0.5),
            5,
            7,
            RangingMode::DS,
        );
        for s in &batch.samples {
            assert_eq!(s.r1, truth.r1 + 0.5);
            assert_eq!(s.r2, truth.r2 + 0.5);
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let noise = NoiseModel::new(0.02, 0.0);
        let pos = Point::new(0.0, 10.0);
        let a = simulate_batch(&layout(), pos, &noise, 200, 42, RangingMode::DS);
        let b = simulate_batch(&layout(), pos, &noise, 200, 42, RangingMode::DS);
        assert_eq!(a, b);
        let c = simulate_batch(&layout(), pos, &noise, 200, 43, RangingMode::DS);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn ranging_modes_share_statistics() {
        let noise = NoiseModel::new(0.02, 0.0);
        let pos = Point::new(0.0, 10.0);
        let ds = simulate_batch(&layout(), pos, &noise, 100, 42, RangingMode::DS);
        let ss = simulate_batch(&layout(), pos, &noise, 100, 42, RangingMode::SS);
        let aa = simulate_batch(&layout(), pos, &noise, 100, 42, RangingMode::AA);
        assert_eq!(ds.samples, ss.samples);
        assert_eq!(ds.samples, aa.samples);
    }

    #[test]
    fn range_spread_matches_model() {
        // Each range carries two independent sigma-scaled components, so its
        // marginal standard deviation is sqrt(2) * sigma_e. The 99%
        // chi-square band for a 200-sample standard deviation is well inside
        // [0.8, 1.2] of that.
        let sigma = 0.02;
        let batch = simulate_batch(
            &layout(),
            Point::new(0.0, 10.0),
            &NoiseModel::new(sigma, 0.0),
            200,
            42,
            RangingMode::DS,
        );
        let r1s: Vec<f64> = batch.samples.iter().map(|s| s.r1).collect();
        let s = sample_std(&r1s);
        let marginal = 2f64.sqrt() * sigma;
        assert!(
            s > 0.8 * marginal && s < 1.2 * marginal,
            "r1 std {s} outside [{}, {}]",
            0.8 * marginal,
            1.2 * marginal
        );
    }

    #[test]
    fn profile_covers_standard_grid() {
        let profile = error_profile(
            &layout(),
            &ErrorProfile::DEFAULT_DISTANCES,
            200,
            &NoiseModel::default(),
            42,
        )
        .unwrap();
        assert_eq!(profile.rows.len(), 7);
        for (row, d) in profile.rows.iter().zip(ErrorProfile::DEFAULT_DISTANCES) {
            assert_eq!(row.distance, d);
            assert_eq!(row.n, 200);
            assert_eq!(row.dropped, 0);
        }
    }

    #[test]
    fn profile_noiseless_is_exact() {
        let profile = error_profile(
            &layout(),
            &[5.0, 10.0],
            50,
            &NoiseModel::new(0.0, 0.0),
            1,
        )
        .unwrap();
        for row in &profile.rows {
            // Identical samples: any residual spread is mean-rounding noise.
            assert!(row.std_x.abs() < 1e-12);
            assert!(row.std_y.abs() < 1e-12);
        }
    }

    #[test]
    fn lateral_spread_tracks_worst_case_slope() {
        // At 40 m the lateral spread sits near (40 / 0.925) * sigma_e = 0.8 m.
        let profile = error_profile(
            &layout(),
            &[40.0],
            200,
            &NoiseModel::default(),
            42,
        )
        .unwrap();
        let predicted = 40.0 / 0.925 * 0.0185;
        let row = &profile.rows[0];
        assert!(
            (row.std_x - predicted).abs() <= 0.15 * predicted,
            "std_x {} not within 15% of {predicted}",
            row.std_x
        );
    }

    #[test]
    fn longitudinal_spread_stays_near_sigma() {
        let noise = NoiseModel::default();
        let profile = error_profile(
            &layout(),
            &ErrorProfile::DEFAULT_DISTANCES,
            200,
            &noise,
            42,
        )
        .unwrap();
        for row in &profile.rows {
            assert!(
                row.std_y >= 0.8 * noise.sigma_e && row.std_y <= 1.3 * noise.sigma_e,
                "std_y {} at {} m outside [0.8, 1.3] sigma",
                row.std_y,
                row.distance
            );
        }
    }

    #[test]
    fn profile_rejects_distance_inside_baseline() {
        let err = error_profile(&layout(), &[0.5], 10, &NoiseModel::default(), 1).unwrap_err();
        assert!(matches!(err, RangingError::InvalidDistance { .. }));
    }

    #[test]
    fn csv_layout_is_stable() {
        let profile = ErrorProfile {
            rows: vec![ErrorProfileRow {
                distance: 5.0,
                std_x: 0.1,
                std_y: 0.0185,
                n: 200,
                dropped: 0,
            }],
        };
        let csv = profile.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("distance_m,std_x_m,std_y_m,n"));
        assert_eq!(lines.next(), Some("5.000000000,0.100000000,0.018500000,200"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn excess_drop_reporting() {
        let profile = ErrorProfile {
            rows: vec![
                ErrorProfileRow {
                    distance: 5.0,
                    std_x: 0.0,
                    std_y: 0.0,
                    n: 90,
                    dropped: 10,
                },
                ErrorProfileRow {
                    distance: 10.0,
                    std_x: 0.0,
                    std_y: 0.0,
                    n: 100,
                    dropped: 0,
                },
            ],
        };
        let flagged = profile.rows_with_excess_drops(0.01);
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].distance, 5.0);
    }
}
