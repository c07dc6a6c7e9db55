//! Two-anchor triangulation and error analysis in the vehicle frame.
//!
//! The two anchors sit at `(-x, 0)` and `(x, 0)` where `x` is the
//! half-baseline; the vehicle points along `+y`. Given the measured
//! distances `r1` (to the left anchor) and `r2` (to the right anchor), the
//! tag position follows in closed form:
//!
//! ```text
//! x_k = (r1² - r2²) / (4x)
//! y_k = sqrt( (r1² + r2²)/2 - (r1² - r2²)²/(16x²) - x² )
//! ```
//!
//! The front solution (`y_k >= 0`) is returned; the mirrored rear solution
//! is only selected through [`resolve_side`] with an auxiliary anchor.
//!
//! Ranging error propagates very differently onto the two coordinates: the
//! lateral error grows like `r/x` while the longitudinal error stays near
//! the raw ranging error. [`sensitivity`] evaluates the worst-case
//! derivatives at any configuration and [`sensitivity_frontal`] gives the
//! simplified straight-ahead form (`r1 = r2 = r`):
//!
//! ```text
//! dx/de = r/x        dy/de = 1 / sqrt(1 - x²/r²)
//! ```

use thiserror::Error;

/// Relative tolerance on the squared-height term below which a slightly
/// infeasible range pair is clamped onto the baseline instead of rejected.
/// Measurement noise routinely pushes near-collinear geometries a hair past
/// the feasibility boundary.
const CLAMP_TOL: f64 = 1e-6;

/// Errors from the triangulation and sensitivity operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// The two range circles do not intersect beyond the clamp tolerance;
    /// the range pair is inconsistent.
    #[error("infeasible ranging pair")]
    Infeasible,
    /// The anchor layout cannot support triangulation (non-positive
    /// baseline).
    #[error("degenerate layout: half-baseline must be positive")]
    DegenerateLayout,
    /// A layout field violates its constraints.
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    /// The sensitivity expression is singular: the tag sits at or behind
    /// the baseline, where the longitudinal derivative blows up.
    #[error("singular sensitivity: tag at or behind the baseline")]
    Singular,
    /// The auxiliary anchor cannot discriminate the two mirror solutions.
    #[error("ambiguous side resolution")]
    Ambiguous,
}

/// A point in a 2-D Cartesian frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance_to(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry of the on-vehicle anchor pair and its coverage region.
///
/// Angles are in degrees measured off the forward (`+y`) axis,
/// symmetrically per side. Defaults follow the mirror-mounted pair of a
/// passenger car: 1.85 m between the anchors at 1.1 m height, a 120° front
/// sector good to 50 m, a single-anchor occlusion band between 60° and 90°
/// off forward, and full coverage anywhere within 5 m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorLayout {
    /// Half the distance between the two anchors (meters).
    pub half_baseline: f64,
    /// Mounting height above ground (meters). Metadata only; all geometry
    /// here is planar.
    pub mount_height: f64,
    /// Maximum range of the front sector (meters).
    pub front_range: f64,
    /// Half-angle of the front sector (degrees off forward).
    pub front_halfangle: f64,
    /// Start of the per-side occlusion band (degrees off forward).
    pub occlusion_start: f64,
    /// End of the per-side occlusion band (degrees off forward).
    pub occlusion_end: f64,
    /// Range within which both anchors see the tag regardless of bearing
    /// (meters).
    pub side_range: f64,
}

impl Default for AnchorLayout {
    fn default() -> Self {
        Self {
            half_baseline: 1.85 / 2.0,
            mount_height: 1.1,
            front_range: 50.0,
            front_halfangle: 60.0,
            occlusion_start: 60.0,
            occlusion_end: 90.0,
            side_range: 5.0,
        }
    }
}

impl AnchorLayout {
    /// Default layout with the full anchor-to-anchor distance overridden.
    pub fn with_baseline(baseline: f64) -> Self {
        Self {
            half_baseline: baseline / 2.0,
            ..Self::default()
        }
    }

    /// Check the structural constraints on the layout.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.half_baseline <= 0.0 {
            return Err(GeometryError::DegenerateLayout);
        }
        if !(self.front_range > self.side_range && self.side_range > 0.0) {
            return Err(GeometryError::InvalidLayout(
                "front_range must exceed side_range and both must be positive".into(),
            ));
        }
        if !(self.front_halfangle > 0.0 && self.front_halfangle <= 90.0) {
            return Err(GeometryError::InvalidLayout(
                "front_halfangle must lie in (0, 90]".into(),
            ));
        }
        if self.occlusion_start < self.front_halfangle || self.occlusion_end < self.occlusion_start
        {
            return Err(GeometryError::InvalidLayout(
                "occlusion band must lie outside the front sector".into(),
            ));
        }
        Ok(())
    }

    /// Position of the left anchor in the vehicle frame.
    pub fn left_anchor(&self) -> Point {
        Point::new(-self.half_baseline, 0.0)
    }

    /// Position of the right anchor in the vehicle frame.
    pub fn right_anchor(&self) -> Point {
        Point::new(self.half_baseline, 0.0)
    }

    /// Exact anchor distances for a tag at `position`.
    pub fn true_ranges(&self, position: Point) -> RangePair {
        RangePair {
            r1: position.distance_to(self.left_anchor()),
            r2: position.distance_to(self.right_anchor()),
        }
    }
}

/// One distance measurement from each anchor to the tag.
///
/// `r1` is the distance to the left anchor at `(-x, 0)`, `r2` to the right
/// anchor at `(x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangePair {
    pub r1: f64,
    pub r2: f64,
}

impl RangePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }
}

/// Tag position estimate in the vehicle frame: `x` lateral, `y` forward of
/// the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagPosition {
    pub x: f64,
    pub y: f64,
}

impl TagPosition {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn as_point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ratio of localization error to ranging error along each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    /// Worst-case lateral error per unit of ranging error.
    pub dx_de: f64,
    /// Worst-case longitudinal error per unit of ranging error.
    pub dy_de: f64,
}

/// How many anchors can range a tag at a given position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageStatus {
    /// Both anchors see the tag: full triangulation available.
    BothAnchors,
    /// The vehicle body blocks one anchor; only a single distance is
    /// available.
    OneAnchor,
    /// Neither anchor sees the tag.
    None,
}

/// Worst-case direction in which a ranging error of magnitude `e` is
/// applied to the measured pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// `(r1 + e, r2 - e)`: maximizes the lateral displacement.
    WorstCaseX,
    /// `(r1 + e, r2 + e)`: maximizes the longitudinal displacement.
    WorstCaseY,
}

/// Closed-form triangulation of a range pair, returning the front solution
/// (`y >= 0`).
///
/// A squared height marginally below zero (within `1e-6 * (r1+r2)²`) is
/// clamped to the baseline; anything further out is rejected as
/// [`GeometryError::Infeasible`].
pub fn triangulate(layout: &AnchorLayout, ranges: &RangePair) -> Result<TagPosition, GeometryError> {
    let x = layout.half_baseline;
    if x <= 0.0 {
        return Err(GeometryError::DegenerateLayout);
    }
    let (r1, r2) = (ranges.r1, ranges.r2);
    if !(r1 >= 0.0 && r2 >= 0.0) {
        return Err(GeometryError::Infeasible);
    }

    let diff_sq = r1 * r1 - r2 * r2;
    let x_k = diff_sq / (4.0 * x);
    // Squared height of the intersection above the baseline. Negative iff
    // the two range circles do not intersect.
    let y_sq = (r1 * r1 + r2 * r2) / 2.0 - diff_sq * diff_sq / (16.0 * x * x) - x * x;
    let y_k = if y_sq >= 0.0 {
        y_sq.sqrt()
    } else if y_sq >= -CLAMP_TOL * (r1 + r2) * (r1 + r2) {
        0.0
    } else {
        return Err(GeometryError::Infeasible);
    };
    Ok(TagPosition::new(x_k, y_k))
}

/// Triangulate after applying a worst-case ranging error `e` to the pair.
///
/// Equals [`triangulate`] of the perturbed pair; with `e = 0` both modes
/// reduce to the unperturbed solution.
pub fn perturbed_triangulate(
    layout: &AnchorLayout,
    ranges: &RangePair,
    e: f64,
    mode: PerturbationMode,
) -> Result<TagPosition, GeometryError> {
    let perturbed = match mode {
        PerturbationMode::WorstCaseX => RangePair::new(ranges.r1 + e, ranges.r2 - e),
        PerturbationMode::WorstCaseY => RangePair::new(ranges.r1 + e, ranges.r2 + e),
    };
    triangulate(layout, &perturbed)
}

/// Worst-case error sensitivities at an arbitrary configuration.
///
/// `dx_de` differentiates the laterally worst perturbation `(r1+e, r2-e)`;
/// `dy_de` differentiates the longitudinally worst perturbation
/// `(r1+e, r2+e)`:
///
/// ```text
/// dx/de = (r1 + r2) / (2x)
///
///         (4e + 2r1 + 2r2)/(2x) - (r1 - r2) ζ / (4x³)
/// dy/de = -------------------------------------------- ,  ζ = (e+r1)² - (e+r2)²
///         2 sqrt( ((e+r1)² + (e+r2)²)/(2x²) - ζ²/(16x⁴) - 1 )
/// ```
pub fn sensitivity(
    layout: &AnchorLayout,
    ranges: &RangePair,
    e: f64,
) -> Result<Sensitivity, GeometryError> {
    let x = layout.half_baseline;
    if x <= 0.0 {
        return Err(GeometryError::DegenerateLayout);
    }
    let (r1, r2) = (ranges.r1, ranges.r2);
    let dx_de = (r1 + r2) / (2.0 * x);

    let u = e + r1;
    let v = e + r2;
    let zeta = u * u - v * v;
    let radicand =
        (u * u + v * v) / (2.0 * x * x) - zeta * zeta / (16.0 * x * x * x * x) - 1.0;
    if radicand <= 0.0 {
        return Err(GeometryError::Singular);
    }
    let numerator = (4.0 * e + 2.0 * r1 + 2.0 * r2) / (2.0 * x)
        - (r1 - r2) * zeta / (4.0 * x * x * x);
    let dy_de = numerator / (2.0 * radicand.sqrt());
    Ok(Sensitivity { dx_de, dy_de })
}

/// Error sensitivities straight ahead of the vehicle (`r1 = r2 = r`).
pub fn sensitivity_frontal(layout: &AnchorLayout, r: f64) -> Result<Sensitivity, GeometryError> {
    let x = layout.half_baseline;
    if x <= 0.0 {
        return Err(GeometryError::DegenerateLayout);
    }
    if r <= x {
        return Err(GeometryError::Singular);
    }
    Ok(Sensitivity {
        dx_de: r / x,
        dy_de: 1.0 / (1.0 - (x / r) * (x / r)).sqrt(),
    })
}

/// Pick the front or rear mirror solution using one extra range from an
/// auxiliary anchor off the baseline.
///
/// Returns whichever of `(x, +y)` and `(x, -y)` better matches
/// `aux_range`; if the two residuals tie within tolerance (always the case
/// when the auxiliary anchor lies on the baseline) the choice is
/// [`GeometryError::Ambiguous`].
pub fn resolve_side(
    candidate: TagPosition,
    aux_range: f64,
    aux_anchor: Point,
) -> Result<TagPosition, GeometryError> {
    let front = TagPosition::new(candidate.x, candidate.y.abs());
    let rear = TagPosition::new(candidate.x, -candidate.y.abs());
    let res_front = (front.as_point().distance_to(aux_anchor) - aux_range).abs();
    let res_rear = (rear.as_point().distance_to(aux_anchor) - aux_range).abs();
    let tol = 1e-9 * (1.0 + aux_range.abs());
    if (res_front - res_rear).abs() <= tol {
        return Err(GeometryError::Ambiguous);
    }
    Ok(if res_front < res_rear { front } else { rear })
}

/// Coverage status of a tag at `position` (vehicle frame).
///
/// Both anchors see the tag within the front sector (bearing within the
/// front half-angle, distance up to `front_range`) and anywhere within
/// `side_range`. Inside the per-side occlusion band the vehicle body blocks
/// one anchor. Everything else is out of coverage.
pub fn coverage(layout: &AnchorLayout, position: Point) -> CoverageStatus {
    let distance = position.x.hypot(position.y);
    if distance <= layout.side_range {
        return CoverageStatus::BothAnchors;
    }
    // Bearing off the forward axis, folded to one side: 0 = dead ahead,
    // 90 = abeam, 180 = directly behind.
    let bearing = position.x.abs().atan2(position.y).to_degrees();
    if bearing <= layout.front_halfangle && distance <= layout.front_range {
        return CoverageStatus::BothAnchors;
    }
    if bearing >= layout.occlusion_start
        && bearing <= layout.occlusion_end
        && distance <= layout.front_range
    {
        return CoverageStatus::OneAnchor;
    }
    CoverageStatus::None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> AnchorLayout {
        AnchorLayout::default()
    }

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    #[test]
    fn symmetric_ranges_land_on_axis() {
        let pos = triangulate(&layout(), &RangePair::new(10.0, 10.0)).unwrap();
        assert_eq!(pos.x, 0.0);
    }

    #[test]
    fn symmetric_ranges_height() {
        // y = sqrt(100 - 0.925^2); cross-checked by re-deriving both anchor
        // distances below.
        let pos = triangulate(&layout(), &RangePair::new(10.0, 10.0)).unwrap();
        assert_close(pos.y, 9.957_126_844_627_42, 1e-12);
        let d1 = pos.as_point().distance_to(layout().left_anchor());
        let d2 = pos.as_point().distance_to(layout().right_anchor());
        assert_close(d1, 10.0, 1e-9 * 20.0);
        assert_close(d2, 10.0, 1e-9 * 20.0);
    }

    #[test]
    fn tag_at_right_anchor() {
        let x = layout().half_baseline;
        let pos = triangulate(&layout(), &RangePair::new(2.0 * x, 0.0)).unwrap();
        assert_close(pos.x, x, 1e-12);
        assert_close(pos.y, 0.0, 1e-12);
    }

    #[test]
    fn infeasible_pair_rejected() {
        // Circles far from touching: sum of ranges well below the baseline.
        let err = triangulate(&layout(), &RangePair::new(0.5, 0.5)).unwrap_err();
        assert_eq!(err, GeometryError::Infeasible);
        // One circle deep inside the other.
        let err = triangulate(&layout(), &RangePair::new(30.0, 5.0)).unwrap_err();
        assert_eq!(err, GeometryError::Infeasible);
    }

    #[test]
    fn negative_range_rejected() {
        let err = triangulate(&layout(), &RangePair::new(-1.0, 5.0)).unwrap_err();
        assert_eq!(err, GeometryError::Infeasible);
    }

    #[test]
    fn degenerate_layout_rejected() {
        let bad = AnchorLayout {
            half_baseline: 0.0,
            ..layout()
        };
        let err = triangulate(&bad, &RangePair::new(5.0, 5.0)).unwrap_err();
        assert_eq!(err, GeometryError::DegenerateLayout);
    }

    #[test]
    fn near_collinear_pair_clamps_to_baseline() {
        let x = layout().half_baseline;
        // Marginally short of closing the triangle: clamped onto the axis.
        let r = x * (1.0 - 1e-8);
        let pos = triangulate(&layout(), &RangePair::new(r, r)).unwrap();
        assert_eq!(pos.y, 0.0);
        // Far out of tolerance: rejected.
        let err = triangulate(&layout(), &RangePair::new(0.9 * x, 0.9 * x)).unwrap_err();
        assert_eq!(err, GeometryError::Infeasible);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let ranges = RangePair::new(12.0, 11.0);
        let base = triangulate(&layout(), &ranges).unwrap();
        for mode in [PerturbationMode::WorstCaseX, PerturbationMode::WorstCaseY] {
            let p = perturbed_triangulate(&layout(), &ranges, 0.0, mode).unwrap();
            assert_eq!(p, base);
        }
    }

    #[test]
    fn worst_case_x_perturbation() {
        // ((10.1)^2 - (9.9)^2) / (4 * 0.925) = 4/3.7
        let p = perturbed_triangulate(
            &layout(),
            &RangePair::new(10.0, 10.0),
            0.1,
            PerturbationMode::WorstCaseX,
        )
        .unwrap();
        assert_close(p.x, 4.0 / 3.7, 1e-12);
    }

    #[test]
    fn worst_case_y_preserves_symmetry() {
        let p = perturbed_triangulate(
            &layout(),
            &RangePair::new(10.0, 10.0),
            0.1,
            PerturbationMode::WorstCaseY,
        )
        .unwrap();
        assert_eq!(p.x, 0.0);
    }

    #[test]
    fn sensitivity_at_ten_meters() {
        let s = sensitivity(&layout(), &RangePair::new(10.0, 10.0), 0.0).unwrap();
        assert_close(s.dx_de, 20.0 / 1.85, 1e-12);
        assert_close(s.dy_de, 1.004_305_775_756_559, 1e-12);
    }

    #[test]
    fn sensitivity_at_fifty_meters() {
        let s = sensitivity(&layout(), &RangePair::new(50.0, 50.0), 0.0).unwrap();
        assert_close(s.dx_de, 100.0 / 1.85, 1e-12);
    }

    #[test]
    fn sensitivity_singular_on_baseline() {
        let x = layout().half_baseline;
        let err = sensitivity(&layout(), &RangePair::new(x, x), 0.0).unwrap_err();
        assert_eq!(err, GeometryError::Singular);
    }

    #[test]
    fn frontal_sqrt_two_point() {
        let x = layout().half_baseline;
        let s = sensitivity_frontal(&layout(), x * 2f64.sqrt()).unwrap();
        assert_close(s.dy_de, 2f64.sqrt(), 1e-12);
    }

    #[test]
    fn frontal_matches_general_form() {
        let s1 = sensitivity_frontal(&layout(), 10.0).unwrap();
        let s2 = sensitivity(&layout(), &RangePair::new(10.0, 10.0), 0.0).unwrap();
        assert_close(s1.dx_de, 10.0 / 0.925, 1e-12);
        assert_close(s1.dx_de, s2.dx_de, 1e-12 * s1.dx_de);
        assert_close(s1.dy_de, s2.dy_de, 1e-12 * s1.dy_de);
    }

    #[test]
    fn frontal_vertical_error_approaches_ranging_error() {
        let s = sensitivity_frontal(&layout(), 1e6).unwrap();
        assert!(s.dy_de > 1.0);
        assert_close(s.dy_de, 1.0, 1e-9);
    }

    #[test]
    fn frontal_singular_inside_baseline() {
        let err = sensitivity_frontal(&layout(), 0.5).unwrap_err();
        assert_eq!(err, GeometryError::Singular);
    }

    #[test]
    fn resolve_side_prefers_matching_residual() {
        let candidate = TagPosition::new(0.0, 10.0);
        let aux = Point::new(0.0, 1.0);
        let front = resolve_side(candidate, 9.0, aux).unwrap();
        assert_eq!(front, TagPosition::new(0.0, 10.0));
        let rear = resolve_side(candidate, 11.0, aux).unwrap();
        assert_eq!(rear, TagPosition::new(0.0, -10.0));
    }

    #[test]
    fn resolve_side_ambiguous_on_baseline() {
        let candidate = TagPosition::new(0.0, 10.0);
        let err = resolve_side(candidate, 9.0, Point::new(0.5, 0.0)).unwrap_err();
        assert_eq!(err, GeometryError::Ambiguous);
    }

    #[test]
    fn coverage_front_sector() {
        assert_eq!(
            coverage(&layout(), Point::new(0.0, 30.0)),
            CoverageStatus::BothAnchors
        );
    }

    #[test]
    fn coverage_occlusion_band() {
        // 75 degrees off forward at 20 m: only one anchor keeps the tag.
        let b = 75f64.to_radians();
        let p = Point::new(20.0 * b.sin(), 20.0 * b.cos());
        assert_eq!(coverage(&layout(), p), CoverageStatus::OneAnchor);
    }

    #[test]
    fn coverage_close_side() {
        assert_eq!(
            coverage(&layout(), Point::new(4.0, 0.0)),
            CoverageStatus::BothAnchors
        );
    }

    #[test]
    fn coverage_out_of_range() {
        assert_eq!(coverage(&layout(), Point::new(0.0, 60.0)), CoverageStatus::None);
        assert_eq!(coverage(&layout(), Point::new(0.0, -20.0)), CoverageStatus::None);
        // Inside the occlusion bearings but beyond front range.
        let b = 75f64.to_radians();
        let p = Point::new(55.0 * b.sin(), 55.0 * b.cos());
        assert_eq!(coverage(&layout(), p), CoverageStatus::None);
    }

    #[test]
    fn layout_validation() {
        assert!(layout().validate().is_ok());
        assert_eq!(
            AnchorLayout {
                half_baseline: -1.0,
                ..layout()
            }
            .validate()
            .unwrap_err(),
            GeometryError::DegenerateLayout
        );
        assert!(matches!(
            AnchorLayout {
                side_range: 60.0,
                ..layout()
            }
            .validate()
            .unwrap_err(),
            GeometryError::InvalidLayout(_)
        ));
        assert!(matches!(
            AnchorLayout {
                occlusion_start: 30.0,
                ..layout()
            }
            .validate()
            .unwrap_err(),
            GeometryError::InvalidLayout(_)
        ));
    }
}
