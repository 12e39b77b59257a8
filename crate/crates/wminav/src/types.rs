//! Shared domain types, coordinate-frame conventions, and elementary frame math.
//!
//! Frame conventions used throughout the crate:
//!
//! - **n-frame**: local navigation frame, north-east-down (NED), anchored at the
//!   first GNSS fix of a session. Gravity is `(0, 0, +g)`.
//! - **b-frame**: vehicle body frame, x forward, y right, z down. Aligned with
//!   the n-frame at the initial heading.
//! - **w-frame**: spinning wheel frame. Its z axis lies along the wheel axle
//!   (pointing body-left); x and y spin with the wheel in the forward/vertical
//!   plane. The literature sometimes calls this same frame the "v-frame"; the
//!   two names refer to one frame here.
//!
//! Angles are radians everywhere; degrees appear only at I/O boundaries.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Standard gravity used for unit conversions (mg, µg).
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Mean spherical Earth radius for the local tangent-plane conversion, m.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Coordinate frame an IMU sample is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Spinning wheel frame (z along the axle).
    Wheel,
    /// Body-fixed frame.
    Body,
}

impl Frame {
    pub fn name(&self) -> &'static str {
        match self {
            Frame::Wheel => "wheel",
            Frame::Body => "body",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped IMU measurement: specific force and angular rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Time, s (monotonic within a sequence).
    pub t: f64,
    /// Specific force, m/s².
    pub f: Vector3<f64>,
    /// Angular rate, rad/s.
    pub w: Vector3<f64>,
    /// Frame the measurement is expressed in.
    pub frame: Frame,
}

impl ImuSample {
    pub fn new(t: f64, f: Vector3<f64>, w: Vector3<f64>, frame: Frame) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite timestamp {t}")));
        }
        if !(f.iter().all(|v| v.is_finite()) && w.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "non-finite IMU channel at t={t}"
            )));
        }
        Ok(ImuSample { t, f, w, frame })
    }
}

/// A uniform-rate stream of IMU samples.
#[derive(Debug, Clone)]
pub struct ImuSequence {
    samples: Vec<ImuSample>,
    rate_hz: f64,
}

impl ImuSequence {
    /// Builds a sequence, enforcing strictly increasing timestamps and spacing
    /// within 10% of the nominal period.
    pub fn new(samples: Vec<ImuSample>, rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("IMU sequence has no samples".into()));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("bad sample rate {rate_hz}")));
        }
        let dt_nom = 1.0 / rate_hz;
        for pair in samples.windows(2) {
            let dt = pair[1].t - pair[0].t;
            if dt <= 0.0 {
                return Err(Error::Ordering(format!(
                    "timestamps not strictly increasing at t={}",
                    pair[1].t
                )));
            }
            if (dt - dt_nom).abs() > 0.1 * dt_nom {
                return Err(Error::Ordering(format!(
                    "sample spacing {dt:.6} s deviates more than 10% from nominal {dt_nom:.6} s at t={}",
                    pair[1].t
                )));
            }
        }
        Ok(ImuSequence { samples, rate_hz })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_t(&self) -> f64 {
        self.samples[0].t
    }

    pub fn last_t(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Uniformly shifts every timestamp (used by stream synchronization).
    pub fn shift_time(&mut self, offset: f64) {
        for s in &mut self.samples {
            s.t += offset;
        }
    }

    /// The sub-sequence with `t` in `[t0, t1]`.
    pub fn slice_time(&self, t0: f64, t1: f64) -> Result<ImuSequence> {
        let samples: Vec<ImuSample> = self
            .samples
            .iter()
            .copied()
            .filter(|s| s.t >= t0 && s.t <= t1)
            .collect();
        ImuSequence::new(samples, self.rate_hz)
    }
}

/// Navigation state at an instant: position, velocity, body-to-nav rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    /// Position in the n-frame, m.
    pub p: Vector3<f64>,
    /// Velocity in the n-frame, m/s.
    pub v: Vector3<f64>,
    t_bn: Matrix3<f64>,
}

/// Largest allowed ‖TᵀT − I‖∞ for a rotation accepted by the constructor.
pub const ROTATION_TOL: f64 = 1e-6;

impl NavState {
    pub fn new(p: Vector3<f64>, v: Vector3<f64>, t_bn: Matrix3<f64>) -> Result<Self> {
        let defect = orthonormality_defect(&t_bn);
        if defect > ROTATION_TOL {
            return Err(Error::InvalidState(format!(
                "rotation not orthonormal: ‖TᵀT − I‖∞ = {defect:.3e}"
            )));
        }
        if t_bn.determinant() <= 0.0 {
            return Err(Error::InvalidState("rotation has non-positive determinant".into()));
        }
        Ok(NavState { p, v, t_bn })
    }

    /// Identity attitude at the origin, at rest.
    pub fn at_rest() -> Self {
        NavState {
            p: Vector3::zeros(),
            v: Vector3::zeros(),
            t_bn: Matrix3::identity(),
        }
    }

    /// Body-to-nav rotation matrix.
    pub fn attitude(&self) -> &Matrix3<f64> {
        &self.t_bn
    }
}

/// Max-norm of TᵀT − I.
pub fn orthonormality_defect(t: &Matrix3<f64>) -> f64 {
    let d = t.transpose() * t - Matrix3::identity();
    d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// One point of a planar trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Timestamped 2D position sequence (ground truth or reconstruction).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<TrajPoint>) -> Result<Self> {
        for pair in points.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(Error::Ordering(format!(
                    "trajectory timestamps not strictly increasing at t={}",
                    pair[1].t
                )));
            }
        }
        Ok(Trajectory { points })
    }

    pub fn points(&self) -> &[TrajPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn endpoint(&self) -> Option<TrajPoint> {
        self.points.last().copied()
    }

    /// Sum of consecutive segment lengths, m.
    pub fn path_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| ((p[1].x - p[0].x).powi(2) + (p[1].y - p[0].y).powi(2)).sqrt())
            .sum()
    }

    /// Position at time `t` by linear interpolation, clamped to the endpoints.
    pub fn sample_at(&self, t: f64) -> Result<(f64, f64)> {
        if self.points.is_empty() {
            return Err(Error::EmptyInput("cannot sample an empty trajectory".into()));
        }
        let pts = &self.points;
        if t <= pts[0].t {
            return Ok((pts[0].x, pts[0].y));
        }
        if t >= pts[pts.len() - 1].t {
            let p = pts[pts.len() - 1];
            return Ok((p.x, p.y));
        }
        let i = pts.partition_point(|p| p.t <= t);
        let (a, b) = (pts[i - 1], pts[i]);
        let u = (t - a.t) / (b.t - a.t);
        Ok((a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)))
    }

    /// The sub-trajectory with `t` in `[t0, t1]`.
    pub fn slice_time(&self, t0: f64, t1: f64) -> Trajectory {
        Trajectory {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| p.t >= t0 && p.t <= t1)
                .collect(),
        }
    }

    /// Writes `t,x,y` CSV. Values use shortest round-trip decimal formatting,
    /// so a write/read cycle is bit-exact.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,x,y\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.t, p.x, p.y));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Trajectory> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut points = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Schema(format!("{}: missing column {name} on line {}", path.display(), ln + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), ln + 1)))
            };
            points.push(TrajPoint { t: next("t")?, x: next("x")?, y: next("y")? });
        }
        Trajectory::new(points)
    }
}

/// GNSS position, either geodetic or already in the local planar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GnssPosition {
    Geodetic { lat_deg: f64, lon_deg: f64, alt_m: f64 },
    LocalPlanar { x: f64, y: f64 },
}

/// One GNSS fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssFix {
    pub t: f64,
    pub position: GnssPosition,
}

/// Rotation about the z axis by `alpha`, rows `[cos α, sin α, 0]`,
/// `[−sin α, cos α, 0]`, `[0, 0, 1]`.
///
/// This is the passive rotation taking coordinates of a fixed vector into a
/// frame rotated by `+alpha` about the shared z axis.
pub fn rotation_z(alpha: f64) -> Result<Matrix3<f64>> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite angle {alpha}")));
    }
    let (s, c) = alpha.sin_cos();
    Ok(Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Local tangent-plane (north, east) coordinates of `fix` relative to
/// `origin`, small-angle spherical model.
///
/// Intended for trajectories spanning tens of meters; both fixes must be
/// geodetic and within 10 km of each other.
pub fn geodetic_to_local(fix: &GnssFix, origin: &GnssFix) -> Result<(f64, f64)> {
    let (lat, lon) = match fix.position {
        GnssPosition::Geodetic { lat_deg, lon_deg, .. } => (lat_deg, lon_deg),
        GnssPosition::LocalPlanar { .. } => {
            return Err(Error::FrameMismatch { expected: "geodetic", got: "local-planar" })
        }
    };
    let (lat0, lon0) = match origin.position {
        GnssPosition::Geodetic { lat_deg, lon_deg, .. } => (lat_deg, lon_deg),
        GnssPosition::LocalPlanar { .. } => {
            return Err(Error::FrameMismatch { expected: "geodetic", got: "local-planar" })
        }
    };
    let north = EARTH_RADIUS_M * (lat - lat0).to_radians();
    let east = EARTH_RADIUS_M * lat0.to_radians().cos() * (lon - lon0).to_radians();
    let sep = (north * north + east * east).sqrt();
    if sep > 10_000.0 {
        return Err(Error::InvalidArgument(format!(
            "fixes separated by {sep:.0} m exceed the 10 km tangent-plane limit"
        )));
    }
    Ok((north, east))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ARCSEC_DEG: f64 = 1.0 / 3600.0;

    #[test]
    fn rotation_z_identity_at_zero() {
        let r = rotation_z(0.0).unwrap();
        assert_eq!(r, Matrix3::identity());
    }

    #[test]
    fn rotation_z_quarter_turn() {
        let r = rotation_z(std::f64::consts::FRAC_PI_2).unwrap();
        let expect = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expect).norm() < 1e-15);
    }

    #[test]
    fn rotation_z_half_turn() {
        let r = rotation_z(std::f64::consts::PI).unwrap();
        let expect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expect).norm() < 1e-15);
    }

    #[test]
    fn rotation_z_rejects_non_finite() {
        assert!(rotation_z(f64::NAN).is_err());
        assert!(rotation_z(f64::INFINITY).is_err());
    }

    #[test]
    fn rotation_z_inverse_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-20.0..20.0);
            let prod = rotation_z(a).unwrap() * rotation_z(-a).unwrap();
            let defect = (prod - Matrix3::identity())
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(defect < 1e-12, "defect {defect} at a={a}");
        }
    }

    #[test]
    fn rotation_z_determinant_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-20.0..20.0);
            let det = rotation_z(a).unwrap().determinant();
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    fn geo(lat: f64, lon: f64) -> GnssFix {
        GnssFix { t: 0.0, position: GnssPosition::Geodetic { lat_deg: lat, lon_deg: lon, alt_m: 0.0 } }
    }

    #[test]
    fn geodetic_origin_maps_to_zero() {
        let o = geo(32.0, 35.0);
        assert_eq!(geodetic_to_local(&o, &o).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn geodetic_arcsecond_north() {
        // Oracle: spherical arc length R·Δlat for one arc-second.
        let expect = EARTH_RADIUS_M * ARCSEC_DEG.to_radians();
        let (n, e) = geodetic_to_local(&geo(32.0 + ARCSEC_DEG, 35.0), &geo(32.0, 35.0)).unwrap();
        assert!((n - expect).abs() < 1e-9, "north {n} vs {expect}");
        assert!((n - 30.89).abs() < 0.05);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn geodetic_arcsecond_east() {
        // Oracle: R·cos(lat)·Δlon.
        let expect = EARTH_RADIUS_M * 32.0f64.to_radians().cos() * ARCSEC_DEG.to_radians();
        let (n, e) = geodetic_to_local(&geo(32.0, 35.0 + ARCSEC_DEG), &geo(32.0, 35.0)).unwrap();
        assert_eq!(n, 0.0);
        assert!((e - expect).abs() < 1e-9);
        assert!((e - 26.2).abs() < 0.05);
    }

    #[test]
    fn geodetic_rejects_mixed_frames() {
        let o = geo(32.0, 35.0);
        let local = GnssFix { t: 0.0, position: GnssPosition::LocalPlanar { x: 1.0, y: 2.0 } };
        assert!(matches!(
            geodetic_to_local(&local, &o),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn geodetic_rejects_distant_fixes() {
        assert!(geodetic_to_local(&geo(33.0, 35.0), &geo(32.0, 35.0)).is_err());
    }

    #[test]
    fn nav_state_rejects_sheared_rotation() {
        let mut t = Matrix3::identity();
        t[(0, 1)] = 1e-3;
        assert!(NavState::new(Vector3::zeros(), Vector3::zeros(), t).is_err());
    }

    #[test]
    fn nav_state_accepts_tiny_defect() {
        let mut t = Matrix3::identity();
        t[(0, 1)] = 1e-8;
        assert!(NavState::new(Vector3::zeros(), Vector3::zeros(), t).is_ok());
    }

    #[test]
    fn imu_sequence_rejects_nonmonotonic_and_ragged() {
        let s = |t| ImuSample::new(t, Vector3::zeros(), Vector3::zeros(), Frame::Body).unwrap();
        assert!(ImuSequence::new(vec![s(0.0), s(0.0)], 100.0).is_err());
        assert!(ImuSequence::new(vec![s(0.0), s(0.05)], 100.0).is_err());
        assert!(ImuSequence::new(vec![s(0.0), s(0.01), s(0.02)], 100.0).is_ok());
    }

    #[test]
    fn imu_sample_rejects_non_finite() {
        assert!(ImuSample::new(0.0, Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros(), Frame::Body).is_err());
    }

    #[test]
    fn trajectory_csv_round_trip_is_bit_exact() {
        let tr = Trajectory::new(vec![
            TrajPoint { t: 0.0, x: 0.1 + 0.2, y: -5.5e-13 },
            TrajPoint { t: 0.2, x: 1.0 / 3.0, y: 2.0f64.sqrt() },
        ])
        .unwrap();
        let dir = std::env::temp_dir().join("wminav_traj_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        tr.write_csv(&path).unwrap();
        let back = Trajectory::read_csv(&path).unwrap();
        assert_eq!(tr, back);
    }

    #[test]
    fn trajectory_interpolation() {
        let tr = Trajectory::new(vec![
            TrajPoint { t: 0.0, x: 0.0, y: 0.0 },
            TrajPoint { t: 1.0, x: 2.0, y: -2.0 },
        ])
        .unwrap();
        assert_eq!(tr.sample_at(0.5).unwrap(), (1.0, -1.0));
        assert_eq!(tr.sample_at(-1.0).unwrap(), (0.0, 0.0));
        assert_eq!(tr.sample_at(9.0).unwrap(), (2.0, -2.0));
    }
}
