//! Trajectory metrics (PRMSE, TDE), the model-based dead-reckoning baseline
//! driver, and the distance-plus-heading baseline with its Madgwick heading
//! filter.

use std::path::Path;

use nalgebra::Vector3;

use crate::dataio::{wheel_ground_truth, RecordingSession, WheelTag};
use crate::error::{Error, Result};
use crate::mechanizer::{mechanize, MechanizerConfig};
use crate::types::{rotation_z, Frame, ImuSequence, NavState, Trajectory, TrajPoint};

/// Published benchmark averages used as reference constants in comparison
/// reports (meters / percent).
pub mod reference {
    /// Model-based wheel-mounted dead reckoning, average PRMSE.
    pub const WMIN_PRMSE_M: f64 = 177.49;
    /// Model-based approach, average TDE.
    pub const WMIN_TDE_PCT: f64 = 99.00;
    /// Distance-plus-heading learned baseline, average PRMSE.
    pub const MORPINET_PRMSE_M: f64 = 3.45;
    /// Displacement regressor, average PRMSE.
    pub const WMINET_PRMSE_M: f64 = 1.54;
    /// Displacement regressor, average TDE.
    pub const WMINET_TDE_PCT: f64 = 12.91;
    /// Displacement regressor with the wheelbase constraint, average PRMSE.
    pub const WMINET_WC_PRMSE_M: f64 = 1.16;
    /// Improvement of the wheelbase-constrained variant, percent.
    pub const WMINET_WC_IMPROVEMENT_PCT: f64 = 24.0;
}

/// Evaluation summary for one method on one trajectory.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: String,
    pub trajectory: String,
    pub prmse_m: f64,
    pub tde_pct: f64,
    /// Ground-truth path length D, m.
    pub length_m: f64,
    pub reconstructed: Trajectory,
}

/// Position root mean square error: the estimate is resampled at the
/// ground-truth timestamps by linear interpolation, then
/// `√(Σ‖x_i − x̂_i‖²/N)` over the planar positions.
pub fn prmse(gt: &Trajectory, est: &Trajectory) -> Result<f64> {
    if gt.is_empty() || est.is_empty() {
        return Err(Error::EmptyInput("prmse over an empty trajectory".into()));
    }
    let mut ss = 0.0;
    for p in gt.points() {
        let (ex, ey) = est.sample_at(p.t)?;
        ss += (p.x - ex).powi(2) + (p.y - ey).powi(2);
    }
    Ok((ss / gt.len() as f64).sqrt())
}

/// Total distance error: `100·PRMSE/D` percent.
pub fn tde(prmse_m: f64, length_m: f64) -> Result<f64> {
    if !length_m.is_finite() || length_m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "trajectory length must be positive, got {length_m}"
        )));
    }
    Ok(100.0 * prmse_m / length_m)
}

/// Gradient-descent complementary orientation filter over gyro and
/// accelerometer, NED convention (level at rest reads specific force
/// `(0, 0, −g)`).
#[derive(Debug, Clone)]
pub struct MadgwickFilter {
    /// Unit quaternion (w, x, y, z), body→nav.
    q: [f64; 4],
    /// Correction gain.
    pub beta: f64,
}

impl MadgwickFilter {
    pub fn new(beta: f64) -> Self {
        MadgwickFilter { q: [1.0, 0.0, 0.0, 0.0], beta }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    /// Heading (yaw about the down axis), rad.
    pub fn yaw(&self) -> f64 {
        let [w, x, y, z] = self.q;
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    fn normalize(&mut self) {
        let n = self.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut self.q {
            *v /= n;
        }
    }

    /// One update: exact-exponential gyro propagation with the averaged rate
    /// over the step, then the normalized gradient correction toward the
    /// measured gravity direction. A zero-norm accelerometer sample skips
    /// the correction for that step.
    pub fn update(&mut self, gyro_avg: Vector3<f64>, accel: Vector3<f64>, dt: f64) {
        // q ← q ⊗ exp(½·ω·dt)
        let theta = gyro_avg.norm() * dt;
        let dq = if theta > 1e-12 {
            let axis = gyro_avg / gyro_avg.norm();
            let (s, c) = (theta / 2.0).sin_cos();
            [c, s * axis.x, s * axis.y, s * axis.z]
        } else {
            let h = 0.5 * dt;
            [1.0, gyro_avg.x * h, gyro_avg.y * h, gyro_avg.z * h]
        };
        let [w, x, y, z] = self.q;
        let [dw, dx, dy, dz] = dq;
        self.q = [
            w * dw - x * dx - y * dy - z * dz,
            w * dx + x * dw + y * dz - z * dy,
            w * dy - x * dz + y * dw + z * dx,
            w * dz + x * dy - y * dx + z * dw,
        ];
        self.normalize();

        let norm = accel.norm();
        if self.beta > 0.0 && norm > 0.0 {
            let a = accel / norm;
            let [w, x, y, z] = self.q;
            // Objective: the nav down direction rotated into the body frame
            // must match the measured gravity reaction −down̂.
            let f1 = 2.0 * (w * y - x * z) - a.x;
            let f2 = -2.0 * (y * z + w * x) - a.y;
            let f3 = 2.0 * x * x + 2.0 * y * y - 1.0 - a.z;
            let mut grad = [
                2.0 * y * f1 - 2.0 * x * f2,
                -2.0 * z * f1 - 2.0 * w * f2 + 4.0 * x * f3,
                2.0 * w * f1 - 2.0 * z * f2 + 4.0 * y * f3,
                -2.0 * x * f1 - 2.0 * y * f2,
            ];
            let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn > 0.0 {
                for g in &mut grad {
                    *g /= gn;
                }
                for (q, g) in self.q.iter_mut().zip(&grad) {
                    *q -= self.beta * g * dt;
                }
                self.normalize();
            }
        }
    }
}

/// Runs the orientation filter over a body-frame sequence and returns the
/// heading time series `(t, ψ)`.
pub fn madgwick_heading(imu: &ImuSequence, beta: f64) -> Result<Vec<(f64, f64)>> {
    let samples = imu.samples();
    if samples.is_empty() {
        return Err(Error::EmptyInput("heading filter over empty sequence".into()));
    }
    if samples[0].frame != Frame::Body {
        return Err(Error::FrameMismatch { expected: "body", got: samples[0].frame.name() });
    }
    let mut filter = MadgwickFilter::new(beta);
    let mut out = Vec::with_capacity(samples.len());
    out.push((samples[0].t, filter.yaw()));
    for k in 1..samples.len() {
        let dt = samples[k].t - samples[k - 1].t;
        let gyro_avg = 0.5 * (samples[k - 1].w + samples[k].w);
        filter.update(gyro_avg, samples[k].f, dt);
        out.push((samples[k].t, filter.yaw()));
    }
    Ok(out)
}

/// Dead reckoning from per-interval traveled distances and headings:
/// `x_{i+1} = x_i + d_i·cos ψ_i`, `y_{i+1} = y_i + d_i·sin ψ_i`.
pub fn morpinet_update(
    origin: (f64, f64),
    t0: f64,
    dt: f64,
    distances: &[f64],
    headings: &[f64],
) -> Result<Trajectory> {
    if distances.len() != headings.len() {
        return Err(Error::Shape(format!(
            "{} distances vs {} headings",
            distances.len(),
            headings.len()
        )));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument("interval must be positive".into()));
    }
    let mut points = Vec::with_capacity(distances.len() + 1);
    let (mut x, mut y) = origin;
    points.push(TrajPoint { t: t0, x, y });
    for (i, (&d, &psi)) in distances.iter().zip(headings).enumerate() {
        x += d * psi.cos();
        y += d * psi.sin();
        points.push(TrajPoint { t: t0 + (i + 1) as f64 * dt, x, y });
    }
    Trajectory::new(points)
}

/// Full report for one reconstruction: PRMSE and TDE against the
/// ground-truth path length.
pub fn evaluate(
    method: &str,
    trajectory: &str,
    gt: &Trajectory,
    est: &Trajectory,
) -> Result<EvalReport> {
    let prmse_m = prmse(gt, est)?;
    let length_m = gt.path_length();
    let tde_pct = tde(prmse_m, length_m)?;
    Ok(EvalReport {
        method: method.to_string(),
        trajectory: trajectory.to_string(),
        prmse_m,
        tde_pct,
        length_m,
        reconstructed: est.clone(),
    })
}

/// Output of the model-based dead-reckoning baseline on one session.
#[derive(Debug, Clone)]
pub struct WminBaselineRun {
    /// Mechanized trajectory.
    pub estimated: Trajectory,
    /// RTK-derived track of the same wheel over the same span.
    pub wheel_truth: Trajectory,
}

/// Runs the model-based baseline on a synchronized session: mechanizes the
/// selected wheel stream from a standstill inside the stationary prologue
/// (2 s before the detected motion onset) through the end of motion, and
/// returns the estimate alongside the RTK-derived wheel track.
pub fn wmin_baseline(
    session: &RecordingSession,
    wheel: WheelTag,
    planar_2d: bool,
    gravity: f64,
) -> Result<WminBaselineRun> {
    let sync = session.sync()?;
    let seq = session
        .imu
        .get(wheel.name())
        .ok_or_else(|| Error::Schema(format!("session has no stream {:?}", wheel.name())))?;

    let lead = 2.0f64.min((sync.motion_start - seq.first_t()).max(0.0));
    let t_begin = sync.motion_start - lead;
    let sliced = seq.slice_time(t_begin, sync.motion_end)?;

    let antenna = session.gnss_track()?;
    let tracks = wheel_ground_truth(&antenna, &session.geometry)?;
    let wheel_track = tracks.get(wheel).clone();

    // Rest start: position from the wheel track, zero velocity, heading from
    // the early-motion course.
    let (x0, y0) = wheel_track.sample_at(t_begin)?;
    let (hx0, hy0) = wheel_track.sample_at(sync.motion_start)?;
    let (hx1, hy1) = wheel_track.sample_at(sync.motion_start + 1.0)?;
    let heading = (hy1 - hy0).atan2(hx1 - hx0);
    let initial_state = NavState::new(
        Vector3::new(x0, y0, 0.0),
        Vector3::zeros(),
        rotation_z(heading)?.transpose(),
    )?;

    let config = MechanizerConfig {
        dt: 1.0 / session.meta.imu_rate_hz,
        gravity,
        planar_2d,
        initial_state,
    };
    let estimated = mechanize(&sliced, &config)?;
    let wheel_truth = wheel_track.slice_time(t_begin, sync.motion_end);
    Ok(WminBaselineRun { estimated, wheel_truth })
}

/// Writes reports as CSV with columns `method, trajectory, PRMSE_m, TDE_pct`.
pub fn write_report_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut out = String::from("method,trajectory,PRMSE_m,TDE_pct\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.method, r.trajectory, r.prmse_m, r.tde_pct
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Plain-text table of the same reports.
pub fn format_report_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:<14} {:>10} {:>9} {:>9}\n",
        "method", "trajectory", "PRMSE [m]", "TDE [%]", "D [m]"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<18} {:<14} {:>10.3} {:>9.2} {:>9.2}\n",
            r.method, r.trajectory, r.prmse_m, r.tde_pct, r.length_m
        ));
    }
    out
}
