//! Model-based wheel-mounted inertial navigation: phase-angle integration,
//! wheel→body transformation, and strapdown propagation.
//!
//! Pipeline: the wheel gyro z channel (the spin axis) integrates into the
//! phase angle α; rotating each sample by `rotation_z(α)ᵀ` removes the spin
//! from the measurement coordinates, leaving a body-fixed frame whose z axis
//! is the wheel axle (pointing body-left) and whose x/y axes span the
//! forward/vertical plane. A fixed mount rotation then relabels those axes
//! into the vehicle convention (x forward, y right, z down) before the
//! strapdown equations run.
//!
//! Two propagation modes:
//!
//! - **full 3D** feeds the transformed signals straight into the strapdown
//!   equations. The transformed rate still contains the wheel spin (it is the
//!   wheel's angular velocity expressed in body axes, not the body's), so the
//!   attitude tumbles about the axle and the solution diverges quickly — the
//!   expected behavior of the uncorrected model-based approach.
//! - **planar 2D** zeroes `f_z`, `ω_x`, `ω_y` of the vehicle-frame signals
//!   before propagation. Because the spin sits on the transverse (pitch)
//!   axis, the zeroing excises it and keeps only yaw and the planar specific
//!   forces, giving a kinematically consistent planar dead reckoning.
//!
//! Earth rotation and transport rate are neglected throughout (low-cost
//! sensors, runs of a few minutes).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{rotation_z, Frame, ImuSample, ImuSequence, NavState, Trajectory, TrajPoint};

/// Strapdown configuration.
#[derive(Debug, Clone)]
pub struct MechanizerConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Local gravity magnitude, m/s².
    pub gravity: f64,
    /// Zero non-planar channels before propagation.
    pub planar_2d: bool,
    /// State at the first sample.
    pub initial_state: NavState,
}

/// Default local gravity, m/s² (mid-latitude value; override per site).
pub const DEFAULT_GRAVITY: f64 = 9.7953;

impl Default for MechanizerConfig {
    fn default() -> Self {
        MechanizerConfig {
            dt: 1.0 / 120.0,
            gravity: DEFAULT_GRAVITY,
            planar_2d: true,
            initial_state: NavState::at_rest(),
        }
    }
}

impl MechanizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(9.7..=9.9).contains(&self.gravity) {
            return Err(Error::Config(format!(
                "gravity {} outside plausible range [9.7, 9.9]",
                self.gravity
            )));
        }
        Ok(())
    }
}

/// Wheel phase angle per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    /// (t, α) pairs, one per source gyro sample.
    pub alphas: Vec<(f64, f64)>,
}

impl PhaseSeries {
    pub fn final_alpha(&self) -> f64 {
        self.alphas.last().map(|&(_, a)| a).unwrap_or(0.0)
    }
}

/// Trapezoidal cumulative integral over timestamped rates; the first sample
/// anchors `alpha0`.
fn integrate_phase_pairs(pairs: &[(f64, f64)], alpha0: f64) -> Result<PhaseSeries> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("phase integration over empty series".into()));
    }
    let mut alphas = Vec::with_capacity(pairs.len());
    let mut alpha = alpha0;
    alphas.push((pairs[0].0, alpha));
    for k in 1..pairs.len() {
        let (t_prev, w_prev) = pairs[k - 1];
        let (t, w) = pairs[k];
        alpha += 0.5 * (w_prev + w) * (t - t_prev);
        alphas.push((t, alpha));
    }
    Ok(PhaseSeries { alphas })
}

/// Integrates the wheel spin rate into the phase angle α(t) by the
/// trapezoidal rule. The first sample carries `alpha0`; no wrapping is
/// applied (the wheel→body rotation is periodic in α).
pub fn integrate_phase(wheel_gyro_z: &[f64], dt: f64, alpha0: f64) -> Result<PhaseSeries> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let pairs: Vec<(f64, f64)> = wheel_gyro_z
        .iter()
        .enumerate()
        .map(|(k, &w)| (k as f64 * dt, w))
        .collect();
    integrate_phase_pairs(&pairs, alpha0)
}

/// Rotates a wheel-frame sample into body-fixed (de-spun) axes:
/// `f^b = C_w^b f^w`, `ω^b = C_w^b ω^w` with `C_w^b = rotation_z(α)ᵀ`.
///
/// The resulting frame keeps the wheel z axis (the axle); see the module
/// docs for how it maps to the vehicle convention.
pub fn wheel_to_body(sample: &ImuSample, alpha: f64) -> Result<ImuSample> {
    if sample.frame != Frame::Wheel {
        return Err(Error::FrameMismatch { expected: "wheel", got: sample.frame.name() });
    }
    let c_wb = rotation_z(alpha)?.transpose();
    ImuSample::new(sample.t, c_wb * sample.f, c_wb * sample.w, Frame::Body)
}

/// Fixed mount rotation from de-spun wheel axes (x forward-in-plane, y
/// down-in-plane, z axle/left) to vehicle axes (x forward, y right, z down).
pub fn mount_to_vehicle() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues rotation exponential of a rotation vector.
fn rotation_exp(rv: &Vector3<f64>) -> Matrix3<f64> {
    let theta = rv.norm();
    if theta < 1e-12 {
        return Matrix3::identity() + skew(rv);
    }
    let k = skew(&(rv / theta));
    Matrix3::identity() + theta.sin() * k + (1.0 - theta.cos()) * (k * k)
}

/// Nearest rotation matrix (polar factor) via SVD.
pub fn reorthonormalize(t: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = t.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the weakest singular direction to stay in SO(3).
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// One strapdown step: exact constant-rate attitude rotation over `dt`, then
/// semi-implicit Euler for velocity and position with gravity `(0, 0, g)`.
/// The specific force is projected with the average of the old and new
/// attitude, which removes the leading rectification error on oscillating
/// trajectories.
pub fn strapdown_step(
    state: &NavState,
    f_b: Vector3<f64>,
    w_b: Vector3<f64>,
    dt: f64,
    gravity: f64,
) -> Result<NavState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let t_new = state.attitude() * rotation_exp(&(w_b * dt));
    let t_avg = 0.5 * (state.attitude() + t_new);
    let g_n = Vector3::new(0.0, 0.0, gravity);
    let v_new = state.v + (t_avg * f_b + g_n) * dt;
    let p_new = state.p + v_new * dt;
    NavState::new(p_new, v_new, t_new)
}

/// Dead-reckons a wheel-frame IMU sequence into a planar trajectory.
///
/// Emits one point per sample, starting at the configured initial state.
/// The attitude is re-orthonormalized by polar decomposition every 1000
/// steps.
pub fn mechanize(imu: &ImuSequence, config: &MechanizerConfig) -> Result<Trajectory> {
    config.validate()?;
    let samples = imu.samples();
    if samples.is_empty() {
        return Err(Error::EmptyInput("mechanize over empty sequence".into()));
    }
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.w.z)).collect();
    let phases = integrate_phase_pairs(&pairs, 0.0)?;

    let mount = mount_to_vehicle();
    let mut state = config.initial_state.clone();
    let mut points = Vec::with_capacity(samples.len());
    points.push(TrajPoint { t: samples[0].t, x: state.p.x, y: state.p.y });

    // Per-interval inputs are the average of the de-spun endpoint samples,
    // treated as constant over the step.
    let vehicle = |k: usize| -> Result<(Vector3<f64>, Vector3<f64>)> {
        let despun = wheel_to_body(&samples[k], phases.alphas[k].1)?;
        Ok((mount * despun.f, mount * despun.w))
    };
    let (mut f_prev, mut w_prev) = vehicle(0)?;
    for k in 0..samples.len() - 1 {
        let (f_next, w_next) = vehicle(k + 1)?;
        let mut f_v = 0.5 * (f_prev + f_next);
        let mut w_v = 0.5 * (w_prev + w_next);
        f_prev = f_next;
        w_prev = w_next;
        if config.planar_2d {
            f_v.z = 0.0;
            w_v.x = 0.0;
            w_v.y = 0.0;
        }
        let dt = samples[k + 1].t - samples[k].t;
        state = strapdown_step(&state, f_v, w_v, dt, config.gravity)?;
        if (k + 1) % 1000 == 0 {
            let t_fixed = reorthonormalize(state.attitude());
            state = NavState::new(state.p, state.v, t_fixed)?;
        }
        points.push(TrajPoint { t: samples[k + 1].t, x: state.p.x, y: state.p.y });
    }
    Trajectory::new(points)
}

/// Initial navigation state aligned with a ground-truth track: position from
/// the track at `t_start`, heading and speed from the displacement over
/// `horizon` seconds.
pub fn initial_state_from_track(
    track: &Trajectory,
    t_start: f64,
    horizon: f64,
) -> Result<NavState> {
    if horizon <= 0.0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let (x0, y0) = track.sample_at(t_start)?;
    let (x1, y1) = track.sample_at(t_start + horizon)?;
    let (dx, dy) = (x1 - x0, y1 - y0);
    let dist = (dx * dx + dy * dy).sqrt();
    let heading = if dist < 1e-9 { 0.0 } else { dy.atan2(dx) };
    let speed = dist / horizon;
    let t_bn = rotation_z(heading)?.transpose();
    NavState::new(
        Vector3::new(x0, y0, 0.0),
        Vector3::new(speed * heading.cos(), speed * heading.sin(), 0.0),
        t_bn,
    )
}
