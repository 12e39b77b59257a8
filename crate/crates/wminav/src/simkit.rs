//! Synthetic planar trajectories and the wheel-mounted IMU signals they
//! induce.
//!
//! The trajectory family is a sinusoidal lateral offset superposed on a
//! constant-speed advance, which produces the oscillating angular rates and
//! linear accelerations that periodic driving is meant to excite. All
//! derivatives (velocity, acceleration, heading, yaw rate) are analytic; the
//! wheel phase is the trapezoidal integral of the spin series at the sample
//! rate, the same rule the mechanizer applies, so noise-free signals round
//! trip through the strapdown pipeline.
//!
//! The sensor error model is a per-run constant bias (fixed magnitude,
//! random sign per axis) plus Gaussian white noise with per-sample standard
//! deviation `density·√rate`.

use nalgebra::Vector3;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::WheelGeometry;
use crate::error::{Error, Result};
use crate::mechanizer::{mount_to_vehicle, DEFAULT_GRAVITY};
use crate::types::{rotation_z, Frame, ImuSample, ImuSequence, Trajectory, TrajPoint, STANDARD_GRAVITY};

/// Periodic planar trajectory specification.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTrajSpec {
    /// Forward speed along the advance axis, m/s.
    pub speed: f64,
    /// Lateral oscillation amplitude, m (0 = straight line).
    pub amplitude: f64,
    /// Lateral oscillation frequency, Hz.
    pub frequency_hz: f64,
    /// Motion duration, s.
    pub duration: f64,
    /// Heading of the advance axis, rad.
    pub heading: f64,
}

impl Default for PeriodicTrajSpec {
    fn default() -> Self {
        PeriodicTrajSpec {
            speed: 0.4,
            amplitude: 0.3,
            frequency_hz: 0.2,
            duration: 60.0,
            heading: 0.0,
        }
    }
}

impl PeriodicTrajSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.speed.is_finite() || self.speed <= 0.0 {
            return Err(Error::Config("speed must be positive".into()));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(Error::Config("duration must be positive".into()));
        }
        if self.amplitude < 0.0 {
            return Err(Error::Config("amplitude must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Sensor error model. Defaults follow the consumer-grade wheel IMU spec
/// sheet: gyro bias 10°/h, gyro noise 0.007°/s/√Hz, accel bias 0.03 mg,
/// accel noise 120 µg/√Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuNoiseSpec {
    /// Constant gyro bias magnitude per axis, rad/s.
    pub gyro_bias: f64,
    /// Gyro white-noise density, rad/s/√Hz.
    pub gyro_noise_density: f64,
    /// Constant accelerometer bias magnitude per axis, m/s².
    pub accel_bias: f64,
    /// Accelerometer white-noise density, m/s²/√Hz.
    pub accel_noise_density: f64,
    /// Seed for the bias signs and the white-noise stream.
    pub seed: u64,
}

impl Default for ImuNoiseSpec {
    fn default() -> Self {
        ImuNoiseSpec {
            gyro_bias: (10.0f64 / 3600.0).to_radians(),
            gyro_noise_density: 0.007f64.to_radians(),
            accel_bias: 0.03e-3 * STANDARD_GRAVITY,
            accel_noise_density: 120.0e-6 * STANDARD_GRAVITY,
            seed: 0,
        }
    }
}

impl ImuNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gyro_bias < 0.0
            || self.gyro_noise_density < 0.0
            || self.accel_bias < 0.0
            || self.accel_noise_density < 0.0
        {
            return Err(Error::Config("noise magnitudes must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> ImuNoiseSpec {
        ImuNoiseSpec { seed, ..self.clone() }
    }
}

/// One dense ground-truth sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtSample {
    pub t: f64,
    /// Position (north, east), m.
    pub p: [f64; 2],
    /// Velocity, m/s.
    pub v: [f64; 2],
    /// Acceleration, m/s².
    pub a: [f64; 2],
    /// Heading ψ, rad.
    pub heading: f64,
    /// Yaw rate ψ̇, rad/s.
    pub yaw_rate: f64,
    /// Yaw acceleration ψ̈, rad/s².
    pub yaw_acc: f64,
}

/// Dense analytic ground truth at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rate_hz: f64,
    pub samples: Vec<GtSample>,
}

impl GroundTruth {
    /// Stationary ground truth at a fixed pose.
    pub fn stationary(p: [f64; 2], heading: f64, duration: f64, rate_hz: f64) -> GroundTruth {
        let n = (duration * rate_hz).round() as usize;
        let samples = (0..=n)
            .map(|k| GtSample {
                t: k as f64 / rate_hz,
                p,
                v: [0.0, 0.0],
                a: [0.0, 0.0],
                heading,
                yaw_rate: 0.0,
                yaw_acc: 0.0,
            })
            .collect();
        GroundTruth { rate_hz, samples }
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(
            self.samples
                .iter()
                .map(|s| TrajPoint { t: s.t, x: s.p[0], y: s.p[1] })
                .collect(),
        )
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Concatenates ground-truth segments, re-timestamping each to follow the
    /// previous one at the common sample rate.
    pub fn concat(segments: &[GroundTruth]) -> Result<GroundTruth> {
        let rate = segments
            .first()
            .ok_or_else(|| Error::EmptyInput("no segments to concatenate".into()))?
            .rate_hz;
        let dt = 1.0 / rate;
        let mut samples: Vec<GtSample> = Vec::new();
        for seg in segments {
            if (seg.rate_hz - rate).abs() > 1e-9 {
                return Err(Error::InvalidArgument("segment rates differ".into()));
            }
            let t_base = samples.last().map(|s| s.t + dt).unwrap_or(0.0);
            let t0 = seg.samples.first().map(|s| s.t).unwrap_or(0.0);
            for s in &seg.samples {
                samples.push(GtSample { t: t_base + (s.t - t0), ..*s });
            }
        }
        Ok(GroundTruth { rate_hz: rate, samples })
    }

    /// Rigidly translates the track by a body-frame lever arm (antenna →
    /// wheel), with analytic velocity/acceleration corrections.
    pub fn translate(&self, lever: [f64; 2]) -> GroundTruth {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let (sin, cos) = s.heading.sin_cos();
                // R(ψ)·lever, body→nav.
                let rl = [cos * lever[0] - sin * lever[1], sin * lever[0] + cos * lever[1]];
                // dR/dψ·lever; d²R/dψ²·lever = −R·lever.
                let rl_d = [-sin * lever[0] - cos * lever[1], cos * lever[0] - sin * lever[1]];
                GtSample {
                    t: s.t,
                    p: [s.p[0] + rl[0], s.p[1] + rl[1]],
                    v: [s.v[0] + s.yaw_rate * rl_d[0], s.v[1] + s.yaw_rate * rl_d[1]],
                    a: [
                        s.a[0] + s.yaw_acc * rl_d[0] - s.yaw_rate * s.yaw_rate * rl[0],
                        s.a[1] + s.yaw_acc * rl_d[1] - s.yaw_rate * s.yaw_rate * rl[1],
                    ],
                    heading: s.heading,
                    yaw_rate: s.yaw_rate,
                    yaw_acc: s.yaw_acc,
                }
            })
            .collect();
        GroundTruth { rate_hz: self.rate_hz, samples }
    }
}

/// Generates the dense analytic ground truth of a periodic trajectory.
pub fn gen_trajectory(spec: &PeriodicTrajSpec, rate_hz: f64) -> Result<GroundTruth> {
    spec.validate()?;
    if !rate_hz.is_finite() || rate_hz <= 0.0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    if rate_hz < 2.0 * spec.frequency_hz {
        return Err(Error::Config(format!(
            "rate {rate_hz} Hz violates Nyquist for oscillation at {} Hz",
            spec.frequency_hz
        )));
    }
    let omega = std::f64::consts::TAU * spec.frequency_hz;
    let (sin0, cos0) = spec.heading.sin_cos();
    let e_adv = [cos0, sin0];
    let e_lat = [-sin0, cos0];
    let n = (spec.duration * rate_hz).round() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / rate_hz;
        let (s, c) = (omega * t).sin_cos();
        let l = spec.amplitude * s;
        let l_d = spec.amplitude * omega * c;
        let l_dd = -spec.amplitude * omega * omega * s;
        let l_ddd = -spec.amplitude * omega * omega * omega * c;
        let u = spec.speed * t;
        let v = spec.speed;
        let speed_sq = v * v + l_d * l_d;
        let heading = spec.heading + l_d.atan2(v);
        let yaw_rate = v * l_dd / speed_sq;
        let yaw_acc = v * (l_ddd * speed_sq - 2.0 * l_d * l_dd * l_dd) / (speed_sq * speed_sq);
        samples.push(GtSample {
            t,
            p: [u * e_adv[0] + l * e_lat[0], u * e_adv[1] + l * e_lat[1]],
            v: [v * e_adv[0] + l_d * e_lat[0], v * e_adv[1] + l_d * e_lat[1]],
            a: [l_dd * e_lat[0], l_dd * e_lat[1]],
            heading,
            yaw_rate,
            yaw_acc,
        });
    }
    Ok(GroundTruth { rate_hz, samples })
}

struct NoiseGen {
    bias_f: Vector3<f64>,
    bias_w: Vector3<f64>,
    sigma_f: f64,
    sigma_w: f64,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl NoiseGen {
    fn new(spec: &ImuNoiseSpec, rate_hz: f64) -> Result<NoiseGen> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut signs = [0.0f64; 6];
        for s in signs.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let bias_w = Vector3::new(signs[0], signs[1], signs[2]) * spec.gyro_bias;
        let bias_f = Vector3::new(signs[3], signs[4], signs[5]) * spec.accel_bias;
        Ok(NoiseGen {
            bias_f,
            bias_w,
            sigma_f: spec.accel_noise_density * rate_hz.sqrt(),
            sigma_w: spec.gyro_noise_density * rate_hz.sqrt(),
            rng,
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
        })
    }

    fn perturb(&mut self, f: &mut Vector3<f64>, w: &mut Vector3<f64>) {
        for i in 0..3 {
            f[i] += self.bias_f[i] + self.sigma_f * self.normal.sample(&mut self.rng);
        }
        for i in 0..3 {
            w[i] += self.bias_w[i] + self.sigma_w * self.normal.sample(&mut self.rng);
        }
    }
}

/// Simulates the IMU at the center of a wheel whose center follows `gt`,
/// with an initial wheel phase of `alpha0`.
///
/// The spin rate is the wheel-center forward speed over the radius (ideal
/// rolling, no slip); the wheel phase is the trapezoidal integral of the
/// spin series. The specific force combines the gravity reaction and the
/// wheel-center acceleration, expressed in the spinning wheel frame through
/// the full frame chain (yaw → vehicle axes → mount axes → spin).
pub fn simulate_wheel_imu_at_phase(
    gt: &GroundTruth,
    geometry: &WheelGeometry,
    noise: Option<&ImuNoiseSpec>,
    alpha0: f64,
) -> Result<ImuSequence> {
    geometry.validate()?;
    if gt.samples.is_empty() {
        return Err(Error::EmptyInput("ground truth has no samples".into()));
    }
    let g_n = Vector3::new(0.0, 0.0, DEFAULT_GRAVITY);
    let mount_t = mount_to_vehicle().transpose(); // vehicle → de-spun axes

    // Spin series and its trapezoidal phase integral.
    let spin: Vec<f64> = gt
        .samples
        .iter()
        .map(|s| {
            let (sin, cos) = s.heading.sin_cos();
            let fwd_speed = s.v[0] * cos + s.v[1] * sin;
            fwd_speed / geometry.wheel_radius
        })
        .collect();
    let mut alphas = Vec::with_capacity(spin.len());
    let mut alpha = alpha0;
    alphas.push(alpha);
    for k in 1..spin.len() {
        alpha += 0.5 * (spin[k - 1] + spin[k]) * (gt.samples[k].t - gt.samples[k - 1].t);
        alphas.push(alpha);
    }

    let mut noise_gen = noise.map(|n| NoiseGen::new(n, gt.rate_hz)).transpose()?;
    let mut samples = Vec::with_capacity(gt.samples.len());
    for (k, s) in gt.samples.iter().enumerate() {
        let c_nb = rotation_z(s.heading)?;
        let f_b = c_nb * (Vector3::new(s.a[0], s.a[1], 0.0) - g_n);
        let w_b = Vector3::new(0.0, 0.0, s.yaw_rate);
        let c_dw = rotation_z(alphas[k])?;
        let mut f_w = c_dw * (mount_t * f_b);
        let mut w_w = c_dw * (mount_t * w_b) + Vector3::new(0.0, 0.0, spin[k]);
        if let Some(ng) = noise_gen.as_mut() {
            ng.perturb(&mut f_w, &mut w_w);
        }
        samples.push(ImuSample::new(s.t, f_w, w_w, Frame::Wheel)?);
    }
    ImuSequence::new(samples, gt.rate_hz)
}

/// [`simulate_wheel_imu_at_phase`] with a zero initial phase.
pub fn simulate_wheel_imu(
    gt: &GroundTruth,
    geometry: &WheelGeometry,
    noise: Option<&ImuNoiseSpec>,
) -> Result<ImuSequence> {
    simulate_wheel_imu_at_phase(gt, geometry, noise, 0.0)
}

/// Simulates a chassis-mounted IMU (the trivial zero-phase special case):
/// body-frame specific force and yaw rate, tagged `Body`.
pub fn simulate_body_imu(gt: &GroundTruth, noise: Option<&ImuNoiseSpec>) -> Result<ImuSequence> {
    if gt.samples.is_empty() {
        return Err(Error::EmptyInput("ground truth has no samples".into()));
    }
    let g_n = Vector3::new(0.0, 0.0, DEFAULT_GRAVITY);
    let mut noise_gen = noise.map(|n| NoiseGen::new(n, gt.rate_hz)).transpose()?;
    let mut samples = Vec::with_capacity(gt.samples.len());
    for s in &gt.samples {
        let c_nb = rotation_z(s.heading)?;
        let mut f_b = c_nb * (Vector3::new(s.a[0], s.a[1], 0.0) - g_n);
        let mut w_b = Vector3::new(0.0, 0.0, s.yaw_rate);
        if let Some(ng) = noise_gen.as_mut() {
            ng.perturb(&mut f_b, &mut w_b);
        }
        samples.push(ImuSample::new(s.t, f_b, w_b, Frame::Body)?);
    }
    ImuSequence::new(samples, gt.rate_hz)
}

/// Full synthetic session: stationary prologue, periodic motion, stationary
/// epilogue, written in the same CSV + column-map layout the ingestion side
/// consumes.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub traj: PeriodicTrajSpec,
    pub geometry: WheelGeometry,
    pub noise: Option<ImuNoiseSpec>,
    /// Stationary lead-in, s.
    pub prologue: f64,
    /// Stationary tail, s.
    pub epilogue: f64,
    /// Smooth speed ramp between rest and the constant-speed trajectory, s.
    pub ramp: f64,
    pub imu_rate_hz: f64,
    pub gnss_rate_hz: f64,
    /// Also write a chassis-mounted IMU stream.
    pub with_chassis: bool,
    pub trial_id: String,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            traj: PeriodicTrajSpec::default(),
            geometry: WheelGeometry::default(),
            noise: None,
            prologue: 10.0,
            epilogue: 10.0,
            ramp: 1.0,
            imu_rate_hz: 120.0,
            gnss_rate_hz: 5.0,
            with_chassis: false,
            trial_id: "synthetic".to_string(),
        }
    }
}

/// Smoothstep speed ramp along a fixed heading. `rising` accelerates from
/// rest to `speed` ending at `p_end`; otherwise it decelerates from `speed`
/// starting at `p_start`.
fn speed_ramp(
    anchor: [f64; 2],
    heading: f64,
    speed: f64,
    duration: f64,
    rate_hz: f64,
    rising: bool,
) -> GroundTruth {
    let n = (duration * rate_hz).round() as usize;
    let (sin, cos) = heading.sin_cos();
    let total = speed * duration / 2.0; // ∫ smoothstep = duration/2
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 / rate_hz;
            let u = (t / duration).clamp(0.0, 1.0);
            let sigma = 3.0 * u * u - 2.0 * u * u * u;
            let dist_rise = speed * duration * (u.powi(3) - u.powi(4) / 2.0);
            let (dist, s, a) = if rising {
                (dist_rise - total, speed * sigma, speed * (6.0 * u - 6.0 * u * u) / duration)
            } else {
                (speed * t - dist_rise, speed * (1.0 - sigma), -speed * (6.0 * u - 6.0 * u * u) / duration)
            };
            GtSample {
                t,
                p: [anchor[0] + dist * cos, anchor[1] + dist * sin],
                v: [s * cos, s * sin],
                a: [a * cos, a * sin],
                heading,
                yaw_rate: 0.0,
                yaw_acc: 0.0,
            }
        })
        .collect();
    GroundTruth { rate_hz, samples }
}

impl SessionSpec {
    /// The full session ground truth: stationary prologue, smooth ramp-up,
    /// the periodic trajectory, ramp-down, stationary epilogue.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let motion = gen_trajectory(&self.traj, self.imu_rate_hz)?;
        let first = motion.samples[0];
        let last = *motion.samples.last().expect("nonempty");
        let mut segments = Vec::new();
        let (rest_start, rest_end);
        if self.ramp > 0.0 {
            let s0 = (first.v[0] * first.v[0] + first.v[1] * first.v[1]).sqrt();
            let s1 = (last.v[0] * last.v[0] + last.v[1] * last.v[1]).sqrt();
            let mut up =
                speed_ramp(first.p, first.heading, s0, self.ramp, self.imu_rate_hz, true);
            up.samples.pop(); // motion supplies the junction sample
            let mut down =
                speed_ramp(last.p, last.heading, s1, self.ramp, self.imu_rate_hz, false);
            down.samples.remove(0);
            rest_start = up.samples[0].p;
            rest_end = down.samples.last().expect("nonempty").p;
            segments.push(GroundTruth::stationary(
                rest_start,
                first.heading,
                self.prologue,
                self.imu_rate_hz,
            ));
            segments.push(up);
            segments.push(motion);
            segments.push(down);
            segments.push(GroundTruth::stationary(
                rest_end,
                last.heading,
                self.epilogue,
                self.imu_rate_hz,
            ));
        } else {
            segments.push(GroundTruth::stationary(
                first.p,
                first.heading,
                self.prologue,
                self.imu_rate_hz,
            ));
            segments.push(motion);
            segments.push(GroundTruth::stationary(
                last.p,
                last.heading,
                self.epilogue,
                self.imu_rate_hz,
            ));
        }
        GroundTruth::concat(&segments)
    }
}

fn write_imu_csv(path: &std::path::Path, seq: &ImuSequence) -> Result<()> {
    let mut out = String::from("t,fx,fy,fz,wx,wy,wz\n");
    for s in seq.samples() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.f.x, s.f.y, s.f.z, s.w.x, s.w.y, s.w.z
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a session directory: per-stream IMU CSVs, the 5 Hz pseudo-RTK
/// track downsampled from the dense ground truth, the dense truth itself,
/// and the column-map config.
pub fn write_session(
    dir: &std::path::Path,
    gt_full: &GroundTruth,
    streams: &[(&str, &ImuSequence)],
    geometry: &WheelGeometry,
    gnss_rate_hz: f64,
    trial_id: &str,
    class: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let step = gt_full.rate_hz / gnss_rate_hz;
    if (step - step.round()).abs() > 1e-9 || step < 1.0 {
        return Err(Error::Config(format!(
            "IMU rate {} not an integer multiple of GNSS rate {gnss_rate_hz}",
            gt_full.rate_hz
        )));
    }
    let step = step.round() as usize;

    let mut gnss = String::from("t,x,y\n");
    for s in gt_full.samples.iter().step_by(step) {
        gnss.push_str(&format!("{},{},{}\n", s.t, s.p[0], s.p[1]));
    }
    let gnss_path = dir.join("gnss.csv");
    std::fs::write(&gnss_path, gnss).map_err(|e| Error::io(&gnss_path, e))?;

    gt_full.trajectory()?.write_csv(&dir.join("gt.csv"))?;

    let mut cfg = crate::kvcfg::KvConfig::new();
    cfg.set("session.id", trial_id);
    cfg.set("session.class", class);
    cfg.set("session.imu_rate_hz", gt_full.rate_hz);
    cfg.set("session.gnss_rate_hz", gnss_rate_hz);
    cfg.set("gnss.file", "gnss.csv");
    cfg.set("gnss.frame", "local");
    cfg.set("gnss.col.t", "t");
    cfg.set("gnss.col.x", "x");
    cfg.set("gnss.col.y", "y");
    cfg.set("gt.file", "gt.csv");
    cfg.set("geometry.wheelbase_m", geometry.wheelbase);
    cfg.set(
        "geometry.lever_front",
        format!("{},{}", geometry.lever_front[0], geometry.lever_front[1]),
    );
    cfg.set(
        "geometry.lever_rear",
        format!("{},{}", geometry.lever_rear[0], geometry.lever_rear[1]),
    );
    cfg.set("geometry.wheel_radius_m", geometry.wheel_radius);
    for (name, seq) in streams {
        let file = format!("{name}.csv");
        write_imu_csv(&dir.join(&file), seq)?;
        let frame = match seq.samples()[0].frame {
            Frame::Wheel => "wheel",
            Frame::Body => "body",
        };
        cfg.set(&format!("imu.{name}.file"), &file);
        cfg.set(&format!("imu.{name}.frame"), frame);
        for ch in ["t", "fx", "fy", "fz", "wx", "wy", "wz"] {
            cfg.set(&format!("imu.{name}.col.{ch}"), ch);
        }
        cfg.set(&format!("imu.{name}.unit.f"), "mps2");
        cfg.set(&format!("imu.{name}.unit.w"), "rads");
    }
    cfg.write(&dir.join(crate::dataio::SESSION_CONFIG_NAME))
}

/// Generates and writes a complete synthetic session.
pub fn simulate_session(dir: &std::path::Path, spec: &SessionSpec) -> Result<()> {
    spec.geometry.validate()?;
    let gt_full = spec.ground_truth()?;
    let derived_seed = |idx: u64| -> Option<ImuNoiseSpec> {
        spec.noise
            .as_ref()
            .map(|n| n.with_seed(n.seed.wrapping_mul(1000).wrapping_add(idx)))
    };
    let front = simulate_wheel_imu(
        &gt_full.translate(spec.geometry.lever_front),
        &spec.geometry,
        derived_seed(0).as_ref(),
    )?;
    let rear = simulate_wheel_imu(
        &gt_full.translate(spec.geometry.lever_rear),
        &spec.geometry,
        derived_seed(1).as_ref(),
    )?;
    let chassis = if spec.with_chassis {
        Some(simulate_body_imu(&gt_full, derived_seed(2).as_ref())?)
    } else {
        None
    };
    let class = if spec.traj.amplitude == 0.0 { "straight" } else { "periodic" };
    let mut streams: Vec<(&str, &ImuSequence)> = vec![("front", &front), ("rear", &rear)];
    if let Some(ch) = chassis.as_ref() {
        streams.push(("chassis", ch));
    }
    write_session(
        dir,
        &gt_full,
        &streams,
        &spec.geometry,
        spec.gnss_rate_hz,
        &spec.trial_id,
        class,
    )
}
