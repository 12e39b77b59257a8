//! Session directory layout, column-map parsing, CSV ingestion with unit
//! normalization, and stationary-prologue synchronization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kvcfg::KvConfig;
use crate::types::{
    geodetic_to_local, Frame, GnssFix, GnssPosition, ImuSample, ImuSequence, Trajectory,
    TrajPoint,
};

use super::WheelGeometry;

/// File name of the column-map config inside a session directory.
pub const SESSION_CONFIG_NAME: &str = "session.cfg";

/// Trajectory class recorded in the session metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajClass {
    Periodic,
    Straight,
}

impl TrajClass {
    pub fn name(&self) -> &'static str {
        match self {
            TrajClass::Periodic => "periodic",
            TrajClass::Straight => "straight",
        }
    }

    pub fn parse(s: &str) -> Result<TrajClass> {
        match s {
            "periodic" => Ok(TrajClass::Periodic),
            "straight" => Ok(TrajClass::Straight),
            other => Err(Error::Schema(format!("unknown trajectory class {other:?}"))),
        }
    }
}

/// Session-level metadata.
#[derive(Debug, Clone)]
pub struct SessionMeta {
    pub trial_id: String,
    pub class: TrajClass,
    pub imu_rate_hz: f64,
    pub gnss_rate_hz: f64,
    /// NaN-containing rows dropped during ingestion, per stream.
    pub dropped_rows: BTreeMap<String, usize>,
}

/// Clock offsets recovered from the stationary prologue, plus the detected
/// motion span on the GNSS clock.
#[derive(Debug, Clone)]
pub struct SyncInfo {
    /// Per-stream shift added to IMU timestamps, s.
    pub offsets: BTreeMap<String, f64>,
    pub motion_start: f64,
    pub motion_end: f64,
}

/// One parsed recording: named IMU streams, GNSS fixes in the local frame,
/// geometry, and optional dense ground truth.
#[derive(Debug, Clone)]
pub struct RecordingSession {
    pub imu: BTreeMap<String, ImuSequence>,
    pub gnss: Vec<GnssFix>,
    pub geometry: WheelGeometry,
    pub meta: SessionMeta,
    /// Dense reference trajectory, when the producer recorded one.
    pub gt: Option<Trajectory>,
    pub sync: Option<SyncInfo>,
}

impl RecordingSession {
    /// GNSS fixes as a planar trajectory.
    pub fn gnss_track(&self) -> Result<Trajectory> {
        let points = self
            .gnss
            .iter()
            .map(|f| match f.position {
                GnssPosition::LocalPlanar { x, y } => Ok(TrajPoint { t: f.t, x, y }),
                GnssPosition::Geodetic { .. } => Err(Error::FrameMismatch {
                    expected: "local-planar",
                    got: "geodetic",
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(points)
    }

    pub fn sync(&self) -> Result<&SyncInfo> {
        self.sync
            .as_ref()
            .ok_or_else(|| Error::Usage("session not synchronized yet".into()))
    }
}

/// Declared columns and units of one IMU stream.
#[derive(Debug, Clone)]
pub struct ImuStreamSpec {
    pub name: String,
    pub file: PathBuf,
    pub frame: Frame,
    /// Source column name per canonical channel t, fx, fy, fz, wx, wy, wz.
    pub columns: BTreeMap<String, String>,
    pub accel_unit: AccelUnit,
    pub gyro_unit: GyroUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccelUnit {
    MeterPerSecondSquared,
    G,
    MilliG,
}

impl AccelUnit {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "mps2" => Ok(AccelUnit::MeterPerSecondSquared),
            "g" => Ok(AccelUnit::G),
            "mg" => Ok(AccelUnit::MilliG),
            other => Err(Error::Schema(format!("unknown accel unit {other:?}"))),
        }
    }

    fn to_si(self, v: f64) -> f64 {
        match self {
            AccelUnit::MeterPerSecondSquared => v,
            AccelUnit::G => v * crate::types::STANDARD_GRAVITY,
            AccelUnit::MilliG => v * 1e-3 * crate::types::STANDARD_GRAVITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GyroUnit {
    RadPerSecond,
    DegPerSecond,
}

impl GyroUnit {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "rads" => Ok(GyroUnit::RadPerSecond),
            "degs" => Ok(GyroUnit::DegPerSecond),
            other => Err(Error::Schema(format!("unknown gyro unit {other:?}"))),
        }
    }

    fn to_si(self, v: f64) -> f64 {
        match self {
            GyroUnit::RadPerSecond => v,
            GyroUnit::DegPerSecond => v.to_radians(),
        }
    }
}

/// Parsed session.cfg.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub meta: SessionMeta,
    pub gnss_file: PathBuf,
    pub gnss_geodetic: bool,
    pub gnss_columns: BTreeMap<String, String>,
    pub imu_streams: Vec<ImuStreamSpec>,
    pub geometry: WheelGeometry,
    pub gt_file: Option<PathBuf>,
}

impl SessionConfig {
    pub fn load(dir: &Path) -> Result<SessionConfig> {
        let cfg = KvConfig::load(&dir.join(SESSION_CONFIG_NAME))?;
        let meta = SessionMeta {
            trial_id: cfg.require("session.id")?.to_string(),
            class: TrajClass::parse(cfg.require("session.class")?)?,
            imu_rate_hz: cfg.require_f64("session.imu_rate_hz")?,
            gnss_rate_hz: cfg.require_f64("session.gnss_rate_hz")?,
            dropped_rows: BTreeMap::new(),
        };
        let gnss_frame = cfg.require("gnss.frame")?;
        let gnss_geodetic = match gnss_frame {
            "geodetic" => true,
            "local" => false,
            other => return Err(Error::Schema(format!("unknown gnss frame {other:?}"))),
        };
        let mut gnss_columns = BTreeMap::new();
        for (k, v) in cfg.section("gnss.col") {
            gnss_columns.insert(k, v);
        }
        let needed: &[&str] = if gnss_geodetic { &["t", "lat", "lon"] } else { &["t", "x", "y"] };
        for ch in needed {
            if !gnss_columns.contains_key(*ch) {
                return Err(Error::Schema(format!("missing gnss.col.{ch} in column map")));
            }
        }

        // IMU stream names are discovered from imu.<name>.file keys.
        let mut names: Vec<String> = cfg
            .iter()
            .filter_map(|(k, _)| {
                k.strip_prefix("imu.")
                    .and_then(|rest| rest.strip_suffix(".file"))
                    .map(|s| s.to_string())
            })
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Schema("no imu.<name>.file entries in column map".into()));
        }
        let mut imu_streams = Vec::new();
        for name in names {
            let p = |suffix: &str| format!("imu.{name}.{suffix}");
            let frame = match cfg.require(&p("frame"))? {
                "wheel" => Frame::Wheel,
                "body" => Frame::Body,
                other => return Err(Error::Schema(format!("unknown imu frame {other:?}"))),
            };
            let mut columns = BTreeMap::new();
            for (k, v) in cfg.section(&p("col")) {
                columns.insert(k, v);
            }
            for ch in ["t", "fx", "fy", "fz", "wx", "wy", "wz"] {
                if !columns.contains_key(ch) {
                    return Err(Error::Schema(format!(
                        "missing imu.{name}.col.{ch} in column map"
                    )));
                }
            }
            imu_streams.push(ImuStreamSpec {
                file: dir.join(cfg.require(&p("file"))?),
                frame,
                columns,
                accel_unit: AccelUnit::parse(cfg.get(&p("unit.f")).unwrap_or("mps2"))?,
                gyro_unit: GyroUnit::parse(cfg.get(&p("unit.w")).unwrap_or("rads"))?,
                name,
            });
        }

        let geometry = WheelGeometry {
            wheelbase: cfg.require_f64("geometry.wheelbase_m")?,
            lever_front: cfg
                .get_pair("geometry.lever_front")?
                .ok_or_else(|| Error::Config("missing geometry.lever_front".into()))?,
            lever_rear: cfg
                .get_pair("geometry.lever_rear")?
                .ok_or_else(|| Error::Config("missing geometry.lever_rear".into()))?,
            wheel_radius: cfg.require_f64("geometry.wheel_radius_m")?,
        };
        geometry.validate()?;

        Ok(SessionConfig {
            meta,
            gnss_file: dir.join(cfg.require("gnss.file")?),
            gnss_geodetic,
            gnss_columns,
            imu_streams,
            geometry,
            gt_file: cfg.get("gt.file").map(|f| dir.join(f)),
        })
    }
}

/// Reads the named columns of a headered CSV. Rows containing a non-finite
/// value in any requested column are dropped and counted.
fn read_csv_columns(path: &Path, wanted: &[&str]) -> Result<(Vec<Vec<f64>>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let mut idx = Vec::with_capacity(wanted.len());
    for w in wanted {
        let i = cols.iter().position(|c| c == w).ok_or_else(|| {
            Error::Schema(format!("{}: missing column {w:?}", path.display()))
        })?;
        idx.push(i);
    }
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let mut row = Vec::with_capacity(idx.len());
        let mut ok = true;
        for &i in &idx {
            let field = fields.get(i).map(|f| f.trim()).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => {
                    ok = false;
                    break;
                }
                Err(e) => {
                    if field.eq_ignore_ascii_case("nan") || field.is_empty() {
                        ok = false;
                        break;
                    }
                    return Err(Error::Parse(format!(
                        "{} line {}: {e}",
                        path.display(),
                        ln + 2
                    )));
                }
            }
        }
        if ok {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }
    Ok((rows, dropped))
}

/// Loads and unit-normalizes a session directory.
pub fn load_session(dir: &Path) -> Result<RecordingSession> {
    let config = SessionConfig::load(dir)?;
    let mut meta = config.meta.clone();

    // GNSS fixes, converted to the local planar frame anchored at the first fix.
    let gnss = if config.gnss_geodetic {
        let cols = [
            config.gnss_columns["t"].as_str(),
            config.gnss_columns["lat"].as_str(),
            config.gnss_columns["lon"].as_str(),
        ];
        let (rows, dropped) = read_csv_columns(&config.gnss_file, &cols)?;
        meta.dropped_rows.insert("gnss".into(), dropped);
        if rows.is_empty() {
            return Err(Error::EmptyInput(format!("{}: no GNSS fixes", config.gnss_file.display())));
        }
        let origin = GnssFix {
            t: rows[0][0],
            position: GnssPosition::Geodetic { lat_deg: rows[0][1], lon_deg: rows[0][2], alt_m: 0.0 },
        };
        rows.iter()
            .map(|r| {
                let fix = GnssFix {
                    t: r[0],
                    position: GnssPosition::Geodetic { lat_deg: r[1], lon_deg: r[2], alt_m: 0.0 },
                };
                let (x, y) = geodetic_to_local(&fix, &origin)?;
                Ok(GnssFix { t: r[0], position: GnssPosition::LocalPlanar { x, y } })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let cols = [
            config.gnss_columns["t"].as_str(),
            config.gnss_columns["x"].as_str(),
            config.gnss_columns["y"].as_str(),
        ];
        let (rows, dropped) = read_csv_columns(&config.gnss_file, &cols)?;
        meta.dropped_rows.insert("gnss".into(), dropped);
        rows.iter()
            .map(|r| GnssFix { t: r[0], position: GnssPosition::LocalPlanar { x: r[1], y: r[2] } })
            .collect()
    };
    for pair in gnss.windows(2) {
        if pair[1].t <= pair[0].t {
            return Err(Error::Ordering(format!(
                "{}: GNSS timestamps not strictly increasing at t={}",
                config.gnss_file.display(),
                pair[1].t
            )));
        }
    }
    if gnss.is_empty() {
        return Err(Error::EmptyInput("session has no GNSS fixes".into()));
    }

    let mut imu = BTreeMap::new();
    for spec in &config.imu_streams {
        let cols = [
            spec.columns["t"].as_str(),
            spec.columns["fx"].as_str(),
            spec.columns["fy"].as_str(),
            spec.columns["fz"].as_str(),
            spec.columns["wx"].as_str(),
            spec.columns["wy"].as_str(),
            spec.columns["wz"].as_str(),
        ];
        let (rows, dropped) = read_csv_columns(&spec.file, &cols)?;
        meta.dropped_rows.insert(spec.name.clone(), dropped);
        let samples = rows
            .iter()
            .map(|r| {
                ImuSample::new(
                    r[0],
                    Vector3::new(
                        spec.accel_unit.to_si(r[1]),
                        spec.accel_unit.to_si(r[2]),
                        spec.accel_unit.to_si(r[3]),
                    ),
                    Vector3::new(
                        spec.gyro_unit.to_si(r[4]),
                        spec.gyro_unit.to_si(r[5]),
                        spec.gyro_unit.to_si(r[6]),
                    ),
                    spec.frame,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = ImuSequence::new(samples, meta.imu_rate_hz)?;
        imu.insert(spec.name.clone(), seq);
    }

    // Every stream must span the GNSS time range (within one IMU period).
    let (g0, g1) = (gnss[0].t, gnss[gnss.len() - 1].t);
    let slack = 1.0 / meta.imu_rate_hz + 1e-9;
    for (name, seq) in &imu {
        if seq.first_t() > g0 + slack || seq.last_t() < g1 - slack {
            return Err(Error::Schema(format!(
                "stream {name:?} spans [{:.3}, {:.3}] s, GNSS spans [{g0:.3}, {g1:.3}] s",
                seq.first_t(),
                seq.last_t()
            )));
        }
    }

    let gt = config
        .gt_file
        .as_ref()
        .map(|p| Trajectory::read_csv(p))
        .transpose()?;

    Ok(RecordingSession { imu, gnss, geometry: config.geometry, meta, gt, sync: None })
}

/// Motion-onset index in an IMU stream: the first sample where the gyro
/// magnitude or the deviation of the specific-force norm from its resting
/// value stays above threshold for a sustained run.
fn imu_motion_onset(seq: &ImuSequence) -> Option<usize> {
    const GYRO_THR: f64 = 0.15; // rad/s
    const ACCEL_THR: f64 = 0.25; // m/s²
    let samples = seq.samples();
    let rest_n = ((2.0 * seq.rate_hz()) as usize).clamp(1, samples.len());
    let f_rest: f64 =
        samples[..rest_n].iter().map(|s| s.f.norm()).sum::<f64>() / rest_n as f64;
    let sustain = ((0.1 * seq.rate_hz()) as usize).max(3);
    let exceeds = |s: &ImuSample| -> bool {
        s.w.norm() > GYRO_THR || (s.f.norm() - f_rest).abs() > ACCEL_THR
    };
    let mut run = 0usize;
    for (k, s) in samples.iter().enumerate() {
        if exceeds(s) {
            run += 1;
            if run >= sustain {
                return Some(k + 1 - run);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Distance the GNSS track crosses `thr` meters of cumulative travel,
/// interpolated within the crossing gap.
fn gnss_distance_crossing(gnss: &[GnssFix], thr: f64) -> Option<f64> {
    let pos = |f: &GnssFix| match f.position {
        GnssPosition::LocalPlanar { x, y } => (x, y),
        GnssPosition::Geodetic { .. } => (f64::NAN, f64::NAN),
    };
    let mut cum = 0.0;
    for pair in gnss.windows(2) {
        let (x0, y0) = pos(&pair[0]);
        let (x1, y1) = pos(&pair[1]);
        let d = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        if cum + d >= thr {
            let frac = if d > 0.0 { (thr - cum) / d } else { 0.0 };
            return Some(pair[0].t + frac * (pair[1].t - pair[0].t));
        }
        cum += d;
    }
    None
}

/// Time a wheel stream crosses `thr` meters of rolled distance, from the
/// trapezoidal integral of `|ω_z|·radius` with the rest-level rectified
/// noise floor subtracted.
fn wheel_distance_crossing(seq: &ImuSequence, radius: f64, thr: f64) -> Option<f64> {
    let samples = seq.samples();
    let rest_n = ((5.0 * seq.rate_hz()) as usize).clamp(1, samples.len() / 2);
    let floor: f64 =
        samples[..rest_n].iter().map(|s| s.w.z.abs()).sum::<f64>() / rest_n as f64;
    let rate = |s: &ImuSample| (s.w.z.abs() - floor).max(0.0) * radius;
    let mut cum = 0.0;
    for pair in samples.windows(2) {
        let d = 0.5 * (rate(&pair[0]) + rate(&pair[1])) * (pair[1].t - pair[0].t);
        if cum + d >= thr {
            let frac = if d > 0.0 { (thr - cum) / d } else { 0.0 };
            return Some(pair[0].t + frac * (pair[1].t - pair[0].t));
        }
        cum += d;
    }
    None
}

/// First and last sustained motion in the GNSS track, by fix speed.
fn gnss_motion_span(gnss: &[GnssFix]) -> Option<(f64, f64)> {
    const SPEED_THR: f64 = 0.05; // m/s
    let pos = |f: &GnssFix| match f.position {
        GnssPosition::LocalPlanar { x, y } => (x, y),
        GnssPosition::Geodetic { .. } => (f64::NAN, f64::NAN),
    };
    let moving: Vec<bool> = gnss
        .windows(2)
        .map(|p| {
            let (x0, y0) = pos(&p[0]);
            let (x1, y1) = pos(&p[1]);
            let v = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt() / (p[1].t - p[0].t);
            v > SPEED_THR
        })
        .collect();
    let sustain = 2usize;
    let mut start = None;
    let mut run = 0;
    for (k, &m) in moving.iter().enumerate() {
        if m {
            run += 1;
            if run >= sustain {
                start = Some(k + 1 - run);
                break;
            }
        } else {
            run = 0;
        }
    }
    let mut end = None;
    run = 0;
    for (k, &m) in moving.iter().enumerate().rev() {
        if m {
            run += 1;
            if run >= sustain {
                end = Some(k + run - 1);
                break;
            }
        } else {
            run = 0;
        }
    }
    match (start, end) {
        (Some(s), Some(e)) => Some((gnss[s].t, gnss[e + 1].t)),
        _ => None,
    }
}

/// Estimates per-stream clock offsets from the stationary prologue and the
/// motion onset, shifts every IMU clock onto GNSS time, and records the
/// motion span.
///
/// Wheel streams align the time their rolled distance (`∫|ω_z|·r`) crosses a
/// small threshold with the time the GNSS track crosses the same traveled
/// distance — a sub-fix estimate that is insensitive to the detector
/// thresholds. Body-mounted streams inherit the mean wheel offset (the
/// recorder synchronizes the IMUs to each other); if no wheel stream exists
/// they fall back to coarse onset alignment.
pub fn synchronize(mut session: RecordingSession) -> Result<RecordingSession> {
    const DIST_THR: f64 = 0.05; // m of travel used as the alignment event

    let (motion_start, motion_end) = gnss_motion_span(&session.gnss)
        .ok_or_else(|| Error::SyncFailure("no motion detected in the GNSS track".into()))?;
    let gnss_cross = gnss_distance_crossing(&session.gnss, DIST_THR)
        .ok_or_else(|| Error::SyncFailure("GNSS track never travels far enough to align".into()))?;

    let radius = session.geometry.wheel_radius;
    let mut offsets = BTreeMap::new();
    let names: Vec<String> = session.imu.keys().cloned().collect();
    let mut wheel_offsets = Vec::new();
    for name in &names {
        let seq = &session.imu[name];
        // Require a detectable excursion in every stream.
        let onset_idx = imu_motion_onset(seq).ok_or_else(|| {
            Error::SyncFailure(format!("no motion detected in stream {name:?}"))
        })?;
        if seq.samples()[0].frame == Frame::Wheel {
            let cross = wheel_distance_crossing(seq, radius, DIST_THR).ok_or_else(|| {
                Error::SyncFailure(format!("stream {name:?} never rolls far enough to align"))
            })?;
            let offset = gnss_cross - cross;
            wheel_offsets.push(offset);
            offsets.insert(name.clone(), offset);
        } else {
            // Placeholder refined below; remember the coarse onset.
            let onset_t = seq.samples()[onset_idx].t;
            offsets.insert(name.clone(), motion_start - onset_t);
        }
    }
    if !wheel_offsets.is_empty() {
        let mean = wheel_offsets.iter().sum::<f64>() / wheel_offsets.len() as f64;
        for name in &names {
            if session.imu[name].samples()[0].frame == Frame::Body {
                offsets.insert(name.clone(), mean);
            }
        }
    }
    for name in &names {
        let offset = offsets[name];
        session.imu.get_mut(name).expect("stream exists").shift_time(offset);
    }
    session.sync = Some(SyncInfo { offsets, motion_start, motion_end });
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_fix(t: f64, x: f64, y: f64) -> GnssFix {
        GnssFix { t, position: GnssPosition::LocalPlanar { x, y } }
    }

    /// A session built in memory: stationary 10 s, constant-speed motion, stationary 10 s.
    fn synthetic_session(stream_shift: f64) -> RecordingSession {
        let rate = 120.0;
        let dt = 1.0 / rate;
        let speed = 0.4;
        let spin = speed / 0.05;
        let (pro, motion, epi) = (10.0, 20.0, 10.0);
        let total = pro + motion + epi;
        let n = (total * rate) as usize;
        let samples: Vec<ImuSample> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt + stream_shift;
                let moving = k as f64 * dt >= pro && k as f64 * dt < pro + motion;
                let w = if moving { Vector3::new(0.0, 0.0, spin) } else { Vector3::zeros() };
                ImuSample::new(t, Vector3::new(0.0, -9.7953, 0.0), w, Frame::Wheel).unwrap()
            })
            .collect();
        let seq = ImuSequence::new(samples, rate).unwrap();

        let gnss: Vec<GnssFix> = (0..=(total * 5.0) as usize)
            .map(|k| {
                let t = k as f64 / 5.0;
                let x = (t - pro).clamp(0.0, motion) * speed;
                local_fix(t, x, 0.0)
            })
            .collect();

        let mut imu = BTreeMap::new();
        imu.insert("front".to_string(), seq);
        RecordingSession {
            imu,
            gnss,
            geometry: WheelGeometry::default(),
            meta: SessionMeta {
                trial_id: "mem".into(),
                class: TrajClass::Straight,
                imu_rate_hz: rate,
                gnss_rate_hz: 5.0,
                dropped_rows: BTreeMap::new(),
            },
            gt: None,
            sync: None,
        }
    }

    #[test]
    fn synchronize_recovers_known_shift() {
        let session = synthetic_session(-0.5);
        let synced = synchronize(session).unwrap();
        let off = synced.sync.as_ref().unwrap().offsets["front"];
        assert!((off - 0.5).abs() <= 1.0 / 120.0 + 1e-9, "offset {off}");
    }

    #[test]
    fn synchronize_aligned_streams_get_near_zero_offset() {
        let synced = synchronize(synthetic_session(0.0)).unwrap();
        let off = synced.sync.as_ref().unwrap().offsets["front"];
        assert!(off.abs() <= 1.0 / 120.0 + 1e-9, "offset {off}");
    }

    #[test]
    fn synchronize_motion_span_matches_construction() {
        let synced = synchronize(synthetic_session(0.0)).unwrap();
        let sync = synced.sync.as_ref().unwrap();
        assert!((sync.motion_start - 10.0).abs() <= 0.4);
        assert!((sync.motion_end - 30.0).abs() <= 0.4);
    }

    #[test]
    fn all_stationary_session_is_sync_failure() {
        let mut session = synthetic_session(0.0);
        // Flatten both the IMU and the GNSS track.
        let rate = session.meta.imu_rate_hz;
        let samples: Vec<ImuSample> = session.imu["front"]
            .samples()
            .iter()
            .map(|s| ImuSample::new(s.t, s.f, Vector3::zeros(), s.frame).unwrap())
            .collect();
        session.imu.insert("front".into(), ImuSequence::new(samples, rate).unwrap());
        session.gnss = session
            .gnss
            .iter()
            .map(|f| local_fix(f.t, 0.0, 0.0))
            .collect();
        assert!(matches!(
            synchronize(session),
            Err(Error::SyncFailure(_))
        ));
    }
}
