//! Per-wheel ground truth from the GNSS track and training-window
//! extraction.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensornet::Tensor;
use crate::types::{Trajectory, TrajPoint};

use super::{RecordingSession, WheelGeometry, WheelTag};

/// Ground-truth tracks of both instrumented wheels.
#[derive(Debug, Clone)]
pub struct WheelTracks {
    pub front: Trajectory,
    pub rear: Trajectory,
}

impl WheelTracks {
    pub fn get(&self, wheel: WheelTag) -> &Trajectory {
        match wheel {
            WheelTag::Front => &self.front,
            WheelTag::Rear => &self.rear,
        }
    }
}

/// Minimum fix speed for a defined course heading, m/s.
const HEADING_SPEED_MIN: f64 = 0.01;

/// Course heading per fix from central differences of positions; fixes
/// slower than 1 cm/s hold the last defined heading (leading undefined fixes
/// take the first defined one).
fn course_headings(track: &[TrajPoint]) -> Result<Vec<f64>> {
    let n = track.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 fixes for course headings, got {n}"
        )));
    }
    let mut raw: Vec<Option<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = if k == 0 {
            (track[0], track[1])
        } else if k == n - 1 {
            (track[n - 2], track[n - 1])
        } else {
            (track[k - 1], track[k + 1])
        };
        let (dx, dy, dt) = (b.x - a.x, b.y - a.y, b.t - a.t);
        let speed = (dx * dx + dy * dy).sqrt() / dt;
        raw.push(if speed >= HEADING_SPEED_MIN { Some(dy.atan2(dx)) } else { None });
    }
    let first_valid = raw
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or_else(|| Error::EmptyInput("no motion in track: headings undefined".into()))?;
    let mut headings = Vec::with_capacity(n);
    let mut last = first_valid;
    for h in raw {
        if let Some(v) = h {
            last = v;
        }
        headings.push(last);
    }
    Ok(headings)
}

/// Translates the antenna track to both wheel positions using the course
/// heading at each fix: `wheel = antenna + R(ψ)·lever`.
pub fn wheel_ground_truth(track: &Trajectory, geometry: &WheelGeometry) -> Result<WheelTracks> {
    geometry.validate()?;
    let pts = track.points();
    let headings = course_headings(pts)?;
    let translate = |lever: [f64; 2]| -> Result<Trajectory> {
        Trajectory::new(
            pts.iter()
                .zip(&headings)
                .map(|(p, &psi)| {
                    let (s, c) = psi.sin_cos();
                    TrajPoint {
                        t: p.t,
                        x: p.x + c * lever[0] - s * lever[1],
                        y: p.y + s * lever[0] + c * lever[1],
                    }
                })
                .collect(),
        )
    };
    Ok(WheelTracks {
        front: translate(geometry.lever_front)?,
        rear: translate(geometry.lever_rear)?,
    })
}

/// One aligned training example: raw wheel-IMU window plus the per-interval
/// displacement targets derived from consecutive GNSS-RTK fixes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    /// Specific force, (3, window) — axes × time, wheel frame, m/s².
    pub acc: Tensor,
    /// Angular rate, (3, window), rad/s.
    pub gyro: Tensor,
    /// Per-interval planar wheel displacements, m.
    pub target: Vec<[f64; 2]>,
    /// Wheel position at the start of each interval (for the wheelbase
    /// constraint), m.
    pub anchors: Vec<[f64; 2]>,
    /// Window start on the GNSS clock, s.
    pub t_start: f64,
    pub wheel: WheelTag,
}

/// Extracts non-overlapping windows aligned to GNSS fixes.
pub fn make_windows(
    session: &RecordingSession,
    wheel: WheelTag,
    geometry: &WheelGeometry,
) -> Result<Vec<TrainingWindow>> {
    make_windows_with_stride(session, wheel, geometry, 5)
}

/// Window extraction with a configurable stride in GNSS fixes (5 =
/// non-overlapping one-second windows; smaller strides overlap).
pub fn make_windows_with_stride(
    session: &RecordingSession,
    wheel: WheelTag,
    geometry: &WheelGeometry,
    stride_fixes: usize,
) -> Result<Vec<TrainingWindow>> {
    if stride_fixes == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1 fix".into()));
    }
    let sync = session.sync()?;
    let seq = session
        .imu
        .get(wheel.name())
        .ok_or_else(|| Error::Schema(format!("session has no stream {:?}", wheel.name())))?;
    let dt = seq.dt();
    let intervals = 5usize;
    let window = (session.meta.imu_rate_hz / session.meta.gnss_rate_hz).round() as usize
        * intervals; // 24 IMU samples per fix gap × 5 gaps

    let track = session.gnss_track()?;
    let fixes: Vec<TrajPoint> = track
        .points()
        .iter()
        .copied()
        .filter(|p| p.t >= sync.motion_start - 1e-9 && p.t <= sync.motion_end + 1e-9)
        .collect();
    if fixes.len() < intervals + 1 {
        eprintln!(
            "warning: only {} GNSS fixes in motion, no windows produced",
            fixes.len()
        );
        return Ok(Vec::new());
    }
    let motion_track = Trajectory::new(fixes)?;
    let wheels = wheel_ground_truth(&motion_track, geometry)?;
    let wheel_track = wheels.get(wheel).points();

    let samples = seq.samples();
    let mut windows = Vec::new();
    let mut skipped = 0usize;
    let mut start_fix = 0;
    while start_fix + intervals < wheel_track.len() {
        let t0 = wheel_track[start_fix].t;
        // Nearest IMU sample to the window start.
        let idx = samples.partition_point(|s| s.t < t0 - dt / 2.0);
        if idx + window > samples.len() || (samples[idx].t - t0).abs() > dt {
            skipped += 1;
            start_fix += stride_fixes;
            continue;
        }
        let mut acc = vec![0.0; 3 * window];
        let mut gyro = vec![0.0; 3 * window];
        for (j, s) in samples[idx..idx + window].iter().enumerate() {
            for axis in 0..3 {
                acc[axis * window + j] = s.f[axis];
                gyro[axis * window + j] = s.w[axis];
            }
        }
        let target: Vec<[f64; 2]> = (0..intervals)
            .map(|i| {
                let (a, b) = (wheel_track[start_fix + i], wheel_track[start_fix + i + 1]);
                [b.x - a.x, b.y - a.y]
            })
            .collect();
        let anchors: Vec<[f64; 2]> = (0..intervals)
            .map(|i| {
                let p = wheel_track[start_fix + i];
                [p.x, p.y]
            })
            .collect();
        windows.push(TrainingWindow {
            acc: Tensor::new(vec![3, window], acc)?,
            gyro: Tensor::new(vec![3, window], gyro)?,
            target,
            anchors,
            t_start: t0,
            wheel,
        });
        start_fix += stride_fixes;
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} windows with IMU gaps or misalignment");
    }
    Ok(windows)
}

/// Metadata header of a window bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSetMeta {
    pub window: usize,
    pub intervals: usize,
    pub rate_hz: f64,
    pub source: String,
}

const BUNDLE_TAG: &str = "wmiwin";
const BUNDLE_VERSION: u32 = 1;

/// Writes a window bundle (versioned text container, bit-exact round trip).
pub fn write_windows(path: &Path, windows: &[TrainingWindow], meta: &WindowSetMeta) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io_err = |e: std::io::Error| Error::io(path, e);
    writeln!(w, "{BUNDLE_TAG} {BUNDLE_VERSION}").map_err(io_err)?;
    writeln!(w, "window {}", meta.window).map_err(io_err)?;
    writeln!(w, "intervals {}", meta.intervals).map_err(io_err)?;
    writeln!(w, "rate_hz {}", meta.rate_hz).map_err(io_err)?;
    writeln!(w, "source {}", meta.source).map_err(io_err)?;
    writeln!(w, "count {}", windows.len()).map_err(io_err)?;
    let fmt_row = |vals: &[f64]| -> String {
        let parts: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
        parts.join(" ")
    };
    for win in windows {
        writeln!(w, "window_at {} {}", win.t_start, win.wheel).map_err(io_err)?;
        let n = meta.window;
        for axis in 0..3 {
            writeln!(w, "acc{axis} {}", fmt_row(&win.acc.data()[axis * n..(axis + 1) * n]))
                .map_err(io_err)?;
        }
        for axis in 0..3 {
            writeln!(w, "gyro{axis} {}", fmt_row(&win.gyro.data()[axis * n..(axis + 1) * n]))
                .map_err(io_err)?;
        }
        let flat_t: Vec<f64> = win.target.iter().flatten().copied().collect();
        let flat_a: Vec<f64> = win.anchors.iter().flatten().copied().collect();
        writeln!(w, "target {}", fmt_row(&flat_t)).map_err(io_err)?;
        writeln!(w, "anchor {}", fmt_row(&flat_a)).map_err(io_err)?;
    }
    writeln!(w, "end").map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads a window bundle back.
pub fn read_windows(path: &Path) -> Result<(WindowSetMeta, Vec<TrainingWindow>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let r = BufReader::new(f);
    let mut lines = r.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("{}: truncated bundle", path.display())))?
            .map_err(|e| Error::io(path, e))
    };
    let header = next_line()?;
    if header != format!("{BUNDLE_TAG} {BUNDLE_VERSION}") {
        return Err(Error::Parse(format!("{}: bad header {header:?}", path.display())));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = next_line()?;
        line.strip_prefix(&format!("{name} "))
            .map(|s| s.to_string())
            .ok_or_else(|| Error::Parse(format!("{}: expected {name}, got {line:?}", path.display())))
    };
    let window: usize = field("window")?.parse().map_err(|e| Error::Parse(format!("window: {e}")))?;
    let intervals: usize =
        field("intervals")?.parse().map_err(|e| Error::Parse(format!("intervals: {e}")))?;
    let rate_hz: f64 = field("rate_hz")?.parse().map_err(|e| Error::Parse(format!("rate_hz: {e}")))?;
    let source = field("source")?;
    let count: usize = field("count")?.parse().map_err(|e| Error::Parse(format!("count: {e}")))?;
    let meta = WindowSetMeta { window, intervals, rate_hz, source };

    let parse_row = |line: &str, name: &str, expect: usize| -> Result<Vec<f64>> {
        let body = line
            .strip_prefix(&format!("{name} "))
            .ok_or_else(|| Error::Parse(format!("expected {name}, got {line:?}")))?;
        let vals = body
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| Error::Parse(format!("{name}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != expect {
            return Err(Error::Parse(format!(
                "{name}: expected {expect} values, got {}",
                vals.len()
            )));
        }
        Ok(vals)
    };

    let mut windows = Vec::with_capacity(count);
    for _ in 0..count {
        let head = next_line()?;
        let rest = head
            .strip_prefix("window_at ")
            .ok_or_else(|| Error::Parse(format!("expected window_at, got {head:?}")))?;
        let mut parts = rest.split_whitespace();
        let t_start: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse("window_at: missing t".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("window_at: {e}")))?;
        let wheel = WheelTag::parse(
            parts.next().ok_or_else(|| Error::Parse("window_at: missing wheel".into()))?,
        )?;
        let mut acc = vec![0.0; 3 * window];
        for axis in 0..3 {
            let row = parse_row(&next_line()?, &format!("acc{axis}"), window)?;
            acc[axis * window..(axis + 1) * window].copy_from_slice(&row);
        }
        let mut gyro = vec![0.0; 3 * window];
        for axis in 0..3 {
            let row = parse_row(&next_line()?, &format!("gyro{axis}"), window)?;
            gyro[axis * window..(axis + 1) * window].copy_from_slice(&row);
        }
        let t_row = parse_row(&next_line()?, "target", 2 * intervals)?;
        let a_row = parse_row(&next_line()?, "anchor", 2 * intervals)?;
        windows.push(TrainingWindow {
            acc: Tensor::new(vec![3, window], acc)?,
            gyro: Tensor::new(vec![3, window], gyro)?,
            target: t_row.chunks(2).map(|c| [c[0], c[1]]).collect(),
            anchors: a_row.chunks(2).map(|c| [c[0], c[1]]).collect(),
            t_start,
            wheel,
        });
    }
    if next_line()? != "end" {
        return Err(Error::Parse(format!("{}: missing end marker", path.display())));
    }
    Ok((meta, windows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_east_track(n: usize, speed: f64) -> Trajectory {
        Trajectory::new(
            (0..n)
                .map(|k| TrajPoint { t: k as f64 * 0.2, x: 0.0, y: speed * k as f64 * 0.2 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn straight_east_track_left_lever_offsets_north() {
        // Heading east; a body-left lever (negative y in the x-forward,
        // y-right convention) puts the wheel track d/2 north of the antenna.
        let d = 0.192;
        let geom = WheelGeometry {
            wheelbase: d,
            lever_front: [0.0, -d / 2.0],
            lever_rear: [0.0, d / 2.0],
            wheel_radius: 0.05,
        };
        let track = straight_east_track(30, 0.4);
        let wt = wheel_ground_truth(&track, &geom).unwrap();
        for (p, q) in track.points().iter().zip(wt.front.points()) {
            assert!((q.x - (p.x + d / 2.0)).abs() < 1e-12);
            assert!((q.y - p.y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_levers_reproduce_antenna_track() {
        let geom = WheelGeometry {
            wheelbase: 0.192,
            lever_front: [0.096, 0.0],
            lever_rear: [-0.096, 0.0],
            wheel_radius: 0.05,
        };
        // Zero-lever variant: both wheels at the antenna.
        let geom0 = WheelGeometry {
            wheelbase: 1e-12,
            lever_front: [0.0, 0.0],
            lever_rear: [0.0, 0.0],
            wheel_radius: 0.05,
        };
        // wheelbase must stay positive; bypass validation by testing front
        // lever of the regular geometry against a shifted expectation
        // instead.
        let _ = geom;
        let track = straight_east_track(30, 0.4);
        let wt = wheel_ground_truth(&track, &geom0).unwrap();
        for (p, q) in track.points().iter().zip(wt.front.points()) {
            assert!((q.x - p.x).abs() < 1e-12 && (q.y - p.y).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_track_preserves_wheel_separation() {
        // Antenna on a 2 m circle; wheels offset by the default levers.
        let geom = WheelGeometry::default();
        let n = 200;
        let pts: Vec<TrajPoint> = (0..n)
            .map(|k| {
                let th = k as f64 * 0.02;
                TrajPoint { t: k as f64 * 0.2, x: 2.0 * th.cos(), y: 2.0 * th.sin() }
            })
            .collect();
        let track = Trajectory::new(pts).unwrap();
        let wt = wheel_ground_truth(&track, &geom).unwrap();
        for (f, r) in wt.front.points().iter().zip(wt.rear.points()) {
            let d = ((f.x - r.x).powi(2) + (f.y - r.y).powi(2)).sqrt();
            assert!((d - geom.wheelbase).abs() < 1e-6, "separation {d}");
        }
    }

    #[test]
    fn slow_fixes_hold_last_heading() {
        // Motion east, then a dead stop: heading at the trailing stationary
        // fixes holds the last moving course.
        let mut pts: Vec<TrajPoint> = (0..20)
            .map(|k| TrajPoint { t: k as f64 * 0.2, x: 0.0, y: 0.4 * k as f64 * 0.2 })
            .collect();
        let last_y = pts.last().unwrap().y;
        for k in 0..10 {
            pts.push(TrajPoint { t: (20 + k) as f64 * 0.2, x: 0.0, y: last_y });
        }
        let track = Trajectory::new(pts).unwrap();
        let d = 0.192;
        let geom = WheelGeometry {
            wheelbase: d,
            lever_front: [0.0, -d / 2.0],
            lever_rear: [0.0, d / 2.0],
            wheel_radius: 0.05,
        };
        let wt = wheel_ground_truth(&track, &geom).unwrap();
        let stationary = &wt.front.points()[22..];
        for q in stationary {
            assert!((q.x - d / 2.0).abs() < 1e-9, "held heading broken: {}", q.x);
        }
    }

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let win = TrainingWindow {
            acc: Tensor::new(vec![3, 4], (0..12).map(|v| v as f64 * 0.1).collect()).unwrap(),
            gyro: Tensor::new(vec![3, 4], (0..12).map(|v| v as f64 - 5.5).collect()).unwrap(),
            target: vec![[0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8], [0.9, 1.0]],
            anchors: vec![[0.0; 2]; 5],
            t_start: 10.2,
            wheel: WheelTag::Rear,
        };
        let meta = WindowSetMeta { window: 4, intervals: 5, rate_hz: 120.0, source: "test".into() };
        let dir = std::env::temp_dir().join("wminav_bundle_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.win");
        write_windows(&path, std::slice::from_ref(&win), &meta).unwrap();
        let (meta2, wins) = read_windows(&path).unwrap();
        assert_eq!(meta, meta2);
        assert_eq!(wins.len(), 1);
        assert_eq!(wins[0], win);
    }
}
