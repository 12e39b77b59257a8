//! Session ingestion, stream synchronization, per-wheel ground truth, and
//! training-window extraction.
//!
//! A recording session lives in a directory with one CSV per sensor stream
//! plus a `session.cfg` column-map file that names every channel column, its
//! unit, the GNSS frame, and the wheel geometry. Ingestion normalizes all
//! units to SI at the boundary; everything downstream works in rad/s, m/s²,
//! and meters.

mod session;
mod windows;

pub use session::{
    load_session, synchronize, ImuStreamSpec, RecordingSession, SessionConfig, SessionMeta,
    SyncInfo, TrajClass, SESSION_CONFIG_NAME,
};
pub use windows::{
    make_windows, make_windows_with_stride, read_windows, wheel_ground_truth,
    write_windows, TrainingWindow, WheelTracks, WindowSetMeta,
};

use crate::error::{Error, Result};

/// Geometry tying the GNSS antenna, the instrumented wheels, and the wheel
/// radius together. Lever arms are body-frame (x forward, y right), m.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelGeometry {
    /// Fixed distance between the two instrumented wheels, m.
    pub wheelbase: f64,
    /// Antenna→front-wheel lever arm, m.
    pub lever_front: [f64; 2],
    /// Antenna→rear-wheel lever arm, m.
    pub lever_rear: [f64; 2],
    /// Wheel radius, m (100 mm diameter wheels).
    pub wheel_radius: f64,
}

impl Default for WheelGeometry {
    fn default() -> Self {
        WheelGeometry {
            wheelbase: 0.192,
            lever_front: [0.096, -0.1625],
            lever_rear: [-0.096, -0.1625],
            wheel_radius: 0.05,
        }
    }
}

impl WheelGeometry {
    pub fn validate(&self) -> Result<()> {
        if !self.wheelbase.is_finite() || self.wheelbase <= 0.0 {
            return Err(Error::Config("wheelbase must be positive".into()));
        }
        if !self.wheel_radius.is_finite() || self.wheel_radius <= 0.0 {
            return Err(Error::Config("wheel radius must be positive".into()));
        }
        let dx = self.lever_front[0] - self.lever_rear[0];
        let dy = self.lever_front[1] - self.lever_rear[1];
        let d = (dx * dx + dy * dy).sqrt();
        if (d - self.wheelbase).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "lever arms imply wheel separation {d:.6} m, wheelbase says {:.6} m",
                self.wheelbase
            )));
        }
        Ok(())
    }

    pub fn lever(&self, wheel: WheelTag) -> [f64; 2] {
        match wheel {
            WheelTag::Front => self.lever_front,
            WheelTag::Rear => self.lever_rear,
        }
    }
}

/// Which instrumented wheel a window or stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WheelTag {
    Front,
    Rear,
}

impl WheelTag {
    pub fn name(&self) -> &'static str {
        match self {
            WheelTag::Front => "front",
            WheelTag::Rear => "rear",
        }
    }

    pub fn parse(s: &str) -> Result<WheelTag> {
        match s {
            "front" => Ok(WheelTag::Front),
            "rear" => Ok(WheelTag::Rear),
            other => Err(Error::InvalidArgument(format!("unknown wheel {other:?}"))),
        }
    }
}

impl std::fmt::Display for WheelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
