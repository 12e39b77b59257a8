//! Wheel-mounted inertial navigation toolkit.
//!
//! A mobile robot carrying an IMU at a wheel center can dead-reckon its
//! position from inertial data alone. This crate implements that pipeline
//! end to end:
//!
//! - [`mechanizer`]: model-based strapdown dead reckoning from the
//!   wheel-mounted IMU (phase-angle de-spinning plus the strapdown
//!   equations of motion).
//! - [`tensornet`]: a small differentiable tensor engine (conv2d, dense,
//!   ReLU, MSE, reverse-mode gradients, SGD/Adam).
//! - [`wminet`]: the learned displacement regressor — a multi-head 2D-CNN
//!   over one-second accelerometer/gyroscope windows, trained with MSE or
//!   with an additional wheelbase-constraint term over two wheels.
//! - [`simkit`]: synthetic periodic trajectories and the wheel IMU signals
//!   they induce, with a configurable sensor error model — the independent
//!   oracle used to verify the mechanizer and to exercise training at desk
//!   scale.
//! - [`dataio`]: session ingestion (CSV + column-map config), stream
//!   synchronization from stationary prologues, per-wheel ground truth, and
//!   training-window extraction.
//! - [`evalkit`]: PRMSE/TDE metrics, trajectory reconstruction helpers, and
//!   the baselines (model-based dead reckoning; distance-plus-heading
//!   updates with a Madgwick heading filter).
//! - [`cli`]: the `wminav` command-line entry point.
//!
//! Frame conventions are documented in [`types`].

pub mod cli;
pub mod dataio;
pub mod error;
pub mod evalkit;
pub mod kvcfg;
pub mod mechanizer;
pub mod simkit;
pub mod tensornet;
pub mod types;
pub mod wminet;

pub use error::{Error, Result};
