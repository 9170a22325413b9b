//! Glitch detection and mitigation for low-cost IMU streams.
//!
//! Ground-contact shocks put short, physically implausible bursts into cheap
//! accelerometer data; double integration then turns them into runaway pose
//! drift. This crate detects such bursts — either per sample against a
//! deviation threshold, or per slice by dynamic-time-warping distance to a
//! library of known-good motion templates — and repairs them by clamping,
//! averaging, or substituting the best-matching template. A strapdown
//! integrator with an optional pose anchor and a trajectory evaluation
//! toolkit (aligned ATE, relative translation/yaw errors over fixed path
//! lengths) quantify how much the cleanup buys.
//!
//! Modules follow the data flow: [`sim`] makes streams, [`detect`] flags
//! faults, [`mitigate`] repairs them, [`ins`] integrates, [`eval`] scores,
//! and [`pipeline`] wires a whole comparison run together.

pub mod detect;
pub mod dtw;
mod error;
pub mod eval;
pub mod ins;
pub mod io;
pub mod mitigate;
pub mod pipeline;
pub mod quat;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
