//! Spacecraft attitude estimation with fault detection, isolation and
//! recovery.
//!
//! The crate simulates a rigid spacecraft in a Keplerian orbit (optionally
//! torqued by gravity gradient), generates gyro, star-tracker and
//! magnetometer measurements with injectable faults, and estimates the
//! attitude with an EKF, UKF or particle filter. Innovation statistics
//! drive detection (single-step and moving-average NIS tests), per-sensor
//! isolation, and recovery by update skipping, redundant-sensor fusion or
//! gyro-bias augmentation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attitude;
pub mod dynamics;
pub mod error;
pub mod fdir;
pub mod filters;
pub mod sensors;
pub mod sim;

pub use error::{Error, Result};
