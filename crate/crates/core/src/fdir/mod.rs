//! Fault detection, isolation and recovery on top of the filters.
//!
//! Detection compares the normalized innovation squared against a χ²
//! threshold, either per step or averaged over a window. Isolation repeats
//! the test per sensor with that sensor's reduced degrees of freedom.
//! Recovery either skips the update, drops the flagged sensors' rows, or
//! (for gyro bias) estimates the fault as extra states.

mod chi2;
mod monitor;
mod record;
mod recovery;

pub use chi2::{chi2_cdf, chi2_quantile};
pub use monitor::{
    innovation_filter_check, isolate, per_sensor_nis, sequence_monitor_update, Decision, DetectorConfig,
    FaultReport, FdirMode, FdirMonitor, NisWindow, SensorNis,
};
pub use record::{compute_nis, InnovationRecord};
pub use recovery::{make_bias_augmented_model, slice_valid, BiasAugmentation, ValidMeasurement};
