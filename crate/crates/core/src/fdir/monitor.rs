use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sensors::{SensorKind, SliceMap};

use super::chi2::chi2_quantile;
use super::record::{compute_nis, InnovationRecord};

/// Detector settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Confidence level of the χ² threshold.
    pub alpha: f64,
    /// Moving-average window length for sequence monitoring, in samples.
    pub window: usize,
    /// In sequence mode, also keep one window per sensor and drop sensors
    /// whose own average exceeds their threshold.
    pub per_sensor: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            window: 20,
            per_sensor: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("fdir.alpha", "must lie strictly between 0 and 1"));
        }
        if self.window == 0 {
            return Err(Error::config("fdir.window", "must be at least 1"));
        }
        Ok(())
    }

    pub fn threshold(&self, dof: usize) -> Result<f64> {
        chi2_quantile(dof, self.alpha)
    }
}

/// Outcome of one detector evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultReport {
    pub t: f64,
    pub detected: bool,
    pub isolated: Vec<SensorKind>,
    pub statistic: f64,
    pub threshold: f64,
    pub dof: usize,
}

impl FaultReport {
    fn new(t: f64, statistic: f64, threshold: f64, dof: usize) -> Self {
        Self {
            t,
            detected: statistic > threshold,
            isolated: Vec::new(),
            statistic,
            threshold,
            dof,
        }
    }

    /// Bitmask of isolated sensors (see [`SensorKind::bit`]).
    pub fn isolated_mask(&self) -> u32 {
        self.isolated.iter().fold(0, |m, k| m | k.bit())
    }
}

impl fmt::Display for FaultReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={:.1} detected={} statistic={:.3} threshold={:.3} dof={}",
            self.t, self.detected, self.statistic, self.threshold, self.dof
        )?;
        if !self.isolated.is_empty() {
            let names: Vec<_> = self.isolated.iter().map(|k| k.name()).collect();
            write!(f, " isolated={}", names.join(","))?;
        }
        Ok(())
    }
}

/// Ring buffer of the most recent NIS values.
#[derive(Clone, Debug, PartialEq)]
pub struct NisWindow {
    values: VecDeque<f64>,
    capacity: usize,
}

impl NisWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, nis: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(nis);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    /// Mean over the current contents; during warm-up this is the mean of
    /// however many samples have been pushed.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Single-step test `NIS > χ²_{k,α}` with `k = dim ν`.
pub fn innovation_filter_check(record: &InnovationRecord, cfg: &DetectorConfig) -> Result<FaultReport> {
    let dof = record.dof();
    Ok(FaultReport::new(record.t, record.nis, cfg.threshold(dof)?, dof))
}

/// Pushes `nis` and tests the window average against `χ²_{dof,α}`.
///
/// The average of `N` independent χ²_k samples is much tighter than χ²_k
/// itself, so this threshold is conservative.
pub fn sequence_monitor_update(
    window: &mut NisWindow,
    nis: f64,
    dof: usize,
    t: f64,
    cfg: &DetectorConfig,
) -> Result<FaultReport> {
    window.push(nis);
    Ok(FaultReport::new(t, window.mean(), cfg.threshold(dof)?, dof))
}

/// NIS restricted to one sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorNis {
    pub sensor: SensorKind,
    pub nis: f64,
    pub dof: usize,
}

/// Per-sensor NIS from the sensor's rows of `ν` and its diagonal block of
/// `S`. For the EKF that block is `H_i·Σ⁻·H_iᵀ + R_i`; the UKF and PF
/// blocks are the corresponding rows of their predicted measurement
/// covariance.
pub fn per_sensor_nis(record: &InnovationRecord, slices: &SliceMap) -> Result<Vec<SensorNis>> {
    if slices.dim() != record.dof() {
        return Err(Error::DimensionMismatch(format!(
            "slice map covers {} rows, innovation has {}",
            slices.dim(),
            record.dof()
        )));
    }
    slices
        .iter()
        .map(|(sensor, rows)| {
            let dof = rows.len();
            let nu = record.nu.rows(rows.start, dof).into_owned();
            let s = record.s.view((rows.start, rows.start), (dof, dof)).into_owned();
            Ok(SensorNis {
                sensor,
                nis: compute_nis(&nu, &s)?,
                dof,
            })
        })
        .collect()
}

/// Sensors whose own NIS exceeds `χ²_{dof_i,α}`.
pub fn isolate(record: &InnovationRecord, slices: &SliceMap, cfg: &DetectorConfig) -> Result<Vec<SensorKind>> {
    let mut flagged = Vec::new();
    for s in per_sensor_nis(record, slices)? {
        if s.nis > cfg.threshold(s.dof)? {
            flagged.push(s.sensor);
        }
    }
    Ok(flagged)
}

/// How detections feed back into the filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FdirMode {
    /// Detector statistics are reported but never acted on.
    #[default]
    None,
    /// Skip the update when the single-step NIS exceeds the threshold.
    Innovation,
    /// Skip the update when the windowed mean NIS exceeds the threshold.
    Sequence,
    /// Update with only the sensors whose own NIS passes.
    Isolation,
}

impl FdirMode {
    pub fn name(self) -> &'static str {
        match self {
            FdirMode::None => "none",
            FdirMode::Innovation => "innovation",
            FdirMode::Sequence => "sequence",
            FdirMode::Isolation => "isolation",
        }
    }
}

impl FromStr for FdirMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FdirMode::None),
            "innovation" => Ok(FdirMode::Innovation),
            "sequence" => Ok(FdirMode::Sequence),
            "isolation" => Ok(FdirMode::Isolation),
            other => Err(Error::InvalidArgument(format!("unknown fdir mode `{other}`"))),
        }
    }
}

/// What the filter should do with the current measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub report: FaultReport,
    /// Measurement rows to update with; empty means prediction only.
    pub rows: Vec<usize>,
}

impl Decision {
    pub fn skipped(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Stateful detector applying one [`FdirMode`] to a stream of innovations.
#[derive(Clone, Debug)]
pub struct FdirMonitor {
    mode: FdirMode,
    cfg: DetectorConfig,
    slices: SliceMap,
    window: NisWindow,
    sensor_windows: BTreeMap<SensorKind, NisWindow>,
    thresholds: BTreeMap<usize, f64>,
}

impl FdirMonitor {
    pub fn new(mode: FdirMode, cfg: DetectorConfig, slices: SliceMap) -> Result<Self> {
        cfg.validate()?;
        let sensor_windows = slices.sensors().map(|k| (k, NisWindow::new(cfg.window))).collect();
        Ok(Self {
            mode,
            cfg,
            window: NisWindow::new(cfg.window),
            slices,
            sensor_windows,
            thresholds: BTreeMap::new(),
        })
    }

    pub fn mode(&self) -> FdirMode {
        self.mode
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    fn threshold(&mut self, dof: usize) -> Result<f64> {
        if let Some(g) = self.thresholds.get(&dof) {
            return Ok(*g);
        }
        let g = self.cfg.threshold(dof)?;
        self.thresholds.insert(dof, g);
        Ok(g)
    }

    fn rows_without(&self, excluded: &[SensorKind]) -> Vec<usize> {
        let keep: Vec<_> = self.slices.sensors().filter(|k| !excluded.contains(k)).collect();
        self.slices.rows_of(&keep)
    }

    pub fn assess(&mut self, record: &InnovationRecord) -> Result<Decision> {
        let dof = record.dof();
        let gamma = self.threshold(dof)?;
        let all_rows: Vec<usize> = (0..dof).collect();
        match self.mode {
            FdirMode::None => Ok(Decision {
                report: FaultReport::new(record.t, record.nis, gamma, dof),
                rows: all_rows,
            }),
            FdirMode::Innovation => {
                let report = FaultReport::new(record.t, record.nis, gamma, dof);
                let rows = if report.detected { Vec::new() } else { all_rows };
                Ok(Decision { report, rows })
            }
            FdirMode::Sequence => {
                self.window.push(record.nis);
                let mut report = FaultReport::new(record.t, self.window.mean(), gamma, dof);
                if self.cfg.per_sensor {
                    for s in per_sensor_nis(record, &self.slices)? {
                        let g = self.threshold(s.dof)?;
                        let w = self.sensor_windows.get_mut(&s.sensor).expect("window per sensor");
                        w.push(s.nis);
                        if w.mean() > g {
                            report.isolated.push(s.sensor);
                        }
                    }
                    let rows = self.rows_without(&report.isolated);
                    return Ok(Decision { report, rows });
                }
                let rows = if report.detected { Vec::new() } else { all_rows };
                Ok(Decision { report, rows })
            }
            FdirMode::Isolation => {
                let mut report = FaultReport::new(record.t, record.nis, gamma, dof);
                for s in per_sensor_nis(record, &self.slices)? {
                    if s.nis > self.threshold(s.dof)? {
                        report.isolated.push(s.sensor);
                    }
                }
                let rows = self.rows_without(&report.isolated);
                Ok(Decision { report, rows })
            }
        }
    }
}
