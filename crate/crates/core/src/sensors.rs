//! Simulated gyro, star tracker and magnetometer, measurement stacking and
//! fault injection.
//!
//! Noise streams are derived from one master seed: each sensor draws from its
//! own ChaCha stream, selected by a fixed stream id (see [`SensorKind::stream_id`]),
//! so adding or removing a sensor never perturbs the others.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Time tolerance applied at fault-window edges, s.
pub const WINDOW_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    StarTracker,
    Magnetometer,
    Gyro,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [
        SensorKind::StarTracker,
        SensorKind::Magnetometer,
        SensorKind::Gyro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::StarTracker => "star_tracker",
            SensorKind::Magnetometer => "magnetometer",
            SensorKind::Gyro => "gyro",
        }
    }

    /// ChaCha stream id used for this sensor's noise.
    pub fn stream_id(self) -> u64 {
        match self {
            SensorKind::Gyro => 1,
            SensorKind::StarTracker => 2,
            SensorKind::Magnetometer => 3,
        }
    }

    /// Bit used for this sensor in isolation bitmasks.
    pub fn bit(self) -> u32 {
        match self {
            SensorKind::StarTracker => 1,
            SensorKind::Magnetometer => 2,
            SensorKind::Gyro => 4,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "star_tracker" | "st" => Ok(SensorKind::StarTracker),
            "magnetometer" | "mm" => Ok(SensorKind::Magnetometer),
            "gyro" => Ok(SensorKind::Gyro),
            other => Err(Error::InvalidArgument(format!("unknown sensor `{other}`"))),
        }
    }
}

/// How attitude sensors report: 3-1-3 Euler angles or quaternion components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttitudeParam {
    Euler,
    Quaternion,
}

impl AttitudeParam {
    pub fn attitude_dim(self) -> usize {
        match self {
            AttitudeParam::Euler => 3,
            AttitudeParam::Quaternion => 4,
        }
    }
}

/// Row ranges of each sensor inside a stacked measurement vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceMap {
    entries: Vec<(SensorKind, Range<usize>)>,
}

impl SliceMap {
    /// Stacks `sensors` in star tracker, magnetometer, gyro order regardless
    /// of the order given.
    pub fn new(param: AttitudeParam, sensors: &[SensorKind]) -> Self {
        let mut entries = Vec::new();
        let mut row = 0;
        for kind in SensorKind::ALL {
            if sensors.contains(&kind) {
                let len = match kind {
                    SensorKind::Gyro => 3,
                    _ => param.attitude_dim(),
                };
                entries.push((kind, row..row + len));
                row += len;
            }
        }
        Self { entries }
    }

    pub fn full(param: AttitudeParam) -> Self {
        Self::new(param, &SensorKind::ALL)
    }

    pub fn dim(&self) -> usize {
        self.entries.last().map_or(0, |(_, r)| r.end)
    }

    pub fn range(&self, kind: SensorKind) -> Option<Range<usize>> {
        self.entries
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, r)| r.clone())
    }

    pub fn sensors(&self) -> impl Iterator<Item = SensorKind> + '_ {
        self.entries.iter().map(|(k, _)| *k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SensorKind, Range<usize>)> + '_ {
        self.entries.iter().cloned()
    }

    /// Row indices belonging to `sensors`, ascending.
    pub fn rows_of(&self, sensors: &[SensorKind]) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|(k, _)| sensors.contains(k))
            .flat_map(|(_, r)| r.clone())
            .collect()
    }

    /// The map obtained by keeping only `sensors`.
    pub fn restricted(&self, param: AttitudeParam, sensors: &[SensorKind]) -> Self {
        let keep: Vec<_> = self.sensors().filter(|k| sensors.contains(k)).collect();
        Self::new(param, &keep)
    }
}

/// Stacked measurement `[star tracker; magnetometer; gyro]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector {
    pub values: DVector<f64>,
    pub param: AttitudeParam,
    pub slices: SliceMap,
}

impl MeasurementVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn extract(&self, kind: SensorKind) -> Option<&[f64]> {
        self.slices
            .range(kind)
            .map(|r| &self.values.as_slice()[r])
    }
}

/// Concatenates sensor readings in star tracker, magnetometer, gyro order.
pub fn stack_measurements(
    param: AttitudeParam,
    st: &[f64],
    mm: &[f64],
    gyro: &[f64],
) -> Result<MeasurementVector> {
    let ad = param.attitude_dim();
    if st.len() != ad || mm.len() != ad || gyro.len() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "expected {ad}+{ad}+3 rows, got {}+{}+{}",
            st.len(),
            mm.len(),
            gyro.len()
        )));
    }
    let values = DVector::from_iterator(
        2 * ad + 3,
        st.iter().chain(mm).chain(gyro).copied(),
    );
    Ok(MeasurementVector {
        values,
        param,
        slices: SliceMap::full(param),
    })
}

/// Gyro with white noise and constant bias: `y = ω + b + v`, `v ~ N(0, σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroModel {
    pub sigma: f64,
    pub bias: Vector3<f64>,
}

impl GyroModel {
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Attitude sensor reporting truth plus zero-mean Gaussian noise with
/// diagonal covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct AttitudeSensorModel {
    pub kind: SensorKind,
    /// Per-component variance (3 entries for Euler angles, 4 for quaternions).
    pub variance: Vec<f64>,
}

impl AttitudeSensorModel {
    pub fn validate(&self, param: AttitudeParam) -> Result<()> {
        let key = format!("sensors.{}.variance", self.kind);
        if self.variance.len() != param.attitude_dim() {
            return Err(Error::config(
                key,
                format!("expected {} entries", param.attitude_dim()),
            ));
        }
        if self.variance.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::config(key, "variances must be non-negative"));
        }
        Ok(())
    }
}

pub fn sample_gyro<R: Rng + ?Sized>(omega: &Vector3<f64>, model: &GyroModel, rng: &mut R) -> Vector3<f64> {
    let mut y = omega + model.bias;
    for i in 0..3 {
        let n: f64 = rng.sample(StandardNormal);
        y[i] += model.sigma * n;
    }
    y
}

/// Truth components plus independent Gaussian noise. The result is not
/// renormalized.
pub fn sample_attitude<R: Rng + ?Sized>(truth: &[f64], variance: &[f64], rng: &mut R) -> Vec<f64> {
    truth
        .iter()
        .zip(variance)
        .map(|(x, var)| {
            let n: f64 = rng.sample(StandardNormal);
            x + var.sqrt() * n
        })
        .collect()
}

/// Per-sensor random streams derived from a master seed.
#[derive(Clone, Debug)]
pub struct SensorStreams {
    gyro: ChaCha8Rng,
    star_tracker: ChaCha8Rng,
    magnetometer: ChaCha8Rng,
}

/// Independent stream `stream_id` of the master `seed`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

impl SensorStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            gyro: stream(seed, SensorKind::Gyro.stream_id()),
            star_tracker: stream(seed, SensorKind::StarTracker.stream_id()),
            magnetometer: stream(seed, SensorKind::Magnetometer.stream_id()),
        }
    }

    pub fn get(&mut self, kind: SensorKind) -> &mut ChaCha8Rng {
        match kind {
            SensorKind::Gyro => &mut self.gyro,
            SensorKind::StarTracker => &mut self.star_tracker,
            SensorKind::Magnetometer => &mut self.magnetometer,
        }
    }
}

/// The three simulated sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSuite {
    pub param: AttitudeParam,
    pub gyro: GyroModel,
    pub star_tracker: AttitudeSensorModel,
    pub magnetometer: AttitudeSensorModel,
}

impl SensorSuite {
    /// Sensor noise levels of the bundled scenarios.
    pub fn reference(param: AttitudeParam) -> Self {
        let (st, mm) = match param {
            AttitudeParam::Quaternion => (vec![0.001; 4], vec![0.01, 0.02, 0.05, 0.03]),
            AttitudeParam::Euler => (vec![0.001; 3], vec![0.01, 0.02, 0.05]),
        };
        Self {
            param,
            gyro: GyroModel {
                sigma: 0.005,
                bias: Vector3::new(0.02, -0.015, 0.01),
            },
            star_tracker: AttitudeSensorModel {
                kind: SensorKind::StarTracker,
                variance: st,
            },
            magnetometer: AttitudeSensorModel {
                kind: SensorKind::Magnetometer,
                variance: mm,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gyro.sigma >= 0.0) {
            return Err(Error::config("sensors.gyro.sigma", "must be non-negative"));
        }
        self.star_tracker.validate(self.param)?;
        self.magnetometer.validate(self.param)
    }

    /// Noise variances in stacked order.
    pub fn variances(&self) -> Vec<f64> {
        let g = self.gyro.variance();
        self.star_tracker
            .variance
            .iter()
            .chain(&self.magnetometer.variance)
            .copied()
            .chain([g, g, g])
            .collect()
    }

    /// One noisy stacked measurement of `attitude` (Euler angles or
    /// quaternion components, matching `param`) and `omega`.
    pub fn measure(
        &self,
        attitude: &[f64],
        omega: &Vector3<f64>,
        streams: &mut SensorStreams,
    ) -> Result<MeasurementVector> {
        let st = sample_attitude(
            attitude,
            &self.star_tracker.variance,
            streams.get(SensorKind::StarTracker),
        );
        let mm = sample_attitude(
            attitude,
            &self.magnetometer.variance,
            streams.get(SensorKind::Magnetometer),
        );
        let g = sample_gyro(omega, &self.gyro, streams.get(SensorKind::Gyro));
        stack_measurements(self.param, &st, &mm, g.as_slice())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    Spike,
    Dropout,
    Step,
    ConstantBias,
    Saturation,
}

impl FromStr for FaultKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spike" => FaultKind::Spike,
            "dropout" => FaultKind::Dropout,
            "step" => FaultKind::Step,
            "constant_bias" => FaultKind::ConstantBias,
            "saturation" => FaultKind::Saturation,
            other => return Err(Error::InvalidArgument(format!("unknown fault kind `{other}`"))),
        })
    }
}

/// What a dropped-out sensor reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DropoutMode {
    /// Stuck at zero.
    #[default]
    Zero,
    /// Repeats its last pre-fault reading.
    HoldLast,
}

/// A time-windowed fault on one sensor (optionally one axis of it).
#[derive(Clone, Debug, PartialEq)]
pub struct FaultSpec {
    pub target: SensorKind,
    /// Component index within the sensor's rows; `None` hits every row.
    pub axis: Option<usize>,
    pub kind: FaultKind,
    pub t_start: f64,
    pub duration: f64,
    pub magnitude: f64,
    pub saturation_limit: Option<f64>,
}

impl FaultSpec {
    pub fn spike(target: SensorKind, t_start: f64, duration: f64, magnitude: f64) -> Self {
        Self {
            target,
            axis: None,
            kind: FaultKind::Spike,
            t_start,
            duration,
            magnitude,
            saturation_limit: None,
        }
    }

    pub fn dropout(target: SensorKind, t_start: f64, duration: f64) -> Self {
        Self {
            kind: FaultKind::Dropout,
            ..Self::spike(target, t_start, duration, 0.0)
        }
    }

    /// End of the active window (infinite for constant bias).
    pub fn t_end(&self) -> f64 {
        match self.kind {
            FaultKind::ConstantBias => f64::INFINITY,
            _ => self.t_start + self.duration,
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start - WINDOW_EPS && t < self.t_end() - WINDOW_EPS
    }

    pub fn validate(&self, param: AttitudeParam, index: usize) -> Result<()> {
        let key = |f: &str| format!("faults[{index}].{f}");
        if !(self.t_start >= 0.0) {
            return Err(Error::config(key("t_start"), "must be >= 0"));
        }
        if !(self.duration >= 0.0) {
            return Err(Error::config(key("duration"), "must be >= 0"));
        }
        let rows = match self.target {
            SensorKind::Gyro => 3,
            _ => param.attitude_dim(),
        };
        if let Some(a) = self.axis {
            if a >= rows {
                return Err(Error::config(
                    key("axis"),
                    format!("{} has {rows} components", self.target),
                ));
            }
        }
        if self.kind == FaultKind::Saturation && !self.saturation_limit.is_some_and(|l| l >= 0.0) {
            return Err(Error::config(
                key("saturation_limit"),
                "saturation faults need a non-negative limit",
            ));
        }
        Ok(())
    }

    fn rows(&self, slices: &SliceMap) -> Option<Range<usize>> {
        let r = slices.range(self.target)?;
        Some(match self.axis {
            Some(a) => r.start + a..r.start + a + 1,
            None => r,
        })
    }
}

/// Applies every active fault in list order; dropouts report zeros.
pub fn apply_faults(y: &MeasurementVector, faults: &[FaultSpec], t: f64) -> MeasurementVector {
    let mut out = y.clone();
    for f in faults.iter().filter(|f| f.is_active(t)) {
        if let Some(rows) = f.rows(&y.slices) {
            apply_one(&mut out.values, f, rows, None);
        }
    }
    out
}

fn apply_one(values: &mut DVector<f64>, f: &FaultSpec, rows: Range<usize>, held: Option<&DVector<f64>>) {
    for i in rows {
        let v = &mut values[i];
        match f.kind {
            FaultKind::Spike | FaultKind::Step | FaultKind::ConstantBias => *v += f.magnitude,
            FaultKind::Dropout => *v = held.map_or(0.0, |h| h[i]),
            FaultKind::Saturation => {
                let lim = f.saturation_limit.unwrap_or(f64::INFINITY);
                *v = v.clamp(-lim, lim);
            }
        }
    }
}

/// Stateful fault injector that also supports hold-last-value dropouts.
#[derive(Clone, Debug)]
pub struct FaultInjector {
    faults: Vec<FaultSpec>,
    dropout: DropoutMode,
    last_clean: Option<DVector<f64>>,
}

impl FaultInjector {
    pub fn new(faults: Vec<FaultSpec>, dropout: DropoutMode) -> Self {
        Self {
            faults,
            dropout,
            last_clean: None,
        }
    }

    pub fn faults(&self) -> &[FaultSpec] {
        &self.faults
    }

    pub fn apply(&mut self, y: &MeasurementVector, t: f64) -> MeasurementVector {
        let out = match self.dropout {
            DropoutMode::Zero => apply_faults(y, &self.faults, t),
            DropoutMode::HoldLast => {
                let mut out = y.clone();
                for f in self.faults.iter().filter(|f| f.is_active(t)) {
                    if let Some(rows) = f.rows(&y.slices) {
                        let held = self.last_clean.as_ref().unwrap_or(&y.values);
                        apply_one(&mut out.values, f, rows, Some(held));
                    }
                }
                out
            }
        };
        if !self
            .faults
            .iter()
            .any(|f| f.kind == FaultKind::Dropout && f.is_active(t))
        {
            self.last_clean = Some(y.values.clone());
        }
        out
    }
}
