//! Scenario files.
//!
//! Scenarios are TOML documents. Every table except `schema_version` is
//! optional and falls back to the reference spacecraft, orbit and sensor
//! suite; unknown keys are rejected. See `scenarios/README.md` for the full
//! grammar.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Deserialize;

use crate::attitude::{EulerAngles313, Quaternion};
use crate::dynamics::{DynamicsModel, InertiaTensor, KeplerianElements, TorqueModel, MU_EARTH_KM3_S2};
use crate::error::{Error, Result};
use crate::fdir::{make_bias_augmented_model, BiasAugmentation, DetectorConfig, FdirMode};
use crate::filters::{
    attitude_process_noise, AttitudeModel, FilterConfig, FilterKind, GaussianBelief, PfParams, UkfParams,
    DEFAULT_INITIAL_VARIANCE, DEFAULT_Q_BIAS, DEFAULT_Q_QUAT, DEFAULT_Q_RATE,
};
use crate::sensors::{
    AttitudeParam, AttitudeSensorModel, DropoutMode, FaultKind, FaultSpec, GyroModel, SensorKind, SensorSuite,
    SliceMap,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_T_END: f64 = 300.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    name: Option<String>,
    description: Option<String>,
    dt: Option<f64>,
    t_end: Option<f64>,
    seed: Option<u64>,
    parameterization: Option<String>,
    gravity_gradient: Option<bool>,
    dropout_mode: Option<String>,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    elements: RawElements,
    #[serde(default)]
    inertia: RawInertia,
    #[serde(default)]
    sensors: RawSensors,
    #[serde(default)]
    faults: Vec<RawFault>,
    #[serde(default)]
    filter: RawFilter,
    #[serde(default)]
    fdir: RawFdir,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    omega_deg_s: Option<[f64; 3]>,
    quaternion: Option<[f64; 4]>,
    euler_deg: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElements {
    a_km: Option<f64>,
    e: Option<f64>,
    i_deg: Option<f64>,
    arg_periapsis_deg: Option<f64>,
    raan_deg: Option<f64>,
    true_anomaly_deg: Option<f64>,
    mu_km3_s2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInertia {
    matrix: Option<[[f64; 3]; 3]>,
    diagonal: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensors {
    gyro_sigma: Option<f64>,
    gyro_bias: Option<[f64; 3]>,
    star_tracker_variance: Option<Vec<f64>>,
    magnetometer_variance: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    sensor: String,
    kind: String,
    t_start: f64,
    duration: Option<f64>,
    magnitude: Option<f64>,
    axis: Option<usize>,
    saturation_limit: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    kind: Option<String>,
    sensors: Option<Vec<String>>,
    augment_bias: Option<bool>,
    gravity_gradient: Option<bool>,
    q_quat: Option<f64>,
    q_rate: Option<f64>,
    q_bias: Option<f64>,
    initial_variance: Option<f64>,
    initial_bias_variance: Option<f64>,
    star_tracker_variance: Option<Vec<f64>>,
    magnetometer_variance: Option<Vec<f64>>,
    gyro_variance: Option<Vec<f64>>,
    jacobian_eps: Option<f64>,
    ukf_alpha: Option<f64>,
    ukf_beta: Option<f64>,
    ukf_kappa: Option<f64>,
    ukf_r_scale: Option<f64>,
    particles: Option<usize>,
    ess_threshold: Option<f64>,
    jitter_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFdir {
    mode: Option<String>,
    alpha: Option<f64>,
    window: Option<usize>,
    per_sensor: Option<bool>,
}

/// Initial truth state.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub q: Quaternion,
    /// Set when the scenario gave the attitude as 3-1-3 Euler angles.
    pub euler: Option<EulerAngles313>,
    /// Body rates, rad/s.
    pub omega: Vector3<f64>,
}

/// Filter construction settings.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSettings {
    pub kind: FilterKind,
    /// Sensors the filter is built with; the others are simulated but unused.
    pub sensors: Vec<SensorKind>,
    pub augment_bias: bool,
    /// Whether the filter's process model includes gravity gradient.
    pub gravity_gradient: bool,
    pub q_quat: f64,
    pub q_rate: f64,
    pub q_bias: f64,
    pub initial_variance: f64,
    pub initial_bias_variance: f64,
    /// Filter-side measurement variances, replacing the simulated sensor
    /// noise for the listed sensors.
    pub variance_overrides: BTreeMap<SensorKind, Vec<f64>>,
    pub jacobian_eps: f64,
    pub ukf: UkfParams,
    pub particles: usize,
    pub ess_threshold: f64,
    /// PF jitter covariance as a multiple of `Q`.
    pub jitter_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdirSettings {
    pub mode: FdirMode,
    pub detector: DetectorConfig,
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub param: AttitudeParam,
    pub gravity_gradient: bool,
    pub initial: InitialState,
    pub elements: KeplerianElements,
    pub inertia: InertiaTensor,
    pub sensors: SensorSuite,
    pub faults: Vec<FaultSpec>,
    pub dropout_mode: DropoutMode,
    pub filter: FilterSettings,
    pub fdir: FdirSettings,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("scenario", format!("cannot read {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem)
}

/// Parses and validates scenario text; `default_name` is used when the
/// document has no `name`.
pub fn parse_scenario(text: &str, default_name: &str) -> Result<ScenarioConfig> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
    build(raw, default_name)
}

fn parse_key<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("unrecognized value `{value}`")))
}

fn build(raw: RawScenario, default_name: &str) -> Result<ScenarioConfig> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    let param = match raw.parameterization.as_deref().unwrap_or("quaternion") {
        "quaternion" => AttitudeParam::Quaternion,
        "euler" => AttitudeParam::Euler,
        other => return Err(Error::config("parameterization", format!("unrecognized value `{other}`"))),
    };
    let gravity_gradient = raw.gravity_gradient.unwrap_or(true);

    let initial = build_initial(&raw.initial)?;
    let elements = build_elements(&raw.elements)?;
    let inertia = build_inertia(&raw.inertia)?;
    let sensors = build_sensors(&raw.sensors, param)?;

    let mut faults = Vec::with_capacity(raw.faults.len());
    for (i, f) in raw.faults.iter().enumerate() {
        let key = |k: &str| format!("faults[{i}].{k}");
        let kind: FaultKind = parse_key(&f.kind, &key("kind"))?;
        let spec = FaultSpec {
            target: parse_key(&f.sensor, &key("sensor"))?,
            axis: f.axis,
            kind,
            t_start: f.t_start,
            duration: f.duration.unwrap_or(if kind == FaultKind::ConstantBias { f64::INFINITY } else { 0.0 }),
            magnitude: f.magnitude.unwrap_or(0.0),
            saturation_limit: f.saturation_limit,
        };
        spec.validate(param, i)?;
        faults.push(spec);
    }
    let dropout_mode = match raw.dropout_mode.as_deref().unwrap_or("zero") {
        "zero" => DropoutMode::Zero,
        "hold_last" => DropoutMode::HoldLast,
        other => return Err(Error::config("dropout_mode", format!("unrecognized value `{other}`"))),
    };

    let filter = build_filter(&raw.filter, gravity_gradient)?;
    let fdir = FdirSettings {
        mode: parse_key(raw.fdir.mode.as_deref().unwrap_or("none"), "fdir.mode")?,
        detector: DetectorConfig {
            alpha: raw.fdir.alpha.unwrap_or(0.95),
            window: raw.fdir.window.unwrap_or(20),
            per_sensor: raw.fdir.per_sensor.unwrap_or(false),
        },
    };
    fdir.detector.validate()?;

    let cfg = ScenarioConfig {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        description: raw.description.unwrap_or_default(),
        dt: raw.dt.unwrap_or(DEFAULT_DT),
        t_end: raw.t_end.unwrap_or(DEFAULT_T_END),
        seed: raw.seed.unwrap_or(0),
        param,
        gravity_gradient,
        initial,
        elements,
        inertia,
        sensors,
        faults,
        dropout_mode,
        filter,
        fdir,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn build_initial(raw: &RawInitial) -> Result<InitialState> {
    let omega = Vector3::from(raw.omega_deg_s.unwrap_or([-7.0, 2.0, 5.0])).map(f64::to_radians);
    if !omega.iter().all(|w| w.is_finite()) {
        return Err(Error::config("initial.omega_deg_s", "must be finite"));
    }
    match (raw.quaternion, raw.euler_deg) {
        (Some(_), Some(_)) => Err(Error::config(
            "initial",
            "give either `quaternion` or `euler_deg`, not both",
        )),
        (_, Some(e)) => {
            let euler = EulerAngles313::from_degrees(e[0], e[1], e[2]);
            Ok(InitialState {
                q: euler.to_quaternion(),
                euler: Some(euler),
                omega,
            })
        }
        (q, None) => {
            let q = Quaternion::from_array(q.unwrap_or([1.0, 0.0, 0.0, 0.0]))
                .normalize()
                .map_err(|_| Error::config("initial.quaternion", "must have non-zero norm"))?;
            Ok(InitialState { q, euler: None, omega })
        }
    }
}

fn build_elements(raw: &RawElements) -> Result<KeplerianElements> {
    let d = KeplerianElements::reference_leo();
    let el = KeplerianElements {
        a: raw.a_km.unwrap_or(d.a),
        e: raw.e.unwrap_or(d.e),
        i: raw.i_deg.map_or(d.i, f64::to_radians),
        omega: raw.arg_periapsis_deg.map_or(d.omega, f64::to_radians),
        raan: raw.raan_deg.map_or(d.raan, f64::to_radians),
        nu0: raw.true_anomaly_deg.map_or(d.nu0, f64::to_radians),
        mu: raw.mu_km3_s2.unwrap_or(MU_EARTH_KM3_S2),
    };
    el.validate()?;
    Ok(el)
}

fn build_inertia(raw: &RawInertia) -> Result<InertiaTensor> {
    match (raw.matrix, raw.diagonal) {
        (Some(_), Some(_)) => Err(Error::config("inertia", "give either `matrix` or `diagonal`, not both")),
        (Some(m), None) => InertiaTensor::new(Matrix3::from_fn(|i, j| m[i][j])),
        (None, Some(d)) => InertiaTensor::diagonal(d[0], d[1], d[2]),
        (None, None) => Ok(InertiaTensor::reference_spacecraft()),
    }
}

fn build_sensors(raw: &RawSensors, param: AttitudeParam) -> Result<SensorSuite> {
    let mut suite = SensorSuite::reference(param);
    suite.gyro = GyroModel {
        sigma: raw.gyro_sigma.unwrap_or(suite.gyro.sigma),
        bias: Vector3::from(raw.gyro_bias.unwrap_or([0.0; 3])),
    };
    if let Some(v) = &raw.star_tracker_variance {
        suite.star_tracker = AttitudeSensorModel {
            kind: SensorKind::StarTracker,
            variance: v.clone(),
        };
    }
    if let Some(v) = &raw.magnetometer_variance {
        suite.magnetometer = AttitudeSensorModel {
            kind: SensorKind::Magnetometer,
            variance: v.clone(),
        };
    }
    suite.validate()?;
    Ok(suite)
}

fn build_filter(raw: &RawFilter, gravity_gradient: bool) -> Result<FilterSettings> {
    let kind = parse_key(raw.kind.as_deref().unwrap_or("ekf"), "filter.kind")?;
    let sensors = match &raw.sensors {
        None => SensorKind::ALL.to_vec(),
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                let k: SensorKind = parse_key(n, "filter.sensors")?;
                if !out.contains(&k) {
                    out.push(k);
                }
            }
            if out.is_empty() {
                return Err(Error::config("filter.sensors", "at least one sensor is required"));
            }
            out
        }
    };
    let mut overrides = BTreeMap::new();
    for (kind, v) in [
        (SensorKind::StarTracker, &raw.star_tracker_variance),
        (SensorKind::Magnetometer, &raw.magnetometer_variance),
        (SensorKind::Gyro, &raw.gyro_variance),
    ] {
        if let Some(v) = v {
            overrides.insert(kind, v.clone());
        }
    }
    let d = UkfParams::default();
    let pf = PfParams::default();
    Ok(FilterSettings {
        kind,
        sensors,
        augment_bias: raw.augment_bias.unwrap_or(false),
        gravity_gradient: raw.gravity_gradient.unwrap_or(gravity_gradient),
        q_quat: raw.q_quat.unwrap_or(DEFAULT_Q_QUAT),
        q_rate: raw.q_rate.unwrap_or(DEFAULT_Q_RATE),
        q_bias: raw.q_bias.unwrap_or(DEFAULT_Q_BIAS),
        initial_variance: raw.initial_variance.unwrap_or(DEFAULT_INITIAL_VARIANCE),
        initial_bias_variance: raw.initial_bias_variance.unwrap_or(BiasAugmentation::default().initial_variance),
        variance_overrides: overrides,
        jacobian_eps: raw.jacobian_eps.unwrap_or(1e-6),
        ukf: UkfParams {
            alpha: raw.ukf_alpha.unwrap_or(d.alpha),
            beta: raw.ukf_beta.unwrap_or(d.beta),
            kappa: raw.ukf_kappa.unwrap_or(d.kappa),
            r_scale: raw.ukf_r_scale.unwrap_or(d.r_scale),
        },
        particles: raw.particles.unwrap_or(pf.particles),
        ess_threshold: raw.ess_threshold.unwrap_or(pf.ess_threshold),
        jitter_scale: raw.jitter_scale.unwrap_or(1.0),
    })
}

fn positive(v: f64, key: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, "must be positive and finite"))
    }
}

fn non_negative(v: f64, key: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, "must be non-negative and finite"))
    }
}

impl ScenarioConfig {
    /// Re-checks every invariant; call after editing fields.
    pub fn validate(&self) -> Result<()> {
        positive(self.dt, "dt")?;
        positive(self.t_end, "t_end")?;
        if self.t_end < self.dt {
            return Err(Error::config("t_end", "must be at least one step long"));
        }
        self.elements.validate()?;
        self.sensors.validate()?;
        for (i, f) in self.faults.iter().enumerate() {
            f.validate(self.param, i)?;
        }
        self.fdir.detector.validate()?;
        let f = &self.filter;
        non_negative(f.q_quat, "filter.q_quat")?;
        non_negative(f.q_rate, "filter.q_rate")?;
        non_negative(f.q_bias, "filter.q_bias")?;
        positive(f.initial_variance, "filter.initial_variance")?;
        positive(f.initial_bias_variance, "filter.initial_bias_variance")?;
        positive(f.jacobian_eps, "filter.jacobian_eps")?;
        positive(f.ukf.alpha, "filter.ukf_alpha")?;
        positive(f.ukf.r_scale, "filter.ukf_r_scale")?;
        non_negative(f.ukf.beta, "filter.ukf_beta")?;
        non_negative(f.jitter_scale, "filter.jitter_scale")?;
        if f.particles < 10 {
            return Err(Error::config("filter.particles", "need at least 10 particles"));
        }
        if !(f.ess_threshold > 0.0 && f.ess_threshold <= 1.0) {
            return Err(Error::config("filter.ess_threshold", "must lie in (0, 1]"));
        }
        for (kind, v) in &f.variance_overrides {
            let key = format!("filter.{kind}_variance");
            let want = match kind {
                SensorKind::Gyro => 3,
                _ => self.param.attitude_dim(),
            };
            if v.len() != want {
                return Err(Error::config(key, format!("expected {want} entries")));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::config(key, "variances must be positive"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Dynamics of the simulated spacecraft.
    pub fn truth_dynamics(&self) -> DynamicsModel {
        let torque = TorqueModel {
            gravity_gradient: self.gravity_gradient,
            ..TorqueModel::default()
        };
        DynamicsModel::new(self.inertia, torque, self.elements)
    }

    /// Dynamics assumed by the filter.
    pub fn filter_dynamics(&self) -> DynamicsModel {
        let torque = TorqueModel {
            gravity_gradient: self.filter.gravity_gradient,
            ..TorqueModel::default()
        };
        DynamicsModel::new(self.inertia, torque, self.elements)
    }

    /// Slice map of the full simulated measurement.
    pub fn sensor_slices(&self) -> SliceMap {
        SliceMap::full(self.param)
    }

    /// Slice map of the rows the filter consumes.
    pub fn filter_slices(&self) -> SliceMap {
        SliceMap::new(self.param, &self.filter.sensors)
    }

    /// The 7-state attitude model over the filter's sensors.
    pub fn attitude_model(&self) -> AttitudeModel {
        AttitudeModel::new(self.filter_dynamics(), &self.filter.sensors, false)
    }

    /// Filter-side measurement variances, in the filter's stacked order.
    pub fn filter_measurement_variances(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for kind in self.filter_slices().sensors() {
            let v = match self.filter.variance_overrides.get(&kind) {
                Some(v) => v.clone(),
                None => match kind {
                    SensorKind::StarTracker => self.sensors.star_tracker.variance.clone(),
                    SensorKind::Magnetometer => self.sensors.magnetometer.variance.clone(),
                    SensorKind::Gyro => vec![self.sensors.gyro.variance(); 3],
                },
            };
            out.extend(v);
        }
        out
    }

    /// Filter configuration for the 7-state model.
    pub fn filter_config(&self) -> FilterConfig {
        let f = &self.filter;
        let q = attitude_process_noise(false, f.q_quat, f.q_rate, f.q_bias);
        let r = DMatrix::from_diagonal(&DVector::from_vec(self.filter_measurement_variances()));
        let mut cfg = FilterConfig::new(q.clone(), r, self.dt);
        cfg.jacobian_eps = f.jacobian_eps;
        cfg.ukf = f.ukf;
        cfg.pf = PfParams {
            particles: f.particles,
            jitter: Some(q * f.jitter_scale),
            ess_threshold: f.ess_threshold,
        };
        cfg
    }

    /// Initial 7-state belief, centred on the initial truth attitude and rates.
    pub fn initial_belief(&self) -> GaussianBelief {
        let mut mean: Vec<f64> = self.initial.q.to_array().to_vec();
        mean.extend(self.initial.omega.iter());
        GaussianBelief {
            mean: DVector::from_vec(mean),
            cov: DMatrix::identity(7, 7) * self.filter.initial_variance,
        }
    }

    /// Model, configuration and initial belief for the filter, bias-augmented
    /// when the scenario asks for it.
    pub fn filter_setup(&self) -> Result<(AttitudeModel, FilterConfig, GaussianBelief)> {
        // Noise-free truth sensors are allowed, but the filter needs a
        // positive R; an override supplies it.
        for kind in self.filter_slices().sensors() {
            let zero = match kind {
                SensorKind::Gyro => self.sensors.gyro.sigma == 0.0,
                SensorKind::StarTracker => self.sensors.star_tracker.variance.contains(&0.0),
                SensorKind::Magnetometer => self.sensors.magnetometer.variance.contains(&0.0),
            };
            if zero && !self.filter.variance_overrides.contains_key(&kind) {
                return Err(Error::config(
                    format!("filter.{kind}_variance"),
                    "the sensor is noise-free; give the filter a positive variance",
                ));
            }
        }
        let (model, config, belief) = (self.attitude_model(), self.filter_config(), self.initial_belief());
        if !self.filter.augment_bias {
            return Ok((model, config, belief));
        }
        let aug = BiasAugmentation {
            process_variance: self.filter.q_bias,
            initial_variance: self.filter.initial_bias_variance,
        };
        make_bias_augmented_model(&model, &config, &belief, &aug)
    }
}
