use nalgebra::{DVector, Vector3};

use crate::attitude::EulerAngles313;
use crate::dynamics::RigidBodyState;
use crate::error::{Error, Result};
use crate::fdir::{FaultReport, FdirMode, FdirMonitor, InnovationRecord};
use crate::filters::linalg::select_rows;
use crate::filters::{Ekf, Estimator, FilterKind, ParticleFilter, Ukf};
use crate::sensors::{stream, AttitudeParam, FaultInjector, FaultSpec, SensorStreams};

use super::scenario::ScenarioConfig;

/// RNG stream reserved for the particle filter.
pub const PF_STREAM: u64 = 100;

/// How much of the pipeline to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Truth and measurements only.
    Simulate,
    /// Adds the filter, with detection reported but never acted on.
    Estimate,
    /// Adds the scenario's detection, isolation and recovery policy.
    Fdir,
}

/// Filter output at one grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateSample {
    pub mean: DVector<f64>,
    /// Standard deviations from the covariance diagonal.
    pub sigma: DVector<f64>,
    /// `None` at the initial time, before any measurement update.
    pub innovation: Option<InnovationRecord>,
    pub report: Option<FaultReport>,
    /// The measurement update was skipped entirely.
    pub skipped: bool,
}

/// Everything produced by one scenario run, on a shared time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub mode: RunMode,
    pub filter: Option<FilterKind>,
    pub fdir_mode: FdirMode,
    pub param: AttitudeParam,
    pub times: Vec<f64>,
    /// Truth `[q; ω]` per step.
    pub truth: Vec<DVector<f64>>,
    pub true_bias: Vector3<f64>,
    /// Sensor outputs before fault injection.
    pub clean_measurements: Vec<DVector<f64>>,
    /// Sensor outputs as seen by the filter's input (after faults).
    pub measurements: Vec<DVector<f64>>,
    /// Empty in [`RunMode::Simulate`].
    pub estimates: Vec<EstimateSample>,
    pub faults: Vec<FaultSpec>,
}

impl RunResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.estimates.first().map(|e| e.mean.len())
    }

    /// Fault reports with `detected` set, in time order.
    pub fn detections(&self) -> impl Iterator<Item = &FaultReport> {
        self.estimates
            .iter()
            .filter_map(|e| e.report.as_ref())
            .filter(|r| r.detected)
    }
}

fn build_estimator(cfg: &ScenarioConfig) -> Result<Box<dyn Estimator>> {
    let (model, fc, init) = cfg.filter_setup()?;
    Ok(match cfg.filter.kind {
        FilterKind::Ekf => Box::new(Ekf::new(model, fc, init)?),
        FilterKind::Ukf => Box::new(Ukf::new(model, fc, init)?),
        FilterKind::Pf => Box::new(ParticleFilter::new(model, fc, init, stream(cfg.seed, PF_STREAM))?),
    })
}

fn truth_attitude(cfg: &ScenarioConfig, state: &RigidBodyState, euler: Option<&EulerAngles313>) -> Vec<f64> {
    match (cfg.param, euler) {
        (AttitudeParam::Euler, Some(e)) => e.to_array().to_vec(),
        _ => state.q.to_array().to_vec(),
    }
}

/// Runs a scenario end to end: truth propagation, sensor sampling, fault
/// injection and (unless `mode` is [`RunMode::Simulate`]) filtering with
/// the scenario's FDIR policy. Deterministic for a fixed seed.
pub fn run_scenario(cfg: &ScenarioConfig, mode: RunMode) -> Result<RunResult> {
    cfg.validate()?;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let truth_dyn = cfg.truth_dynamics();

    if mode != RunMode::Simulate && cfg.param != AttitudeParam::Quaternion {
        return Err(Error::config(
            "parameterization",
            "filtering requires the quaternion parameterization",
        ));
    }

    // Euler-mode truth comes from the 3-1-3 kinematics; quaternion-mode
    // truth from the quaternion kinematics.
    let euler_truth = match (cfg.param, cfg.initial.euler) {
        (AttitudeParam::Euler, Some(e)) => Some(truth_dyn.integrate_euler(e, cfg.initial.omega, 0.0, steps as f64 * dt, dt)?),
        (AttitudeParam::Euler, None) => {
            return Err(Error::config(
                "initial.euler_deg",
                "the euler parameterization needs an initial attitude in euler angles",
            ))
        }
        _ => None,
    };

    let mut streams = SensorStreams::new(cfg.seed);
    let mut injector = FaultInjector::new(cfg.faults.clone(), cfg.dropout_mode);
    let mut estimator = match mode {
        RunMode::Simulate => None,
        _ => Some(build_estimator(cfg)?),
    };
    let fdir_mode = match mode {
        RunMode::Fdir => cfg.fdir.mode,
        _ => FdirMode::None,
    };
    let filter_slices = cfg.filter_slices();
    let filter_rows = cfg.sensor_slices().rows_of(&cfg.filter.sensors);
    let mut monitor = FdirMonitor::new(fdir_mode, cfg.fdir.detector, filter_slices)?;

    let mut result = RunResult {
        scenario: cfg.name.clone(),
        mode,
        filter: estimator.as_ref().map(|e| e.kind()),
        fdir_mode,
        param: cfg.param,
        times: Vec::with_capacity(steps + 1),
        truth: Vec::with_capacity(steps + 1),
        true_bias: cfg.sensors.gyro.bias,
        clean_measurements: Vec::with_capacity(steps + 1),
        measurements: Vec::with_capacity(steps + 1),
        estimates: Vec::with_capacity(if estimator.is_some() { steps + 1 } else { 0 }),
        faults: cfg.faults.clone(),
    };

    let mut state = RigidBodyState::new(cfg.initial.q, cfg.initial.omega);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let step_err = |e: Error| Error::Step {
            step: k,
            t,
            source: Box::new(e),
        };
        if k > 0 {
            state = match &euler_truth {
                Some(traj) => {
                    let (e, w) = traj[k];
                    RigidBodyState::new(e.to_quaternion().aligned_with(&state.q), w)
                }
                None => truth_dyn.step(&state, t - dt, dt).map_err(step_err)?,
            };
        }
        let euler = euler_truth.as_ref().map(|traj| traj[k].0);
        let clean = cfg
            .sensors
            .measure(&truth_attitude(cfg, &state, euler.as_ref()), &state.omega, &mut streams)
            .map_err(step_err)?;
        let faulted = injector.apply(&clean, t);

        result.times.push(t);
        result.truth.push(state.to_vector());
        result.clean_measurements.push(clean.values.clone());
        result.measurements.push(faulted.values.clone());

        let Some(est) = estimator.as_mut() else {
            continue;
        };
        if k == 0 {
            let b = est.belief();
            result.estimates.push(EstimateSample {
                sigma: b.std_devs(),
                mean: b.mean,
                innovation: None,
                report: None,
                skipped: false,
            });
            continue;
        }
        let y = select_rows(&faulted.values, &filter_rows);
        let sample = (|| -> Result<EstimateSample> {
            est.predict(t - dt)?;
            let mut rec = est.innovation(&y, t)?;
            let decision = monitor.assess(&rec)?;
            let info = est.update(&y, &decision.rows)?;
            rec.degenerate = info.degenerate;
            let b = est.belief();
            Ok(EstimateSample {
                sigma: b.std_devs(),
                mean: b.mean,
                skipped: decision.skipped(),
                innovation: Some(rec),
                report: Some(decision.report),
            })
        })()
        .map_err(step_err)?;
        if sample.mean.iter().any(|v| !v.is_finite()) {
            return Err(step_err(Error::InvalidArgument("filter estimate became non-finite".into())));
        }
        result.estimates.push(sample);
    }
    Ok(result)
}
