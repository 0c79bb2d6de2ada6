use std::fmt::Write as _;

use nalgebra::DVector;

use crate::filters::FilterKind;

use super::run::RunResult;

/// Window and tolerance settings for [`compute_metrics`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsOptions {
    /// RMSE and NIS statistics start here (settling time), s.
    pub from: f64,
    /// Optional end of the RMSE window, s.
    pub to: Option<f64>,
    /// Detections up to this long after a fault ends still count as
    /// belonging to that fault, s.
    pub grace: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            from: 20.0,
            to: None,
            grace: 2.0,
        }
    }
}

impl MetricsOptions {
    pub fn window(from: f64, to: f64) -> Self {
        Self {
            from,
            to: Some(to),
            ..Self::default()
        }
    }
}

/// Summary statistics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub filter: Option<FilterKind>,
    pub rmse_quat: [f64; 4],
    pub rmse_omega: [f64; 3],
    pub rmse_bias: Option<[f64; 3]>,
    /// First detection at or after the earliest fault onset, minus the onset.
    pub detection_latency: Option<f64>,
    /// Detections outside every fault window (plus grace).
    pub false_alarms: usize,
    /// There were faults but nothing was detected while they were active.
    pub missed_detection: bool,
    pub mean_nis: f64,
    /// Fraction of steps in the window with NIS above the threshold.
    pub exceedance_rate: f64,
    pub samples: usize,
}

impl Metrics {
    /// RMS of the quaternion error norm.
    pub fn quat_rmse(&self) -> f64 {
        self.rmse_quat.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// RMS of the body-rate error norm.
    pub fn omega_rmse(&self) -> f64 {
        self.rmse_omega.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

fn in_window(t: f64, opts: &MetricsOptions) -> bool {
    t >= opts.from - 1e-9 && opts.to.is_none_or(|to| t <= to + 1e-9)
}

/// Quaternion estimate with its sign matched to the truth.
fn aligned_quat(est: &DVector<f64>, truth: &DVector<f64>) -> [f64; 4] {
    let dot: f64 = (0..4).map(|i| est[i] * truth[i]).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    std::array::from_fn(|i| s * est[i])
}

/// RMSE per component over the window, detection latency and false-alarm
/// counts. Runs without a filter give zero errors and no detections.
pub fn compute_metrics(result: &RunResult, opts: &MetricsOptions) -> Metrics {
    let mut sq_q = [0.0; 4];
    let mut sq_w = [0.0; 3];
    let mut sq_b = [0.0; 3];
    let mut n = 0usize;
    let mut nis_sum = 0.0;
    let mut nis_n = 0usize;
    let mut exceed = 0usize;
    let augmented = result.state_dim() == Some(10);

    for (k, est) in result.estimates.iter().enumerate() {
        let t = result.times[k];
        if !in_window(t, opts) {
            continue;
        }
        let truth = &result.truth[k];
        let q = aligned_quat(&est.mean, truth);
        for i in 0..4 {
            sq_q[i] += (q[i] - truth[i]).powi(2);
        }
        for i in 0..3 {
            sq_w[i] += (est.mean[4 + i] - truth[4 + i]).powi(2);
            if augmented {
                sq_b[i] += (est.mean[7 + i] - result.true_bias[i]).powi(2);
            }
        }
        n += 1;
        if let (Some(rec), Some(rep)) = (&est.innovation, &est.report) {
            nis_sum += rec.nis;
            nis_n += 1;
            if rec.nis > rep.threshold {
                exceed += 1;
            }
        }
    }
    let rms = |s: f64| if n == 0 { 0.0 } else { (s / n as f64).sqrt() };

    let onset = result
        .faults
        .iter()
        .map(|f| f.t_start)
        .fold(f64::INFINITY, f64::min);
    let last_end = result.faults.iter().map(|f| f.t_end()).fold(f64::NEG_INFINITY, f64::max);
    let covered = |t: f64| {
        result
            .faults
            .iter()
            .any(|f| t >= f.t_start - 1e-9 && t < f.t_end() + opts.grace - 1e-9)
    };
    let mut latency = None;
    let mut false_alarms = 0;
    for rep in result.detections() {
        if covered(rep.t) {
            if latency.is_none() && rep.t >= onset - 1e-9 {
                latency = Some((rep.t - onset).max(0.0));
            }
        } else {
            false_alarms += 1;
        }
    }
    let missed_detection = !result.faults.is_empty()
        && !result
            .detections()
            .any(|r| r.t >= onset - 1e-9 && r.t < last_end + opts.grace);

    Metrics {
        filter: result.filter,
        rmse_quat: sq_q.map(rms),
        rmse_omega: sq_w.map(rms),
        rmse_bias: augmented.then(|| sq_b.map(rms)),
        detection_latency: latency,
        false_alarms,
        missed_detection,
        mean_nis: if nis_n == 0 { 0.0 } else { nis_sum / nis_n as f64 },
        exceedance_rate: if nis_n == 0 { 0.0 } else { exceed as f64 / nis_n as f64 },
        samples: n,
    }
}

/// Fixed-width table, one row per run.
pub fn format_metrics_table(rows: &[Metrics]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>12} {:>12} {:>12} {:>10} {:>10} {:>8} {:>7}",
        "filter", "rmse_q", "rmse_w", "rmse_b", "mean_nis", "latency_s", "false_al", "missed"
    );
    for m in rows {
        let name = m.filter.map_or("-", |f| f.name());
        let bias = m.rmse_bias.map_or("-".to_string(), |b| {
            format!("{:.4e}", b.iter().map(|e| e * e).sum::<f64>().sqrt())
        });
        let latency = m.detection_latency.map_or("-".to_string(), |l| format!("{l:.1}"));
        let _ = writeln!(
            out,
            "{:<6} {:>12.4e} {:>12.4e} {:>12} {:>10.3} {:>10} {:>8} {:>7}",
            name,
            m.quat_rmse(),
            m.omega_rmse(),
            bias,
            m.mean_nis,
            latency,
            m.false_alarms,
            m.missed_detection
        );
    }
    out
}
