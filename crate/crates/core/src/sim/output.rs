use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::sensors::{AttitudeParam, SensorKind, SliceMap};

use super::run::{RunMode, RunResult};

const STATE_NAMES: [&str; 10] = ["q0", "q1", "q2", "q3", "wx", "wy", "wz", "bx", "by", "bz"];

fn measurement_names(param: AttitudeParam) -> Vec<String> {
    let attitude: &[&str] = match param {
        AttitudeParam::Quaternion => &["q0", "q1", "q2", "q3"],
        AttitudeParam::Euler => &["phi", "theta", "psi"],
    };
    let mut out = Vec::new();
    for (kind, _) in SliceMap::full(param).iter() {
        match kind {
            SensorKind::StarTracker => out.extend(attitude.iter().map(|c| format!("st_{c}"))),
            SensorKind::Magnetometer => out.extend(attitude.iter().map(|c| format!("mm_{c}"))),
            SensorKind::Gyro => out.extend(["gyro_x", "gyro_y", "gyro_z"].map(String::from)),
        }
    }
    out
}

/// Column names in output order: `t`, truth, measurements, then (for
/// filtered runs) estimate, 3σ bounds, `nis`, `detected` and `isolated`.
pub fn csv_header(result: &RunResult) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(STATE_NAMES[..7].iter().map(|s| s.to_string()));
    cols.extend(measurement_names(result.param));
    if let (RunMode::Estimate | RunMode::Fdir, Some(n)) = (result.mode, result.state_dim()) {
        cols.extend(STATE_NAMES[..n].iter().map(|s| format!("est_{s}")));
        cols.extend(STATE_NAMES[..n].iter().map(|s| format!("sig3_{s}")));
        cols.extend(["nis", "detected", "isolated"].map(String::from));
    }
    cols
}

fn num(out: &mut impl Write, v: f64) -> std::io::Result<()> {
    write!(out, ",{v:.8e}")
}

/// Writes the run as CSV: a header row, then one row per time step. Reals
/// carry nine significant digits; `detected` is 0/1 and `isolated` is a
/// bitmask (star tracker 1, magnetometer 2, gyro 4). The initial row has no
/// innovation and reports a NIS of zero.
pub fn write_csv(result: &RunResult, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{}", csv_header(result).join(","))?;
    let filtered = !result.estimates.is_empty() && result.mode != RunMode::Simulate;
    for k in 0..result.len() {
        write!(out, "{:.8e}", result.times[k])?;
        for v in result.truth[k].iter().chain(result.measurements[k].iter()) {
            num(out, *v)?;
        }
        if filtered {
            let e = &result.estimates[k];
            for v in e.mean.iter() {
                num(out, *v)?;
            }
            for v in e.sigma.iter() {
                num(out, 3.0 * v)?;
            }
            num(out, e.innovation.as_ref().map_or(0.0, |r| r.nis))?;
            let (det, mask) = e
                .report
                .as_ref()
                .map_or((0, 0), |r| (u8::from(r.detected), r.isolated_mask()));
            write!(out, ",{det},{mask}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn export_csv(result: &RunResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(result, &mut w)?;
    w.flush()?;
    Ok(())
}
