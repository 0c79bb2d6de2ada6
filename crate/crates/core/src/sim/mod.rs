//! Scenario-driven simulation: truth, sensors, filter and FDIR on one grid.

mod bundled;
mod metrics;
mod output;
mod run;
mod scenario;

pub use bundled::{bundled_names, bundled_scenario, resolve_scenario, BUNDLED};
pub use metrics::{compute_metrics, format_metrics_table, Metrics, MetricsOptions};
pub use output::{csv_header, export_csv, write_csv};
pub use run::{run_scenario, EstimateSample, RunMode, RunResult, PF_STREAM};
pub use scenario::{
    load_scenario, parse_scenario, FdirSettings, FilterSettings, InitialState, ScenarioConfig, DEFAULT_DT,
    DEFAULT_T_END, SCHEMA_VERSION,
};

use crate::error::Result;
use crate::filters::FilterKind;

/// Runs the scenario once per filter, in parallel. Each run owns its RNG
/// streams, so the results do not depend on scheduling.
pub fn compare(cfg: &ScenarioConfig, filters: &[FilterKind], mode: RunMode) -> Result<Vec<RunResult>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = filters
            .iter()
            .map(|&kind| {
                let mut c = cfg.clone();
                c.filter.kind = kind;
                scope.spawn(move || run_scenario(&c, mode))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}
