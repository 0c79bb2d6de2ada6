use std::path::Path;

use crate::error::{Error, Result};

use super::scenario::{load_scenario, parse_scenario, ScenarioConfig};

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("paper_baseline", include_str!("../../scenarios/paper_baseline.toml")),
    ("nominal", include_str!("../../scenarios/nominal.toml")),
    ("gravity_gradient_mismatch", include_str!("../../scenarios/gravity_gradient_mismatch.toml")),
    ("paper_baseline_spike", include_str!("../../scenarios/paper_baseline_spike.toml")),
    ("dropout", include_str!("../../scenarios/dropout.toml")),
    ("isolation_sweep_075", include_str!("../../scenarios/isolation_sweep_075.toml")),
    ("isolation_sweep_100", include_str!("../../scenarios/isolation_sweep_100.toml")),
    ("bias_estimation", include_str!("../../scenarios/bias_estimation.toml")),
    ("redundant_fusion", include_str!("../../scenarios/redundant_fusion.toml")),
    ("ukf_small_spike", include_str!("../../scenarios/ukf_small_spike.toml")),
    ("euler_crosscheck", include_str!("../../scenarios/euler_crosscheck.toml")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_scenario(name: &str) -> Option<Result<ScenarioConfig>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_scenario(text, n))
}

/// Loads `arg` as a file if it exists, otherwise as the name of a bundled
/// scenario (with any extension stripped).
pub fn resolve_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    bundled_scenario(stem).unwrap_or_else(|| {
        Err(Error::config(
            "scenario",
            format!("`{arg}` is neither a readable file nor a bundled scenario"),
        ))
    })
}
