use rayon::prelude::*;

use crate::error::Result;

use super::config::ScenarioConfig;
use super::sim::{run_scenario, RunOutput};

/// Result of one point of a parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: String,
    pub config: ScenarioConfig,
    pub output: RunOutput,
}

/// Runs `base` once per value of the parameter at `path`, in parallel.
/// Points come back in the order of `values`.
pub fn sweep(base: &ScenarioConfig, path: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.with_param(path, v)?;
            cfg.name = format!("{}[{path}={v}]", base.name);
            Ok((v.clone(), cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .map(|(value, config)| {
            let output = run_scenario(&config)?;
            Ok(SweepPoint {
                value,
                config,
                output,
            })
        })
        .collect()
}
