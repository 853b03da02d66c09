//! Scenario configuration, simulation runs, metrics, trace export and the
//! numerical verification suite.

mod config;
mod metrics;
mod presets;
mod sim;
mod sweep;
mod trace;
pub mod verify;

pub use config::{
    ControlConfig, NoiseConfig, ObserverConfig, PlantConfig, ReportConfig, ScenarioConfig,
};
pub use metrics::{iae, iae_samples, IaeRule, LawMetrics, MetricsReport, SwitchTransient};
pub use presets::{preset, PRESET_NAMES};
pub use sim::{build_plant, run_law, run_scenario, LawRun, RunOutput, Sample, Simulation};
pub use sweep::{sweep, SweepPoint};
pub use trace::{SimulationTrace, TraceRow};
