//! Named scenarios shipped with the crate.

use crate::controller::Reference;
use crate::error::{Error, Result};
use crate::plant::{DisturbanceSignal, RfcParams};
use crate::poly::PoleSpec;

use super::config::{
    ControlConfig, NoiseConfig, ObserverConfig, PlantConfig, ReportConfig, ScenarioConfig,
};

pub const PRESET_NAMES: &[&str] = &[
    "paper-p2p-r10",
    "paper-p2p-r20",
    "zero",
    "chain-sine",
    "detuned",
    "tiny",
];

fn closed_loop_150() -> PoleSpec {
    PoleSpec::repeated(150.0, 2).expect("valid pole spec")
}

fn third_and_fourth(omega_o: f64) -> Vec<ObserverConfig> {
    vec![
        ObserverConfig::new(3, omega_o),
        ObserverConfig::new(4, omega_o),
    ]
}

/// Setpoint in micrometres, read by a 0.1 µm incremental encoder.
fn point_to_point(name: &str, setpoint_um: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 0,
        plant: PlantConfig::Rfc {
            params: RfcParams::default(),
            initial_state: [0.0; 4],
            disturbance: DisturbanceSignal::Zero,
        },
        reference: Reference::Constant {
            value: setpoint_um * 1e-6,
        },
        poles: closed_loop_150(),
        control: ControlConfig::new(1e-4, 1.0, 20),
        observers: third_and_fourth(1500.0),
        noise: NoiseConfig {
            amplitude: 0.0,
            resolution: 1e-7,
        },
        report: ReportConfig::default(),
    }
}

fn chain(name: &str, disturbance: DisturbanceSignal, duration: f64, dt: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 0,
        plant: PlantConfig::Chain {
            input_gain: 3.25,
            initial_state: vec![0.0, 0.0],
            disturbance,
        },
        reference: Reference::Constant { value: 0.0 },
        poles: closed_loop_150(),
        control: ControlConfig::new(dt, duration, 20),
        observers: third_and_fourth(1500.0),
        noise: NoiseConfig::default(),
        report: ReportConfig::default(),
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let cfg = match name {
        "paper-p2p-r10" => point_to_point(name, 10.0),
        "paper-p2p-r20" => point_to_point(name, 20.0),
        "zero" => chain(name, DisturbanceSignal::Zero, 0.1, 1e-4),
        "chain-sine" => chain(
            name,
            DisturbanceSignal::Sinusoid {
                amplitude: 100.0,
                frequency: 20.0,
                phase: 0.3,
            },
            1.0,
            1e-5,
        ),
        "detuned" => {
            let mut c = chain(
                name,
                DisturbanceSignal::Sum {
                    terms: vec![
                        DisturbanceSignal::Constant { value: 20.0 },
                        DisturbanceSignal::Sinusoid {
                            amplitude: 100.0,
                            frequency: 20.0,
                            phase: 0.0,
                        },
                    ],
                },
                1.0,
                1e-4,
            );
            c.observers = vec![
                ObserverConfig::new(3, 1500.0),
                ObserverConfig::new(3, 150.0),
            ];
            c.control.initial_selection = 1;
            c
        }
        "tiny" => {
            let mut c = chain(
                name,
                DisturbanceSignal::Sinusoid {
                    amplitude: 50.0,
                    frequency: 30.0,
                    phase: 0.5,
                },
                2e-3,
                1e-4,
            );
            c.reference = Reference::Constant { value: 0.01 };
            c.control.window = 4;
            c
        }
        other => {
            return Err(Error::config(
                "preset",
                format!(
                    "unknown preset `{other}`; known: {}",
                    PRESET_NAMES.join(", ")
                ),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
