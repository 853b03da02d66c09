use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{Reference, SupervisorConfig};
use crate::error::{Error, Result};
use crate::evaluator::{InputHold, TieRule};
use crate::observer::LesoConfig;
use crate::plant::{DisturbanceSignal, RfcParams};
use crate::poly::PoleSpec;

use super::metrics::IaeRule;

/// Everything needed to reproduce one closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantConfig,
    #[serde(default)]
    pub reference: Reference,
    /// Closed-loop poles `-rate` with multiplicity; `Δ(s) = Π (s + rate)^mult`.
    pub poles: PoleSpec,
    pub control: ControlConfig,
    pub observers: Vec<ObserverConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    /// Integrator chain of order `initial_state.len()`.
    Chain {
        input_gain: f64,
        initial_state: Vec<f64>,
        #[serde(default)]
        disturbance: DisturbanceSignal,
    },
    /// Two-mass stage; state is `(x_s, v_s, x_f, v_f)`.
    Rfc {
        #[serde(default)]
        params: RfcParams,
        #[serde(default)]
        initial_state: [f64; 4],
        #[serde(default)]
        disturbance: DisturbanceSignal,
    },
}

impl PlantConfig {
    pub fn order(&self) -> usize {
        match self {
            PlantConfig::Chain { initial_state, .. } => initial_state.len(),
            PlantConfig::Rfc { .. } => 2,
        }
    }

    pub fn input_gain(&self) -> f64 {
        match self {
            PlantConfig::Chain { input_gain, .. } => *input_gain,
            PlantConfig::Rfc { params, .. } => params.input_gain(),
        }
    }

    /// Chain states `x_1..x_n` at `t_0`.
    pub fn initial_output_state(&self) -> Vec<f64> {
        match self {
            PlantConfig::Chain { initial_state, .. } => initial_state.clone(),
            PlantConfig::Rfc { initial_state, .. } => initial_state[..2].to_vec(),
        }
    }

    pub fn disturbance(&self) -> &DisturbanceSignal {
        match self {
            PlantConfig::Chain { disturbance, .. } | PlantConfig::Rfc { disturbance, .. } => {
                disturbance
            }
        }
    }
}

fn default_dt() -> f64 {
    1e-4
}

fn default_window() -> usize {
    20
}

fn linear() -> InputHold {
    InputHold::Linear
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    /// Samples per switching decision.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub initial_selection: usize,
    /// Input gain assumed by the controller; defaults to the plant's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_gain: Option<f64>,
    /// Symmetric clamp on `u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_limit: Option<f64>,
    #[serde(default = "linear")]
    pub observer_update: InputHold,
    #[serde(default = "linear")]
    pub filter_input: InputHold,
    #[serde(default)]
    pub tie_rule: TieRule,
}

impl ControlConfig {
    pub fn new(dt: f64, duration: f64, window: usize) -> Self {
        ControlConfig {
            dt,
            duration,
            window,
            initial_selection: 0,
            input_gain: None,
            u_limit: None,
            observer_update: InputHold::Linear,
            filter_input: InputHold::Linear,
            tie_rule: TieRule::KeepCurrent,
        }
    }

    /// Number of control periods; the trace has one more row than this.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    /// Total observer order `n + m`.
    pub order: usize,
    pub omega_o: f64,
    /// `ê_2(t_0)..ê_{n+m}(t_0)`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimates: Option<Vec<f64>>,
    /// Gain vector overriding the binomial one. The surrogate filter keeps
    /// using the nominal gains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
}

impl ObserverConfig {
    pub fn new(order: usize, omega_o: f64) -> Self {
        ObserverConfig {
            order,
            omega_o,
            initial_estimates: None,
            gains: None,
        }
    }

    pub fn label(&self) -> String {
        let mut s = format!("order {}, omega_o {}", self.order, self.omega_o);
        if self.gains.is_some() {
            s.push_str(", custom gains");
        }
        s
    }
}

/// Measurement corruption: additive white Gaussian noise, then rounding to
/// the sensor resolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation; zero disables noise.
    #[serde(default)]
    pub amplitude: f64,
    /// Sensor resolution; zero disables quantization.
    #[serde(default)]
    pub resolution: f64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Also run every observer alone as a conventional ADRC loop.
    #[serde(default = "yes")]
    pub baselines: bool,
    #[serde(default)]
    pub iae: IaeRule,
    /// Where traces and the text report go when no override is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            baselines: true,
            iae: IaeRule::default(),
            output_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn config_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn controller_input_gain(&self) -> f64 {
        self.control
            .input_gain
            .unwrap_or_else(|| self.plant.input_gain())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.poles.degree();
        let positive = |v: f64, field: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        match &self.plant {
            PlantConfig::Chain {
                input_gain,
                initial_state,
                ..
            } => {
                if *input_gain == 0.0 || !input_gain.is_finite() {
                    return Err(Error::config(
                        "plant.input_gain",
                        "must be finite and nonzero",
                    ));
                }
                if initial_state.len() != n {
                    return Err(Error::config(
                        "plant.initial_state",
                        format!(
                            "length {} does not match pole count {n}",
                            initial_state.len()
                        ),
                    ));
                }
            }
            PlantConfig::Rfc { params, .. } => {
                params.validate()?;
                if n != 2 {
                    return Err(Error::config(
                        "poles",
                        format!("the stage is second order, poles give order {n}"),
                    ));
                }
            }
        }
        positive(self.control.dt, "control.dt")?;
        positive(self.control.duration, "control.duration")?;
        let ratio = self.control.duration / self.control.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::config(
                "control.duration",
                "must be an integer multiple of control.dt",
            ));
        }
        if self.control.window == 0 {
            return Err(Error::config("control.window", "must be at least 1"));
        }
        if let Some(b) = self.control.input_gain {
            if b == 0.0 || !b.is_finite() {
                return Err(Error::config(
                    "control.input_gain",
                    "must be finite and nonzero",
                ));
            }
        }
        if let Some(l) = self.control.u_limit {
            positive(l, "control.u_limit")?;
        }
        if self.observers.is_empty() {
            return Err(Error::config("observers", "need at least one observer"));
        }
        if self.control.initial_selection >= self.observers.len() {
            return Err(Error::config(
                "control.initial_selection",
                format!("index out of range for {} observers", self.observers.len()),
            ));
        }
        for (j, o) in self.observers.iter().enumerate() {
            if o.order <= n {
                return Err(Error::config(
                    format!("observers[{j}].order"),
                    format!("must exceed the plant order {n}"),
                ));
            }
            positive(o.omega_o, &format!("observers[{j}].omega_o"))?;
            if let Some(e) = &o.initial_estimates {
                if e.len() != o.order - 1 {
                    return Err(Error::config(
                        format!("observers[{j}].initial_estimates"),
                        format!("expected {} values, got {}", o.order - 1, e.len()),
                    ));
                }
            }
            if let Some(g) = &o.gains {
                if g.len() != o.order || g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(
                        format!("observers[{j}].gains"),
                        format!("expected {} finite values", o.order),
                    ));
                }
            }
        }
        if !(self.noise.amplitude >= 0.0 && self.noise.amplitude.is_finite()) {
            return Err(Error::config("noise.amplitude", "must be nonnegative"));
        }
        if !(self.noise.resolution >= 0.0 && self.noise.resolution.is_finite()) {
            return Err(Error::config("noise.resolution", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn leso_config(&self, j: usize) -> Result<LesoConfig> {
        let o = &self.observers[j];
        let mut cfg = LesoConfig::new(
            self.poles.degree(),
            o.order,
            o.omega_o,
            self.controller_input_gain(),
        )?;
        if let Some(g) = &o.gains {
            cfg = cfg.with_beta(g.clone())?;
        }
        if let Some(e) = &o.initial_estimates {
            cfg = cfg.with_initial_estimates(e.clone())?;
        }
        Ok(cfg)
    }

    /// Supervisor settings for the observers listed in `members`.
    pub fn supervisor_config(&self, members: &[usize]) -> Result<SupervisorConfig> {
        let observers = members
            .iter()
            .map(|&j| self.leso_config(j))
            .collect::<Result<Vec<_>>>()?;
        let initial = members
            .iter()
            .position(|&j| j == self.control.initial_selection)
            .unwrap_or(0);
        let mut sc = SupervisorConfig::new(
            self.poles.clone(),
            self.controller_input_gain(),
            observers,
            self.control.window,
        );
        sc.initial_selection = initial;
        sc.u_limit = self.control.u_limit;
        sc.observer_hold = self.control.observer_update;
        sc.filter_hold = self.control.filter_input;
        sc.tie_rule = self.control.tie_rule;
        Ok(sc)
    }

    /// Sets the value at a dotted path such as `observers.1.omega_o` or
    /// `control.window`. `value` is a TOML literal.
    pub fn with_param(&self, path: &str, value: &str) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Parse(e.to_string()))?;
        let literal: toml::Table = format!("v = {value}")
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(format!("value `{value}`: {e}")))?;
        let new_value = literal["v"].clone();

        let mut node = &mut root;
        let parts: Vec<&str> = path.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let last = depth + 1 == parts.len();
            let next = match node {
                toml::Value::Table(t) => {
                    if last && !t.contains_key(*part) {
                        t.insert(part.to_string(), toml::Value::Boolean(false));
                    }
                    t.get_mut(*part)
                }
                toml::Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                _ => None,
            };
            node = next.ok_or_else(|| Error::config(path, "no such parameter"))?;
        }
        *node = new_value;
        let cfg: ScenarioConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
