//! Two-mass rigid-flexible-coupling stage.
//!
//! A working stage (actuated, measured) is tied to a frame through a
//! flexure of stiffness `k` and damping `c`. Only the frame touches the guide,
//! so only the frame sees friction. Friction is Coulomb + Stribeck + viscous
//! with a Karnopp velocity dead band: inside the band the frame sticks as long
//! as the flexure force it carries stays below breakaway.
//!
//! Every numeric default here is an invented surrogate value, not an
//! identified hardware parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::rk4_step;

use super::disturbance::{Disturbance, DisturbanceSignal};
use super::Plant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrictionParams {
    /// Coulomb level (N).
    pub coulomb: f64,
    /// Breakaway level (N).
    pub static_friction: f64,
    /// Stribeck velocity (m/s).
    pub stribeck_velocity: f64,
    /// Viscous coefficient (N·s/m).
    pub viscous: f64,
    /// Karnopp dead band (m/s).
    pub dead_velocity: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        FrictionParams {
            coulomb: 8.0,
            static_friction: 12.0,
            stribeck_velocity: 0.002,
            viscous: 10.0,
            dead_velocity: 1e-4,
        }
    }
}

impl FrictionParams {
    pub fn frictionless() -> Self {
        FrictionParams {
            coulomb: 0.0,
            static_friction: 0.0,
            stribeck_velocity: 1.0,
            viscous: 0.0,
            dead_velocity: 0.0,
        }
    }

    fn sliding(&self, v: f64) -> f64 {
        let level = self.coulomb
            + (self.static_friction - self.coulomb) * (-(v / self.stribeck_velocity).powi(2)).exp();
        level * v.signum() + self.viscous * v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfcParams {
    /// Working-stage mass (kg).
    pub stage_mass: f64,
    /// Frame mass (kg).
    pub frame_mass: f64,
    /// Flexure stiffness (N/m).
    pub stiffness: f64,
    /// Flexure damping (N·s/m).
    pub damping: f64,
    /// Voltage-to-force gain `k_a k_s` (N/V).
    pub force_gain: f64,
    pub friction: FrictionParams,
    /// Pin the frame in place (infinite frame mass).
    pub frame_locked: bool,
}

impl Default for RfcParams {
    fn default() -> Self {
        RfcParams {
            stage_mass: 2.0,
            frame_mass: 5.0,
            stiffness: 4.0e4,
            damping: 40.0,
            // chosen so that force_gain / stage_mass = 3.25
            force_gain: 6.5,
            friction: FrictionParams::default(),
            frame_locked: false,
        }
    }
}

impl RfcParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive(self.stage_mass, "plant.params.stage_mass")?;
        positive(self.frame_mass, "plant.params.frame_mass")?;
        positive(self.stiffness, "plant.params.stiffness")?;
        if self.force_gain == 0.0 || !self.force_gain.is_finite() {
            return Err(Error::config(
                "plant.params.force_gain",
                "must be finite and nonzero",
            ));
        }
        if self.damping < 0.0 {
            return Err(Error::config("plant.params.damping", "must be nonnegative"));
        }
        let f = &self.friction;
        if !(f.static_friction >= f.coulomb && f.coulomb >= 0.0) {
            return Err(Error::config(
                "plant.params.friction",
                "need static_friction >= coulomb >= 0",
            ));
        }
        if f.dead_velocity < 0.0 || f.viscous < 0.0 || f.stribeck_velocity <= 0.0 {
            return Err(Error::config(
                "plant.params.friction",
                "dead band and viscous must be nonnegative, Stribeck velocity positive",
            ));
        }
        Ok(())
    }

    /// Input gain seen by the controller, `k_a k_s / m_s`.
    pub fn input_gain(&self) -> f64 {
        self.force_gain / self.stage_mass
    }
}

/// State is `(x_s, v_s, x_f, v_f)`.
#[derive(Clone, Debug)]
pub struct RfcPlant {
    params: RfcParams,
    state: [f64; 4],
    t: f64,
    extra: DisturbanceSignal,
}

const XS: usize = 0;
const VS: usize = 1;
const XF: usize = 2;
const VF: usize = 3;

impl RfcPlant {
    pub fn new(params: RfcParams, state: [f64; 4], extra: DisturbanceSignal) -> Result<Self> {
        params.validate()?;
        Ok(RfcPlant {
            params,
            state,
            t: 0.0,
            extra,
        })
    }

    pub fn params(&self) -> &RfcParams {
        &self.params
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Force the flexure applies to the frame.
    fn frame_applied_force(&self, s: &[f64]) -> f64 {
        -self.params.stiffness * (s[XF] - s[XS]) - self.params.damping * (s[VF] - s[VS])
    }

    fn sticks(&self, s: &[f64]) -> bool {
        let f = &self.params.friction;
        s[VF].abs() < f.dead_velocity && self.frame_applied_force(s).abs() <= f.static_friction
    }

    /// True while the frame is held by static friction (or locked).
    pub fn frame_stuck(&self) -> bool {
        self.params.frame_locked || self.state[VF] == 0.0 && self.sticks(&self.state)
    }

    fn stage_accel(&self, t: f64, s: &[f64], u: f64) -> f64 {
        let p = &self.params;
        (p.force_gain * u + p.stiffness * (s[XF] - s[XS]) + p.damping * (s[VF] - s[VS]))
            / p.stage_mass
            + self.extra.value(t, &s[..2])
    }

    fn frame_accel(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let applied = self.frame_applied_force(s);
        let v = s[VF];
        let friction = if v.abs() < p.friction.dead_velocity {
            applied.clamp(-p.friction.static_friction, p.friction.static_friction)
        } else {
            p.friction.sliding(v)
        };
        (applied - friction) / p.frame_mass
    }

    /// One step with `u` (volts) held; returns `y = x_s`.
    pub fn rfc_step(&mut self, u: f64, dt: f64) -> Result<f64> {
        debug_assert!(dt > 0.0);
        let t0 = self.t;
        let hold_frame = self.params.frame_locked || self.sticks(&self.state);
        if hold_frame {
            self.state[VF] = 0.0;
        }
        let next = rk4_step(&self.state, dt, |tau, s, ds| {
            ds[XS] = s[VS];
            ds[VS] = self.stage_accel(t0 + tau, s, u);
            if hold_frame {
                ds[XF] = 0.0;
                ds[VF] = 0.0;
            } else {
                ds[XF] = s[VF];
                ds[VF] = self.frame_accel(s);
            }
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::diverged("rfc plant state", t0 + dt));
        }
        let v_before = self.state[VF];
        self.state.copy_from_slice(&next);
        // Capture the frame when it reverses inside a step and the flexure
        // cannot break it loose again.
        if !hold_frame && v_before * self.state[VF] < 0.0 {
            let mut probe = self.state;
            probe[VF] = 0.0;
            if self.frame_applied_force(&probe).abs() <= self.params.friction.static_friction {
                self.state[VF] = 0.0;
            }
        }
        self.t = t0 + dt;
        Ok(self.state[XS])
    }

    /// Ground-truth lumped disturbance on the stage minus `r̈`:
    /// `f + (k d_x + c d_v) / m_s - r̈`.
    pub fn total_disturbance_probe(&self, r_ddot: f64) -> f64 {
        self.coupling_disturbance() - r_ddot
    }

    fn coupling_disturbance(&self) -> f64 {
        let p = &self.params;
        let s = &self.state;
        let dx = s[XF] - s[XS];
        let dv = s[VF] - s[VS];
        self.extra.value(self.t, &s[..2]) + (p.stiffness * dx + p.damping * dv) / p.stage_mass
    }
}

impl Plant for RfcPlant {
    fn order(&self) -> usize {
        2
    }

    fn input_gain(&self) -> f64 {
        self.params.input_gain()
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    fn output(&self) -> f64 {
        self.state[XS]
    }

    fn controlled_state(&self) -> Vec<f64> {
        vec![self.state[XS], self.state[VS]]
    }

    fn step(&mut self, u: f64, dt: f64) -> Result<f64> {
        self.rfc_step(u, dt)
    }

    fn lumped_disturbance(&self, k: usize) -> Option<f64> {
        (k == 0).then(|| self.coupling_disturbance())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::ChainPlant;

    fn frictionless_locked() -> RfcParams {
        RfcParams {
            damping: 0.0,
            friction: FrictionParams::frictionless(),
            frame_locked: true,
            ..RfcParams::default()
        }
    }

    #[test]
    fn default_input_gain() {
        assert!((RfcParams::default().input_gain() - 3.25).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_stays_at_rest() {
        let mut p = RfcPlant::new(RfcParams::default(), [0.0; 4], DisturbanceSignal::Zero).unwrap();
        for _ in 0..1000 {
            p.rfc_step(0.0, 1e-4).unwrap();
        }
        assert_eq!(p.state(), [0.0; 4]);
    }

    #[test]
    fn locked_frame_oscillates_at_flexure_frequency() {
        let params = frictionless_locked();
        let omega = (params.stiffness / params.stage_mass).sqrt();
        let period = 2.0 * std::f64::consts::PI / omega;
        let d = 1e-3;
        let mut p = RfcPlant::new(params, [d, 0.0, 0.0, 0.0], DisturbanceSignal::Zero).unwrap();
        let dt = 1e-5;
        let mut crossings = Vec::new();
        let mut prev = p.output();
        let mut t = 0.0;
        while crossings.len() < 11 {
            let y = p.rfc_step(0.0, dt).unwrap();
            t += dt;
            // downward zero crossings, linear interpolation
            if prev > 0.0 && y <= 0.0 {
                crossings.push(t - dt * y / (y - prev));
            }
            prev = y;
        }
        let measured = (crossings[10] - crossings[0]) / 10.0;
        assert!(
            ((measured - period) / period).abs() < 1e-3,
            "measured {measured}, expected {period}"
        );
    }

    #[test]
    fn small_force_leaves_frame_in_dead_zone() {
        let params = RfcParams::default();
        // transmitted steady force = force_gain * u = 6.5 N < 12 N breakaway
        let u = 1.0;
        let mut p = RfcPlant::new(params.clone(), [0.0; 4], DisturbanceSignal::Zero).unwrap();
        for _ in 0..(2.0 / 1e-4) as usize {
            p.rfc_step(u, 1e-4).unwrap();
        }
        let s = p.state();
        assert_eq!(s[XF], 0.0);
        assert_eq!(s[VF], 0.0);
        let expected = params.force_gain * u / params.stiffness;
        assert!(
            ((s[XS] - expected) / expected).abs() < 1e-6,
            "x_s = {}",
            s[XS]
        );
    }

    #[test]
    fn locked_frame_matches_chain_with_flexure_disturbance() {
        let params = RfcParams {
            frame_locked: true,
            ..RfcParams::default()
        };
        let (k, c, m) = (params.stiffness, params.damping, params.stage_mass);
        let x0 = [2e-4, -0.01, 1e-4, 0.0];
        let anchor = x0[XF];
        let mut rfc = RfcPlant::new(params.clone(), x0, DisturbanceSignal::Zero).unwrap();
        let spring = move |_t: f64, x: &[f64]| (k * (anchor - x[0]) + c * (0.0 - x[1])) / m;
        let mut chain = ChainPlant::new(params.input_gain(), vec![x0[0], x0[1]], spring).unwrap();
        let dt = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..10_000 {
            let u = (i as f64 * dt * 7.0).sin();
            rfc.rfc_step(u, dt).unwrap();
            chain.chain_step(u, dt).unwrap();
            let s = rfc.state();
            worst = worst
                .max((s[XS] - chain.state()[0]).abs())
                .max((s[VS] - chain.state()[1]).abs());
        }
        assert!(worst < 1e-10, "max deviation {worst}");
    }

    #[test]
    fn probe_with_static_deflection() {
        let params = RfcParams::default();
        let p = RfcPlant::new(
            params.clone(),
            [1e-4, 0.0, 0.0, 0.0],
            DisturbanceSignal::Zero,
        )
        .unwrap();
        let dx = -1e-4;
        assert!(
            (p.total_disturbance_probe(0.5) - (params.stiffness * dx / params.stage_mass - 0.5))
                .abs()
                < 1e-12
        );
        let rest = RfcPlant::new(params, [0.0; 4], DisturbanceSignal::Zero).unwrap();
        assert_eq!(rest.total_disturbance_probe(0.0), 0.0);
    }

    #[test]
    fn stick_slip_has_no_chattering() {
        // slow sinusoidal drive that repeatedly breaks the frame loose
        let mut p = RfcPlant::new(RfcParams::default(), [0.0; 4], DisturbanceSignal::Zero).unwrap();
        let dt = 1e-4;
        let mut vf = Vec::new();
        let mut stuck_with_motion = 0;
        for i in 0..40_000 {
            let t = i as f64 * dt;
            let u = 4.0 * (2.0 * std::f64::consts::PI * t).sin();
            let was_stuck = p.frame_stuck();
            let before = p.state();
            p.rfc_step(u, dt).unwrap();
            if was_stuck && p.state()[XF] != before[XF] {
                stuck_with_motion += 1;
            }
            vf.push(p.state()[VF]);
        }
        assert_eq!(stuck_with_motion, 0);
        // split into slip events separated by exact zeros
        let mut events = 0;
        let mut sign_changes_in_event = 0;
        let mut worst = 0;
        let mut prev = 0.0;
        for &v in &vf {
            if v == 0.0 {
                worst = worst.max(sign_changes_in_event);
                sign_changes_in_event = 0;
            } else {
                if prev == 0.0 {
                    events += 1;
                } else if prev * v < 0.0 {
                    sign_changes_in_event += 1;
                }
            }
            prev = v;
        }
        worst = worst.max(sign_changes_in_event);
        assert!(events >= 2, "expected repeated slip events, saw {events}");
        assert!(
            worst <= 1,
            "velocity chattered {worst} times within one slip event"
        );
    }

    #[test]
    fn validation() {
        let mut p = RfcParams::default();
        p.friction.coulomb = 20.0;
        assert!(p.validate().is_err());
        let p = RfcParams {
            stage_mass: 0.0,
            ..RfcParams::default()
        };
        assert!(p.validate().is_err());
    }
}
