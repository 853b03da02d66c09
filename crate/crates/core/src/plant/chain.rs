use crate::error::{Error, Result};
use crate::linalg::rk4_step;

use super::disturbance::{Disturbance, DisturbanceSignal};
use super::Plant;

/// `n`-th order integrator chain `ẋ = A x + B (b u + f(x, t))`, `y = x_1`.
#[derive(Clone, Debug)]
pub struct ChainPlant<D = DisturbanceSignal> {
    b: f64,
    x: Vec<f64>,
    t: f64,
    disturbance: D,
}

impl<D: Disturbance> ChainPlant<D> {
    pub fn new(b: f64, x0: Vec<f64>, disturbance: D) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::config(
                "plant.initial_state",
                "order must be at least 1",
            ));
        }
        if b == 0.0 || !b.is_finite() {
            return Err(Error::config(
                "plant.b",
                "input gain must be finite and nonzero",
            ));
        }
        Ok(ChainPlant {
            b,
            x: x0,
            t: 0.0,
            disturbance,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn disturbance(&self) -> &D {
        &self.disturbance
    }

    /// Advances one step with `u` held, returns `y = x_1`.
    pub fn chain_step(&mut self, u: f64, dt: f64) -> Result<f64> {
        debug_assert!(dt > 0.0);
        let n = self.x.len();
        let (b, t0) = (self.b, self.t);
        let dist = &self.disturbance;
        let next = rk4_step(&self.x, dt, |tau, x, dx| {
            dx[..n - 1].copy_from_slice(&x[1..]);
            dx[n - 1] = b * u + dist.value(t0 + tau, x);
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::diverged("chain plant state", t0 + dt));
        }
        self.x = next;
        self.t = t0 + dt;
        Ok(self.x[0])
    }

    /// Ground-truth total disturbance `e_{n+1} = f - r_{n+1}`.
    pub fn total_disturbance_probe(&self, r_next: f64) -> f64 {
        self.disturbance.value(self.t, &self.x) - r_next
    }
}

impl<D: Disturbance> Plant for ChainPlant<D> {
    fn order(&self) -> usize {
        self.x.len()
    }

    fn input_gain(&self) -> f64 {
        self.b
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    fn output(&self) -> f64 {
        self.x[0]
    }

    fn controlled_state(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn step(&mut self, u: f64, dt: f64) -> Result<f64> {
        self.chain_step(u, dt)
    }

    fn lumped_disturbance(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(self.disturbance.value(self.t, &self.x))
        } else {
            self.disturbance.time_derivative(self.t, k)
        }
    }
}
