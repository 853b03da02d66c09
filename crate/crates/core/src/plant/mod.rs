//! Simulated plants driven by the controller.

mod chain;
mod disturbance;
mod rfc;

pub use chain::ChainPlant;
pub use disturbance::{Disturbance, DisturbanceSignal};
pub use rfc::{FrictionParams, RfcParams, RfcPlant};

use crate::error::Result;

/// Common face of the simulated plants as seen by the closed loop.
pub trait Plant {
    /// Order `n` of the integrator chain the controller is designed for.
    fn order(&self) -> usize;

    /// Nominal input gain `b`.
    fn input_gain(&self) -> f64;

    fn time(&self) -> f64;

    /// Overrides the plant clock (used to keep it on the exact sample grid).
    fn set_time(&mut self, t: f64);

    fn output(&self) -> f64;

    /// The `n` chain states `x_1..x_n` (position, velocity, ...).
    fn controlled_state(&self) -> Vec<f64>;

    /// Integrates one step with `u` held and returns the new output.
    fn step(&mut self, u: f64, dt: f64) -> Result<f64>;

    /// `k`-th time derivative of the lumped disturbance `f` entering the last
    /// chain state, where known in closed form. `k = 0` is always available.
    fn lumped_disturbance(&self, k: usize) -> Option<f64>;
}
