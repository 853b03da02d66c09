//! Active disturbance rejection control with a bank of linear extended state
//! observers running in parallel. A causal surrogate of the tracking error is
//! computed for every observer and the one with the smallest windowed score
//! drives the plant.

pub mod controller;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod linalg;
pub mod observer;
pub mod plant;
pub mod poly;

pub use controller::{
    adrc_law, ideal_step, supervisor_step, IdealTrajectory, Reference, SingleEsoAdrc, StepRecord,
    Supervisor, SupervisorConfig,
};
pub use error::{Error, Result};
pub use evaluator::{
    make_zfilter, surrogate_gap, switch_update, tracking_error_bound, zfilter_step, GapModel,
    InputHold, SwitchIndex, TieRule, TrackingErrorBound, ZFilter,
};
pub use observer::{leso_step, leso_step_interpolated, LesoConfig, LesoState, ScaledError};
pub use plant::{ChainPlant, DisturbanceSignal, Plant, RfcParams, RfcPlant};
pub use poly::{
    build_g_family, char_poly, decay_polys, leso_gains, residues, CharPoly, GFamily, Pole,
    PoleSpec, Poly, ResidueTable, Residues,
};
