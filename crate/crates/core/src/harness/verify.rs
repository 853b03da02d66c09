//! Numerical checks of the estimation-error and tracking-error results on
//! closed-loop runs. Each check reports what was measured, the bound or
//! target it is compared against and the margin.

use std::fmt;

use nalgebra::DMatrix;

use crate::controller::Reference;
use crate::error::{Error, Result};
use crate::evaluator::{GapModel, TrackingErrorBound};
use crate::linalg::{expm, inf_norm, vec_inf_norm};
use crate::observer::{estimation_error_bound_with_norm, scaled_error_bound_with_norm, LesoConfig};
use crate::plant::DisturbanceSignal;
use crate::poly::{leso_gains, residues, PoleSpec, Poly};

use super::config::{
    ControlConfig, NoiseConfig, ObserverConfig, PlantConfig, ReportConfig, ScenarioConfig,
};
use super::presets::preset;
use super::sim::Simulation;

/// How a check contributes to the overall verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// Must hold.
    Required,
    /// Must *fail*: shows the check is sensitive to a known defect.
    NegativeControl,
    /// Reported only.
    Advisory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub measured: f64,
    pub bound: f64,
    /// True when `measured <= bound`.
    pub holds: bool,
    pub note: String,
}

impl Check {
    fn at_most(name: &str, kind: CheckKind, measured: f64, bound: f64, note: String) -> Self {
        Check {
            name: name.into(),
            kind,
            measured,
            bound,
            holds: measured <= bound,
            note,
        }
    }

    /// Outcome as counted by the suite.
    pub fn passed(&self) -> bool {
        match self.kind {
            CheckKind::Required => self.holds,
            CheckKind::NegativeControl => !self.holds,
            CheckKind::Advisory => true,
        }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match (c.kind, c.passed()) {
                (CheckKind::Advisory, _) => {
                    if c.holds {
                        "INFO"
                    } else {
                        "WARN"
                    }
                }
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            let tag = match c.kind {
                CheckKind::NegativeControl => " (expected to be violated)",
                _ => "",
            };
            writeln!(
                f,
                "{status} {}{tag}: measured {:.4e}, bound {:.4e}, margin {:.4e}{}",
                c.name,
                c.measured,
                c.bound,
                c.margin(),
                if c.note.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", c.note)
                }
            )?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "verification passed"
            } else {
                "verification FAILED"
            }
        )
    }
}

/// Integrator chain of order `poles.degree()` at rest, `b = 3.25`, one
/// observer per entry of `observers`.
pub fn chain_scenario(
    name: &str,
    poles: PoleSpec,
    disturbance: DisturbanceSignal,
    reference: Reference,
    observers: Vec<ObserverConfig>,
    dt: f64,
    duration: f64,
) -> ScenarioConfig {
    let n = poles.degree();
    let x0: Vec<f64> = (0..n).map(|i| reference.derivative(0.0, i)).collect();
    ScenarioConfig {
        name: name.into(),
        seed: 0,
        plant: PlantConfig::Chain {
            input_gain: 3.25,
            initial_state: x0,
            disturbance,
        },
        reference,
        poles,
        control: ControlConfig::new(dt, duration, 20),
        observers,
        noise: NoiseConfig::default(),
        report: ReportConfig {
            baselines: false,
            ..ReportConfig::default()
        },
    }
}

/// Second-order loop, `Δ = (s + 150)^2`, one third-order observer at
/// `ω_o = 1500` started with `ê_2(t_0) = -e2_offset`, sinusoidal disturbance,
/// `dt = 1e-5` over 1 s.
pub fn identity_scenario(e2_offset: f64) -> ScenarioConfig {
    let mut obs = ObserverConfig::new(3, 1500.0);
    obs.initial_estimates = Some(vec![-e2_offset, 0.0]);
    chain_scenario(
        "surrogate-identity",
        PoleSpec::repeated(150.0, 2).expect("valid"),
        DisturbanceSignal::Sinusoid {
            amplitude: 100.0,
            frequency: 20.0,
            phase: 0.3,
        },
        Reference::Constant { value: 0.0 },
        vec![obs],
        1e-5,
        1.0,
    )
}

/// Agreement between the surrogate and the measured tracking error.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityStats {
    pub sup_tracking_error: f64,
    /// `max |z - gap - ē_1|`.
    pub max_gap_corrected_error: f64,
    /// `max |z - ē_1|`.
    pub max_plain_error: f64,
    /// `ẽ(t_0)` of the observer.
    pub initial_estimation_error: Vec<f64>,
    /// `(τ, z - ē_1)` per sample.
    pub residual: Vec<(f64, f64)>,
}

impl IdentityStats {
    pub fn corrected_relative(&self) -> f64 {
        self.max_gap_corrected_error / self.sup_tracking_error
    }

    pub fn plain_relative(&self) -> f64 {
        self.max_plain_error / self.sup_tracking_error
    }
}

/// Runs observer 0 of `cfg` alone and compares its surrogate against `ē_1`.
/// The gap model always uses the nominal gains for the observer bandwidth.
pub fn surrogate_identity(cfg: &ScenarioConfig) -> Result<IdentityStats> {
    let mut sim = Simulation::with_members(cfg, &[0])?;
    let model = GapModel::from_family(&sim.supervisor().slots()[0].family, &cfg.poles)?;
    let order = cfg.observers[0].order;
    let mut e0: Option<Vec<f64>> = None;
    let mut stats = IdentityStats {
        sup_tracking_error: 0.0,
        max_gap_corrected_error: 0.0,
        max_plain_error: 0.0,
        initial_estimation_error: Vec::new(),
        residual: Vec::with_capacity(sim.steps() + 1),
    };
    while let Some(s) = sim.next_sample()? {
        if e0.is_none() {
            let truth = s
                .true_errors
                .as_ref()
                .ok_or_else(|| Error::config("plant", "disturbance derivatives unavailable"))?;
            let est = sim.supervisor().slots()[0].state.estimates();
            e0 = Some((0..order).map(|i| truth[i] - est[i]).collect());
        }
        let tau = s.record.t;
        let z = s.record.z[0];
        let ebar = s.record.e1_bar;
        let gap = model.gap(e0.as_ref().expect("set above"), tau);
        stats.sup_tracking_error = stats.sup_tracking_error.max(ebar.abs());
        stats.max_gap_corrected_error = stats.max_gap_corrected_error.max((z - gap - ebar).abs());
        stats.max_plain_error = stats.max_plain_error.max((z - ebar).abs());
        stats.residual.push((tau, z - ebar));
    }
    stats.initial_estimation_error = e0.unwrap_or_default();
    Ok(stats)
}

/// Loop at rest at the origin with no disturbance; the only excitation is
/// `ẽ_2(t_0) = e2_offset`.
pub fn decay_scenario(e2_offset: f64) -> ScenarioConfig {
    let mut cfg = identity_scenario(e2_offset);
    cfg.name = "surrogate-decay".into();
    if let PlantConfig::Chain { disturbance, .. } = &mut cfg.plant {
        *disturbance = DisturbanceSignal::Zero;
    }
    cfg.control.duration = 0.3;
    cfg
}

/// Least-squares slope of `ln |z - ē_1|` against `τ` over `[from, to]`.
pub fn decay_slope(residual: &[(f64, f64)], from: f64, to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = residual
        .iter()
        .filter(|(t, r)| *t >= from && *t <= to && *r != 0.0)
        .map(|&(t, r)| (t, r.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(cov / var)
}

/// Worst observed ratio of measured quantity to its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundStats {
    /// Per observer, per state `i`: `max_t |ẽ_i(t)| / bound_i(t)`.
    pub state_ratio: Vec<Vec<f64>>,
    /// Per observer: `max_t ‖ε(t)‖ / bound(t)`.
    pub scaled_ratio: Vec<f64>,
    /// `max_t |ē_1(t)| / bound(t)`.
    pub tracking_ratio: f64,
    /// Worst per-state ratio once `t >= 20 / ω_o`, where the initial-error
    /// term no longer dominates.
    pub settled_state_ratio: f64,
    pub samples: usize,
}

impl BoundStats {
    pub fn worst_state_ratio(&self) -> f64 {
        self.state_ratio
            .iter()
            .flatten()
            .fold(0.0, |m: f64, &v| m.max(v))
    }

    pub fn worst_scaled_ratio(&self) -> f64 {
        self.scaled_ratio.iter().fold(0.0, |m: f64, &v| m.max(v))
    }
}

/// `‖e^{M k dt}‖_∞` for successive `k`, by repeated multiplication.
struct TransitionNorms {
    step: DMatrix<f64>,
    current: DMatrix<f64>,
}

impl TransitionNorms {
    fn new(generator: &DMatrix<f64>, dt: f64) -> Self {
        TransitionNorms {
            step: expm(&(generator * dt)),
            current: DMatrix::identity(generator.nrows(), generator.ncols()),
        }
    }

    fn next(&mut self) -> f64 {
        let norm = inf_norm(&self.current);
        self.current = &self.current * &self.step;
        norm
    }
}

/// `h_1 = max_{k <= m} sup |f^{(k)}|` and
/// `h_2 = max_{i <= n+m+1} sup |r_i|` over the run.
pub fn smoothness_constants(cfg: &ScenarioConfig, order: usize) -> Option<(f64, f64)> {
    let n = cfg.poles.degree();
    let h1 = cfg.plant.disturbance().smoothness_bound(order - n)?;
    if let PlantConfig::Rfc { .. } = cfg.plant {
        return None;
    }
    let h2 = (0..=order)
        .map(|k| cfg.reference.derivative_bound(k, cfg.control.duration))
        .fold(0.0, f64::max);
    Some((h1, h2))
}

/// Checks every observer of the bank against its estimation-error bound and
/// the tracking error against the closed-loop bound, at every sample of the
/// switched run.
pub fn bound_check(cfg: &ScenarioConfig) -> Result<BoundStats> {
    let mut sim = Simulation::new(cfg)?;
    let m = cfg.observers.len();
    let dt = cfg.control.dt;
    let leso: Vec<LesoConfig> = (0..m)
        .map(|j| {
            let o = &cfg.observers[j];
            LesoConfig::new(
                cfg.poles.degree(),
                o.order,
                o.omega_o,
                cfg.controller_input_gain(),
            )
        })
        .collect::<Result<_>>()?;
    let consts: Vec<(f64, f64)> = leso
        .iter()
        .map(|l| {
            smoothness_constants(cfg, l.order()).ok_or_else(|| {
                Error::config(
                    "plant.disturbance",
                    "needs bounded derivatives and a chain plant",
                )
            })
        })
        .collect::<Result<_>>()?;
    let mut scaled_norms: Vec<TransitionNorms> = leso
        .iter()
        .map(|l| TransitionNorms::new(&(l.scaled_companion() * l.omega_o()), dt))
        .collect();
    let row_n = residues(&Poly::constant(1.0), &cfg.poles)?;
    let tracking: Vec<TrackingErrorBound> = leso
        .iter()
        .map(|l| TrackingErrorBound::new(&cfg.poles, &row_n, l.omega_o()))
        .collect();
    let mut closed_norms = TransitionNorms::new(tracking[0].closed_loop_matrix(), dt);

    let mut stats = BoundStats {
        state_ratio: leso.iter().map(|l| vec![0.0; l.order()]).collect(),
        scaled_ratio: vec![0.0; m],
        tracking_ratio: 0.0,
        settled_state_ratio: 0.0,
        samples: 0,
    };
    let mut eps0 = vec![0.0; m];
    let mut gamma = vec![0.0_f64; m];
    let mut ebar0 = 0.0;
    while let Some(s) = sim.next_sample()? {
        let truth = s
            .true_errors
            .as_ref()
            .ok_or_else(|| Error::config("plant", "disturbance derivatives unavailable"))?;
        if s.k == 0 {
            let xs = sim.supervisor().ideal().state();
            // x*(t_0) = x(t_0) so this is zero unless the caller perturbs it
            ebar0 = vec_inf_norm(&s.x.iter().zip(xs).map(|(a, b)| a - b).collect::<Vec<_>>());
        }
        let mut drive = 0.0_f64;
        for j in 0..m {
            let l = &leso[j];
            let est = sim.supervisor().slots()[j].state.estimates();
            let w = l.omega_o();
            let mut scale = 1.0;
            let mut eps_norm = 0.0_f64;
            let e_tilde: Vec<f64> = (0..l.order()).map(|i| truth[i] - est[i]).collect();
            for &e in &e_tilde {
                eps_norm = eps_norm.max((e / scale).abs());
                scale *= w;
            }
            if s.k == 0 {
                eps0[j] = eps_norm;
            }
            gamma[j] = gamma[j].max(eps_norm);
            let norm = scaled_norms[j].next();
            let (h1, h2) = consts[j];
            for (i, &e) in e_tilde.iter().enumerate() {
                let b = estimation_error_bound_with_norm(l, norm, eps0[j], h1, h2, i + 1)?;
                let q = ratio(e.abs(), b);
                stats.state_ratio[j][i] = stats.state_ratio[j][i].max(q);
                if s.record.t >= 20.0 / w {
                    stats.settled_state_ratio = stats.settled_state_ratio.max(q);
                }
            }
            let be = scaled_error_bound_with_norm(l, norm, eps0[j], h1, h2);
            stats.scaled_ratio[j] = stats.scaled_ratio[j].max(ratio(eps_norm, be));
            drive = drive.max(tracking[j].gamma_gain() * gamma[j]);
        }
        let bound = closed_norms.next() * ebar0 + drive;
        stats.tracking_ratio = stats
            .tracking_ratio
            .max(ratio(s.record.e1_bar.abs(), bound));
        stats.samples += 1;
    }
    Ok(stats)
}

fn ratio(measured: f64, bound: f64) -> f64 {
    if measured == 0.0 {
        0.0
    } else if bound <= 0.0 {
        f64::INFINITY
    } else {
        measured / bound
    }
}

/// Scenarios with `C^m` disturbances on which the bounds are checked.
pub fn bound_scenarios() -> Vec<ScenarioConfig> {
    let p2 = || PoleSpec::repeated(150.0, 2).expect("valid");
    let mut sine = preset("chain-sine").expect("preset");
    sine.control.duration = 0.5;
    sine.report.baselines = false;

    let mut offset = ObserverConfig::new(3, 1500.0);
    offset.initial_estimates = Some(vec![0.5, -20.0]);
    let mut offset4 = ObserverConfig::new(4, 1500.0);
    offset4.initial_estimates = Some(vec![-0.5, 10.0, 0.0]);
    let tracking = chain_scenario(
        "bounds-sine-reference",
        p2(),
        DisturbanceSignal::Sum {
            terms: vec![
                DisturbanceSignal::Constant { value: 20.0 },
                DisturbanceSignal::Sinusoid {
                    amplitude: 50.0,
                    frequency: 30.0,
                    phase: 0.0,
                },
            ],
        },
        Reference::Sinusoid {
            amplitude: 0.01,
            frequency: 10.0,
            phase: 0.0,
            offset: 0.0,
        },
        vec![offset, offset4],
        1e-5,
        0.5,
    );

    let mut detuned = preset("detuned").expect("preset");
    detuned.report.baselines = false;

    let third_order = chain_scenario(
        "bounds-third-order-plant",
        PoleSpec::repeated(150.0, 3).expect("valid"),
        DisturbanceSignal::Sinusoid {
            amplitude: 100.0,
            frequency: 15.0,
            phase: 1.0,
        },
        Reference::Constant { value: 0.0 },
        vec![
            ObserverConfig::new(4, 1500.0),
            ObserverConfig::new(5, 1500.0),
        ],
        1e-5,
        0.5,
    );
    vec![sine, tracking, detuned, third_order]
}

/// Third-order loop whose fourth-order observer runs with `β_3 = 6 ω_o^3`
/// instead of `4 ω_o^3` while the surrogate uses the nominal gains.
pub fn corrupted_gain_scenario(corrupt: bool) -> ScenarioConfig {
    let w = 1500.0;
    let mut obs = ObserverConfig::new(4, w);
    if corrupt {
        let mut g = leso_gains(4, w).expect("valid");
        g[2] = 6.0 * w * w * w;
        obs.gains = Some(g);
    }
    chain_scenario(
        if corrupt {
            "corrupted-gain"
        } else {
            "nominal-gain"
        },
        PoleSpec::repeated(150.0, 3).expect("valid"),
        DisturbanceSignal::Sinusoid {
            amplitude: 100.0,
            frequency: 20.0,
            phase: 0.3,
        },
        Reference::Constant { value: 0.0 },
        vec![obs],
        1e-5,
        0.5,
    )
}

/// Observer bandwidth below the closed-loop bandwidth.
pub fn stress_scenario() -> ScenarioConfig {
    let mut cfg = identity_scenario(0.0);
    cfg.name = "low-observer-bandwidth".into();
    cfg.observers = vec![ObserverConfig::new(3, 50.0)];
    cfg.control.duration = 0.5;
    cfg
}

pub const IDENTITY_TOLERANCE: f64 = 1e-2;
pub const DECAY_TOLERANCE: f64 = 0.1;
pub const DECAY_FIT_WINDOW: (f64, f64) = (0.15, 0.25);

/// Runs every check.
pub fn verify_suite() -> Result<VerifyReport> {
    let mut checks = Vec::new();

    let zero = surrogate_identity(&identity_scenario(0.0))?;
    checks.push(Check::at_most(
        "surrogate matches tracking error, exact initial estimates",
        CheckKind::Required,
        zero.plain_relative(),
        IDENTITY_TOLERANCE,
        format!("relative to sup|e1_bar| = {:.3e}", zero.sup_tracking_error),
    ));
    let injected = surrogate_identity(&identity_scenario(0.5))?;
    checks.push(Check::at_most(
        "surrogate plus initial-condition gap matches tracking error",
        CheckKind::Required,
        injected.corrected_relative(),
        IDENTITY_TOLERANCE,
        format!(
            "relative; without the gap term {:.3e}",
            injected.plain_relative()
        ),
    ));

    let decay = surrogate_identity(&decay_scenario(0.5))?;
    let rate = PoleSpec::repeated(150.0, 2).expect("valid").slowest_rate();
    let (a, b) = DECAY_FIT_WINDOW;
    let slope = decay_slope(&decay.residual, a, b).unwrap_or(f64::NAN);
    checks.push(Check::at_most(
        "gap decays at the slowest closed-loop rate",
        CheckKind::Required,
        ((slope + rate) / rate).abs(),
        DECAY_TOLERANCE,
        format!("fitted slope {slope:.2} vs -{rate} over tau in [{a}, {b}]"),
    ));

    for cfg in bound_scenarios() {
        let st = bound_check(&cfg)?;
        checks.push(Check::at_most(
            &format!("estimation error within per-state bound ({})", cfg.name),
            CheckKind::Required,
            st.worst_state_ratio(),
            1.0,
            format!(
                "worst measured/bound over {} samples, {:.5} after the transient",
                st.samples, st.settled_state_ratio
            ),
        ));
        checks.push(Check::at_most(
            &format!("scaled estimation error within bound ({})", cfg.name),
            CheckKind::Required,
            st.worst_scaled_ratio(),
            1.0,
            "worst measured/bound".into(),
        ));
        checks.push(Check::at_most(
            &format!("tracking error within closed-loop bound ({})", cfg.name),
            CheckKind::Required,
            st.tracking_ratio,
            1.0,
            "worst measured/bound".into(),
        ));
    }

    let nominal = surrogate_identity(&corrupted_gain_scenario(false))?;
    checks.push(Check::at_most(
        "surrogate identity, third-order loop, nominal gains",
        CheckKind::Required,
        nominal.plain_relative(),
        IDENTITY_TOLERANCE,
        "relative".into(),
    ));
    let corrupted = surrogate_identity(&corrupted_gain_scenario(true))?;
    checks.push(Check::at_most(
        "surrogate identity with a corrupted observer gain",
        CheckKind::NegativeControl,
        corrupted.plain_relative(),
        IDENTITY_TOLERANCE,
        "relative".into(),
    ));

    let stress = stress_scenario();
    match bound_check(&stress) {
        Ok(st) => {
            checks.push(Check::at_most(
                "estimation error bound, low observer bandwidth",
                CheckKind::Advisory,
                st.worst_state_ratio(),
                1.0,
                "omega_o = 50 below the closed-loop rate 150".into(),
            ));
            checks.push(Check::at_most(
                "tracking error bound, low observer bandwidth",
                CheckKind::Advisory,
                st.tracking_ratio,
                1.0,
                "omega_o = 50 below the closed-loop rate 150".into(),
            ));
        }
        Err(e) => checks.push(Check {
            name: "low observer bandwidth run".into(),
            kind: CheckKind::Advisory,
            measured: f64::NAN,
            bound: f64::NAN,
            holds: false,
            note: e.to_string(),
        }),
    }
    let st = surrogate_identity(&stress)?;
    checks.push(Check::at_most(
        "surrogate identity, low observer bandwidth",
        CheckKind::Advisory,
        st.plain_relative(),
        IDENTITY_TOLERANCE,
        "relative".into(),
    ));

    Ok(VerifyReport { checks })
}
