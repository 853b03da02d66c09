//! Control laws: reference generation, the ideal closed-loop trajectory, the
//! ADRC law, and the supervisor that runs a bank of observers in parallel and
//! lets the evaluator pick which one drives the plant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{make_zfilter, InputHold, SwitchIndex, TieRule, ZFilter};
use crate::linalg::rk4_step;
use crate::observer::{leso_step_interpolated, LesoConfig, LesoState};
use crate::poly::{build_g_family, char_poly, GFamily, PoleSpec};

/// Reference signal `r_1(t)` with closed-form derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Constant {
        value: f64,
    },
    /// `Σ c_k t^k`, ascending.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `offset + amplitude · sin(frequency · t + phase)`, frequency in rad/s.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Constant { value: 0.0 }
    }
}

impl Reference {
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// `k`-th time derivative, i.e. `r_{k+1}(t)`.
    pub fn derivative(&self, t: f64, k: usize) -> f64 {
        match self {
            Reference::Constant { value } => {
                if k == 0 {
                    *value
                } else {
                    0.0
                }
            }
            Reference::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(k)
                .map(|(p, &c)| {
                    let falling: f64 = (p - k + 1..=p).map(|v| v as f64).product();
                    c * falling * t.powi((p - k) as i32)
                })
                .sum(),
            Reference::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                let arg = frequency * t + phase + k as f64 * std::f64::consts::FRAC_PI_2;
                let base = amplitude * frequency.powi(k as i32) * arg.sin();
                if k == 0 {
                    base + offset
                } else {
                    base
                }
            }
        }
    }

    /// `[r_1(t), ..., r_count(t)]`.
    pub fn derivatives(&self, t: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| self.derivative(t, k)).collect()
    }

    /// `sup |r^{(k)}|` over `[0, horizon]`.
    pub fn derivative_bound(&self, k: usize, horizon: f64) -> f64 {
        match self {
            Reference::Constant { value } => {
                if k == 0 {
                    value.abs()
                } else {
                    0.0
                }
            }
            Reference::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(k)
                .map(|(p, &c)| {
                    let falling: f64 = (p - k + 1..=p).map(|v| v as f64).product();
                    (c * falling).abs() * horizon.abs().powi((p - k) as i32)
                })
                .sum(),
            Reference::Sinusoid {
                amplitude,
                frequency,
                offset,
                ..
            } => {
                let base = amplitude.abs() * frequency.abs().powi(k as i32);
                if k == 0 {
                    base + offset.abs()
                } else {
                    base
                }
            }
        }
    }
}

/// Reference closed loop `ẋ* = A x* + B(-Kᵀ(x* - r) + r_{n+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdealTrajectory {
    x_star: Vec<f64>,
    gains: Vec<f64>,
    t: f64,
}

impl IdealTrajectory {
    /// Starts at the plant state, `x*(t_0) = x(t_0)`.
    pub fn new(gains: Vec<f64>, x0: &[f64], t0: f64) -> Result<Self> {
        if gains.len() != x0.len() {
            return Err(Error::Dimension(format!(
                "{} gains for a state of dimension {}",
                gains.len(),
                x0.len()
            )));
        }
        Ok(IdealTrajectory {
            x_star: x0.to_vec(),
            gains,
            t: t0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x_star
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn step(&mut self, reference: &Reference, dt: f64) {
        let n = self.x_star.len();
        let (t0, gains) = (self.t, &self.gains);
        self.x_star = rk4_step(&self.x_star, dt, |tau, x, dx| {
            let t = t0 + tau;
            let feedback: f64 = (0..n)
                .map(|i| gains[i] * (x[i] - reference.derivative(t, i)))
                .sum();
            dx[..n - 1].copy_from_slice(&x[1..]);
            dx[n - 1] = -feedback + reference.derivative(t, n);
        });
        self.t = t0 + dt;
    }
}

pub fn ideal_step(traj: &mut IdealTrajectory, reference: &Reference, dt: f64) {
    traj.step(reference, dt);
}

/// `u = (-Σ_{i<n} k_i ê_i - ê_{n+1}) / b`; estimates past `n + 1` are ignored.
pub fn adrc_law(e_hat: &[f64], gains: &[f64], b: f64) -> f64 {
    let n = gains.len();
    debug_assert!(e_hat.len() > n);
    let feedback: f64 = gains.iter().zip(e_hat).map(|(k, e)| k * e).sum();
    (-feedback - e_hat[n]) / b
}

/// The sample and control of the previous period. Observers are brought up
/// to the current sample once it has been measured.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Pending {
    e1: f64,
    u: f64,
    dt: f64,
}

fn catch_up(
    state: &LesoState,
    cfg: &LesoConfig,
    pending: Option<Pending>,
    e1_now: f64,
    hold: InputHold,
) -> Result<LesoState> {
    match pending {
        None => Ok(state.clone()),
        Some(p) => {
            let end = match hold {
                InputHold::Zero => p.e1,
                InputHold::Linear => e1_now,
            };
            leso_step_interpolated(state, cfg, p.e1, end, p.u, p.dt)
        }
    }
}

/// Static settings shared by every observer in a bank.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisorConfig {
    pub poles: PoleSpec,
    pub b: f64,
    pub observers: Vec<LesoConfig>,
    pub window: usize,
    pub initial_selection: usize,
    /// Symmetric actuator clamp, `None` for unbounded.
    pub u_limit: Option<f64>,
    /// Measurement profile seen by the observers between samples.
    pub observer_hold: InputHold,
    /// Input profile of the surrogate filters between samples.
    pub filter_hold: InputHold,
    pub tie_rule: TieRule,
}

impl SupervisorConfig {
    pub fn new(poles: PoleSpec, b: f64, observers: Vec<LesoConfig>, window: usize) -> Self {
        SupervisorConfig {
            poles,
            b,
            observers,
            window,
            initial_selection: 0,
            u_limit: None,
            observer_hold: InputHold::Linear,
            filter_hold: InputHold::Linear,
            tie_rule: TieRule::KeepCurrent,
        }
    }
}

/// One member of the bank.
#[derive(Clone, Debug)]
pub struct ObserverSlot {
    pub config: LesoConfig,
    pub state: LesoState,
    pub filter: ZFilter,
    pub family: GFamily,
    pub diverged_at: Option<f64>,
}

impl ObserverSlot {
    pub fn is_active(&self) -> bool {
        self.diverged_at.is_none()
    }
}

/// Everything observed and decided at one control instant.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub r: f64,
    pub y: f64,
    pub x_star1: f64,
    pub e1: f64,
    pub e1_bar: f64,
    pub u: f64,
    pub selected: usize,
    pub switched: bool,
    /// `ẽ_1^j = e_1 - ê_1^j`, NaN once an observer has been dropped.
    pub e1_tilde: Vec<f64>,
    pub z: Vec<f64>,
    /// Accumulated `|z|` after this sample's contribution (zero right after a
    /// window boundary).
    pub accumulators: Vec<f64>,
}

/// Bank of observers with windowed switching.
#[derive(Clone, Debug)]
pub struct Supervisor {
    n: usize,
    b: f64,
    gains: Vec<f64>,
    slots: Vec<ObserverSlot>,
    switch: SwitchIndex,
    ideal: IdealTrajectory,
    reference: Reference,
    u_limit: Option<f64>,
    observer_hold: InputHold,
    t: f64,
    pending: Option<Pending>,
    dropped: Vec<(usize, f64)>,
}

impl Supervisor {
    /// `x0` is the plant state at `t0`; `ê_1` and `x*` are initialised from it.
    pub fn new(cfg: SupervisorConfig, reference: Reference, x0: &[f64], t0: f64) -> Result<Self> {
        let n = cfg.poles.degree();
        if x0.len() != n {
            return Err(Error::Dimension(format!(
                "plant state has {} entries, pole spec has degree {n}",
                x0.len()
            )));
        }
        if cfg.b == 0.0 || !cfg.b.is_finite() {
            return Err(Error::config("b", "input gain must be finite and nonzero"));
        }
        if cfg.observers.is_empty() {
            return Err(Error::config("observers", "need at least one observer"));
        }
        if let Some(lim) = cfg.u_limit {
            if lim.is_nan() || lim <= 0.0 {
                return Err(Error::config("u_limit", "clamp must be positive"));
            }
        }
        let cp = char_poly(&cfg.poles);
        let e1_t0 = x0[0] - reference.value(t0);
        let mut slots = Vec::with_capacity(cfg.observers.len());
        for (j, oc) in cfg.observers.into_iter().enumerate() {
            if oc.n() != n {
                return Err(Error::config(
                    format!("observers[{j}]"),
                    format!("built for plant order {}, loop has order {n}", oc.n()),
                ));
            }
            // the evaluator always uses the nominal gains for its bandwidth
            let nominal = LesoConfig::new(n, oc.order(), oc.omega_o(), oc.b())?;
            let family = build_g_family(&cp.gains, nominal.beta(), n)?;
            let filter = make_zfilter(family.g_n(), &cp.poly)?.with_hold(cfg.filter_hold);
            slots.push(ObserverSlot {
                state: LesoState::init(&oc, e1_t0, t0),
                config: oc,
                filter,
                family,
                diverged_at: None,
            });
        }
        let switch = SwitchIndex::new(slots.len(), cfg.window, cfg.initial_selection)?
            .with_tie_rule(cfg.tie_rule);
        Ok(Supervisor {
            n,
            b: cfg.b,
            ideal: IdealTrajectory::new(cp.gains.clone(), x0, t0)?,
            gains: cp.gains,
            slots,
            switch,
            reference,
            u_limit: cfg.u_limit,
            observer_hold: cfg.observer_hold,
            t: t0,
            pending: None,
            dropped: Vec::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn slots(&self) -> &[ObserverSlot] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [ObserverSlot] {
        &mut self.slots
    }

    pub fn ideal(&self) -> &IdealTrajectory {
        &self.ideal
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn selected(&self) -> usize {
        self.switch.selected()
    }

    pub fn switch_index(&self) -> &SwitchIndex {
        &self.switch
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Observers dropped after a numerical blow-up, with the time it happened.
    pub fn dropped(&self) -> &[(usize, f64)] {
        &self.dropped
    }

    /// Control output the selected observer would produce right now.
    pub fn control_from(&self, j: usize) -> f64 {
        self.clamp(adrc_law(
            self.slots[j].state.estimates(),
            &self.gains,
            self.b,
        ))
    }

    fn clamp(&self, u: f64) -> f64 {
        match self.u_limit {
            Some(l) => u.clamp(-l, l),
            None => u,
        }
    }

    /// One control period: bring every observer up to the new sample, score
    /// them, select, and form `u`. The ideal trajectory is advanced by `dt`.
    pub fn step(&mut self, y: f64, dt: f64) -> Result<StepRecord> {
        let t = self.t;
        let r = self.reference.value(t);
        let e1 = y - r;
        let x_star1 = self.ideal.state()[0];
        let e1_bar = y - x_star1;

        let pending = self.pending.take();
        for (j, slot) in self.slots.iter_mut().enumerate() {
            if !slot.is_active() {
                continue;
            }
            match catch_up(&slot.state, &slot.config, pending, e1, self.observer_hold) {
                Ok(next) => slot.state = next,
                Err(_) => {
                    slot.diverged_at = Some(t);
                    self.dropped.push((j, t));
                }
            }
        }

        let m = self.slots.len();
        let mut e1_tilde = vec![f64::NAN; m];
        let mut z = vec![f64::NAN; m];
        let mut eligible = vec![false; m];
        for (j, slot) in self.slots.iter_mut().enumerate() {
            if !slot.is_active() {
                continue;
            }
            if slot.state.estimates().iter().any(|v| !v.is_finite()) {
                slot.diverged_at = Some(t);
                self.dropped.push((j, t));
                continue;
            }
            let et = e1 - slot.state.estimates()[0];
            match slot.filter.step(et, dt) {
                Ok(v) => {
                    e1_tilde[j] = et;
                    z[j] = v;
                    eligible[j] = true;
                }
                Err(_) => {
                    slot.diverged_at = Some(t);
                    self.dropped.push((j, t));
                }
            }
        }
        if !eligible.iter().any(|&e| e) {
            return Err(Error::diverged("every observer in the bank", t));
        }
        let scores: Vec<f64> = z
            .iter()
            .map(|v| if v.is_finite() { *v } else { 0.0 })
            .collect();
        let before = self.switch.selected();
        let selected = self.switch.update_masked(&scores, &eligible);
        let u = self.control_from(selected);
        if !u.is_finite() {
            return Err(Error::diverged("control output", t));
        }
        let accumulators = self.switch.accumulators().to_vec();

        self.pending = Some(Pending { e1, u, dt });
        self.ideal.step(&self.reference, dt);
        self.t = t + dt;

        Ok(StepRecord {
            t,
            r,
            y,
            x_star1,
            e1,
            e1_bar,
            u,
            selected,
            switched: selected != before,
            e1_tilde,
            z,
            accumulators,
        })
    }
}

pub fn supervisor_step(sup: &mut Supervisor, y: f64, dt: f64) -> Result<StepRecord> {
    sup.step(y, dt)
}

/// Conventional ADRC with one observer and no switching.
#[derive(Clone, Debug)]
pub struct SingleEsoAdrc {
    n: usize,
    b: f64,
    gains: Vec<f64>,
    config: LesoConfig,
    state: LesoState,
    reference: Reference,
    u_limit: Option<f64>,
    observer_hold: InputHold,
    t: f64,
    pending: Option<Pending>,
}

impl SingleEsoAdrc {
    pub fn new(
        poles: &PoleSpec,
        observer: LesoConfig,
        reference: Reference,
        x0: &[f64],
        t0: f64,
    ) -> Result<Self> {
        let n = poles.degree();
        if observer.n() != n || x0.len() != n {
            return Err(Error::Dimension(format!(
                "observer order {} / state {} inconsistent with loop order {n}",
                observer.n(),
                x0.len()
            )));
        }
        let e1_t0 = x0[0] - reference.value(t0);
        Ok(SingleEsoAdrc {
            n,
            b: observer.b(),
            gains: char_poly(poles).gains,
            state: LesoState::init(&observer, e1_t0, t0),
            config: observer,
            reference,
            u_limit: None,
            observer_hold: InputHold::Linear,
            t: t0,
            pending: None,
        })
    }

    pub fn with_u_limit(mut self, limit: Option<f64>) -> Self {
        self.u_limit = limit;
        self
    }

    pub fn with_observer_hold(mut self, hold: InputHold) -> Self {
        self.observer_hold = hold;
        self
    }

    pub fn estimates(&self) -> &[f64] {
        self.state.estimates()
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Returns the control applied over the next period.
    pub fn step(&mut self, y: f64, dt: f64) -> Result<f64> {
        let e1 = y - self.reference.value(self.t);
        self.state = catch_up(
            &self.state,
            &self.config,
            self.pending,
            e1,
            self.observer_hold,
        )?;
        let mut u = adrc_law(self.state.estimates(), &self.gains, self.b);
        if let Some(l) = self.u_limit {
            u = u.clamp(-l, l);
        }
        if !u.is_finite() {
            return Err(Error::diverged("control output", self.t));
        }
        self.pending = Some(Pending { e1, u, dt });
        self.t += dt;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_law_example() {
        let u = adrc_law(&[1.0, 0.0, 5.0], &[22500.0, 300.0], 3.25);
        let expected = -(22500.0 + 5.0) / 3.25;
        assert!((u - expected).abs() < 1e-12);
        assert!((u + 6_924.615_384_615).abs() < 1e-6);
        assert_eq!(adrc_law(&[0.0; 4], &[22500.0, 300.0], 3.25), 0.0);
    }

    #[test]
    fn control_law_ignores_higher_extended_states() {
        let a = adrc_law(&[0.3, -1.0, 2.0, 7.0], &[22500.0, 300.0], 3.25);
        let b = adrc_law(&[0.3, -1.0, 2.0, -9e9], &[22500.0, 300.0], 3.25);
        assert_eq!(a, b);
    }

    #[test]
    fn reference_derivatives() {
        let r = Reference::Sinusoid {
            amplitude: 2.0,
            frequency: 3.0,
            phase: 0.1,
            offset: 1.0,
        };
        let t: f64 = 0.7;
        assert!((r.derivative(t, 0) - (1.0 + 2.0 * (3.0 * t + 0.1).sin())).abs() < 1e-14);
        assert!((r.derivative(t, 1) - 6.0 * (3.0 * t + 0.1).cos()).abs() < 1e-13);
        assert!((r.derivative(t, 2) + 18.0 * (3.0 * t + 0.1).sin()).abs() < 1e-12);
        assert_eq!(r.derivative_bound(2, 1.0), 18.0);

        let p = Reference::Polynomial {
            coefficients: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(p.derivative(2.0, 0), 17.0);
        assert_eq!(p.derivative(2.0, 1), 14.0);
        assert_eq!(p.derivative(2.0, 2), 6.0);
        assert_eq!(p.derivative(2.0, 3), 0.0);
        assert_eq!(
            Reference::Constant { value: 3.0 }.derivatives(1.0, 3),
            vec![3.0, 0.0, 0.0]
        );
    }

    #[test]
    fn ideal_trajectory_equilibrium() {
        let r = Reference::Constant { value: 10.0 };
        let mut tr = IdealTrajectory::new(vec![22500.0, 300.0], &[10.0, 0.0], 0.0).unwrap();
        for _ in 0..1000 {
            tr.step(&r, 1e-4);
        }
        assert_eq!(tr.state(), &[10.0, 0.0]);
    }

    #[test]
    fn ideal_trajectory_critically_damped_settling() {
        // e(t) = (1 + 150 t) e^{-150 t} from e(0) = 1, ė(0) = 0
        let r = Reference::Constant { value: 0.0 };
        let mut tr = IdealTrajectory::new(vec![22500.0, 300.0], &[1.0, 0.0], 0.0).unwrap();
        let dt = 1e-5;
        let mut settled_at = None;
        for k in 1..=6000 {
            tr.step(&r, dt);
            let t = k as f64 * dt;
            let exact = (1.0 + 150.0 * t) * (-150.0 * t).exp();
            assert!((tr.state()[0] - exact).abs() < 1e-9);
            if settled_at.is_none() && tr.state()[0].abs() < 0.02 {
                settled_at = Some(t);
            }
        }
        let ts = settled_at.unwrap();
        assert!((ts - 0.0389).abs() < 1e-3, "settling at {ts}");
    }

    #[test]
    fn sinusoidal_reference_tracked_exactly_from_matching_start() {
        let r = Reference::Sinusoid {
            amplitude: 1.0,
            frequency: 5.0,
            phase: 0.0,
            offset: 0.0,
        };
        let mut tr = IdealTrajectory::new(vec![22500.0, 300.0], &[0.0, 5.0], 0.0).unwrap();
        let dt = 1e-4;
        for k in 1..=10_000 {
            tr.step(&r, dt);
            let t = k as f64 * dt;
            assert!((tr.state()[0] - r.value(t)).abs() < 1e-9);
        }
    }

    fn bank(initial: &[Vec<f64>]) -> SupervisorConfig {
        let poles = PoleSpec::repeated(150.0, 2).unwrap();
        let observers = initial
            .iter()
            .map(|e| {
                LesoConfig::new(2, e.len() + 1, 1500.0, 3.25)
                    .unwrap()
                    .with_initial_estimates(e.clone())
                    .unwrap()
            })
            .collect();
        SupervisorConfig::new(poles, 3.25, observers, 20)
    }

    #[test]
    fn single_member_bank_matches_plain_adrc() {
        let cfg = bank(&[vec![0.0, 0.0]]);
        let r = Reference::Constant { value: 1.0 };
        let mut sup = Supervisor::new(cfg.clone(), r.clone(), &[0.0, 0.0], 0.0).unwrap();
        let mut single =
            SingleEsoAdrc::new(&cfg.poles, cfg.observers[0].clone(), r, &[0.0, 0.0], 0.0).unwrap();
        let mut y = 0.0;
        for k in 0..500 {
            let a = sup.step(y, 1e-4).unwrap().u;
            let b = single.step(y, 1e-4).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "step {k}");
            y += 1e-6 * a;
        }
    }

    #[test]
    fn dropped_observer_leaves_the_rest_running() {
        let cfg = bank(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let mut sup =
            Supervisor::new(cfg, Reference::Constant { value: 0.0 }, &[0.0, 0.0], 0.0).unwrap();
        sup.slots_mut()[0].state.estimates_mut()[1] = f64::INFINITY;
        let rec = sup.step(0.0, 1e-4).unwrap();
        assert_eq!(rec.selected, 1);
        assert_eq!(sup.dropped().len(), 1);
        sup.slots_mut()[1].state.estimates_mut()[0] = f64::NAN;
        assert!(matches!(sup.step(0.0, 1e-4), Err(Error::Divergence { .. })));
    }
}
