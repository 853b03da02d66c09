//! Online tracking-error surrogate and switching index.
//!
//! `z = L^{-1}[g_n(s)/Δ(s) · Ẽ_1(s)]` is what the tracking error would be if
//! the observer's initial estimation errors were zero. It is computed from
//! the measurable `ẽ_1 = e_1 - ê_1` by a state-space filter, so every observer
//! in a bank can be scored whether or not it is driving the plant.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{closed_loop_matrix, expm, inf_norm, rk4_step};
use crate::poly::{
    char_poly, decay_polys, DecayPolys, GFamily, PoleSpec, Poly, ResidueTable, Residues,
};

/// How the filter input is interpolated between samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputHold {
    /// Sample held over the following step.
    #[default]
    Zero,
    /// Linear between the previous and the current sample; the state is
    /// brought up to the current sample before the output is formed.
    Linear,
}

/// Controllable-canonical realisation of `g_n/Δ = 1 + N(s)/Δ(s)`,
/// `N = g_n - Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZFilter {
    /// `δ_0..δ_{n-1}`, coefficients of the monic denominator below `s^n`.
    den: Vec<f64>,
    /// `N_0..N_{n-1}`.
    num: Vec<f64>,
    state: Vec<f64>,
    hold: InputHold,
    last_input: Option<f64>,
    z: f64,
}

pub fn make_zfilter(g_n: &Poly, delta: &Poly) -> Result<ZFilter> {
    if g_n.degree() != delta.degree() || delta.degree() == 0 {
        return Err(Error::Dimension(format!(
            "numerator degree {} and denominator degree {} must match and be positive",
            g_n.degree(),
            delta.degree()
        )));
    }
    if !g_n.is_monic() || !delta.is_monic() {
        return Err(Error::Dimension("both polynomials must be monic".into()));
    }
    let n = delta.degree();
    let strictly_proper = g_n - delta;
    Ok(ZFilter {
        den: delta.coeffs()[..n].to_vec(),
        num: (0..n).map(|k| strictly_proper.coeff(k)).collect(),
        state: vec![0.0; n],
        hold: InputHold::Zero,
        last_input: None,
        z: 0.0,
    })
}

impl ZFilter {
    pub fn with_hold(mut self, hold: InputHold) -> Self {
        self.hold = hold;
        self
    }

    pub fn order(&self) -> usize {
        self.den.len()
    }

    /// Numerator of the strictly proper part, ascending.
    pub fn strictly_proper_numerator(&self) -> Poly {
        Poly::new(self.num.clone())
    }

    /// Direct feedthrough, always one.
    pub fn feedthrough(&self) -> f64 {
        1.0
    }

    /// `(A, B, C, D)` of the realisation.
    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
        let n = self.order();
        let a = closed_loop_matrix(&self.den);
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        let c = DMatrix::from_row_slice(1, n, &self.num);
        (a, b, c, 1.0)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn output(&self) -> f64 {
        self.z
    }

    fn advance(&mut self, from: f64, to: f64, dt: f64) {
        let n = self.order();
        let den = &self.den;
        self.state = rk4_step(&self.state, dt, |tau, x, dx| {
            let input = from + (to - from) * tau / dt;
            dx[..n - 1].copy_from_slice(&x[1..]);
            dx[n - 1] = input - den.iter().zip(x).map(|(d, v)| d * v).sum::<f64>();
        });
    }

    fn project(&self, input: f64) -> f64 {
        self.num
            .iter()
            .zip(&self.state)
            .map(|(c, x)| c * x)
            .sum::<f64>()
            + input
    }

    /// Feeds the sample `ẽ_1(t_k)` and returns `z(t_k)`.
    pub fn step(&mut self, e1_tilde: f64, dt: f64) -> Result<f64> {
        if !e1_tilde.is_finite() {
            return Err(Error::diverged("z filter input", f64::NAN));
        }
        let z = match self.hold {
            InputHold::Zero => {
                let z = self.project(e1_tilde);
                self.advance(e1_tilde, e1_tilde, dt);
                z
            }
            InputHold::Linear => {
                if let Some(prev) = self.last_input {
                    self.advance(prev, e1_tilde, dt);
                }
                self.project(e1_tilde)
            }
        };
        self.last_input = Some(e1_tilde);
        if !z.is_finite() || self.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::diverged("z filter", f64::NAN));
        }
        self.z = z;
        Ok(z)
    }
}

/// Free-function form of [`ZFilter::step`].
pub fn zfilter_step(f: &mut ZFilter, e1_tilde: f64, dt: f64) -> Result<f64> {
    f.step(e1_tilde, dt)
}

/// What to do when two accumulated scores are equal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    KeepCurrent,
    LowestIndex,
}

/// Windowed `|z|` accumulator and the resulting observer choice.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchIndex {
    accumulators: Vec<f64>,
    window: usize,
    filled: usize,
    selected: usize,
    tie_rule: TieRule,
    decisions: Vec<usize>,
}

impl SwitchIndex {
    pub fn new(observers: usize, window: usize, initial: usize) -> Result<Self> {
        if observers == 0 {
            return Err(Error::config("observers", "need at least one observer"));
        }
        if window == 0 {
            return Err(Error::config(
                "window",
                "window must be at least one sample",
            ));
        }
        if initial >= observers {
            return Err(Error::config(
                "initial_selection",
                format!("index {initial} out of range for {observers} observers"),
            ));
        }
        Ok(SwitchIndex {
            accumulators: vec![0.0; observers],
            window,
            filled: 0,
            selected: initial,
            tie_rule: TieRule::KeepCurrent,
            decisions: Vec::new(),
        })
    }

    pub fn with_tie_rule(mut self, rule: TieRule) -> Self {
        self.tie_rule = rule;
        self
    }

    pub fn selected(&self) -> usize {
        self.selected
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accumulators
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Selection made at each completed window, in order.
    pub fn decisions(&self) -> &[usize] {
        &self.decisions
    }

    pub fn update(&mut self, z_values: &[f64]) -> usize {
        let all = vec![true; z_values.len()];
        self.update_masked(z_values, &all)
    }

    /// Adds `|z_j|` to each accumulator; at a window boundary selects the
    /// eligible observer with the smallest sum and clears the sums. If the
    /// current choice has become ineligible it is replaced immediately.
    pub fn update_masked(&mut self, z_values: &[f64], eligible: &[bool]) -> usize {
        debug_assert_eq!(z_values.len(), self.accumulators.len());
        for (acc, z) in self.accumulators.iter_mut().zip(z_values) {
            *acc += z.abs();
        }
        self.filled += 1;
        let boundary = self.filled == self.window;
        if boundary || !eligible[self.selected] {
            if let Some(best) = self.argmin(eligible) {
                self.selected = best;
            }
        }
        if boundary {
            self.decisions.push(self.selected);
            self.accumulators.iter_mut().for_each(|a| *a = 0.0);
            self.filled = 0;
        }
        self.selected
    }

    fn argmin(&self, eligible: &[bool]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (j, &acc) in self.accumulators.iter().enumerate() {
            if !eligible[j] {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) if acc < self.accumulators[b] => Some(j),
                Some(b) => Some(b),
            };
        }
        let best = best?;
        if self.tie_rule == TieRule::KeepCurrent
            && eligible[self.selected]
            && self.accumulators[self.selected] == self.accumulators[best]
        {
            return Some(self.selected);
        }
        Some(best)
    }
}

/// Free-function form of [`SwitchIndex::update`].
pub fn switch_update(idx: &mut SwitchIndex, z_values: &[f64]) -> usize {
    idx.update(z_values)
}

/// Impulse responses of `g_{n-i}/Δ`, `i = 2..n`, for evaluating the gap
/// `z(t) - ē_1(t) = Σ_{i=2}^{n} Σ_j e^{-s_j τ} p_{i,j}(τ) ẽ_i(t_0)`.
#[derive(Clone, Debug)]
pub struct GapModel {
    decays: Vec<DecayPolys>,
}

impl GapModel {
    pub fn new(table: &ResidueTable, spec: &PoleSpec) -> Self {
        let n = table.n();
        GapModel {
            decays: (2..=n).map(|i| decay_polys(table.row(i), spec)).collect(),
        }
    }

    pub fn from_family(family: &GFamily, spec: &PoleSpec) -> Result<Self> {
        Ok(GapModel::new(&ResidueTable::build(family, spec)?, spec))
    }

    /// `e_tilde_t0[i-1]` holds `ẽ_i(t_0)`; entries beyond `n` are ignored.
    pub fn gap(&self, e_tilde_t0: &[f64], tau: f64) -> f64 {
        self.decays
            .iter()
            .enumerate()
            .map(|(k, d)| e_tilde_t0.get(k + 1).copied().unwrap_or(0.0) * d.eval(tau))
            .sum()
    }

    /// `Σ_i |ẽ_i(t_0)| Σ_j e^{-s_j τ} |p_{i,j}|(τ)`, dominating `|gap|`.
    pub fn envelope(&self, e_tilde_t0: &[f64], tau: f64) -> f64 {
        self.decays
            .iter()
            .enumerate()
            .map(|(k, d)| e_tilde_t0.get(k + 1).copied().unwrap_or(0.0).abs() * d.envelope(tau))
            .sum()
    }
}

/// Gap between the surrogate and the true tracking error at `τ = t - t_0`.
pub fn surrogate_gap(table: &ResidueTable, spec: &PoleSpec, e_tilde_t0: &[f64], tau: f64) -> f64 {
    GapModel::new(table, spec).gap(e_tilde_t0, tau)
}

/// Closed-loop tracking-error bound
/// `|ē_1(t)| <= ‖e^{A* τ}‖_∞ ‖ē(t_0)‖_∞ + Σ_j Σ_k |c_{n,j,k}| / s_j^k · Δ(ω_o) · γ(t)`,
/// where `c_{n,j,k}` are the residues of `1/Δ` (the row for `g_0`).
#[derive(Clone, Debug)]
pub struct TrackingErrorBound {
    closed_loop: DMatrix<f64>,
    gain: f64,
}

impl TrackingErrorBound {
    pub fn new(spec: &PoleSpec, residue_row_n: &Residues, omega_o: f64) -> Self {
        let cp = char_poly(spec);
        let l1: f64 = spec
            .poles()
            .iter()
            .zip(&residue_row_n.per_pole)
            .map(|(p, cs)| {
                cs.iter()
                    .enumerate()
                    .map(|(k, c)| c.abs() / p.rate.powi(k as i32 + 1))
                    .sum::<f64>()
            })
            .sum();
        TrackingErrorBound {
            closed_loop: closed_loop_matrix(&cp.gains),
            gain: l1 * cp.poly.eval(omega_o),
        }
    }

    /// Coefficient multiplying `γ`.
    pub fn gamma_gain(&self) -> f64 {
        self.gain
    }

    pub fn transition_norm(&self, tau: f64) -> f64 {
        inf_norm(&expm(&(&self.closed_loop * tau)))
    }

    pub fn closed_loop_matrix(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }

    pub fn eval_with_norm(&self, transition_norm: f64, ebar_t0_norm: f64, gamma: f64) -> f64 {
        transition_norm * ebar_t0_norm + self.gain * gamma
    }

    pub fn eval(&self, ebar_t0_norm: f64, gamma: f64, tau: f64) -> f64 {
        let norm = if ebar_t0_norm == 0.0 {
            0.0
        } else {
            self.transition_norm(tau)
        };
        self.eval_with_norm(norm, ebar_t0_norm, gamma)
    }
}

pub fn tracking_error_bound(
    spec: &PoleSpec,
    residue_row_n: &Residues,
    omega_o: f64,
    ebar_t0_norm: f64,
    gamma: f64,
    tau: f64,
) -> f64 {
    TrackingErrorBound::new(spec, residue_row_n, omega_o).eval(ebar_t0_norm, gamma, tau)
}
