//! Linear extended state observer on tracking-error coordinates.
//!
//! An observer of order `n + m` estimates `e_1..e_n` (tracking error and its
//! derivatives) plus the total disturbance `e_{n+1}` and its first `m - 1`
//! derivatives. All poles sit at `-ω_o`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{expm, inf_norm, rk4_step};
use crate::poly::{binomial, leso_gains};

#[derive(Clone, Debug, PartialEq)]
pub struct LesoConfig {
    n: usize,
    m: usize,
    omega_o: f64,
    beta: Vec<f64>,
    b: f64,
    /// `ê_2(t_0)..ê_{n+m}(t_0)`; `ê_1(t_0)` is always the measured `e_1(t_0)`.
    initial_estimates: Vec<f64>,
}

impl LesoConfig {
    /// Observer of total order `order = n + m` with binomial gains.
    pub fn new(n: usize, order: usize, omega_o: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("plant order", "must be at least 1"));
        }
        if order <= n {
            return Err(Error::config(
                "observer.order",
                format!("observer order {order} must exceed plant order {n}"),
            ));
        }
        if b == 0.0 || !b.is_finite() {
            return Err(Error::config("b", "input gain must be finite and nonzero"));
        }
        let beta = leso_gains(order, omega_o)?;
        Ok(LesoConfig {
            n,
            m: order - n,
            omega_o,
            beta,
            b,
            initial_estimates: vec![0.0; order - 1],
        })
    }

    /// Replaces the gain vector. Used for sensitivity experiments where the
    /// observer runs with gains that do not match its nominal bandwidth.
    pub fn with_beta(mut self, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != self.order() {
            return Err(Error::Dimension(format!(
                "gain vector has {} entries, observer order is {}",
                beta.len(),
                self.order()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("observer.beta", "gains must be finite"));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_initial_estimates(mut self, estimates: Vec<f64>) -> Result<Self> {
        if estimates.len() != self.order() - 1 {
            return Err(Error::Dimension(format!(
                "expected {} initial estimates (states 2..{}), got {}",
                self.order() - 1,
                self.order(),
                estimates.len()
            )));
        }
        self.initial_estimates = estimates;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.n + self.m
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_o
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn initial_estimates(&self) -> &[f64] {
        &self.initial_estimates
    }

    /// `Ã` of the scaled error dynamics `ε̇ = ω_o Ã ε + ...`, with first column
    /// `-α_i = -β_i / ω_o^i` and ones on the superdiagonal.
    pub fn scaled_companion(&self) -> DMatrix<f64> {
        let order = self.order();
        let mut a = DMatrix::zeros(order, order);
        for i in 0..order {
            a[(i, 0)] = -self.beta[i] / self.omega_o.powi(i as i32 + 1);
            if i + 1 < order {
                a[(i, i + 1)] = 1.0;
            }
        }
        a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LesoState {
    e_hat: Vec<f64>,
    t: f64,
}

impl LesoState {
    /// Initial estimate: `ê_1 = e_1(t_0)` exactly, the rest from the config.
    pub fn init(cfg: &LesoConfig, e1_t0: f64, t0: f64) -> Self {
        let mut e_hat = Vec::with_capacity(cfg.order());
        e_hat.push(e1_t0);
        e_hat.extend_from_slice(&cfg.initial_estimates);
        LesoState { e_hat, t: t0 }
    }

    pub fn estimates(&self) -> &[f64] {
        &self.e_hat
    }

    pub fn estimates_mut(&mut self) -> &mut [f64] {
        &mut self.e_hat
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

/// One RK4 step of `ê̇ = (A - βC) ê + β e_1 + B b u` with `e_1` and `u` held.
pub fn leso_step(
    state: &LesoState,
    cfg: &LesoConfig,
    e1_measured: f64,
    u: f64,
    dt: f64,
) -> Result<LesoState> {
    leso_step_interpolated(state, cfg, e1_measured, e1_measured, u, dt)
}

/// One RK4 step over a sampling interval whose end-point measurements are
/// both known: `e_1` varies linearly from `e1_start` to `e1_end`, `u` is held.
pub fn leso_step_interpolated(
    state: &LesoState,
    cfg: &LesoConfig,
    e1_start: f64,
    e1_end: f64,
    u: f64,
    dt: f64,
) -> Result<LesoState> {
    let order = cfg.order();
    let n = cfg.n;
    let bu = cfg.b * u;
    let beta = &cfg.beta;
    let slope = (e1_end - e1_start) / dt;
    let next = rk4_step(&state.e_hat, dt, |tau, x, dx| {
        let innovation = e1_start + slope * tau - x[0];
        for i in 0..order {
            let chain = if i + 1 < order { x[i + 1] } else { 0.0 };
            dx[i] = chain + beta[i] * innovation;
        }
        dx[n - 1] += bu;
    });
    let t = state.t + dt;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::diverged("observer", t));
    }
    Ok(LesoState { e_hat: next, t })
}

/// Scaled estimation error `ε_i = ẽ_i / ω_o^{i-1}` with its running sup norm.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScaledError {
    pub epsilon: Vec<f64>,
    pub gamma: f64,
}

impl ScaledError {
    pub fn update(&mut self, e_tilde: &[f64], omega_o: f64) -> f64 {
        self.epsilon.clear();
        let mut scale = 1.0;
        for &e in e_tilde {
            self.epsilon.push(e / scale);
            scale *= omega_o;
        }
        let norm = self.epsilon.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        self.gamma = self.gamma.max(norm);
        norm
    }
}

/// `G_i = Σ_{j=0}^{i-1} C(N - i + j, N - i)` for an observer of order `N`.
pub fn tail_coefficient(order: usize, i: usize) -> Result<u64> {
    if i == 0 || i > order {
        return Err(Error::Dimension(format!(
            "state index {i} outside 1..={order}"
        )));
    }
    let base = (order - i) as u32;
    Ok((0..i as u32).map(|j| binomial(base + j, base) as u64).sum())
}

/// `G = max_i G_i`.
pub fn scaled_tail_coefficient(order: usize) -> u64 {
    (1..=order)
        .map(|i| tail_coefficient(order, i).unwrap())
        .max()
        .unwrap_or(0)
}

/// `‖exp(ω_o Ã τ)‖_∞`.
pub fn scaled_transition_norm(cfg: &LesoConfig, tau: f64) -> f64 {
    inf_norm(&expm(&(cfg.scaled_companion() * (cfg.omega_o * tau))))
}

/// Bound on `|ẽ_i(t)|`, `τ = t - t_0`:
/// `ω_o^{i-1} ‖e^{ω_o Ã τ}‖ ‖ε(t_0)‖ + (h_1 + h_2) G_i / ω_o^{n+m-i+1}`.
pub fn estimation_error_bound(
    cfg: &LesoConfig,
    eps0_norm: f64,
    h1: f64,
    h2: f64,
    tau: f64,
    i: usize,
) -> Result<f64> {
    let norm = scaled_transition_norm(cfg, tau);
    estimation_error_bound_with_norm(cfg, norm, eps0_norm, h1, h2, i)
}

/// Same as [`estimation_error_bound`] with the transition-matrix norm supplied.
pub fn estimation_error_bound_with_norm(
    cfg: &LesoConfig,
    transition_norm: f64,
    eps0_norm: f64,
    h1: f64,
    h2: f64,
    i: usize,
) -> Result<f64> {
    if cfg.omega_o.is_nan() || cfg.omega_o <= 0.0 {
        return Err(Error::config("omega_o", "must be positive"));
    }
    let order = cfg.order();
    let g = tail_coefficient(order, i)? as f64;
    let w = cfg.omega_o;
    Ok(w.powi(i as i32 - 1) * transition_norm * eps0_norm
        + (h1 + h2) * g / w.powi((order - i + 1) as i32))
}

/// Bound on `‖ε(t)‖_∞`: `‖e^{ω_o Ã τ}‖ ‖ε(t_0)‖ + (h_1 + h_2) G / ω_o^{n+m}`.
pub fn scaled_error_bound_with_norm(
    cfg: &LesoConfig,
    transition_norm: f64,
    eps0_norm: f64,
    h1: f64,
    h2: f64,
) -> f64 {
    let order = cfg.order();
    transition_norm * eps0_norm
        + (h1 + h2) * scaled_tail_coefficient(order) as f64 / cfg.omega_o.powi(order as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gi_examples() {
        assert_eq!(tail_coefficient(3, 1).unwrap(), 1);
        assert_eq!(tail_coefficient(3, 3).unwrap(), 3);
        assert_eq!(tail_coefficient(4, 4).unwrap(), 4);
        assert!(tail_coefficient(3, 0).is_err());
        assert!(tail_coefficient(3, 4).is_err());
        assert_eq!(scaled_tail_coefficient(3), 3);
    }

    #[test]
    fn bound_examples() {
        let cfg = LesoConfig::new(2, 3, 10.0, 1.0).unwrap();
        for i in 1..=3 {
            for tau in [0.0, 0.1, 1.0] {
                assert_eq!(
                    estimation_error_bound(&cfg, 0.0, 0.0, 0.0, tau, i).unwrap(),
                    0.0
                );
            }
        }
        // steady tail, i = n + m: (h1 + h2) G_3 / ω_o
        let tail = estimation_error_bound(&cfg, 0.0, 0.4, 0.6, 5.0, 3).unwrap();
        assert!((tail - 0.3).abs() < 1e-15);
    }

    #[test]
    fn third_order_rows_use_binomial_gains() {
        let w = 1500.0;
        let cfg = LesoConfig::new(2, 3, w, 3.25).unwrap();
        assert_eq!(cfg.beta(), &[3.0 * w, 3.0 * w * w, w * w * w]);
        // a single Euler-sized check of the update rows through the RK4 stage k1
        let state = LesoState {
            e_hat: vec![0.0, 0.0, 0.0],
            t: 0.0,
        };
        let dt = 1e-9;
        let next = leso_step(&state, &cfg, 1.0, 0.0, dt).unwrap();
        let rate: Vec<f64> = next.estimates().iter().map(|v| v / dt).collect();
        assert!((rate[0] / (3.0 * w) - 1.0).abs() < 1e-4);
        assert!((rate[1] / (3.0 * w * w) - 1.0).abs() < 1e-3);
        assert!((rate[2] / (w * w * w) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn input_enters_row_n_only() {
        let cfg = LesoConfig::new(2, 4, 1.0, 2.0).unwrap();
        let state = LesoState::init(&cfg, 0.0, 0.0);
        let next = leso_step(&state, &cfg, 0.0, 1.0, 1e-6).unwrap();
        let e = next.estimates();
        assert!(e[1] > 0.0);
        assert!(e[2].abs() < 1e-12 && e[3].abs() < 1e-12);
    }

    #[test]
    fn zero_error_stays_zero_without_disturbance_forcing() {
        // Constant disturbance c balanced by u = -c/b, ê = e exactly at t_0:
        // e_{n+1}^{(m)} = 0 for m = 1, so ẽ stays at zero.
        let c = 2.0;
        let b = 1.6;
        let cfg = LesoConfig::new(2, 3, 1500.0, b)
            .unwrap()
            .with_initial_estimates(vec![0.0, c])
            .unwrap();
        let mut est = LesoState::init(&cfg, 0.1, 0.0);
        let u = -c / b;
        for _ in 0..20_000 {
            est = leso_step(&est, &cfg, 0.1, u, 1e-5).unwrap();
        }
        let e = est.estimates();
        assert!((e[0] - 0.1).abs() < 1e-10);
        assert!(e[1].abs() < 1e-10);
        assert!((e[2] - c).abs() < 1e-10);
    }

    #[test]
    fn constant_disturbance_is_recovered() {
        // ẽ_3(t) = c e^{-ωt} (1 + ωt + (ωt)^2 / 2) from ẽ(0) = [0, 0, c]
        let c = 5.0;
        let w = 100.0;
        let cfg = LesoConfig::new(2, 3, w, 1.0).unwrap();
        let mut est = LesoState::init(&cfg, 0.0, 0.0);
        let dt = 1e-6;
        let mut t = 0.0;
        let mut k = 0usize;
        for horizon in [10.0, 12.0] {
            let steps = (horizon / w / dt).round() as usize;
            while k < steps {
                // exact double-integrator output, sampled
                let e1 = 0.5 * c * t * t;
                est = leso_step(&est, &cfg, e1, 0.0, dt).unwrap();
                k += 1;
                t = k as f64 * dt;
            }
            let x: f64 = w * t;
            let oracle = c * (-x).exp() * (1.0 + x + 0.5 * x * x);
            let err = c - est.estimates()[2];
            assert!((err - oracle).abs() < 1e-3 * oracle, "{err} vs {oracle}");
            if horizon == 12.0 {
                assert!(err.abs() < 1e-3 * c);
            }
        }
    }

    #[test]
    fn scaled_error_gamma_is_monotone() {
        let mut s = ScaledError::default();
        s.update(&[1.0, 10.0], 10.0);
        assert_eq!(s.epsilon, vec![1.0, 1.0]);
        s.update(&[0.1, 0.0], 10.0);
        assert_eq!(s.gamma, 1.0);
        s.update(&[0.0, 30.0], 10.0);
        assert_eq!(s.gamma, 3.0);
    }

    #[test]
    fn scaled_companion_has_unit_bandwidth_poles() {
        // Ã has characteristic polynomial (s + 1)^N, so exp(ω_o Ã τ) decays
        let cfg = LesoConfig::new(2, 4, 1500.0, 1.0).unwrap();
        let a = cfg.scaled_companion();
        assert!((a[(2, 0)] + 4.0).abs() < 1e-12);
        assert!(scaled_transition_norm(&cfg, 0.0) == 1.0);
        assert!(scaled_transition_norm(&cfg, 0.05) < 1e-10);
    }

    #[test]
    fn divergence_is_flagged() {
        let cfg = LesoConfig::new(2, 3, 1.0, 1.0).unwrap();
        let state = LesoState::init(&cfg, 0.0, 0.0);
        assert!(leso_step(&state, &cfg, f64::NAN, 0.0, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LesoConfig::new(2, 2, 1.0, 1.0).is_err());
        assert!(LesoConfig::new(2, 3, 1.0, 0.0).is_err());
        assert!(LesoConfig::new(2, 3, -1.0, 1.0).is_err());
        let cfg = LesoConfig::new(2, 3, 1.0, 1.0).unwrap();
        assert!(cfg.clone().with_beta(vec![1.0]).is_err());
        assert!(cfg.with_initial_estimates(vec![0.0]).is_err());
    }
}
