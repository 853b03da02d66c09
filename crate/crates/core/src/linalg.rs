//! Small dense helpers shared by the integrators and bound calculators.

use nalgebra::DMatrix;

/// One classical fourth-order Runge-Kutta step of `ẋ = f(τ, x)` where `τ` is
/// the offset from the start of the step.
pub fn rk4_step<F>(x: &[f64], dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(0.0, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(dt, &tmp, &mut k4);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Matrix exponential by Padé scaling and squaring.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().exp()
}

/// `A - B K^T` for the integrator chain with feedback row `k_1..k_n`.
pub fn closed_loop_matrix(gains: &[f64]) -> DMatrix<f64> {
    let n = gains.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for (j, k) in gains.iter().enumerate() {
        a[(n - 1, j)] = -k;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_exact_for_cubic_growth() {
        // ẋ = 3τ², exact for RK4 over a single step
        let x = rk4_step(&[1.0], 0.5, |tau, _, dx| dx[0] = 3.0 * tau * tau);
        assert!((x[0] - 1.125).abs() < 1e-15);
    }

    #[test]
    fn expm_of_nilpotent_chain() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        let e = expm(&(a * 2.0));
        assert!((e[(0, 1)] - 2.0).abs() < 1e-14);
        assert!((inf_norm(&e) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn closed_loop_companion() {
        let a = closed_loop_matrix(&[2.0, 3.0]);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], -2.0);
        assert_eq!(a[(1, 1)], -3.0);
    }
}
