use serde::{Deserialize, Serialize};

/// Anything that can act as the lumped disturbance `f(x, t)` of a plant.
pub trait Disturbance {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// `d^k f / dt^k` when `f` depends on time only.
    fn time_derivative(&self, _t: f64, _k: usize) -> Option<f64> {
        None
    }
}

impl<F> Disturbance for F
where
    F: Fn(f64, &[f64]) -> f64,
{
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self(t, x)
    }
}

/// Configurable disturbance signals used by the scenarios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSignal {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Jump of `amplitude` at `time`. Not differentiable at the jump.
    Step {
        time: f64,
        amplitude: f64,
    },
    /// `amplitude * sin(frequency * t + phase)`, frequency in rad/s.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Sum {
        terms: Vec<DisturbanceSignal>,
    },
    /// Velocity-dependent friction acting on `x_2`: Coulomb plus Stribeck
    /// bump plus viscous, smoothed through zero velocity by a `tanh` of width
    /// `smoothing_velocity`.
    StickSlip {
        coulomb: f64,
        static_friction: f64,
        stribeck_velocity: f64,
        viscous: f64,
        smoothing_velocity: f64,
    },
}

impl DisturbanceSignal {
    /// True when the value does not depend on the plant state.
    pub fn is_time_only(&self) -> bool {
        match self {
            DisturbanceSignal::StickSlip { .. } => false,
            DisturbanceSignal::Sum { terms } => terms.iter().all(|t| t.is_time_only()),
            _ => true,
        }
    }

    /// `sup_t |f^(k)(t)|`, or `None` when the signal is not `k` times
    /// differentiable (or depends on the state).
    pub fn derivative_bound(&self, k: usize) -> Option<f64> {
        match self {
            DisturbanceSignal::Zero => Some(0.0),
            DisturbanceSignal::Constant { value } => Some(if k == 0 { value.abs() } else { 0.0 }),
            DisturbanceSignal::Step { amplitude, .. } => {
                if k == 0 {
                    Some(amplitude.abs())
                } else {
                    None
                }
            }
            DisturbanceSignal::Sinusoid {
                amplitude,
                frequency,
                ..
            } => Some(amplitude.abs() * frequency.abs().powi(k as i32)),
            DisturbanceSignal::Sum { terms } => terms
                .iter()
                .map(|t| t.derivative_bound(k))
                .sum::<Option<f64>>(),
            DisturbanceSignal::StickSlip { .. } => None,
        }
    }

    /// `max_{1 <= i <= m} sup |f^(i)|`, the constant bounding the first `m`
    /// derivatives.
    pub fn smoothness_bound(&self, m: usize) -> Option<f64> {
        (1..=m)
            .map(|i| self.derivative_bound(i))
            .try_fold(0.0, |acc, b| b.map(|b| f64::max(acc, b)))
    }
}

impl Disturbance for DisturbanceSignal {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            DisturbanceSignal::Zero => 0.0,
            DisturbanceSignal::Constant { value } => *value,
            DisturbanceSignal::Step { time, amplitude } => {
                if t >= *time {
                    *amplitude
                } else {
                    0.0
                }
            }
            DisturbanceSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            DisturbanceSignal::Sum { terms } => terms.iter().map(|d| d.value(t, x)).sum(),
            DisturbanceSignal::StickSlip {
                coulomb,
                static_friction,
                stribeck_velocity,
                viscous,
                smoothing_velocity,
            } => {
                let v = x.get(1).copied().unwrap_or(0.0);
                let level = coulomb
                    + (static_friction - coulomb) * (-(v / stribeck_velocity).powi(2)).exp();
                -level * (v / smoothing_velocity).tanh() - viscous * v
            }
        }
    }

    fn time_derivative(&self, t: f64, k: usize) -> Option<f64> {
        match self {
            DisturbanceSignal::Zero => Some(0.0),
            DisturbanceSignal::Constant { value } => Some(if k == 0 { *value } else { 0.0 }),
            DisturbanceSignal::Step { .. } => {
                if k == 0 {
                    Some(self.value(t, &[]))
                } else {
                    Some(0.0)
                }
            }
            DisturbanceSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let arg = frequency * t + phase + k as f64 * std::f64::consts::FRAC_PI_2;
                Some(amplitude * frequency.powi(k as i32) * arg.sin())
            }
            DisturbanceSignal::Sum { terms } => terms.iter().map(|d| d.time_derivative(t, k)).sum(),
            DisturbanceSignal::StickSlip { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_derivatives_match_finite_differences() {
        let d = DisturbanceSignal::Sinusoid {
            amplitude: 2.0,
            frequency: 3.0,
            phase: 0.4,
        };
        let h = 1e-5;
        for k in 0..3 {
            let t = 0.7;
            let fd = (d.time_derivative(t + h, k).unwrap() - d.time_derivative(t - h, k).unwrap())
                / (2.0 * h);
            let exact = d.time_derivative(t, k + 1).unwrap();
            assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0));
        }
        assert_eq!(d.derivative_bound(2), Some(18.0));
        assert_eq!(d.smoothness_bound(2), Some(18.0));
    }

    #[test]
    fn step_is_not_smooth() {
        let d = DisturbanceSignal::Step {
            time: 0.1,
            amplitude: 1.0,
        };
        assert_eq!(d.value(0.05, &[]), 0.0);
        assert_eq!(d.value(0.1, &[]), 1.0);
        assert_eq!(d.smoothness_bound(1), None);
    }

    #[test]
    fn stick_slip_opposes_velocity() {
        let d = DisturbanceSignal::StickSlip {
            coulomb: 1.0,
            static_friction: 1.5,
            stribeck_velocity: 0.01,
            viscous: 0.1,
            smoothing_velocity: 1e-4,
        };
        assert!(d.value(0.0, &[0.0, 0.5]) < 0.0);
        assert!(d.value(0.0, &[0.0, -0.5]) > 0.0);
        assert_eq!(d.value(0.0, &[0.0, 0.0]), 0.0);
        assert!(!d.is_time_only());
    }

    #[test]
    fn sum_bounds_add() {
        let d = DisturbanceSignal::Sum {
            terms: vec![
                DisturbanceSignal::Constant { value: 1.0 },
                DisturbanceSignal::Sinusoid {
                    amplitude: 1.0,
                    frequency: 2.0,
                    phase: 0.0,
                },
            ],
        };
        assert_eq!(d.derivative_bound(1), Some(2.0));
        assert_eq!(d.time_derivative(0.0, 0), Some(1.0));
    }
}
