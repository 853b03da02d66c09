use std::fmt;

use serde::{Deserialize, Serialize};

use super::trace::SimulationTrace;

/// Quadrature used for the integral of absolute tracking error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IaeRule {
    /// `Σ_{k<N} |e_k| dt`.
    #[default]
    Rectangle,
    /// `Σ_{k<N} (|e_k| + |e_{k+1}|) dt / 2`.
    Trapezoid,
}

/// Integral of `|e|` over uniformly spaced samples.
pub fn iae_samples(values: &[f64], dt: f64, rule: IaeRule) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() - 1;
    match rule {
        IaeRule::Rectangle => values[..n].iter().map(|v| v.abs()).sum::<f64>() * dt,
        IaeRule::Trapezoid => {
            values
                .windows(2)
                .map(|w| w[0].abs() + w[1].abs())
                .sum::<f64>()
                * dt
                * 0.5
        }
    }
}

/// IAE of `ē_1` over a trace.
pub fn iae(trace: &SimulationTrace, rule: IaeRule) -> f64 {
    let e: Vec<f64> = trace.rows.iter().map(|r| r.e1_bar).collect();
    iae_samples(&e, trace.dt, rule)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LawMetrics {
    pub label: String,
    pub iae: f64,
    pub sup_error: f64,
}

impl LawMetrics {
    pub fn from_trace(label: impl Into<String>, trace: &SimulationTrace, rule: IaeRule) -> Self {
        LawMetrics {
            label: label.into(),
            iae: iae(trace, rule),
            sup_error: trace.rows.iter().fold(0.0, |m, r| m.max(r.e1_bar.abs())),
        }
    }
}

/// Size of the control and output jumps at switch instants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SwitchTransient {
    pub switches: usize,
    /// Largest `|u_k - u_{k-1}|` over samples where the selection changed.
    pub max_du_at_switch: f64,
    /// Largest `|u_k - u_{k-1}|` over all other samples.
    pub max_du_elsewhere: f64,
    /// `max u - min u` over the run.
    pub u_range: f64,
    /// Largest `|y_{k+1} - y_k|` over steps that start at a switch.
    pub max_dy_at_switch: f64,
    pub max_dy_elsewhere: f64,
}

impl SwitchTransient {
    pub fn from_trace(trace: &SimulationTrace) -> Self {
        let rows = &trace.rows;
        let mut st = SwitchTransient::default();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, row) in rows.iter().enumerate() {
            lo = lo.min(row.u);
            hi = hi.max(row.u);
            if k == 0 {
                continue;
            }
            let switched = row.selected != rows[k - 1].selected;
            let du = (row.u - rows[k - 1].u).abs();
            let dy = rows
                .get(k + 1)
                .map(|next| (next.y - row.y).abs())
                .unwrap_or(0.0);
            if switched {
                st.switches += 1;
                st.max_du_at_switch = st.max_du_at_switch.max(du);
                st.max_dy_at_switch = st.max_dy_at_switch.max(dy);
            } else {
                st.max_du_elsewhere = st.max_du_elsewhere.max(du);
                st.max_dy_elsewhere = st.max_dy_elsewhere.max(dy);
            }
        }
        st.u_range = if rows.is_empty() { 0.0 } else { hi - lo };
        st
    }

    /// Jump at switches within `fraction` of the control range, and no output
    /// step at a switch larger than the largest step elsewhere.
    pub fn within(&self, fraction: f64) -> bool {
        self.max_du_at_switch <= fraction * self.u_range
            && self.max_dy_at_switch <= self.max_dy_elsewhere
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub config_hash: String,
    /// Switched law first, then one entry per single-observer baseline.
    pub laws: Vec<LawMetrics>,
    pub switch_count: usize,
    /// Observer chosen at the end of each window.
    pub window_selections: Vec<usize>,
    pub observers: usize,
    pub dropped: Vec<(usize, f64)>,
    pub transient: SwitchTransient,
}

impl MetricsReport {
    pub fn switched(&self) -> &LawMetrics {
        &self.laws[0]
    }

    pub fn baselines(&self) -> &[LawMetrics] {
        &self.laws[1..]
    }

    /// Fraction of windows that ended with observer `j` selected.
    pub fn selection_share(&self, j: usize) -> f64 {
        if self.window_selections.is_empty() {
            return 0.0;
        }
        let hits = self.window_selections.iter().filter(|&&s| s == j).count();
        hits as f64 / self.window_selections.len() as f64
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        writeln!(f, "config sha256 {}", self.config_hash)?;
        writeln!(f, "{:<40} {:>14} {:>14}", "law", "IAE", "sup|e1_bar|")?;
        for law in &self.laws {
            writeln!(
                f,
                "{:<40} {:>14.6e} {:>14.6e}",
                law.label, law.iae, law.sup_error
            )?;
        }
        writeln!(
            f,
            "switches {}  windows {}",
            self.switch_count,
            self.window_selections.len()
        )?;
        for j in 0..self.observers {
            writeln!(
                f,
                "  observer {j}: {:.1}% of windows",
                100.0 * self.selection_share(j)
            )?;
        }
        if self.switch_count > 0 {
            let t = &self.transient;
            writeln!(
                f,
                "max |du| at switch {:.4e} (range {:.4e}), max |dy| at switch {:.4e} vs {:.4e} elsewhere",
                t.max_du_at_switch, t.u_range, t.max_dy_at_switch, t.max_dy_elsewhere
            )?;
        }
        for (j, t) in &self.dropped {
            writeln!(f, "observer {j} dropped at t = {t}")?;
        }
        Ok(())
    }
}
