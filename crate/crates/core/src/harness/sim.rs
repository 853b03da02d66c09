use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::controller::{StepRecord, Supervisor};
use crate::error::{Error, Result};
use crate::plant::{ChainPlant, Plant, RfcPlant};

use super::config::{PlantConfig, ScenarioConfig};
use super::metrics::{LawMetrics, MetricsReport, SwitchTransient};
use super::trace::{SimulationTrace, TraceRow};

/// Plant state and supervisor decision at one sample instant.
#[derive(Clone, Debug)]
pub struct Sample {
    pub k: usize,
    pub record: StepRecord,
    /// Noise-free output.
    pub y: f64,
    /// Chain states `x_1..x_n`.
    pub x: Vec<f64>,
    /// `e_1..e_N` of the extended error state, `N` the largest observer
    /// order, when every needed disturbance derivative is known.
    pub true_errors: Option<Vec<f64>>,
    /// `f - r^{(n)}`.
    pub disturbance: f64,
}

/// Plant, supervisor and noise source advanced one sample at a time.
pub struct Simulation {
    plant: Box<dyn Plant + Send>,
    sup: Supervisor,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
    resolution: f64,
    dt: f64,
    steps: usize,
    k: usize,
    max_order: usize,
}

pub fn build_plant(cfg: &PlantConfig) -> Result<Box<dyn Plant + Send>> {
    Ok(match cfg {
        PlantConfig::Chain {
            input_gain,
            initial_state,
            disturbance,
        } => Box::new(ChainPlant::new(
            *input_gain,
            initial_state.clone(),
            disturbance.clone(),
        )?),
        PlantConfig::Rfc {
            params,
            initial_state,
            disturbance,
        } => Box::new(RfcPlant::new(
            params.clone(),
            *initial_state,
            disturbance.clone(),
        )?),
    })
}

impl Simulation {
    /// Runs the switched law over the whole bank.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let all: Vec<usize> = (0..cfg.observers.len()).collect();
        Self::with_members(cfg, &all)
    }

    /// Runs the switched law over the listed observers only; a single member
    /// gives the conventional ADRC loop.
    pub fn with_members(cfg: &ScenarioConfig, members: &[usize]) -> Result<Self> {
        cfg.validate()?;
        if members.is_empty() || members.iter().any(|&j| j >= cfg.observers.len()) {
            return Err(Error::config("observers", "invalid member list"));
        }
        let plant = build_plant(&cfg.plant)?;
        let x0 = plant.controlled_state();
        let sup = Supervisor::new(
            cfg.supervisor_config(members)?,
            cfg.reference.clone(),
            &x0,
            0.0,
        )?;
        let noise = if cfg.noise.amplitude > 0.0 {
            let normal = Normal::new(0.0, cfg.noise.amplitude)
                .map_err(|e| Error::config("noise.amplitude", e.to_string()))?;
            Some((ChaCha8Rng::seed_from_u64(cfg.seed), normal))
        } else {
            None
        };
        Ok(Simulation {
            plant,
            sup,
            noise,
            resolution: cfg.noise.resolution,
            dt: cfg.control.dt,
            steps: cfg.control.steps(),
            k: 0,
            max_order: members
                .iter()
                .map(|&j| cfg.observers[j].order)
                .max()
                .unwrap_or(0),
        })
    }

    pub fn supervisor(&self) -> &Supervisor {
        &self.sup
    }

    pub fn supervisor_mut(&mut self) -> &mut Supervisor {
        &mut self.sup
    }

    pub fn plant(&self) -> &dyn Plant {
        self.plant.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of control periods; `steps() + 1` samples are produced.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn true_errors(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.plant.order();
        let r = self.sup.reference();
        let x = self.plant.controlled_state();
        let mut e: Vec<f64> = (0..n).map(|i| x[i] - r.derivative(t, i)).collect();
        for k in 0..self.max_order.saturating_sub(n) {
            e.push(self.plant.lumped_disturbance(k)? - r.derivative(t, n + k));
        }
        Some(e)
    }

    /// Measures, runs the supervisor and advances the plant; `None` once the
    /// horizon is exhausted.
    pub fn next_sample(&mut self) -> Result<Option<Sample>> {
        if self.k > self.steps {
            return Ok(None);
        }
        let k = self.k;
        let t = k as f64 * self.dt;
        let y = self.plant.output();
        let mut measured = match &mut self.noise {
            Some((rng, normal)) => y + normal.sample(rng),
            None => y,
        };
        if self.resolution > 0.0 {
            measured = (measured / self.resolution).round() * self.resolution;
        }
        let x = self.plant.controlled_state();
        let n = self.plant.order();
        let disturbance = self.plant.lumped_disturbance(0).unwrap_or(f64::NAN)
            - self.sup.reference().derivative(t, n);
        let true_errors = self.true_errors(t);
        let record = self.sup.step(measured, self.dt)?;
        if k < self.steps {
            self.plant.step(record.u, self.dt)?;
            self.plant.set_time((k + 1) as f64 * self.dt);
        }
        self.k += 1;
        Ok(Some(Sample {
            k,
            record,
            y,
            x,
            true_errors,
            disturbance,
        }))
    }
}

/// Trace and switching history of one law.
#[derive(Clone, Debug)]
pub struct LawRun {
    pub trace: SimulationTrace,
    pub decisions: Vec<usize>,
    pub dropped: Vec<(usize, f64)>,
}

pub fn run_law(cfg: &ScenarioConfig, members: &[usize], label: &str) -> Result<LawRun> {
    let mut sim = Simulation::with_members(cfg, members)?;
    let mut rows = Vec::with_capacity(sim.steps() + 1);
    while let Some(s) = sim.next_sample()? {
        let rec = s.record;
        rows.push(TraceRow {
            t: rec.t,
            r: rec.r,
            y: s.y,
            x_star1: rec.x_star1,
            e1: s.y - rec.r,
            e1_bar: s.y - rec.x_star1,
            u: rec.u,
            selected: members[rec.selected],
            e1_tilde: rec.e1_tilde,
            z: rec.z,
            z_acc: rec.accumulators,
            disturbance: s.disturbance,
        });
    }
    let sup = sim.supervisor();
    Ok(LawRun {
        trace: SimulationTrace {
            scenario: cfg.name.clone(),
            config_hash: cfg.config_hash()?,
            law: label.to_string(),
            observers: members.len(),
            dt: cfg.control.dt,
            rows,
        },
        decisions: sup
            .switch_index()
            .decisions()
            .iter()
            .map(|&j| members[j])
            .collect(),
        dropped: sup
            .dropped()
            .iter()
            .map(|&(j, t)| (members[j], t))
            .collect(),
    })
}

/// Switched run plus the optional single-observer baselines.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub switched: LawRun,
    pub baselines: Vec<LawRun>,
    pub metrics: MetricsReport,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let m = cfg.observers.len();
    let mut jobs: Vec<(Vec<usize>, String)> = vec![((0..m).collect(), "switched".to_string())];
    if cfg.report.baselines {
        for j in 0..m {
            jobs.push((
                vec![j],
                format!("single {j} ({})", cfg.observers[j].label()),
            ));
        }
    }
    let mut runs: Vec<LawRun> = jobs
        .par_iter()
        .map(|(members, label)| run_law(cfg, members, label))
        .collect::<Result<Vec<_>>>()?;
    let switched = runs.remove(0);
    let laws = std::iter::once(&switched)
        .chain(runs.iter())
        .map(|r| LawMetrics::from_trace(r.trace.law.clone(), &r.trace, cfg.report.iae))
        .collect();
    let metrics = MetricsReport {
        scenario: cfg.name.clone(),
        config_hash: switched.trace.config_hash.clone(),
        laws,
        switch_count: switched
            .trace
            .rows
            .windows(2)
            .filter(|w| w[0].selected != w[1].selected)
            .count(),
        window_selections: switched.decisions.clone(),
        observers: m,
        dropped: switched.dropped.clone(),
        transient: SwitchTransient::from_trace(&switched.trace),
    };
    Ok(RunOutput {
        switched,
        baselines: runs,
        metrics,
    })
}
