//! Evolution of `x'(t) = (1 - alpha) v(t) - (gamma I - alpha P) x(t)`.
//!
//! `gamma = (1 - alpha) e'v(t) + alpha e'x(t)` when the sum correction is on
//! and `gamma = 1` otherwise; both agree whenever `x` and `v` sum to one.

mod dopri;
mod euler;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::TransitionOperator;
use crate::par::{self, Execution};
use crate::solvers::{static_pagerank, SolveConfig};
use crate::teleport::TeleportSchedule;

pub use dopri::DEFAULT_ATOL;
pub use dopri::DEFAULT_RTOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Euler { step: f64 },
    Rk45 { rel_tol: f64, abs_tol: f64 },
}

impl Method {
    pub fn rk45() -> Self {
        Method::Rk45 {
            rel_tol: DEFAULT_RTOL,
            abs_tol: DEFAULT_ATOL,
        }
    }
}

/// Choice of `x(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// `e / n`
    Uniform,
    /// `v(0)`
    Teleport0,
    /// PageRank vector for `v(0)`.
    StaticPr,
    /// An explicit probability vector.
    Given(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub alpha: f64,
    pub t_max: f64,
    pub method: Method,
    pub initial: Initial,
    pub correction: bool,
    /// Strictly increasing sample times in `[0, t_max]`.
    pub output_grid: Vec<f64>,
    #[serde(default)]
    pub execution: Execution,
}

impl EvolutionConfig {
    pub fn new(alpha: f64, t_max: f64, method: Method, output_grid: Vec<f64>) -> Self {
        Self {
            alpha,
            t_max,
            method,
            initial: Initial::Teleport0,
            correction: true,
            output_grid,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self, schedule: &TeleportSchedule) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if self.t_max > schedule.t_max() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "t_max = {} exceeds the teleportation schedule domain [0, {}]",
                self.t_max,
                schedule.t_max()
            )));
        }
        match self.method {
            Method::Euler { step } => {
                let bound = 2.0 / (1.0 + self.alpha);
                if !(step > 0.0 && step < bound) {
                    return Err(Error::Config(format!(
                        "forward Euler is stable only for 0 < h < 2/(1+alpha) = {bound}; got h = {step}"
                    )));
                }
            }
            Method::Rk45 { rel_tol, abs_tol } => {
                if !(rel_tol > 0.0 && abs_tol > 0.0) {
                    return Err(Error::Config(format!(
                        "rk45 tolerances must be > 0 (rtol = {rel_tol}, atol = {abs_tol})"
                    )));
                }
            }
        }
        let g = &self.output_grid;
        if g.is_empty() {
            return Err(Error::Config("output grid is empty".into()));
        }
        if g[0] < 0.0 || g[g.len() - 1] > self.t_max {
            return Err(Error::Config(format!(
                "output grid must lie within [0, {}]",
                self.t_max
            )));
        }
        if g.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("output grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Evenly spaced grid `0, step, 2 step, ...` ending exactly at `t_max`.
pub fn uniform_grid(t_max: f64, step: f64) -> Vec<f64> {
    let m = (t_max / step - 1e-9).ceil().max(1.0) as usize;
    (0..=m).map(|i| (i as f64 * step).min(t_max)).collect()
}

/// Epoch boundaries `j s`, `j = 0..=k`.
pub fn epoch_grid(timescale: f64, epochs: usize) -> Vec<f64> {
    (0..=epochs).map(|j| j as f64 * timescale).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Sampled solution of the dynamic system.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `|1 - sum(x)|` per sample.
    pub sum_drift: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    /// Wraps externally produced samples (e.g. read back from CSV).
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        check_len(times.len(), states.len())?;
        if times.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = states[0].len();
        for s in &states {
            check_len(n, s.len())?;
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must be strictly increasing".into()));
        }
        let sum_drift = states.iter().map(|s| (1.0 - s.iter().sum::<f64>()).abs()).collect();
        Ok(Self {
            times,
            states,
            sum_drift,
            stats: IntegrationStats::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_sum_drift(&self) -> f64 {
        self.sum_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Node `i` across all samples.
    pub fn series(&self, node: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[node]).collect()
    }

    fn push(&mut self, t: f64, x: Vec<f64>, exec: Execution) {
        self.sum_drift.push((1.0 - par::sum(&x, exec)).abs());
        self.times.push(t);
        self.states.push(x);
    }

    fn with_capacity(m: usize) -> Self {
        Self {
            times: Vec::with_capacity(m),
            states: Vec::with_capacity(m),
            sum_drift: Vec::with_capacity(m),
            stats: IntegrationStats::default(),
        }
    }
}

/// Shared right-hand side kernel: writes the `x` derivative for teleportation `v`.
pub(crate) struct Model<'a> {
    pub p: &'a TransitionOperator,
    pub alpha: f64,
    pub correction: bool,
    pub exec: Execution,
}

impl Model<'_> {
    /// `out = (1 - alpha) v - (gamma I - alpha P) x`, using `out` for `P x` first.
    pub fn eval(&self, v: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
        self.p.apply_into(x, out, self.exec)?;
        let a = self.alpha;
        let gamma = if self.correction {
            (1.0 - a) * par::sum(v, self.exec) + a * par::sum(x, self.exec)
        } else {
            1.0
        };
        par::for_each_chunk_mut(out, self.exec, |off, o| {
            for (k, oi) in o.iter_mut().enumerate() {
                let i = off + k;
                *oi = (1.0 - a) * v[i] - gamma * x[i] + a * *oi;
            }
        });
        Ok(())
    }
}

/// The time derivative of the dynamic PageRank system at `(t, x)`.
///
/// When the schedule is smoothed this uses the raw `v(t)`; the smoothed state
/// is owned by the integrators.
pub fn derivative(
    p: &TransitionOperator,
    t: f64,
    x: &[f64],
    schedule: &TeleportSchedule,
    alpha: f64,
    correction: bool,
) -> Result<Vec<f64>> {
    check_len(p.n(), x.len())?;
    check_len(p.n(), schedule.n())?;
    let v = schedule.eval(t)?;
    let mut out = vec![0.0; p.n()];
    Model {
        p,
        alpha,
        correction,
        exec: Execution::default(),
    }
    .eval(&v, x, &mut out)?;
    Ok(out)
}

/// Computes `x(0)` for the given choice.
pub fn initial_state(
    choice: &Initial,
    p: &TransitionOperator,
    schedule: &TeleportSchedule,
    alpha: f64,
) -> Result<Vec<f64>> {
    let n = p.n();
    check_len(n, schedule.n())?;
    match choice {
        Initial::Uniform => Ok(vec![1.0 / n as f64; n]),
        Initial::Teleport0 => schedule.eval(0.0),
        Initial::StaticPr => {
            let v0 = schedule.eval(0.0)?;
            Ok(static_pagerank(p, &SolveConfig::new(alpha), &v0)?.x)
        }
        Initial::Given(x) => {
            check_len(n, x.len())?;
            Ok(x.clone())
        }
    }
}

fn prepare(p: &TransitionOperator, schedule: &TeleportSchedule, cfg: &EvolutionConfig) -> Result<Vec<f64>> {
    check_len(p.n(), schedule.n())?;
    cfg.validate(schedule)?;
    initial_state(&cfg.initial, p, schedule, cfg.alpha)
}

/// Forward Euler with fixed step. Requires `Method::Euler`.
pub fn evolve_euler(p: &TransitionOperator, schedule: &TeleportSchedule, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let x0 = prepare(p, schedule, cfg)?;
    match cfg.method {
        Method::Euler { step } => euler::run(p, schedule, cfg, step, x0),
        _ => Err(Error::Config("evolve_euler requires the euler method".into())),
    }
}

/// Adaptive Dormand-Prince 5(4) with dense output. Requires `Method::Rk45`.
pub fn evolve_rk(p: &TransitionOperator, schedule: &TeleportSchedule, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let x0 = prepare(p, schedule, cfg)?;
    match cfg.method {
        Method::Rk45 { rel_tol, abs_tol } => dopri::run(p, schedule, cfg, rel_tol, abs_tol, x0),
        _ => Err(Error::Config("evolve_rk requires the rk45 method".into())),
    }
}

/// Dispatches on `cfg.method`.
pub fn evolve(p: &TransitionOperator, schedule: &TeleportSchedule, cfg: &EvolutionConfig) -> Result<Trajectory> {
    match cfg.method {
        Method::Euler { .. } => evolve_euler(p, schedule, cfg),
        Method::Rk45 { .. } => evolve_rk(p, schedule, cfg),
    }
}

pub(crate) fn check_finite(t: f64, y: &[f64], exec: Execution) -> Result<()> {
    if par::sum(y, exec).is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            t,
            msg: "state contains NaN or infinite entries".into(),
        })
    }
}

#[cfg(test)]
mod tests;
