//! Dormand-Prince 5(4) with the 4th-order continuous extension.
//!
//! Integration restarts at every teleportation breakpoint so that no step
//! straddles a jump in `v(t)`; within a segment the forcing is evaluated with
//! the segment's left-limit column.

use super::{check_finite, EvolutionConfig, IntegrationStats, Model, Trajectory};
use crate::error::{Error, Result};
use crate::graph::TransitionOperator;
use crate::par::{self, Execution};
use crate::teleport::TeleportSchedule;

pub const DEFAULT_RTOL: f64 = 1e-6;
pub const DEFAULT_ATOL: f64 = 1e-9;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// 5th-order solution minus embedded 4th-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

/// Right-hand side `f(t, probe, y, dy)`; `probe` is the midpoint of the
/// current smooth segment.
pub(crate) trait Rhs {
    fn eval(&mut self, t: f64, probe: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

struct Dopri {
    dim: usize,
    rtol: f64,
    atol: f64,
    exec: Execution,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    stats: IntegrationStats,
}

impl Dopri {
    fn new(dim: usize, rtol: f64, atol: f64, exec: Execution) -> Self {
        Self {
            dim,
            rtol,
            atol,
            exec,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            stats: IntegrationStats::default(),
        }
    }

    /// Weighted RMS norm used for step control.
    fn wrms(&self, v: &[f64], y: &[f64]) -> f64 {
        let (atol, rtol) = (self.atol, self.rtol);
        let s = par::chunked_sum(self.dim, self.exec, |r| {
            r.map(|i| {
                let e = v[i] / (atol + rtol * y[i].abs());
                e * e
            })
            .sum()
        });
        (s / self.dim as f64).sqrt()
    }

    /// Hairer's starting step heuristic; expects `k[0] = f(t, y)`.
    fn initial_step(&mut self, rhs: &mut dyn Rhs, t: f64, probe: f64, y: &[f64], max_h: f64) -> Result<f64> {
        let d0 = self.wrms(y, y);
        let d1 = self.wrms(&self.k[0], y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(max_h);
        for ((s, &yi), &ki) in self.stage.iter_mut().zip(y).zip(&self.k[0]) {
            *s = yi + h0 * ki;
        }
        let mut f1 = vec![0.0; self.dim];
        rhs.eval(t + h0, probe, &self.stage, &mut f1)?;
        self.stats.rhs_evals += 1;
        let diff: Vec<f64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.wrms(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(max_h))
    }

    /// Attempts one step of size `h` from `(t, y)`; `k[0]` must hold `f(t, y)`.
    /// Leaves the candidate in `y_new` and its stages in `k`; returns the error norm.
    fn attempt(&mut self, rhs: &mut dyn Rhs, t: f64, probe: f64, y: &[f64], h: f64) -> Result<f64> {
        for s in 1..7 {
            {
                let (done, _) = self.k.split_at(s);
                let a = &A[s];
                par::for_each_chunk_mut(&mut self.stage, self.exec, |off, out| {
                    for (j, o) in out.iter_mut().enumerate() {
                        let i = off + j;
                        let mut acc = 0.0;
                        for (r, kr) in done.iter().enumerate() {
                            acc += a[r] * kr[i];
                        }
                        *o = y[i] + h * acc;
                    }
                });
            }
            if s == 6 {
                self.y_new.copy_from_slice(&self.stage);
            }
            let (stage, k) = (&self.stage, &mut self.k[s]);
            rhs.eval(t + C[s] * h, probe, stage, k)?;
            self.stats.rhs_evals += 1;
        }
        let k = &self.k;
        let err_vec: Vec<f64> = {
            let mut e = vec![0.0; self.dim];
            par::for_each_chunk_mut(&mut e, self.exec, |off, out| {
                for (j, o) in out.iter_mut().enumerate() {
                    let i = off + j;
                    let mut acc = 0.0;
                    for (r, kr) in k.iter().enumerate() {
                        acc += E[r] * kr[i];
                    }
                    *o = h * acc;
                }
            });
            e
        };
        let (atol, rtol) = (self.atol, self.rtol);
        let y_new = &self.y_new;
        let s = par::chunked_sum(self.dim, self.exec, |r| {
            r.map(|i| {
                let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
                let e = err_vec[i] / sc;
                e * e
            })
            .sum()
        });
        Ok((s / self.dim as f64).sqrt())
    }

    /// Dense output at fraction `theta` of the accepted step `[t, t + h]`.
    fn interpolate(&self, y: &[f64], h: f64, theta: f64, len: usize) -> Vec<f64> {
        let k = &self.k;
        let t1 = 1.0 - theta;
        (0..len)
            .map(|i| {
                let ydiff = self.y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let r4 = ydiff - h * k[6][i] - bspl;
                let mut r5 = 0.0;
                for (d, kr) in D.iter().zip(k.iter()) {
                    r5 += d * kr[i];
                }
                let r5 = h * r5;
                y[i] + theta * (ydiff + t1 * (bspl + theta * (r4 + t1 * r5)))
            })
            .collect()
    }
}

/// Joint right-hand side for `x` and, when smoothing, the averaged `vbar`.
struct DynamicRhs<'a> {
    model: Model<'a>,
    schedule: &'a TeleportSchedule,
    n: usize,
    v: Vec<f64>,
}

impl Rhs for DynamicRhs<'_> {
    fn eval(&mut self, t: f64, probe: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.n;
        self.schedule.fill(t, probe, &mut self.v);
        match self.schedule.smoothing() {
            None => self.model.eval(&self.v, y, dy),
            Some(theta) => {
                let (x, vbar) = y.split_at(n);
                let (dx, dvbar) = dy.split_at_mut(n);
                self.model.eval(vbar, x, dx)?;
                for ((d, &v), &b) in dvbar.iter_mut().zip(&self.v).zip(vbar) {
                    *d = theta * (v - b);
                }
                Ok(())
            }
        }
    }
}

pub(super) fn run(
    p: &TransitionOperator,
    schedule: &TeleportSchedule,
    cfg: &EvolutionConfig,
    rtol: f64,
    atol: f64,
    x0: Vec<f64>,
) -> Result<Trajectory> {
    let n = p.n();
    let exec = cfg.execution;
    let mut y0 = x0;
    if schedule.smoothing().is_some() {
        let mut vbar = vec![0.0; n];
        schedule.fill(0.0, 0.0, &mut vbar);
        y0.extend_from_slice(&vbar);
    }
    let mut rhs = DynamicRhs {
        model: Model {
            p,
            alpha: cfg.alpha,
            correction: cfg.correction,
            exec,
        },
        schedule,
        n,
        v: vec![0.0; n],
    };
    let mut knots = vec![0.0];
    knots.extend(schedule.breakpoints().into_iter().filter(|&b| b < cfg.t_max));
    knots.push(cfg.t_max);
    integrate(&mut rhs, y0, n, &knots, &cfg.output_grid, rtol, atol, exec)
}

/// Integrates across `knots[0] < knots[1] < ...`, restarting at each knot,
/// and samples the first `out_len` state components on `grid`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate(
    rhs: &mut dyn Rhs,
    mut y: Vec<f64>,
    out_len: usize,
    knots: &[f64],
    grid: &[f64],
    rtol: f64,
    atol: f64,
    exec: Execution,
) -> Result<Trajectory> {
    let dim = y.len();
    let t_span = knots[knots.len() - 1] - knots[0];
    let h_min = 1e-12 * t_span;
    let mut dp = Dopri::new(dim, rtol, atol, exec);
    let mut traj = Trajectory::with_capacity(grid.len());
    let mut gi = 0;
    let touch = 1e-12 * t_span.max(1.0);
    while gi < grid.len() && grid[gi] <= knots[0] + touch {
        traj.push(grid[gi], y[..out_len].to_vec(), exec);
        gi += 1;
    }

    let mut h: Option<f64> = None;
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if gi >= grid.len() {
            break;
        }
        let probe = 0.5 * (a + b);
        let mut t = a;
        rhs.eval(t, probe, &y, &mut dp.k[0])?;
        dp.stats.rhs_evals += 1;
        let mut step = match h {
            Some(prev) => prev.min(b - a),
            None => dp.initial_step(rhs, t, probe, &y, b - a)?,
        };
        let mut rejected_last = false;
        while t < b && gi < grid.len() {
            if dp.stats.steps + dp.stats.rejected > MAX_STEPS {
                return Err(Error::StepUnderflow { t, h: step });
            }
            // land exactly on the knot
            let last = t + step >= b - touch;
            let nominal = step;
            if last {
                step = b - t;
            }
            let err = dp.attempt(rhs, t, probe, &y, step)?;
            if !err.is_finite() {
                check_finite(t + step, &dp.y_new, exec)?;
            }
            if err <= 1.0 {
                let t_new = if last { b } else { t + step };
                check_finite(t_new, &dp.y_new, exec)?;
                while gi < grid.len() && grid[gi] <= t_new + if last { touch } else { 0.0 } {
                    let theta = ((grid[gi] - t) / step).clamp(0.0, 1.0);
                    let sample = if theta == 1.0 {
                        dp.y_new[..out_len].to_vec()
                    } else {
                        dp.interpolate(&y, step, theta, out_len)
                    };
                    traj.push(grid[gi], sample, exec);
                    gi += 1;
                }
                dp.stats.steps += 1;
                std::mem::swap(&mut y, &mut dp.y_new);
                // FSAL: the last stage is f(t_new, y_new)
                let (first, rest) = dp.k.split_at_mut(1);
                std::mem::swap(&mut first[0], &mut rest[5]);
                t = t_new;
                let mut fac = (SAFETY * err.max(1e-10).powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                rejected_last = false;
                step = if last { nominal.max(step * fac) } else { step * fac };
                h = Some(step);
            } else {
                dp.stats.rejected += 1;
                rejected_last = true;
                let fac = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
                } else {
                    FAC_MIN
                };
                step *= fac;
                if step < h_min {
                    return Err(Error::StepUnderflow { t, h: step });
                }
            }
        }
    }
    traj.stats = dp.stats;
    Ok(traj)
}
