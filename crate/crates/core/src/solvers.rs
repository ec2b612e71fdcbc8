//! Static and complex-teleportation PageRank solves by Richardson iteration,
//! and the analytic steady state of the cosine-forced system.
//!
//! For the cosine forcing `v(t) = (1/k) V (cos(t + f) + 1)`, the long-time
//! solution is `x + Re{s e^{it}}` where `x` is the PageRank vector of the
//! average teleportation and `s` solves
//! `(I - alpha/(1+i) P) s = (1-alpha)/(k(1+i)) V e^{i f}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::TransitionOperator;
use crate::par::{self, Execution};
use crate::teleport::phases;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub alpha: f64,
    /// Residual 1-norm at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub execution: Execution,
}

impl SolveConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            tol: 1e-10,
            max_iter: 10_000,
            execution: Execution::default(),
        }
    }
}

/// A real PageRank solve with its certified residual.
#[derive(Clone, Debug)]
pub struct PageRankSolution {
    pub x: Vec<f64>,
    /// `||(I - alpha P) x - (1 - alpha) v||_1`.
    pub residual: f64,
    pub iterations: usize,
    /// Residual norm of every iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

/// Solves `(I - alpha P) x = (1 - alpha) v`.
pub fn static_pagerank(p: &TransitionOperator, cfg: &SolveConfig, v: &[f64]) -> Result<PageRankSolution> {
    cfg.validate()?;
    let n = p.n();
    check_len(n, v.len())?;
    let exec = cfg.execution;
    let a = cfg.alpha;

    let mut x = v.to_vec();
    let mut y = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..=cfg.max_iter {
        // y <- alpha P x + (1 - alpha) v, so the residual is y - x
        p.apply_into(&x, &mut y, exec)?;
        par::for_each_chunk_mut(&mut y, exec, |off, out| {
            for (k, yi) in out.iter_mut().enumerate() {
                *yi = a * *yi + (1.0 - a) * v[off + k];
            }
        });
        let res = par::chunked_sum(n, exec, |r| r.map(|i| (y[i] - x[i]).abs()).sum());
        if !res.is_finite() {
            return Err(Error::Numeric {
                t: it as f64,
                msg: "non-finite residual in PageRank iteration".into(),
            });
        }
        history.push(res);
        if res <= cfg.tol {
            return Ok(PageRankSolution {
                x,
                residual: res,
                iterations: it,
                residual_history: history,
            });
        }
        if it == cfg.max_iter {
            return Err(Error::Convergence {
                iterations: it,
                residual: res,
            });
        }
        std::mem::swap(&mut x, &mut y);
    }
    unreachable!("loop returns on its last iteration")
}

/// Result of a complex-teleportation PageRank solve.
#[derive(Clone, Debug)]
pub struct ComplexSolution {
    pub s: Vec<Complex64>,
    /// Entrywise modulus of `s`.
    pub magnitude: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl ComplexSolution {
    fn from_parts(re: Vec<f64>, im: Vec<f64>, residual: f64, iterations: usize, history: Vec<f64>) -> Self {
        let s: Vec<Complex64> = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
        let magnitude = s.iter().map(|z| z.norm()).collect();
        Self {
            s,
            magnitude,
            residual,
            iterations,
            residual_history: history,
        }
    }
}

/// Solves `(I - gamma P) s = b` for complex `gamma` with `|gamma| < 1`.
///
/// Real and imaginary parts are carried separately, so each iteration costs
/// two real products with `P`.
pub fn complex_pagerank(
    p: &TransitionOperator,
    gamma: Complex64,
    b: &[Complex64],
    cfg: &SolveConfig,
) -> Result<ComplexSolution> {
    if !(gamma.norm() < 1.0) {
        return Err(Error::Domain(format!(
            "complex PageRank requires |gamma| < 1, got {}",
            gamma.norm()
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("tol must be > 0, got {}", cfg.tol)));
    }
    let n = p.n();
    check_len(n, b.len())?;
    let exec = cfg.execution;
    let (gr, gi) = (gamma.re, gamma.im);
    let b_re: Vec<f64> = b.iter().map(|z| z.re).collect();
    let b_im: Vec<f64> = b.iter().map(|z| z.im).collect();

    let mut re = b_re.clone();
    let mut im = b_im.clone();
    let mut p_re = vec![0.0; n];
    let mut p_im = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..=cfg.max_iter {
        p.apply_into(&re, &mut p_re, exec)?;
        p.apply_into(&im, &mut p_im, exec)?;
        // next = gamma P s + b, overwriting the products in place
        for i in 0..n {
            let (a, c) = (p_re[i], p_im[i]);
            p_re[i] = gr * a - gi * c + b_re[i];
            p_im[i] = gr * c + gi * a + b_im[i];
        }
        let res = par::chunked_sum(n, exec, |r| r.map(|i| (p_re[i] - re[i]).hypot(p_im[i] - im[i])).sum());
        if !res.is_finite() {
            return Err(Error::Numeric {
                t: it as f64,
                msg: "non-finite residual in complex PageRank iteration".into(),
            });
        }
        history.push(res);
        if res <= cfg.tol {
            return Ok(ComplexSolution::from_parts(re, im, res, it, history));
        }
        if it == cfg.max_iter {
            return Err(Error::Convergence {
                iterations: it,
                residual: res,
            });
        }
        std::mem::swap(&mut re, &mut p_re);
        std::mem::swap(&mut im, &mut p_im);
    }
    unreachable!("loop returns on its last iteration")
}

/// Average teleportation `(1/k) V e`.
pub fn mean_column(columns: &[Vec<f64>]) -> Vec<f64> {
    let k = columns.len() as f64;
    let n = columns.first().map_or(0, |c| c.len());
    let mut out = vec![0.0; n];
    for c in columns {
        for (o, &v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= k);
    out
}

/// The mean PageRank vector and the complex amplitude `s` of the periodic
/// steady state under cosine forcing with distribution columns `v`.
pub fn oscillatory_steady_state(
    p: &TransitionOperator,
    alpha: f64,
    columns: &[Vec<f64>],
    cfg: &SolveConfig,
) -> Result<(PageRankSolution, ComplexSolution)> {
    let k = columns.len();
    if k < 2 {
        return Err(Error::Domain(
            "oscillatory steady state needs k >= 2 teleportation columns".into(),
        ));
    }
    for c in columns {
        check_len(p.n(), c.len())?;
    }
    let cfg = SolveConfig { alpha, ..*cfg };
    let mean = static_pagerank(p, &cfg, &mean_column(columns))?;

    let one_plus_i = Complex64::new(1.0, 1.0);
    let gamma = alpha / one_plus_i;
    let scale = (1.0 - alpha) / (k as f64 * one_plus_i);
    let mut rhs = vec![Complex64::new(0.0, 0.0); p.n()];
    for (c, f) in columns.iter().zip(phases(k)) {
        let w = scale * Complex64::from_polar(1.0, f);
        for (r, &v) in rhs.iter_mut().zip(c) {
            *r += w * v;
        }
    }
    let amp = complex_pagerank(p, gamma, &rhs, &cfg)?;
    Ok((mean, amp))
}

/// Evaluates the periodic steady state `x + Re{s e^{it}}`.
pub fn eval_steady(x: &[f64], s: &[Complex64], t: f64) -> Vec<f64> {
    let phasor = Complex64::from_polar(1.0, t);
    x.iter().zip(s).map(|(&xi, &si)| xi + (si * phasor).re).collect()
}
