//! One-step-ahead activity prediction from lagged features.
//!
//! Each node gets its own linear model `p(t) ~ [f(t-1) .. f(t-w)] b`, where
//! `f` is either the node's activity alone (base model) or activity together
//! with its transient dynamic-PageRank score (augmented model). Models are
//! refit walk-forward: for each origin `t`, fit on all targets up to `t` and
//! predict `t + 1`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrate::Trajectory;
use crate::par::{self, Execution};
use crate::ranks::{top_k, transient};
use crate::teleport::ActivityMatrix;

/// Lagged regression problem for one node.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedDesign {
    lags: usize,
    target: Vec<f64>,
    /// Feature series sharing the target's epoch indexing.
    blocks: Vec<Vec<f64>>,
}

impl LaggedDesign {
    pub fn new(lags: usize, target: Vec<f64>, blocks: Vec<Vec<f64>>) -> Result<Self> {
        if lags == 0 {
            return Err(Error::Config("lag window must be >= 1".into()));
        }
        if blocks.is_empty() {
            return Err(Error::Config("lagged design needs at least one feature block".into()));
        }
        for b in &blocks {
            check_len(target.len(), b.len())?;
        }
        Ok(Self { lags, target, blocks })
    }

    /// Activity-only design: the target series is its own feature.
    pub fn autoregressive(lags: usize, series: Vec<f64>) -> Result<Self> {
        Self::new(lags, series.clone(), vec![series])
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn epochs(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn n_coef(&self) -> usize {
        self.lags * self.blocks.len()
    }

    /// Stacked features `[f(t), f(t-1), .., f(t-w+1)]`, the regressors that
    /// predict epoch `t + 1`.
    pub fn features_at(&self, t: usize) -> Result<Vec<f64>> {
        if t + 1 < self.lags || t >= self.epochs() {
            return Err(Error::Domain(format!(
                "features at epoch {t} need {} lags within 0..{}",
                self.lags,
                self.epochs()
            )));
        }
        let mut row = Vec::with_capacity(self.n_coef());
        for lag in 0..self.lags {
            for b in &self.blocks {
                row.push(b[t - lag]);
            }
        }
        Ok(row)
    }

    /// First origin `t` whose training set (targets `w..=t`) has at least as
    /// many samples as coefficients.
    pub fn first_origin(&self) -> usize {
        self.lags + self.n_coef() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresFit {
    pub coef: Vec<f64>,
    /// True when the design had deficient numerical rank; `coef` is then the
    /// minimum-norm solution.
    pub rank_deficient: bool,
}

/// Fits `b` on the targets at epochs `lags..=last_target`.
pub fn fit_lagged(design: &LaggedDesign, last_target: usize) -> Result<LeastSquaresFit> {
    let w = design.lags;
    if last_target >= design.epochs() || last_target < w {
        return Err(Error::Domain(format!(
            "no training targets in epochs {w}..={last_target} of {}",
            design.epochs()
        )));
    }
    let rows = last_target - w + 1;
    let cols = design.n_coef();
    if rows < cols {
        return Err(Error::Domain(format!(
            "{rows} training samples for {cols} coefficients"
        )));
    }
    let mut x = Mat::<f64>::zeros(rows, cols);
    let mut y = vec![0.0; rows];
    for (r, tau) in (w..=last_target).enumerate() {
        for (c, v) in design.features_at(tau - 1)?.into_iter().enumerate() {
            x[(r, c)] = v;
        }
        y[r] = design.target[tau];
    }
    solve_least_squares(&x, &y)
}

/// Minimum-norm least squares through a thin SVD. Singular values below
/// `max(rows, cols) * eps * smax` are treated as zero.
fn solve_least_squares(x: &Mat<f64>, y: &[f64]) -> Result<LeastSquaresFit> {
    let cols = x.ncols();
    let dim = x.nrows().max(cols) as f64;
    let svd = x.thin_svd().map_err(|e| Error::Numeric {
        t: 0.0,
        msg: format!("svd failed: {e:?}"),
    })?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let sv: Vec<f64> = (0..s.dim()).map(|i| s[i]).collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(LeastSquaresFit {
            coef: vec![0.0; cols],
            rank_deficient: true,
        });
    }
    let eps = dim * f64::EPSILON * smax;
    let mut coef = vec![0.0; cols];
    let mut rank = 0;
    for (i, &si) in sv.iter().enumerate() {
        if si <= eps {
            continue;
        }
        rank += 1;
        let uty: f64 = y.iter().enumerate().map(|(r, yr)| u[(r, i)] * yr).sum();
        for (c, b) in coef.iter_mut().enumerate() {
            *b += v[(c, i)] * uty / si;
        }
    }
    if coef.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric {
            t: 0.0,
            msg: "non-finite regression coefficients".into(),
        });
    }
    Ok(LeastSquaresFit {
        coef,
        rank_deficient: rank < cols,
    })
}

/// Inner product of stacked lag features with the coefficients.
pub fn predict_next(coef: &[f64], features: &[f64]) -> Result<f64> {
    check_len(coef.len(), features.len())?;
    Ok(coef.iter().zip(features).map(|(b, f)| b * f).sum())
}

/// Symmetric mean absolute percentage error; `0/0` steps count as zero.
pub fn smape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_len(actual.len(), predicted.len())?;
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(&p, &q)| {
            let denom = (p + q) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (p - q).abs() / denom
            }
        })
        .sum();
    Ok(total / actual.len() as f64)
}

/// Walk-forward one-step predictions for origins `first_origin..epochs-1`.
/// Predictions are clamped at zero since activity is a count.
pub fn walk_forward(design: &LaggedDesign, first_origin: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = design.epochs();
    if first_origin + 1 >= k {
        return Err(Error::Config(format!(
            "lag window {} leaves no epochs to predict among {k}",
            design.lags
        )));
    }
    let mut actual = Vec::with_capacity(k - first_origin - 1);
    let mut predicted = Vec::with_capacity(k - first_origin - 1);
    for t in first_origin..k - 1 {
        let fit = fit_lagged(design, t)?;
        let guess = predict_next(&fit.coef, &design.features_at(t)?)?;
        actual.push(design.target[t + 1]);
        predicted.push(guess.max(0.0));
    }
    Ok((actual, predicted))
}

/// Ratio of mean augmented sMAPE to mean base sMAPE over a cohort.
/// `None` when the base error is zero.
pub fn error_ratio(base: &[f64], augmented: &[f64]) -> Result<Option<f64>> {
    check_len(base.len(), augmented.len())?;
    if base.is_empty() {
        return Err(Error::Domain("empty cohort".into()));
    }
    let mb = base.iter().sum::<f64>() / base.len() as f64;
    let ma = augmented.iter().sum::<f64>() / augmented.len() as f64;
    Ok(if mb > 0.0 { Some(ma / mb) } else { None })
}

/// Transient scores at the end of each epoch, `x((j + 1) s)`, aligned with
/// activity epoch `j`.
pub fn epoch_scores(traj: &Trajectory, timescale: f64, epochs: usize) -> Result<Vec<Vec<f64>>> {
    (0..epochs)
        .map(|j| transient(traj, (j + 1) as f64 * timescale))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeForecast {
    pub node: usize,
    pub smape_base: f64,
    pub smape_augmented: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub label: String,
    pub nodes: Vec<usize>,
    pub mean_smape_base: f64,
    pub mean_smape_augmented: f64,
    /// `None` when the base model is exact on the cohort.
    pub error_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub lags: usize,
    /// Epochs whose activity was predicted.
    pub predicted_epochs: Vec<usize>,
    pub per_node: Vec<NodeForecast>,
    pub cohorts: Vec<CohortReport>,
}

/// Top (`non-stationary`) and bottom (`stationary`) `m` nodes by difference
/// rank; ties by ascending node index.
pub fn cohorts_by_difference(difference: &[f64], m: usize) -> Result<Vec<(String, Vec<usize>)>> {
    if m == 0 {
        return Err(Error::Domain("cohort size must be >= 1".into()));
    }
    if m > difference.len() {
        return Err(Error::Domain(format!(
            "cohort size {m} exceeds {} nodes",
            difference.len()
        )));
    }
    let neg: Vec<f64> = difference.iter().map(|d| -d).collect();
    Ok(vec![
        ("non-stationary".to_string(), top_k(difference, m)),
        ("stationary".to_string(), top_k(&neg, m)),
    ])
}

/// Base vs augmented walk-forward evaluation for the listed cohorts.
///
/// `scores[j]` holds every node's transient score aligned with epoch `j`.
pub fn evaluate(
    activity: &ActivityMatrix,
    scores: &[Vec<f64>],
    lags: usize,
    cohorts: &[(String, Vec<usize>)],
    exec: Execution,
) -> Result<PredictionReport> {
    let k = activity.epochs();
    check_len(k, scores.len())?;
    for s in scores {
        check_len(activity.n(), s.len())?;
    }
    let mut nodes: Vec<usize> = cohorts.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(Error::Domain("empty cohort".into()));
    }

    // both models are scored on the same epochs
    let probe = LaggedDesign::new(lags, vec![0.0; k], vec![vec![0.0; k]; 2])?;
    let first = probe.first_origin();
    if first + 1 >= k {
        return Err(Error::Config(format!(
            "lag window {lags} needs more than {} epochs (have {k})",
            first + 1
        )));
    }

    let results = par::map_indices(nodes.len(), exec, |idx| -> Result<NodeForecast> {
        let node = nodes[idx];
        let series = activity.series(node);
        let score: Vec<f64> = scores.iter().map(|s| s[node]).collect();
        let base = LaggedDesign::autoregressive(lags, series.clone())?;
        let aug = LaggedDesign::new(lags, series.clone(), vec![series, score])?;
        let (actual, pb) = walk_forward(&base, first)?;
        let (_, pa) = walk_forward(&aug, first)?;
        Ok(NodeForecast {
            node,
            smape_base: smape(&actual, &pb)?,
            smape_augmented: smape(&actual, &pa)?,
        })
    });
    let per_node = results.into_iter().collect::<Result<Vec<_>>>()?;

    let lookup = |n: usize| &per_node[nodes.binary_search(&n).expect("node evaluated")];
    let cohorts = cohorts
        .iter()
        .map(|(label, members)| {
            let base: Vec<f64> = members.iter().map(|&n| lookup(n).smape_base).collect();
            let aug: Vec<f64> = members.iter().map(|&n| lookup(n).smape_augmented).collect();
            let ratio = error_ratio(&base, &aug)?;
            Ok(CohortReport {
                label: label.clone(),
                nodes: members.clone(),
                mean_smape_base: base.iter().sum::<f64>() / base.len() as f64,
                mean_smape_augmented: aug.iter().sum::<f64>() / aug.len() as f64,
                error_ratio: ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PredictionReport {
        lags,
        predicted_epochs: (first + 1..k).collect(),
        per_node,
        cohorts,
    })
}


/// Parameters of the end-to-end prediction experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub alpha: f64,
    pub timescale: f64,
    /// Smoothing rates to sweep; `None` means raw jumps.
    pub thetas: Vec<Option<f64>>,
    pub lags: usize,
    pub cohort_size: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRun {
    pub theta: Option<f64>,
    pub report: PredictionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub alpha: f64,
    pub timescale: f64,
    pub lags: usize,
    /// Difference rank of the unsmoothed run, used to pick the cohorts.
    pub difference_window: (f64, f64),
    pub runs: Vec<ThetaRun>,
}

/// Evolves the system for every smoothing rate, samples transient scores at
/// epoch ends, and compares base and augmented predictors on the cohorts
/// chosen by the unsmoothed difference rank.
pub fn run_harness(
    p: &crate::graph::TransitionOperator,
    activity: &ActivityMatrix,
    cfg: &HarnessConfig,
) -> Result<HarnessReport> {
    use crate::integrate::{epoch_grid, evolve_rk, EvolutionConfig, Initial, Method};
    use crate::ranks::{default_window, difference};
    use crate::teleport::TeleportSchedule;

    if cfg.thetas.is_empty() {
        return Err(Error::Config("theta sweep is empty".into()));
    }
    let k = activity.epochs();
    let t_max = k as f64 * cfg.timescale;
    let base = TeleportSchedule::from_activity(activity, cfg.timescale, t_max)?;
    let evolve_with = |theta: Option<f64>| -> Result<Trajectory> {
        let sched = match theta {
            Some(th) => base.clone().with_smoothing(th)?,
            None => base.clone(),
        };
        let mut ecfg = EvolutionConfig::new(
            cfg.alpha,
            t_max,
            Method::Rk45 {
                rel_tol: cfg.rel_tol,
                abs_tol: cfg.abs_tol,
            },
            epoch_grid(cfg.timescale, k),
        );
        ecfg.initial = Initial::StaticPr;
        ecfg.execution = cfg.execution;
        evolve_rk(p, &sched, &ecfg)
    };

    let raw = evolve_with(None)?;
    let window = default_window(&raw).ok_or(Error::EmptyInput)?;
    let cohorts = cohorts_by_difference(&difference(&raw, window)?, cfg.cohort_size)?;

    let runs = cfg
        .thetas
        .iter()
        .map(|&theta| {
            let traj = if theta.is_none() {
                raw.clone()
            } else {
                evolve_with(theta)?
            };
            let scores = epoch_scores(&traj, cfg.timescale, k)?;
            let report = evaluate(activity, &scores, cfg.lags, &cohorts, cfg.execution)?;
            Ok(ThetaRun { theta, report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HarnessReport {
        alpha: cfg.alpha,
        timescale: cfg.timescale,
        lags: cfg.lags,
        difference_window: window,
        runs,
    })
}
