//! Static scores derived from a trajectory and top-k ranking comparison.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrate::Trajectory;

fn need_two(traj: &Trajectory) -> Result<()> {
    if traj.len() < 2 {
        return Err(Error::Domain(format!(
            "rank integrals need at least 2 samples, trajectory has {}",
            traj.len()
        )));
    }
    Ok(())
}

/// `x(t)` by linear interpolation between bracketing samples.
pub fn transient(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    let times = &traj.times;
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptyInput),
    };
    if !(first..=last).contains(&t) {
        return Err(Error::Domain(format!(
            "t = {t} outside the trajectory [{first}, {last}]"
        )));
    }
    let hi = times.partition_point(|&s| s < t);
    if times[hi] == t {
        return Ok(traj.states[hi].clone());
    }
    let lo = hi - 1;
    let w = (t - times[lo]) / (times[hi] - times[lo]);
    Ok(traj.states[lo]
        .iter()
        .zip(&traj.states[hi])
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect())
}

/// Trapezoid integral of `f(sample)` over the grid, entrywise.
fn trapezoid(traj: &Trajectory, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let n = traj.n();
    let mut acc = vec![0.0; n];
    for w in 0..traj.len() - 1 {
        let half = 0.5 * (traj.times[w + 1] - traj.times[w]);
        let (a, b) = (&traj.states[w], &traj.states[w + 1]);
        for i in 0..n {
            acc[i] += half * (f(i, a[i]) + f(i, b[i]));
        }
    }
    acc
}

/// `c = integral of x(t) dt` over the sampled span.
pub fn cumulative(traj: &Trajectory) -> Result<Vec<f64>> {
    need_two(traj)?;
    Ok(trapezoid(traj, |_, x| x))
}

/// `r = integral of (x(t) - c / T)^2 dt` with `T` the sampled span.
pub fn variance(traj: &Trajectory) -> Result<Vec<f64>> {
    need_two(traj)?;
    let span = traj.times[traj.len() - 1] - traj.times[0];
    let mean: Vec<f64> = cumulative(traj)?.iter().map(|c| c / span).collect();
    Ok(trapezoid(traj, |i, x| (x - mean[i]).powi(2)))
}

/// Default difference window `[first + 0.2 span, last]`, skipping the initial
/// convergence region.
pub fn default_window(traj: &Trajectory) -> Option<(f64, f64)> {
    let (a, b) = (*traj.times.first()?, *traj.times.last()?);
    Some((a + 0.2 * (b - a), b))
}

/// Per-node max minus min over the samples inside `[lo, hi]`.
pub fn difference(traj: &Trajectory, window: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let (first, last) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptyInput),
    };
    if !(lo <= hi) || lo < first || hi > last {
        return Err(Error::Domain(format!(
            "window [{lo}, {hi}] is not inside the trajectory [{first}, {last}]"
        )));
    }
    let n = traj.n();
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut min = vec![f64::INFINITY; n];
    let mut seen = 0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        if *t < lo || *t > hi {
            continue;
        }
        seen += 1;
        for i in 0..n {
            max[i] = max[i].max(x[i]);
            min[i] = min[i].min(x[i]);
        }
    }
    if seen == 0 {
        return Err(Error::Domain(format!("window [{lo}, {hi}] contains no samples")));
    }
    Ok(max.iter().zip(&min).map(|(a, b)| a - b).collect())
}

/// Node indices of the `k` largest scores, ties broken by ascending index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Normalized symmetric differences `|X_j Δ Y_j| / (2j)` of the top-`j` sets.
pub fn isim_terms(x: &[f64], y: &[f64], k: usize) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    if k > x.len() {
        return Err(Error::Domain(format!(
            "k = {k} exceeds the {} available nodes",
            x.len()
        )));
    }
    let (tx, ty) = (top_k(x, k), top_k(y, k));
    let mut in_x = vec![false; x.len()];
    let mut in_y = vec![false; x.len()];
    let mut common = 0usize;
    let mut terms = Vec::with_capacity(k);
    for j in 0..k {
        let (a, b) = (tx[j], ty[j]);
        in_x[a] = true;
        if in_y[a] {
            common += 1;
        }
        in_y[b] = true;
        if in_x[b] {
            common += 1;
        }
        let size = j + 1;
        terms.push((2 * (size - common)) as f64 / (2 * size) as f64);
    }
    Ok(terms)
}

/// Intersection similarity profile `isim_1 .. isim_k`, each the running mean
/// of the normalized top-`j` symmetric differences. Zero means identical
/// top-`k` orderings as sets at every depth.
pub fn isim(x: &[f64], y: &[f64], k: usize) -> Result<Vec<f64>> {
    let terms = isim_terms(x, y, k)?;
    let mut sum = 0.0;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            sum += t;
            sum / (j + 1) as f64
        })
        .collect())
}

/// All trajectory-derived scores for one run, ready for export.
///
/// Exported scores are clamped at zero: tiny negative values can appear from
/// interpolation and rounding, but never in the integration state itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub window: (f64, f64),
    pub transient_at: Option<f64>,
    pub transient: Option<Vec<f64>>,
    pub cumulative: Vec<f64>,
    pub variance: Vec<f64>,
    pub difference: Vec<f64>,
    pub top: TopLists,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopLists {
    pub transient: Option<Vec<usize>>,
    pub cumulative: Vec<usize>,
    pub variance: Vec<usize>,
    pub difference: Vec<usize>,
}

impl RankReport {
    pub fn from_trajectory(
        traj: &Trajectory,
        window: Option<(f64, f64)>,
        transient_at: Option<f64>,
        k: usize,
    ) -> Result<Self> {
        let window = match window {
            Some(w) => w,
            None => default_window(traj).ok_or(Error::EmptyInput)?,
        };
        let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        let cumulative = clamp(cumulative(traj)?);
        let variance = clamp(variance(traj)?);
        let difference = clamp(difference(traj, window)?);
        let transient = transient_at.map(|t| transient(traj, t).map(clamp)).transpose()?;
        let k = k.min(traj.n());
        let top = TopLists {
            transient: transient.as_ref().map(|v| top_k(v, k)),
            cumulative: top_k(&cumulative, k),
            variance: top_k(&variance, k),
            difference: top_k(&difference, k),
        };
        Ok(Self {
            window,
            transient_at,
            transient,
            cumulative,
            variance,
            difference,
            top,
        })
    }
}
