//! Time-dependent teleportation `v(t)`.
//!
//! Three forcing families are supported: a constant distribution, a
//! piecewise-constant schedule built from observed activity epochs (stretched
//! by a time-scale `s`), and the cosine family whose phases are the `k`-th
//! roots of unity. Any of them may be passed through an exponential moving
//! average with rate `theta`; that smoothed state is carried by the
//! integrator, not by the schedule.

use std::f64::consts::PI;
use std::io::Read;

use crate::error::{check_len, Error, Result};

/// Relative slack used when mapping a time onto an epoch index, so that
/// times computed as `j * s` in floating point land in epoch `j`.
const EPOCH_SLACK: f64 = 1e-9;

/// Raw nonnegative activity counts, one column per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityMatrix {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl ActivityMatrix {
    pub fn new(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Domain("activity needs at least one epoch".into()));
        }
        for col in &columns {
            check_len(n, col.len())?;
            if col.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
                return Err(Error::Domain("activity counts must be finite and nonnegative".into()));
            }
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of epochs.
    pub fn epochs(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Activity of `node` across epochs.
    pub fn series(&self, node: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[node]).collect()
    }

    /// Reads the `node,epoch,count` CSV format. Missing pairs are zero.
    ///
    /// `n` fixes the node count (e.g. from the graph); without it the count is
    /// one more than the largest node id seen.
    pub fn from_csv<R: Read>(reader: R, n: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != ["node", "epoch", "count"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header \"node,epoch,count\", found {:?}", names.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| csv_error(line, e))?;
            if rec.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 3 fields, found {}", rec.len()),
                });
            }
            let node: usize = parse_field(&rec[0], line, "node id")?;
            let epoch: usize = parse_field(&rec[1], line, "epoch")?;
            let count: f64 = parse_field(&rec[2], line, "count")?;
            if !(count >= 0.0) || !count.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("count must be nonnegative, found {count}"),
                });
            }
            rows.push((node, epoch, count));
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let max_node = rows.iter().map(|r| r.0).max().unwrap_or(0);
        let n = match n {
            Some(n) if max_node >= n => {
                return Err(Error::Domain(format!(
                    "activity references node {max_node} but the graph has {n} nodes"
                )))
            }
            Some(n) => n,
            None => max_node + 1,
        };
        let k = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        let mut columns = vec![vec![0.0; n]; k];
        for (node, epoch, count) in rows {
            columns[epoch][node] += count;
        }
        Self::new(n, columns)
    }

    /// Writes the CSV format, skipping zero entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,epoch,count\n");
        for node in 0..self.n {
            for (epoch, col) in self.columns.iter().enumerate() {
                if col[node] != 0.0 {
                    out.push_str(&format!("{node},{epoch},{}\n", col[node]));
                }
            }
        }
        out
    }
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} {tok:?}"),
    })
}

/// Scales each activity column into a probability distribution.
/// All-zero columns become uniform.
pub fn normalize_activity(raw: &ActivityMatrix) -> Vec<Vec<f64>> {
    raw.columns.iter().map(|c| normalize(c)).collect()
}

fn normalize(col: &[f64]) -> Vec<f64> {
    let total: f64 = col.iter().sum();
    if total > 0.0 {
        col.iter().map(|&c| c / total).collect()
    } else {
        vec![1.0 / col.len() as f64; col.len()]
    }
}

fn validate_distribution(col: &[f64], n: usize) -> Result<Vec<f64>> {
    check_len(n, col.len())?;
    if col.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::Domain(
            "teleportation entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = col.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "teleportation vector must sum to 1 (sum = {total})"
        )));
    }
    Ok(normalize(col))
}

/// The shape of `v(t)` before any smoothing.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Constant(Vec<f64>),
    /// `v(t) = columns[floor(t / timescale)]`, clamped to the last column.
    Piecewise {
        columns: Vec<Vec<f64>>,
        timescale: f64,
    },
    /// `v(t) = (1/k) sum_j columns[j] (cos(t + 2 pi j / k) + 1)`.
    Oscillatory {
        columns: Vec<Vec<f64>>,
    },
}

/// A teleportation function on `[0, t_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportSchedule {
    n: usize,
    forcing: Forcing,
    smoothing: Option<f64>,
    t_max: f64,
}

impl TeleportSchedule {
    pub fn constant(v: Vec<f64>, t_max: f64) -> Result<Self> {
        let n = v.len();
        let v = validate_distribution(&v, n)?;
        Self::build(n, Forcing::Constant(v), t_max)
    }

    /// Uniform teleportation over `n` nodes.
    pub fn uniform(n: usize, t_max: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("empty teleportation vector".into()));
        }
        Self::constant(vec![1.0 / n as f64; n], t_max)
    }

    pub fn piecewise(columns: Vec<Vec<f64>>, timescale: f64, t_max: f64) -> Result<Self> {
        if !(timescale > 0.0) || !timescale.is_finite() {
            return Err(Error::Config(format!("time-scale must be > 0, got {timescale}")));
        }
        let (n, columns) = validate_columns(columns, 1)?;
        Self::build(n, Forcing::Piecewise { columns, timescale }, t_max)
    }

    /// Piecewise schedule from raw activity counts.
    pub fn from_activity(raw: &ActivityMatrix, timescale: f64, t_max: f64) -> Result<Self> {
        Self::piecewise(normalize_activity(raw), timescale, t_max)
    }

    pub fn oscillatory(columns: Vec<Vec<f64>>, t_max: f64) -> Result<Self> {
        let (n, columns) = validate_columns(columns, 2)?;
        Self::build(n, Forcing::Oscillatory { columns }, t_max)
    }

    fn build(n: usize, forcing: Forcing, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Config(format!("t_max must be > 0, got {t_max}")));
        }
        Ok(Self {
            n,
            forcing,
            smoothing: None,
            t_max,
        })
    }

    /// Enables exponential smoothing with rate `theta > 0`.
    pub fn with_smoothing(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Config(format!("smoothing theta must be > 0, got {theta}")));
        }
        self.smoothing = Some(theta);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    /// Times in `(0, t_max)` where a piecewise schedule jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.forcing {
            Forcing::Piecewise { columns, timescale } => (1..columns.len())
                .map(|j| j as f64 * timescale)
                .filter(|&b| b < self.t_max)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Returns `v(t)`; errors outside `[0, t_max]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside the schedule domain [0, {}]",
                self.t_max
            )));
        }
        check_len(self.n, out.len())?;
        self.fill(t, t, out);
        Ok(())
    }

    /// Evaluates `v` at `t` inside a smooth segment whose interior contains
    /// `probe`; piecewise columns are selected by `probe` so that the value at
    /// a segment end is the left limit.
    pub(crate) fn fill(&self, t: f64, probe: f64, out: &mut [f64]) {
        match &self.forcing {
            Forcing::Constant(v) => out.copy_from_slice(v),
            Forcing::Piecewise { columns, timescale } => {
                out.copy_from_slice(&columns[epoch_index(probe, *timescale, columns.len())])
            }
            Forcing::Oscillatory { columns } => oscillatory_into(columns, t, out),
        }
    }
}

fn validate_columns(columns: Vec<Vec<f64>>, min_k: usize) -> Result<(usize, Vec<Vec<f64>>)> {
    if columns.len() < min_k {
        return Err(Error::Domain(format!(
            "need at least {min_k} teleportation columns, got {}",
            columns.len()
        )));
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(Error::Domain("empty teleportation vector".into()));
    }
    let cols = columns
        .iter()
        .map(|c| validate_distribution(c, n))
        .collect::<Result<Vec<_>>>()?;
    Ok((n, cols))
}

fn epoch_index(t: f64, timescale: f64, k: usize) -> usize {
    let idx = (t / timescale + EPOCH_SLACK).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(k - 1)
    }
}

/// Phases `f_j = 2 pi j / k`, `j = 0..k`.
pub fn phases(k: usize) -> Vec<f64> {
    (0..k).map(|j| j as f64 * 2.0 * PI / k as f64).collect()
}

fn oscillatory_into(columns: &[Vec<f64>], t: f64, out: &mut [f64]) {
    let k = columns.len();
    out.fill(0.0);
    for (col, f) in columns.iter().zip(phases(k)) {
        let w = ((t + f).cos() + 1.0) / k as f64;
        for (o, &c) in out.iter_mut().zip(col) {
            *o += w * c;
        }
    }
}

/// Evaluates the cosine-family teleportation for distribution columns `v`.
pub fn eval_oscillatory(columns: &[Vec<f64>], t: f64) -> Result<Vec<f64>> {
    if columns.len() < 2 {
        return Err(Error::Domain("oscillatory teleportation needs k >= 2 columns".into()));
    }
    let n = columns[0].len();
    for c in columns {
        check_len(n, c.len())?;
    }
    let mut out = vec![0.0; n];
    oscillatory_into(columns, t, &mut out);
    Ok(out)
}

/// Right-hand side of the smoothing equation: `theta (v(t) - vbar)`.
pub fn smoothed_derivative(vbar: &[f64], t: f64, schedule: &TeleportSchedule) -> Result<Vec<f64>> {
    let theta = schedule
        .smoothing
        .ok_or_else(|| Error::Config("schedule has no smoothing parameter".into()))?;
    check_len(schedule.n, vbar.len())?;
    let v = schedule.eval(t)?;
    Ok(v.iter().zip(vbar).map(|(a, b)| theta * (a - b)).collect())
}

/// Weight on new data for one implicit-Euler step of the smoothing equation.
pub fn implicit_euler_weight(h: f64, theta: f64) -> f64 {
    h * theta / (1.0 + h * theta)
}

/// One implicit-Euler smoothing step: `vbar <- gamma v + (1 - gamma) vbar`.
pub fn smoothing_step(vbar: &mut [f64], v: &[f64], h: f64, theta: f64) {
    let g = implicit_euler_weight(h, theta);
    for (b, &a) in vbar.iter_mut().zip(v) {
        *b = g * a + (1.0 - g) * *b;
    }
}
