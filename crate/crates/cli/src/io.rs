//! File readers and the fixed-precision writers used by every command.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use dynpr::{load_edge_list, ActivityMatrix, AdjacencyStructure, Trajectory};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::read(path, e))
}

pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(|e| CliError::read(path, e))
}

pub fn read_graph(path: &Path) -> CliResult<AdjacencyStructure> {
    Ok(load_edge_list(open(path)?)?)
}

/// Graph plus activity on a common node set: the larger of the two node
/// counts wins and the other input is padded.
pub fn read_graph_and_activity(graph: &Path, activity: &Path) -> CliResult<(AdjacencyStructure, ActivityMatrix)> {
    let g = read_graph(graph)?;
    let a = ActivityMatrix::from_csv(open(activity)?, None)?;
    let n = g.n().max(a.n());
    let g = if g.n() < n {
        AdjacencyStructure::new(n, g.edges().to_vec())?
    } else {
        g
    };
    let a = if a.n() < n {
        ActivityMatrix::from_csv(open(activity)?, Some(n))?
    } else {
        a
    };
    Ok((g, a))
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Format(format!("{}:{line}: {msg}", path.display()))
}

fn csv_rows(path: &Path, header: &[&str]) -> CliResult<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let got = rdr.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(path, 1, format!("expected header {:?}", header.join(","))));
    }
    rdr.records()
        .enumerate()
        .map(|(i, r)| r.map(|r| (i + 2, r)).map_err(|e| parse_err(path, i + 2, e)))
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, i: usize) -> CliResult<T> {
    let tok = rec.get(i).unwrap_or("");
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid value {tok:?}")))
}

/// Reads a `node,score` file; every node `0..n` must appear exactly once.
pub fn read_scores(path: &Path) -> CliResult<Vec<f64>> {
    let rows = csv_rows(path, &["node", "score"])?;
    let mut out = vec![None; rows.len()];
    for (line, rec) in &rows {
        let node: usize = field(path, *line, rec, 0)?;
        let score: f64 = field(path, *line, rec, 1)?;
        match out.get_mut(node) {
            Some(slot @ None) => *slot = Some(score),
            Some(Some(_)) => return Err(parse_err(path, *line, format!("node {node} repeated"))),
            None => return Err(parse_err(path, *line, format!("node {node} out of range"))),
        }
    }
    if out.is_empty() {
        return Err(dynpr::Error::EmptyInput.into());
    }
    Ok(out.into_iter().map(|s| s.unwrap_or(0.0)).collect())
}

pub fn scores_csv(scores: &[f64]) -> String {
    let mut out = String::from("node,score\n");
    for (i, &s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f64(s));
    }
    out
}

/// Long-form `t,node,score`, ordered by time then node.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * traj.n() * 40 + 16);
    out.push_str("t,node,score\n");
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let t = fmt_f64(*t);
        for (i, &xi) in x.iter().enumerate() {
            let _ = writeln!(out, "{t},{i},{}", fmt_f64(xi));
        }
    }
    out
}

pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let rows = csv_rows(path, &["t", "node", "score"])?;
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in &rows {
        let t: f64 = field(path, *line, rec, 0)?;
        let node: usize = field(path, *line, rec, 1)?;
        let score: f64 = field(path, *line, rec, 2)?;
        if times.last() != Some(&t) {
            times.push(t);
            states.push(Vec::new());
        }
        let state = states.last_mut().unwrap();
        if node != state.len() {
            return Err(parse_err(path, *line, "rows must be ordered by time, then node 0..n"));
        }
        state.push(score);
    }
    if times.is_empty() {
        return Err(dynpr::Error::EmptyInput.into());
    }
    Ok(Trajectory::from_samples(times, states)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Writes `name` under `dir`, creating the directory if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::write(&path, e))?;
    Ok(path)
}
