use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dynpr::integrate::{epoch_grid, uniform_grid};
use dynpr::predict::{run_harness, HarnessConfig};
use dynpr::ranks::{isim, RankReport};
use dynpr::solvers::mean_column;
use dynpr::synth;
use dynpr::{
    build_transition, eval_steady, evolve, normalize_activity, oscillatory_steady_state, static_pagerank,
    ActivityMatrix, AdjacencyStructure, EvolutionConfig, Execution, Initial, Method, SolveConfig, TeleportSchedule,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64, to_json, write_output};

pub const MANIFEST_FORMAT: &str = "dynpr-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run; written next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub invocation: Command,
    pub outputs: Vec<String>,
}

impl Command {
    fn output_mut(&mut self) -> Option<&mut Output> {
        match self {
            Command::Static(a) => Some(&mut a.output),
            Command::Evolve(a) => Some(&mut a.output),
            Command::Ranks(a) => Some(&mut a.output),
            Command::Isim(a) => Some(&mut a.output),
            Command::Oscillate(a) => Some(&mut a.output),
            Command::Predict(a) => Some(&mut a.output),
            Command::Synth(SynthCommand::Graph(a)) => Some(&mut a.output),
            Command::Synth(SynthCommand::Activity(a)) => Some(&mut a.output),
            Command::Synth(SynthCommand::Diffusion(a)) => Some(&mut a.output),
            Command::Rerun(_) => None,
        }
    }

    /// Makes every path absolute so the manifest is valid from any directory.
    fn resolve_paths(&mut self) -> CliResult<()> {
        let abs = |p: &mut std::path::PathBuf| -> CliResult<()> {
            *p = io::absolute(p)?;
            Ok(())
        };
        match self {
            Command::Static(a) => {
                abs(&mut a.graph)?;
                a.activity.as_mut().map(abs).transpose()?;
            }
            Command::Evolve(a) => {
                abs(&mut a.graph)?;
                a.activity.as_mut().map(abs).transpose()?;
            }
            Command::Ranks(a) => abs(&mut a.trajectory)?,
            Command::Isim(a) => {
                abs(&mut a.a)?;
                abs(&mut a.b)?;
            }
            Command::Oscillate(a) => {
                abs(&mut a.graph)?;
                a.activity.as_mut().map(abs).transpose()?;
            }
            Command::Predict(a) => {
                abs(&mut a.graph)?;
                abs(&mut a.activity)?;
            }
            Command::Synth(_) | Command::Rerun(_) => {}
        }
        if let Some(out) = self.output_mut() {
            fs::create_dir_all(&out.out).map_err(|e| CliError::write(&out.out, e))?;
            out.out = io::absolute(&out.out)?;
        }
        Ok(())
    }
}

pub fn run(mut cmd: Command) -> CliResult<()> {
    if let Command::Rerun(r) = &cmd {
        let text = fs::read_to_string(&r.manifest).map_err(|e| CliError::read(&r.manifest, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", r.manifest.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(CliError::Format(format!(
                "unsupported manifest format {:?}",
                manifest.format
            )));
        }
        let mut inner = manifest.invocation;
        if let (Some(out), Some(o)) = (&r.out, inner.output_mut()) {
            o.out = out.clone();
        }
        return run(inner);
    }

    cmd.resolve_paths()?;
    let outputs = match &cmd {
        Command::Static(a) => cmd_static(a)?,
        Command::Evolve(a) => cmd_evolve(a)?,
        Command::Ranks(a) => cmd_ranks(a)?,
        Command::Isim(a) => cmd_isim(a)?,
        Command::Oscillate(a) => cmd_oscillate(a)?,
        Command::Predict(a) => cmd_predict(a)?,
        Command::Synth(s) => cmd_synth(s)?,
        Command::Rerun(_) => unreachable!(),
    };
    let out_dir = cmd.output_mut().map(|o| o.out.clone()).expect("command has an output");
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        invocation: cmd,
        outputs,
    };
    write_output(&out_dir, MANIFEST_FILE, &to_json(&manifest))?;
    Ok(())
}

fn exec(o: &Output) -> Execution {
    if o.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn initial(kind: InitialKind) -> Initial {
    match kind {
        InitialKind::Uniform => Initial::Uniform,
        InitialKind::Teleport0 => Initial::Teleport0,
        InitialKind::Staticpr => Initial::StaticPr,
    }
}

/// Column `j` is uniform over the nodes `i` with `i mod k == j`.
fn class_columns(n: usize, k: usize) -> CliResult<Vec<Vec<f64>>> {
    if k == 0 || k > n {
        return Err(CliError::Usage(format!("--k must lie in 1..={n}, got {k}")));
    }
    Ok((0..k)
        .map(|j| {
            let size = (n - j).div_ceil(k) as f64;
            (0..n).map(|i| if i % k == j { 1.0 / size } else { 0.0 }).collect()
        })
        .collect())
}

fn written(dir: &Path, files: &[(&str, String)]) -> CliResult<Vec<String>> {
    files
        .iter()
        .map(|(name, body)| write_output(dir, name, body).map(|_| name.to_string()))
        .collect()
}

fn cmd_static(a: &StaticArgs) -> CliResult<Vec<String>> {
    let (g, v) = match &a.activity {
        Some(path) => {
            let (g, act) = io::read_graph_and_activity(&a.graph, path)?;
            (g, mean_column(&normalize_activity(&act)))
        }
        None => {
            let g = io::read_graph(&a.graph)?;
            let n = g.n();
            (g, vec![1.0 / n as f64; n])
        }
    };
    let p = build_transition(&g)?;
    let cfg = SolveConfig {
        alpha: a.alpha,
        tol: a.tol,
        max_iter: a.max_iter,
        execution: exec(&a.output),
    };
    let sol = static_pagerank(&p, &cfg, &v)?;
    println!(
        "n = {}, iterations = {}, residual = {:e}",
        p.n(),
        sol.iterations,
        sol.residual
    );
    written(&a.output.out, &[("scores.csv", io::scores_csv(&sol.x))])
}

fn cmd_evolve(a: &EvolveArgs) -> CliResult<Vec<String>> {
    let s = a.timescale;
    if !(s > 0.0) {
        return Err(CliError::Usage(format!("--timescale must be > 0, got {s}")));
    }
    let (g, columns) = match (&a.activity, a.k) {
        (Some(path), _) => {
            let (g, act) = io::read_graph_and_activity(&a.graph, path)?;
            (g, Some(normalize_activity(&act)))
        }
        (None, Some(k)) => {
            let g = io::read_graph(&a.graph)?;
            let cols = class_columns(g.n(), k)?;
            (g, Some(cols))
        }
        (None, None) => (io::read_graph(&a.graph)?, None),
    };
    let p = build_transition(&g)?;
    let n = p.n();
    let (schedule, piecewise) = match columns {
        Some(cols) => {
            let k = cols.len();
            let kind = a.schedule.unwrap_or(if a.k.is_some() {
                ScheduleKind::Oscillatory
            } else {
                ScheduleKind::Piecewise
            });
            match kind {
                ScheduleKind::Piecewise => {
                    let t_max = a.tmax.unwrap_or(k as f64 * s);
                    (TeleportSchedule::piecewise(cols, s, t_max)?, true)
                }
                ScheduleKind::Oscillatory => (TeleportSchedule::oscillatory(cols, a.tmax.unwrap_or(20.0))?, false),
            }
        }
        None => (TeleportSchedule::uniform(n, a.tmax.unwrap_or(50.0))?, false),
    };
    let schedule = match a.theta {
        Some(theta) => schedule.with_smoothing(theta)?,
        None => schedule,
    };
    let t_max = schedule.t_max();

    let grid = match a.grid.unwrap_or(if piecewise { Grid::Epochs } else { Grid::Step(0.1) }) {
        Grid::Step(h) => uniform_grid(t_max, h),
        Grid::Epochs => {
            let mut g = epoch_grid(s, (t_max / s + 1e-9).floor() as usize);
            if t_max - g[g.len() - 1] > 1e-9 * t_max {
                g.push(t_max);
            }
            g
        }
    };
    let method = match a.method {
        MethodKind::Euler => Method::Euler { step: a.step },
        MethodKind::Rk45 => Method::Rk45 {
            rel_tol: a.rtol,
            abs_tol: a.atol,
        },
    };
    let mut cfg = EvolutionConfig::new(a.alpha, t_max, method, grid);
    cfg.initial = initial(a.initial);
    cfg.correction = !a.no_correction;
    cfg.execution = exec(&a.output);
    let traj = evolve(&p, &schedule, &cfg)?;

    let summary = json!({
        "n": n,
        "samples": traj.len(),
        "t_max": t_max,
        "max_sum_drift": traj.max_sum_drift(),
        "min_entry": traj.min_entry(),
        "stats": traj.stats,
    });
    println!(
        "n = {n}, samples = {}, steps = {}, rejected = {}, max |1 - sum(x)| = {:e}",
        traj.len(),
        traj.stats.steps,
        traj.stats.rejected,
        traj.max_sum_drift()
    );
    written(
        &a.output.out,
        &[
            ("trajectory.csv", io::trajectory_csv(&traj)),
            ("summary.json", to_json(&summary)),
        ],
    )
}

fn cmd_ranks(a: &RanksArgs) -> CliResult<Vec<String>> {
    let traj = io::read_trajectory(&a.trajectory)?;
    let report = RankReport::from_trajectory(&traj, a.window, a.at, a.topk)?;
    let mut csv = String::from("node,cumulative,variance,difference");
    if report.transient.is_some() {
        csv.push_str(",transient");
    }
    csv.push('\n');
    for i in 0..traj.n() {
        let _ = write!(
            csv,
            "{i},{},{},{}",
            fmt_f64(report.cumulative[i]),
            fmt_f64(report.variance[i]),
            fmt_f64(report.difference[i])
        );
        if let Some(t) = &report.transient {
            let _ = write!(csv, ",{}", fmt_f64(t[i]));
        }
        csv.push('\n');
    }
    println!("window = [{}, {}]", report.window.0, report.window.1);
    println!("top difference: {:?}", report.top.difference);
    written(&a.output.out, &[("ranks.csv", csv), ("ranks.json", to_json(&report))])
}

fn cmd_isim(a: &IsimArgs) -> CliResult<Vec<String>> {
    let x = io::read_scores(&a.a)?;
    let y = io::read_scores(&a.b)?;
    let profile = isim(&x, &y, a.topk)?;
    let mut csv = String::from("j,isim\n");
    for (j, v) in profile.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", j + 1, fmt_f64(*v));
        println!("isim_{} = {v}", j + 1);
    }
    written(&a.output.out, &[("isim.csv", csv)])
}

/// Integration is compared with the analytic steady state from this time on.
const BURN_IN: f64 = 4.0;

fn cmd_oscillate(a: &OscillateArgs) -> CliResult<Vec<String>> {
    let (g, columns): (AdjacencyStructure, Vec<Vec<f64>>) = match (&a.activity, a.k) {
        (Some(path), _) => {
            let (g, act) = io::read_graph_and_activity(&a.graph, path)?;
            (g, normalize_activity(&act))
        }
        (None, Some(k)) => {
            let g = io::read_graph(&a.graph)?;
            let cols = class_columns(g.n(), k)?;
            (g, cols)
        }
        (None, None) => unreachable!("clap requires --k or --activity"),
    };
    let p = build_transition(&g)?;
    let ex = exec(&a.output);
    let cfg = SolveConfig {
        execution: ex,
        ..SolveConfig::new(a.alpha)
    };
    let (mean, amp) = oscillatory_steady_state(&p, a.alpha, &columns, &cfg)?;

    let schedule = TeleportSchedule::oscillatory(columns.clone(), a.tmax)?;
    let mut ecfg = EvolutionConfig::new(
        a.alpha,
        a.tmax,
        Method::Rk45 {
            rel_tol: a.rtol,
            abs_tol: a.atol,
        },
        uniform_grid(a.tmax, a.grid),
    );
    ecfg.initial = initial(a.initial);
    ecfg.execution = ex;
    let traj = evolve(&p, &schedule, &ecfg)?;
    let max_gap = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(&t, _)| t >= BURN_IN)
        .map(|(&t, x)| {
            eval_steady(&mean.x, &amp.s, t)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));

    println!("x   = [{}]", join(&mean.x));
    println!("|s| = [{}]", join(&amp.magnitude));
    match max_gap {
        Some(gap) => println!("max gap over [{BURN_IN}, {}] = {gap:e}", a.tmax),
        None => println!("max gap: no grid points at t >= {BURN_IN}"),
    }
    let report = json!({
        "alpha": a.alpha,
        "k": columns.len(),
        "x": mean.x,
        "magnitude": amp.magnitude,
        "s_re": amp.s.iter().map(|c| c.re).collect::<Vec<_>>(),
        "s_im": amp.s.iter().map(|c| c.im).collect::<Vec<_>>(),
        "static_iterations": mean.iterations,
        "complex_iterations": amp.iterations,
        "gap_window": [BURN_IN, a.tmax],
        "max_gap": max_gap,
    });
    written(&a.output.out, &[("oscillate.json", to_json(&report))])
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn cmd_predict(a: &PredictArgs) -> CliResult<Vec<String>> {
    let (g, act) = io::read_graph_and_activity(&a.graph, &a.activity)?;
    let p = build_transition(&g)?;
    let cfg = HarnessConfig {
        alpha: a.alpha,
        timescale: a.timescale,
        thetas: a.theta.iter().map(|t| t.0).collect(),
        lags: a.lags,
        cohort_size: a.cohort,
        rel_tol: a.rtol,
        abs_tol: a.atol,
        execution: exec(&a.output),
    };
    let report = run_harness(&p, &act, &cfg)?;
    for run in &report.runs {
        let theta = run.theta.map_or("raw".to_string(), |t| t.to_string());
        for c in &run.report.cohorts {
            let ratio = c.error_ratio.map_or("undefined".to_string(), |r| format!("{r:.4}"));
            println!(
                "theta = {theta:>6}  {:<15} base {:.4}  augmented {:.4}  ratio {ratio}",
                c.label, c.mean_smape_base, c.mean_smape_augmented
            );
        }
    }
    written(&a.output.out, &[("prediction.json", to_json(&report))])
}

fn graph_text(g: &AdjacencyStructure) -> String {
    let mut out = format!("# nodes {}\n", g.n());
    for (s, d) in g.edges() {
        let _ = writeln!(out, "{s} {d}");
    }
    out
}

fn cmd_synth(cmd: &SynthCommand) -> CliResult<Vec<String>> {
    match cmd {
        SynthCommand::Graph(a) => {
            let g = synth::random_graph(a.nodes, a.edges, a.seed)?;
            written(&a.output.out, &[("graph.txt", graph_text(&g))])
        }
        SynthCommand::Activity(a) => {
            let act: ActivityMatrix = synth::random_activity(a.nodes, a.epochs, a.seed)?;
            written(&a.output.out, &[("activity.csv", act.to_csv())])
        }
        SynthCommand::Diffusion(a) => {
            let f = synth::diffusion_fixture(a.nodes, a.edges, a.epochs, a.alpha, a.timescale, a.seed)?;
            written(
                &a.output.out,
                &[
                    ("graph.txt", graph_text(&f.graph)),
                    ("activity.csv", f.activity.to_csv()),
                ],
            )
        }
    }
}
