use super::{check_finite, EvolutionConfig, IntegrationStats, Model, Trajectory};
use crate::error::Result;
use crate::graph::TransitionOperator;
use crate::par;
use crate::teleport::{smoothing_step, TeleportSchedule};

/// Fixed-step forward Euler. With smoothing, `vbar` advances by the
/// implicit-Euler update after every step.
pub(super) fn run(
    p: &TransitionOperator,
    schedule: &TeleportSchedule,
    cfg: &EvolutionConfig,
    h: f64,
    x0: Vec<f64>,
) -> Result<Trajectory> {
    let n = p.n();
    let exec = cfg.execution;
    let model = Model {
        p,
        alpha: cfg.alpha,
        correction: cfg.correction,
        exec,
    };
    let t_end = cfg.t_max;
    let grid = &cfg.output_grid;
    let mut traj = Trajectory::with_capacity(grid.len());
    let mut gi = 0;

    let mut x = x0;
    let mut next = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut vbar = schedule.smoothing().map(|_| {
        let mut b = vec![0.0; n];
        schedule.fill(0.0, 0.0, &mut b);
        b
    });

    let eps = 1e-9 * h;
    while gi < grid.len() && grid[gi] <= eps {
        traj.push(grid[gi], x.clone(), exec);
        gi += 1;
    }

    let mut k = 0usize;
    let mut t = 0.0;
    while gi < grid.len() && t < t_end - eps {
        let t_next = (((k + 1) as f64) * h).min(t_end);
        let dt = t_next - t;
        let forcing: &[f64] = match &vbar {
            Some(b) => b,
            None => {
                schedule.fill(t, t, &mut v);
                &v
            }
        };
        model.eval(forcing, &x, &mut dx)?;
        par::for_each_chunk_mut(&mut next, exec, |off, o| {
            for (j, oi) in o.iter_mut().enumerate() {
                *oi = x[off + j] + dt * dx[off + j];
            }
        });
        check_finite(t_next, &next, exec)?;
        if let (Some(b), Some(theta)) = (vbar.as_mut(), schedule.smoothing()) {
            schedule.fill(t_next, t_next, &mut v);
            smoothing_step(b, &v, dt, theta);
        }

        while gi < grid.len() && grid[gi] <= t_next + eps {
            let g = grid[gi];
            let sample = if (g - t_next).abs() <= eps {
                next.clone()
            } else {
                let w = (g - t) / dt;
                x.iter().zip(&next).map(|(a, b)| (1.0 - w) * a + w * b).collect()
            };
            traj.push(g, sample, exec);
            gi += 1;
        }

        std::mem::swap(&mut x, &mut next);
        t = t_next;
        k += 1;
    }
    traj.stats = IntegrationStats {
        steps: k,
        rejected: 0,
        rhs_evals: k,
    };
    Ok(traj)
}
