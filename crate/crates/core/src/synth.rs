//! Seeded synthetic graphs and activity for tests, benches, and the CLI.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{build_transition, AdjacencyStructure};
use crate::integrate::{evolve_rk, EvolutionConfig, Initial, Method};
use crate::solvers::{static_pagerank, SolveConfig};
use crate::teleport::{normalize_activity, ActivityMatrix, TeleportSchedule};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random directed graph with exactly `edges` distinct edges and no
/// self-loops.
pub fn random_graph(n: usize, edges: usize, seed: u64) -> Result<AdjacencyStructure> {
    if n < 2 {
        return Err(Error::Config("random graph needs at least 2 nodes".into()));
    }
    let capacity = n * (n - 1);
    if edges > capacity {
        return Err(Error::Config(format!(
            "{edges} edges requested but {n} nodes allow at most {capacity}"
        )));
    }
    let mut r = rng(seed);
    let mut seen = HashSet::with_capacity(edges);
    let mut list = Vec::with_capacity(edges);
    while list.len() < edges {
        let s = r.gen_range(0..n);
        let mut d = r.gen_range(0..n - 1);
        if d >= s {
            d += 1;
        }
        if seen.insert((s, d)) {
            list.push((s, d));
        }
    }
    AdjacencyStructure::new(n, list)
}

/// Heavy-tailed per-node activity with per-epoch fluctuation; some counts are zero.
pub fn random_activity(n: usize, epochs: usize, seed: u64) -> Result<ActivityMatrix> {
    if n == 0 || epochs == 0 {
        return Err(Error::Config("activity needs n >= 1 and epochs >= 1".into()));
    }
    let mut r = rng(seed);
    let base: Vec<f64> = (0..n).map(|_| 1.0 + 50.0 * r.gen::<f64>().powi(3)).collect();
    let columns = (0..epochs)
        .map(|_| base.iter().map(|b| (b * r.gen_range(0.0..2.0)).floor()).collect())
        .collect();
    ActivityMatrix::new(n, columns)
}

/// Activity that follows the dynamic PageRank state: the count at node `i` in
/// epoch `j + 1` is proportional to `x_i((j + 1) s)` (the state reached after
/// evolving through epoch `j`) times multiplicative noise, plus rare
/// unpredictable bursts. Transient scores therefore lead activity by one epoch.
///
/// The graph is a random graph plus the ring `i -> i + 1 (mod n)`.
pub struct DiffusionFixture {
    pub graph: AdjacencyStructure,
    pub activity: ActivityMatrix,
}

pub fn diffusion_fixture(
    n: usize,
    edges: usize,
    epochs: usize,
    alpha: f64,
    timescale: f64,
    seed: u64,
) -> Result<DiffusionFixture> {
    if epochs < 2 {
        return Err(Error::Config("diffusion fixture needs at least 2 epochs".into()));
    }
    // the ring keeps every node reachable so no activity series dies out
    let random = random_graph(n, edges, seed)?;
    let mut list = random.edges().to_vec();
    list.extend((0..n).map(|i| (i, (i + 1) % n)));
    let graph = AdjacencyStructure::new(n, list)?;
    let p = build_transition(&graph)?;
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let level = 100.0 * n as f64;

    let first = random_activity(n, 1, seed.wrapping_add(1))?;
    let mut columns = vec![first.columns()[0].clone()];
    let v0 = normalize_activity(&first).remove(0);
    let mut x = static_pagerank(&p, &SolveConfig::new(alpha), &v0)?.x;
    for _ in 1..epochs {
        let current = ActivityMatrix::new(n, vec![columns.last().unwrap().clone()])?;
        let v = normalize_activity(&current).remove(0);
        let sched = TeleportSchedule::constant(v, timescale)?;
        let mut cfg = EvolutionConfig::new(alpha, timescale, Method::rk45(), vec![timescale]);
        cfg.initial = Initial::Given(x);
        x = evolve_rk(&p, &sched, &cfg)?.states.remove(0);
        let next = x
            .iter()
            .map(|&xi| {
                let burst = if r.gen::<f64>() < 0.05 {
                    r.gen_range(20.0..60.0)
                } else {
                    0.0
                };
                (level * xi.max(0.0) * r.gen_range(0.9..1.1) + burst).round()
            })
            .collect();
        columns.push(next);
    }
    Ok(DiffusionFixture {
        graph,
        activity: ActivityMatrix::new(n, columns)?,
    })
}
