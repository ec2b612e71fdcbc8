use super::*;
use crate::graph::{build_transition, load_edge_list, AdjacencyStructure};
use crate::solvers::{eval_steady, oscillatory_steady_state};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FOUR_NODE: &str = "0 2\n1 2\n2 1\n2 3\n3 0\n3 1\n";

fn four_node_p() -> TransitionOperator {
    build_transition(&load_edge_list(FOUR_NODE.as_bytes()).unwrap()).unwrap()
}

fn basis_columns(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

fn norm1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Closed form `x* + exp(-(I - alpha P) t)(x0 - x*)` for constant `v`.
fn closed_form(p: &TransitionOperator, alpha: f64, v: &[f64], x0: &[f64], t: f64) -> Vec<f64> {
    let n = p.n();
    let m = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - alpha * p.entry(i, j));
    let xs = m
        .clone()
        .lu()
        .solve(&DVector::from_iterator(n, v.iter().map(|x| (1.0 - alpha) * x)))
        .unwrap();
    let e = (-m * t).exp();
    let x = &xs + e * (DVector::from_column_slice(x0) - &xs);
    x.iter().copied().collect()
}

#[test]
fn derivative_vanishes_at_equilibrium() {
    let p = four_node_p();
    let v = vec![0.1, 0.2, 0.3, 0.4];
    let sched = TeleportSchedule::constant(v.clone(), 1.0).unwrap();
    let x = static_pagerank(
        &p,
        &SolveConfig {
            tol: 1e-15,
            ..SolveConfig::new(0.85)
        },
        &v,
    )
    .unwrap()
    .x;
    for corr in [true, false] {
        let d = derivative(&p, 0.5, &x, &sched, 0.85, corr).unwrap();
        assert!(d.iter().all(|z| z.abs() < 1e-14), "{d:?}");
    }
}

#[test]
fn correction_is_a_no_op_on_distributions() {
    let p = four_node_p();
    let sched = TeleportSchedule::constant(vec![0.4, 0.3, 0.2, 0.1], 1.0).unwrap();
    let x = vec![0.7, 0.1, 0.1, 0.1];
    let a = derivative(&p, 0.0, &x, &sched, 0.85, true).unwrap();
    let b = derivative(&p, 0.0, &x, &sched, 0.85, false).unwrap();
    assert!(max_diff(&a, &b) < 1e-15);
    assert!(a.iter().sum::<f64>().abs() < 1e-15);
}

#[test]
fn corrected_derivative_pulls_sum_back_to_one() {
    // e'x' = (1-a) sv - gamma sx + a sx with gamma = (1-a) sv + a sx
    let p = four_node_p();
    let sched = TeleportSchedule::constant(vec![0.25; 4], 1.0).unwrap();
    let a = 0.85;
    for delta in [1e-3, -1e-3, 1e-7, -0.2] {
        let x: Vec<f64> = [0.1, 0.2, 0.3, 0.4].iter().map(|z| z * (1.0 + delta)).collect();
        let sx = 1.0 + delta;
        let gamma = (1.0 - a) + a * sx;
        let expect = (1.0 - a) - gamma * sx + a * sx;
        let s: f64 = derivative(&p, 0.0, &x, &sched, a, true).unwrap().iter().sum();
        assert!((s - expect).abs() < 1e-15);
        assert!(s * delta < 0.0, "drift of {delta} must be opposed, got {s}");
        let plain: f64 = derivative(&p, 0.0, &x, &sched, a, false).unwrap().iter().sum();
        assert!(s.abs() >= plain.abs() * 0.999);
    }
}

#[test]
fn initial_state_choices() {
    let p = four_node_p();
    let sched = TeleportSchedule::piecewise(basis_columns(4), 1.0, 4.0).unwrap();
    assert_eq!(
        initial_state(&Initial::Uniform, &p, &sched, 0.85).unwrap(),
        vec![0.25; 4]
    );
    assert_eq!(
        initial_state(&Initial::Teleport0, &p, &sched, 0.85).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0]
    );
    assert_eq!(
        initial_state(&Initial::StaticPr, &p, &sched, 0.0).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0]
    );
    let pr = initial_state(&Initial::StaticPr, &p, &sched, 0.85).unwrap();
    let d = derivative(&p, 0.0, &pr, &sched, 0.85, true).unwrap();
    assert!(d.iter().all(|z| z.abs() < 1e-10));
}

#[test]
fn config_validation() {
    let p = four_node_p();
    let sched = TeleportSchedule::uniform(4, 10.0).unwrap();
    let bad_h = EvolutionConfig::new(0.85, 10.0, Method::Euler { step: 1.1 }, vec![0.0, 10.0]);
    match evolve(&p, &sched, &bad_h) {
        Err(Error::Config(msg)) => assert!(msg.contains("2/(1+alpha)"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let ok_h = EvolutionConfig::new(0.85, 10.0, Method::Euler { step: 1.08 }, vec![0.0, 10.0]);
    assert!(evolve(&p, &sched, &ok_h).is_ok());
    let cases = [
        EvolutionConfig::new(0.85, 11.0, Method::rk45(), vec![0.0]),
        EvolutionConfig::new(0.85, 10.0, Method::rk45(), vec![]),
        EvolutionConfig::new(0.85, 10.0, Method::rk45(), vec![1.0, 1.0]),
        EvolutionConfig::new(0.85, 10.0, Method::rk45(), vec![0.0, 10.5]),
        EvolutionConfig::new(1.0, 10.0, Method::rk45(), vec![0.0]),
        EvolutionConfig::new(
            0.85,
            10.0,
            Method::Rk45 {
                rel_tol: 0.0,
                abs_tol: 1e-9,
            },
            vec![0.0],
        ),
    ];
    for cfg in &cases {
        assert!(matches!(evolve(&p, &sched, cfg), Err(Error::Config(_))), "{cfg:?}");
    }
    assert!(evolve_rk(&p, &sched, &ok_h).is_err());
}

#[test]
fn euler_matches_power_iteration() {
    let p = four_node_p();
    let a = 0.85;
    let v = vec![0.1, 0.2, 0.3, 0.4];
    let sched = TeleportSchedule::constant(v.clone(), 100.0).unwrap();
    let mut cfg = EvolutionConfig::new(a, 100.0, Method::Euler { step: 1.0 }, uniform_grid(100.0, 1.0));
    cfg.correction = false;
    cfg.initial = Initial::Uniform;
    let traj = evolve_euler(&p, &sched, &cfg).unwrap();
    assert_eq!(traj.len(), 101);

    // independent dense power iteration x <- a P x + (1 - a) v
    let dense: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| p.entry(i, j)).collect()).collect();
    let mut x = vec![0.25; 4];
    for k in 0..=100 {
        assert!(max_diff(&traj.states[k], &x) <= 1e-14, "step {k}");
        x = (0..4)
            .map(|i| a * (0..4).map(|j| dense[i][j] * x[j]).sum::<f64>() + (1.0 - a) * v[i])
            .collect();
    }
    let exact = static_pagerank(
        &p,
        &SolveConfig {
            tol: 1e-15,
            ..SolveConfig::new(a)
        },
        &v,
    )
    .unwrap()
    .x;
    assert!(norm1_diff(&traj.states[100], &exact) <= 2.0 * a.powi(100));
}

#[test]
fn euler_step_from_equilibrium_is_stationary() {
    let p = four_node_p();
    let sched = TeleportSchedule::uniform(4, 1.0).unwrap();
    let mut cfg = EvolutionConfig::new(0.85, 1.0, Method::Euler { step: 0.5 }, vec![0.0, 0.5, 1.0]);
    cfg.initial = Initial::StaticPr;
    let traj = evolve_euler(&p, &sched, &cfg).unwrap();
    assert!(max_diff(&traj.states[0], &traj.states[2]) < 1e-9);
}

#[test]
fn euler_interpolates_between_steps() {
    let p = four_node_p();
    let sched = TeleportSchedule::uniform(4, 2.0).unwrap();
    let mut cfg = EvolutionConfig::new(0.85, 2.0, Method::Euler { step: 1.0 }, vec![0.0, 0.5, 1.0]);
    cfg.initial = Initial::Given(vec![1.0, 0.0, 0.0, 0.0]);
    let t = evolve_euler(&p, &sched, &cfg).unwrap();
    let mid: Vec<f64> = t.states[0]
        .iter()
        .zip(&t.states[2])
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    assert!(max_diff(&t.states[1], &mid) < 1e-15);
}

#[test]
fn long_timescale_collapses_to_static_solves() {
    let p = four_node_p();
    let a = 0.85;
    let cols = basis_columns(4);
    let sched = TeleportSchedule::piecewise(cols.clone(), 100.0, 400.0).unwrap();
    let mut cfg = EvolutionConfig::new(a, 400.0, Method::Euler { step: 1.0 }, vec![100.0, 200.0, 300.0, 400.0]);
    cfg.initial = Initial::Uniform;
    let traj = evolve_euler(&p, &sched, &cfg).unwrap();
    for (j, state) in traj.states.iter().enumerate() {
        let exact = static_pagerank(
            &p,
            &SolveConfig {
                tol: 1e-15,
                ..SolveConfig::new(a)
            },
            &cols[j],
        )
        .unwrap()
        .x;
        assert!(norm1_diff(state, &exact) <= 2.0 * a.powi(100) + 1e-10, "epoch {j}");
    }
}

#[test]
fn rk_matches_matrix_exponential() {
    let p = four_node_p();
    let v = vec![0.4, 0.3, 0.2, 0.1];
    let x0 = vec![0.0, 0.0, 0.0, 1.0];
    let sched = TeleportSchedule::constant(v.clone(), 10.0).unwrap();
    let mut cfg = EvolutionConfig::new(
        0.85,
        10.0,
        Method::Rk45 {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
        },
        uniform_grid(10.0, 0.37),
    );
    cfg.initial = Initial::Given(x0.clone());
    let traj = evolve_rk(&p, &sched, &cfg).unwrap();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        assert!(max_diff(x, &closed_form(&p, 0.85, &v, &x0, *t)) < 1e-8, "t = {t}");
    }
}

#[test]
fn rk_converges_to_pagerank_for_constant_teleportation() {
    let p = four_node_p();
    let v = vec![0.1, 0.2, 0.3, 0.4];
    let sched = TeleportSchedule::constant(v.clone(), 50.0).unwrap();
    let mut cfg = EvolutionConfig::new(0.85, 50.0, Method::rk45(), vec![0.0, 5.0, 50.0]);
    cfg.initial = Initial::Uniform;
    let traj = evolve_rk(&p, &sched, &cfg).unwrap();
    let exact = static_pagerank(
        &p,
        &SolveConfig {
            tol: 1e-15,
            ..SolveConfig::new(0.85)
        },
        &v,
    )
    .unwrap()
    .x;
    assert!(norm1_diff(&traj.states[2], &exact) <= 1e-6);
    assert!(norm1_diff(&traj.states[2], &exact) < norm1_diff(&traj.states[1], &exact));

    cfg.initial = Initial::StaticPr;
    let flat = evolve_rk(&p, &sched, &cfg).unwrap();
    for s in &flat.states {
        // within the default relative tolerance of 1e-6
        assert!(max_diff(s, &flat.states[0]) < 1e-6 * 0.4);
    }
}

#[test]
fn rk_restarts_at_breakpoints() {
    let p = four_node_p();
    let cols = basis_columns(4);
    let sched = TeleportSchedule::piecewise(cols.clone(), 0.75, 3.0).unwrap();
    let mut cfg = EvolutionConfig::new(
        0.85,
        3.0,
        Method::Rk45 {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
        },
        uniform_grid(3.0, 0.25),
    );
    cfg.initial = Initial::Uniform;
    let traj = evolve_rk(&p, &sched, &cfg).unwrap();
    // piecewise closed form, epoch by epoch
    let mut x0 = vec![0.25; 4];
    for (j, col) in cols.iter().enumerate() {
        let start = 0.75 * j as f64;
        for (t, x) in traj.times.iter().zip(&traj.states) {
            if *t >= start && *t <= start + 0.75 {
                assert!(
                    max_diff(x, &closed_form(&p, 0.85, col, &x0, t - start)) < 1e-8,
                    "t = {t}"
                );
            }
        }
        x0 = closed_form(&p, 0.85, col, &x0, 0.75);
    }
}

fn oscillatory_problem(
    alpha: f64,
    t_max: f64,
) -> (
    TransitionOperator,
    TeleportSchedule,
    Vec<f64>,
    Vec<num_complex::Complex64>,
) {
    let p = four_node_p();
    let cols = basis_columns(4);
    let (mean, amp) = oscillatory_steady_state(&p, alpha, &cols, &SolveConfig::default()).unwrap();
    let sched = TeleportSchedule::oscillatory(cols, t_max).unwrap();
    (p, sched, mean.x, amp.s)
}

#[test]
fn rk_approaches_periodic_steady_state() {
    let (p, sched, x, s) = oscillatory_problem(0.85, 20.0);
    let mut cfg = EvolutionConfig::new(0.85, 20.0, Method::rk45(), uniform_grid(20.0, 0.05));
    cfg.initial = Initial::StaticPr;
    let traj = evolve_rk(&p, &sched, &cfg).unwrap();
    let gap = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= 4.0)
        .map(|(t, st)| max_diff(st, &eval_steady(&x, &s, *t)))
        .fold(0.0, f64::max);
    assert!(gap <= 1e-3, "gap {gap}");
}

#[test]
fn euler_and_rk_agree_on_oscillatory_problem() {
    let (p, sched, _, _) = oscillatory_problem(0.85, 20.0);
    let grid = uniform_grid(20.0, 0.5);
    let mut rk = EvolutionConfig::new(
        0.85,
        20.0,
        Method::Rk45 {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        },
        grid.clone(),
    );
    rk.initial = Initial::StaticPr;
    let mut eu = rk.clone();
    eu.method = Method::Euler { step: 1e-3 };
    let a = evolve_rk(&p, &sched, &rk).unwrap();
    let b = evolve_euler(&p, &sched, &eu).unwrap();
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| max_diff(x, y))
        .fold(0.0, f64::max);
    assert!(gap <= 1e-4, "gap {gap}");
}

#[test]
fn strong_smoothing_tracks_raw_jumps() {
    let (p, sched, _, _) = oscillatory_problem(0.85, 20.0);
    let grid = uniform_grid(20.0, 0.05);
    let mut cfg = EvolutionConfig::new(0.85, 20.0, Method::rk45(), grid);
    cfg.initial = Initial::Teleport0;
    let raw = evolve_rk(&p, &sched, &cfg).unwrap();
    let smooth = evolve_rk(&p, &sched.clone().with_smoothing(10.0).unwrap(), &cfg).unwrap();
    let gap = raw
        .times
        .iter()
        .zip(raw.states.iter().zip(&smooth.states))
        .filter(|(t, _)| **t >= 4.0)
        .map(|(_, (a, b))| max_diff(a, b))
        .fold(0.0, f64::max);
    assert!(gap <= 5e-3, "gap {gap}");
    assert!(smooth.max_sum_drift() <= 1e-8);
}

#[test]
fn euler_smoothing_matches_rk_smoothing() {
    let p = four_node_p();
    let sched = TeleportSchedule::piecewise(basis_columns(4), 2.0, 8.0)
        .unwrap()
        .with_smoothing(0.5)
        .unwrap();
    let grid = uniform_grid(8.0, 1.0);
    let mut rk = EvolutionConfig::new(
        0.85,
        8.0,
        Method::Rk45 {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
        },
        grid,
    );
    rk.initial = Initial::Uniform;
    let mut eu = rk.clone();
    eu.method = Method::Euler { step: 1e-3 };
    let a = evolve_rk(&p, &sched, &rk).unwrap();
    let b = evolve_euler(&p, &sched, &eu).unwrap();
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| max_diff(x, y))
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "gap {gap}");
    // smoothing delays the response to the first jump
    let raw = evolve_rk(
        &p,
        &TeleportSchedule::piecewise(basis_columns(4), 2.0, 8.0).unwrap(),
        &rk,
    )
    .unwrap();
    assert!(max_diff(&a.states[3], &raw.states[3]) > 1e-3);
}

#[test]
fn sequential_and_parallel_trajectories_agree_bitwise() {
    let n = 30_000;
    let edges: Vec<_> = (0..n)
        .flat_map(|i| [(i, (i * 7 + 1) % n), (i, (i * 13 + 5) % n)])
        .collect();
    let p = build_transition(&AdjacencyStructure::new(n, edges).unwrap()).unwrap();
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let raw: Vec<f64> = (0..n).map(|i| ((i * (k + 3)) % 11) as f64 + 1.0).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect();
    let sched = TeleportSchedule::piecewise(cols, 1.0, 3.0).unwrap();
    let mut cfg = EvolutionConfig::new(0.85, 3.0, Method::rk45(), epoch_grid(1.0, 3));
    cfg.execution = Execution::Sequential;
    let a = evolve_rk(&p, &sched, &cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let b = evolve_rk(&p, &sched, &cfg).unwrap();
    assert_eq!(a, b);
}

fn random_case() -> impl Strategy<Value = (AdjacencyStructure, Vec<Vec<f64>>, f64, f64, u8)> {
    (2usize..25, 1usize..5).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec((0..n, 0..n), 0..(3 * n))
                .prop_map(move |e| AdjacencyStructure::new(n, e).unwrap()),
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), k.max(2)),
            0.05f64..0.97,
            0.3f64..3.0,
            0u8..3,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn trajectories_conserve_probability((adj, raw, alpha, s, kind) in random_case()) {
        let p = build_transition(&adj).unwrap();
        let cols: Vec<Vec<f64>> = raw.iter().map(|c| {
            let t: f64 = c.iter().sum();
            if t > 0.0 { c.iter().map(|x| x / t).collect() } else { vec![1.0 / c.len() as f64; c.len()] }
        }).collect();
        let t_max = 8.0;
        let sched = match kind {
            0 => TeleportSchedule::piecewise(cols, s, t_max).unwrap(),
            1 => TeleportSchedule::oscillatory(cols, t_max).unwrap(),
            _ => TeleportSchedule::piecewise(cols, s, t_max).unwrap().with_smoothing(s).unwrap(),
        };
        for method in [Method::rk45(), Method::Euler { step: 0.1 }] {
            let mut cfg = EvolutionConfig::new(alpha, t_max, method, uniform_grid(t_max, 0.1));
            cfg.initial = Initial::Uniform;
            let traj = evolve(&p, &sched, &cfg).unwrap();
            prop_assert!(traj.max_sum_drift() <= 1e-8);
            prop_assert!(traj.min_entry() >= -1e-9);
        }
    }
}
