//! Directed graphs and the column-stochastic random-walk operator.
//!
//! Edge lists are read as whitespace-separated `src dst` pairs with zero-based
//! node ids. The transition operator `P` has column `j` equal to the uniform
//! distribution over the out-neighbours of `j`; nodes without out-links
//! (dangling nodes) get the uniform distribution over all nodes.

use std::io::BufRead;

use crate::error::{check_len, Error, Result};
use crate::par::{self, Execution};

/// Deduplicated directed edge set over nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyStructure {
    n: usize,
    /// Sorted by `(src, dst)`, no duplicates.
    edges: Vec<(usize, usize)>,
    out_degree: Vec<usize>,
}

impl AdjacencyStructure {
    /// Builds the structure from an arbitrary edge list; duplicates collapse.
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(s, d)) = edges.iter().find(|&&(s, d)| s >= n || d >= n) {
            return Err(Error::Domain(format!(
                "edge ({s}, {d}) references a node outside 0..{n}"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut out_degree = vec![0; n];
        for &(s, _) in &edges {
            out_degree[s] += 1;
        }
        Ok(Self { n, edges, out_degree })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_degree(&self) -> &[usize] {
        &self.out_degree
    }
}

/// Reads an edge list. `#` starts a comment line; blank lines are skipped.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<AdjacencyStructure> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "expected two fields \"src dst\"".into(),
            })?;
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid node id {tok:?}"),
            })
        };
        let src = parse(fields.next())?;
        let dst = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected two fields \"src dst\"".into(),
            });
        }
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((src, dst));
    }
    let n = max_id.ok_or(Error::EmptyInput)? + 1;
    AdjacencyStructure::new(n, edges)
}

/// Sparse column-stochastic operator `P = A^T D^{-1}` with uniform dangling repair.
///
/// Both the column layout (out-links per source) and the row layout (in-links
/// per destination) are stored; `apply` gathers along rows so every output
/// entry is a fixed-order sum regardless of threading.
#[derive(Clone, Debug)]
pub struct TransitionOperator {
    n: usize,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    inv_deg: Vec<f64>,
    dangling: Vec<usize>,
}

/// Builds `P` from an adjacency structure.
pub fn build_transition(adj: &AdjacencyStructure) -> Result<TransitionOperator> {
    let n = adj.n;
    if n == 0 {
        return Err(Error::Domain("graph has no nodes".into()));
    }
    let nnz = adj.edges.len();

    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let mut acc = 0;
    for &d in &adj.out_degree {
        acc += d;
        col_ptr.push(acc);
    }
    let col_idx: Vec<usize> = adj.edges.iter().map(|&(_, d)| d).collect();

    let mut in_degree = vec![0usize; n];
    for &(_, d) in &adj.edges {
        in_degree[d] += 1;
    }
    let mut row_ptr = vec![0usize; n + 1];
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i] + in_degree[i];
    }
    let mut fill = row_ptr[..n].to_vec();
    let mut row_idx = vec![0usize; nnz];
    // edges are sorted by src, so each row's sources come out ascending
    for &(s, d) in &adj.edges {
        row_idx[fill[d]] = s;
        fill[d] += 1;
    }

    let inv_deg = adj
        .out_degree
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / d as f64 })
        .collect();
    let dangling = (0..n).filter(|&i| adj.out_degree[i] == 0).collect();

    Ok(TransitionOperator {
        n,
        col_ptr,
        col_idx,
        row_ptr,
        row_idx,
        inv_deg,
        dangling,
    })
}

impl TransitionOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored link entries (dangling columns excluded).
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Nodes whose original out-degree was zero, ascending.
    pub fn dangling(&self) -> &[usize] {
        &self.dangling
    }

    pub fn is_dangling(&self, j: usize) -> bool {
        self.inv_deg[j] == 0.0
    }

    /// Nonzeros of column `j` as `(row, value)` pairs, ascending by row.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if self.is_dangling(j) {
            let u = 1.0 / self.n as f64;
            (0..self.n).map(|i| (i, u)).collect()
        } else {
            self.col_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
                .iter()
                .map(|&i| (i, self.inv_deg[j]))
                .collect()
        }
    }

    /// Out-link targets of a non-dangling node (empty for dangling nodes).
    pub fn out_links(&self, j: usize) -> &[usize] {
        &self.col_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    /// Dense entry `P[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.is_dangling(j) {
            1.0 / self.n as f64
        } else if self.out_links(j).binary_search(&i).is_ok() {
            self.inv_deg[j]
        } else {
            0.0
        }
    }

    /// Returns `P x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y, Execution::default())?;
        Ok(y)
    }

    /// Writes `P x` into `y`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64], exec: Execution) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        let dangling_share = if self.dangling.is_empty() {
            0.0
        } else {
            let d = &self.dangling;
            par::chunked_sum(d.len(), exec, |r| d[r].iter().map(|&j| x[j]).sum()) / self.n as f64
        };
        par::for_each_chunk_mut(y, exec, |off, out| {
            for (k, yi) in out.iter_mut().enumerate() {
                let i = off + k;
                let mut acc = 0.0;
                for &j in &self.row_idx[self.row_ptr[i]..self.row_ptr[i + 1]] {
                    acc += x[j] * self.inv_deg[j];
                }
                *yi = acc + dangling_share;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(s: &str) -> Result<AdjacencyStructure> {
        load_edge_list(s.as_bytes())
    }

    pub(crate) const FOUR_NODE: &str = "0 2\n1 2\n2 1\n2 3\n3 0\n3 1\n";

    #[test]
    fn two_cycle() {
        let a = load("0 1\n1 0\n").unwrap();
        assert_eq!(a.n(), 2);
        assert_eq!(a.edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn duplicates_collapse_and_implicit_nodes() {
        let a = load("0 2\n0 2\n").unwrap();
        assert_eq!(a.n(), 3);
        assert_eq!(a.edges(), &[(0, 2)]);
        assert_eq!(a.out_degree(), &[1, 0, 0]);
    }

    #[test]
    fn comments_crlf_and_order_independence() {
        let a = load("# header\r\n3 1\r\n0 2\r\n\r\n2 1\n").unwrap();
        let b = load("2 1\n0 2\n3 1\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn four_node_adjacency() {
        let a = load(FOUR_NODE).unwrap();
        let dense = [[0, 0, 1, 0], [0, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0]];
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(a.edges().contains(&(i, j)), v == 1, "A[{i}][{j}]");
            }
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        match load("0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match load("0 1\n\n2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load("0 1 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load("-1 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load(""), Err(Error::EmptyInput)));
        assert!(matches!(load("# only\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn four_node_transition_matrix() {
        let p = build_transition(&load(FOUR_NODE).unwrap()).unwrap();
        let expect = [
            [0.0, 0.0, 0.0, 0.5],
            [0.0, 0.0, 0.5, 0.5],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(p.entry(i, j), v);
            }
        }
        assert!(p.dangling().is_empty());
    }

    #[test]
    fn dangling_repair() {
        let single = build_transition(&AdjacencyStructure::new(1, vec![]).unwrap()).unwrap();
        assert_eq!(single.column(0), vec![(0, 1.0)]);
        assert_eq!(single.dangling(), &[0]);

        let p = build_transition(&load("0 1\n").unwrap()).unwrap();
        assert_eq!(p.column(0), vec![(1, 1.0)]);
        assert_eq!(p.column(1), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(p.apply(&[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn empty_graph_rejected() {
        let a = AdjacencyStructure::new(0, vec![]).unwrap();
        assert!(build_transition(&a).is_err());
        assert!(AdjacencyStructure::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn apply_examples() {
        let p = build_transition(&load(FOUR_NODE).unwrap()).unwrap();
        assert_eq!(p.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.apply(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        let y = p.apply(&[0.25; 4]).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(p.apply(&[1.0]), Err(Error::Dimension { expected: 4, got: 1 })));
    }

    fn random_adj() -> impl Strategy<Value = AdjacencyStructure> {
        (1usize..40).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..(4 * n))
                .prop_map(move |e| AdjacencyStructure::new(n, e).unwrap())
        })
    }

    proptest! {
        #[test]
        fn columns_sum_to_one(adj in random_adj()) {
            let p = build_transition(&adj).unwrap();
            for j in 0..p.n() {
                let col = p.column(j);
                let s: f64 = col.iter().map(|&(_, v)| v).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                prop_assert!(col.iter().all(|&(_, v)| (0.0..=1.0).contains(&v)));
                if !p.is_dangling(j) {
                    prop_assert_eq!(col.len(), adj.out_degree()[j]);
                }
            }
        }

        #[test]
        fn apply_preserves_mass(adj in random_adj(), seed in 0u64..1000) {
            let p = build_transition(&adj).unwrap();
            let n = p.n();
            let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64).collect();
            let y = p.apply(&x).unwrap();
            let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
            prop_assert!((sx - sy).abs() <= 1e-12 * n as f64 * sx.max(1.0));
        }

        #[test]
        fn nonzeros_round_trip_edges(adj in random_adj()) {
            let p = build_transition(&adj).unwrap();
            let mut rebuilt = Vec::new();
            for j in 0..p.n() {
                if !p.is_dangling(j) {
                    rebuilt.extend(p.column(j).into_iter().map(|(i, _)| (j, i)));
                }
            }
            prop_assert_eq!(rebuilt.as_slice(), adj.edges());
        }
    }

    #[test]
    fn parallel_apply_matches_sequential() {
        let n = 50_000;
        let edges: Vec<_> = (0..n)
            .flat_map(|i| [(i, (i * 31 + 7) % n), (i, (i * 17 + 3) % n)])
            .filter(|e| e.0 % 13 != 0)
            .collect();
        let p = build_transition(&AdjacencyStructure::new(n, edges).unwrap()).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        p.apply_into(&x, &mut a, Execution::Sequential).unwrap();
        p.apply_into(&x, &mut b, Execution::Parallel).unwrap();
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}
