use super::{DirectedEdge, MetricGraph, Path};
use crate::error::Result;
use serde::Serialize;
use std::collections::VecDeque;

/// T_{e,e'} = 2c(e)/c(t(e)) - [e' = -e] when t(e) = i(e'), else 0.
pub fn transfer_coefficient(g: &MetricGraph, e: DirectedEdge, e2: DirectedEdge) -> Result<f64> {
    g.check_edge(e.edge)?;
    g.check_edge(e2.edge)?;
    Ok(transfer_unchecked(g, e, e2))
}

#[inline]
pub(crate) fn transfer_unchecked(g: &MetricGraph, e: DirectedEdge, e2: DirectedEdge) -> f64 {
    let v = g.terminal(e);
    if v != g.initial(e2) {
        return 0.0;
    }
    let t = 2.0 * g.conductivity(e.edge) / g.vertex_conductivity(v);
    if e2 == e.reverse() {
        t - 1.0
    } else {
        t
    }
}

type Tail<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

/// Breadth-first stream of paths from a directed edge, in nondecreasing step count.
///
/// With a positive prune bound a path is yielded only if |T_P| tail(|P|)
/// exceeds the bound, and its subtree is dropped once |T_P| 3^rem tail(|P|)
/// falls below it. A zero bound yields everything, zero-weight paths included.
pub struct PathEnumerator<'a> {
    g: &'a MetricGraph,
    max_steps: usize,
    prune_bound: f64,
    tail: Tail<'a>,
    queue: VecDeque<Path>,
}

impl<'a> PathEnumerator<'a> {
    pub fn new(g: &'a MetricGraph, from: DirectedEdge, max_steps: usize) -> Result<Self> {
        g.check_edge(from.edge)?;
        Ok(PathEnumerator {
            g,
            max_steps,
            prune_bound: 0.0,
            tail: Box::new(|_| 1.0),
            queue: VecDeque::from([Path::empty(from)]),
        })
    }

    pub fn prune(mut self, bound: f64, tail: impl Fn(f64) -> f64 + 'a) -> Self {
        self.prune_bound = bound.max(0.0);
        self.tail = Box::new(tail);
        self
    }

    fn keep(&self, p: &Path) -> bool {
        self.prune_bound == 0.0 || p.transfer.abs() * (self.tail)(p.length) > self.prune_bound
    }

    fn expand(&self, p: &Path) -> bool {
        if p.steps() >= self.max_steps {
            return false;
        }
        if self.prune_bound == 0.0 {
            return true;
        }
        let rem = (self.max_steps - p.steps()) as i32;
        p.transfer.abs() * 3f64.powi(rem) * (self.tail)(p.length) >= self.prune_bound
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = Path;

    fn next(&mut self) -> Option<Path> {
        while let Some(p) = self.queue.pop_front() {
            if self.expand(&p) {
                let last = p.last();
                let len = p.length + self.g.length(last.edge);
                for &d in self.g.successors(last) {
                    let mut edges = p.edges.clone();
                    edges.push(d);
                    self.queue.push_back(Path {
                        edges,
                        length: len,
                        transfer: p.transfer * transfer_unchecked(self.g, last, d),
                    });
                }
            }
            if self.keep(&p) {
                return Some(p);
            }
        }
        None
    }
}

/// Number of m-step paths from `e`, by powers of the directed line-graph adjacency.
pub fn path_count_check(g: &MetricGraph, e: DirectedEdge, m: usize) -> Result<u128> {
    g.check_edge(e.edge)?;
    let n = 2 * g.edge_count();
    let mut counts = vec![0u128; n];
    counts[e.index()] = 1;
    for _ in 0..m {
        let mut next = vec![0u128; n];
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &d in g.successors(DirectedEdge::from_index(i)) {
                next[d.index()] += c;
            }
        }
        counts = next;
    }
    Ok(counts.iter().sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferAudit {
    /// max over e' of |sum_e T_{e,e'} - 1|
    pub column_sum_violation: f64,
    /// max over e' of sum_e |T_{e,e'}|
    pub column_abs_max: f64,
    /// max over e of |sum_e' c(e') T_{e,e'} - c(e)| / c(e)
    pub weighted_row_violation: f64,
    /// max over e of sum_e' c(e') |T_{e,e'}| / c(e)
    pub weighted_row_abs_max: f64,
    /// per m = 1..: max over (e, e') of sum over m-step paths |T_P|, divided by 3^m
    pub pair_path_ratio: Vec<f64>,
    /// per m: max over e of c(e)^-1 sum_e' sum_P c(e') |T_P|, divided by 3^m
    pub weighted_path_ratio: Vec<f64>,
    /// per m: max over e of the unweighted total sum_e' sum_P |T_P|, divided by 3^m.
    /// Informational only: it can exceed 1 when conductivities vary.
    pub unweighted_path_ratio: Vec<f64>,
}

impl TransferAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.column_sum_violation <= tol
            && self.weighted_row_violation <= tol
            && self.column_abs_max <= 3.0 * (1.0 + tol)
            && self.weighted_row_abs_max <= 3.0 * (1.0 + tol)
            && self.pair_path_ratio.iter().all(|&r| r <= 1.0 + tol)
            && self.weighted_path_ratio.iter().all(|&r| r <= 1.0 + tol)
    }
}

pub fn transfer_identities_audit(g: &MetricGraph, m_max: usize) -> TransferAudit {
    let n = 2 * g.edge_count();
    let dirs: Vec<DirectedEdge> = (0..n).map(DirectedEdge::from_index).collect();
    let c = |d: DirectedEdge| g.conductivity(d.edge);

    let mut col_sum = vec![0.0; n];
    let mut col_abs = vec![0.0; n];
    let mut row_sum = vec![0.0; n];
    let mut row_abs = vec![0.0; n];
    // |T| as sparse rows
    let mut abs_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &d in &dirs {
        for &d2 in g.successors(d) {
            let t = transfer_unchecked(g, d, d2);
            col_sum[d2.index()] += t;
            col_abs[d2.index()] += t.abs();
            row_sum[d.index()] += c(d2) * t;
            row_abs[d.index()] += c(d2) * t.abs();
            abs_rows[d.index()].push((d2.index(), t.abs()));
        }
    }
    let column_sum_violation = col_sum.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let column_abs_max = col_abs.iter().copied().fold(0.0, f64::max);
    let weighted_row_violation = dirs
        .iter()
        .map(|&d| (row_sum[d.index()] - c(d)).abs() / c(d))
        .fold(0.0, f64::max);
    let weighted_row_abs_max = dirs.iter().map(|&d| row_abs[d.index()] / c(d)).fold(0.0, f64::max);

    let mut pair_path_ratio = Vec::new();
    let mut weighted_path_ratio = Vec::new();
    let mut unweighted_path_ratio = Vec::new();
    // rows of |T|^m, one per starting edge
    let mut power: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    for m in 1..=m_max {
        let scale = 3f64.powi(m as i32);
        let mut pair = 0.0f64;
        let mut weighted = 0.0f64;
        let mut unweighted = 0.0f64;
        for (start, row) in power.iter_mut().enumerate() {
            let mut next = vec![0.0; n];
            for (i, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    for &(j, t) in &abs_rows[i] {
                        next[j] += a * t;
                    }
                }
            }
            *row = next;
            pair = pair.max(row.iter().copied().fold(0.0, f64::max));
            let w: f64 = row.iter().enumerate().map(|(j, a)| c(dirs[j]) * a).sum();
            weighted = weighted.max(w / c(dirs[start]));
            unweighted = unweighted.max(row.iter().sum());
        }
        pair_path_ratio.push(pair / scale);
        weighted_path_ratio.push(weighted / scale);
        unweighted_path_ratio.push(unweighted / scale);
    }

    TransferAudit {
        column_sum_violation,
        column_abs_max,
        weighted_row_violation,
        weighted_row_abs_max,
        pair_path_ratio,
        weighted_path_ratio,
        unweighted_path_ratio,
    }
}
