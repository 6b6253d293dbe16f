//! The path-sum kernel K_f on G x G, graph convolution and semigroups.
//!
//! For x = (e, xi) and y = (e', xi'),
//!
//! K_f(x, y) = c(e)^-1 [ [e = e'] f(xi' - xi)
//!           + sum over paths P from +-e to +-e' with m >= 1 steps of T_P f(|P| - pos(x) + pos(y)) ]
//!
//! where pos measures the distance from the initial vertex of the oriented edge.
//! Path contributions do not depend on x, so for each starting orientation the
//! paths are aggregated by (terminal edge, |P|) level by level.

mod audit;

pub use audit::{
    boundary_condition_audit, ultracontractivity_probe, BoundaryAudit, UltraReport, UltraRow, VertexAudit,
};

use crate::edgefn::EdgeFunction;
use crate::error::{invalid, Error, Result};
use crate::graph::transfer_unchecked;
use crate::graph::{DirectedEdge, GraphPoint, MetricGraph};
use crate::profile::{KernelProfile, ProfileKind};
use crate::quad::simpson_weights;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// Step budget for the path expansion.
pub const MAX_STEPS: usize = 400;
const MAX_STATES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Certify {
    /// sup over y of the dropped part of K(x, y)
    Pointwise,
    /// sup over x of the integral of |dropped part| against dc(y)
    Integrated,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    terminal: DirectedEdge,
    length: f64,
    weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct State {
    len: f64,
    w: f64,
    a: f64,
}

/// All m >= 1 path contributions from one oriented copy of an edge.
#[derive(Debug, Clone)]
pub(crate) struct Expansion {
    by_edge: Vec<Vec<Term>>,
    pub steps: usize,
    /// certified bound for everything left out, truncation plus pruning
    pub bound: f64,
}

fn length_key(l: f64) -> i64 {
    (l * 1e9).round() as i64
}

/// sum_{j >= j0} 3^j w(x + j l), stopped once terms are negligible and shrinking.
fn geometric_tail(w: impl Fn(f64) -> f64, x: f64, ell: f64, j0: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for j in j0..j0 + 2000 {
        let term = 3f64.powi(j as i32) * w((x + j as f64 * ell).max(0.0));
        sum += term;
        if term <= 1e-17 * sum.max(1e-300) && term <= prev {
            break;
        }
        if term == 0.0 && j > j0 {
            break;
        }
        prev = term;
    }
    sum
}

impl Expansion {
    pub(crate) fn build(
        g: &MetricGraph,
        f: &KernelProfile,
        start: DirectedEdge,
        eps: f64,
        mode: Certify,
        max_steps: usize,
    ) -> Result<Expansion> {
        if !(eps > 0.0) {
            return invalid("truncation tolerance must be positive");
        }
        let ce = g.conductivity(start.edge);
        let le = g.length(start.edge);
        let ell = g.min_length();
        let weight_fn = |r: f64| match mode {
            Certify::Pointwise => 2.0 * f.envelope(r),
            Certify::Integrated => f.tail(r),
        };
        let mut memo_own: HashMap<i64, f64> = HashMap::new();
        let mut memo_desc: HashMap<i64, f64> = HashMap::new();

        let mut by_edge = vec![Vec::new(); g.edge_count()];
        let mut level: BTreeMap<(usize, i64), State> = BTreeMap::new();
        level.insert((start.index(), 0), State { len: 0.0, w: 1.0, a: 1.0 });
        let mut pruned = 0.0;
        let mut remainder = f64::INFINITY;

        for m in 1..=max_steps {
            let mut next: BTreeMap<(usize, i64), State> = BTreeMap::new();
            for (&(di, _), st) in &level {
                let d = DirectedEdge::from_index(di);
                let l = st.len + g.length(d.edge);
                for &d2 in g.successors(d) {
                    let t = transfer_unchecked(g, d, d2);
                    if t == 0.0 {
                        continue;
                    }
                    let s = next
                        .entry((d2.index(), length_key(l)))
                        .or_insert(State { len: l, w: 0.0, a: 0.0 });
                    s.w += st.w * t;
                    s.a += st.a * t.abs();
                }
            }

            let measure = |di: usize| match mode {
                Certify::Pointwise => 1.0,
                Certify::Integrated => g.conductivity(DirectedEdge::from_index(di).edge),
            };
            // own (j = 0) and descendant (j >= 1) bounds per unit mass, by length
            let mut own = |l: f64| {
                *memo_own
                    .entry(length_key(l))
                    .or_insert_with(|| weight_fn((l - le).max(0.0)))
            };
            let mut desc = |l: f64| {
                *memo_desc
                    .entry(length_key(l))
                    .or_insert_with(|| geometric_tail(weight_fn, l - le, ell, 1))
            };

            // prune the smallest states within this level's budget
            let level_budget = 0.5 * eps * 0.5f64.powi(m as i32);
            if next.len() > 1 {
                let mut scored: Vec<((usize, i64), f64)> = next
                    .iter()
                    .map(|(k, s)| (*k, s.a * measure(k.0) * (own(s.len) + desc(s.len)) / ce))
                    .collect();
                scored.sort_by(|a, b| a.1.total_cmp(&b.1));
                let mut spent = 0.0;
                for (k, b) in scored {
                    if spent + b > level_budget {
                        break;
                    }
                    spent += b;
                    next.remove(&k);
                }
                pruned += spent;
            }

            for (&(di, _), s) in &next {
                if s.w != 0.0 {
                    let d = DirectedEdge::from_index(di);
                    by_edge[d.edge].push(Term { terminal: d, length: s.len, weight: s.w });
                }
            }

            // bound for all paths longer than m
            let per_state: f64 = next.iter().map(|(k, s)| s.a * measure(k.0) * desc(s.len)).sum::<f64>() / ce;
            remainder = per_state;
            if mode == Certify::Pointwise {
                let mut mass: HashMap<usize, f64> = HashMap::new();
                for (k, s) in &next {
                    *mass.entry(k.0).or_default() += s.a;
                }
                let a_max = mass.values().copied().fold(0.0, f64::max);
                let uniform = a_max * geometric_tail(weight_fn, (m as f64 - 1.0) * ell, ell, 1) / ce;
                remainder = remainder.min(uniform);
            }
            if remainder <= 0.5 * eps || next.is_empty() {
                return Ok(Expansion { by_edge, steps: m, bound: remainder + pruned });
            }
            if next.len() > MAX_STATES {
                return Err(Error::TruncationBudget { requested: eps, achieved: remainder + pruned, steps: m });
            }
            level = next;
        }
        Err(Error::TruncationBudget { requested: eps, achieved: remainder + pruned, steps: max_steps })
    }

    /// sum over stored paths ending on `edge` of T_P f(|P| - x_pos + pos(y)).
    #[inline]
    fn eval(&self, f: &mut impl FnMut(f64) -> f64, x_pos: f64, edge: usize, xi: f64, len: f64) -> f64 {
        self.by_edge[edge]
            .iter()
            .map(|t| t.weight * f(t.length - x_pos + t.terminal.position(xi, len)))
            .sum()
    }

    pub(crate) fn term_count(&self) -> usize {
        self.by_edge.iter().map(Vec::len).sum()
    }
}

/// Both orientations of a source edge; evaluates y -> K(x, y) for x on that edge.
pub(crate) struct SourceKernel<'a> {
    g: &'a MetricGraph,
    edge: usize,
    plus: Expansion,
    minus: Expansion,
}

impl<'a> SourceKernel<'a> {
    pub(crate) fn new(g: &'a MetricGraph, f: &KernelProfile, edge: usize, eps: f64, mode: Certify) -> Result<Self> {
        g.check_edge(edge)?;
        let plus = Expansion::build(g, f, DirectedEdge::forward(edge), 0.5 * eps, mode, MAX_STEPS)?;
        let minus = Expansion::build(g, f, DirectedEdge::backward(edge), 0.5 * eps, mode, MAX_STEPS)?;
        Ok(SourceKernel { g, edge, plus, minus })
    }

    pub(crate) fn bound(&self) -> f64 {
        self.plus.bound + self.minus.bound
    }

    pub(crate) fn steps(&self) -> usize {
        self.plus.steps.max(self.minus.steps)
    }

    pub(crate) fn eval(&self, f: &mut impl FnMut(f64) -> f64, xi: f64, y_edge: usize, eta: f64) -> f64 {
        let le = self.g.length(self.edge);
        let ly = self.g.length(y_edge);
        let mut v = self.plus.eval(f, xi, y_edge, eta, ly) + self.minus.eval(f, le - xi, y_edge, eta, ly);
        if y_edge == self.edge {
            v += f(eta - xi);
        }
        v / self.g.conductivity(self.edge)
    }

    #[allow(dead_code)]
    pub(crate) fn term_count(&self) -> usize {
        self.plus.term_count() + self.minus.term_count()
    }
}

/// Memoized profile evaluation; worthwhile when evaluations are expensive and
/// arguments repeat (polyharmonic profiles on regular grids).
pub(crate) struct ProfileEval<'a> {
    f: &'a KernelProfile,
    memo: Option<HashMap<i64, f64>>,
}

impl<'a> ProfileEval<'a> {
    pub(crate) fn new(f: &'a KernelProfile) -> Self {
        let memo = matches!(f.kind(), ProfileKind::Polyharmonic(_)).then(HashMap::new);
        ProfileEval { f, memo }
    }

    #[inline]
    pub(crate) fn call(&mut self, x: f64) -> f64 {
        match &mut self.memo {
            None => self.f.eval(x),
            Some(m) => {
                let key = (x.abs() * 1e11).round() as i64;
                let f = self.f;
                *m.entry(key).or_insert_with(|| f.eval(x))
            }
        }
    }
}

/// Target set for a kernel evaluation.
#[derive(Debug, Clone)]
pub enum Targets {
    Points(Vec<GraphPoint>),
    /// every node of the default-layout grid with this many samples per unit length
    Grid { per_unit: f64 },
}

#[derive(Debug, Clone)]
pub struct GraphKernelRequest {
    pub x: GraphPoint,
    pub targets: Targets,
    pub profile: KernelProfile,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelValues {
    #[serde(skip)]
    pub points: Vec<GraphPoint>,
    pub values: Vec<f64>,
    /// certified bound on |K_truncated - K| at every target
    pub truncation_bound: f64,
    pub steps: usize,
}

/// K_f(x, y) for every target y, with a certified truncation remainder <= eps.
pub fn kernel_eval(g: &MetricGraph, req: &GraphKernelRequest) -> Result<KernelValues> {
    if !(req.eps > 0.0) {
        return invalid("truncation tolerance must be positive");
    }
    let points = match &req.targets {
        Targets::Points(p) => p.clone(),
        Targets::Grid { per_unit } => {
            let grid = EdgeFunction::<f64>::from_fn(g, *per_unit, |_, _| 0.0);
            let mut pts = Vec::new();
            for e in 0..g.edge_count() {
                for k in 0..=grid.intervals(e) {
                    pts.push(GraphPoint::new(g, e, grid.node(e, k))?);
                }
            }
            pts
        }
    };
    let src = SourceKernel::new(g, &req.profile, req.x.edge, req.eps, Certify::Pointwise)?;
    let mut f = ProfileEval::new(&req.profile);
    let values = points.iter().map(|y| src.eval(&mut |s| f.call(s), req.x.xi, y.edge, y.xi)).collect();
    Ok(KernelValues { points, values, truncation_bound: src.bound(), steps: src.steps() })
}

/// y -> K_f(x, y) sampled on the grid layout of `layout`.
pub fn kernel_row(g: &MetricGraph, f: &KernelProfile, x: &GraphPoint, eps: f64, layout: &EdgeFunction) -> Result<(EdgeFunction, f64)> {
    let src = SourceKernel::new(g, f, x.edge, eps, Certify::Pointwise)?;
    let mut fe = ProfileEval::new(f);
    let row = layout.same_grid(|e, eta| src.eval(&mut |s| fe.call(s), x.xi, e, eta));
    Ok((row, src.bound()))
}

#[derive(Debug, Clone)]
pub struct Convolution {
    pub values: EdgeFunction,
    /// bound on the sup-norm error from truncating the path sum
    pub truncation_bound: f64,
    /// Richardson estimate of the Simpson error, reported separately
    pub quadrature_tol: f64,
    pub steps: usize,
    /// largest disagreement between endpoint samples at a vertex
    pub continuity_spread: f64,
}

/// (f *_G u)(x) = int K_f(x, y) u(y) dc(y) at every grid node of u.
pub fn convolve(g: &MetricGraph, f: &KernelProfile, u: &EdgeFunction, eps: f64) -> Result<Convolution> {
    if !(eps > 0.0) {
        return invalid("truncation tolerance must be positive");
    }
    if u.edge_count() != g.edge_count() {
        return invalid("edge function does not match the graph");
    }
    let unorm = u.sup_norm();
    let eps_k = if unorm > 0.0 { eps / unorm } else { eps };

    // Simpson weights, fine and on every other node
    let weights: Vec<(Vec<f64>, Vec<f64>)> = (0..g.edge_count())
        .map(|e| {
            let n = u.intervals(e);
            let h = u.spacing(e);
            let fine: Vec<f64> = simpson_weights(n, h).iter().map(|w| w * g.conductivity(e)).collect();
            let mut coarse = vec![0.0; n + 1];
            if n % 4 == 0 {
                for (k, w) in simpson_weights(n / 2, 2.0 * h).iter().enumerate() {
                    coarse[2 * k] = w * g.conductivity(e);
                }
            }
            (fine, coarse)
        })
        .collect();

    let per_edge: Vec<Result<(Vec<f64>, f64, f64, usize)>> = (0..g.edge_count())
        .into_par_iter()
        .map(|e| {
            let src = SourceKernel::new(g, f, e, eps_k, Certify::Integrated)?;
            let mut fe = ProfileEval::new(f);
            let mut out = Vec::with_capacity(u.intervals(e) + 1);
            let mut quad: f64 = 0.0;
            for k in 0..=u.intervals(e) {
                let xi = u.node(e, k);
                let (mut fine, mut coarse) = (0.0, 0.0);
                for e2 in 0..g.edge_count() {
                    let (wf, wc) = &weights[e2];
                    let us = u.samples(e2);
                    for j in 0..us.len() {
                        let kv = src.eval(&mut |s| fe.call(s), xi, e2, u.node(e2, j)) * us[j];
                        fine += wf[j] * kv;
                        coarse += wc[j] * kv;
                    }
                }
                quad = quad.max((fine - coarse).abs() / 15.0);
                out.push(fine);
            }
            Ok((out, src.bound() * unorm, quad, src.steps()))
        })
        .collect();

    let mut samples = Vec::with_capacity(g.edge_count());
    let (mut trunc, mut quad, mut steps) = (0.0f64, 0.0f64, 0usize);
    for r in per_edge {
        let (s, b, q, m) = r?;
        samples.push(s);
        trunc = trunc.max(b);
        quad = quad.max(q);
        steps = steps.max(m);
    }
    let values = EdgeFunction::from_samples(g, samples);
    let continuity_spread = values.vertex_spread(g);
    Ok(Convolution { values, truncation_bound: trunc, quadrature_tol: quad, steps, continuity_spread })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SemigroupKind {
    Heat,
    Polyharmonic(u32),
}

impl SemigroupKind {
    pub fn profile(self, t: f64) -> Result<KernelProfile> {
        match self {
            SemigroupKind::Heat => KernelProfile::heat(t),
            SemigroupKind::Polyharmonic(m) => KernelProfile::polyharmonic(m, t),
        }
    }

    /// Parses `heat` or `poly:m`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(SemigroupKind::Heat),
            _ => match s.strip_prefix("poly:").map(str::parse::<u32>) {
                Some(Ok(m)) if m >= 1 => Ok(SemigroupKind::Polyharmonic(m)),
                _ => invalid(format!("unknown kernel kind {s:?}; expected heat or poly:m")),
            },
        }
    }
}

/// e^{shift t} (k_t *_G u0).
pub fn semigroup_apply(
    g: &MetricGraph,
    kind: SemigroupKind,
    t: f64,
    shift: f64,
    u0: &EdgeFunction,
    eps: f64,
) -> Result<Convolution> {
    let f = kind.profile(t)?;
    let scale = (shift * t).exp();
    let mut c = convolve(g, &f, u0, eps / scale)?;
    c.values = c.values.map(|v| v * scale);
    c.truncation_bound *= scale;
    c.quadrature_tol *= scale;
    c.continuity_spread *= scale;
    Ok(c)
}
