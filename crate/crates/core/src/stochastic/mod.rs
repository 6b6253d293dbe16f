//! Walsh Brownian motion on metric graphs: inside an edge an ordinary Brownian
//! motion, at a vertex v it leaves along e with probability c(e)/c(v).
//!
//! Each time step draws one Gaussian increment. Increments that run past a
//! vertex are continued along a randomly chosen edge; increments that stay
//! inside the edge may still have touched a vertex, which is resolved with the
//! Brownian bridge crossing probability exp(-2ab/sigma^2).

mod estimates;

pub use estimates::{kernel_estimate_audit, schrodinger_bound_audit, EnvelopeFit, KernelEstimateReport, SchrodingerReport};

use crate::error::{invalid, Error, Result};
use crate::graph::{DirectedEdge, GraphPoint, LatticeEmbedding, MetricGraph};
use crate::stats::{compensated_sum, Estimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Generator normalisation: Delta has variance 2 per unit time, Half has 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Delta,
    Half,
}

impl Scale {
    pub fn variance(self) -> f64 {
        match self {
            Scale::Delta => 2.0,
            Scale::Half => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Scale::Delta),
            "half" => Ok(Scale::Half),
            _ => invalid(format!("unknown scale {s:?}; expected delta or half")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkConfig {
    pub t: f64,
    pub dt: f64,
    pub scale: Scale,
    pub seed: u64,
    pub n: usize,
}

impl WalkConfig {
    pub fn new(t: f64, dt: f64, scale: Scale, seed: u64, n: usize) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return invalid("time must be finite and non-negative");
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid("time step must be positive");
        }
        if n == 0 {
            return invalid("need at least one trajectory");
        }
        Ok(WalkConfig { t, dt, scale, seed, n })
    }

    /// Number of steps; the step is shortened so they tile [0, t] exactly.
    pub fn steps(&self) -> usize {
        (self.t / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn step(&self) -> f64 {
        match self.steps() {
            0 => 0.0,
            k => self.t / k as f64,
        }
    }

    fn sigma(&self) -> f64 {
        (self.scale.variance() * self.step()).sqrt()
    }
}

/// Independent stream for trajectory `index`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Walker<'a> {
    g: &'a MetricGraph,
    edge: usize,
    xi: f64,
}

impl<'a> Walker<'a> {
    fn new(g: &'a MetricGraph, p: &GraphPoint) -> Self {
        Walker { g, edge: p.edge, xi: p.xi }
    }

    fn choose(&self, rng: &mut ChaCha8Rng, v: usize) -> DirectedEdge {
        let out = self.g.outgoing(v);
        if out.len() == 1 {
            return out[0];
        }
        let mut u = rng.gen::<f64>() * self.g.vertex_conductivity(v);
        for d in out {
            u -= self.g.conductivity(d.edge);
            if u < 0.0 {
                return *d;
            }
        }
        *out.last().unwrap()
    }

    /// Leaves vertex v and covers distance r, choosing a fresh edge at every
    /// vertex reached. `mv(edge, signed displacement)` sees every leg.
    fn travel(&mut self, rng: &mut ChaCha8Rng, mut v: usize, mut r: f64, mv: &mut impl FnMut(usize, f64)) {
        loop {
            let d = self.choose(rng, v);
            let len = self.g.length(d.edge);
            let sign = if d.reversed { -1.0 } else { 1.0 };
            if r <= len {
                self.edge = d.edge;
                self.xi = if d.reversed { len - r } else { r };
                mv(d.edge, sign * r);
                return;
            }
            mv(d.edge, sign * len);
            r -= len;
            v = self.g.terminal(d);
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, sigma: f64, mv: &mut impl FnMut(usize, f64)) {
        let dx = sigma * rng.sample::<f64, _>(StandardNormal);
        let e = self.g.edge(self.edge);
        let (len, xi) = (e.length, self.xi);
        let pos = xi + dx;
        if pos < 0.0 {
            mv(self.edge, -xi);
            self.travel(rng, e.source, -pos, mv);
        } else if pos > len {
            mv(self.edge, len - xi);
            self.travel(rng, e.target, pos - len, mv);
        } else {
            let s2 = sigma * sigma;
            let p0 = (-2.0 * xi * pos / s2).exp();
            let p1 = (-2.0 * (len - xi) * (len - pos) / s2).exp();
            let u: f64 = rng.gen();
            if u < p0 {
                mv(self.edge, -xi);
                self.travel(rng, e.source, pos, mv);
            } else if u < p0 + p1 {
                mv(self.edge, len - xi);
                self.travel(rng, e.target, len - pos, mv);
            } else {
                mv(self.edge, dx);
                self.xi = pos;
            }
        }
    }

    fn point(&self) -> GraphPoint {
        let xi = self.xi.clamp(0.0, self.g.length(self.edge));
        GraphPoint::new(self.g, self.edge, xi).expect("walker stays on its edge")
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<GraphPoint>,
    /// trapezoid approximation of int_0^t V(X_s) ds (0 without a potential)
    pub potential_integral: f64,
}

impl Trajectory {
    pub fn end(&self) -> &GraphPoint {
        self.points.last().unwrap()
    }
}

fn check_start(g: &MetricGraph, start: &GraphPoint) -> Result<()> {
    g.check_edge(start.edge)?;
    if !(start.xi >= 0.0 && start.xi <= g.length(start.edge)) {
        return invalid("start point is not on the graph");
    }
    Ok(())
}

/// Runs trajectory `index`, calling `visit(k, point)` at every time node.
fn run(g: &MetricGraph, start: &GraphPoint, cfg: &WalkConfig, index: usize, mut visit: impl FnMut(usize, &GraphPoint), mv: &mut impl FnMut(usize, f64)) {
    let mut rng = trajectory_rng(cfg.seed, index as u64);
    let mut w = Walker::new(g, start);
    let sigma = cfg.sigma();
    visit(0, start);
    for k in 1..=cfg.steps() {
        w.step(&mut rng, sigma, mv);
        visit(k, &w.point());
    }
}

/// One recorded trajectory; V enters only through the potential integral.
pub fn simulate_one(
    g: &MetricGraph,
    start: &GraphPoint,
    cfg: &WalkConfig,
    index: usize,
    v: impl Fn(usize, f64) -> f64,
) -> Trajectory {
    let dt = cfg.step();
    let n = cfg.steps();
    let mut points = Vec::with_capacity(n + 1);
    let mut vals = Vec::with_capacity(n + 1);
    run(g, start, cfg, index, |_, p| {
        vals.push(v(p.edge, p.xi));
        points.push(*p);
    }, &mut |_, _| {});
    let potential_integral = trapezoid(&vals, dt);
    Trajectory { times: (0..=n).map(|k| k as f64 * dt).collect(), points, potential_integral }
}

fn trapezoid(vals: &[f64], dt: f64) -> f64 {
    if vals.len() < 2 {
        return 0.0;
    }
    let inner = compensated_sum(vals[1..vals.len() - 1].iter().copied());
    dt * (inner + 0.5 * (vals[0] + vals[vals.len() - 1]))
}

/// The cfg.n trajectories, lazily and in index order.
pub fn simulate_bm<'a>(g: &'a MetricGraph, start: &'a GraphPoint, cfg: &'a WalkConfig) -> Result<impl Iterator<Item = Trajectory> + 'a> {
    check_start(g, start)?;
    Ok((0..cfg.n).map(move |i| simulate_one(g, start, cfg, i, |_, _| 0.0)))
}

/// Positions X_t of all trajectories, in index order.
pub fn endpoints(g: &MetricGraph, start: &GraphPoint, cfg: &WalkConfig) -> Result<Vec<GraphPoint>> {
    check_start(g, start)?;
    Ok((0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut last = *start;
            run(g, start, cfg, i, |_, p| last = *p, &mut |_, _| {});
            last
        })
        .collect())
}

/// E_x[exp(-int_0^t V(X_s) ds) f(X_t)] with its standard error.
pub fn feynman_kac<V, F>(g: &MetricGraph, start: &GraphPoint, v: V, f: F, cfg: &WalkConfig) -> Result<Estimate>
where
    V: Fn(usize, f64) -> f64 + Sync,
    F: Fn(usize, f64) -> f64 + Sync,
{
    check_start(g, start)?;
    let dt = cfg.step();
    let samples: Vec<f64> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut vals = Vec::with_capacity(cfg.steps() + 1);
            let mut last = *start;
            run(g, start, cfg, i, |_, p| {
                vals.push(v(p.edge, p.xi));
                last = *p;
            }, &mut |_, _| {});
            (-trapezoid(&vals, dt)).exp() * f(last.edge, last.xi)
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatteringReport {
    pub vertex: usize,
    /// edges incident to the vertex (a loop appears once)
    pub edges: Vec<usize>,
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub se: Vec<f64>,
    /// trajectories that left the incident edges
    pub escaped: usize,
    pub chi2: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Starts every trajectory at `vertex` and records the edge carrying X_t.
/// For t short against the incident edges the law is c(e)/c(v).
pub fn scattering_frequencies(g: &MetricGraph, vertex: usize, cfg: &WalkConfig) -> Result<ScatteringReport> {
    if vertex >= g.vertex_count() {
        return invalid(format!("vertex {vertex} out of range"));
    }
    let mut edges: Vec<usize> = g.outgoing(vertex).iter().map(|d| d.edge).collect();
    edges.sort_unstable();
    edges.dedup();
    let d0 = g.outgoing(vertex)[0];
    let start = GraphPoint::new(g, d0.edge, d0.position(0.0, g.length(d0.edge)))?;
    let ends = endpoints(g, &start, cfg)?;
    let mut counts = vec![0usize; edges.len()];
    let mut escaped = 0;
    for p in &ends {
        match edges.iter().position(|&e| e == p.edge) {
            Some(k) => counts[k] += 1,
            None => escaped += 1,
        }
    }
    let cv = g.vertex_conductivity(vertex);
    let expected: Vec<f64> = edges
        .iter()
        .map(|&e| g.outgoing(vertex).iter().filter(|d| d.edge == e).count() as f64 * g.conductivity(e) / cv)
        .collect();
    let kept = (cfg.n - escaped) as f64;
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64 / kept).collect();
    let se = expected.iter().map(|p| (p * (1.0 - p) / kept).sqrt()).collect();
    let chi2: f64 = counts
        .iter()
        .zip(&expected)
        .map(|(&c, p)| (c as f64 - kept * p).powi(2) / (kept * p))
        .sum();
    let p_value = if edges.len() > 1 {
        let dist = ChiSquared::new((edges.len() - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        1.0 - dist.cdf(chi2)
    } else {
        1.0
    };
    Ok(ScatteringReport { vertex, edges, expected, observed, se, escaped, chi2, p_value, n: cfg.n })
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    /// E[B_t - B_0] per axis, in unwrapped lattice coordinates
    pub displacement: Vec<Estimate>,
    /// E[|B_t - B_0|^2 - k t]
    pub compensated: Estimate,
    /// k: 1 for the Half scale, 2 for Delta
    pub compensator: f64,
    pub max_z: f64,
    pub passes: bool,
}

fn check_lattice(g: &MetricGraph, emb: &LatticeEmbedding) -> Result<()> {
    let unsupported = |m: &str| Err(Error::Unsupported(format!("martingale audit needs a cubic lattice torus: {m}")));
    let n = emb.side.checked_pow(emb.dim as u32).unwrap_or(0);
    if emb.axis.len() != g.edge_count() || g.vertex_count() != n || g.edge_count() != n * emb.dim {
        return unsupported("graph and embedding sizes differ");
    }
    let coords = |mut i: usize| {
        let mut c = vec![0; emb.dim];
        for x in c.iter_mut() {
            *x = i % emb.side;
            i /= emb.side;
        }
        c
    };
    for (k, e) in g.edges().iter().enumerate() {
        if (e.length - 1.0).abs() > 1e-12 {
            return unsupported("edge lengths must be 1");
        }
        let (a, mut b) = (coords(e.source), coords(e.target));
        let ax = emb.axis[k];
        if ax >= emb.dim {
            return unsupported("axis out of range");
        }
        b[ax] = (b[ax] + emb.side - 1) % emb.side;
        if a != b {
            return unsupported("edge is not a unit lattice step");
        }
    }
    Ok(())
}

/// E[B_t] = B_0 and E[|B_t|^2 - k t] = |B_0|^2 on the lattice torus, started
/// at `start` and measured in unwrapped coordinates centred there.
pub fn martingale_audit(g: &MetricGraph, emb: &LatticeEmbedding, start: usize, cfg: &WalkConfig) -> Result<MartingaleReport> {
    check_lattice(g, emb)?;
    if start >= g.vertex_count() {
        return invalid(format!("vertex {start} out of range"));
    }
    let d0 = g.outgoing(start)[0];
    let p0 = GraphPoint::new(g, d0.edge, d0.position(0.0, 1.0))?;
    let k = cfg.scale.variance();
    let disp: Vec<Vec<f64>> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut b = vec![0.0; emb.dim];
            run(g, &p0, cfg, i, |_, _| {}, &mut |e, d| b[emb.axis[e]] += d);
            b
        })
        .collect();
    let displacement: Vec<Estimate> = (0..emb.dim)
        .map(|a| Estimate::from_samples(&disp.iter().map(|b| b[a]).collect::<Vec<_>>()))
        .collect();
    let sq: Vec<f64> = disp.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>() - k * cfg.t).collect();
    let compensated = Estimate::from_samples(&sq);
    let max_z = displacement.iter().chain(std::iter::once(&compensated)).map(|e| e.z_score(0.0)).fold(0.0, f64::max);
    Ok(MartingaleReport { displacement, compensated, compensator: k, max_z, passes: max_z <= 3.0 })
}
