//! Numerical audits of kernel properties: vertex conditions and the
//! L1 -> Linf decay of the semigroup.

use super::{Certify, ProfileEval, SemigroupKind, SourceKernel};
use crate::edgefn::{intervals_for, EdgeFunction};
use crate::error::{invalid, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::profile::KernelProfile;
use crate::quad::simpson_weights;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct VertexAudit {
    pub vertex: String,
    /// max spread of the limits of y -> K(x, y) across incident edges
    pub spread: f64,
    /// |sum_e c(e) dK/dn_e| from one-sided differences
    pub kirchhoff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryAudit {
    pub vertices: Vec<VertexAudit>,
    pub max_spread: f64,
    pub max_kirchhoff: f64,
    pub truncation_bound: f64,
}

/// Continuity and Kirchhoff sums of y -> K_f(x, y) at every vertex.
pub fn boundary_condition_audit(g: &MetricGraph, f: &KernelProfile, x: &GraphPoint, eps: f64) -> Result<BoundaryAudit> {
    let src = SourceKernel::new(g, f, x.edge, eps, Certify::Pointwise)?;
    let mut fe = ProfileEval::new(f);
    let h = g.min_length() / 256.0;

    let mut vertices = Vec::with_capacity(g.vertex_count());
    for v in 0..g.vertex_count() {
        let mut limits = Vec::new();
        let mut flux = 0.0;
        for &d in g.outgoing(v) {
            let len = g.length(d.edge);
            // s = distance from v along d
            let mut at = |s: f64| src.eval(&mut |r| fe.call(r), x.xi, d.edge, d.position(s, len));
            let mut one_sided = |h: f64| {
                let p: Vec<f64> = (0..5).map(|k| at(k as f64 * h)).collect();
                (-25.0 * p[0] + 48.0 * p[1] - 36.0 * p[2] + 16.0 * p[3] - 3.0 * p[4]) / (12.0 * h)
            };
            let deriv = (16.0 * one_sided(h / 2.0) - one_sided(h)) / 15.0;
            flux += g.conductivity(d.edge) * deriv;
            limits.push(at(0.0));
        }
        let hi = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = limits.iter().copied().fold(f64::INFINITY, f64::min);
        vertices.push(VertexAudit { vertex: g.vertex_id(v).to_string(), spread: hi - lo, kirchhoff: flux.abs() });
    }
    let max_spread = vertices.iter().map(|a| a.spread).fold(0.0, f64::max);
    let max_kirchhoff = vertices.iter().map(|a| a.kirchhoff).fold(0.0, f64::max);
    Ok(BoundaryAudit { vertices, max_spread, max_kirchhoff, truncation_bound: src.bound() })
}

#[derive(Debug, Clone, Serialize)]
pub struct UltraRow {
    pub t: f64,
    /// sup over grid pairs of K(x, y)
    pub sup_kernel: f64,
    /// sup over grid x of int |K(x, y)| dc(y)
    pub row_l1: f64,
    /// kappa ||f||, the operator bound on L1 -> L1 and Linf -> Linf
    pub row_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UltraReport {
    pub rows: Vec<UltraRow>,
    /// fitted exponent in sup K ~ C t^-beta
    pub beta: f64,
}

/// sup K(x, y) over a grid, for each t, and the fitted decay exponent.
///
/// Sources x sit on a 32-per-unit grid; targets are resolved relative to the
/// kernel's length scale t^(1/2m).
pub fn ultracontractivity_probe(g: &MetricGraph, kind: SemigroupKind, t_grid: &[f64], eps: f64) -> Result<UltraReport> {
    if t_grid.len() < 2 {
        return invalid("need at least two times to fit an exponent");
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return invalid("times must be positive");
    }
    let order = match kind {
        SemigroupKind::Heat => 1,
        SemigroupKind::Polyharmonic(m) => m,
    };
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let f = kind.profile(t)?;
        let scale = t.powf(0.5 / order as f64);
        let per_unit = (16.0 / scale).max(32.0);
        let targets = EdgeFunction::<f64>::from_fn(g, per_unit, |_, _| 0.0);
        let weights: Vec<Vec<f64>> = (0..g.edge_count())
            .map(|e| {
                let n = targets.intervals(e);
                simpson_weights(n, targets.spacing(e)).iter().map(|w| w * g.conductivity(e)).collect()
            })
            .collect();
        let mut fe = ProfileEval::new(&f);
        let (mut sup, mut row_l1) = (f64::NEG_INFINITY, 0.0f64);
        for e in 0..g.edge_count() {
            let src = SourceKernel::new(g, &f, e, eps, Certify::Pointwise)?;
            let nx = intervals_for(g.length(e), 32.0);
            for k in 0..=nx {
                let xi = g.length(e) * k as f64 / nx as f64;
                let mut l1 = 0.0;
                for e2 in 0..g.edge_count() {
                    for j in 0..=targets.intervals(e2) {
                        let kv = src.eval(&mut |r| fe.call(r), xi, e2, targets.node(e2, j));
                        sup = sup.max(kv);
                        l1 += weights[e2][j] * kv.abs();
                    }
                }
                row_l1 = row_l1.max(l1);
            }
        }
        let row_bound = f.shift_bound(g.min_length(), g.max_length())? * f.l1_weighted_norm(g.min_length())?;
        rows.push(UltraRow { t, sup_kernel: sup, row_l1, row_bound });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t.ln(), r.sup_kernel.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(UltraReport { rows, beta: -sxy / sxx })
}
