//! (H - z)^{-1} g for H = -d2/dx2 + V with Kirchhoff conditions, assembled
//! from the edgewise Dirichlet resolvent and a vertex system.

use super::pair::{EdgePotential, FundamentalPair};
use super::reduction::{common_length, m_matrix, DIRICHLET_TOL};
use crate::edgefn::EdgeFunction;
use crate::error::{invalid, Error, Result};
use crate::graph::MetricGraph;
use crate::quad::{cumulative6, fd_weights, simpson};
use nalgebra::DVector;
use num_complex::Complex64 as C;
use std::collections::HashMap;

/// Condition number above which the vertex system counts as singular.
pub const SINGULAR_COND: f64 = 1e13;

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: EdgeFunction<C>,
    /// vertex values U
    pub vertex_values: Vec<C>,
    /// ||(H - z) u - g||_2 by finite differences on the sample grid
    pub residual: f64,
    pub relative_residual: f64,
    pub condition: f64,
}

/// Solves (H - z) u = g. The solution is u_D + gamma(z) U where u_D solves the
/// Dirichlet problem on each edge and M(z) U = -c(v) (mu(z) g).
pub fn krein_resolvent(g: &MetricGraph, v: &EdgePotential, z: C, rhs: &EdgeFunction<C>) -> Result<ResolventSolution> {
    let l = common_length(g)?;
    if rhs.edge_count() != g.edge_count() {
        return invalid("edge function does not match the graph");
    }
    if (0..g.edge_count()).any(|e| rhs.intervals(e) < 8) {
        return invalid("resolvent needs at least eight intervals per edge");
    }
    let pair = FundamentalPair::new(v, z, l);
    if pair.s1.norm() < DIRICHLET_TOL {
        return Err(Error::NearDirichlet { lambda: z, s1: pair.s1.norm() });
    }

    let mut grids: HashMap<usize, Vec<[C; 4]>> = HashMap::new();
    for e in 0..g.edge_count() {
        let n = rhs.intervals(e);
        grids.entry(n).or_insert_with(|| {
            let xs: Vec<f64> = (0..=n).map(|k| l * k as f64 / n as f64).collect();
            pair.eval(&xs)
        });
    }
    let phi = |y: &[C; 4]| pair.s1 * y[0] - pair.c1 * y[2];

    // edgewise Dirichlet solution and the vertex right-hand side
    let mut u_dir: Vec<Vec<C>> = Vec::with_capacity(g.edge_count());
    let mut b = DVector::from_element(g.vertex_count(), C::new(0.0, 0.0));
    for (ei, e) in g.edges().iter().enumerate() {
        let n = rhs.intervals(ei);
        let h = l / n as f64;
        let vals = &grids[&n];
        let gs = rhs.samples(ei);
        let sg: Vec<C> = vals.iter().zip(gs).map(|(y, &w)| y[2] * w).collect();
        let pg: Vec<C> = vals.iter().zip(gs).map(|(y, &w)| phi(y) * w).collect();
        let a = cumulative6(&sg, h);
        let p = cumulative6(&pg, h);
        let ptot = p[n];
        u_dir.push(
            vals.iter()
                .enumerate()
                .map(|(k, y)| (phi(y) * a[k] + y[2] * (ptot - p[k])) / pair.s1)
                .collect(),
        );
        b[e.source] -= ptot * e.conductivity / pair.s1;
        b[e.target] -= a[n] * e.conductivity / pair.s1;
    }

    let m = m_matrix(g, &pair);
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= SINGULAR_COND) {
        return Err(Error::SingularVertexSystem { z, cond: condition });
    }
    let uv = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularVertexSystem { z, cond: condition })?;

    let samples: Vec<Vec<C>> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            let vals = &grids[&rhs.intervals(ei)];
            let (zi, zt) = (uv[e.source], uv[e.target]);
            vals.iter()
                .zip(&u_dir[ei])
                .map(|(y, &ud)| ud + (y[2] * zt + zi * phi(y)) / pair.s1)
                .collect()
        })
        .collect();
    let u = EdgeFunction::from_samples(g, samples);
    let residual = operator_residual(g, v, z, &u, rhs);
    let gnorm = rhs.l2_norm(g);
    Ok(ResolventSolution {
        relative_residual: if gnorm > 0.0 { residual / gnorm } else { residual },
        u,
        vertex_values: uv.iter().copied().collect(),
        residual,
        condition,
    })
}

/// ||-u'' + (V - z) u - g||_2 with nine-point differences (centred inside,
/// one-sided near the ends).
pub fn operator_residual(g: &MetricGraph, v: &EdgePotential, z: C, u: &EdgeFunction<C>, rhs: &EdgeFunction<C>) -> f64 {
    let mut stencils: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut total = 0.0;
    for e in 0..g.edge_count() {
        let n = u.intervals(e);
        let h = u.spacing(e);
        let len = g.length(e);
        let us = u.samples(e);
        let gs = rhs.samples(e);
        let r2: Vec<f64> = (0..=n)
            .map(|k| {
                let start = k.saturating_sub(4).min(n - 8);
                let w = stencils.entry((n, k - start)).or_insert_with(|| {
                    let nodes: Vec<f64> = (0..9).map(|j| j as f64).collect();
                    fd_weights((k - start) as f64, &nodes, 2)
                });
                let d2: C = (0..9).map(|j| us[start + j] * w[j]).sum::<C>() / (h * h);
                let x = k as f64 * h;
                let r = -d2 + (v.eval(x / len) - z) * us[k] - gs[k];
                r.norm_sqr()
            })
            .collect();
        total += g.conductivity(e) * simpson(&r2, h);
    }
    total.sqrt()
}
