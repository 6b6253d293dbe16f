//! Vertex reduction on equilateral graphs: P, M(lambda), the Dirichlet-to-
//! Neumann block, the gamma field and its adjoint mu.

use super::pair::{EdgePotential, FundamentalPair};
use crate::edgefn::{intervals_for, EdgeFunction, VertexField};
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::quad::simpson;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use std::collections::HashMap;

/// Below this |s(l)| the reduction formulas are treated as singular.
pub const DIRICHLET_TOL: f64 = 1e-12;

pub(crate) fn common_length(g: &MetricGraph) -> Result<f64> {
    g.equilateral_length(1e-9)
        .ok_or_else(|| Error::Unsupported("vertex reduction needs an equilateral graph".into()))
}

fn check_dirichlet(pair: &FundamentalPair) -> Result<()> {
    if pair.s1.norm() < DIRICHLET_TOL {
        return Err(Error::NearDirichlet { lambda: pair.lambda, s1: pair.s1.norm() });
    }
    Ok(())
}

/// (Pz)(v) = sum over edges at v of c(e)/c(v) z(other end).
pub fn build_p(g: &MetricGraph) -> Result<DMatrix<f64>> {
    common_length(g)?;
    let n = g.vertex_count();
    let mut p = DMatrix::zeros(n, n);
    for e in g.edges() {
        p[(e.source, e.target)] += e.conductivity / g.vertex_conductivity(e.source);
        p[(e.target, e.source)] += e.conductivity / g.vertex_conductivity(e.target);
    }
    Ok(p)
}

/// c(v)^{1/2} P c(v)^{-1/2}, symmetric with the spectrum of P.
pub fn symmetrized_p(g: &MetricGraph) -> Result<DMatrix<f64>> {
    common_length(g)?;
    let n = g.vertex_count();
    let mut p = DMatrix::zeros(n, n);
    for e in g.edges() {
        let w = e.conductivity / (g.vertex_conductivity(e.source) * g.vertex_conductivity(e.target)).sqrt();
        p[(e.source, e.target)] += w;
        p[(e.target, e.source)] += w;
    }
    Ok(p)
}

/// An eigenvalue of P with a c(v)-orthonormal eigenbasis.
#[derive(Debug, Clone)]
pub struct PCluster {
    pub mu: f64,
    pub vectors: Vec<DVector<f64>>,
}

impl PCluster {
    pub fn multiplicity(&self) -> usize {
        self.vectors.len()
    }
}

/// Eigenvalues of P grouped into clusters of width 1e-8, ascending.
pub fn p_spectrum(g: &MetricGraph) -> Result<Vec<PCluster>> {
    let eig = symmetrized_p(g)?.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut clusters: Vec<PCluster> = Vec::new();
    for i in order {
        let mu = eig.eigenvalues[i];
        let y = eig.eigenvectors.column(i);
        let z = DVector::from_fn(y.len(), |v, _| y[v] / g.vertex_conductivity(v).sqrt());
        match clusters.last_mut() {
            Some(c) if (mu - c.mu).abs() <= 1e-8 => c.vectors.push(z),
            _ => clusters.push(PCluster { mu, vectors: vec![z] }),
        }
    }
    for c in &mut clusters {
        c.mu = c.mu.clamp(-1.0, 1.0);
    }
    Ok(clusters)
}

/// Spectrum of P restricted to a vertex subset (principal block of the symmetrized P).
pub fn p_block_eigenvalues(g: &MetricGraph, vertices: &[usize]) -> Result<Vec<f64>> {
    let p = symmetrized_p(g)?;
    let block = DMatrix::from_fn(vertices.len(), vertices.len(), |i, j| p[(vertices[i], vertices[j])]);
    let mut ev: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// M(lambda): M z = 0 exactly when gamma(lambda) z satisfies the Kirchhoff
/// conditions. Row v is the Kirchhoff sum at v of gamma(lambda) z.
pub fn vertex_condition_operator(g: &MetricGraph, v: &EdgePotential, lambda: C) -> Result<DMatrix<C>> {
    let l = common_length(g)?;
    let pair = FundamentalPair::new(v, lambda, l);
    check_dirichlet(&pair)?;
    Ok(m_matrix(g, &pair))
}

pub(crate) fn m_matrix(g: &MetricGraph, pair: &FundamentalPair) -> DMatrix<C> {
    let n = g.vertex_count();
    let mut m = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    let inv = 1.0 / pair.s1;
    for e in g.edges() {
        let (i, t, c) = (e.source, e.target, e.conductivity);
        m[(i, t)] += inv * c;
        m[(i, i)] -= inv * c * pair.c1;
        m[(t, i)] += inv * c;
        m[(t, t)] -= inv * c * pair.s1_prime;
    }
    m
}

/// 2x2 map from (psi(0), psi(l)) to the inward derivatives (psi'(0), -psi'(l)).
pub fn dtn_map(v: &EdgePotential, lambda: C, length: f64) -> Result<[[C; 2]; 2]> {
    let pair = FundamentalPair::new(v, lambda, length);
    check_dirichlet(&pair)?;
    let inv = 1.0 / pair.s1;
    Ok([[-pair.c1 * inv, inv], [inv, -pair.s1_prime * inv]])
}

/// Edge values of the solution with vertex data z:
/// psi_e = [s z(t(e)) + z(i(e)) (s(l) c - c(l) s)] / s(l).
pub fn gamma_field(g: &MetricGraph, v: &EdgePotential, lambda: C, z: &VertexField<C>, per_unit: f64) -> Result<EdgeFunction<C>> {
    let l = common_length(g)?;
    if z.values.len() != g.vertex_count() {
        return Err(Error::Invalid("vertex field does not match the graph".into()));
    }
    let pair = FundamentalPair::new(v, lambda, l);
    check_dirichlet(&pair)?;
    let n = intervals_for(l, per_unit);
    let xs: Vec<f64> = (0..=n).map(|k| l * k as f64 / n as f64).collect();
    let vals = pair.eval(&xs);
    let samples = g
        .edges()
        .iter()
        .map(|e| {
            let (zi, zt) = (z.values[e.source], z.values[e.target]);
            vals.iter()
                .map(|y| (y[2] * zt + zi * (pair.s1 * y[0] - pair.c1 * y[2])) / pair.s1)
                .collect()
        })
        .collect();
    Ok(EdgeFunction::from_samples(g, samples))
}

/// (mu u)(v) = c(v)^-1 sum_e c(e) <phi_v, u_e> / s(l), with phi = s(l) c - c(l) s
/// at the initial end and s at the terminal end; bilinear pairing.
pub fn mu_map(g: &MetricGraph, v: &EdgePotential, lambda: C, u: &EdgeFunction<C>) -> Result<VertexField<C>> {
    let l = common_length(g)?;
    if u.edge_count() != g.edge_count() {
        return Err(Error::Invalid("edge function does not match the graph".into()));
    }
    let pair = FundamentalPair::new(v, lambda, l);
    check_dirichlet(&pair)?;
    Ok(mu_with(g, &pair, u))
}

pub(crate) fn mu_with(g: &MetricGraph, pair: &FundamentalPair, u: &EdgeFunction<C>) -> VertexField<C> {
    let mut grids: HashMap<usize, Vec<[C; 4]>> = HashMap::new();
    let mut out = vec![C::new(0.0, 0.0); g.vertex_count()];
    for (ei, e) in g.edges().iter().enumerate() {
        let n = u.intervals(ei);
        let vals = grids.entry(n).or_insert_with(|| {
            let xs: Vec<f64> = (0..=n).map(|k| pair.length * k as f64 / n as f64).collect();
            pair.eval(&xs)
        });
        let us = u.samples(ei);
        let h = pair.length / n as f64;
        let left: Vec<C> = vals.iter().zip(us).map(|(y, &w)| (pair.s1 * y[0] - pair.c1 * y[2]) * w).collect();
        let right: Vec<C> = vals.iter().zip(us).map(|(y, &w)| y[2] * w).collect();
        out[e.source] += simpson(&left, h) * e.conductivity / pair.s1;
        out[e.target] += simpson(&right, h) * e.conductivity / pair.s1;
    }
    for (vtx, o) in out.iter_mut().enumerate() {
        *o /= g.vertex_conductivity(vtx);
    }
    VertexField::new(out)
}
