//! Reference solutions: a finite-volume discretization of the Kirchhoff
//! Laplacian with dense eigen-expansion, and closed-form kernels on the line
//! and on stars.

mod closed;

pub use closed::{closed_form_star_kernel, gaussian};

use crate::edgefn::EdgeFunction;
use crate::error::{invalid, Error, Result};
use crate::graph::MetricGraph;
use faer::Side;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use std::sync::OnceLock;

/// Largest system the dense eigensolver accepts.
pub const DENSE_CAP: usize = 4000;

#[derive(Debug)]
struct Eigen {
    /// eigenvalues of S = M^-1/2 K M^-1/2 + V, ascending
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Lumped piecewise-linear discretization of A = Laplacian - V with Kirchhoff
/// vertex conditions. One unknown per vertex and per interior grid node; the
/// flux through each grid interval of edge e is c(e) (u_b - u_a) / h_e.
#[derive(Debug)]
pub struct DiscretizedOperator {
    /// per edge: unknown index of each grid node, endpoints included
    nodes: Vec<Vec<usize>>,
    spacing: Vec<f64>,
    lengths: Vec<f64>,
    mass: Vec<f64>,
    potential: Vec<f64>,
    /// (i, j, c/h) per grid interval
    bonds: Vec<(usize, usize, f64)>,
    eigen: OnceLock<Eigen>,
}

/// Discretizes the graph with mesh width at most `h`; V is given as V(edge, xi).
pub fn fd_assemble(g: &MetricGraph, v: impl Fn(usize, f64) -> f64, h: f64) -> Result<DiscretizedOperator> {
    let limit = g.min_length() / 4.0;
    if !(h > 0.0) {
        return invalid("mesh width must be positive");
    }
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::MeshTooCoarse { h, limit });
    }
    let counts: Vec<usize> = g.edges().iter().map(|e| (e.length / h - 1e-9).ceil().max(4.0) as usize).collect();
    let unknowns = g.vertex_count() + counts.iter().map(|n| n - 1).sum::<usize>();
    if unknowns > DENSE_CAP {
        return Err(Error::TooManyUnknowns { n: unknowns, cap: DENSE_CAP });
    }

    let mut mass = vec![0.0; unknowns];
    let mut potential = vec![0.0; unknowns];
    let mut nodes = Vec::with_capacity(g.edge_count());
    let mut spacing = Vec::with_capacity(g.edge_count());
    let mut bonds = Vec::new();
    let mut next = g.vertex_count();
    for (ei, e) in g.edges().iter().enumerate() {
        let n = counts[ei];
        let he = e.length / n as f64;
        let c = e.conductivity;
        let mut idx = Vec::with_capacity(n + 1);
        idx.push(e.source);
        for _ in 1..n {
            idx.push(next);
            next += 1;
        }
        idx.push(e.target);
        for (k, &i) in idx.iter().enumerate() {
            let w = if k == 0 || k == n { 0.5 * c * he } else { c * he };
            mass[i] += w;
            potential[i] += w * v(ei, k as f64 * he);
        }
        for k in 0..n {
            bonds.push((idx[k], idx[k + 1], c / he));
        }
        nodes.push(idx);
        spacing.push(he);
    }
    for (p, m) in potential.iter_mut().zip(&mass) {
        *p /= m;
    }
    Ok(DiscretizedOperator {
        nodes,
        spacing,
        lengths: g.edges().iter().map(|e| e.length).collect(),
        mass,
        potential,
        bonds,
        eigen: OnceLock::new(),
    })
}

impl DiscretizedOperator {
    pub fn unknowns(&self) -> usize {
        self.mass.len()
    }

    pub fn interval_counts(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.len() - 1).collect()
    }

    pub fn spacing(&self, e: usize) -> f64 {
        self.spacing[e]
    }

    /// Lumped mass of each unknown, c(e) h_e at interior nodes.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// (A u)_i, with A = Laplacian - V (nonpositive for V >= 0).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for &(i, j, w) in &self.bonds {
            let f = w * (u[j] - u[i]);
            out[i] += f;
            out[j] -= f;
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = *o / self.mass[k] - self.potential[k] * u[k];
        }
        out
    }

    fn eigen(&self) -> &Eigen {
        self.eigen.get_or_init(|| {
            let n = self.unknowns();
            let mut s = faer::Mat::<f64>::zeros(n, n);
            for &(i, j, w) in &self.bonds {
                let sij = w / (self.mass[i] * self.mass[j]).sqrt();
                s.write(i, i, s.read(i, i) + w / self.mass[i]);
                s.write(j, j, s.read(j, j) + w / self.mass[j]);
                s.write(i, j, s.read(i, j) - sij);
                s.write(j, i, s.read(j, i) - sij);
            }
            for k in 0..n {
                s.write(k, k, s.read(k, k) + self.potential[k]);
            }
            let dec = s.selfadjoint_eigendecomposition(Side::Lower);
            let sv = dec.s().column_vector();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sv.read(a).total_cmp(&sv.read(b)));
            let u = dec.u();
            let vectors = DMatrix::from_fn(n, n, |i, j| u.read(i, order[j]));
            Eigen { values: order.iter().map(|&k| sv.read(k)).collect(), vectors }
        })
    }

    /// Eigenvalues of A, descending (0, then about -(k pi)^2 on a unit interval).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values.iter().map(|l| -l).collect()
    }

    /// Eigenvalues of H (ascending) with the weights c_k^2 of the constant
    /// function, so that int u(t) = sum_k c_k^2 exp(-t lambda_k) for u(0) = 1.
    pub fn constant_mode_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let eig = self.eigen();
        let sq = DVector::from_iterator(self.mass.len(), self.mass.iter().map(|m| m.sqrt()));
        let c = eig.vectors.tr_mul(&sq);
        (eig.values.clone(), c.iter().map(|c| c * c).collect())
    }

    /// Node values of f(edge, xi).
    pub fn sample(&self, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.unknowns()];
        let mut seen = vec![false; self.unknowns()];
        for (e, idx) in self.nodes.iter().enumerate() {
            for (k, &i) in idx.iter().enumerate() {
                if !seen[i] {
                    out[i] = f(e, k as f64 * self.spacing[e]);
                    seen[i] = true;
                }
            }
        }
        out
    }

    /// Node vector read off an edge function, exactly when its grid refines ours.
    pub fn sample_edge_function(&self, u: &EdgeFunction) -> Vec<f64> {
        let nested = (0..self.nodes.len()).all(|e| u.intervals(e) % (self.nodes[e].len() - 1) == 0);
        if nested {
            let mut out = vec![0.0; self.unknowns()];
            for (e, idx) in self.nodes.iter().enumerate() {
                let stride = u.intervals(e) / (idx.len() - 1);
                for (k, &i) in idx.iter().enumerate() {
                    out[i] = u.samples(e)[k * stride];
                }
            }
            out
        } else {
            self.sample(|e, xi| u.eval(e, xi))
        }
    }

    /// Edge function on the oracle grid.
    pub fn to_edge_function(&self, g: &MetricGraph, u: &[f64]) -> EdgeFunction {
        EdgeFunction::from_samples(g, self.nodes.iter().map(|idx| idx.iter().map(|&i| u[i]).collect()).collect())
    }

    /// exp(-t S^m) in the original variables.
    pub fn semigroup_vec(&self, t: f64, order: u32, u0: &[f64]) -> Vec<f64> {
        let eig = self.eigen();
        let sq: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let w = DVector::from_iterator(u0.len(), u0.iter().zip(&sq).map(|(u, s)| u * s));
        let mut coef = eig.vectors.tr_mul(&w);
        for (k, c) in coef.iter_mut().enumerate() {
            *c *= (-t * eig.values[k].powi(order as i32)).exp();
        }
        let y = &eig.vectors * coef;
        y.iter().zip(&sq).map(|(y, s)| y / s).collect()
    }

    /// (H - z)^-1 g with H = -A.
    pub fn resolvent_vec(&self, z: C, g: &[C]) -> Result<Vec<C>> {
        let eig = self.eigen();
        let dist = eig.values.iter().map(|l| (C::new(*l, 0.0) - z).norm()).fold(f64::INFINITY, f64::min);
        if dist < 1e-8 {
            return Err(Error::NearEigenvalue { z, dist });
        }
        let sq: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let re = DVector::from_iterator(g.len(), g.iter().zip(&sq).map(|(v, s)| v.re * s));
        let im = DVector::from_iterator(g.len(), g.iter().zip(&sq).map(|(v, s)| v.im * s));
        let (cr, ci) = (eig.vectors.tr_mul(&re), eig.vectors.tr_mul(&im));
        let mut out_re = DVector::zeros(g.len());
        let mut out_im = DVector::zeros(g.len());
        let (mut ar, mut ai) = (DVector::zeros(g.len()), DVector::zeros(g.len()));
        for k in 0..g.len() {
            let c = C::new(cr[k], ci[k]) / (eig.values[k] - z);
            ar[k] = c.re;
            ai[k] = c.im;
        }
        out_re.gemv(1.0, &eig.vectors, &ar, 0.0);
        out_im.gemv(1.0, &eig.vectors, &ai, 0.0);
        Ok((0..g.len()).map(|i| C::new(out_re[i], out_im[i]) / sq[i]).collect())
    }

    /// sqrt(sum_i m_i |((H - z) u - g)_i|^2)
    pub fn resolvent_residual(&self, z: C, u: &[C], g: &[C]) -> f64 {
        let re: Vec<f64> = u.iter().map(|c| c.re).collect();
        let im: Vec<f64> = u.iter().map(|c| c.im).collect();
        let (ar, ai) = (self.apply(&re), self.apply(&im));
        (0..u.len())
            .map(|i| {
                let r = -C::new(ar[i], ai[i]) - z * u[i] - g[i];
                self.mass[i] * r.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete kernel: u(x_i) = sum_j K_ij u_j m_j for the semigroup exp(-t S^m).
    pub fn kernel_matrix(&self, t: f64, order: u32) -> DMatrix<f64> {
        let eig = self.eigen();
        let n = self.unknowns();
        let mut scaled = eig.vectors.clone();
        for k in 0..n {
            let f = (-t * eig.values[k].powi(order as i32)).exp();
            scaled.column_mut(k).scale_mut(f);
        }
        let mut k = scaled * eig.vectors.transpose();
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] /= (self.mass[i] * self.mass[j]).sqrt();
            }
        }
        k
    }

    /// Unknown index of the grid node nearest to (edge, xi).
    pub fn nearest_node(&self, edge: usize, xi: f64) -> usize {
        let idx = &self.nodes[edge];
        let k = (xi / self.spacing[edge]).round().clamp(0.0, (idx.len() - 1) as f64) as usize;
        idx[k]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.lengths[e]
    }
}

pub fn fd_semigroup(g: &MetricGraph, op: &DiscretizedOperator, t: f64, order: u32, u0: &EdgeFunction) -> Result<EdgeFunction> {
    if !(t > 0.0) {
        return invalid("time must be positive");
    }
    let u = op.semigroup_vec(t, order, &op.sample_edge_function(u0));
    Ok(op.to_edge_function(g, &u))
}

pub fn fd_resolvent(g: &MetricGraph, op: &DiscretizedOperator, z: C, rhs: &EdgeFunction<C>) -> Result<EdgeFunction<C>> {
    let re = op.sample(|e, xi| rhs.eval(e, xi).re);
    let im = op.sample(|e, xi| rhs.eval(e, xi).im);
    let gv: Vec<C> = re.iter().zip(&im).map(|(a, b)| C::new(*a, *b)).collect();
    let u = op.resolvent_vec(z, &gv)?;
    Ok(EdgeFunction::from_samples(
        g,
        op.nodes.iter().map(|idx| idx.iter().map(|&i| u[i]).collect()).collect(),
    ))
}
