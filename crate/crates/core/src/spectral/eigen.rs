//! Eigenvalues in a window through D(lambda) in sigma(P).

use super::pair::{EdgePotential, FundamentalPair};
use super::reduction::{common_length, p_spectrum};
use crate::error::{invalid, Error, Result};
use crate::graph::MetricGraph;
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;

/// Roots closer than this to a Dirichlet point are reported with the Dirichlet list.
pub const DIRICHLET_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralEigen {
    pub lambda: f64,
    pub multiplicity: usize,
    pub source_mu: f64,
    pub kirchhoff_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<SpectralEigen>,
    /// zeros of s(l) in the window, where the reduction does not apply
    pub dirichlet: Vec<f64>,
    /// subintervals around Dirichlet points left unresolved
    pub flagged: Vec<[f64; 2]>,
}

fn real_pair(v: &EdgePotential, lambda: f64, l: f64) -> FundamentalPair {
    FundamentalPair::new(v, C::new(lambda, 0.0), l)
}

/// Fourth-order central difference.
fn derivative(f: &impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = 1e-3 * x.abs().max(1.0);
    (8.0 * (f(x + d) - f(x - d)) - (f(x + 2.0 * d) - f(x - 2.0 * d))) / (12.0 * d)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-12 * m.abs().max(1.0) {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn newton_polish(f: &impl Fn(f64) -> f64, x: f64, lo: f64, hi: f64) -> f64 {
    let d = derivative(f, x);
    if d == 0.0 || !d.is_finite() {
        return x;
    }
    let y = x - f(x) / d;
    if y >= lo && y <= hi && f(y).abs() <= f(x).abs() {
        y
    } else {
        x
    }
}

/// Real roots of f on a uniform scan: sign changes, exact zeros and, when
/// `tangential` is set, double roots at local minima of |f|.
fn scan_roots(f: &impl Fn(f64) -> f64, a: f64, b: f64, step: f64, tangential: bool) -> Vec<f64> {
    let n = ((b - a) / step).ceil() as usize + 2;
    let xs: Vec<f64> = (0..=n).map(|k| a - step + k as f64 * step).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for k in 0..n {
        if fs[k] == 0.0 {
            roots.push(xs[k]);
            continue;
        }
        if fs[k + 1] != 0.0 && (fs[k] < 0.0) != (fs[k + 1] < 0.0) {
            let r = bisect(f, xs[k], xs[k + 1], fs[k]);
            roots.push(newton_polish(f, r, xs[k], xs[k + 1]));
        }
    }
    if tangential {
        let df = |x: f64| derivative(f, x);
        for k in 1..n {
            let local_min = fs[k].abs() <= fs[k - 1].abs() && fs[k].abs() <= fs[k + 1].abs();
            let same_sign = (fs[k - 1] < 0.0) == (fs[k] < 0.0) && (fs[k] < 0.0) == (fs[k + 1] < 0.0);
            if !local_min || !same_sign || fs[k] == 0.0 {
                continue;
            }
            let (lo, hi) = (xs[k - 1], xs[k + 1]);
            let (dlo, dhi) = (df(lo), df(hi));
            if (dlo < 0.0) == (dhi < 0.0) {
                continue;
            }
            let c = bisect(&df, lo, hi, dlo);
            let fc = f(c);
            if fc.abs() < 1e-10 {
                roots.push(c);
            } else if (fc < 0.0) != (fs[k] < 0.0) {
                roots.push(bisect(f, lo, c, fs[k - 1]));
                roots.push(bisect(f, c, hi, fc));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * x.abs().max(1.0));
    roots
}

/// Zeros of s(l) in [a, b].
pub fn dirichlet_points(v: &EdgePotential, a: f64, b: f64, length: f64) -> Vec<f64> {
    let step = PI * PI / (100.0 * length * length);
    if let Some(v0) = v.constant_value() {
        let mut out = Vec::new();
        let mut k = 1;
        loop {
            let d = v0 + (k as f64 * PI / length).powi(2);
            if d > b {
                break;
            }
            if d >= a {
                out.push(d);
            }
            k += 1;
        }
        return out;
    }
    let s1 = |x: f64| real_pair(v, x, length).s1.re;
    scan_roots(&s1, a, b, step, false).into_iter().filter(|&x| x >= a && x <= b).collect()
}

/// Max over vertices of |sum_e c(e) d psi/dn| / (c(v) max(1, sqrt|lambda|)),
/// psi = gamma(lambda) z with |z|_inf = 1, derivatives by sixth-order one-sided
/// differences.
pub(crate) fn kirchhoff_residual(g: &MetricGraph, pair: &FundamentalPair, z: &[C]) -> f64 {
    const W: [f64; 7] = [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0];
    let l = pair.length;
    let h = 1e-3 * l.min(1.0);
    let scale = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut xs: Vec<f64> = (0..7).map(|k| k as f64 * h).collect();
    xs.extend((0..7).rev().map(|k| l - k as f64 * h));
    let vals = pair.eval(&xs);
    let psi = |zi: C, zt: C, y: &[C; 4]| (y[2] * zt + zi * (pair.s1 * y[0] - pair.c1 * y[2])) / pair.s1;
    let mut flux = vec![C::new(0.0, 0.0); g.vertex_count()];
    for e in g.edges() {
        let (zi, zt) = (z[e.source] / scale, z[e.target] / scale);
        let d0: C = (0..7).map(|k| psi(zi, zt, &vals[k]) * W[k]).sum::<C>() / (60.0 * h);
        // vals[13 - k] sits at l - k h
        let d1: C = (0..7).map(|k| psi(zi, zt, &vals[13 - k]) * W[k]).sum::<C>() / (60.0 * h);
        flux[e.source] += d0 * e.conductivity;
        flux[e.target] += d1 * e.conductivity;
    }
    let norm = pair.lambda.norm().sqrt().max(1.0);
    flux.iter()
        .enumerate()
        .map(|(v, f)| f.norm() / (g.vertex_conductivity(v) * norm))
        .fold(0.0, f64::max)
}

/// Eigenvalues of -d2/dx2 + V with Kirchhoff conditions in [a, b], found as the
/// solutions of D(lambda) = mu for each eigenvalue mu of P. Needs V(s) = V(1 - s).
pub fn eigenvalues_via_reduction(g: &MetricGraph, v: &EdgePotential, window: (f64, f64)) -> Result<SpectrumReport> {
    let (a, b) = window;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return invalid("window must be a finite interval with lower < upper");
    }
    let l = common_length(g)?;
    if !v.is_symmetric() {
        return Err(Error::Unsupported(
            "eigenvalue search needs a potential symmetric about the edge midpoint".into(),
        ));
    }
    let step = PI * PI / (100.0 * l * l);
    let dirichlet = dirichlet_points(v, a - DIRICHLET_EXCLUSION, b + DIRICHLET_EXCLUSION, l);
    let disc = |x: f64| real_pair(v, x, l).discriminant().re;

    let mut eigenvalues = Vec::new();
    for cluster in p_spectrum(g)? {
        let f = |x: f64| disc(x) - cluster.mu;
        for lambda in scan_roots(&f, a, b, step, true) {
            if lambda < a - 1e-12 || lambda > b + 1e-12 {
                continue;
            }
            if dirichlet.iter().any(|d| (d - lambda).abs() <= DIRICHLET_EXCLUSION) {
                continue;
            }
            let pair = real_pair(v, lambda, l);
            let residual = cluster
                .vectors
                .iter()
                .map(|z| {
                    let zc: Vec<C> = z.iter().map(|&x| C::new(x, 0.0)).collect();
                    kirchhoff_residual(g, &pair, &zc)
                })
                .fold(0.0, f64::max);
            eigenvalues.push(SpectralEigen {
                lambda,
                multiplicity: cluster.multiplicity(),
                source_mu: cluster.mu,
                kirchhoff_residual: residual,
            });
        }
    }
    eigenvalues.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    let dirichlet: Vec<f64> = dirichlet.into_iter().filter(|&d| d >= a && d <= b).collect();
    let flagged = dirichlet
        .iter()
        .map(|&d| [d - DIRICHLET_EXCLUSION, d + DIRICHLET_EXCLUSION])
        .collect();
    Ok(SpectrumReport { eigenvalues, dirichlet, flagged })
}
