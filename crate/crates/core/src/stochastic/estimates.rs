//! Gaussian-type upper estimates for heat and polyharmonic kernels, fitted
//! on one graph and checked on another.

use crate::error::{invalid, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::kernel::{kernel_eval, GraphKernelRequest, SemigroupKind, Targets};
use crate::oracle::fd_assemble;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// ln|K(x,y)| <= log_c - ln(t)/2m - (c2/2) d^exponent / t^{1/(2m-1)} + c3 t
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit {
    pub m: u32,
    pub exponent: f64,
    pub log_c: f64,
    pub c2: f64,
    pub c3: f64,
    /// root mean square of the least-squares residual, before lifting log_c
    pub rms_residual: f64,
}

impl EnvelopeFit {
    pub fn log_envelope(&self, t: f64, d: f64) -> f64 {
        let m = self.m as f64;
        self.log_c - t.ln() / (2.0 * m) - 0.5 * self.c2 * d.powf(self.exponent) / t.powf(1.0 / (2.0 * m - 1.0)) + self.c3 * t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelEstimateReport {
    /// fit with the sharp exponent 2m/(2m-1)
    pub fit: EnvelopeFit,
    /// same fit with exponent 1, for comparison
    pub linear_fit: EnvelopeFit,
    /// max over the check graph of ln|K| - ln(envelope); <= 0 means dominated
    pub check_log_excess: f64,
    pub fit_samples: usize,
    pub check_samples: usize,
}

/// (t, d, |K|) on a grid of targets, keeping only the points where |K| beats
/// every value at larger distance. For oscillating kernels these are the
/// peaks of the decaying profile.
fn samples(g: &MetricGraph, x: &GraphPoint, kind: SemigroupKind, t_grid: &[f64], eps: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for &t in t_grid {
        let req = GraphKernelRequest { x: *x, targets: Targets::Grid { per_unit: 16.0 }, profile: kind.profile(t)?, eps };
        let k = kernel_eval(g, &req)?;
        let floor = 10.0 * k.truncation_bound.max(eps);
        let mut rows: Vec<(f64, f64)> = k.points.iter().zip(&k.values).map(|(y, v)| (g.distance(x, y), v.abs())).collect();
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut run = 0.0f64;
        for (d, v) in rows {
            if v > run && v > floor {
                out.push((t, d, v));
            }
            run = run.max(v);
        }
    }
    Ok(out)
}

fn fit(data: &[(f64, f64, f64)], m: u32, exponent: f64) -> Result<EnvelopeFit> {
    let mm = m as f64;
    let a = DMatrix::from_fn(data.len(), 3, |i, j| {
        let (t, d, _) = data[i];
        match j {
            0 => 1.0,
            1 => -0.5 * d.powf(exponent) / t.powf(1.0 / (2.0 * mm - 1.0)),
            _ => t,
        }
    });
    let y = DVector::from_iterator(data.len(), data.iter().map(|&(t, _, k)| k.ln() + t.ln() / (2.0 * mm)));
    let coef = a.clone().svd(true, true).solve(&y, 1e-12).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    let resid = &y - &a * &coef;
    let rms = (resid.norm_squared() / data.len() as f64).sqrt();
    let lift = resid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EnvelopeFit { m, exponent, log_c: coef[0] + lift, c2: coef[1], c3: coef[2], rms_residual: rms })
}

/// Fits the envelope to K on `fit_graph` from `fit_x`, then measures how far
/// K on `check_graph` from `check_x` rises above it.
pub fn kernel_estimate_audit(
    fit_graph: &MetricGraph,
    fit_x: &GraphPoint,
    check_graph: &MetricGraph,
    check_x: &GraphPoint,
    t_grid: &[f64],
    m: u32,
    eps: f64,
) -> Result<KernelEstimateReport> {
    if m == 0 {
        return invalid("order m must be at least 1");
    }
    if t_grid.len() < 2 || t_grid.iter().any(|t| !(*t > 0.0)) {
        return invalid("need at least two positive times");
    }
    let kind = if m == 1 { SemigroupKind::Heat } else { SemigroupKind::Polyharmonic(m) };
    let data = samples(fit_graph, fit_x, kind, t_grid, eps)?;
    if data.len() < 4 {
        return invalid("kernel is below the truncation floor almost everywhere");
    }
    let mm = m as f64;
    let sharp = fit(&data, m, 2.0 * mm / (2.0 * mm - 1.0))?;
    let linear = fit(&data, m, 1.0)?;
    let check = samples(check_graph, check_x, kind, t_grid, eps)?;
    let check_log_excess = check
        .iter()
        .map(|&(t, d, k)| k.ln() - sharp.log_envelope(t, d))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelEstimateReport { fit: sharp, linear_fit: linear, check_log_excess, fit_samples: data.len(), check_samples: check.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct SchrodingerReport {
    /// per time: max over node pairs of |e^{-tH}(x,y)| / bound(x,y)
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

/// Compares |e^{-tH}(x,y)| with |e^{t Laplacian}(x,y)|^{1/2} t^{-1/4} e^{t sup V+}
/// on a finite-difference grid of width h; the reported ratio is the implied
/// constant.
pub fn schrodinger_bound_audit(g: &MetricGraph, v: impl Fn(usize, f64) -> f64, t_grid: &[f64], h: f64) -> Result<SchrodingerReport> {
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return invalid("times must be positive");
    }
    let with_v = fd_assemble(g, &v, h)?;
    let free = fd_assemble(g, |_, _| 0.0, h)?;
    let vplus = with_v.sample(|e, x| v(e, x).max(0.0)).into_iter().fold(0.0, f64::max);
    let mut ratios = Vec::new();
    for &t in t_grid {
        let kv = with_v.kernel_matrix(t, 1);
        let k0 = free.kernel_matrix(t, 1);
        let scale = t.powf(-0.25) * (t * vplus).exp();
        let r = kv
            .iter()
            .zip(k0.iter())
            .map(|(a, b)| a.abs() / (b.abs().sqrt() * scale))
            .fold(0.0, f64::max);
        ratios.push((t, r));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SchrodingerReport { ratios, max_ratio })
}
