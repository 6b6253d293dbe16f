use crate::edgefn::EdgeFunction;
use crate::error::Result;
use crate::graph::{transfer_identities_audit, GraphPoint, MetricGraph};
use crate::kernel::{kernel_eval, semigroup_apply, GraphKernelRequest, SemigroupKind, Targets};
use crate::oracle::fd_assemble;
use crate::profile::KernelProfile;
use crate::spectral::{eigenvalues_via_reduction, EdgePotential};
use crate::stochastic::{feynman_kac, Scale, WalkConfig};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub check: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(check: &'static str, value: f64, tolerance: f64) -> VerifyRow {
    VerifyRow { check, value, tolerance, pass: value <= tolerance }
}

/// Transfer identities, kernel and spectrum against the finite-difference
/// oracle, and Feynman-Kac against the kernel.
pub fn verify_graph(g: &MetricGraph, seed: u64) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();

    let audit = transfer_identities_audit(g, 6);
    rows.push(row("transfer_sums", audit.column_sum_violation.max(audit.weighted_row_violation), 1e-12));
    let paths = audit.pair_path_ratio.iter().chain(&audit.weighted_path_ratio).copied().fold(0.0, f64::max);
    rows.push(row("transfer_path_bound", paths, 1.0 + 1e-12));

    // pointwise heat kernel against the discrete kernel matrix
    let t = 0.1;
    let h = (g.min_length() / 4.0).min(1.0 / 100.0);
    let op = fd_assemble(g, |_, _| 0.0, h)?;
    let km = op.kernel_matrix(t, 1);
    let counts = op.interval_counts();
    let node = |e: usize, k: usize| -> Result<(GraphPoint, usize)> {
        let xi = k as f64 * op.spacing(e);
        Ok((GraphPoint::new(g, e, xi.min(g.length(e)))?, op.nearest_node(e, xi)))
    };
    let (x, xi_idx) = node(0, counts[0] / 2)?;
    let mut ys = Vec::new();
    for (e, &n) in counts.iter().enumerate() {
        for k in [0, n / 4, n / 2, 3 * n / 4, n] {
            ys.push(node(e, k)?);
        }
    }
    let req = GraphKernelRequest {
        x,
        targets: Targets::Points(ys.iter().map(|y| y.0).collect()),
        profile: KernelProfile::heat(t)?,
        eps: 1e-10,
    };
    let kv = kernel_eval(g, &req)?;
    let peak = kv.values.iter().copied().fold(0.0, f64::max);
    let err = ys.iter().zip(&kv.values).map(|((_, j), v)| (km[(xi_idx, *j)] - v).abs()).fold(0.0, f64::max);
    rows.push(row("kernel_vs_oracle", err / peak, 1e-3));

    // reduction spectrum against discrete eigenvalues
    if let Some(l) = g.equilateral_length(1e-9) {
        let top = (2.5 * PI / l).powi(2);
        let rep = eigenvalues_via_reduction(g, &EdgePotential::zero(), (-0.5, top))?;
        let exact: Vec<f64> = rep.eigenvalues.iter().map(|e| e.lambda).chain(rep.dirichlet.iter().copied()).collect();
        let fd = fd_assemble(g, |_, _| 0.0, l / 40.0)?;
        let disc: Vec<f64> = fd.eigenvalues().iter().map(|v| -v).filter(|v| *v <= 1.2 * top).collect();
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        let near = |x: f64, set: &[f64]| set.iter().map(|y| rel(x, *y)).fold(f64::INFINITY, f64::min);
        let mut worst = exact.iter().map(|&x| near(x, &disc)).fold(0.0, f64::max);
        for &d in disc.iter().filter(|d| **d <= 0.9 * top) {
            worst = worst.max(near(d, &exact));
        }
        rows.push(row("spectrum_vs_oracle", worst, 1e-2));
    }

    // Feynman-Kac against the semigroup at the middle of edge 0
    let t = 0.05;
    let l0 = g.length(0);
    let bump = move |e: usize, x: f64| if e == 0 { (PI * x / l0).sin().powi(2) } else { 0.0 };
    let counts: Vec<usize> = g.edges().iter().map(|e| 2 * (16.0 * e.length).ceil().max(2.0) as usize).collect();
    let u0 = EdgeFunction::from_fn_counts(g, &counts, bump);
    let heat = semigroup_apply(g, SemigroupKind::Heat, t, 0.0, &u0, 1e-10)?;
    let k = counts[0] / 2;
    let x = GraphPoint::new(g, 0, u0.node(0, k))?;
    let cfg = WalkConfig::new(t, 5e-4, Scale::Delta, seed, 20_000)?;
    let fk = feynman_kac(g, &x, |_, _| 0.0, bump, &cfg)?;
    let want = heat.values.samples(0)[k];
    let slack = heat.truncation_bound + heat.quadrature_tol;
    rows.push(row("fk_vs_kernel_se", ((fk.estimate - want).abs() - slack).max(0.0) / fk.se.max(1e-300), 3.0));
    Ok(rows)
}
