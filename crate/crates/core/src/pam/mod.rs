//! Parabolic Anderson model du/dt = (Laplacian - V) u, u(0) = 1, with an i.i.d.
//! random potential constant on each edge, and its moment functionals
//! Lambda_p(t) = log E (1/|G|) int u(t, x)^p dx.
//!
//! Moments are averaged over the whole torus. For a translation-invariant
//! law this has the same expectation as one period, and it makes
//! (1/|G|) int u(t)^2 = (1/|G|) int u(2t) hold realization by realization.

use crate::edgefn::EdgeFunction;
use crate::error::{invalid, Error, Result};
use crate::graph::MetricGraph;
use crate::oracle::{fd_assemble, DiscretizedOperator};
use crate::stats::compensated_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Grid nodes per unit length for the reference solves.
pub const MESH_PER_UNIT: f64 = 32.0;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum PotentialLaw {
    /// hi with probability p, lo otherwise
    Bernoulli { p: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant { v0: f64 },
}

impl PotentialLaw {
    pub fn bernoulli(p: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !lo.is_finite() || !hi.is_finite() {
            return invalid("bernoulli law needs p in [0, 1] and finite values");
        }
        Ok(PotentialLaw::Bernoulli { p, lo, hi })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return invalid("uniform law needs finite lo <= hi");
        }
        Ok(PotentialLaw::Uniform { lo, hi })
    }

    pub fn constant(v0: f64) -> Result<Self> {
        if !v0.is_finite() {
            return invalid("constant potential must be finite");
        }
        Ok(PotentialLaw::Constant { v0 })
    }

    /// `bernoulli:p:lo:hi`, `uniform:lo:hi` or `constant:v0`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: std::result::Result<Vec<f64>, _> = parts[1..].iter().map(|x| x.parse::<f64>()).collect();
        let bad = || Error::Invalid(format!("cannot parse law {s:?}; expected bernoulli:p:lo:hi, uniform:lo:hi or constant:v0"));
        let nums = nums.map_err(|_| bad())?;
        match (parts[0], nums.as_slice()) {
            ("bernoulli", [p, lo, hi]) => Self::bernoulli(*p, *lo, *hi),
            ("uniform", [lo, hi]) => Self::uniform(*lo, *hi),
            ("constant", [v0]) => Self::constant(*v0),
            _ => Err(bad()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            PotentialLaw::Bernoulli { p, lo, hi } => {
                if rng.gen::<f64>() < p {
                    hi
                } else {
                    lo
                }
            }
            PotentialLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            PotentialLaw::Constant { v0 } => v0,
        }
    }
}

/// Edge potentials of realization `index`.
pub fn sample_potential(g: &MetricGraph, law: &PotentialLaw, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..g.edge_count()).map(|_| law.draw(&mut rng)).collect()
}

fn assemble(g: &MetricGraph, v: &[f64]) -> Result<DiscretizedOperator> {
    let h = (1.0 / MESH_PER_UNIT).min(g.min_length() / 4.0);
    fd_assemble(g, |e, _| v[e], h)
}

/// u(t) for realization `index` of the law, on the reference grid.
pub fn pam_solve(g: &MetricGraph, law: &PotentialLaw, t: f64, seed: u64, index: u64) -> Result<EdgeFunction> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid("time must be finite and non-negative");
    }
    let v = sample_potential(g, law, seed, index);
    let op = assemble(g, &v)?;
    let u = match law {
        PotentialLaw::Constant { v0 } => vec![(-v0 * t).exp(); op.unknowns()],
        _ => op.semigroup_vec(t, 1, &vec![1.0; op.unknowns()]),
    };
    Ok(op.to_edge_function(g, &u))
}

/// Per-realization moments m[ti][p-1] = (1/|G|) int u(t_i)^p.
fn realization_moments(g: &MetricGraph, law: &PotentialLaw, times: &[f64], p_max: u32, seed: u64, index: u64) -> Result<Vec<Vec<f64>>> {
    if let PotentialLaw::Constant { v0 } = law {
        return Ok(times.iter().map(|t| (1..=p_max).map(|p| (-(p as f64) * v0 * t).exp()).collect()).collect());
    }
    let v = sample_potential(g, law, seed, index);
    let op = assemble(g, &v)?;
    let (lambda, w) = op.constant_mode_weights();
    let total = compensated_sum(op.mass().iter().copied());
    // (1/|G|) int u(tau) = (1/|G|) int u(tau/2)^2
    let spectral = |tau: f64| {
        if tau == 0.0 {
            1.0
        } else {
            compensated_sum(lambda.iter().zip(&w).map(|(l, c)| c * (-tau * l).exp())) / total
        }
    };
    let ones = vec![1.0; op.unknowns()];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut row = Vec::with_capacity(p_max as usize);
        row.push(spectral(t));
        if p_max >= 2 {
            row.push(spectral(2.0 * t));
        }
        if p_max >= 3 {
            let u = if t == 0.0 { ones.clone() } else { op.semigroup_vec(t, 1, &ones) };
            for p in 3..=p_max {
                row.push(if t == 0.0 {
                    1.0
                } else {
                    compensated_sum(u.iter().zip(op.mass()).map(|(u, m)| m * u.powi(p as i32))) / total
                });
            }
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentTable {
    pub times: Vec<f64>,
    pub p_max: u32,
    /// lambda[ti][p-1]
    pub lambda: Vec<Vec<f64>>,
    pub ci_lo: Vec<Vec<f64>>,
    pub ci_hi: Vec<Vec<f64>>,
    pub realizations: usize,
    pub law: PotentialLaw,
    pub seed: u64,
    /// bootstrap replicates, replicate[b][ti][p-1]; resample b uses the same
    /// realization indices in every cell
    #[serde(skip)]
    pub replicates: Vec<Vec<Vec<f64>>>,
}

impl MomentTable {
    /// Lambda_p(t_i), with Lambda_0 = 0.
    pub fn get(&self, ti: usize, p: u32) -> f64 {
        if p == 0 {
            0.0
        } else {
            self.lambda[ti][p as usize - 1]
        }
    }

    fn replicate(&self, b: usize, ti: usize, p: u32) -> f64 {
        if p == 0 {
            0.0
        } else {
            self.replicates[b][ti][p as usize - 1]
        }
    }

    /// Percentile interval of a statistic of the table, computed per replicate.
    pub fn bootstrap_ci(&self, stat: impl Fn(&dyn Fn(usize, u32) -> f64) -> f64) -> (f64, f64) {
        let mut vals: Vec<f64> = (0..self.replicates.len()).map(|b| stat(&|ti, p| self.replicate(b, ti, p))).collect();
        percentile_interval(&mut vals)
    }

    /// Rows t, p, lambda_est, ci_lo, ci_hi.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "p", "lambda_est", "ci_lo", "ci_hi"])?;
        for (ti, t) in self.times.iter().enumerate() {
            for p in 1..=self.p_max {
                let k = p as usize - 1;
                w.write_record(&[
                    format!("{t:e}"),
                    p.to_string(),
                    format!("{:e}", self.lambda[ti][k]),
                    format!("{:e}", self.ci_lo[ti][k]),
                    format!("{:e}", self.ci_hi[ti][k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn percentile_interval(vals: &mut [f64]) -> (f64, f64) {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let at = |q: f64| vals[((q * (n - 1) as f64).round() as usize).min(n - 1)];
    (at(0.025), at(0.975))
}

/// Lambda_p(t) for p = 1..p_max from R realizations, with 95% percentile
/// bootstrap intervals.
pub fn lyapunov_table(g: &MetricGraph, law: &PotentialLaw, times: &[f64], p_max: u32, realizations: usize, seed: u64) -> Result<MomentTable> {
    if realizations < 2 {
        return invalid("need at least two realizations");
    }
    if p_max == 0 {
        return invalid("p_max must be at least 1");
    }
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return invalid("times must be finite and non-negative");
    }
    let per: Vec<Vec<Vec<f64>>> = (0..realizations)
        .into_par_iter()
        .map(|r| realization_moments(g, law, times, p_max, seed, r as u64))
        .collect::<Result<_>>()?;
    let cells = |idx: &[usize]| -> Vec<Vec<f64>> {
        (0..times.len())
            .map(|ti| {
                (0..p_max as usize)
                    .map(|k| {
                        if times[ti] == 0.0 {
                            0.0
                        } else if let PotentialLaw::Constant { v0 } = law {
                            -((k + 1) as f64) * v0 * times[ti]
                        } else {
                            (compensated_sum(idx.iter().map(|&r| per[r][ti][k])) / idx.len() as f64).ln()
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let all: Vec<usize> = (0..realizations).collect();
    let lambda = cells(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOOTSTRAP_STREAM);
    let draws: Vec<Vec<usize>> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..realizations).map(|_| rng.gen_range(0..realizations)).collect())
        .collect();
    let replicates: Vec<Vec<Vec<f64>>> = draws.par_iter().map(|idx| cells(idx)).collect();
    let mut ci_lo = lambda.clone();
    let mut ci_hi = lambda.clone();
    for ti in 0..times.len() {
        for k in 0..p_max as usize {
            let mut vals: Vec<f64> = replicates.iter().map(|r| r[ti][k]).collect();
            let (lo, hi) = percentile_interval(&mut vals);
            // the interval always contains the estimate
            ci_lo[ti][k] = lo.min(lambda[ti][k]);
            ci_hi[ti][k] = hi.max(lambda[ti][k]);
        }
    }
    Ok(MomentTable { times: times.to_vec(), p_max, lambda, ci_lo, ci_hi, realizations, law: *law, seed, replicates })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainEntry {
    pub p: u32,
    /// finite-time slope of Lambda_p over the last third of the grid, divided by p
    pub lambda_over_p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntermittencyReport {
    /// finite-time slope estimates; the t -> infinity limit is not claimed
    pub chain: Vec<ChainEntry>,
    /// lambda_p / p strictly increasing with separated intervals
    pub intermittent: bool,
    /// every lambda_p / p inside every other's interval
    pub degenerate: bool,
    /// t -> Lambda_2 - 2 Lambda_1 nondecreasing within bootstrap slack
    pub gap_nondecreasing: bool,
    pub gap_max_violation: f64,
    /// p -> Lambda_p convex within bootstrap slack, with Lambda_0 = 0
    pub convex_in_p: bool,
    pub convexity_max_violation: f64,
    pub fit_times: Vec<f64>,
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let den: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    num / den
}

pub fn intermittency_report(table: &MomentTable) -> Result<IntermittencyReport> {
    let n = table.times.len();
    if n < 4 {
        return Err(Error::InsufficientGrid(n));
    }
    let first = n - n.div_ceil(3).max(2);
    let fit_idx: Vec<usize> = (first..n).collect();
    let fit_times: Vec<f64> = fit_idx.iter().map(|&i| table.times[i]).collect();
    let slope_of = |get: &dyn Fn(usize, u32) -> f64, p: u32| {
        let ys: Vec<f64> = fit_idx.iter().map(|&i| get(i, p)).collect();
        slope(&fit_times, &ys) / p as f64
    };

    let chain: Vec<ChainEntry> = (1..=table.p_max)
        .map(|p| {
            let est = slope_of(&|i, q| table.get(i, q), p);
            let (lo, hi) = table.bootstrap_ci(|get| slope_of(get, p));
            ChainEntry { p, lambda_over_p: est, ci_lo: lo.min(est), ci_hi: hi.max(est) }
        })
        .collect();
    let intermittent = chain.len() > 1 && chain.windows(2).all(|w| w[0].ci_hi < w[1].ci_lo);
    let degenerate = chain
        .iter()
        .all(|a| chain.iter().all(|b| a.lambda_over_p >= b.ci_lo - 1e-12 && a.lambda_over_p <= b.ci_hi + 1e-12));

    // an increment of Lambda_2 - 2 Lambda_1 violates monotonicity only if its
    // whole bootstrap interval is negative
    let mut gap_max_violation = 0.0f64;
    if table.p_max >= 2 {
        for i in 0..n - 1 {
            let inc = |get: &dyn Fn(usize, u32) -> f64| (get(i + 1, 2) - 2.0 * get(i + 1, 1)) - (get(i, 2) - 2.0 * get(i, 1));
            let est = inc(&|j, q| table.get(j, q));
            let (_, hi) = table.bootstrap_ci(inc);
            gap_max_violation = gap_max_violation.max(-hi.max(est));
        }
    }
    let mut convexity_max_violation = 0.0f64;
    for i in 0..n {
        for p in 1..table.p_max {
            let d2 = |get: &dyn Fn(usize, u32) -> f64| get(i, p + 1) - 2.0 * get(i, p) + get(i, p - 1);
            let est = d2(&|j, q| table.get(j, q));
            let (_, hi) = table.bootstrap_ci(d2);
            // round-off allowance for the exact zero of deterministic tables
            let tiny = 1e-12 * (1.0 + table.get(i, p + 1).abs());
            convexity_max_violation = convexity_max_violation.max(-(hi.max(est) + tiny));
        }
    }
    Ok(IntermittencyReport {
        chain,
        intermittent,
        degenerate,
        gap_nondecreasing: gap_max_violation <= 0.0,
        gap_max_violation,
        convex_in_p: convexity_max_violation <= 0.0,
        convexity_max_violation,
        fit_times,
    })
}
