//! One PASS/FAIL line per acceptance criterion. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 6 7`.

use mgkernel::edgefn::EdgeFunction;
use mgkernel::graph::{cubic_torus, cycle, homogeneous_tree, line_segment, random_connected, star, transfer_identities_audit, GraphPoint, MetricGraph};
use mgkernel::kernel::{convolve, kernel_eval, kernel_row, semigroup_apply, ultracontractivity_probe, GraphKernelRequest, SemigroupKind, Targets};
use mgkernel::oracle::{closed_form_star_kernel, fd_assemble, fd_resolvent, fd_semigroup, gaussian};
use mgkernel::pam::{intermittency_report, lyapunov_table, PotentialLaw};
use mgkernel::profile::KernelProfile;
use mgkernel::spectral::{eigenvalues_via_reduction, krein_resolvent, p_block_eigenvalues, EdgePotential};
use mgkernel::stochastic::{feynman_kac, martingale_audit, scattering_frequencies, Scale, WalkConfig};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn values(g: &MetricGraph, f: &KernelProfile, x: GraphPoint, ys: Vec<GraphPoint>, eps: f64) -> Result<Vec<f64>, String> {
    let req = GraphKernelRequest { x, targets: Targets::Points(ys), profile: f.clone(), eps };
    Ok(kernel_eval(g, &req).map_err(err)?.values)
}

fn transfer_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut worst_path = 0.0f64;
    for k in 0..20 {
        let nv = rng.gen_range(2..=12);
        let ne = rng.gen_range(nv - 1..=30);
        let g = random_connected(&mut rng, nv, ne, (0.5, 2.0), (0.2, 5.0)).map_err(err)?;
        let a = transfer_identities_audit(&g, 8);
        worst_sum = worst_sum.max(a.column_sum_violation).max(a.weighted_row_violation);
        worst_path = a.pair_path_ratio.iter().chain(&a.weighted_path_ratio).fold(worst_path, |m, r| m.max(*r));
        ensure(a.passes(1e-12), || format!("graph {k}: {a:?}"))?;
    }
    Ok(format!("sum violation {worst_sum:.1e}, path sums / 3^m <= {worst_path:.3}"))
}

fn line_reduction() -> Outcome {
    let g = line_segment(80, 1.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for t in [0.01, 0.1, 1.0] {
        let f = KernelProfile::heat(t).map_err(err)?;
        for _ in 0..10 {
            let x = GraphPoint::new(&g, rng.gen_range(35..45), rng.gen::<f64>()).map_err(err)?;
            let ys: Vec<_> = (0..10)
                .map(|_| GraphPoint::new(&g, rng.gen_range(30..50), rng.gen::<f64>()).unwrap())
                .collect();
            let vals = values(&g, &f, x, ys.clone(), 1e-12)?;
            for (y, v) in ys.iter().zip(vals) {
                let d = (y.edge as f64 + y.xi) - (x.edge as f64 + x.xi);
                worst = worst.max((v - gaussian(t, d)).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max error {worst:.2e}"))?;
    Ok(format!("max error {worst:.1e} over 300 pairs"))
}

fn star_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for d in [3usize, 4, 5] {
        let g = star(&vec![1.0; d], 12.0).map_err(err)?;
        for t in [0.05, 0.2] {
            let f = KernelProfile::heat(t).map_err(err)?;
            let x = GraphPoint::new(&g, 0, 0.5).map_err(err)?;
            let pts = [(0, 0.7), (0, 0.1), (1, 0.4), (d - 1, 1.3)];
            let ys = pts.iter().map(|&(e, s)| GraphPoint::new(&g, e, s).unwrap()).collect();
            for (v, &(e, s)) in values(&g, &f, x, ys, 1e-10)?.iter().zip(&pts) {
                worst = worst.max((v - closed_form_star_kernel(d, t, (0, 0.5), (e, s))).abs());
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max error {worst:.2e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

fn mass_and_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let graphs = [cycle(4, 1.0).map_err(err)?, random_connected(&mut rng, 5, 7, (0.5, 1.5), (0.2, 5.0)).map_err(err)?];
    let eps = 1e-9;
    let f = KernelProfile::heat(0.1).map_err(err)?;
    let (mut mass_err, mut asym) = (0.0f64, 0.0f64);
    for g in &graphs {
        let layout = EdgeFunction::constant(g, 128.0, 0.0);
        for e in 0..g.edge_count() {
            let x = GraphPoint::new(g, e, 0.3 * g.length(e)).map_err(err)?;
            let (row, _) = kernel_row(g, &f, &x, eps, &layout).map_err(err)?;
            mass_err = mass_err.max((row.integrate(g) - 1.0).abs());
        }
        for _ in 0..25 {
            let (e1, e2) = (rng.gen_range(0..g.edge_count()), rng.gen_range(0..g.edge_count()));
            let x = GraphPoint::new(g, e1, rng.gen::<f64>() * g.length(e1)).map_err(err)?;
            let y = GraphPoint::new(g, e2, rng.gen::<f64>() * g.length(e2)).map_err(err)?;
            let kxy = values(g, &f, x, vec![y], eps)?[0];
            let kyx = values(g, &f, y, vec![x], eps)?[0];
            asym = asym.max((kxy - kyx).abs());
        }
    }
    ensure(mass_err <= 1e-6, || format!("mass error {mass_err:.2e}"))?;
    ensure(asym <= 2.0 * eps, || format!("asymmetry {asym:.2e}"))?;
    Ok(format!("mass error {mass_err:.1e}, asymmetry {asym:.1e} at 50 pairs"))
}

fn chapman_kolmogorov() -> Outcome {
    let g = cycle(4, 1.0).map_err(err)?;
    let eps = 1e-10;
    let layout = EdgeFunction::constant(&g, 128.0, 0.0);
    let mut worst = 0.0f64;
    for (t, s) in [(0.05, 0.05), (0.1, 0.2)] {
        for (e, xi) in [(0, 0.5), (2, 0.0), (3, 0.8)] {
            let y = GraphPoint::new(&g, e, xi).map_err(err)?;
            let (ks, bs) = kernel_row(&g, &KernelProfile::heat(s).map_err(err)?, &y, eps, &layout).map_err(err)?;
            let (kts, bts) = kernel_row(&g, &KernelProfile::heat(t + s).map_err(err)?, &y, eps, &layout).map_err(err)?;
            let conv = convolve(&g, &KernelProfile::heat(t).map_err(err)?, &ks, eps).map_err(err)?;
            let gap = conv.values.max_abs_diff(&kts);
            let tol = 10.0 * (eps + bs + bts + conv.truncation_bound + conv.quadrature_tol);
            worst = worst.max(gap / tol);
            ensure(gap <= tol, || format!("(t, s) = ({t}, {s}): gap {gap:.2e} > {tol:.2e}"))?;
        }
    }
    Ok(format!("gap / tolerance <= {worst:.3}"))
}

fn oracle_equivalence() -> Outcome {
    let graphs = [("4-cycle", cycle(4, 1.0).map_err(err)?), ("3-star", star(&[1.0; 3], 1.0).map_err(err)?)];
    let t = 0.1;
    let mut out = Vec::new();
    for (name, g) in &graphs {
        let bump = |e: usize, x: f64| if e == 0 { (PI * x).sin().powi(2) } else { 0.0 };
        let fine = EdgeFunction::from_fn(g, 800.0, bump);
        let exact = semigroup_apply(g, SemigroupKind::Heat, t, 0.0, &fine, 1e-10).map_err(err)?.values;
        let mut errs = Vec::new();
        for h in [1.0 / 400.0, 1.0 / 800.0] {
            let op = fd_assemble(g, |_, _| 0.0, h).map_err(err)?;
            let fd = fd_semigroup(g, &op, t, 1, &fine).map_err(err)?;
            errs.push(fd.relative_l2_diff(&exact.restrict(&fd.interval_counts()), g));
        }
        let ratio = errs[0] / errs[1];
        ensure(errs[0] <= 1e-3 && ratio >= 3.0, || format!("{name}: errors {errs:?}, ratio {ratio:.2}"))?;
        out.push(format!("{name} {:.1e} (x{ratio:.2})", errs[0]));
    }
    Ok(out.join(", "))
}

fn spectral_reduction() -> Outcome {
    let g = cycle(4, 1.0).map_err(err)?;
    let rep = eigenvalues_via_reduction(&g, &EdgePotential::zero(), (-0.5, 450.0)).map_err(err)?;
    let mut lambdas: Vec<f64> = rep.eigenvalues.iter().map(|e| e.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    // away from the Dirichlet points pi^2 m^2 only odd k (and k = 0) survive
    let want: Vec<f64> = [0, 1, 3, 5, 7, 9, 11, 13].iter().map(|&k| (PI * k as f64 / 2.0).powi(2)).collect();
    ensure(lambdas.len() >= 8, || format!("only {} eigenvalues: {lambdas:?}", lambdas.len()))?;
    let eig_err = lambdas.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(eig_err <= 1e-8, || format!("eigenvalue error {eig_err:.2e}: {lambdas:?}"))?;
    let kirchhoff = rep.eigenvalues.iter().map(|e| e.kirchhoff_residual).fold(0.0, f64::max);
    ensure(kirchhoff <= 1e-6, || format!("Kirchhoff residual {kirchhoff:.2e}"))?;

    let rhs = EdgeFunction::<C>::from_fn(&g, 400.0, |e, x| C::new(1.0 + (PI * x).sin() * (e as f64 - 1.5), 0.0));
    let op = fd_assemble(&g, |_, _| 0.0, 1.0 / 200.0).map_err(err)?;
    let (mut residual, mut diff) = (0.0f64, 0.0f64);
    for z in [C::new(-1.0, 0.0), C::new(-2.0, 0.5)] {
        let k = krein_resolvent(&g, &EdgePotential::zero(), z, &rhs).map_err(err)?;
        let fd = fd_resolvent(&g, &op, z, &rhs).map_err(err)?;
        residual = residual.max(k.residual);
        diff = diff.max(k.u.restrict(&fd.interval_counts()).relative_l2_diff(&fd, &g));
    }
    ensure(residual <= 1e-8 && diff <= 1e-4, || format!("resolvent residual {residual:.2e}, oracle gap {diff:.2e}"))?;
    Ok(format!("eigenvalues {eig_err:.1e}, Kirchhoff {kirchhoff:.1e}, resolvent {residual:.1e} / oracle {diff:.1e}"))
}

fn tree_band() -> Outcome {
    let (g, interior) = homogeneous_tree(3, 6, 1.0).map_err(err)?;
    let edge = 2.0 * 2f64.sqrt() / 3.0;
    let mus = p_block_eigenvalues(&g, &interior).map_err(err)?;
    let top = mus.iter().map(|m| m.abs()).fold(0.0, f64::max);
    ensure(top <= 0.9429 + 1e-9, || format!("max |mu| = {top}"))?;
    Ok(format!("{} eigenvalues, max |mu| = {top:.6} < {edge:.6}", mus.len()))
}

fn ultracontractivity() -> Outcome {
    let g = cycle(4, 1.0).map_err(err)?;
    let ts = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
    let heat = ultracontractivity_probe(&g, SemigroupKind::Heat, &ts, 1e-10).map_err(err)?.beta;
    let bi = ultracontractivity_probe(&g, SemigroupKind::Polyharmonic(2), &ts, 1e-10).map_err(err)?.beta;
    ensure((heat - 0.5).abs() <= 0.05 && (bi - 0.25).abs() <= 0.05, || format!("beta heat {heat:.4}, m=2 {bi:.4}"))?;
    Ok(format!("beta heat {heat:.4}, m=2 {bi:.4}"))
}

fn stochastic_validation() -> Outcome {
    let s = star(&[1.0, 2.0, 3.0], 10.0).map_err(err)?;
    let r = scattering_frequencies(&s, 0, &WalkConfig::new(0.5, 0.01, Scale::Delta, 11, 100_000).map_err(err)?).map_err(err)?;
    let scat_z = (0..3).map(|k| (r.observed[k] - r.expected[k]).abs() / r.se[k]).fold(0.0, f64::max);
    ensure(r.escaped == 0 && scat_z <= 3.0, || format!("scattering {r:?}"))?;

    let c4 = cycle(4, 1.0).map_err(err)?;
    let x = GraphPoint::new(&c4, 1, 0.25).map_err(err)?;
    let fk = feynman_kac(&c4, &x, |_, _| 1.5, |_, _| 1.0, &WalkConfig::new(0.7, 0.01, Scale::Delta, 1, 2000).map_err(err)?).map_err(err)?;
    // every path carries the same weight, so the spread is zero up to rounding
    let const_gap = (fk.estimate - (-1.5f64 * 0.7).exp()).abs();
    ensure(const_gap <= 3.0 * fk.se + 1e-12, || format!("constant potential {fk:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let graphs = [
        star(&[1.0, 2.0, 0.5], 1.0).map_err(err)?,
        c4.clone(),
        random_connected(&mut rng, 4, 5, (0.6, 1.4), (0.3, 3.0)).map_err(err)?,
    ];
    let mut fk_z = 0.0f64;
    for k in 0..10 {
        let g = &graphs[k % 3];
        let src = k % g.edge_count();
        let l = g.length(src);
        let bump = move |e: usize, x: f64| if e == src { (PI * x / l).sin().powi(2) } else { 0.0 };
        let u0 = EdgeFunction::from_fn(g, 32.0, bump);
        let t = [0.05, 0.1][k % 2];
        let heat = semigroup_apply(g, SemigroupKind::Heat, t, 0.0, &u0, 1e-10).map_err(err)?;
        // start on the source edge or a neighbour of its target vertex, close enough to feel the bump
        let v = g.edge(src).target;
        let e = if k % 2 == 0 { src } else { g.outgoing(v).iter().map(|d| d.edge).find(|&e| e != src).unwrap_or(src) };
        let near = if g.edge(e).source == v { 0.2 } else { 0.8 };
        let i = if e == src { (u0.intervals(e) * (2 + k % 5)) / 8 } else { (near * u0.intervals(e) as f64).round() as usize };
        let x = GraphPoint::new(g, e, u0.node(e, i)).map_err(err)?;
        let cfg = WalkConfig::new(t, 1e-3, Scale::Delta, 100 + k as u64, 40_000).map_err(err)?;
        let est = feynman_kac(g, &x, |_, _| 0.0, bump, &cfg).map_err(err)?;
        let want = heat.values.samples(e)[i];
        let z = ((est.estimate - want).abs() - heat.truncation_bound - heat.quadrature_tol).max(0.0) / est.se.max(1e-300);
        fk_z = fk_z.max(z);
        ensure(z <= 3.0, || format!("configuration {k}: {est:?} vs {want}"))?;
    }

    let (torus, emb) = cubic_torus(3, 3).map_err(err)?;
    let mut mart_z = 0.0f64;
    for scale in [Scale::Half, Scale::Delta] {
        let m = martingale_audit(&torus, &emb, 0, &WalkConfig::new(1.0, 0.01, scale, 4, 20_000).map_err(err)?).map_err(err)?;
        mart_z = mart_z.max(m.max_z);
        ensure(m.passes, || format!("martingale {m:?}"))?;
    }
    Ok(format!("max z: scattering {scat_z:.2}, constant gap {const_gap:.1e}, FK {fk_z:.2}, martingale {mart_z:.2}"))
}

fn grid(tmax: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * tmax / steps as f64).collect()
}

fn pam_moments() -> Outcome {
    let c4 = cycle(4, 1.0).map_err(err)?;
    let ts = grid(2.0, 8);
    let table = lyapunov_table(&c4, &PotentialLaw::uniform(0.0, 2.0).map_err(err)?, &ts, 2, 20, 5).map_err(err)?;
    for k in 0..=4 {
        ensure(table.lambda[2 * k][0].to_bits() == table.lambda[k][1].to_bits(), || format!("doubling fails at t = {}", ts[k]))?;
    }
    let v0 = 0.7;
    let table = lyapunov_table(&c4, &PotentialLaw::constant(v0).map_err(err)?, &ts, 3, 5, 2).map_err(err)?;
    for (i, t) in ts.iter().enumerate() {
        for p in 1..=3 {
            ensure(table.lambda[i][p - 1] == -(p as f64) * v0 * t, || format!("constant law at t = {t}, p = {p}"))?;
        }
    }
    let torus = cycle(16, 1.0).map_err(err)?;
    let table = lyapunov_table(&torus, &PotentialLaw::bernoulli(0.5, 0.0, 1.0).map_err(err)?, &grid(4.0, 8), 3, 200, 7).map_err(err)?;
    let r = intermittency_report(&table).map_err(err)?;
    ensure(r.gap_nondecreasing, || format!("{r:?}"))?;
    Ok(format!("doubling and constant law exact; gap violation {:.1e}, intermittent {}", r.gap_max_violation, r.intermittent))
}

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let path = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let cycle = data("cycle4.json");
    let files = ["sim_{}.json", "tr_{}.csv", "pam_{}.json", "pam_{}.csv"];
    for (tag, workers) in [("a", "1"), ("b", "2"), ("c", "1")] {
        let runs: [Vec<String>; 2] = [
            ["simulate", "--graph", &cycle, "--start", "e2:0.4", "--t", "0.3", "--n", "3000", "--seed", "21", "--observable", "bump:e2:0.5:0.3"]
                .iter()
                .map(|s| s.to_string())
                .chain(["--out".into(), path(&format!("sim_{tag}.json")), "--trajectory".into(), path(&format!("tr_{tag}.csv"))])
                .collect(),
            ["pam", "--graph", &cycle, "--law", "uniform:0:1", "--tmax", "2", "--tsteps", "4", "--realizations", "8", "--seed", "3"]
                .iter()
                .map(|s| s.to_string())
                .chain(["--out".into(), path(&format!("pam_{tag}.json")), "--csv".into(), path(&format!("pam_{tag}.csv"))])
                .collect(),
        ];
        for args in &runs {
            let out = Command::new(env!("CARGO_BIN_EXE_mgkernel")).env("MGKERNEL_WORKERS", workers).args(args).output().map_err(err)?;
            ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
        }
    }
    for f in &files {
        let read = |t: &str| std::fs::read(path(&f.replace("{}", t))).unwrap_or_default();
        let a = read("a");
        ensure(!a.is_empty() && a == read("b") && a == read("c"), || format!("{f} differs between runs"))?;
    }
    let out = Command::new(env!("CARGO_BIN_EXE_mgkernel")).args(["verify", "--graph", &cycle]).output().map_err(err)?;
    ensure(out.status.code() == Some(0), || format!("verify exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    Ok(format!("{} outputs identical over 3 runs, verify exits 0", files.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 12] = [
        ("transfer identities", 10, transfer_identities),
        ("line reduction", 5, line_reduction),
        ("star closed form", 30, star_closed_form),
        ("mass and symmetry", 60, mass_and_symmetry),
        ("Chapman-Kolmogorov", 60, chapman_kolmogorov),
        ("oracle equivalence", 60, oracle_equivalence),
        ("spectral reduction", 30, spectral_reduction),
        ("tree band", 10, tree_band),
        ("ultracontractivity exponents", 120, ultracontractivity),
        ("stochastic validation", 300, stochastic_validation),
        ("PAM moments", 600, pam_moments),
        ("CLI determinism", 120, cli_determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !only.is_empty() && !only.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > Duration::from_secs(*budget) => Err(format!("{msg}; over the {budget} s budget")),
            o => o,
        };
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("{tag} {k:>2} {name}: {msg} [{:.1} s]", took.as_secs_f64());
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
