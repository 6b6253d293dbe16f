use mgkernel::edgefn::EdgeFunction;
use mgkernel::graph::{cubic_torus, cycle, line_segment, star, GraphPoint};
use mgkernel::kernel::{kernel_eval, semigroup_apply, GraphKernelRequest, SemigroupKind, Targets};
use mgkernel::profile::KernelProfile;
use mgkernel::quad::integrate;
use mgkernel::stochastic::*;
use mgkernel::Error;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn line_marginal_is_gaussian() {
    let g = line_segment(1, 40.0).unwrap();
    let x = GraphPoint::new(&g, 0, 20.0).unwrap();
    let cfg = WalkConfig::new(1.0, 0.01, Scale::Half, 7, 100_000).unwrap();
    let mut xs: Vec<f64> = endpoints(&g, &x, &cfg).unwrap().iter().map(|p| p.xi - 20.0).collect();
    xs.sort_by(f64::total_cmp);
    let law = Normal::new(0.0, 1.0).unwrap();
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = law.cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, xs.len());
    assert!(p > 0.01, "KS D = {d}, p = {p}");
}

#[test]
fn scattering_follows_conductivities() {
    let g = star(&[1.0, 2.0, 3.0], 10.0).unwrap();
    let cfg = WalkConfig::new(0.5, 0.01, Scale::Delta, 11, 100_000).unwrap();
    let r = scattering_frequencies(&g, 0, &cfg).unwrap();
    assert_eq!(r.escaped, 0);
    for k in 0..3 {
        assert!((r.observed[k] - r.expected[k]).abs() <= 3.0 * r.se[k], "{r:?}");
    }
    assert!(r.p_value > 0.01);
}

#[test]
fn occupation_histogram_matches_the_kernel() {
    let g = star(&[1.0; 3], 1.0).unwrap();
    let x = GraphPoint::new(&g, 0, 0.3).unwrap();
    let t = 0.05;
    let cfg = WalkConfig::new(t, 5e-4, Scale::Delta, 3, 100_000).unwrap();
    let ends = endpoints(&g, &x, &cfg).unwrap();
    let bins = 10;
    let mut counts = vec![0usize; 3 * bins];
    for p in &ends {
        counts[p.edge * bins + ((p.xi * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let f = KernelProfile::heat(t).unwrap();
    let k = |e: usize, y: f64| {
        let req = GraphKernelRequest { x, targets: Targets::Points(vec![GraphPoint::new(&g, e, y).unwrap()]), profile: f.clone(), eps: 1e-12 };
        kernel_eval(&g, &req).unwrap().values[0]
    };
    let n = ends.len() as f64;
    let mut chi2 = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let (e, j) = (b / bins, b % bins);
        let lo = j as f64 / bins as f64;
        let p = integrate(|y| k(e, y), lo, lo + 1.0 / bins as f64, 1e-12, 1e-10).0;
        chi2 += (c as f64 - n * p).powi(2) / (n * p);
    }
    let p = 1.0 - ChiSquared::new((3 * bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
}

#[test]
fn constant_potential_gives_exponential_decay() {
    let g = cycle(4, 1.0).unwrap();
    let x = GraphPoint::new(&g, 1, 0.25).unwrap();
    let cfg = WalkConfig::new(0.7, 0.01, Scale::Delta, 1, 2000).unwrap();
    let r = feynman_kac(&g, &x, |_, _| 1.5, |_, _| 1.0, &cfg).unwrap();
    assert!((r.estimate - (-1.5f64 * 0.7).exp()).abs() <= 1e-12, "{r:?}");
}

#[test]
fn feynman_kac_matches_the_semigroup() {
    let g = star(&[1.0, 2.0, 0.5], 1.0).unwrap();
    let bump = |e: usize, x: f64| if e == 1 { (std::f64::consts::PI * x).sin().powi(2) } else { 0.0 };
    let u0 = EdgeFunction::from_fn(&g, 32.0, bump);
    let t = 0.1;
    let heat = semigroup_apply(&g, SemigroupKind::Heat, t, 0.0, &u0, 1e-10).unwrap();
    for (e, k) in [(0, 8), (1, 16), (2, 0)] {
        let x = GraphPoint::new(&g, e, u0.node(e, k)).unwrap();
        let cfg = WalkConfig::new(t, 1e-3, Scale::Delta, 5 + e as u64, 40_000).unwrap();
        let r = feynman_kac(&g, &x, |_, _| 0.0, bump, &cfg).unwrap();
        let want = heat.values.samples(e)[k];
        assert!(r.z_score(want) <= 3.0, "{e}: {r:?} vs {want}");
    }
}

#[test]
fn positive_potential_lowers_the_estimate() {
    let g = cycle(3, 1.0).unwrap();
    let x = GraphPoint::new(&g, 0, 0.5).unwrap();
    let cfg = WalkConfig::new(0.3, 0.01, Scale::Delta, 9, 5000).unwrap();
    let f = |_: usize, y: f64| 1.0 + y;
    let with_v = feynman_kac(&g, &x, |e, y| (e as f64 + y).sin().abs(), f, &cfg).unwrap();
    let without = feynman_kac(&g, &x, |_, _| 0.0, f, &cfg).unwrap();
    assert!(with_v.estimate <= without.estimate);
}

#[test]
fn step_halving_is_within_noise() {
    let g = star(&[1.0; 3], 1.0).unwrap();
    let x = GraphPoint::new(&g, 0, 0.2).unwrap();
    let v = |e: usize, y: f64| e as f64 * y;
    let f = |e: usize, y: f64| if e == 2 { y } else { 0.5 };
    let a = feynman_kac(&g, &x, v, f, &WalkConfig::new(0.2, 4e-3, Scale::Delta, 1, 40_000).unwrap()).unwrap();
    let b = feynman_kac(&g, &x, v, f, &WalkConfig::new(0.2, 2e-3, Scale::Delta, 2, 40_000).unwrap()).unwrap();
    assert!((a.estimate - b.estimate).abs() <= 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt(), "{a:?} {b:?}");
}

#[test]
fn martingale_audit_on_the_lattice() {
    let (g, emb) = cubic_torus(3, 3).unwrap();
    for scale in [Scale::Half, Scale::Delta] {
        let cfg = WalkConfig::new(1.0, 0.01, scale, 4, 20_000).unwrap();
        let r = martingale_audit(&g, &emb, 0, &cfg).unwrap();
        assert!(r.passes, "{r:?}");
        assert_eq!(r.compensator, scale.variance());
    }
    let r = martingale_audit(&g, &emb, 5, &WalkConfig::new(0.0, 0.01, Scale::Half, 4, 100).unwrap()).unwrap();
    assert_eq!(r.compensated.estimate, 0.0);
    assert!(r.displacement.iter().all(|d| d.estimate == 0.0));
}

#[test]
fn martingale_audit_refuses_other_graphs() {
    let (_, emb) = cubic_torus(3, 2).unwrap();
    let g = cycle(9, 1.0).unwrap();
    let cfg = WalkConfig::new(0.1, 0.01, Scale::Half, 1, 10).unwrap();
    assert!(matches!(martingale_audit(&g, &emb, 0, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn heat_envelope_transfers_between_graphs() {
    let a = star(&[1.0, 1.0, 1.0], 2.0).unwrap();
    let b = cycle(5, 1.5).unwrap();
    let ts = [0.02, 0.05, 0.1, 0.2];
    let r = kernel_estimate_audit(&a, &GraphPoint::new(&a, 0, 1.0).unwrap(), &b, &GraphPoint::new(&b, 2, 0.3).unwrap(), &ts, 1, 1e-12).unwrap();
    assert!(r.check_log_excess <= 2f64.ln(), "{r:?}");
    assert!(r.fit.c2 > 0.0);
}

#[test]
fn biharmonic_decay_exponent_beats_linear() {
    let g = line_segment(4, 1.0).unwrap();
    let x = GraphPoint::new(&g, 0, 0.5).unwrap();
    let ts = [0.002, 0.005, 0.01, 0.02];
    let r = kernel_estimate_audit(&g, &x, &g, &x, &ts, 2, 1e-12).unwrap();
    assert!(r.fit.rms_residual < r.linear_fit.rms_residual, "{r:?}");
}

#[test]
fn schrodinger_kernel_is_dominated() {
    let g = star(&[1.0, 2.0, 1.0], 1.0).unwrap();
    let r = schrodinger_bound_audit(&g, |e, x| if e == 1 { 3.0 * x } else { -1.0 }, &[0.01, 0.05, 0.2], 1.0 / 40.0).unwrap();
    assert!(r.max_ratio <= 1.0, "{r:?}");
}

#[test]
fn configuration_is_validated() {
    assert!(WalkConfig::new(-1.0, 0.1, Scale::Half, 0, 1).is_err());
    assert!(WalkConfig::new(1.0, 0.0, Scale::Half, 0, 1).is_err());
    assert!(WalkConfig::new(1.0, 0.1, Scale::Half, 0, 0).is_err());
    assert!(Scale::parse("full").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectories_stay_on_the_graph_and_repeat(seed in 0u64..1000, xi in 0.0f64..1.0, dt in 0.001f64..0.2) {
        let g = star(&[1.0, 3.0, 0.5, 2.0], 1.0).unwrap();
        let g2 = cycle(3, 0.4).unwrap();
        for g in [&g, &g2] {
            let x = GraphPoint::new(g, 0, xi * g.length(0)).unwrap();
            let cfg = WalkConfig::new(1.0, dt, Scale::Delta, seed, 3).unwrap();
            let a: Vec<_> = simulate_bm(g, &x, &cfg).unwrap().collect();
            let b: Vec<_> = simulate_bm(g, &x, &cfg).unwrap().collect();
            for (ta, tb) in a.iter().zip(&b) {
                for (p, q) in ta.points.iter().zip(&tb.points) {
                    prop_assert!(p.edge < g.edge_count());
                    prop_assert!(p.xi >= 0.0 && p.xi <= g.length(p.edge));
                    prop_assert_eq!(p.edge, q.edge);
                    prop_assert_eq!(p.xi.to_bits(), q.xi.to_bits());
                }
            }
        }
    }
}
