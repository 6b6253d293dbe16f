use mgkernel::edgefn::{EdgeFunction, VertexField};
use mgkernel::graph::{cycle, homogeneous_tree, line_segment, EdgeSpec, MetricGraph};
use mgkernel::oracle::{fd_assemble, fd_resolvent};
use mgkernel::spectral::*;
use mgkernel::Error;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::f64::consts::PI;

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

fn five_edge_graph() -> MetricGraph {
    let vs = ["a", "b", "c", "d"].map(String::from).to_vec();
    let es = vec![
        EdgeSpec::new("e0", "a", "b", 1.0, 1.0),
        EdgeSpec::new("e1", "b", "c", 1.0, 2.0),
        EdgeSpec::new("e2", "c", "d", 1.0, 0.5),
        EdgeSpec::new("e3", "d", "a", 1.0, 1.5),
        EdgeSpec::new("e4", "a", "c", 1.0, 1.0),
    ];
    MetricGraph::new(vs, es).unwrap()
}

#[test]
fn free_pair_at_the_first_dirichlet_point() {
    let p = fundamental_pair(&EdgePotential::zero(), re(PI * PI), 1.0);
    assert!((p.c1 - re(-1.0)).norm() < 1e-14);
    assert!(p.s1.norm() < 1e-15);
    assert!((p.discriminant() - re(-1.0)).norm() < 1e-14);
}

#[test]
fn free_pair_at_zero_is_linear() {
    let p = fundamental_pair(&EdgePotential::zero(), re(0.0), 1.0);
    let v = p.eval(&[0.3, 1.0]);
    assert_eq!(v[0][0], re(1.0));
    assert!((v[0][2] - re(0.3)).norm() < 1e-16);
    assert!((p.wronskian() - re(1.0)).norm() < 1e-15);
}

#[test]
fn discriminant_closed_forms() {
    let z = EdgePotential::zero();
    assert!(floquet_discriminant(&z, re(PI * PI / 4.0), 1.0).norm() < 1e-15);
    assert!((floquet_discriminant(&z, re(4.0 * PI * PI), 1.0) - re(1.0)).norm() < 1e-14);
}

#[test]
fn integrator_reproduces_the_shift_identity() {
    let v0 = 1.7;
    // a constant potential passed as a function goes through the integrator
    let integrated = EdgePotential::function(move |_| v0, v0).unwrap();
    for lam in [re(-5.0), re(0.3), re(7.1), C::new(20.0, -3.0)] {
        let a = fundamental_pair(&integrated, lam, 1.0);
        let b = fundamental_pair(&EdgePotential::zero(), lam - v0, 1.0);
        assert!((a.c1 - b.c1).norm() < 1e-10 && (a.s1 - b.s1).norm() < 1e-10);
        assert!((a.c1_prime - b.c1_prime).norm() < 1e-10 && (a.s1_prime - b.s1_prime).norm() < 1e-10);
        let d = floquet_discriminant(&integrated, lam, 1.0);
        assert!((d - (lam - v0).sqrt().cos()).norm() < 1e-10);
    }
}

#[test]
fn cycle_p_is_a_circulant() {
    for n in [3usize, 4, 7] {
        let g = cycle(n, 1.0).unwrap();
        let mut got: Vec<f64> = p_spectrum(&g).unwrap().iter().flat_map(|c| vec![c.mu; c.multiplicity()]).collect();
        let mut want: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn m_annihilates_constants_near_four_pi_squared() {
    // 4 pi^2 itself is a Dirichlet point; M 1 vanishes linearly on approach
    let g = five_edge_graph();
    let ones = nalgebra::DVector::from_element(4, re(1.0));
    let at = |d: f64| {
        let m = vertex_condition_operator(&g, &EdgePotential::zero(), re(4.0 * PI * PI * (1.0 + d))).unwrap();
        (m * &ones).norm()
    };
    let (a, b) = (at(1e-4), at(1e-6));
    assert!(b < 1e-4 && b < 2e-2 * a, "{a} {b}");
}

#[test]
fn m_refuses_dirichlet_points() {
    let g = cycle(4, 1.0).unwrap();
    let err = vertex_condition_operator(&g, &EdgePotential::zero(), re(PI * PI)).unwrap_err();
    assert!(matches!(err, Error::NearDirichlet { .. }));
}

#[test]
fn m_on_the_cycle_is_singular_at_band_points() {
    let g = cycle(4, 1.0).unwrap();
    let smallest_sv = |lam: f64| {
        let m = vertex_condition_operator(&g, &EdgePotential::zero(), re(lam)).unwrap();
        m.svd(false, false).singular_values.min()
    };
    // cos sqrt(lambda) = 0 is on the spectrum, cos sqrt(lambda) = 0.5 is not
    assert!(smallest_sv(PI * PI / 4.0) < 1e-12);
    assert!(smallest_sv((PI / 3.0).powi(2)) > 1e-3);
}

#[test]
fn dtn_limits_and_symmetry() {
    let m = dtn_map(&EdgePotential::zero(), re(1e-12), 1.0).unwrap();
    let want = [[-1.0, 1.0], [1.0, -1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((m[i][j] - re(want[i][j])).norm() < 1e-10);
        }
    }
    let m = dtn_map(&EdgePotential::zero(), C::new(3.0, 1.0), 1.0).unwrap();
    assert_eq!(m[0][1], m[1][0]);
}

#[test]
fn dtn_matches_gamma_derivatives() {
    let g = line_segment(1, 1.0).unwrap();
    let lam = C::new(5.0, 0.5);
    let z = VertexField::new(vec![C::new(0.7, 0.1), C::new(-0.3, 0.4)]);
    let psi = gamma_field(&g, &EdgePotential::zero(), lam, &z, 4096.0).unwrap();
    let s = psi.samples(0);
    let h = psi.spacing(0);
    let n = s.len() - 1;
    let d0 = (s[0] * -25.0 + s[1] * 48.0 + s[2] * -36.0 + s[3] * 16.0 + s[4] * -3.0) / (12.0 * h);
    let d1 = (s[n] * -25.0 + s[n - 1] * 48.0 + s[n - 2] * -36.0 + s[n - 3] * 16.0 + s[n - 4] * -3.0) / (12.0 * h);
    let m = dtn_map(&EdgePotential::zero(), lam, 1.0).unwrap();
    let (a, b) = (z.values[0], z.values[1]);
    assert!((d0 - (m[0][0] * a + m[0][1] * b)).norm() < 1e-8);
    assert!((d1 - (m[1][0] * a + m[1][1] * b)).norm() < 1e-8);
}

#[test]
fn gamma_of_constants_is_a_cosine() {
    let g = five_edge_graph();
    let z = VertexField::new(vec![re(1.0); 4]);
    let psi = gamma_field(&g, &EdgePotential::zero(), re(4.0 * PI * PI * (1.0 + 1e-8)), &z, 64.0).unwrap();
    for e in 0..5 {
        for k in 0..=psi.intervals(e) {
            let x = psi.node(e, k);
            assert!((psi.samples(e)[k] - re((2.0 * PI * x).cos())).norm() < 1e-6);
        }
    }
}

#[test]
fn gamma_reproduces_vertex_values() {
    let g = five_edge_graph();
    let z = VertexField::new(vec![re(0.3), C::new(-1.0, 0.2), re(2.0), re(0.0)]);
    let psi = gamma_field(&g, &EdgePotential::constant(0.4).unwrap(), C::new(-2.0, 1.0), &z, 32.0).unwrap();
    for (e, edge) in g.edges().iter().enumerate() {
        let s = psi.samples(e);
        assert!((s[0] - z.values[edge.source]).norm() < 1e-12);
        assert!((s[s.len() - 1] - z.values[edge.target]).norm() < 1e-12);
    }
}

#[test]
fn mu_is_the_adjoint_of_gamma() {
    let g = five_edge_graph();
    let lam = C::new(3.0, 2.0);
    let v = EdgePotential::constant(0.5).unwrap();
    let z = VertexField::new(vec![C::new(1.0, -0.5), re(0.2), C::new(0.0, 1.0), re(-0.7)]);
    let u = EdgeFunction::<C>::from_fn(&g, 256.0, |e, x| C::new((x * (e + 1) as f64).sin(), x * x - 0.3));
    let gz = gamma_field(&g, &v, lam, &z, 256.0).unwrap();
    let lhs = gz.zip_with(&u, |a, b| a * b.conj()).integrate(&g);
    let mu = mu_map(&g, &v, lam.conj(), &u).unwrap();
    let rhs: C = (0..4).map(|k| z.values[k] * mu.values[k].conj() * g.vertex_conductivity(k)).sum();
    assert!((lhs - rhs).norm() < 1e-8, "{lhs} {rhs}");
}

#[test]
fn four_cycle_spectrum_below_fifty() {
    let g = cycle(4, 1.0).unwrap();
    let r = eigenvalues_via_reduction(&g, &EdgePotential::zero(), (0.0, 50.0)).unwrap();
    let mut all: Vec<f64> = r.eigenvalues.iter().map(|e| e.lambda).collect();
    all.extend(&r.dirichlet);
    all.sort_by(f64::total_cmp);
    let want: Vec<f64> = (0..=4).map(|k| (PI * k as f64 / 2.0).powi(2)).collect();
    assert_eq!(all.len(), want.len(), "{all:?}");
    for (a, b) in all.iter().zip(&want) {
        assert!((a - b).abs() < 1e-8);
    }
    let quarter = r.eigenvalues.iter().find(|e| (e.lambda - PI * PI / 4.0).abs() < 1e-6).unwrap();
    assert_eq!(quarter.multiplicity, 2);
    assert!(r.eigenvalues.iter().all(|e| e.kirchhoff_residual < 1e-6));
    assert_eq!(r.flagged.len(), r.dirichlet.len());
}

#[test]
fn neumann_interval() {
    let g = line_segment(1, 1.0).unwrap();
    let r = eigenvalues_via_reduction(&g, &EdgePotential::zero(), (0.0, 100.0)).unwrap();
    assert_eq!(r.eigenvalues.len(), 1);
    assert!(r.eigenvalues[0].lambda.abs() < 1e-10);
    let want = [PI * PI, 4.0 * PI * PI, 9.0 * PI * PI];
    assert_eq!(r.dirichlet.len(), 3);
    for (a, b) in r.dirichlet.iter().zip(want) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn constant_potential_shifts_the_spectrum() {
    let g = five_edge_graph();
    let v0 = 2.5;
    let a = eigenvalues_via_reduction(&g, &EdgePotential::zero(), (0.0, 60.0)).unwrap();
    let b = eigenvalues_via_reduction(&g, &EdgePotential::constant(v0).unwrap(), (v0, 60.0 + v0)).unwrap();
    assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x.lambda + v0 - y.lambda).abs() < 1e-8);
        assert_eq!(x.multiplicity, y.multiplicity);
    }
}

#[test]
fn asymmetric_potentials_are_refused() {
    let g = cycle(3, 1.0).unwrap();
    let v = EdgePotential::function(|s| s, 1.0).unwrap();
    assert!(matches!(eigenvalues_via_reduction(&g, &v, (0.0, 10.0)), Err(Error::Unsupported(_))));
}

#[test]
fn non_equilateral_graphs_are_refused() {
    let vs = ["a", "b"].map(String::from).to_vec();
    let g = MetricGraph::new(vs, vec![EdgeSpec::new("e", "a", "b", 1.0, 1.0), EdgeSpec::new("f", "a", "b", 2.0, 1.0)])
        .unwrap();
    assert!(matches!(build_p(&g), Err(Error::Unsupported(_))));
}

#[test]
fn tree_interior_block_sits_in_the_band() {
    let (g, interior) = homogeneous_tree(3, 6, 1.0).unwrap();
    let edge = 2.0 * 2f64.sqrt() / 3.0;
    for mu in p_block_eigenvalues(&g, &interior).unwrap() {
        assert!(mu.abs() <= edge + 1e-9, "{mu}");
    }
}

#[test]
fn resolvent_of_constants() {
    let g = five_edge_graph();
    let one = EdgeFunction::<C>::constant(&g, 64.0, re(1.0));
    let r = krein_resolvent(&g, &EdgePotential::zero(), re(-1.0), &one).unwrap();
    assert!(r.u.all_samples().iter().flatten().all(|v| (v - re(1.0)).norm() < 1e-10));
}

#[test]
fn resolvent_residual_on_five_edges() {
    let g = five_edge_graph();
    let rhs = EdgeFunction::<C>::from_fn(&g, 256.0, |e, x| {
        re((PI * x * (e + 1) as f64).cos() + 0.5 * (3.0 * x).sin() - x * x)
    });
    let r = krein_resolvent(&g, &EdgePotential::zero(), re(-2.0), &rhs).unwrap();
    assert!(r.residual <= 1e-8, "{}", r.residual);
}

#[test]
fn resolvent_agrees_with_finite_differences() {
    let g = cycle(4, 1.0).unwrap();
    let rhs = EdgeFunction::<C>::from_fn(&g, 400.0, |e, x| re(1.0 + (PI * x).sin() * (e as f64 - 1.5)));
    let op = fd_assemble(&g, |_, _| 0.0, 1.0 / 200.0).unwrap();
    for z in [re(-1.0), C::new(-2.0, 0.5)] {
        let k = krein_resolvent(&g, &EdgePotential::zero(), z, &rhs).unwrap();
        let fd = fd_resolvent(&g, &op, z, &rhs).unwrap();
        let diff = k.u.restrict(&fd.interval_counts()).relative_l2_diff(&fd, &g);
        assert!(diff <= 1e-4, "{diff}");
        assert!(k.residual <= 1e-8, "{}", k.residual);
    }
}

#[test]
fn resolvent_refuses_eigenvalues() {
    let g = cycle(4, 1.0).unwrap();
    let rhs = EdgeFunction::<C>::constant(&g, 64.0, re(1.0));
    let err = krein_resolvent(&g, &EdgePotential::zero(), re(PI * PI / 4.0), &rhs).unwrap_err();
    assert!(matches!(err, Error::SingularVertexSystem { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wronskian_is_one(vals in proptest::collection::vec(-3.0f64..3.0, 2..9), li in 0usize..4) {
        let lam = [-5.0, -1.0, 0.3, 7.1][li];
        let v = EdgePotential::sampled(vals).unwrap();
        let p = fundamental_pair(&v, re(lam), 1.0);
        let xs: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        for y in p.eval(&xs) {
            prop_assert!((y[3] * y[0] - y[2] * y[1] - re(1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn p_is_stochastic_and_weighted_symmetric(c in proptest::collection::vec(0.2f64..5.0, 5)) {
        let vs = ["a", "b", "c", "d"].map(String::from).to_vec();
        let pairs = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("a", "c")];
        let es = pairs.iter().zip(&c).enumerate()
            .map(|(i, ((s, t), &w))| EdgeSpec::new(format!("e{i}"), *s, *t, 1.0, w)).collect();
        let g = MetricGraph::new(vs, es).unwrap();
        let p = build_p(&g).unwrap();
        for i in 0..4 {
            prop_assert!((p.row(i).sum() - 1.0).abs() < 1e-14);
        }
        let cv = DMatrix::from_fn(4, 4, |i, j| if i == j { g.vertex_conductivity(i) } else { 0.0 });
        let w = &cv * &p;
        prop_assert!((&w - w.transpose()).abs().max() < 1e-14);
    }
}
