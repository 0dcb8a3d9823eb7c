mod common;

use alloy_lab::model::{
    assemble_alloy_potential, cell_coordinate, check_reflection_symmetry, constant_config, periodize_config,
    reflection_deviation, sample_disorder, tabulate_cell,
};
use alloy_lab::operator::discretize;
use alloy_lab::eigen::{dense_eigenvalues, lowest_eigenpairs};
use alloy_lab::profiles::{cosine_well, sign_changing};
use alloy_lab::single_site::{box_ground_energy, ground_energy};
use alloy_lab::{BoxSpec, Boundary, DisorderConfig, DisorderLaw, Error, SparseSymmetric, UnitCellPotential};
use common::*;
use proptest::prelude::*;

fn free(bx: &BoxSpec) -> SparseSymmetric {
    discretize(bx, &vec![0.0; bx.order()]).unwrap()
}

#[test]
fn constant_configs() {
    let bx = BoxSpec::centered(1, 1, 4, Boundary::Neumann).unwrap();
    assert_eq!(constant_config(&bx, 0.0).values, vec![0.0; 3]);
    let bx = BoxSpec::centered(2, 0, 4, Boundary::Neumann).unwrap();
    assert_eq!(constant_config(&bx, -0.25).values, vec![-0.25]);
}

#[test]
fn constant_edge_box_matches_single_cell() {
    let v = sign_changing(1, 8, 6.0, 0.45, 0.2).unwrap();
    for c in [-1.0, 0.5, 2.0] {
        let cell = ground_energy(&v, c).unwrap().energy;
        let bx = BoxSpec::centered(1, 3, 8, Boundary::Neumann).unwrap();
        let boxed = box_ground_energy(&v, &constant_config(&bx, c)).unwrap();
        assert!((cell - boxed).abs() < 1e-9, "c={c}: {cell} vs {boxed}");
    }
}

#[test]
fn assembly_trivial_cases() {
    let v = cosine_well(2, 5, 2.0, 0.4).unwrap();
    let bx = BoxSpec::centered(2, 2, 5, Boundary::Dirichlet).unwrap();
    let zero = assemble_alloy_potential(&constant_config(&bx, 0.0), &v).unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));
    let one = BoxSpec::unit_cell(2, 5, Boundary::Neumann).unwrap();
    assert_eq!(assemble_alloy_potential(&constant_config(&one, 1.0), &v).unwrap(), v.values());
}

#[test]
fn assembly_matches_pointwise_loop() {
    let n = 6;
    let v = cosine_well(1, n, 1.5, 0.45).unwrap();
    let bx = BoxSpec::centered(1, 1, n, Boundary::Neumann).unwrap();
    let cfg = DisorderConfig::from_values(bx, vec![2.0, 0.0, 1.0]).unwrap();
    let got = assemble_alloy_potential(&cfg, &v).unwrap();
    // node i sits at x = -3/2 + (i + 1/2)/n; its cell is the nearest integer
    for (i, g) in got.iter().enumerate() {
        let x = -1.5 + (i as f64 + 0.5) / n as f64;
        let cell = x.round();
        let local = ((x - cell) * n as f64 + (n as f64 - 1.0) / 2.0).round() as usize;
        let w = [2.0, 0.0, 1.0][(cell + 1.0) as usize];
        assert_eq!(*g, w * v.values()[local], "node {i}");
    }
}

#[test]
fn mesh_mismatch_is_rejected() {
    let v = cosine_well(1, 6, 1.0, 0.4).unwrap();
    let bx = BoxSpec::centered(1, 1, 8, Boundary::Neumann).unwrap();
    let err = assemble_alloy_potential(&constant_config(&bx, 1.0), &v).unwrap_err();
    assert!(matches!(err, Error::MeshMismatch { .. }));
}

#[test]
fn sampling_examples() {
    let bx = BoxSpec::centered(2, 4, 3, Boundary::Neumann).unwrap();
    let deg = sample_disorder(&DisorderLaw::degenerate(0.7), &bx, 5);
    assert!(deg.values.iter().all(|&w| w == 0.7));
    let law = DisorderLaw::bernoulli(0.0, 1.0, 0.5).unwrap();
    assert_eq!(sample_disorder(&law, &bx, 9), sample_disorder(&law, &bx, 9));
    assert!(sample_disorder(&law, &bx, 9).in_support());
    // 4σ band on the mean of 10^4 uniform draws
    let bx = BoxSpec::with_cells(1, 10_000, 3, Boundary::Neumann).unwrap();
    let cfg = sample_disorder(&DisorderLaw::uniform(-1.0, 3.0).unwrap(), &bx, 77);
    let mean = cfg.values.iter().sum::<f64>() / 1e4;
    let sigma = 4.0 / 12f64.sqrt() / 100.0;
    assert!((mean - 1.0).abs() < 4.0 * sigma, "{mean}");
}

#[test]
fn site_values_do_not_depend_on_box_size() {
    let law = DisorderLaw::uniform(0.0, 1.0).unwrap();
    let small = sample_disorder(&law, &BoxSpec::centered(2, 1, 3, Boundary::Neumann).unwrap(), 4);
    let big = sample_disorder(&law, &BoxSpec::centered(2, 3, 3, Boundary::Neumann).unwrap(), 4);
    // centre 3x3 block of the 7x7 box
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(small.values[i * 3 + j], big.values[(i + 2) * 7 + j + 2]);
        }
    }
}

#[test]
fn periodize_examples() {
    let one = BoxSpec::with_cells(2, 1, 4, Boundary::Periodic).unwrap();
    let p = periodize_config(&constant_config(&one, 0.3), 3).unwrap();
    assert_eq!(p.values, vec![0.3; 9]);
    let two = BoxSpec::with_cells(1, 2, 4, Boundary::Periodic).unwrap();
    let core = DisorderConfig::from_values(two, vec![-1.0, 2.0]).unwrap();
    assert_eq!(periodize_config(&core, 2).unwrap().values, vec![-1.0, 2.0, -1.0, 2.0]);
    assert!(periodize_config(&core, 0).is_err());
}

#[test]
fn periodized_ground_energy_is_copy_invariant() {
    // At θ = 0 a periodic ground state tiles: enlarging by copies cannot
    // lower the bottom, and the tiled state keeps it.
    let v = sign_changing(1, 8, 5.0, 0.45, 0.3).unwrap();
    let core_box = BoxSpec::with_cells(1, 3, 8, Boundary::Periodic).unwrap();
    let core = DisorderConfig::from_values(core_box, vec![0.0, 1.0, 0.4]).unwrap();
    let mut energies = Vec::new();
    for copies in 1..=4 {
        let cfg = periodize_config(&core, copies).unwrap();
        let pot = assemble_alloy_potential(&cfg, &v).unwrap();
        let a = discretize(&cfg.box_spec, &pot).unwrap();
        energies.push(lowest_eigenpairs(&a, 1, 1e-12, 100_000).unwrap().eigenvalues[0]);
    }
    for e in &energies[1..] {
        assert!((e - energies[0]).abs() < 1e-9, "{energies:?}");
    }
}

#[test]
fn reflection_checks() {
    let even = UnitCellPotential::tabulate(1, 9, |x| (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
    assert!(check_reflection_symmetry(&even, 1e-12).0);
    let n = 8;
    let odd = tabulate_cell(1, n, |x| x[0]);
    let max_x = (0..n).map(|k| cell_coordinate(k, n).abs()).fold(0.0, f64::max);
    assert!((reflection_deviation(1, n, &odd) - 2.0 * max_x).abs() < 1e-15);
    let odd = UnitCellPotential::from_values(1, n, odd).unwrap();
    let (ok, dev) = check_reflection_symmetry(&odd, 1e-12);
    let interior = cell_coordinate(n - 2, n);
    assert!(!ok);
    assert!((dev - 2.0 * interior).abs() < 1e-15);
}

#[test]
fn neumann_closed_forms() {
    // two cells of three nodes: a 6-node chain
    let bx = BoxSpec::with_cells(1, 2, 3, Boundary::Neumann).unwrap();
    let a = free(&bx);
    let dense = a.to_dense();
    for i in 0..6 {
        assert_eq!(dense[i * 6..i * 6 + 6].iter().sum::<f64>(), 0.0);
    }
    let ev = dense_eigenvalues(&a).unwrap();
    for (got, want) in ev.iter().zip(neumann_chain(6, bx.h())) {
        assert!(rel_close(*got, want, 1e-12), "{got} {want}");
    }
    let r = lowest_eigenpairs(&a, 1, 1e-12, 1000).unwrap();
    assert!(r.eigenvalues[0].abs() < 1e-12);
    let v = &r.eigenvectors[0];
    assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-10));
}

#[test]
fn dirichlet_closed_form() {
    for (l, n) in [(0, 5), (2, 4), (10, 6)] {
        let bx = BoxSpec::centered(1, l, n, Boundary::Dirichlet).unwrap();
        let ev = dense_eigenvalues(&free(&bx)).unwrap();
        let m = bx.points_per_side();
        for (got, want) in ev.iter().zip(dirichlet_chain(m, bx.h())) {
            assert!(rel_close(*got, want, 1e-9), "{got} {want}");
        }
    }
}

#[test]
fn periodic_tensor_sum() {
    let bx = BoxSpec::centered(2, 1, 4, Boundary::Periodic).unwrap();
    let ev = dense_eigenvalues(&free(&bx)).unwrap();
    let want = tensor_sum(&periodic_ring(12, bx.h()), 2);
    assert_eq!(ev.len(), want.len());
    for (got, want) in ev.iter().zip(&want) {
        assert!(rel_close(*got, *want, 1e-9), "{got} {want}");
    }
}

#[test]
fn dirichlet_dominates_neumann() {
    let v = sign_changing(2, 6, 4.0, 0.45, 0.3).unwrap();
    let law = DisorderLaw::uniform(0.0, 1.0).unwrap();
    let bx = BoxSpec::centered(2, 1, 6, Boundary::Neumann).unwrap();
    let cfg = sample_disorder(&law, &bx, 3);
    let pot = assemble_alloy_potential(&cfg, &v).unwrap();
    let neu = lowest_eigenpairs(&discretize(&bx, &pot).unwrap(), 10, 1e-12, 100_000).unwrap();
    let dir_box = bx.with_boundary(Boundary::Dirichlet);
    let dir = lowest_eigenpairs(&discretize(&dir_box, &pot).unwrap(), 10, 1e-12, 100_000).unwrap();
    for k in 0..10 {
        assert!(dir.eigenvalues[k] >= neu.eigenvalues[k] - 1e-10, "k={k}");
    }
}

#[test]
fn gershgorin_contains_spectrum() {
    let v = sign_changing(2, 6, 7.0, 0.45, 0.3).unwrap();
    let bx = BoxSpec::centered(2, 1, 6, Boundary::Neumann).unwrap();
    let cfg = sample_disorder(&DisorderLaw::uniform(-1.0, 1.0).unwrap(), &bx, 8);
    let pot = assemble_alloy_potential(&cfg, &v).unwrap();
    let a = discretize(&bx, &pot).unwrap();
    let ev = dense_eigenvalues(&a).unwrap();
    let (lo, hi) = a.gershgorin();
    let vmin = pot.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = pot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inv_h2 = 36.0;
    assert!(lo >= vmin - 1e-12 && hi <= vmax + 8.0 * inv_h2 + 1e-12);
    assert!(ev[0] >= lo && *ev.last().unwrap() <= hi);
}

#[test]
fn dense_apply_agrees() {
    let dense = random_dense(50, 11);
    let a = SparseSymmetric::from_dense(50, &dense).unwrap();
    let mut r = rng(12);
    let x: Vec<f64> = (0..50).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
    let want = dense_apply(50, &dense, &x);
    let got = a.apply(&x).unwrap();
    let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err = got.iter().zip(&want).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 1e-13 * norm);
}

#[test]
fn coordinate_dump() {
    let a = SparseSymmetric::from_tridiagonal(vec![2.0, 2.0], &[-1.0]).unwrap();
    let mut buf = Vec::new();
    a.write_coordinate(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().count() >= 3);
}

fn small_box() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=2, 0usize..=2, 3usize..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembly_is_linear((dim, l, n) in small_box(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let v = cosine_well(dim, n, 1.3, 0.45).unwrap();
        let bx = BoxSpec::centered(dim, l, n, Boundary::Neumann).unwrap();
        let law = DisorderLaw::uniform(-2.0, 2.0).unwrap();
        let c1 = sample_disorder(&law, &bx, s1);
        let c2 = sample_disorder(&law, &bx, s2);
        let sum = DisorderConfig::from_values(bx, c1.values.iter().zip(&c2.values).map(|(x, y)| x + y).collect()).unwrap();
        let p1 = assemble_alloy_potential(&c1, &v).unwrap();
        let p2 = assemble_alloy_potential(&c2, &v).unwrap();
        let ps = assemble_alloy_potential(&sum, &v).unwrap();
        for i in 0..ps.len() {
            prop_assert!((ps[i] - (p1[i] + p2[i])).abs() <= 1e-14 * ps[i].abs().max(1e-300));
        }
    }

    #[test]
    fn periodic_translation_covariance(cells in 2usize..6, n in 3usize..6, seed in any::<u64>()) {
        let v = sign_changing(1, n.max(4) * 2, 3.0, 0.45, 0.3).unwrap();
        let n = v.n();
        let bx = BoxSpec::with_cells(1, cells, n, Boundary::Periodic).unwrap();
        let cfg = sample_disorder(&DisorderLaw::uniform(0.0, 1.0).unwrap(), &bx, seed);
        let mut shifted = cfg.values.clone();
        shifted.rotate_right(1);
        let moved = DisorderConfig::from_values(bx, shifted).unwrap();
        let mut want = assemble_alloy_potential(&cfg, &v).unwrap();
        want.rotate_right(n);
        prop_assert_eq!(assemble_alloy_potential(&moved, &v).unwrap(), want);
    }

    #[test]
    fn apply_is_symmetric((dim, l, n) in small_box(), bc in 0usize..3, seed in any::<u64>()) {
        let boundary = [Boundary::Neumann, Boundary::Dirichlet, Boundary::Periodic][bc];
        let bx = BoxSpec::centered(dim, l, n, boundary).unwrap();
        let mut r = rng(seed);
        let pot: Vec<f64> = (0..bx.order()).map(|_| rand::Rng::random_range(&mut r, -5.0..5.0)).collect();
        let a = discretize(&bx, &pot).unwrap();
        let x: Vec<f64> = (0..bx.order()).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
        let y: Vec<f64> = (0..bx.order()).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
        let ax = a.apply(&x).unwrap();
        let ay = a.apply(&y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(&ay).map(|(p, q)| p * q).sum();
        let scale: f64 = ax.iter().zip(&y).map(|(p, q)| (p * q).abs()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn neumann_annihilates_constants((dim, l, n) in small_box()) {
        let bx = BoxSpec::centered(dim, l, n, Boundary::Neumann).unwrap();
        let y = free(&bx).apply(&vec![1.0; bx.order()]).unwrap();
        prop_assert!(y.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let law = DisorderLaw::bernoulli(-1.0, 2.0, p).unwrap();
        let bx = BoxSpec::centered(2, 2, 3, Boundary::Neumann).unwrap();
        let a = sample_disorder(&law, &bx, seed);
        let b = sample_disorder(&law, &bx, seed);
        prop_assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                        b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}
