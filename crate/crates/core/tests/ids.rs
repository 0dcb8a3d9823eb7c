mod common;

use alloy_lab::eigen::{count_below, lowest_eigenpairs};
use alloy_lab::ids::*;
use alloy_lab::model::{constant_config, sample_disorder};
use alloy_lab::parallel::Execution;
use alloy_lab::profiles::{cosine_well, sign_changing};
use alloy_lab::single_site::spectral_bottom;
use alloy_lab::{BoxSpec, Boundary, DisorderLaw, Error, UnitCellPotential};
use common::*;
use proptest::prelude::*;

fn zero_law() -> DisorderLaw {
    DisorderLaw::uniform(0.0, 1.0).unwrap()
}

#[test]
fn free_curve_matches_closed_form_counts() {
    for (dim, l, n, boundary) in [
        (1, 4, 6, Boundary::Neumann),
        (1, 3, 5, Boundary::Dirichlet),
        (2, 2, 4, Boundary::Neumann),
        (2, 1, 5, Boundary::Dirichlet),
    ] {
        let bx = BoxSpec::centered(dim, l, n, boundary).unwrap();
        let v = UnitCellPotential::zero(dim, n);
        let energies = linear_grid(0.3, 200.0, 37);
        let curve = estimate_ids(&v, &zero_law(), &bx, &energies, 2, 1, Execution::Sequential).unwrap();
        let m = bx.points_per_side();
        let one_d = match boundary {
            Boundary::Neumann => neumann_chain(m, bx.h()),
            _ => dirichlet_chain(m, bx.h()),
        };
        let spectrum = tensor_sum(&one_d, dim);
        for (e, est) in energies.iter().zip(&curve.estimate) {
            assert_eq!(*est, count_le(&spectrum, *e) as f64 / bx.volume(), "{boundary} E={e}");
        }
    }
}

#[test]
fn weyl_law_in_one_dimension() {
    let bx = BoxSpec::centered(1, 100, 10, Boundary::Neumann).unwrap();
    let v = UnitCellPotential::zero(1, 10);
    let energies = linear_grid(2.0, 20.0, 10);
    let curve = estimate_ids(&v, &zero_law(), &bx, &energies, 1, 0, Execution::Sequential).unwrap();
    for (e, n) in energies.iter().zip(&curve.estimate) {
        let weyl = e.sqrt() / std::f64::consts::PI;
        assert!((n - weyl).abs() <= 0.05 * weyl, "E={e}: {n} vs {weyl}");
    }
}

#[test]
fn volume_scaling_of_free_estimates() {
    let energies = linear_grid(2.0, 20.0, 6);
    let v = UnitCellPotential::zero(1, 8);
    let at = |l| {
        let bx = BoxSpec::centered(1, l, 8, Boundary::Neumann).unwrap();
        estimate_ids(&v, &zero_law(), &bx, &energies, 1, 0, Execution::Sequential).unwrap().estimate
    };
    for (a, b) in at(40).iter().zip(at(80)) {
        assert!((a - b).abs() <= 0.05 * b);
    }
}

#[test]
fn saturation_at_the_top() {
    let v = cosine_well(2, 4, 2.0, 0.4).unwrap();
    let bx = BoxSpec::centered(2, 1, 4, Boundary::Neumann).unwrap();
    let curve = estimate_ids(&v, &zero_law(), &bx, &[1e4], 3, 5, Execution::Sequential).unwrap();
    assert_eq!(curve.estimate[0], bx.order() as f64 / bx.volume());
}

#[test]
fn degenerate_law_runs_are_bitwise_identical() {
    let v = sign_changing(1, 8, 5.0, 0.45, 0.3).unwrap();
    let bx = BoxSpec::centered(1, 5, 8, Boundary::Dirichlet).unwrap();
    let energies = linear_grid(-2.0, 30.0, 9);
    let law = DisorderLaw::degenerate(0.5);
    let a = estimate_ids(&v, &law, &bx, &energies, 1, 42, Execution::Sequential).unwrap();
    let b = estimate_ids(&v, &law, &bx, &energies, 1, 42, Execution::Sequential).unwrap();
    assert_eq!(a.counts, b.counts);
    assert_eq!(
        a.estimate.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.estimate.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let v = sign_changing(2, 6, 5.0, 0.45, 0.3).unwrap();
    let bx = BoxSpec::centered(2, 2, 6, Boundary::Neumann).unwrap();
    let energies = linear_grid(-1.0, 20.0, 5);
    let a = estimate_ids(&v, &zero_law(), &bx, &energies, 6, 3, Execution::Sequential).unwrap();
    let b = estimate_ids(&v, &zero_law(), &bx, &energies, 6, 3, Execution::from_workers(3)).unwrap();
    assert_eq!(a.counts, b.counts);
    assert_eq!(format!("{:?}", a.stderr), format!("{:?}", b.stderr));
}

#[test]
fn periodic_boxes_are_refused() {
    let v = cosine_well(1, 6, 1.0, 0.4).unwrap();
    let bx = BoxSpec::centered(1, 2, 6, Boundary::Periodic).unwrap();
    assert!(estimate_ids(&v, &zero_law(), &bx, &[1.0], 1, 0, Execution::Sequential).is_err());
}

#[test]
fn bracket_for_free_operator() {
    let v = UnitCellPotential::zero(1, 6);
    let bx = BoxSpec::centered(1, 5, 6, Boundary::Neumann).unwrap();
    let energies = linear_grid(0.1, 100.0, 40);
    let br = bracket_ids(&v, &zero_law(), &bx, &energies, 1, 0, Execution::Sequential).unwrap();
    assert!(br.ordered());
    for j in 0..energies.len() {
        assert!(br.lower.counts[0][j] <= br.upper.counts[0][j]);
    }
}

#[test]
fn bracket_width_shrinks_with_box() {
    let v = UnitCellPotential::zero(1, 8);
    let energies = [5.0, 10.0];
    let width = |l| {
        let bx = BoxSpec::centered(1, l, 8, Boundary::Neumann).unwrap();
        let br = bracket_ids(&v, &zero_law(), &bx, &energies, 1, 0, Execution::Sequential).unwrap();
        br.upper.estimate[1] - br.lower.estimate[1]
    };
    let (w1, w2) = (width(10), width(20));
    assert!(w2 < w1, "{w1} {w2}");
}

#[test]
fn below_the_edge_both_brackets_vanish() {
    let v = sign_changing(1, 8, 6.0, 0.45, 0.3).unwrap();
    let law = zero_law();
    let sb = spectral_bottom(&v, &law).unwrap();
    let bx = BoxSpec::centered(1, 8, 8, Boundary::Neumann).unwrap();
    let energies = [sb.e_minus - 1.0, sb.e_minus - 1e-6];
    let br = bracket_ids(&v, &law, &bx, &energies, 20, 9, Execution::from_workers(2)).unwrap();
    assert!(br.lower.estimate.iter().chain(&br.upper.estimate).all(|&x| x == 0.0));
}

#[test]
fn comparison_background_has_zero_ground_energy() {
    let v = sign_changing(1, 8, 6.0, 0.45, 0.3).unwrap();
    let o = Oriented::new(&v, 0.0, 1.0).unwrap();
    let bx = BoxSpec::centered(1, 4, 8, Boundary::Neumann).unwrap();
    let omega_a = if o.reflected { -o.a } else { o.a };
    let h = comparison_operator(&o, &constant_config(&bx, omega_a)).unwrap();
    let e0 = lowest_eigenpairs(&h, 1, 1e-12, 100_000).unwrap().eigenvalues[0];
    assert!(e0.abs() < 1e-9, "{e0}");
}

#[test]
fn comparison_counts_are_monotone_in_disorder() {
    let v = sign_changing(1, 8, 6.0, 0.45, 0.3).unwrap();
    let law = zero_law();
    let o = Oriented::new(&v, law.a, law.b).unwrap();
    let bx = BoxSpec::centered(1, 6, 8, Boundary::Neumann).unwrap();
    let omega_a = if o.reflected { -o.a } else { o.a };
    let base = comparison_operator(&o, &constant_config(&bx, omega_a)).unwrap();
    for r in 0..10 {
        let h = comparison_operator(&o, &sample_disorder(&law, &bx, r)).unwrap();
        for e in [0.1, 1.0, 5.0, 40.0] {
            assert!(count_below(&h, e).unwrap() <= count_below(&base, e).unwrap());
        }
    }
}

#[test]
fn degenerate_comparison_is_refused() {
    let v = cosine_well(1, 8, 2.0, 0.4).unwrap();
    assert!(matches!(comparison_constant(&v, 0.5, 0.5), Err(Error::Invalid(_))));
    let (_, van) = alloy_lab::vanhove::vanhove_potential(1, 8, 0.25, 1.0).unwrap();
    assert!(matches!(comparison_constant(&van, 0.0, 1.0), Err(Error::Degenerate { .. })));
}

fn margins_hold(v: &UnitCellPotential, a: f64, b: f64) {
    let k = comparison_constant(v, a, b).unwrap();
    assert!(k.c.is_finite() && k.c >= 1.0);
    for i in 0..10 {
        let t = a + (b - a) * i as f64 / 9.0;
        let m = comparison_margin(v, a, b, k.c, t).unwrap();
        assert!(m >= -1e-8, "t={t}: {m}");
    }
}

#[test]
fn comparison_constant_certificate() {
    margins_hold(&cosine_well(1, 8, 3.0, 0.4).unwrap(), 0.0, 1.0);
    margins_hold(&sign_changing(1, 10, 6.0, 0.45, 0.3).unwrap(), 0.0, 1.0);
    margins_hold(&sign_changing(2, 8, 5.0, 0.45, -0.3).unwrap(), -0.5, 1.5);
}

#[test]
fn comparison_certificate_survives_rescaling() {
    let v = sign_changing(1, 10, 6.0, 0.45, 0.3).unwrap();
    margins_hold(&v, 0.0, 2.0);
    margins_hold(&v.scaled(2.0), 0.0, 1.0);
}

#[test]
fn comparison_inequality_per_realization() {
    let v = sign_changing(1, 8, 6.0, 0.45, 0.3).unwrap();
    let law = zero_law();
    let bx = BoxSpec::centered(1, 6, 8, Boundary::Neumann).unwrap();
    let sb = spectral_bottom(&v, &law).unwrap();
    let energies = geometric_grid(sb.e_minus, 0.01, 30.0, 12);
    let check = comparison_check(&v, &law, &bx, &energies, 10, 4, Execution::from_workers(2)).unwrap();
    assert!(check.holds(), "{:?}", check.violations);
}

#[test]
fn csv_round_trip() {
    let v = cosine_well(1, 6, 2.0, 0.4).unwrap();
    let bx = BoxSpec::centered(1, 3, 6, Boundary::Neumann).unwrap();
    let curve = estimate_ids(&v, &zero_law(), &bx, &linear_grid(0.5, 9.0, 5), 4, 1, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("E,estimate,stderr,R,L,n,d,boundary\n"));
    let back = CurveData::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, CurveData::from_curve(&curve));
}

#[test]
fn grids() {
    assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    let g = geometric_grid(-1.0, 0.01, 1.0, 3);
    assert!((g[0] + 0.99).abs() < 1e-15 && (g[1] + 0.9).abs() < 1e-12 && g[2].abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn counts_nondecreasing_and_bracketed(seed in any::<u64>(), l in 1usize..6, amp in 1.0f64..8.0) {
        let v = sign_changing(1, 8, amp, 0.45, 0.3).unwrap();
        let bx = BoxSpec::centered(1, l, 8, Boundary::Neumann).unwrap();
        let energies = linear_grid(-3.0, 60.0, 15);
        let br = bracket_ids(&v, &zero_law(), &bx, &energies, 3, seed, Execution::Sequential).unwrap();
        prop_assert!(br.ordered());
        for row in br.lower.counts.iter().chain(&br.upper.counts) {
            prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
        let cap = bx.order() as f64 / bx.volume();
        prop_assert!(br.upper.estimate.iter().all(|&x| (0.0..=cap).contains(&x)));
    }
}
