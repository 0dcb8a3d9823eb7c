//! Test oracles that share no code with the solvers under test.
#![allow(dead_code)]

use alloy_lab::SparseSymmetric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi rotations on a dense row-major copy; ascending eigenvalues.
pub fn jacobi_eigenvalues(order: usize, dense: &[f64]) -> Vec<f64> {
    let mut a = dense.to_vec();
    let n = order;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense multiply by the explicitly stored full matrix.
pub fn dense_apply(order: usize, dense: &[f64], x: &[f64]) -> Vec<f64> {
    (0..order)
        .map(|i| (0..order).map(|j| dense[i * order + j] * x[j]).sum())
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(order: usize, dense: &[f64]) -> f64 {
    let mut a = dense.to_vec();
    let n = order;
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if a[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        det *= a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
        }
    }
    det
}

/// Random symmetric dense matrix with entries in `[-1, 1]`.
pub fn random_dense(order: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut a = vec![0.0; order * order];
    for i in 0..order {
        for j in 0..=i {
            let v = r.random_range(-1.0..=1.0);
            a[i * order + j] = v;
            a[j * order + i] = v;
        }
    }
    a
}

/// Random sparse symmetric matrix: diagonal in `[0, 4]`, about `per_row`
/// off-diagonals per row in `[-1, 1]`.
pub fn random_sparse(order: usize, per_row: usize, seed: u64) -> SparseSymmetric {
    let mut r = rng(seed);
    let diag = (0..order).map(|_| r.random_range(0.0..4.0)).collect();
    let mut entries = Vec::new();
    for i in 1..order {
        for _ in 0..per_row.div_ceil(2) {
            let j = r.random_range(0..i);
            entries.push((i, j, r.random_range(-1.0..=1.0)));
        }
    }
    SparseSymmetric::from_triplets(diag, &entries).unwrap()
}

pub fn random_tridiagonal(order: usize, seed: u64) -> SparseSymmetric {
    let mut r = rng(seed);
    let d = (0..order).map(|_| r.random_range(-3.0..3.0)).collect();
    let e: Vec<f64> = (1..order).map(|_| r.random_range(-1.5..1.5)).collect();
    SparseSymmetric::from_tridiagonal(d, &e).unwrap()
}

/// 1-d eigenvalues `(4/h²) sin²(kπ/(2(m+1)))` of the Dirichlet chain with `m` nodes.
pub fn dirichlet_chain(m: usize, h: f64) -> Vec<f64> {
    (1..=m)
        .map(|k| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin().powi(2))
        .collect()
}

/// 1-d eigenvalues `(4/h²) sin²(kπ/(2m))`, `k = 0..m`, of the Neumann chain.
pub fn neumann_chain(m: usize, h: f64) -> Vec<f64> {
    (0..m)
        .map(|k| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI / (2.0 * m as f64)).sin().powi(2))
        .collect()
}

/// 1-d eigenvalues `(4/h²) sin²(kπ/m)` of the periodic ring with `m` nodes.
pub fn periodic_ring(m: usize, h: f64) -> Vec<f64> {
    (0..m)
        .map(|k| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI / m as f64).sin().powi(2))
        .collect()
}

/// All sums `λ_i + λ_j (+ λ_k)` over `dim` factors, ascending.
pub fn tensor_sum(one_d: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    for _ in 0..dim {
        out = out.iter().flat_map(|&s| one_d.iter().map(move |&l| s + l)).collect();
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn count_le(values: &[f64], e: f64) -> usize {
    values.iter().filter(|&&v| v <= e).count()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Runs the command-line entry point; returns `(exit code, stdout, stderr)`.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("alloy-lab").chain(args.iter().copied());
    let code = alloy_lab::cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Every file of a run directory except the timing log, by name.
pub fn artifacts(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
