//! Lowest eigenpairs and exact eigenvalue counts for sparse symmetric
//! matrices.

mod dense;
pub mod inertia;
mod lanczos;
mod ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::SparseSymmetric;

pub use inertia::{count_below, InertiaCounter, LdlSymbolic, DEFAULT_GUARD};
use lanczos::{dot, norm, Lanczos};

/// Largest order accepted by [`dense_eigenvalues`].
pub const DENSE_THRESHOLD: usize = 2000;

/// Below this order `lowest_eigenpairs` diagonalizes densely.
pub const DENSE_EIGENPAIR_CUTOFF: usize = 96;

/// Seed of the Lanczos start vectors.
pub const LANCZOS_SEED: u64 = 0x1A2C_2050_5EED;

/// Rounds of "inject a fresh direction" allowed when the inertia check
/// reveals eigenvalues the Krylov space missed.
const MAX_DEFLATION_ROUNDS: usize = 12;

#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal, one per eigenvalue.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖A v - λ v‖` per pair.
    pub residuals: Vec<f64>,
    /// Matrix-vector products used.
    pub iterations: usize,
    pub converged: bool,
}

impl EigenResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn residual(a: &SparseSymmetric, lambda: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    a.apply_into(v, &mut av);
    av.iter().zip(v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt()
}

/// The `k` smallest eigenpairs with residuals `<= tol * ‖A‖` (Gershgorin
/// norm bound).
///
/// Thick-restart Lanczos with full reorthogonalization. After convergence
/// the result is checked against the exact inertia count at the largest
/// returned eigenvalue; eigenvalues the Krylov space missed (multiplicities)
/// are recovered by continuing in the complement of the converged vectors.
pub fn lowest_eigenpairs(a: &SparseSymmetric, k: usize, tol: f64, max_iter: usize) -> Result<EigenResult> {
    let n = a.order();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs of an order-{n} matrix")));
    }
    let scale = a.norm_bound().max(f64::MIN_POSITIVE);
    if n <= DENSE_EIGENPAIR_CUTOFF {
        let (vals, vecs) = dense::symmetric_eigen(a.to_dense(), n)?;
        let eigenvectors: Vec<Vec<f64>> = (0..k).map(|i| vecs[i * n..(i + 1) * n].to_vec()).collect();
        let residuals = (0..k).map(|i| residual(a, vals[i], &eigenvectors[i])).collect();
        return Ok(EigenResult {
            eigenvalues: vals[..k].to_vec(),
            eigenvectors,
            residuals,
            iterations: 0,
            converged: true,
        });
    }

    let tol_abs = tol * scale;
    let mut solver = Lanczos::new(a, LANCZOS_SEED, max_iter);
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut counter: Option<InertiaCounter> = None;
    let mut want = k;
    let mut rounds = 0;
    loop {
        let locked: Vec<Vec<f64>> = pairs.iter().map(|(_, v)| v.clone()).collect();
        let batch = solver.lowest(want, &locked, tol_abs)?;
        pairs.extend(batch.values.into_iter().zip(batch.vectors));
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let result = || {
            let take = k.min(pairs.len());
            let eigenvectors: Vec<Vec<f64>> = pairs[..take].iter().map(|(_, v)| v.clone()).collect();
            let eigenvalues: Vec<f64> = pairs[..take].iter().map(|(l, _)| *l).collect();
            let residuals = eigenvalues
                .iter()
                .zip(&eigenvectors)
                .map(|(&l, v)| residual(a, l, v))
                .collect();
            EigenResult {
                eigenvalues,
                eigenvectors,
                residuals,
                iterations: solver.matvecs,
                converged: batch.converged,
            }
        };
        if !batch.converged {
            let mut best = result();
            best.converged = false;
            return Err(Error::NoConvergence(Box::new(best)));
        }
        if pairs.len() >= k {
            let res = result();
            let slack = 2.0 * res.max_residual() + 1e3 * f64::EPSILON * scale;
            let top = res.eigenvalues[k - 1] + slack;
            let counter = counter.get_or_insert_with(|| InertiaCounter::new(a));
            let exact = counter.count_below(a, top)?;
            let found = pairs.iter().filter(|(l, _)| *l <= top).count();
            if exact <= found || pairs.len() == n {
                if res.max_residual() > tol_abs {
                    let mut flagged = res;
                    flagged.converged = false;
                    return Err(Error::NoConvergence(Box::new(flagged)));
                }
                return Ok(res);
            }
            want = exact - found;
        } else {
            want = k - pairs.len();
        }
        rounds += 1;
        if rounds > MAX_DEFLATION_ROUNDS || solver.matvecs >= max_iter {
            let mut best = result();
            best.converged = false;
            return Err(Error::NoConvergence(Box::new(best)));
        }
    }
}

/// Full ascending spectrum by Householder tridiagonalization and implicit
/// QL; tridiagonal input skips the reduction.
pub fn dense_eigenvalues(a: &SparseSymmetric) -> Result<Vec<f64>> {
    dense_eigenvalues_capped(a, DENSE_THRESHOLD)
}

pub fn dense_eigenvalues_capped(a: &SparseSymmetric, max_order: usize) -> Result<Vec<f64>> {
    let n = a.order();
    if n > max_order {
        return Err(Error::DenseThreshold { order: n, max: max_order });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some((d, e)) = a.as_tridiagonal() {
        return dense::tridiagonal_eigenvalues(&d, &e);
    }
    dense::symmetric_eigenvalues(a.to_dense(), n)
}

/// Dense eigenvalues and row-stored eigenvectors (test and small-cell use).
pub fn dense_eigenpairs(a: &SparseSymmetric) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.order();
    if n > DENSE_THRESHOLD {
        return Err(Error::DenseThreshold {
            order: n,
            max: DENSE_THRESHOLD,
        });
    }
    let (vals, vecs) = dense::symmetric_eigen(a.to_dense(), n)?;
    Ok((vals, vecs.chunks(n.max(1)).map(|c| c.to_vec()).collect()))
}

/// Rayleigh quotient `⟨v, A v⟩ / ⟨v, v⟩`.
pub fn rayleigh_quotient(a: &SparseSymmetric, v: &[f64]) -> Result<f64> {
    let av = a.apply(v)?;
    Ok(dot(v, &av) / dot(v, v))
}

/// Euclidean norm of `A v - λ v`.
pub fn eigen_residual(a: &SparseSymmetric, lambda: f64, v: &[f64]) -> Result<f64> {
    let av = a.apply(v)?;
    let r: Vec<f64> = av.iter().zip(v).map(|(x, y)| x - lambda * y).collect();
    Ok(norm(&r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_lowest_three() {
        let a = SparseSymmetric::from_triplets((1..=10).map(f64::from).collect(), &[]).unwrap();
        let r = lowest_eigenpairs(&a, 3, 1e-12, 1000).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn large_diagonal_through_lanczos() {
        let diag: Vec<f64> = (0..400).map(|i| 1.0 + (i as f64 * 0.37).sin().abs() + i as f64 * 0.01).collect();
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        let a = SparseSymmetric::from_triplets(diag, &[]).unwrap();
        let r = lowest_eigenpairs(&a, 4, 1e-11, 20_000).unwrap();
        for i in 0..4 {
            assert!((r.eigenvalues[i] - sorted[i]).abs() < 1e-9, "{:?} vs {:?}", r.eigenvalues, &sorted[..4]);
        }
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        // three copies of 1.0 below the rest: a single Krylov sequence sees one
        let mut diag = vec![1.0, 1.0, 1.0];
        diag.extend((0..300).map(|i| 2.0 + i as f64 * 0.01));
        let a = SparseSymmetric::from_triplets(diag, &[]).unwrap();
        let r = lowest_eigenpairs(&a, 4, 1e-11, 50_000).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-10);
        assert!((r.eigenvalues[2] - 1.0).abs() < 1e-10);
        assert!((r.eigenvalues[3] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn dense_threshold_enforced() {
        let a = SparseSymmetric::from_triplets(vec![1.0; 10], &[]).unwrap();
        assert!(matches!(
            dense_eigenvalues_capped(&a, 5),
            Err(Error::DenseThreshold { order: 10, max: 5 })
        ));
    }

    #[test]
    fn bad_k_rejected() {
        let a = SparseSymmetric::from_triplets(vec![1.0; 3], &[]).unwrap();
        assert!(lowest_eigenpairs(&a, 0, 1e-10, 10).is_err());
        assert!(lowest_eigenpairs(&a, 4, 1e-10, 10).is_err());
    }
}
