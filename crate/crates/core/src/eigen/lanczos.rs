//! Thick-restart Lanczos with full reorthogonalization.
//!
//! Every new Krylov vector is orthogonalized twice against the whole basis
//! (and against locked vectors), so the projected matrix is the exact
//! Rayleigh quotient of the basis and no spurious copies appear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::operator::SparseSymmetric;

use super::dense::symmetric_eigen;

pub(crate) struct RitzBatch {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub converged: bool,
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Two classical Gram–Schmidt passes; returns the accumulated coefficients
/// against `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], locked: &[Vec<f64>]) -> Vec<f64> {
    let mut coeff = vec![0.0; basis.len()];
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
        let h: Vec<f64> = basis.iter().map(|q| dot(q, w)).collect();
        for (q, &c) in basis.iter().zip(&h) {
            axpy(-c, q, w);
        }
        for (acc, c) in coeff.iter_mut().zip(h) {
            *acc += c;
        }
    }
    coeff
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<f64>], locked: &[Vec<f64>]) -> Vec<f64> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis, locked);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
    vec![0.0; n]
}

pub(crate) struct Lanczos<'a> {
    pub a: &'a SparseSymmetric,
    pub rng: ChaCha8Rng,
    pub matvecs: usize,
    pub max_matvecs: usize,
}

impl<'a> Lanczos<'a> {
    pub fn new(a: &'a SparseSymmetric, seed: u64, max_matvecs: usize) -> Self {
        Lanczos {
            a,
            rng: ChaCha8Rng::seed_from_u64(seed),
            matvecs: 0,
            max_matvecs,
        }
    }

    /// Lowest `want` eigenpairs of `a` restricted to the orthogonal
    /// complement of `locked`. `tol_abs` bounds the Ritz residual estimate.
    pub fn lowest(&mut self, want: usize, locked: &[Vec<f64>], tol_abs: f64) -> Result<RitzBatch> {
        let n = self.a.order();
        let avail = n - locked.len();
        let want = want.min(avail);
        let mut m = (2 * want + 20).max(40).min(avail);
        if m < want {
            m = avail;
        }
        let keep_target = (want + (m - want) / 3).min(m.saturating_sub(2)).max(want.min(m - 1));

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        basis.push(random_direction(&mut self.rng, n, &[], locked));
        let mut t = vec![0.0; m * m];
        let mut kept = 0;
        let mut w = vec![0.0; n];
        loop {
            let mut residual = vec![0.0; n];
            let mut beta_last = 0.0;
            for j in kept..m {
                w.iter_mut().for_each(|x| *x = 0.0);
                self.a.apply_into(&basis[j], &mut w);
                self.matvecs += 1;
                let h = orthogonalize(&mut w, &basis, locked);
                for (i, &hi) in h.iter().enumerate().take(j + 1) {
                    t[i * m + j] = hi;
                    t[j * m + i] = hi;
                }
                let beta = norm(&w);
                if j + 1 < m {
                    let scale = self.a.norm_bound().max(1.0);
                    if beta <= 1e-12 * scale {
                        let fresh = random_direction(&mut self.rng, n, &basis, locked);
                        basis.push(fresh);
                    } else {
                        basis.push(w.iter().map(|x| x / beta).collect());
                    }
                } else {
                    residual.copy_from_slice(&w);
                    beta_last = beta;
                }
            }

            let (theta, s) = symmetric_eigen(t.clone(), m)?;
            let estimate = |i: usize| beta_last * s[i * m + m - 1].abs();
            let nconv = (0..want).filter(|&i| estimate(i) <= tol_abs).count();
            let exhausted = m == avail;
            if nconv == want || exhausted || self.matvecs >= self.max_matvecs {
                let vectors = (0..want).map(|i| combine(&basis, &s[i * m..(i + 1) * m])).collect();
                return Ok(RitzBatch {
                    values: theta[..want].to_vec(),
                    vectors,
                    converged: nconv == want || exhausted,
                });
            }

            // thick restart: keep the lowest Ritz vectors plus the residual direction
            let keep = keep_target;
            let mut next: Vec<Vec<f64>> = (0..keep).map(|i| combine(&basis, &s[i * m..(i + 1) * m])).collect();
            t.iter_mut().for_each(|x| *x = 0.0);
            for (i, &th) in theta.iter().enumerate().take(keep) {
                t[i * m + i] = th;
            }
            let fresh = if beta_last > 0.0 {
                let mut f: Vec<f64> = residual.iter().map(|x| x / beta_last).collect();
                orthogonalize(&mut f, &next, locked);
                let nf = norm(&f);
                if nf > 1e-8 {
                    f.iter_mut().for_each(|x| *x /= nf);
                    f
                } else {
                    random_direction(&mut self.rng, n, &next, locked)
                }
            } else {
                random_direction(&mut self.rng, n, &next, locked)
            };
            next.push(fresh);
            basis = next;
            kept = keep;
        }
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (q, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            axpy(c, q, &mut out);
        }
    }
    out
}
