//! Exact eigenvalue counting through Sylvester's law of inertia: the number
//! of negative pivots of a symmetric triangular factorization of `A - E I`
//! equals the number of eigenvalues below `E`.

use crate::error::{Error, Result};
use crate::operator::SparseSymmetric;

use super::ordering::{nested_dissection, Adjacency};

/// Relative width of the guard band around pivot breakdown.
pub const DEFAULT_GUARD: f64 = 1e-10;

/// Orders at or below this use the pivoted dense factorization.
pub const DENSE_INERTIA_CUTOFF: usize = 64;

/// Negative pivots of `T - shift I` for the tridiagonal `T` (Sturm count).
/// `None` when a pivot falls inside `±tiny`.
pub(crate) fn sturm_negatives(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Option<usize> {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / q };
        q = (diag[i] - shift) - coupling;
        if q.abs() <= tiny {
            return None;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    Some(count)
}

/// Negative eigenvalues of a dense symmetric matrix via Bunch–Kaufman
/// `L D Lᵀ` with 1×1 and 2×2 pivots.
pub(crate) fn bunch_kaufman_negatives(mut a: Vec<f64>, n: usize, tiny: f64) -> Option<usize> {
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let at = |i: usize, j: usize| i * n + j;
    let swap = |a: &mut Vec<f64>, p: usize, q: usize| {
        if p == q {
            return;
        }
        for k in 0..n {
            a.swap(at(p, k), at(q, k));
        }
        for k in 0..n {
            a.swap(at(k, p), at(k, q));
        }
    };
    let mut neg = 0;
    let mut k = 0;
    while k < n {
        let (mut r, mut colmax) = (k, 0.0f64);
        for i in (k + 1)..n {
            if a[at(i, k)].abs() > colmax {
                colmax = a[at(i, k)].abs();
                r = i;
            }
        }
        let akk = a[at(k, k)].abs();
        let mut two_by_two = false;
        if akk.max(colmax) <= tiny {
            return None;
        }
        if akk < alpha * colmax {
            let rowmax = (k..n)
                .filter(|&j| j != r)
                .map(|j| a[at(r, j)].abs())
                .fold(0.0, f64::max);
            if akk * rowmax >= alpha * colmax * colmax {
                // keep 1×1 at k
            } else if a[at(r, r)].abs() >= alpha * rowmax {
                swap(&mut a, k, r);
            } else {
                swap(&mut a, k + 1, r);
                two_by_two = true;
            }
        }
        if !two_by_two {
            let d = a[at(k, k)];
            if d.abs() <= tiny {
                return None;
            }
            if d < 0.0 {
                neg += 1;
            }
            for i in (k + 1)..n {
                let li = a[at(i, k)] / d;
                if li == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    a[at(i, j)] -= li * a[at(k, j)];
                }
            }
            k += 1;
        } else {
            let (p, q, s) = (a[at(k, k)], a[at(k, k + 1)], a[at(k + 1, k + 1)]);
            let det = p * s - q * q;
            if det.abs() <= tiny * tiny {
                return None;
            }
            if det < 0.0 {
                neg += 1;
            } else if p + s < 0.0 {
                neg += 2;
            }
            for i in (k + 2)..n {
                let (u, v) = (a[at(i, k)], a[at(i, k + 1)]);
                // [u v] D^{-1}
                let w0 = (s * u - q * v) / det;
                let w1 = (p * v - q * u) / det;
                for j in (k + 2)..n {
                    a[at(i, j)] -= w0 * a[at(k, j)] + w1 * a[at(k + 1, j)];
                }
            }
            k += 2;
        }
    }
    Some(neg)
}

/// Pattern analysis for sparse `L D Lᵀ` of a fixed sparsity structure:
/// nested-dissection permutation, elimination tree and column counts.
#[derive(Clone, Debug)]
pub struct LdlSymbolic {
    order: usize,
    nnz_lower: usize,
    /// upper triangle (with diagonal) of `P A Pᵀ` in compressed columns
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// slot source: `< nnz_lower` is a strictly-lower entry of `A`,
    /// otherwise `diag index + nnz_lower`
    source: Vec<usize>,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl LdlSymbolic {
    pub fn analyze(a: &SparseSymmetric) -> Self {
        let n = a.order();
        let perm = nested_dissection(&Adjacency::of(a));
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let nnz_lower = a.nnz_lower();
        let mut count = vec![0usize; n + 1];
        let mut slots = Vec::with_capacity(nnz_lower + n);
        for i in 0..n {
            let rp = a.row_ptr();
            for p in rp[i]..rp[i + 1] {
                let j = a.col_idx()[p];
                let (r, c) = (inv[i].min(inv[j]), inv[i].max(inv[j]));
                slots.push((c, r, p));
            }
            slots.push((inv[i], inv[i], nnz_lower + i));
        }
        for &(c, _, _) in &slots {
            count[c + 1] += 1;
        }
        for c in 0..n {
            count[c + 1] += count[c];
        }
        let col_ptr = count.clone();
        let mut fill = count;
        let mut row_idx = vec![0usize; slots.len()];
        let mut source = vec![0usize; slots.len()];
        for (c, r, src) in slots {
            row_idx[fill[c]] = r;
            source[fill[c]] = src;
            fill[c] += 1;
        }

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in col_ptr[j]..col_ptr[j + 1] {
                let mut i = row_idx[p];
                if i == j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + lnz[i];
        }
        LdlSymbolic {
            order: n,
            nnz_lower,
            col_ptr,
            row_idx,
            source,
            etree,
            l_ptr,
        }
    }

    /// Entries of the strictly-lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.l_ptr[self.order]
    }

    pub fn matches(&self, a: &SparseSymmetric) -> bool {
        a.order() == self.order && a.nnz_lower() == self.nnz_lower
    }

    /// Negative pivots of `P (A - shift I) Pᵀ = L D Lᵀ` (no pivoting);
    /// `None` if a pivot falls inside `±tiny`.
    pub fn negatives(&self, a: &SparseSymmetric, shift: f64, tiny: f64) -> Option<usize> {
        let n = self.order;
        let lower = a.lower_values();
        let diag = a.diag();
        let value = |src: usize| {
            if src < self.nnz_lower {
                lower[src]
            } else {
                diag[src - self.nnz_lower] - shift
            }
        };
        let nnz_l = self.factor_nnz();
        let mut lx = vec![0.0; nnz_l];
        let mut li = vec![0usize; nnz_l];
        let mut dinv = vec![0.0; n];
        let mut next = self.l_ptr[..n].to_vec();
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut pattern = Vec::with_capacity(n);
        let mut stack = Vec::with_capacity(n);
        let mut negatives = 0;

        for k in 0..n {
            pattern.clear();
            let mut dk = 0.0;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let row = self.row_idx[p];
                let v = value(self.source[p]);
                if row == k {
                    dk += v;
                    continue;
                }
                y[row] += v;
                if marked[row] {
                    continue;
                }
                stack.clear();
                let mut node = row;
                while node != NONE && node < k && !marked[node] {
                    marked[node] = true;
                    stack.push(node);
                    node = self.etree[node];
                }
                while let Some(node) = stack.pop() {
                    pattern.push(node);
                }
            }
            for &col in pattern.iter().rev() {
                let yc = y[col];
                let start = self.l_ptr[col];
                let end = next[col];
                for q in start..end {
                    y[li[q]] -= lx[q] * yc;
                }
                let lkc = yc * dinv[col];
                li[end] = k;
                lx[end] = lkc;
                dk -= yc * lkc;
                next[col] += 1;
                y[col] = 0.0;
                marked[col] = false;
            }
            if dk.abs() <= tiny || !dk.is_finite() {
                return None;
            }
            if dk < 0.0 {
                negatives += 1;
            }
            dinv[k] = 1.0 / dk;
        }
        Some(negatives)
    }
}

#[derive(Clone, Debug)]
enum Strategy {
    Tridiagonal,
    Dense,
    Sparse(LdlSymbolic),
}

/// Eigenvalue counter for one sparsity pattern. The analysis is done once;
/// every matrix with the same pattern can then be counted at any shift.
#[derive(Clone, Debug)]
pub struct InertiaCounter {
    strategy: Strategy,
    order: usize,
    pub guard: f64,
}

impl InertiaCounter {
    pub fn new(a: &SparseSymmetric) -> Self {
        let order = a.order();
        let strategy = if a.as_tridiagonal().is_some() {
            Strategy::Tridiagonal
        } else if order <= DENSE_INERTIA_CUTOFF {
            Strategy::Dense
        } else {
            Strategy::Sparse(LdlSymbolic::analyze(a))
        };
        InertiaCounter {
            strategy,
            order,
            guard: DEFAULT_GUARD,
        }
    }

    pub fn method(&self) -> &'static str {
        match self.strategy {
            Strategy::Tridiagonal => "sturm",
            Strategy::Dense => "bunch-kaufman",
            Strategy::Sparse(_) => "sparse-ldl",
        }
    }

    fn negatives(&self, a: &SparseSymmetric, shift: f64, tiny: f64) -> Option<usize> {
        match &self.strategy {
            Strategy::Tridiagonal => {
                let (d, e) = a.as_tridiagonal()?;
                sturm_negatives(&d, &e, shift, tiny)
            }
            Strategy::Dense => {
                let mut dense = a.to_dense();
                for i in 0..self.order {
                    dense[i * self.order + i] -= shift;
                }
                bunch_kaufman_negatives(dense, self.order, tiny)
            }
            Strategy::Sparse(sym) => sym.negatives(a, shift, tiny),
        }
    }

    /// Number of eigenvalues of `a` that are `<= e`.
    ///
    /// Shifts landing within `guard * ‖A‖` of a pivot breakdown are retried
    /// at `e + guard‖A‖` and then `e - guard‖A‖`; counts at energies that
    /// close to an eigenvalue are ambiguous at machine precision.
    pub fn count_below(&self, a: &SparseSymmetric, e: f64) -> Result<usize> {
        if a.order() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: a.order(),
            });
        }
        if let Strategy::Sparse(sym) = &self.strategy {
            if !sym.matches(a) {
                return Err(Error::invalid("matrix pattern differs from the analyzed one"));
            }
        }
        if !e.is_finite() {
            return Err(Error::invalid("energy must be finite"));
        }
        if self.order == 0 {
            return Ok(0);
        }
        let scale = a.norm_bound().max(f64::MIN_POSITIVE);
        let tiny = self.guard * scale;
        for shift in [e, e + tiny, e - tiny] {
            if let Some(neg) = self.negatives(a, shift, tiny) {
                return Ok(neg);
            }
        }
        Err(Error::FactorizationBreakdown { shift: e })
    }
}

/// Exact number of eigenvalues `<= e` of `a`.
pub fn count_below(a: &SparseSymmetric, e: f64) -> Result<usize> {
    InertiaCounter::new(a).count_below(a, e)
}
