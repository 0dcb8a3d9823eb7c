//! Finite-difference matrix of `-Δ + potential` on a box.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{unravel, BoxSpec, Boundary, MAX_DIM};

/// Largest matrix order `discretize` accepts unless told otherwise.
pub const DEFAULT_MAX_ORDER: usize = 4_000_000;

/// Symmetric matrix stored as its diagonal plus the strictly-lower triangle
/// in compressed rows (columns ascending within a row).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric {
    order: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from the diagonal and off-diagonal triplets `(i, j, v)`, `i != j`.
    /// Either triangle may be given; duplicates are summed.
    pub fn from_triplets(diag: Vec<f64>, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let order = diag.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); order];
        for &(i, j, v) in entries {
            if i >= order || j >= order {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside order {order}")));
            }
            if i == j {
                return Err(Error::invalid("diagonal entries belong in the diagonal vector"));
            }
            let (r, c) = if i > j { (i, j) } else { (j, i) };
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(order + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let m = SparseSymmetric {
            order,
            diag,
            row_ptr,
            col_idx,
            values,
        };
        if !m.diag.iter().chain(m.values.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(m)
    }

    pub fn from_tridiagonal(diag: Vec<f64>, off: &[f64]) -> Result<Self> {
        if off.len() + 1 != diag.len().max(1) {
            return Err(Error::DimensionMismatch {
                expected: diag.len().saturating_sub(1),
                got: off.len(),
            });
        }
        let entries: Vec<_> = off.iter().enumerate().map(|(i, &e)| (i + 1, i, e)).collect();
        Self::from_triplets(diag, &entries)
    }

    /// Reads the lower triangle of a dense row-major matrix.
    pub fn from_dense(order: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                got: dense.len(),
            });
        }
        let diag = (0..order).map(|i| dense[i * order + i]).collect();
        let mut entries = Vec::new();
        for i in 0..order {
            for j in 0..i {
                let v = dense[i * order + j];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_triplets(diag, &entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Number of stored strictly-lower entries.
    pub fn nnz_lower(&self) -> usize {
        self.col_idx.len()
    }

    /// Strictly-lower entries `(col, value)` of row `i`.
    pub fn lower_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub(crate) fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub(crate) fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub(crate) fn lower_values(&self) -> &[f64] {
        &self.values
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.order];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` into a caller-owned buffer; lengths must equal the order.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.order);
        debug_assert_eq!(y.len(), self.order);
        for i in 0..self.order {
            let xi = x[i];
            let mut acc = self.diag[i] * xi;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let v = self.values[p];
                acc += v * x[j];
                y[j] += v * xi;
            }
            y[i] += acc;
        }
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.order];
        for i in 0..self.order {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[p].abs();
                radius[i] += a;
                radius[self.col_idx[p]] += a;
            }
        }
        let lo = (0..self.order).map(|i| self.diag[i] - radius[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..self.order).map(|i| self.diag[i] + radius[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Spectral-norm bound from the Gershgorin discs.
    pub fn norm_bound(&self) -> f64 {
        if self.order == 0 {
            return 0.0;
        }
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// `(diag, off)` when every stored entry sits on the first subdiagonal.
    pub fn as_tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut off = vec![0.0; self.order.saturating_sub(1)];
        for i in 0..self.order {
            for (j, v) in self.lower_row(i) {
                if j + 1 != i {
                    return None;
                }
                off[j] = v;
            }
        }
        Some((self.diag.clone(), off))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.order;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = self.diag[i];
            for (j, v) in self.lower_row(i) {
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    /// `A + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for d in out.diag.iter_mut() {
            *d += s;
        }
        out
    }

    /// `A + diag(extra)`.
    pub fn plus_diagonal(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: extra.len(),
            });
        }
        let mut out = self.clone();
        for (d, e) in out.diag.iter_mut().zip(extra) {
            *d += e;
        }
        Ok(out)
    }

    /// `α A + β I`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for d in out.diag.iter_mut() {
            *d = alpha * *d + beta;
        }
        for v in out.values.iter_mut() {
            *v *= alpha;
        }
        out
    }

    /// `P A Pᵀ` where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: perm.len(),
            });
        }
        let mut inv = vec![usize::MAX; self.order];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.order || inv[old] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inv[old] = new;
        }
        let diag = perm.iter().map(|&old| self.diag[old]).collect();
        let mut entries = Vec::with_capacity(self.nnz_lower());
        for i in 0..self.order {
            for (j, v) in self.lower_row(i) {
                entries.push((inv[i], inv[j], v));
            }
        }
        Self::from_triplets(diag, &entries)
    }

    /// Coordinate text dump: a `%` header, then `row col value` per line for
    /// both triangles, rows ascending, 0-based.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.order];
        for i in 0..self.order {
            for (j, v) in self.lower_row(i) {
                upper[j].push((i, v));
            }
        }
        writeln!(out, "% order {} nnz {}", self.order, self.order + 2 * self.nnz_lower())?;
        for i in 0..self.order {
            for (j, v) in self.lower_row(i) {
                writeln!(out, "{i} {j} {v:e}")?;
            }
            writeln!(out, "{i} {i} {:e}", self.diag[i])?;
            for &(j, v) in &upper[i] {
                writeln!(out, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// Assembles `-Δ_h + potential` on the box with its boundary condition.
///
/// Neumann uses the graph Laplacian of the node grid (each row of the
/// Laplacian part sums to zero), Dirichlet eliminates the nodes just outside
/// the box (diagonal `2d/h²` everywhere), periodic wraps around.
pub fn discretize(box_spec: &BoxSpec, potential: &[f64]) -> Result<SparseSymmetric> {
    discretize_capped(box_spec, potential, DEFAULT_MAX_ORDER)
}

pub fn discretize_capped(box_spec: &BoxSpec, potential: &[f64], max_order: usize) -> Result<SparseSymmetric> {
    let order = box_spec.order();
    if order > max_order {
        return Err(Error::SizeOverflow { order, max: max_order });
    }
    if potential.len() != order {
        return Err(Error::DimensionMismatch {
            expected: order,
            got: potential.len(),
        });
    }
    let dim = box_spec.dim;
    let side = box_spec.points_per_side();
    let inv_h2 = (box_spec.n * box_spec.n) as f64;
    let periodic = box_spec.boundary == Boundary::Periodic;

    let mut degree = vec![0usize; order];
    let mut entries = Vec::with_capacity(order * dim);
    let mut stride = [0usize; MAX_DIM];
    for axis in 0..dim {
        stride[axis] = side.pow((dim - 1 - axis) as u32);
    }
    for i in 0..order {
        let multi = unravel(i, side, dim);
        for axis in 0..dim {
            let k = multi[axis];
            let j = if k + 1 < side {
                i + stride[axis]
            } else if periodic {
                i - k * stride[axis]
            } else {
                continue;
            };
            if j == i {
                // one-node periodic ring: the two self-edges cancel
                continue;
            }
            degree[i] += 1;
            degree[j] += 1;
            entries.push((i, j, -inv_h2));
        }
    }
    let diag = (0..order)
        .map(|i| {
            let lap = match box_spec.boundary {
                Boundary::Dirichlet => 2.0 * dim as f64 * inv_h2,
                _ => degree[i] as f64 * inv_h2,
            };
            lap + potential[i]
        })
        .collect();
    SparseSymmetric::from_triplets(diag, &entries)
}
