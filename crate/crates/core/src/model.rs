//! Ingredients of the alloy model: single-site potential, disorder law, box
//! geometry, and assembly of the random potential on the box grid.
//!
//! Grid convention (used everywhere in the crate): a unit cell of mesh order
//! `n` carries `n` nodes per axis at the cell-interior midpoints
//! `x_k = (2k + 1 - n) / (2n)`, `k = 0..n`, spacing `h = 1/n`. A box of `c`
//! cells per side therefore has `c * n` nodes per side for every boundary
//! condition, and cells partition the nodes without overlap. Flat indices are
//! row-major (last coordinate fastest).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Boundary condition imposed on the outer faces of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Neumann,
    Dirichlet,
    Periodic,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Neumann => "neumann",
            Boundary::Dirichlet => "dirichlet",
            Boundary::Periodic => "periodic",
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Node position inside a unit cell centred at the origin.
#[inline]
pub fn cell_coordinate(k: usize, n: usize) -> f64 {
    (2.0 * k as f64 + 1.0 - n as f64) / (2.0 * n as f64)
}

/// Splits a row-major flat index into per-axis indices.
#[inline]
pub fn unravel(mut idx: usize, side: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut out = [0usize; MAX_DIM];
    for axis in (0..dim).rev() {
        out[axis] = idx % side;
        idx /= side;
    }
    out
}

#[inline]
pub fn ravel(multi: &[usize], side: usize) -> usize {
    multi.iter().fold(0, |acc, &m| acc * side + m)
}

/// Finite box made of `cells^dim` unit cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub dim: usize,
    pub cells: usize,
    pub n: usize,
    pub boundary: Boundary,
}

impl BoxSpec {
    /// The cube `[-L-1/2, L+1/2]^d` made of `2L+1` cells per side.
    pub fn centered(dim: usize, half_width: usize, n: usize, boundary: Boundary) -> Result<Self> {
        Self::with_cells(dim, 2 * half_width + 1, n, boundary)
    }

    pub fn with_cells(dim: usize, cells: usize, n: usize, boundary: Boundary) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        if cells == 0 || n == 0 {
            return Err(Error::invalid("box needs at least one cell and one node per cell"));
        }
        Ok(BoxSpec {
            dim,
            cells,
            n,
            boundary,
        })
    }

    pub fn unit_cell(dim: usize, n: usize, boundary: Boundary) -> Result<Self> {
        Self::with_cells(dim, 1, n, boundary)
    }

    pub fn with_boundary(self, boundary: Boundary) -> Self {
        BoxSpec { boundary, ..self }
    }

    /// `L` when the box has an odd number `2L+1` of cells per side.
    pub fn half_width(&self) -> Option<usize> {
        (self.cells % 2 == 1).then_some(self.cells / 2)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn points_per_side(&self) -> usize {
        self.cells * self.n
    }

    /// Matrix order of the discretized operator.
    pub fn order(&self) -> usize {
        self.points_per_side().pow(self.dim as u32)
    }

    pub fn num_sites(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    /// Normalization volume `(2L+1)^d`, i.e. the number of unit cells.
    pub fn volume(&self) -> f64 {
        self.num_sites() as f64
    }

    /// Lattice coordinate of the first cell along each axis.
    pub fn first_site(&self) -> i64 {
        -((self.cells / 2) as i64)
    }

    /// Absolute lattice point `γ` of a local site index.
    pub fn site_coords(&self, site: usize) -> [i64; MAX_DIM] {
        let local = unravel(site, self.cells, self.dim);
        let mut out = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            out[axis] = self.first_site() + local[axis] as i64;
        }
        out
    }
}

/// Single-site potential tabulated on the `n^d` nodes of the unit cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitCellPotential {
    dim: usize,
    n: usize,
    values: Vec<f64>,
    pub symmetry_tol: f64,
}

pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

impl UnitCellPotential {
    /// Builds a potential from tabulated values. The outermost node layer is
    /// zeroed so the potential is supported strictly inside the cell.
    pub fn from_values(dim: usize, n: usize, mut values: Vec<f64>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 3 {
            return Err(Error::invalid("mesh order must be at least 3 to host an interior"));
        }
        let len = n.pow(dim as u32);
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("potential values must be finite"));
        }
        for (idx, v) in values.iter_mut().enumerate() {
            let multi = unravel(idx, n, dim);
            if multi[..dim].iter().any(|&k| k == 0 || k == n - 1) {
                *v = 0.0;
            }
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("single-site potential vanishes identically"));
        }
        Ok(UnitCellPotential {
            dim,
            n,
            values,
            symmetry_tol: DEFAULT_SYMMETRY_TOL,
        })
    }

    /// Evaluates `f` at the cell nodes.
    pub fn tabulate(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_values(dim, n, tabulate_cell(dim, n, f))
    }

    /// The vanishing potential. Not an admissible single-site potential, but
    /// it is the reference for free-Laplacian checks.
    pub fn zero(dim: usize, n: usize) -> Self {
        UnitCellPotential {
            dim,
            n,
            values: vec![0.0; n.pow(dim as u32)],
            symmetry_tol: DEFAULT_SYMMETRY_TOL,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `λ V` tabulated.
    pub fn scaled(&self, lambda: f64) -> Self {
        UnitCellPotential {
            values: self.values.iter().map(|v| lambda * v).collect(),
            ..self.clone()
        }
    }

    pub fn negated(&self) -> Self {
        UnitCellPotential {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Cell average `h^d Σ V`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn unit_box(&self, boundary: Boundary) -> BoxSpec {
        BoxSpec {
            dim: self.dim,
            cells: 1,
            n: self.n,
            boundary,
        }
    }
}

/// Values of `f` on the cell nodes without any support post-processing.
pub fn tabulate_cell(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let len = n.pow(dim as u32);
    let mut x = [0.0; MAX_DIM];
    (0..len)
        .map(|idx| {
            let multi = unravel(idx, n, dim);
            for axis in 0..dim {
                x[axis] = cell_coordinate(multi[axis], n);
            }
            f(&x[..dim])
        })
        .collect()
}

/// Largest `|V(x) - V(σx)|` over all coordinate sign flips `σ`.
pub fn reflection_deviation(dim: usize, n: usize, values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (idx, &v) in values.iter().enumerate() {
        let multi = unravel(idx, n, dim);
        for mask in 1u32..(1 << dim) {
            let mut mirrored = multi;
            for axis in 0..dim {
                if mask & (1 << axis) != 0 {
                    mirrored[axis] = n - 1 - multi[axis];
                }
            }
            let w = values[ravel(&mirrored[..dim], n)];
            worst = worst.max((v - w).abs());
        }
    }
    worst
}

/// `(symmetric, max deviation)` for the 2^d sign-flip maps.
pub fn check_reflection_symmetry(v: &UnitCellPotential, tol: f64) -> (bool, f64) {
    let dev = reflection_deviation(v.dim, v.n, &v.values);
    (dev <= tol, dev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    Uniform,
    Bernoulli,
}

/// Distribution of the i.i.d. couplings on `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderLaw {
    pub kind: LawKind,
    pub a: f64,
    pub b: f64,
    /// Weight of the atom at `b` (Bernoulli only).
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    0.5
}

impl DisorderLaw {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::validated(DisorderLaw {
            kind: LawKind::Uniform,
            a,
            b,
            p: default_p(),
        })
    }

    pub fn bernoulli(a: f64, b: f64, p: f64) -> Result<Self> {
        Self::validated(DisorderLaw {
            kind: LawKind::Bernoulli,
            a,
            b,
            p,
        })
    }

    /// Point mass at `c`.
    pub fn degenerate(c: f64) -> Self {
        DisorderLaw {
            kind: LawKind::Bernoulli,
            a: c,
            b: c,
            p: 1.0,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.a.is_finite() && self.b.is_finite()) || self.a > self.b {
            return Err(Error::invalid(format!(
                "law edges must be finite with a <= b (a = {}, b = {})",
                self.a, self.b
            )));
        }
        if self.kind == LawKind::Bernoulli && !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("Bernoulli weight {} outside [0, 1]", self.p)));
        }
        Ok(self)
    }

    /// Maps a uniform variate `u ∈ [0, 1)` to a coupling.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.kind {
            LawKind::Uniform => self.a + (self.b - self.a) * u,
            LawKind::Bernoulli => {
                if u < self.p {
                    self.b
                } else {
                    self.a
                }
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
            || (self.kind == LawKind::Bernoulli && (self.p == 0.0 || self.p == 1.0))
    }
}

/// One disorder realization on the sites of a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderConfig {
    pub box_spec: BoxSpec,
    /// Couplings indexed by local site (row-major over cells).
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub law: Option<DisorderLaw>,
}

const SITE_OFFSET: i64 = 1 << 20;

fn site_stream(coords: &[i64]) -> u64 {
    coords.iter().enumerate().fold(0u64, |acc, (axis, &g)| {
        let shifted = (g + SITE_OFFSET) as u64 & ((1 << 21) - 1);
        acc | (shifted << (21 * axis))
    })
}

/// Uniform variate attached to lattice point `γ` under `seed`. Pure in
/// `(seed, γ)`, so site values do not depend on iteration order or box size.
pub fn site_uniform(seed: u64, coords: &[i64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site_stream(coords));
    rng.random::<f64>()
}

/// Independent seed for item `index` of a family rooted at `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base ^ 0x5EED_0F_A110_u64);
    rng.set_stream(index);
    rng.random::<u64>()
}

pub fn sample_disorder(law: &DisorderLaw, box_spec: &BoxSpec, seed: u64) -> DisorderConfig {
    let values = (0..box_spec.num_sites())
        .map(|site| {
            let coords = box_spec.site_coords(site);
            law.quantile(site_uniform(seed, &coords[..box_spec.dim]))
        })
        .collect();
    DisorderConfig {
        box_spec: *box_spec,
        values,
        seed: Some(seed),
        law: Some(*law),
    }
}

pub fn constant_config(box_spec: &BoxSpec, c: f64) -> DisorderConfig {
    DisorderConfig {
        box_spec: *box_spec,
        values: vec![c; box_spec.num_sites()],
        seed: None,
        law: None,
    }
}

impl DisorderConfig {
    pub fn from_values(box_spec: BoxSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != box_spec.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: box_spec.num_sites(),
                got: values.len(),
            });
        }
        Ok(DisorderConfig {
            box_spec,
            values,
            seed: None,
            law: None,
        })
    }

    pub fn in_support(&self) -> bool {
        match self.law {
            Some(law) => self.values.iter().all(|&w| w >= law.a && w <= law.b),
            None => true,
        }
    }
}

/// `ω^P` on the enlarged box: `ω_{γ + L0 β} = ω_γ` with `L0` the core side.
pub fn periodize_config(core: &DisorderConfig, copies: usize) -> Result<DisorderConfig> {
    if copies == 0 {
        return Err(Error::invalid("copies must be at least 1"));
    }
    let core_box = core.box_spec;
    let big = BoxSpec {
        cells: core_box.cells * copies,
        ..core_box
    };
    let dim = core_box.dim;
    let values = (0..big.num_sites())
        .map(|site| {
            let multi = unravel(site, big.cells, dim);
            let mut folded = [0usize; MAX_DIM];
            for axis in 0..dim {
                folded[axis] = multi[axis] % core_box.cells;
            }
            core.values[ravel(&folded[..dim], core_box.cells)]
        })
        .collect();
    Ok(DisorderConfig {
        box_spec: big,
        values,
        seed: core.seed,
        law: core.law,
    })
}

/// `V_ω` on the box grid: on cell `γ` the grid values are `ω_γ V(· - γ)`.
pub fn assemble_alloy_potential(config: &DisorderConfig, v: &UnitCellPotential) -> Result<Vec<f64>> {
    let bx = &config.box_spec;
    if v.dim != bx.dim || v.n != bx.n {
        return Err(Error::MeshMismatch {
            pot_dim: v.dim,
            pot_n: v.n,
            box_dim: bx.dim,
            box_n: bx.n,
        });
    }
    let side = bx.points_per_side();
    let dim = bx.dim;
    let n = bx.n;
    let mut out = vec![0.0; bx.order()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let multi = unravel(idx, side, dim);
        let mut cell = [0usize; MAX_DIM];
        let mut local = [0usize; MAX_DIM];
        for axis in 0..dim {
            cell[axis] = multi[axis] / n;
            local[axis] = multi[axis] % n;
        }
        let w = config.values[ravel(&cell[..dim], bx.cells)];
        *slot = w * v.values[ravel(&local[..dim], n)];
    }
    Ok(out)
}
