//! A sign-changing single-site potential whose density of states has a
//! power-law (van Hove) edge instead of a Lifshitz tail.
//!
//! Start from a positive, reflection-symmetric cell profile `φ` that is
//! constant (`C₀`) near the cell boundary and put `V = -(-Δ_h φ)/φ`. Then
//! `φ` is an exact zero mode of `-Δ_h + V` on the cell, the constant is a
//! zero mode of `-Δ_h`, and for couplings in `{0, 1}` the patchwork of `φ`
//! and `C₀` glues across flat zones into a zero mode of the whole box.

use serde::Serialize;

use crate::eigen::{lowest_eigenpairs, rayleigh_quotient};
use crate::error::{Error, Result};
use crate::ids::{alloy_operator, bracket_ids, realization_config, CurveData, IdsCurve};
use crate::lifshitz::{fit_power, power_ratio, FitReport};
use crate::model::{
    cell_coordinate, ravel, unravel, BoxSpec, Boundary, DisorderConfig, DisorderLaw, UnitCellPotential, MAX_DIM,
};
use crate::operator::discretize;
use crate::parallel::Execution;

pub const DEFAULT_KAPPA: f64 = 1.0;
pub const PATCHWORK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct PhiProfile {
    pub dim: usize,
    pub n: usize,
    /// Width of the flat zone along the cell boundary.
    pub delta: f64,
    /// Bump amplitude relative to the flat level.
    pub kappa: f64,
    /// `h^d Σ φ² = 1`.
    pub values: Vec<f64>,
    /// Value of `φ` on the flat zone.
    pub c0: f64,
}

/// Raised cosine on `|t| < r`, zero outside.
fn bump(t: f64, r: f64) -> f64 {
    if t.abs() < r {
        0.5 * (1.0 + (std::f64::consts::PI * t / r).cos())
    } else {
        0.0
    }
}

/// `φ ∝ 1 + κ Π_j b(x_j)` with `b` a raised-cosine bump of radius
/// `1/2 - δ`. The product vanishes as soon as one coordinate reaches the
/// flat zone, so `φ` is constant on the whole boundary layer.
pub fn build_phi(dim: usize, n: usize, delta: f64, kappa: f64) -> Result<PhiProfile> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::invalid(format!("flat-zone width {delta} outside (0, 1/2]")));
    }
    if delta * (n as f64) < 2.0 - 1e-12 {
        return Err(Error::invalid(format!(
            "flat zone unresolved: delta * n = {} < 2",
            delta * n as f64
        )));
    }
    if !(kappa > -1.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("bump amplitude {kappa} must exceed -1 to keep phi positive")));
    }
    let r = 0.5 - delta;
    let raw = crate::model::tabulate_cell(dim, n, |x| 1.0 + kappa * x.iter().map(|&t| bump(t, r)).product::<f64>());
    let h_d = (1.0 / n as f64).powi(dim as i32);
    let norm = (raw.iter().map(|v| v * v).sum::<f64>() * h_d).sqrt();
    Ok(PhiProfile {
        dim,
        n,
        delta,
        kappa,
        values: raw.iter().map(|v| v / norm).collect(),
        c0: 1.0 / norm,
    })
}

impl PhiProfile {
    /// `max φ / min φ`.
    pub fn contrast(&self) -> f64 {
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    /// Largest bump value `Π b(x_j)` attained on the grid.
    pub fn grid_peak(&self) -> f64 {
        let r = 0.5 - self.delta;
        (0..self.n)
            .map(|k| bump(cell_coordinate(k, self.n), r))
            .fold(0.0, f64::max)
            .powi(self.dim as i32)
    }
}

/// `V = -(-Δ_h φ)/φ` with the Neumann graph Laplacian of the cell, so that
/// `(-Δ_h + V) φ = 0` holds node by node.
pub fn potential_from_phi(phi: &PhiProfile) -> Result<UnitCellPotential> {
    let bx = BoxSpec::unit_cell(phi.dim, phi.n, Boundary::Neumann)?;
    let lap = discretize(&bx, &vec![0.0; bx.order()])?;
    let lphi = lap.apply(&phi.values)?;
    let floor = 1e-300;
    let mut values = Vec::with_capacity(lphi.len());
    for (l, &p) in lphi.iter().zip(&phi.values) {
        if !(p > floor) {
            return Err(Error::NotPositive { min_entry: p });
        }
        values.push(-l / p);
    }
    if values.iter().all(|&v| v == 0.0) {
        return Ok(UnitCellPotential::zero(phi.dim, phi.n));
    }
    let has_pos = values.iter().any(|&v| v > 0.0);
    let has_neg = values.iter().any(|&v| v < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::invalid("potential from phi does not change sign"));
    }
    UnitCellPotential::from_values(phi.dim, phi.n, values)
}

/// `φ` and its potential for the given dimension and mesh.
pub fn vanhove_potential(dim: usize, n: usize, delta: f64, kappa: f64) -> Result<(PhiProfile, UnitCellPotential)> {
    let phi = build_phi(dim, n, delta, kappa)?;
    let v = potential_from_phi(&phi)?;
    Ok((phi, v))
}

/// `φ` on cells with `ω = 1`, `C₀` on cells with `ω = 0`.
pub fn patchwork_state(phi: &PhiProfile, config: &DisorderConfig) -> Result<Vec<f64>> {
    let bx = &config.box_spec;
    if bx.dim != phi.dim || bx.n != phi.n {
        return Err(Error::MeshMismatch {
            pot_dim: phi.dim,
            pot_n: phi.n,
            box_dim: bx.dim,
            box_n: bx.n,
        });
    }
    if let Some(w) = config.values.iter().find(|&&w| w != 0.0 && w != 1.0) {
        return Err(Error::invalid(format!("patchwork needs couplings in {{0, 1}}, found {w}")));
    }
    let side = bx.points_per_side();
    let (dim, n) = (bx.dim, bx.n);
    Ok((0..bx.order())
        .map(|idx| {
            let multi = unravel(idx, side, dim);
            let mut cell = [0usize; MAX_DIM];
            let mut local = [0usize; MAX_DIM];
            for axis in 0..dim {
                cell[axis] = multi[axis] / n;
                local[axis] = multi[axis] % n;
            }
            if config.values[ravel(&cell[..dim], bx.cells)] == 1.0 {
                phi.values[ravel(&local[..dim], n)]
            } else {
                phi.c0
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchworkReport {
    /// `‖H_ω Φ‖ / ‖Φ‖`.
    pub residual: f64,
    pub holds: bool,
}

/// Applies `H_ω` to the patchwork state and reports its residual at 0.
pub fn verify_patchwork_ground_state(
    phi: &PhiProfile,
    v: &UnitCellPotential,
    config: &DisorderConfig,
) -> Result<PatchworkReport> {
    if config.box_spec.boundary == Boundary::Dirichlet {
        return Err(Error::invalid("the patchwork state is a zero mode of Neumann or periodic boxes"));
    }
    let state = patchwork_state(phi, config)?;
    let a = alloy_operator(v, config)?;
    let hs = a.apply(&state)?;
    let num = hs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let den = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    let residual = num / den;
    Ok(PatchworkReport {
        residual,
        holds: residual <= PATCHWORK_TOL,
    })
}

/// Bernoulli `{0, 1}` law with weight `p` on 1.
pub fn vanhove_law(p: f64) -> Result<DisorderLaw> {
    DisorderLaw::bernoulli(0.0, 1.0, p)
}

/// Second Neumann eigenvalue of `H_ω` for one configuration.
pub fn second_eigenvalue(v: &UnitCellPotential, config: &DisorderConfig) -> Result<f64> {
    let a = alloy_operator(v, config)?;
    let r = lowest_eigenpairs(&a, 2, 1e-11, 400_000)?;
    Ok(r.eigenvalues[1])
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondEigenvalueRow {
    pub half_width: usize,
    /// Second eigenvalue for every realization.
    pub lambda2: Vec<f64>,
    pub min: f64,
    /// `min λ₂ · L²`.
    pub scaled_min: f64,
    /// Second eigenvalue with all couplings 0 (free Neumann box).
    pub free: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondEigenvalueFloor {
    pub rows: Vec<SecondEigenvalueRow>,
    /// `max / min` of `min λ₂ · L²` across the sweep.
    pub spread: f64,
    pub positive: bool,
}

/// Minimum over realizations of the second Neumann eigenvalue, for every
/// half-width in `half_widths`, scaled by `L²`.
pub fn second_eigenvalue_floor(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    half_widths: &[usize],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<SecondEigenvalueFloor> {
    if realizations == 0 || half_widths.is_empty() {
        return Err(Error::invalid("need at least one realization and one box size"));
    }
    let mut rows = Vec::new();
    for &l in half_widths {
        let bx = BoxSpec::centered(v.dim(), l, v.n(), Boundary::Neumann)?;
        let results = exec.map(realizations, |r| second_eigenvalue(v, &realization_config(law, &bx, seed, r)));
        let mut lambda2 = Vec::with_capacity(realizations);
        for (index, res) in results.into_iter().enumerate() {
            lambda2.push(res.map_err(|e| Error::Realization {
                index,
                source: Box::new(e),
            })?);
        }
        let min = lambda2.iter().copied().fold(f64::INFINITY, f64::min);
        let free = second_eigenvalue(v, &crate::model::constant_config(&bx, 0.0))?;
        rows.push(SecondEigenvalueRow {
            half_width: l,
            lambda2,
            min,
            scaled_min: min * (l * l) as f64,
            free,
        });
    }
    let hi = rows.iter().map(|r| r.scaled_min).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.scaled_min).fold(f64::INFINITY, f64::min);
    Ok(SecondEigenvalueFloor {
        spread: hi / lo,
        positive: lo > 0.0,
        rows,
    })
}

/// Positive ground state of the free Dirichlet graph Laplacian on the box,
/// a product of sines.
pub fn dirichlet_free_ground_state(box_spec: &BoxSpec) -> Vec<f64> {
    let side = box_spec.points_per_side();
    let profile: Vec<f64> = (0..side)
        .map(|k| (std::f64::consts::PI * (k + 1) as f64 / (side + 1) as f64).sin())
        .collect();
    (0..box_spec.order())
        .map(|idx| {
            let multi = unravel(idx, side, box_spec.dim);
            multi[..box_spec.dim].iter().map(|&k| profile[k]).product()
        })
        .collect()
}

/// Rayleigh quotient of `ψ_L · Φ_L` for the Dirichlet operator `H^D_ω`,
/// with `ψ_L` the free Dirichlet ground state and `Φ_L` the patchwork.
pub fn dirichlet_test_energy(phi: &PhiProfile, v: &UnitCellPotential, config: &DisorderConfig) -> Result<f64> {
    if config.box_spec.boundary != Boundary::Dirichlet {
        return Err(Error::invalid("the test energy is taken on a Dirichlet box"));
    }
    let patch = patchwork_state(phi, config)?;
    let psi = dirichlet_free_ground_state(&config.box_spec);
    let u: Vec<f64> = patch.iter().zip(&psi).map(|(a, b)| a * b).collect();
    let a = alloy_operator(v, config)?;
    rayleigh_quotient(&a, &u)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsRow {
    pub half_width: usize,
    pub lower: FitReport,
    pub upper: FitReport,
    /// `max / min` of `N(E) / E^{d/2}` over the window, per bracket.
    pub lower_ratio: f64,
    pub upper_ratio: f64,
    pub bracket_ordered: bool,
    pub publishable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VanHoveBounds {
    pub dim: usize,
    pub window: [f64; 2],
    pub rows: Vec<BoundsRow>,
    #[serde(skip)]
    pub curves: Vec<(IdsCurve, IdsCurve)>,
}

#[allow(clippy::too_many_arguments)]
/// Brackets the IDS of the model for every half-width, fits power laws to
/// both brackets over `window` and reports the two-sided constants.
pub fn vanhove_bounds(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    half_widths: &[usize],
    energies: &[f64],
    window: [f64; 2],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<VanHoveBounds> {
    let dim = v.dim();
    if !(1..=2).contains(&dim) {
        return Err(Error::Unsupported(format!("van Hove bounds run in d = 1, 2 (got {dim})")));
    }
    let exponent = dim as f64 / 2.0;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &l in half_widths {
        let bx = BoxSpec::centered(dim, l, v.n(), Boundary::Neumann)?;
        let br = bracket_ids(v, law, &bx, energies, realizations, seed, exec)?;
        let lo = CurveData::from_curve(&br.lower);
        let up = CurveData::from_curve(&br.upper);
        rows.push(BoundsRow {
            half_width: l,
            lower: fit_power(&lo, 0.0, window)?,
            upper: fit_power(&up, 0.0, window)?,
            lower_ratio: power_ratio(&lo, 0.0, window, exponent),
            upper_ratio: power_ratio(&up, 0.0, window, exponent),
            bracket_ordered: br.ordered(),
            publishable: br.lower.publishable() && br.upper.publishable(),
        });
        curves.push((br.lower, br.upper));
    }
    Ok(VanHoveBounds {
        dim,
        window,
        rows,
        curves,
    })
}
