//! The single-cell Neumann operator `-Δ + λV`: ground energy `E₋(λ)`, its
//! concavity, the spectral bottom `min(E₋(a), E₋(b))` and the reflection
//! extension of the cell ground state to a box.

use std::io::Write;

use serde::Serialize;

use crate::eigen::{lowest_eigenpairs, EigenResult};
use crate::error::{Error, Result};
use crate::model::{
    assemble_alloy_potential, check_reflection_symmetry, constant_config, derive_seed, ravel,
    reflection_deviation, sample_disorder, unravel, BoxSpec, Boundary, DisorderLaw, UnitCellPotential, MAX_DIM,
};
use crate::operator::{discretize, SparseSymmetric};
use crate::parallel::Execution;

/// Residual tolerance (relative to the Gershgorin norm) for ground states.
pub const GROUND_TOL: f64 = 1e-12;
pub const GROUND_MAX_MATVECS: usize = 200_000;
/// Second differences of `E₋` above `CONCAVITY_TOL * scale` break concavity.
pub const CONCAVITY_TOL: f64 = 1e-8;
/// `|E₋(a) - E₋(b)| <= DEGENERACY_TOL * max(|E₋(a)|, |E₋(b)|, 1)` is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Slack allowed below the floor `min(E₋(a), E₋(b))`, in spectral-scale units.
pub const BRACKET_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct GroundState {
    pub energy: f64,
    /// Positive, `h^d Σ ψ² = 1`.
    pub psi: Vec<f64>,
    /// `‖Aψ - Eψ‖ / ‖ψ‖`.
    pub residual: f64,
}

/// Lowest eigenpair of a matrix with nonpositive off-diagonals, with the
/// eigenvector made positive and normalized with weight `weight`.
pub(crate) fn perron_ground_state(a: &SparseSymmetric, weight: f64) -> Result<GroundState> {
    let EigenResult {
        eigenvalues,
        mut eigenvectors,
        residuals,
        ..
    } = lowest_eigenpairs(a, 1, GROUND_TOL, GROUND_MAX_MATVECS)?;
    let mut psi = eigenvectors.swap_remove(0);
    if psi.iter().sum::<f64>() < 0.0 {
        psi.iter_mut().for_each(|x| *x = -*x);
    }
    let min_entry = psi.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_entry > 0.0) {
        return Err(Error::NotPositive { min_entry });
    }
    let scale = (psi.iter().map(|x| x * x).sum::<f64>() * weight).sqrt();
    psi.iter_mut().for_each(|x| *x /= scale);
    Ok(GroundState {
        energy: eigenvalues[0],
        psi,
        residual: residuals[0],
    })
}

/// `E₋(λ)` and the positive ground state of `-Δ + λV` with Neumann
/// conditions on the unit cell.
pub fn ground_energy(v: &UnitCellPotential, lambda: f64) -> Result<GroundState> {
    let bx = v.unit_box(Boundary::Neumann);
    let scaled = v.scaled(lambda);
    let a = discretize(&bx, scaled.values())?;
    perron_ground_state(&a, bx.h().powi(bx.dim as i32))
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundCurve {
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Largest interior second difference, positive where concavity fails.
    pub max_second_difference: f64,
    pub concave: bool,
}

/// Second differences `E(λ_{i-1}) - 2 E(λ_i) + E(λ_{i+1})`, generalized to
/// nonuniform grids as twice the gap between the chord and the curve.
pub fn second_differences(lambdas: &[f64], energies: &[f64]) -> Vec<f64> {
    (1..lambdas.len().saturating_sub(1))
        .map(|i| {
            let (l0, l1, l2) = (lambdas[i - 1], lambdas[i], lambdas[i + 1]);
            let w = (l1 - l0) / (l2 - l0);
            2.0 * ((1.0 - w) * energies[i - 1] + w * energies[i + 1] - energies[i])
        })
        .collect()
}

pub fn ground_curve(v: &UnitCellPotential, lambdas: &[f64]) -> Result<GroundCurve> {
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("coupling grid must be strictly ascending"));
    }
    let mut energies = Vec::with_capacity(lambdas.len());
    let mut residuals = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let gs = ground_energy(v, l)?;
        energies.push(gs.energy);
        residuals.push(gs.residual);
    }
    let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let max_second_difference = second_differences(lambdas, &energies)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let concave = !(max_second_difference > CONCAVITY_TOL * scale);
    Ok(GroundCurve {
        lambdas: lambdas.to_vec(),
        energies,
        residuals,
        max_second_difference,
        concave,
    })
}

impl GroundCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,E_minus,residual")?;
        for i in 0..self.lambdas.len() {
            writeln!(out, "{},{},{}", self.lambdas[i], self.energies[i], self.residuals[i])?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    A,
    B,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralBottom {
    pub e_minus: f64,
    pub edge: Edge,
    pub degenerate: bool,
    pub e_a: f64,
    pub e_b: f64,
}

impl SpectralBottom {
    /// `max(|E₋(a)|, |E₋(b)|, 1)`.
    pub fn scale(&self) -> f64 {
        self.e_a.abs().max(self.e_b.abs()).max(1.0)
    }
}

/// `E₋ = min(E₋(a), E₋(b))` for a reflection-symmetric `V`.
pub fn spectral_bottom(v: &UnitCellPotential, law: &DisorderLaw) -> Result<SpectralBottom> {
    let (ok, deviation) = check_reflection_symmetry(v, v.symmetry_tol);
    if !ok {
        return Err(Error::NotSymmetric {
            deviation,
            tol: v.symmetry_tol,
        });
    }
    let e_a = ground_energy(v, law.a)?.energy;
    let e_b = if law.b == law.a { e_a } else { ground_energy(v, law.b)?.energy };
    let scale = e_a.abs().max(e_b.abs()).max(1.0);
    let degenerate = (e_a - e_b).abs() <= DEGENERACY_TOL * scale;
    let (e_minus, edge) = if e_b < e_a && !degenerate {
        (e_b, Edge::B)
    } else {
        (e_a.min(e_b), Edge::A)
    };
    Ok(SpectralBottom {
        e_minus,
        edge,
        degenerate,
        e_a,
        e_b,
    })
}

/// Extends a reflection-symmetric cell vector to the box by mirroring it
/// across every cell interface (cells of odd parity are flipped).
pub fn reflect_extend(psi: &[f64], cell_n: usize, box_spec: &BoxSpec) -> Result<Vec<f64>> {
    let dim = box_spec.dim;
    if cell_n != box_spec.n || psi.len() != cell_n.pow(dim as u32) {
        return Err(Error::DimensionMismatch {
            expected: box_spec.n.pow(dim as u32),
            got: psi.len(),
        });
    }
    let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let deviation = reflection_deviation(dim, cell_n, psi);
    let tol = 1e-9 * peak.max(f64::MIN_POSITIVE);
    if deviation > tol {
        return Err(Error::NotSymmetric { deviation, tol });
    }
    let side = box_spec.points_per_side();
    let first = box_spec.first_site();
    let mut out = vec![0.0; box_spec.order()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let multi = unravel(idx, side, dim);
        let mut local = [0usize; MAX_DIM];
        for axis in 0..dim {
            let cell = first + (multi[axis] / cell_n) as i64;
            let k = multi[axis] % cell_n;
            local[axis] = if cell.rem_euclid(2) == 1 { cell_n - 1 - k } else { k };
        }
        *slot = psi[ravel(&local[..dim], cell_n)];
    }
    Ok(out)
}

/// `‖(H - E)Ψ‖ / ‖Ψ‖` on the box. For Dirichlet boxes only nodes away from
/// the boundary enter, since the extension does not vanish there.
pub fn extension_residual(a: &SparseSymmetric, box_spec: &BoxSpec, psi: &[f64], energy: f64) -> Result<f64> {
    let hp = a.apply(psi)?;
    let side = box_spec.points_per_side();
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, (&y, &x)) in hp.iter().zip(psi).enumerate() {
        if box_spec.boundary == Boundary::Dirichlet {
            let multi = unravel(idx, side, box_spec.dim);
            if multi[..box_spec.dim].iter().any(|&k| k == 0 || k == side - 1) {
                continue;
            }
        }
        num += (y - energy * x).powi(2);
        den += x * x;
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}

/// The ground state of the cell at coupling `c`, extended to `box_spec`,
/// and its eigen-residual at `E₋(c)` for the constant configuration `c`.
pub fn extend_ground_state(v: &UnitCellPotential, c: f64, box_spec: &BoxSpec) -> Result<(Vec<f64>, f64, f64)> {
    let gs = ground_energy(v, c)?;
    let ext = reflect_extend(&gs.psi, v.n(), box_spec)?;
    let pot = assemble_alloy_potential(&constant_config(box_spec, c), v)?;
    let a = discretize(box_spec, &pot)?;
    let res = extension_residual(&a, box_spec, &ext, gs.energy)?;
    Ok((ext, gs.energy, res))
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketFloor {
    /// Smallest box ground energy over the realizations.
    pub empirical_min: f64,
    /// `min(E₋(a), E₋(b))`.
    pub floor: f64,
    pub ground_energies: Vec<f64>,
    pub holds: bool,
}

/// Ground energy of the Neumann box `H_ω` for one configuration.
pub fn box_ground_energy(v: &UnitCellPotential, config: &crate::model::DisorderConfig) -> Result<f64> {
    let pot = assemble_alloy_potential(config, v)?;
    let a = discretize(&config.box_spec, &pot)?;
    let r = lowest_eigenpairs(&a, 1, GROUND_TOL, GROUND_MAX_MATVECS)?;
    Ok(r.eigenvalues[0])
}

/// Empirical minimum of the Neumann box ground energy over `realizations`
/// disorder draws, against the floor `min(E₋(a), E₋(b))`.
pub fn neumann_bracket_lower(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    box_spec: &BoxSpec,
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<BracketFloor> {
    if box_spec.boundary != Boundary::Neumann {
        return Err(Error::invalid("the ground-energy floor is stated for Neumann boxes"));
    }
    if realizations == 0 {
        return Err(Error::invalid("at least one realization is required"));
    }
    let bottom = spectral_bottom(v, law)?;
    let results = exec.map(realizations, |r| {
        let cfg = sample_disorder(law, box_spec, derive_seed(seed, r as u64));
        box_ground_energy(v, &cfg)
    });
    let mut ground_energies = Vec::with_capacity(realizations);
    for (index, r) in results.into_iter().enumerate() {
        ground_energies.push(r.map_err(|e| Error::Realization {
            index,
            source: Box::new(e),
        })?);
    }
    let empirical_min = ground_energies.iter().copied().fold(f64::INFINITY, f64::min);
    let holds = empirical_min >= bottom.e_minus - BRACKET_TOL * bottom.scale();
    Ok(BracketFloor {
        empirical_min,
        floor: bottom.e_minus,
        ground_energies,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::cosine_well;

    #[test]
    fn free_cell_ground_state_is_constant() {
        let v = UnitCellPotential::zero(2, 5);
        let gs = ground_energy(&v, 0.0).unwrap();
        assert!(gs.energy.abs() < 1e-12);
        for x in &gs.psi {
            assert!((x - 1.0).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn scaling_covariance_is_exact() {
        let v = cosine_well(1, 8, 3.0, 0.4).unwrap();
        let a = ground_energy(&v, 0.7).unwrap().energy;
        let b = ground_energy(&v.scaled(0.7), 1.0).unwrap().energy;
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_potential_bottom_is_at_a() {
        let v = cosine_well(1, 8, 2.0, 0.4).unwrap();
        let sb = spectral_bottom(&v, &DisorderLaw::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(sb.edge, Edge::A);
        assert!(sb.e_minus.abs() < 1e-12);
        assert!(!sb.degenerate);
    }

    #[test]
    fn asymmetric_potential_refused() {
        let mut vals = vec![0.0; 8];
        vals[2] = 1.0;
        let v = UnitCellPotential::from_values(1, 8, vals).unwrap();
        let err = spectral_bottom(&v, &DisorderLaw::uniform(0.0, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn constant_extension_of_free_state() {
        let bx = BoxSpec::centered(2, 1, 4, Boundary::Neumann).unwrap();
        let ext = reflect_extend(&[1.0; 16], 4, &bx).unwrap();
        assert!(ext.iter().all(|&x| x == 1.0));
        let a = discretize(&bx, &vec![0.0; bx.order()]).unwrap();
        assert_eq!(extension_residual(&a, &bx, &ext, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn second_differences_of_a_parabola() {
        let l = [0.0, 1.0, 3.0];
        let e: Vec<f64> = l.iter().map(|x| -x * x).collect();
        let d = second_differences(&l, &e);
        // chord at 1 is -3, curve is -1: gap -2
        assert!((d[0] + 4.0).abs() < 1e-14);
    }
}
