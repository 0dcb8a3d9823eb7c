//! Built-in single-site potentials, addressable by name from run configs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::UnitCellPotential;
use crate::vanhove::{vanhove_potential, DEFAULT_KAPPA};

fn raised_cosine(t: f64, r: f64) -> f64 {
    if t.abs() < r {
        0.5 * (1.0 + (std::f64::consts::PI * t / r).cos())
    } else {
        0.0
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius <= 0.5) {
        return Err(Error::invalid(format!("radius {radius} outside (0, 1/2]")));
    }
    Ok(())
}

/// `A Π_j (1 + cos(π x_j / r)) / 2` on `|x_j| < r`: a truncated cosine
/// well, nonnegative for `A > 0`.
pub fn cosine_well(dim: usize, n: usize, amplitude: f64, radius: f64) -> Result<UnitCellPotential> {
    check_radius(radius)?;
    UnitCellPotential::tabulate(dim, n, |x| {
        amplitude * x.iter().map(|&t| raised_cosine(t, radius)).product::<f64>()
    })
}

/// `A (cos(2π x_1 / r) + bias) Π_j (1 + cos(π x_j / r)) / 2`: positive at
/// the centre, negative on a ring around it for `bias < 1`.
pub fn sign_changing(dim: usize, n: usize, amplitude: f64, radius: f64, bias: f64) -> Result<UnitCellPotential> {
    check_radius(radius)?;
    let v = UnitCellPotential::tabulate(dim, n, |x| {
        let ring = (2.0 * std::f64::consts::PI * x[0] / radius).cos() + bias;
        amplitude * ring * x.iter().map(|&t| raised_cosine(t, radius)).product::<f64>()
    })?;
    if v.min() >= 0.0 || v.max() <= 0.0 {
        return Err(Error::invalid("profile does not change sign on this mesh"));
    }
    Ok(v)
}

/// A named potential with its parameters, as written in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    CosineWell {
        amplitude: f64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    SignChanging {
        amplitude: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_bias")]
        bias: f64,
    },
    Vanhove {
        delta: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Values on the `n^d` cell nodes, row-major.
    Tabulated { values: Vec<f64> },
}

fn default_radius() -> f64 {
    0.4
}

fn default_bias() -> f64 {
    0.3
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl PotentialSpec {
    pub fn build(&self, dim: usize, n: usize) -> Result<UnitCellPotential> {
        match self {
            PotentialSpec::Zero => Ok(UnitCellPotential::zero(dim, n)),
            PotentialSpec::CosineWell { amplitude, radius } => cosine_well(dim, n, *amplitude, *radius),
            PotentialSpec::SignChanging { amplitude, radius, bias } => {
                sign_changing(dim, n, *amplitude, *radius, *bias)
            }
            PotentialSpec::Vanhove { delta, kappa } => Ok(vanhove_potential(dim, n, *delta, *kappa)?.1),
            PotentialSpec::Tabulated { values } => UnitCellPotential::from_values(dim, n, values.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Zero => "zero",
            PotentialSpec::CosineWell { .. } => "cosine_well",
            PotentialSpec::SignChanging { .. } => "sign_changing",
            PotentialSpec::Vanhove { .. } => "vanhove",
            PotentialSpec::Tabulated { .. } => "tabulated",
        }
    }
}
