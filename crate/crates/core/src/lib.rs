//! Numerical laboratory for alloy-type random Schrödinger operators
//! `H_ω = -Δ + Σ_γ ω_γ V(x - γ)`.
//!
//! The crate determines the bottom of the almost-sure spectrum from the
//! single-cell Neumann ground energies, estimates the integrated density of
//! states by disorder-averaged eigenvalue counting with Dirichlet/Neumann
//! bracketing, fits Lifshitz and power-law edge exponents, and builds the
//! sign-changing example whose density of states has a van Hove edge.

pub mod cli;
pub mod eigen;
pub mod error;
pub mod ids;
pub mod lifshitz;
pub mod model;
pub mod operator;
pub mod parallel;
pub mod profiles;
pub mod single_site;
pub mod vanhove;

pub use error::{Error, Result};
pub use model::{BoxSpec, Boundary, DisorderConfig, DisorderLaw, LawKind, UnitCellPotential};
pub use operator::SparseSymmetric;
