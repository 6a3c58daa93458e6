//! Numerical laboratory for quantum spin systems with quenched Gaussian disorder.
//!
//! The crate builds disordered spin Hamiltonians on small lattices, exactly
//! diagonalizes them, and evaluates the thermal objects that finite-volume
//! identities are made of: Gibbs expectations, Duhamel two-point brackets,
//! replica overlaps, and disorder averages (exact Gauss–Hermite quadrature at
//! small coupling counts, seeded Monte Carlo otherwise).
//!
//! Layering, bottom up:
//! - [`spin`]: spin-S matrices, lattice geometry, interaction-range families,
//!   and embedded product operators.
//! - [`model`]: Hamiltonian assembly from term specifications, named presets,
//!   and replica-coupled total Hamiltonians.
//! - [`gibbs`]: eigensolves and single-system thermal evaluations.
//! - [`replica`]: factorized replicated expectations, overlap identities, and
//!   the brute-force tensor oracle that validates the factorization.
//! - [`disorder`]: Gaussian draw streams, quadrature, and estimators.
//!
//! Everything is deterministic: disorder streams are counter-based per sample
//! index, reductions are fixed-order pairwise sums, and the eigensolver runs
//! sequentially, so results are bitwise independent of worker count.

pub mod disorder;
pub mod error;
pub mod gibbs;
pub mod linalg;
pub mod model;
pub mod replica;
pub mod spin;

pub use error::{Error, Result};
