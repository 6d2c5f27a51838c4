//! Exit-time moment spectra of Brownian motion on discretized domains,
//! the Dirichlet eigenvalue bounds they imply, and numerical checks of the
//! identities linking moments, heat content and spectrum.
//!
//! Brownian motion here has generator Δ (not Δ/2): a step of length `dt`
//! has variance `2·dt` per coordinate, and on the unit interval
//! `E^x[τ] = x(1 − x)/2`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod hierarchy;
mod linalg;
pub mod montecarlo;
pub mod operators;
pub mod report;
pub mod spectral;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{analytic_volume, build_grid, grid_volume, DomainSpec, Grid};
pub use hierarchy::{solve_hierarchy, HierarchySolution, MomentSpectrum};
pub use operators::{
    assemble_divergence_form, assemble_laplacian, solve_spd, CoefficientField, Provenance, SparseOperator,
};
pub use spectral::{full_spectrum, smallest_eigenpairs, SpectralData};
