//! Exact-diagonalization toolkit for spin-1/2 and spinless-fermion chains.

pub mod bell;
pub mod clustering;
pub mod dynamics;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod models;
pub mod ops;
pub mod runner;
pub mod spectral;
pub mod split_diag;

pub use error::{Error, Result};
pub use linalg::C64;
pub use models::{
    build_hamiltonian, build_sector_hamiltonian, fermion_spec, heisenberg_spec, sector_decompose, verify_symmetries,
    xxz_spec, ChainConfig, DensityTerm, InteractionSpec, SectorLabel, Symmetry, Term,
};
pub use ops::*;
