//! Numerical laboratory for Schrödinger operators `-Delta - V` with complex,
//! randomly signed potentials on periodic grids.
//!
//! Modules follow the pipeline: [`grid`] (spectral grids and multipliers),
//! [`potential`] (families and decompositions), [`randomize`] (seeded lattice
//! fields), [`bs`] (Birman–Schwinger matrices), [`extension`] (sphere nets and
//! the sandwich `E* V E`), [`spectra`] (dense eigenvalues) and [`harness`]
//! (bound checks and Monte Carlo campaigns).

pub mod bs;
pub mod error;
pub mod extension;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod potential;
pub mod randomize;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
pub use grid::{build_grid, FrequencySymbol, Grid, GridSpec};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;
pub use potential::{PotentialField, PotentialKind, PotentialSpec, Sampling};
pub use randomize::{Distribution, OmegaField, OmegaSpec};
pub use spectra::{SpectralPoint, SpectrumFilter};
