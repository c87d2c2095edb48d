//! Gaussian random-matrix ensembles of the ten symmetry classes, a Grassmann
//! algebra and supermatrix kernel, chart-based Berezin integration, and
//! numerical checks of the supersymmetric integral representations.

pub mod berezin;
pub mod cli;
pub mod ensembles;
pub mod error;
pub mod mc;
pub mod quadrature;
pub mod spectral;
pub mod superalg;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
