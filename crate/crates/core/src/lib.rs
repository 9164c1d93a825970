//! Deformed Wigner matrices `M = W / sqrt(n) + (theta / n) 1 1^T`: sampling,
//! spectra, and exact checks of the closed-path combinatorics behind the
//! trace-moment method.

pub mod combinatorics;
pub mod correspondence;
pub mod dyck_stats;
pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod moment_oracle;
pub mod path_model;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
