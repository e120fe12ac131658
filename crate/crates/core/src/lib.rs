//! Periodic Fourier-based metrics and exact Wasserstein distances between
//! discrete probability measures on regular grids.

pub mod corpus;
pub mod equivalence;
pub mod error;
pub mod fourier_metrics;
pub mod grid_measure;
pub mod imageio;
pub mod protocol;
pub mod spectrum;
pub mod wasserstein;

pub use error::{Error, Result};
pub use grid_measure::{Center, GridMeasure, Moments, Translation};
pub use spectrum::{Spectrum, SpectrumCache};
