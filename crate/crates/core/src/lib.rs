//! Microwave tomography toolkit for 2D breast imaging.
//!
//! The crate covers the whole chain: random breast phantoms with realistic
//! tissue dielectrics, a method-of-moments forward solver for the
//! multiview-multistatic scattering matrix, a fully-connected network that maps
//! scattered fields straight to permittivity/conductivity maps, classical
//! iterative baselines (Born, DBIM, CSI) and spectral quality metrics.

pub mod ann;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod inversion;
pub mod medium;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod special;

pub use error::{Error, ErrorKind, Result};
pub use grid::{AntennaArray, Grid};
pub use medium::{complex_permittivity, contrast_of, wavenumber, BackgroundMedium, ContrastMap, DielectricMap};
