//! Multi-ring perfect optical vortex beams and their storage in a
//! diffusing atomic medium.
//!
//! Fields are sampled on a [`GridSpec`] and stored as [`ComplexField`]s.
//! [`beams`] synthesizes them, [`storage`] blurs them by diffusion,
//! [`analysis`] and [`diagnostics`] measure what came out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod beams;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod storage;

pub use error::{Error, ErrorClass, Result};
pub use grid::{make_grid, ComplexField, GridSpec, IntensityImage, SpectralField};
