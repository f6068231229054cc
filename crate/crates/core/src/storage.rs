//! Storage-and-retrieval as diffusion blur of the stored complex amplitude.
//!
//! The retrieved field is the stored field convolved with the normalized
//! Gaussian propagator `G(r) = exp(-r^2 / 4 D t) / (4 pi D t)`, evaluated
//! spectrally with the analytic multiplier `exp(-D t |k|^2)`. Boundaries
//! are periodic; the wrap-around guard keeps the diffusion length below a
//! quarter of the window.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{forward_spectrum, inverse_spectrum};
use crate::grid::{ComplexField, GridSpec, SpectralField};

/// 25 cm^2/s, the warm Rb + Ne buffer gas value.
pub const DEFAULT_DIFFUSION: f64 = 2.5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    /// Diffusion coefficient `D`, m^2/s.
    pub diffusion: f64,
    /// Storage duration, s.
    pub duration: f64,
}

impl StorageParams {
    pub fn new(diffusion: f64, duration: f64) -> Result<Self> {
        if !(diffusion.is_finite() && diffusion >= 0.0) {
            return Err(Error::validation(
                "storage",
                format!("diffusion coefficient {diffusion} must be non-negative"),
            ));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::validation(
                "storage",
                format!("storage time {duration} must be non-negative"),
            ));
        }
        Ok(StorageParams { diffusion, duration })
    }

    /// `sqrt(4 D t)`, the 1/e radius of the propagator.
    pub fn diffusion_length(&self) -> f64 {
        (4.0 * self.diffusion * self.duration).sqrt()
    }
}

pub fn diffusion_kernel_spectrum(grid: &GridSpec, params: &StorageParams) -> SpectralField {
    let dt = params.diffusion * params.duration;
    SpectralField::from_fn(*grid, |kx, ky| Complex64::new((-dt * (kx * kx + ky * ky)).exp(), 0.0))
}

pub fn check_wrap_around(grid: &GridSpec, params: &StorageParams) -> Result<()> {
    let length = params.diffusion_length();
    let window = grid.width().min(grid.height());
    if length > 0.25 * window {
        return Err(Error::WrapAround {
            length_m: length,
            window_m: window,
        });
    }
    Ok(())
}

pub fn diffuse(field: &ComplexField, params: &StorageParams) -> Result<ComplexField> {
    let params = StorageParams::new(params.diffusion, params.duration)?;
    check_wrap_around(field.grid(), &params)?;
    let kernel = diffusion_kernel_spectrum(field.grid(), &params);
    let blurred = forward_spectrum(field).multiply(&kernel)?;
    Ok(inverse_spectrum(&blurred))
}

/// One retrieved field per storage time, in input order. A zero time
/// returns the input unchanged.
pub fn storage_sweep(field: &ComplexField, diffusion: f64, times: &[f64]) -> Result<Vec<ComplexField>> {
    let params = times
        .iter()
        .map(|&t| {
            StorageParams::new(diffusion, t)
                .and_then(|p| check_wrap_around(field.grid(), &p).map(|_| p))
                .map_err(|e| Error::AtTime {
                    time_s: t,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    params
        .par_iter()
        .map(|p| {
            if p.duration == 0.0 {
                Ok(field.clone())
            } else {
                diffuse(field, p).map_err(|e| Error::AtTime {
                    time_s: p.duration,
                    source: Box::new(e),
                })
            }
        })
        .collect()
}
