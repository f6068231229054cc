//! Unitary 2-D spectral transforms.
//!
//! The forward transform is `F(k) = N^{-1/2} sum_r f(r) exp(-i k.r)` with
//! `r` the physical cell-centered coordinate, so a field that is real and
//! even about the window center has a real, even spectrum. This is the
//! plain FFT followed by a per-axis phase ramp; both factors are unitary,
//! so Parseval holds without bookkeeping.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::{ComplexField, GridSpec, SpectralField};

pub fn forward_spectrum(field: &ComplexField) -> SpectralField {
    let grid = *field.grid();
    let mut data = field.values().to_vec();
    transform_2d(&grid, &mut data, Direction::Forward);
    SpectralField::from_parts(grid, data)
}

pub fn inverse_spectrum(spectrum: &SpectralField) -> ComplexField {
    let grid = *spectrum.grid();
    let mut data = spectrum.values().to_vec();
    transform_2d(&grid, &mut data, Direction::Inverse);
    // Round-off can't produce non-finite values from finite input; spectra
    // built by this crate are finite by construction.
    ComplexField::from_parts(grid, data)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

/// `exp(+i k_n c dx)` per bin, `c = (count - 1) / 2`.
fn centering_ramp(grid: &GridSpec, count: usize, dir: Direction) -> Vec<Complex64> {
    let c = 0.5 * (count as f64 - 1.0);
    let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
    (0..count)
        .map(|n| {
            let k = grid.frequency(n, count);
            Complex64::from_polar(1.0, sign * k * c * grid.dx())
        })
        .collect()
}

fn transform_2d(grid: &GridSpec, data: &mut [Complex64], dir: Direction) {
    let nx = grid.nx();
    let ny = grid.ny();
    let ramp_x = centering_ramp(grid, nx, dir);
    let ramp_y = centering_ramp(grid, ny, dir);
    let scale = 1.0 / ((nx * ny) as f64).sqrt();

    if dir == Direction::Inverse {
        apply_ramps(data, nx, &ramp_x, &ramp_y, 1.0);
    }

    let row_fft = plan(nx, dir);
    data.par_chunks_mut(nx).for_each(|row| row_fft.process(row));

    let mut cols = transpose(data, nx, ny);
    let col_fft = plan(ny, dir);
    cols.par_chunks_mut(ny).for_each(|col| col_fft.process(col));
    let back = transpose(&cols, ny, nx);
    data.copy_from_slice(&back);

    match dir {
        Direction::Forward => apply_ramps(data, nx, &ramp_x, &ramp_y, scale),
        Direction::Inverse => data.par_iter_mut().for_each(|v| *v *= scale),
    }
}

fn apply_ramps(data: &mut [Complex64], nx: usize, ramp_x: &[Complex64], ramp_y: &[Complex64], scale: f64) {
    data.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let ry = ramp_y[j] * scale;
        for (v, rx) in row.iter_mut().zip(ramp_x) {
            *v *= rx * ry;
        }
    });
}

/// Transposes a row-major `rows x cols` block (row length `cols`).
fn transpose(data: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    const TILE: usize = 32;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for jb in (0..rows).step_by(TILE) {
        for ib in (0..cols).step_by(TILE) {
            for j in jb..(jb + TILE).min(rows) {
                for i in ib..(ib + TILE).min(cols) {
                    out[i * rows + j] = data[j * cols + i];
                }
            }
        }
    }
    out
}

/// Largest angular frequency representable along an axis, `pi / dx`.
pub fn nyquist(grid: &GridSpec) -> f64 {
    PI / grid.dx()
}
