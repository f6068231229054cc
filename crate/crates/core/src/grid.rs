//! Sampling lattice and the field containers that live on it.
//!
//! Coordinates are cell-centered: sample `i` along x sits at
//! `(i - (nx - 1) / 2) * dx`, so the optical axis falls at the geometric
//! window center (between samples when the count is even). Storage is
//! row-major with x varying fastest; row `j` holds `y_j`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted sample count per axis.
pub const MIN_SAMPLES: usize = 16;

/// Rb D1 probe wavelength.
pub const DEFAULT_WAVELENGTH: f64 = 795e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    dx: f64,
    wavelength: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, wavelength: f64) -> Result<Self> {
        if nx < MIN_SAMPLES || ny < MIN_SAMPLES {
            return Err(Error::validation(
                "grid",
                format!("sample counts {nx}x{ny} below minimum {MIN_SAMPLES}"),
            ));
        }
        if nx > u32::MAX as usize || ny > u32::MAX as usize {
            return Err(Error::validation("grid", "sample count exceeds u32 range"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::validation("grid", format!("pitch dx = {dx} must be positive")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::validation(
                "grid",
                format!("wavelength {wavelength} must be positive"),
            ));
        }
        Ok(GridSpec {
            nx,
            ny,
            dx,
            wavelength,
        })
    }

    /// Square `n x n` grid.
    pub fn square(n: usize, dx: f64, wavelength: f64) -> Result<Self> {
        Self::new(n, n, dx, wavelength)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dx
    }

    /// Half of the smaller window extent: the largest circle about the
    /// center that stays inside the window.
    pub fn half_window(&self) -> f64 {
        0.5 * self.width().min(self.height())
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.nx as f64 - 1.0)) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * (self.ny as f64 - 1.0)) * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Fractional sample index of physical coordinate `x`.
    pub fn x_index(&self, x: f64) -> f64 {
        x / self.dx + 0.5 * (self.nx as f64 - 1.0)
    }

    pub fn y_index(&self, y: f64) -> f64 {
        y / self.dx + 0.5 * (self.ny as f64 - 1.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= 0.5 * self.width() && y.abs() <= 0.5 * self.height()
    }

    /// Angular spatial frequency of spectral bin `n` on an axis of `count` samples.
    pub(crate) fn frequency(&self, n: usize, count: usize) -> f64 {
        let signed = if n < count.div_ceil(2) {
            n as f64
        } else {
            n as f64 - count as f64
        };
        2.0 * std::f64::consts::PI * signed / (count as f64 * self.dx)
    }

    pub fn kx(&self, i: usize) -> f64 {
        self.frequency(i, self.nx)
    }

    pub fn ky(&self, j: usize) -> f64 {
        self.frequency(j, self.ny)
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} @ {:e} m vs {}x{} @ {:e} m",
                self.nx, self.ny, self.dx, other.nx, other.ny, other.dx
            )))
        }
    }
}

/// Convenience constructor mirroring [`GridSpec::new`].
pub fn make_grid(nx: usize, ny: usize, dx: f64, wavelength: f64) -> Result<GridSpec> {
    GridSpec::new(nx, ny, dx, wavelength)
}

/// Complex scalar field sampled on a [`GridSpec`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "field",
                format!("{} values for a {}-sample grid", values.len(), grid.len()),
            ));
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::validation(
                "field",
                format!("non-finite value at sample {index}"),
            ));
        }
        Ok(ComplexField { grid, values })
    }

    /// Callers guarantee length and finiteness.
    pub(crate) fn from_parts(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ComplexField { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_parts(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    /// Evaluates `f(x, y)` at every cell center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let xs = grid.xs();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values
            .par_chunks_mut(grid.nx())
            .enumerate()
            .for_each(|(j, row)| {
                let y = grid.y(j);
                for (v, &x) in row.iter_mut().zip(&xs) {
                    *v = f(x, y);
                }
            });
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.grid.nx() + i]
    }

    /// Total power `sum |E|^2 dx^2`.
    pub fn power(&self) -> f64 {
        let dx2 = self.grid.dx() * self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx2
    }

    /// Complex amplitude integral `sum E dx^2`.
    pub fn integral(&self) -> Complex64 {
        let dx2 = self.grid.dx() * self.grid.dx();
        self.values.iter().sum::<Complex64>() * dx2
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn intensity(&self) -> IntensityImage {
        IntensityImage::from_parts(self.grid, self.values.iter().map(|v| v.norm_sqr()).collect())
    }

    /// Pointwise map producing a new field on the same grid.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Coordinate-aware pointwise map.
    pub fn map_xy(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> Result<Self> {
        let nx = self.grid.nx();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(self.grid.x(idx % nx), self.grid.y(idx / nx), v))
            .collect();
        Self::new(self.grid, values)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &ComplexField, b: Complex64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Self::new(self.grid, values)
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        self.combine(one, other, one)
    }

    /// Bilinear interpolation of the complex samples at a physical point.
    /// Points beyond the outermost cell centers are clamped to the edge.
    pub fn sample(&self, x: f64, y: f64) -> Complex64 {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let fx = self.grid.x_index(x).clamp(0.0, (nx - 1) as f64);
        let fy = self.grid.y_index(y).clamp(0.0, (ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(nx - 2);
        let j0 = (fy.floor() as usize).min(ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        v00 * ((1.0 - tx) * (1.0 - ty)) + v10 * (tx * (1.0 - ty)) + v01 * ((1.0 - tx) * ty) + v11 * (tx * ty)
    }

    /// Intensity-weighted root-mean-square radius about the intensity centroid.
    pub fn rms_radius(&self) -> Result<f64> {
        self.intensity().rms_radius()
    }
}

/// Real, non-negative image on a grid (intensity patterns, interferograms).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    grid: GridSpec,
    values: Vec<f64>,
}

impl IntensityImage {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "image",
                format!("{} values for a {}-sample grid", values.len(), grid.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("image", "non-finite pixel"));
        }
        Ok(IntensityImage { grid, values })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>) -> Self {
        IntensityImage { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx() + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let fx = self.grid.x_index(x);
        let fy = self.grid.y_index(y);
        if fx < 0.0 || fy < 0.0 || fx > (nx - 1) as f64 || fy > (ny - 1) as f64 {
            return 0.0;
        }
        let i0 = (fx.floor() as usize).min(nx - 2);
        let j0 = (fy.floor() as usize).min(ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        self.at(i0, j0) * (1.0 - tx) * (1.0 - ty)
            + self.at(i0 + 1, j0) * tx * (1.0 - ty)
            + self.at(i0, j0 + 1) * (1.0 - tx) * ty
            + self.at(i0 + 1, j0 + 1) * tx * ty
    }

    /// Mirror image under `y -> -y`.
    pub fn flip_y(&self) -> Self {
        let nx = self.grid.nx();
        let values = self
            .values
            .chunks(nx)
            .rev()
            .flat_map(|row| row.iter().copied())
            .collect();
        Self::from_parts(self.grid, values)
    }

    pub fn centroid(&self) -> Result<(f64, f64)> {
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (idx, &v) in self.values.iter().enumerate() {
            let x = self.grid.x(idx % self.grid.nx());
            let y = self.grid.y(idx / self.grid.nx());
            s += v;
            sx += v * x;
            sy += v * y;
        }
        if s <= 0.0 {
            return Err(Error::ZeroPower);
        }
        Ok((sx / s, sy / s))
    }

    pub fn rms_radius(&self) -> Result<f64> {
        let (cx, cy) = self.centroid()?;
        let (mut s, mut sr2) = (0.0, 0.0);
        for (idx, &v) in self.values.iter().enumerate() {
            let x = self.grid.x(idx % self.grid.nx()) - cx;
            let y = self.grid.y(idx / self.grid.nx()) - cy;
            s += v;
            sr2 += v * (x * x + y * y);
        }
        Ok((sr2 / s).sqrt())
    }
}

/// Spectrum of a [`ComplexField`]: bin `(i, j)` holds frequency
/// `(kx(i), ky(j))` in standard (unshifted) transform order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "spectrum",
                format!("{} values for a {}-sample grid", values.len(), grid.len()),
            ));
        }
        Ok(SpectralField { grid, values })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<Complex64>) -> Self {
        SpectralField { grid, values }
    }

    /// Builds a spectrum by evaluating `f(kx, ky)` on the frequency lattice.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let kx: Vec<f64> = (0..grid.nx()).map(|i| grid.kx(i)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let ky = grid.ky(j);
            values.extend(kx.iter().map(|&kx| f(kx, ky)));
        }
        Self::from_parts(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.grid.nx() + i]
    }

    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Pointwise product with another spectrum on the same grid.
    pub fn multiply(&self, other: &SpectralField) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self::from_parts(self.grid, values))
    }
}
