//! Beam synthesis: perfect optical vortices (single and nested rings),
//! Laguerre-Gaussian vortices, Gaussians and tilted plane waves.
//!
//! A POV ring is `A0 exp[-(r-R)^2/w^2] exp[-i(l phi + Phi0)]`, with `phi`
//! measured counterclockwise from +x. Because of the minus sign in the
//! phase, the winding seen by a detector circling the ring is `-l`; the
//! user-facing "charge" is always `l`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec};

/// One POV ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovRingSpec {
    /// Ring radius `R`, meters.
    pub radius: f64,
    /// Ring half-width `w`, meters.
    pub half_width: f64,
    /// Vortex charge `l`.
    pub charge: i32,
    /// Constant phase offset `Phi0`, radians.
    pub phase: f64,
    /// Amplitude scale `A0`.
    pub amplitude: f64,
}

impl PovRingSpec {
    pub fn new(radius: f64, half_width: f64, charge: i32) -> Result<Self> {
        Self {
            radius,
            half_width,
            charge,
            phase: 0.0,
            amplitude: 1.0,
        }
        .validated()
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::validation("ring", format!("radius {} must be positive", self.radius)));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::validation(
                "ring",
                format!("half-width {} must be positive", self.half_width),
            ));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::validation(
                "ring",
                format!("amplitude {} must be non-negative", self.amplitude),
            ));
        }
        if !self.phase.is_finite() {
            return Err(Error::validation("ring", "phase must be finite"));
        }
        Ok(self)
    }

    /// Field value at a physical point.
    pub fn value_at(&self, x: f64, y: f64) -> Complex64 {
        let r = x.hypot(y);
        let phi = y.atan2(x);
        let envelope = self.amplitude * (-(r - self.radius).powi(2) / self.half_width.powi(2)).exp();
        Complex64::from_polar(envelope, -(self.charge as f64 * phi + self.phase))
    }

    /// `R + 3w`: the radius the ring's tails reach.
    pub fn outer_extent(&self) -> f64 {
        self.radius + 3.0 * self.half_width
    }
}

/// Concentric POV rings, innermost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpovSpec {
    rings: Vec<PovRingSpec>,
    waive_spacing: bool,
}

impl MpovSpec {
    /// Validates ordering and the `R_{m+1} - R_m > 2 max(w_m, w_{m+1})` spacing rule.
    pub fn new(rings: Vec<PovRingSpec>) -> Result<Self> {
        Self::build(rings, false)
    }

    /// Same as [`MpovSpec::new`] but lets adjacent rings sit closer than the spacing rule.
    pub fn with_spacing_waived(rings: Vec<PovRingSpec>) -> Result<Self> {
        Self::build(rings, true)
    }

    pub fn build(rings: Vec<PovRingSpec>, waive_spacing: bool) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::validation("mpov", "at least one ring is required"));
        }
        let rings = rings
            .into_iter()
            .map(PovRingSpec::validated)
            .collect::<Result<Vec<_>>>()?;
        for (m, pair) in rings.windows(2).enumerate() {
            let (inner, outer) = (&pair[0], &pair[1]);
            if outer.radius <= inner.radius {
                return Err(Error::validation(
                    "mpov",
                    format!("ring radii must increase outward (ring {} vs {})", m, m + 1),
                ));
            }
            let spacing = outer.radius - inner.radius;
            let required = 2.0 * inner.half_width.max(outer.half_width);
            if !waive_spacing && spacing <= required {
                return Err(Error::SpacingViolation {
                    inner: m,
                    outer: m + 1,
                    spacing_m: spacing,
                    required_m: required,
                });
            }
        }
        Ok(MpovSpec { rings, waive_spacing })
    }

    pub fn rings(&self) -> &[PovRingSpec] {
        &self.rings
    }

    pub fn spacing_waived(&self) -> bool {
        self.waive_spacing
    }

    pub fn value_at(&self, x: f64, y: f64) -> Complex64 {
        self.rings.iter().map(|r| r.value_at(x, y)).sum()
    }

    pub fn outer_extent(&self) -> f64 {
        self.rings.iter().map(PovRingSpec::outer_extent).fold(0.0, f64::max)
    }
}

/// Laguerre-Gaussian vortex with radial index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgSpec {
    pub waist: f64,
    pub charge: i32,
}

impl LgSpec {
    pub fn new(waist: f64, charge: i32) -> Result<Self> {
        if !(waist.is_finite() && waist > 0.0) {
            return Err(Error::validation("lg", format!("waist {waist} must be positive")));
        }
        Ok(LgSpec { waist, charge })
    }

    /// Unnormalized `(x + i sgn(l) y)^|l| exp(-r^2/w0^2)`.
    pub fn shape_at(&self, x: f64, y: f64) -> Complex64 {
        let z = Complex64::new(x, if self.charge < 0 { -y } else { y });
        z.powi(self.charge.abs()) * (-(x * x + y * y) / (self.waist * self.waist)).exp()
    }
}

fn check_fits(grid: &GridSpec, extent: f64) -> Result<()> {
    let half = grid.half_window();
    if extent > half {
        Err(Error::RingTooLarge {
            needed_m: extent,
            half_window_m: half,
        })
    } else {
        Ok(())
    }
}

pub fn synth_pov(grid: &GridSpec, ring: &PovRingSpec) -> Result<ComplexField> {
    let ring = ring.validated()?;
    check_fits(grid, ring.outer_extent())?;
    ComplexField::from_fn(*grid, |x, y| ring.value_at(x, y))
}

pub fn synth_mpov(grid: &GridSpec, spec: &MpovSpec) -> Result<ComplexField> {
    check_fits(grid, spec.outer_extent())?;
    ComplexField::from_fn(*grid, |x, y| spec.value_at(x, y))
}

/// LG vortex normalized to unit power `sum |E|^2 dx^2 = 1`.
pub fn synth_lg(grid: &GridSpec, spec: &LgSpec) -> Result<ComplexField> {
    let spec = LgSpec::new(spec.waist, spec.charge)?;
    check_fits(grid, 3.0 * spec.waist * (1.0 + spec.charge.unsigned_abs() as f64).sqrt())?;
    let raw = ComplexField::from_fn(*grid, |x, y| spec.shape_at(x, y))?;
    let norm = raw.power().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroPower);
    }
    raw.map(|v| v / norm)
}

/// `amplitude * exp(-r^2 / w0^2)`.
pub fn synth_gaussian(grid: &GridSpec, waist: f64, amplitude: f64) -> Result<ComplexField> {
    if !(waist.is_finite() && waist > 0.0) {
        return Err(Error::validation("gaussian", format!("waist {waist} must be positive")));
    }
    check_fits(grid, 3.0 * waist)?;
    ComplexField::from_fn(*grid, |x, y| {
        Complex64::new(amplitude * (-(x * x + y * y) / (waist * waist)).exp(), 0.0)
    })
}

/// Fringe period of a plane wave tilted by `(tilt_x, tilt_y)`.
pub fn plane_wave_period(grid: &GridSpec, tilt_x: f64, tilt_y: f64) -> f64 {
    TAU / (grid.wavenumber() * tilt_x.hypot(tilt_y))
}

/// `amplitude * exp[i k (x tilt_x + y tilt_y)]`. Rejects tilts whose fringe
/// period is shorter than four samples.
pub fn synth_plane_wave(grid: &GridSpec, tilt_x: f64, tilt_y: f64, amplitude: f64) -> Result<ComplexField> {
    if !(tilt_x.is_finite() && tilt_y.is_finite() && amplitude.is_finite()) {
        return Err(Error::validation("plane wave", "tilts and amplitude must be finite"));
    }
    if tilt_x != 0.0 || tilt_y != 0.0 {
        let period = plane_wave_period(grid, tilt_x, tilt_y);
        let min_period = 4.0 * grid.dx();
        if period < min_period {
            return Err(Error::Aliasing {
                period_m: period,
                min_period_m: min_period,
            });
        }
    }
    let k = grid.wavenumber();
    ComplexField::from_fn(*grid, |x, y| Complex64::from_polar(amplitude, k * (x * tilt_x + y * tilt_y)))
}

/// Azimuths in `[0, 2pi)` where two rings are exactly out of phase:
/// `(l_b - l_a) phi + (Phi_b - Phi_a) = pi (mod 2pi)`. The singularities
/// sit on the circle of radius `(R_a + R_b) / 2` when the rings share
/// amplitude and width. Sorted ascending.
pub fn predict_singularity_angles(ring_a: &PovRingSpec, ring_b: &PovRingSpec) -> Result<Vec<f64>> {
    let dl = ring_b.charge - ring_a.charge;
    if dl == 0 {
        return Err(Error::EqualCharge {
            charge: ring_a.charge,
        });
    }
    let dphi = ring_b.phase - ring_a.phase;
    let mut angles: Vec<f64> = (0..dl.abs())
        .map(|k| ((PI - dphi + TAU * k as f64) / dl as f64).rem_euclid(TAU))
        .map(|a| if a >= TAU { 0.0 } else { a })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Radius on which [`predict_singularity_angles`] places the singularities.
pub fn predicted_singularity_radius(ring_a: &PovRingSpec, ring_b: &PovRingSpec) -> f64 {
    0.5 * (ring_a.radius + ring_b.radius)
}
