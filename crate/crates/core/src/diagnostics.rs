//! Measurement toolchain: interferograms and fork counting, angular-spectrum
//! propagation, tilted-lens OAM readout, ring de-multiplexing and the
//! diffusion-coefficient fit.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_gaussian_width, radial_profile};
use crate::beams::MpovSpec;
use crate::error::{Error, Result};
use crate::fft::{forward_spectrum, inverse_spectrum, nyquist};
use crate::grid::{ComplexField, IntensityImage};

/// `|signal + reference|^2`.
pub fn interferogram(signal: &ComplexField, reference: &ComplexField) -> Result<IntensityImage> {
    Ok(signal.add(reference)?.intensity())
}

/// Fringe counts along the two halves of a circle about the window center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeCounts {
    /// Fringes crossed going from `phi = 0` to `phi = pi`.
    pub upper: f64,
    /// Fringes crossed going from `phi = 0` to `phi = -pi`.
    pub lower: f64,
    /// `round(upper - lower)`; its magnitude is the vortex charge enclosed.
    pub difference: i32,
}

/// Counts carrier fringes on the upper and lower semicircles of `radius`.
///
/// The fringe phase is recovered by carrier demodulation: the sideband of
/// the interferogram spectrum centered on the reference wavevector
/// `carrier = (kx, ky)` (rad/m) is isolated with a disk of radius `|k_c|/2`
/// and transformed back. The number of fringes crossed along a path is the
/// accumulated fringe phase divided by `2 pi`. A fork (fringes that end
/// inside the circle) shows up as a difference between the two halves.
pub fn fork_fringe_counts(image: &IntensityImage, carrier: (f64, f64), radius: f64) -> Result<FringeCounts> {
    let g = *image.grid();
    let kc = carrier.0.hypot(carrier.1);
    if !(kc > 0.0) {
        return Err(Error::validation("fringe count", "carrier wavevector must be nonzero"));
    }
    let period = TAU / kc;
    if period < 4.0 * g.dx() {
        return Err(Error::Aliasing {
            period_m: period,
            min_period_m: 4.0 * g.dx(),
        });
    }
    let limit = 0.5 * (g.nx().min(g.ny()) as f64 - 1.0) * g.dx();
    if !(radius > 0.0 && radius <= limit) {
        return Err(Error::CircleOutsideWindow { radius_m: radius });
    }

    let real = ComplexField::new(g, image.values().iter().map(|&v| Complex64::new(v, 0.0)).collect())?;
    let spectrum = forward_spectrum(&real);
    let band = crate::grid::SpectralField::from_fn(g, |kx, ky| {
        let inside = (kx - carrier.0).hypot(ky - carrier.1) < 0.5 * kc;
        Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
    });
    let sideband = inverse_spectrum(&spectrum.multiply(&band)?);

    let m = ((PI * radius / (0.5 * g.dx())).ceil() as usize).max(64);
    let floor = 1e-3 * sideband.max_abs();
    let arc = |sign: f64| -> Result<f64> {
        let pts: Vec<Complex64> = (0..=m)
            .map(|k| {
                let a = sign * PI * k as f64 / m as f64;
                sideband.sample(radius * a.cos(), radius * a.sin())
            })
            .collect();
        if pts.iter().any(|v| !(v.norm() > floor)) {
            return Err(Error::CircleThroughZero { radius_m: radius });
        }
        Ok(pts.windows(2).map(|p| (p[1] * p[0].conj()).arg()).sum::<f64>().abs() / TAU)
    };
    let upper = arc(1.0)?;
    let lower = arc(-1.0)?;
    Ok(FringeCounts {
        upper,
        lower,
        difference: (upper - lower).round() as i32,
    })
}

/// Largest transverse wavenumber whose transfer-function phase is sampled
/// without aliasing for propagation distance `z` over a window of `window`.
pub fn band_limit(wavenumber: f64, window: f64, z: f64) -> f64 {
    let half = 0.5 * window;
    wavenumber * half / (z * z + half * half).sqrt()
}

/// Fraction of spectral power that may be discarded beyond the band limit.
pub const BAND_LIMIT_LEAKAGE: f64 = 1e-2;

/// Angular-spectrum propagation over `z` meters (negative `z` propagates
/// backwards). Evanescent components and those beyond [`band_limit`] are
/// dropped; fails if that would discard more than [`BAND_LIMIT_LEAKAGE`] of
/// the power.
pub fn angular_spectrum_propagate(field: &ComplexField, z: f64) -> Result<ComplexField> {
    if !z.is_finite() {
        return Err(Error::validation("propagation", "distance must be finite"));
    }
    if z == 0.0 {
        return Ok(field.clone());
    }
    let g = *field.grid();
    let k = g.wavenumber();
    let spectrum = forward_spectrum(field);
    let limit = band_limit(k, g.width().min(g.height()), z);
    let total = spectrum.power();
    let mut beyond = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if g.kx(i).hypot(g.ky(j)) > limit {
                beyond += spectrum.at(i, j).norm_sqr();
            }
        }
    }
    if total > 0.0 && beyond > BAND_LIMIT_LEAKAGE * total {
        return Err(Error::BandLimit(format!(
            "{:.2e} of the power lies beyond {:.4e} rad/m for z = {:.4e} m",
            beyond / total,
            limit,
            z
        )));
    }
    let transfer = crate::grid::SpectralField::from_fn(g, |kx, ky| {
        let kz2 = k * k - kx * kx - ky * ky;
        if kz2 > 0.0 && kx.hypot(ky) <= limit {
            Complex64::from_polar(1.0, z * kz2.sqrt())
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(inverse_spectrum(&spectrum.multiply(&transfer)?))
}

pub const DEFAULT_FOCAL_LENGTH: f64 = 0.5;
pub const DEFAULT_LENS_TILT: f64 = 0.55;
/// Astigmatic phase `k rho^2 (1/f_x - 1/f_y) / 2` that the automatic
/// magnification aims for, `rho` being the beam's rms radius.
pub const TARGET_ASTIGMATIC_PHASE: f64 = 4.0;

/// Thin lens tilted about the x axis, observed `distance` behind it.
///
/// The beam reaches the lens through an imaging stage of magnification
/// `M`. By Fresnel scaling this is simulated on the native grid with focal
/// length `f / M^2` and distance `distance / M^2`; the resulting image is
/// the observation-plane pattern demagnified by `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltedLensSpec {
    pub focal_length: f64,
    pub tilt: f64,
    /// Defaults to `(f_x + f_y) / 2`.
    pub distance: Option<f64>,
    /// Defaults to the value that makes the astigmatic phase across the
    /// beam equal [`TARGET_ASTIGMATIC_PHASE`].
    pub magnification: Option<f64>,
}

impl Default for TiltedLensSpec {
    fn default() -> Self {
        TiltedLensSpec {
            focal_length: DEFAULT_FOCAL_LENGTH,
            tilt: DEFAULT_LENS_TILT,
            distance: None,
            magnification: None,
        }
    }
}

/// Lens parameters as applied on the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLens {
    pub magnification: f64,
    pub focal_x: f64,
    pub focal_y: f64,
    pub distance: f64,
}

impl TiltedLensSpec {
    pub fn validated(self) -> Result<Self> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(Error::validation("tilted lens", "focal length must be positive"));
        }
        if !(self.tilt > 0.0 && self.tilt < FRAC_PI_4) {
            return Err(Error::validation("tilted lens", format!("tilt {} must lie in (0, pi/4)", self.tilt)));
        }
        if let Some(z) = self.distance {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::validation("tilted lens", "distance must be positive"));
            }
        }
        if let Some(m) = self.magnification {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::validation("tilted lens", "magnification must be positive"));
            }
        }
        Ok(self)
    }

    pub fn resolve(&self, field: &ComplexField) -> Result<ResolvedLens> {
        let lens = self.validated()?;
        let (c, f) = (lens.tilt.cos(), lens.focal_length);
        let m2 = match lens.magnification {
            Some(m) => m * m,
            None => {
                let rho = field.rms_radius()?;
                2.0 * TARGET_ASTIGMATIC_PHASE * f / (field.grid().wavenumber() * rho * rho * (1.0 / c - c))
            }
        };
        let (fx, fy) = (f * c / m2, f / c / m2);
        Ok(ResolvedLens {
            magnification: m2.sqrt(),
            focal_x: fx,
            focal_y: fy,
            distance: lens.distance.map_or(0.5 * (fx + fy), |z| z / m2),
        })
    }
}

/// Intensity near the astigmatic focus of a tilted lens.
pub fn tilted_lens_image(field: &ComplexField, lens: &TiltedLensSpec) -> Result<IntensityImage> {
    let p = lens.resolve(field)?;
    let g = *field.grid();
    let k = g.wavenumber();
    let floor = 1e-6 * field.max_abs();
    let nyq = nyquist(&g);
    let nx = g.nx();
    for (idx, v) in field.values().iter().enumerate() {
        if v.norm() >= floor {
            let (x, y) = (g.x(idx % nx), g.y(idx / nx));
            let local = k * (x / p.focal_x).hypot(y / p.focal_y);
            if local >= nyq {
                return Err(Error::BandLimit(format!(
                    "lens phase at ({x:.3e}, {y:.3e}) m varies faster than the grid resolves"
                )));
            }
        }
    }
    let lensed = field.map_xy(|x, y, v| {
        v * Complex64::from_polar(1.0, -k * (x * x / (2.0 * p.focal_x) + y * y / (2.0 * p.focal_y)))
    })?;
    Ok(angular_spectrum_propagate(&lensed, p.distance)?.intensity())
}

/// Fraction of the lobe peak used to separate bright from dark.
pub const STRIPE_THRESHOLD: f64 = 0.2;

/// Dark stripes crossing the dominant lobe.
///
/// The lobe is the set of pixels at or above [`STRIPE_THRESHOLD`] of the
/// peak. A line through its intensity centroid along the major principal
/// axis of its second-moment tensor is sampled over `+-4` standard
/// deviations; the stripes are the gaps between bright segments on it.
pub fn count_dark_stripes(image: &IntensityImage) -> Result<usize> {
    let g = *image.grid();
    let peak = image.max();
    if !(peak > 0.0) {
        return Err(Error::NoDominantLobe("image is dark".into()));
    }
    let threshold = STRIPE_THRESHOLD * peak;
    let nx = g.nx();
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (idx, &v) in image.values().iter().enumerate() {
        if v >= threshold {
            s += v;
            sx += v * g.x(idx % nx);
            sy += v * g.y(idx / nx);
        }
    }
    let (cx, cy) = (sx / s, sy / s);
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for (idx, &v) in image.values().iter().enumerate() {
        if v >= threshold {
            let (x, y) = (g.x(idx % nx) - cx, g.y(idx / nx) - cy);
            cxx += v * x * x;
            cyy += v * y * y;
            cxy += v * x * y;
        }
    }
    let (cxx, cyy, cxy) = (cxx / s, cyy / s, cxy / s);
    let mean = 0.5 * (cxx + cyy);
    let spread = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let major = mean + spread;
    if !(major > 0.0) {
        return Err(Error::NoDominantLobe("lobe is a single pixel".into()));
    }
    let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    let (ux, uy) = (angle.cos(), angle.sin());

    let half_len = 4.0 * major.sqrt();
    let step = 0.25 * g.dx();
    let n = (2.0 * half_len / step).ceil() as usize + 1;
    let mut segments = 0;
    let mut was_bright = false;
    for k in 0..n {
        let t = -half_len + k as f64 * step;
        let bright = image.sample(cx + t * ux, cy + t * uy) >= threshold;
        if bright && !was_bright {
            segments += 1;
        }
        was_bright = bright;
    }
    if segments == 0 {
        return Err(Error::NoDominantLobe("no bright samples along the principal axis".into()));
    }
    Ok(segments - 1)
}

/// Splits a field with the binary mask `circ(r / r_cut)`: `inner` keeps
/// `r < r_cut`, `outer` keeps the rest. Each sample lands in exactly one
/// output, so `inner + outer` reproduces the input bit for bit.
pub fn demultiplex(field: &ComplexField, r_cut: f64) -> Result<(ComplexField, ComplexField)> {
    if !(r_cut.is_finite() && r_cut > 0.0) {
        return Err(Error::validation("demultiplex", format!("cut radius {r_cut} must be positive")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let inner = field.map_xy(|x, y, v| if x.hypot(y) < r_cut { v } else { zero })?;
    let outer = field.map_xy(|x, y, v| if x.hypot(y) < r_cut { zero } else { v })?;
    Ok((inner, outer))
}

/// A warning when `r_cut` does not fall in a clear gap `R_m + w_m < r_cut <
/// R_{m+1} - w_{m+1}` between adjacent rings of `spec`.
pub fn demux_cut_warning(spec: &MpovSpec, r_cut: f64) -> Option<String> {
    let rings = spec.rings();
    let clear = rings
        .windows(2)
        .any(|p| p[0].radius + p[0].half_width < r_cut && r_cut < p[1].radius - p[1].half_width);
    if clear {
        None
    } else {
        Some(format!(
            "cut radius {r_cut:.4e} m lies inside a ring; need R_m + w_m < r_cut < R_(m+1) - w_(m+1) for some m"
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    /// Diffusion coefficient, m^2/s.
    pub diffusion: f64,
    /// Width at `t = 0`, m.
    pub w0: f64,
    /// RMS deviation of `w^2` from the fitted line, m^2.
    pub residual: f64,
    /// The raw slope was negative; `diffusion` is clamped to 0 and `w0`
    /// comes from the mean of `w^2`.
    pub negative_slope: bool,
}

/// Least-squares line `w^2 = w0^2 + 4 D t` through `(t, w)` samples.
pub fn fit_diffusion_coefficient(samples: &[(f64, f64)]) -> Result<DiffusionFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "{} samples, need at least 3",
            samples.len()
        )));
    }
    if samples.iter().any(|&(t, w)| !(t.is_finite() && w.is_finite() && w > 0.0)) {
        return Err(Error::validation("diffusion fit", "times must be finite and widths positive"));
    }
    let mut times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    times.sort_by(f64::total_cmp);
    if times.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::DegenerateInput("sample times must be distinct".into()));
    }
    let n = samples.len() as f64;
    let tm = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let ym = samples.iter().map(|s| s.1 * s.1).sum::<f64>() / n;
    let stt: f64 = samples.iter().map(|s| (s.0 - tm).powi(2)).sum();
    let sty: f64 = samples.iter().map(|s| (s.0 - tm) * (s.1 * s.1 - ym)).sum();
    let mut slope = sty / stt;
    let mut intercept = ym - slope * tm;
    let negative_slope = slope < 0.0;
    if negative_slope {
        slope = 0.0;
        intercept = ym;
    }
    if !(intercept > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "fitted w0^2 = {intercept:.3e} m^2 is not positive"
        )));
    }
    let residual = (samples
        .iter()
        .map(|s| (s.1 * s.1 - intercept - slope * s.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DiffusionFit {
        diffusion: slope / 4.0,
        w0: intercept.sqrt(),
        residual,
        negative_slope,
    })
}

/// Gaussian width of each field about the window center, in parallel.
pub fn measure_widths(fields: &[ComplexField], nbins: usize) -> Result<Vec<f64>> {
    fields
        .par_iter()
        .map(|f| fit_gaussian_width(&radial_profile(f, (0.0, 0.0), nbins)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::winding_on_circle;
    use crate::beams::{synth_gaussian, synth_lg, synth_mpov, synth_plane_wave, synth_pov, LgSpec, PovRingSpec};
    use crate::grid::{make_grid, GridSpec};
    use crate::storage::{diffuse, StorageParams, DEFAULT_DIFFUSION};

    fn grid() -> GridSpec {
        make_grid(256, 256, 8e-6, 795e-9).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn interferogram_with_zero_reference() {
        let s = synth_pov(&grid(), &PovRingSpec::new(0.45e-3, 0.14e-3, 2).unwrap()).unwrap();
        let img = interferogram(&s, &ComplexField::zeros(grid())).unwrap();
        assert_eq!(img, s.intensity());
        let other = ComplexField::zeros(make_grid(64, 64, 8e-6, 795e-9).unwrap());
        assert!(matches!(interferogram(&s, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn charge_zero_ring_gives_straight_fringes() {
        let g = grid();
        let period = 10.0 * g.dx();
        let tilt = g.wavelength() / period;
        let s = synth_pov(&g, &PovRingSpec::new(0.45e-3, 0.14e-3, 0).unwrap()).unwrap();
        let img = interferogram(&s, &synth_plane_wave(&g, tilt, 0.0, 1.0).unwrap()).unwrap();
        // The pattern repeats with the fringe period along x wherever the ring is flat in x,
        // i.e. along the y axis through the top of the ring.
        let j = g.ny() / 2 + (0.45e-3 / g.dx()) as usize;
        for i in 100..140 {
            let a = img.at(i, j);
            let b = img.at(i + 10, j);
            assert!((a - b).abs() < 0.05 * img.max(), "i={i}");
        }
        let fc = fork_fringe_counts(&img, (g.wavenumber() * tilt, 0.0), 0.45e-3).unwrap();
        assert_eq!(fc.difference, 0);
    }

    #[test]
    fn fork_difference_equals_charge() {
        let g = grid();
        let r = 0.45e-3;
        for period in [6.0, 10.0, 16.0] {
            let tilt = g.wavelength() / (period * g.dx());
            let reference = synth_plane_wave(&g, tilt, 0.0, 1.0).unwrap();
            for l in -5..=5 {
                let s = synth_pov(&g, &PovRingSpec::new(r, 0.14e-3, l).unwrap()).unwrap();
                let img = interferogram(&s, &reference).unwrap();
                let fc = fork_fringe_counts(&img, (g.wavenumber() * tilt, 0.0), r).unwrap();
                assert_eq!(fc.difference.abs(), l.abs(), "period={period} l={l} {fc:?}");
                let expected_mean = g.wavenumber() * tilt * r / PI;
                assert!((0.5 * (fc.upper + fc.lower) - expected_mean).abs() < 0.05 * expected_mean);
            }
        }
    }

    #[test]
    fn fringe_count_rejects_aliased_carrier() {
        let g = grid();
        let img = ComplexField::zeros(g).intensity();
        assert!(matches!(
            fork_fringe_counts(&img, (PI / g.dx(), 0.0), 0.4e-3),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn propagation_zero_distance_is_identity() {
        let f = synth_gaussian(&grid(), 0.1e-3, 1.0).unwrap();
        assert_eq!(angular_spectrum_propagate(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn gaussian_beam_spreads_as_predicted() {
        let g = make_grid(256, 256, 8e-6, 795e-9).unwrap();
        let w0 = 0.1e-3;
        let f = synth_gaussian(&g, w0, 1.0).unwrap();
        let zr = PI * w0 * w0 / g.wavelength();
        for z in [0.5 * zr, zr, 2.0 * zr] {
            let out = angular_spectrum_propagate(&f, z).unwrap();
            let w = fit_gaussian_width(&radial_profile(&out, (0.0, 0.0), 128).unwrap()).unwrap();
            let expected = w0 * (1.0 + (z / zr).powi(2)).sqrt();
            assert!((w - expected).abs() < 0.01 * expected, "z={z} w={w} expected={expected}");
        }
    }

    #[test]
    fn propagation_round_trip() {
        let f = synth_pov(&grid(), &PovRingSpec::new(0.45e-3, 0.14e-3, 3).unwrap()).unwrap();
        let g = *f.grid();
        let back = angular_spectrum_propagate(&angular_spectrum_propagate(&f, 0.05).unwrap(), -0.05).unwrap();
        let num: f64 = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = f.values().iter().map(|b| b.norm_sqr()).sum();
        // Only the out-of-band part is lost.
        let limit = band_limit(g.wavenumber(), g.width(), 0.05);
        let spectrum = forward_spectrum(&f);
        let mut beyond = 0.0;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if g.kx(i).hypot(g.ky(j)) > limit {
                    beyond += spectrum.at(i, j).norm_sqr();
                }
            }
        }
        assert!((num / den - beyond / spectrum.power()).abs() < 1e-12, "{} vs {}", num / den, beyond / spectrum.power());
    }

    #[test]
    fn band_limit_violation_detected() {
        let g = make_grid(64, 64, 8e-6, 795e-9).unwrap();
        let f = synth_plane_wave(&g, g.wavelength() / (5.0 * g.dx()), 0.0, 1.0).unwrap();
        assert!(matches!(angular_spectrum_propagate(&f, 10.0), Err(Error::BandLimit(_))));
    }

    #[test]
    fn lens_spec_validation() {
        let bad = [
            TiltedLensSpec { focal_length: 0.0, ..Default::default() },
            TiltedLensSpec { tilt: 0.0, ..Default::default() },
            TiltedLensSpec { tilt: 0.8, ..Default::default() },
            TiltedLensSpec { distance: Some(-1.0), ..Default::default() },
            TiltedLensSpec { magnification: Some(0.0), ..Default::default() },
        ];
        for spec in bad {
            assert!(spec.validated().is_err(), "{spec:?}");
        }
    }

    #[test]
    fn resolved_lens_geometry() {
        let f = synth_pov(&grid(), &PovRingSpec::new(0.45e-3, 0.14e-3, 1).unwrap()).unwrap();
        let spec = TiltedLensSpec {
            magnification: Some(2.0),
            ..Default::default()
        };
        let p = spec.resolve(&f).unwrap();
        let c = DEFAULT_LENS_TILT.cos();
        assert!((p.focal_x - 0.5 * c / 4.0).abs() < 1e-15);
        assert!((p.focal_y - 0.5 / c / 4.0).abs() < 1e-15);
        assert!((p.distance - 0.5 * (p.focal_x + p.focal_y)).abs() < 1e-15);
        let auto = TiltedLensSpec::default().resolve(&f).unwrap();
        let rho = f.rms_radius().unwrap();
        let psi = 0.5 * f.grid().wavenumber() * (rho * auto.magnification).powi(2) * (1.0 / (0.5 * c) - c / 0.5);
        assert!((psi - TARGET_ASTIGMATIC_PHASE).abs() < 1e-9);
    }

    #[test]
    fn gaussian_has_no_stripes() {
        let g = make_grid(1024, 1024, 4e-6, 795e-9).unwrap();
        let f = synth_gaussian(&g, 0.3e-3, 1.0).unwrap();
        let img = tilted_lens_image(&f, &TiltedLensSpec::default()).unwrap();
        assert_eq!(count_dark_stripes(&img).unwrap(), 0);
    }

    #[test]
    fn stripes_count_lg_charge() {
        let g = make_grid(1024, 1024, 4e-6, 795e-9).unwrap();
        for l in [-3, -2, 1, 2, 4] {
            let f = synth_lg(&g, &LgSpec::new(0.3e-3, l).unwrap()).unwrap();
            let img = tilted_lens_image(&f, &TiltedLensSpec::default()).unwrap();
            assert_eq!(count_dark_stripes(&img).unwrap(), l.unsigned_abs() as usize, "l={l}");
        }
    }

    #[test]
    fn opposite_charges_give_mirrored_patterns() {
        let g = make_grid(1024, 1024, 4e-6, 795e-9).unwrap();
        let lens = TiltedLensSpec::default();
        let plus = tilted_lens_image(&synth_lg(&g, &LgSpec::new(0.3e-3, 2).unwrap()).unwrap(), &lens).unwrap();
        let minus = tilted_lens_image(&synth_lg(&g, &LgSpec::new(0.3e-3, -2).unwrap()).unwrap(), &lens).unwrap();
        // l -> -l is complex conjugation of a real-envelope mode; the lens and
        // propagation then give the pattern mirrored in x (or y) only.
        let mirrored_x: Vec<f64> = minus
            .values()
            .chunks(g.nx())
            .flat_map(|row| row.iter().rev().copied())
            .collect();
        let peak = plus.max();
        assert!(max_diff(plus.values(), &mirrored_x) < 1e-6 * peak);
        assert!(max_diff(plus.values(), minus.values()) > 0.1 * peak);
    }

    #[test]
    fn dark_image_has_no_lobe() {
        assert!(matches!(
            count_dark_stripes(&ComplexField::zeros(grid()).intensity()),
            Err(Error::NoDominantLobe(_))
        ));
    }

    #[test]
    fn demux_partition_is_exact() {
        let g = make_grid(320, 320, 8e-6, 795e-9).unwrap();
        let rings = vec![
            PovRingSpec::new(0.28e-3, 0.11e-3, 1).unwrap(),
            PovRingSpec::new(0.83e-3, 0.11e-3, 3).unwrap(),
        ];
        let spec = MpovSpec::new(rings).unwrap();
        let f = synth_mpov(&g, &spec).unwrap();
        let (inner, outer) = demultiplex(&f, 0.555e-3).unwrap();
        let sum = inner.add(&outer).unwrap();
        assert!(sum.values().iter().zip(f.values()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        let p = f.power();
        assert!((inner.power() + outer.power() - p).abs() < 1e-12 * p);
        let (again, rest) = demultiplex(&inner, 0.555e-3).unwrap();
        assert_eq!(again, inner);
        assert!(rest.values().iter().all(|v| v.norm() == 0.0));
        assert!(demux_cut_warning(&spec, 0.555e-3).is_none());
        assert!(demux_cut_warning(&spec, 0.35e-3).is_some());
        assert!(demux_cut_warning(&spec, 0.75e-3).is_some());
    }

    #[test]
    fn demux_windings_after_storage() {
        let g = make_grid(512, 512, 8e-6, 795e-9).unwrap();
        let rings = vec![
            PovRingSpec::new(0.28e-3, 0.11e-3, 1).unwrap(),
            PovRingSpec::new(0.83e-3, 0.11e-3, 3).unwrap(),
        ];
        let f = synth_mpov(&g, &MpovSpec::new(rings).unwrap()).unwrap();
        let stored = diffuse(&f, &StorageParams::new(DEFAULT_DIFFUSION, 2e-6).unwrap()).unwrap();
        let (inner, outer) = demultiplex(&stored, 0.555e-3).unwrap();
        assert_eq!(winding_on_circle(&inner, 0.28e-3).unwrap(), -1);
        assert_eq!(winding_on_circle(&outer, 0.83e-3).unwrap(), -3);
    }

    #[test]
    fn exact_linear_data_recovers_d() {
        let (d, w0): (f64, f64) = (2.5e-3, 0.2e-3);
        let samples: Vec<(f64, f64)> = [0.0, 5e-6, 10e-6, 20e-6, 30e-6]
            .iter()
            .map(|&t| (t, (w0 * w0 + 4.0 * d * t).sqrt()))
            .collect();
        let fit = fit_diffusion_coefficient(&samples).unwrap();
        assert!((fit.diffusion - d).abs() < 1e-12 * d);
        assert!((fit.w0 - w0).abs() < 1e-12 * w0);
        assert!(fit.residual < 1e-20);
        assert!(!fit.negative_slope);
    }

    #[test]
    fn shrinking_widths_are_flagged() {
        let fit = fit_diffusion_coefficient(&[(0.0, 3e-4), (1e-6, 2e-4), (2e-6, 1e-4)]).unwrap();
        assert!(fit.negative_slope);
        assert_eq!(fit.diffusion, 0.0);
        assert!(fit.w0 > 0.0);
    }

    #[test]
    fn degenerate_samples_rejected() {
        assert!(matches!(
            fit_diffusion_coefficient(&[(0.0, 1e-4), (1e-6, 2e-4)]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            fit_diffusion_coefficient(&[(0.0, 1e-4), (1e-6, 2e-4), (1e-6, 2e-4)]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn widths_follow_diffusion() {
        let g = make_grid(256, 256, 8e-6, 795e-9).unwrap();
        let w0 = 0.15e-3;
        let f = synth_gaussian(&g, w0, 1.0).unwrap();
        let times = [0.0, 1e-6, 2e-6];
        let fields = crate::storage::storage_sweep(&f, DEFAULT_DIFFUSION, &times).unwrap();
        let widths = measure_widths(&fields, 128).unwrap();
        for (t, w) in times.iter().zip(&widths) {
            let expected = (w0 * w0 + 4.0 * DEFAULT_DIFFUSION * t).sqrt();
            assert!((w - expected).abs() < 2e-3 * expected);
        }
    }
}
