//! Observables extracted from fields: radial profiles and their peak/width,
//! phase gradients, phase singularities, circle windings and overlap
//! fidelity.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec};

/// Smallest accepted bin count for [`radial_profile`].
pub const MIN_BINS: usize = 16;

/// Default for [`detect_singularities`].
pub const DEFAULT_AMPLITUDE_CEILING: f64 = 0.15;

/// Amplitudes below this fraction of the peak are treated as numerical
/// zero: their phase is transform round-off, not signal.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Plaquettes closer than this (Chebyshev distance, in cells) are merged
/// into one singularity.
pub const MERGE_RADIUS: usize = 2;

/// Relative amplitude below which [`winding_on_circle`] refuses to run.
pub const CIRCLE_AMPLITUDE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    bin_centers: Vec<f64>,
    mean_intensity: Vec<f64>,
    bin_count: Vec<usize>,
}

impl RadialProfile {
    pub fn new(bin_centers: Vec<f64>, mean_intensity: Vec<f64>, bin_count: Vec<usize>) -> Result<Self> {
        if bin_centers.len() != mean_intensity.len() || bin_centers.len() != bin_count.len() {
            return Err(Error::validation("profile", "column lengths differ"));
        }
        if bin_centers.len() < 3 {
            return Err(Error::validation("profile", "need at least three bins"));
        }
        if bin_centers.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::validation("profile", "bin centers must increase strictly"));
        }
        if mean_intensity.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("profile", "intensities must be finite and non-negative"));
        }
        Ok(RadialProfile {
            bin_centers,
            mean_intensity,
            bin_count,
        })
    }

    pub fn bin_centers(&self) -> &[f64] {
        &self.bin_centers
    }

    pub fn mean_intensity(&self) -> &[f64] {
        &self.mean_intensity
    }

    pub fn bin_count(&self) -> &[usize] {
        &self.bin_count
    }

    pub fn len(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_centers.is_empty()
    }

    /// `(radius, intensity)` of the bins that received samples.
    fn populated(&self) -> (Vec<f64>, Vec<f64>) {
        self.bin_centers
            .iter()
            .zip(&self.mean_intensity)
            .zip(&self.bin_count)
            .filter(|(_, &n)| n > 0)
            .map(|((&r, &v), _)| (r, v))
            .unzip()
    }
}

/// Azimuthal average of `|E|^2` about `center` in `nbins` equal-width bins
/// spanning `[0, r_max)`, where `r_max` is the largest circle about the
/// center that fits the window. Bins without samples report 0 with count 0.
pub fn radial_profile(field: &ComplexField, center: (f64, f64), nbins: usize) -> Result<RadialProfile> {
    if nbins < MIN_BINS {
        return Err(Error::validation("profile", format!("{nbins} bins, need at least {MIN_BINS}")));
    }
    let g = field.grid();
    let (cx, cy) = center;
    let r_max = (0.5 * g.width() - cx.abs()).min(0.5 * g.height() - cy.abs());
    if !(cx.is_finite() && cy.is_finite()) || !g.contains(cx, cy) || r_max <= 0.0 {
        return Err(Error::CenterOutsideWindow { x_m: cx, y_m: cy });
    }
    let width = r_max / nbins as f64;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    let xs = g.xs();
    for (j, row) in field.values().chunks(g.nx()).enumerate() {
        let dy = g.y(j) - cy;
        for (v, &x) in row.iter().zip(&xs) {
            let r = (x - cx).hypot(dy);
            if r < r_max {
                let b = ((r / width) as usize).min(nbins - 1);
                sum[b] += v.norm_sqr();
                count[b] += 1;
            }
        }
    }
    let centers = (0..nbins).map(|b| (b as f64 + 0.5) * width).collect();
    let means = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    RadialProfile::new(centers, means, count)
}

/// Index of the unique interior global maximum among populated bins.
fn peak_index(values: &[f64]) -> Result<usize> {
    let (idx, &max) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoUniquePeak)?;
    if idx == 0 || idx + 1 == values.len() || max <= 0.0 {
        return Err(Error::NoUniquePeak);
    }
    if values.iter().filter(|&&v| v == max).count() > 1 {
        return Err(Error::NoUniquePeak);
    }
    Ok(idx)
}

/// Full width at half maximum, linearly interpolated between samples.
pub fn fwhm(profile: &RadialProfile) -> Result<f64> {
    let (r, v) = profile.populated();
    let i = peak_index(&v)?;
    let half = 0.5 * v[i];
    let cross = |a: usize, b: usize| r[a] + (half - v[a]) / (v[b] - v[a]) * (r[b] - r[a]);

    let mut lo = i;
    while lo > 0 && v[lo - 1] > half {
        lo -= 1;
    }
    if lo == 0 {
        return Err(Error::HalfMaxNotCrossed { side: "inner" });
    }
    let mut hi = i;
    while hi + 1 < v.len() && v[hi + 1] > half {
        hi += 1;
    }
    if hi + 1 == v.len() {
        return Err(Error::HalfMaxNotCrossed { side: "outer" });
    }
    Ok(cross(hi, hi + 1) - cross(lo, lo - 1))
}

/// Peak location refined by a parabola through the peak bin and its neighbors.
pub fn peak_radius(profile: &RadialProfile) -> Result<f64> {
    let (r, v) = profile.populated();
    let i = peak_index(&v)?;
    let (x0, x1, x2) = (r[i - 1], r[i], r[i + 1]);
    let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return Ok(x1);
    }
    Ok(x1 - 0.5 * num / den)
}

/// Gaussian `1/e^2` intensity radius from a weighted log-linear fit of
/// `I(r) = I0 exp(-2 r^2 / w^2)` to the populated bins above `1e-4` of the
/// peak. Weights `n I^2` make the log-domain fit track the linear one.
pub fn fit_gaussian_width(profile: &RadialProfile) -> Result<f64> {
    let peak = profile.mean_intensity.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let (mut sw, mut su, mut sy, mut suu, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for ((&r, &v), &n) in profile.bin_centers.iter().zip(&profile.mean_intensity).zip(&profile.bin_count) {
        if n == 0 || v < 1e-4 * peak {
            continue;
        }
        let w = n as f64 * (v / peak).powi(2);
        let (u, y) = (r * r, (v / peak).ln());
        sw += w;
        su += w * u;
        sy += w * y;
        suu += w * u * u;
        suy += w * u * y;
        used += 1;
    }
    if used < 3 {
        return Err(Error::DegenerateInput("fewer than three usable profile bins".into()));
    }
    let slope = (sw * suy - su * sy) / (sw * suu - su * su);
    if !(slope < 0.0) {
        return Err(Error::DegenerateInput("profile does not decay with radius".into()));
    }
    Ok((-2.0 / slope).sqrt())
}

/// Phase gradient per cell, `None` where the amplitude is under the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradientMap {
    grid: GridSpec,
    values: Vec<Option<[f64; 2]>>,
}

impl PhaseGradientMap {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Option<[f64; 2]>] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Option<[f64; 2]> {
        self.values[j * self.grid.nx() + i]
    }

    /// Bilinear interpolation; `None` if any of the four cells is masked
    /// or the point falls outside the defined interior.
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let fx = self.grid.x_index(x);
        let fy = self.grid.y_index(y);
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i0, j0) = (fx.floor() as usize, fy.floor() as usize);
        if i0 + 1 >= self.grid.nx() || j0 + 1 >= self.grid.ny() {
            return None;
        }
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let corners = [
            (self.at(i0, j0)?, (1.0 - tx) * (1.0 - ty)),
            (self.at(i0 + 1, j0)?, tx * (1.0 - ty)),
            (self.at(i0, j0 + 1)?, (1.0 - tx) * ty),
            (self.at(i0 + 1, j0 + 1)?, tx * ty),
        ];
        let mut out = [0.0; 2];
        for (g, w) in corners {
            out[0] += w * g[0];
            out[1] += w * g[1];
        }
        Some(out)
    }

    /// Gradient component along the counterclockwise azimuth about the origin.
    pub fn azimuthal(&self, x: f64, y: f64) -> Option<f64> {
        let r = x.hypot(y);
        if r == 0.0 {
            return None;
        }
        self.sample(x, y).map(|g| (-y * g[0] + x * g[1]) / r)
    }
}

fn wrap(a: f64) -> f64 {
    a - TAU * (a / TAU).round()
}

/// Centered differences of the local phase, wrapped so phase jumps of
/// `2 pi` do not register. Edge cells and cells whose stencil touches an
/// amplitude below `amplitude_floor * max|E|` are masked.
pub fn phase_gradient_map(field: &ComplexField, amplitude_floor: f64) -> Result<PhaseGradientMap> {
    if !(amplitude_floor > 0.0 && amplitude_floor < 1.0) {
        return Err(Error::validation(
            "phase gradient",
            format!("amplitude floor {amplitude_floor} must lie in (0, 1)"),
        ));
    }
    let g = *field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let floor = amplitude_floor * field.max_abs();
    let bright: Vec<bool> = field.values().iter().map(|v| v.norm() >= floor && floor > 0.0).collect();
    let phase: Vec<f64> = field.values().iter().map(|v| v.arg()).collect();
    let h = 2.0 * g.dx();
    let mut values = vec![None; g.len()];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = j * nx + i;
            let stencil = [c, c - 1, c + 1, c - nx, c + nx];
            if stencil.iter().all(|&s| bright[s]) {
                let gx = wrap(phase[c + 1] - phase[c - 1]) / h;
                let gy = wrap(phase[c + nx] - phase[c - nx]) / h;
                values[c] = Some([gx, gy]);
            }
        }
    }
    Ok(PhaseGradientMap { grid: g, values })
}

/// Isolated phase singularity. `charge` is the counterclockwise winding of
/// the phase in units of `2 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub x: f64,
    pub y: f64,
    pub charge: i32,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Phase singularities from plaquette windings.
///
/// Each 2x2 plaquette whose corners all lie in `[NOISE_FLOOR, ceiling) *
/// max|E|` contributes the rounded sum of its four wrapped edge phase
/// differences. Every edge difference is computed once and shared by the
/// two plaquettes that border it, so plaquette charges over any region add
/// up exactly to the winding of its boundary. Nonzero plaquettes within
/// [`MERGE_RADIUS`] cells of each other form one singularity at their
/// `|q|`-weighted centroid; a high-charge core that discretizes into several
/// unit plaquettes is thereby reported once, and clusters that sum to zero
/// are dropped.
///
/// A zero is found only if its plaquette stays under the ceiling, i.e. if
/// `|grad E| * dx` is well below `ceiling * max|E|`. Two bright rings about
/// `2w` apart need `w` of roughly 20 cells or more.
pub fn detect_singularities(field: &ComplexField, amplitude_ceiling: f64) -> Result<Vec<Singularity>> {
    if !(amplitude_ceiling > 0.0 && amplitude_ceiling < 1.0) {
        return Err(Error::validation(
            "singularity search",
            format!("amplitude ceiling {amplitude_ceiling} must lie in (0, 1)"),
        ));
    }
    let g = *field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let max = field.max_abs();
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = (NOISE_FLOOR * max, amplitude_ceiling * max);
    let dark: Vec<bool> = field
        .values()
        .iter()
        .map(|v| {
            let a = v.norm();
            a >= lo && a < hi
        })
        .collect();
    let phase: Vec<f64> = field.values().iter().map(|v| v.arg()).collect();
    let along_x = |i: usize, j: usize| wrap(phase[j * nx + i + 1] - phase[j * nx + i]);
    let along_y = |i: usize, j: usize| wrap(phase[(j + 1) * nx + i] - phase[j * nx + i]);

    let mut cells: Vec<(usize, usize, i32)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = j * nx + i;
            if !(dark[c] && dark[c + 1] && dark[c + nx] && dark[c + nx + 1]) {
                continue;
            }
            let circulation = along_x(i, j) + along_y(i + 1, j) - along_x(i, j + 1) - along_y(i, j);
            let q = (circulation / TAU).round() as i32;
            if q != 0 {
                cells.push((i, j, q));
            }
        }
    }

    let index: HashMap<(usize, usize), usize> =
        cells.iter().enumerate().map(|(k, &(i, j, _))| ((i, j), k)).collect();
    let mut sets = DisjointSet((0..cells.len()).collect());
    let r = MERGE_RADIUS;
    for (k, &(i, j, _)) in cells.iter().enumerate() {
        for jj in j.saturating_sub(r)..=j + r {
            for ii in i.saturating_sub(r)..=i + r {
                if let Some(&m) = index.get(&(ii, jj)) {
                    sets.union(k, m);
                }
            }
        }
    }

    // Roots are the smallest member index, so clusters come out in scan order.
    let mut clusters: Vec<(usize, i32, f64, f64, f64)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for (k, &(i, j, q)) in cells.iter().enumerate() {
        let root = sets.find(k);
        let s = *slot.entry(root).or_insert_with(|| {
            clusters.push((root, 0, 0.0, 0.0, 0.0));
            clusters.len() - 1
        });
        let w = q.abs() as f64;
        let c = &mut clusters[s];
        c.1 += q;
        c.2 += w;
        c.3 += w * (g.x(i) + 0.5 * g.dx());
        c.4 += w * (g.y(j) + 0.5 * g.dx());
    }
    Ok(clusters
        .into_iter()
        .filter(|c| c.1 != 0)
        .map(|(_, q, w, sx, sy)| Singularity {
            x: sx / w,
            y: sy / w,
            charge: q,
        })
        .collect())
}

/// Winding of the phase, counterclockwise, around the circle of `radius`
/// about the window center.
pub fn winding_on_circle(field: &ComplexField, radius: f64) -> Result<i32> {
    let g = field.grid();
    let limit = 0.5 * (g.nx().min(g.ny()) as f64 - 1.0) * g.dx();
    if !(radius > 0.0 && radius <= limit) {
        return Err(Error::CircleOutsideWindow { radius_m: radius });
    }
    let m = ((TAU * radius / (0.5 * g.dx())).ceil() as usize).max(64);
    let floor = CIRCLE_AMPLITUDE_FLOOR * field.max_abs();
    let samples: Vec<Complex64> = (0..m)
        .map(|k| {
            let a = TAU * k as f64 / m as f64;
            field.sample(radius * a.cos(), radius * a.sin())
        })
        .collect();
    if samples.iter().any(|v| !(v.norm() > floor)) {
        return Err(Error::CircleThroughZero { radius_m: radius });
    }
    let total: f64 = (0..m)
        .map(|k| (samples[(k + 1) % m] * samples[k].conj()).arg())
        .sum();
    Ok((total / TAU).round() as i32)
}

/// Wrapped phase of `E(b) / E(a)`, in `(-pi, pi]`.
pub fn phase_difference(field: &ComplexField, a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = (field.sample(b.0, b.1) * field.sample(a.0, a.1).conj()).arg();
    if d <= -PI {
        d + TAU
    } else {
        d
    }
}

/// Normalized mode overlap `|<a|b>|^2 / (P_a P_b)`, clipped to `[0, 1]`.
pub fn fidelity(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    let (pa, pb) = (a.power(), b.power());
    if pa == 0.0 || pb == 0.0 {
        return Err(Error::ZeroPower);
    }
    let dx2 = a.grid().dx() * a.grid().dx();
    let overlap: Complex64 = a.values().iter().zip(b.values()).map(|(u, v)| u.conj() * v).sum::<Complex64>() * dx2;
    Ok((overlap.norm_sqr() / (pa * pb)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub center: (f64, f64),
    pub nbins: usize,
    pub amplitude_ceiling: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            center: (0.0, 0.0),
            nbins: 256,
            amplitude_ceiling: DEFAULT_AMPLITUDE_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub profile: RadialProfile,
    /// `None` when the profile has no single dominant ring.
    pub fwhm: Option<f64>,
    pub peak_radius: Option<f64>,
    pub singularities: Vec<Singularity>,
    pub fidelity_vs_reference: Option<f64>,
}

/// Profile, ring width and position, singularities and (optionally)
/// fidelity against a reference, in one pass.
pub fn analyze(
    field: &ComplexField,
    options: &AnalysisOptions,
    reference: Option<&ComplexField>,
) -> Result<AnalysisReport> {
    let profile = radial_profile(field, options.center, options.nbins)?;
    let ring = |e: Error| match e {
        Error::NoUniquePeak | Error::HalfMaxNotCrossed { .. } => Ok(None),
        other => Err(other),
    };
    let fwhm = fwhm(&profile).map(Some).or_else(ring)?;
    let peak_radius = peak_radius(&profile).map(Some).or_else(ring)?;
    let singularities = detect_singularities(field, options.amplitude_ceiling)?;
    let fidelity_vs_reference = reference.map(|r| fidelity(r, field)).transpose()?;
    Ok(AnalysisReport {
        profile,
        fwhm,
        peak_radius,
        singularities,
        fidelity_vs_reference,
    })
}
