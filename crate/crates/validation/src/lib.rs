//! Reference implementations the acceptance suite checks `mpov-core`
//! against. Nothing here calls into the spectral code paths.

use std::f64::consts::{PI, TAU};

use mpov_core::beams::PovRingSpec;
use mpov_core::ComplexField;
use num_complex::Complex64;
use rand::Rng;

pub fn rel_rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Direct periodic convolution with the sampled heat kernel
/// `dx^2 / (4 pi D t) exp(-r^2 / 4 D t)`, nearest periodic images included.
/// Quartic in the grid size; meant for grids of a few thousand samples.
pub fn brute_force_diffuse(field: &ComplexField, d: f64, t: f64) -> Vec<Complex64> {
    let g = field.grid();
    let (nx, ny, dx) = (g.nx() as i64, g.ny() as i64, g.dx());
    let four_dt = 4.0 * d * t;
    let norm = dx * dx / (PI * four_dt);
    let mut out = vec![Complex64::new(0.0, 0.0); field.values().len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..ny {
                for p in 0..nx {
                    let src = field.at(p as usize, q as usize);
                    for my in -1..=1 {
                        for mx in -1..=1 {
                            let sx = (i - p + mx * nx) as f64 * dx;
                            let sy = (j - q + my * ny) as f64 * dx;
                            acc += src * (norm * (-(sx * sx + sy * sy) / four_dt).exp());
                        }
                    }
                }
            }
            out[(j * nx + i) as usize] = acc;
        }
    }
    out
}

/// `(x + iy)^l exp(-r^2 / w0^2)`.
pub fn vortex_gaussian(x: f64, y: f64, w0: f64, l: i32) -> Complex64 {
    Complex64::new(x, y).powi(l) * (-(x * x + y * y) / (w0 * w0)).exp()
}

/// Closed-form heat-equation evolution of [`vortex_gaussian`] after `t`.
pub fn vortex_gaussian_diffused(x: f64, y: f64, w0: f64, l: i32, d: f64, t: f64) -> Complex64 {
    let w2 = w0 * w0 + 4.0 * d * t;
    (w0 * w0 / w2).powi(l + 1) * Complex64::new(x, y).powi(l) * (-(x * x + y * y) / w2).exp()
}

/// `sqrt(w0^2 + 4 D t)`.
pub fn gaussian_width(w0: f64, d: f64, t: f64) -> f64 {
    (w0 * w0 + 4.0 * d * t).sqrt()
}

/// Random MPOV with one to four rings of half-width `w`, spaced more than
/// `2w` apart, charges in `-5..=5`, random phases and amplitudes. The
/// outermost radius stays below `17 w`.
pub fn random_mpov(rng: &mut impl Rng, w: f64) -> Vec<PovRingSpec> {
    let mut rings = vec![PovRingSpec::new(rng.gen_range(2.0..5.0) * w, w, rng.gen_range(-5..=5))
        .unwrap()
        .with_phase(rng.gen_range(-PI..PI))];
    for _ in 0..rng.gen_range(1..4) {
        let r = rings.last().unwrap().radius + rng.gen_range(2.05..4.0) * w;
        rings.push(
            PovRingSpec::new(r, w, rng.gen_range(-5..=5))
                .unwrap()
                .with_phase(rng.gen_range(0.0..TAU))
                .with_amplitude(rng.gen_range(0.5..1.5)),
        );
    }
    rings
}
