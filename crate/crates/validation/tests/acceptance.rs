//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use mpov_cli::scenario::{run_scenario, RunOptions};
use mpov_cli::scenarios::BUNDLED;
use mpov_core::analysis::{
    detect_singularities, fidelity, fit_gaussian_width, fwhm, peak_radius, radial_profile, winding_on_circle,
    DEFAULT_AMPLITUDE_CEILING,
};
use mpov_core::beams::{
    predict_singularity_angles, predicted_singularity_radius, synth_gaussian, synth_mpov, synth_pov, MpovSpec,
    PovRingSpec,
};
use mpov_core::diagnostics::{
    count_dark_stripes, demultiplex, fit_diffusion_coefficient, measure_widths, tilted_lens_image, TiltedLensSpec,
};
use mpov_core::storage::{diffuse, storage_sweep, StorageParams};
use mpov_core::{make_grid, ComplexField, GridSpec};
use mpov_validation::{
    brute_force_diffuse, gaussian_width, random_mpov, rel_rms, vortex_gaussian, vortex_gaussian_diffused,
};
use num_complex::Complex64;
use rand::SeedableRng;

const D: f64 = 2.5e-3;
const WAVELENGTH: f64 = 795e-9;

type Outcome = Result<String, String>;

fn grid_1024() -> GridSpec {
    make_grid(1024, 1024, 4e-6, WAVELENGTH).unwrap()
}

fn ring(r: f64, w: f64, l: i32) -> PovRingSpec {
    PovRingSpec::new(r, w, l).unwrap()
}

fn stored(field: &ComplexField, t: f64) -> ComplexField {
    storage_sweep(field, D, &[t]).unwrap().pop().unwrap()
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn gaussian_oracle() -> Outcome {
    let g = grid_1024();
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    let mut failures = Vec::new();
    for w0 in [0.1e-3, 0.2e-3, 0.4e-3] {
        for t in [5e-6, 10e-6, 30e-6] {
            let start = Instant::now();
            let out = stored(&synth_gaussian(&g, w0, 1.0).unwrap(), t);
            let w = fit_gaussian_width(&radial_profile(&out, (0.0, 0.0), 256).unwrap()).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let err = (w / gaussian_width(w0, D, t) - 1.0).abs();
            worst = worst.max(err);
            slowest = slowest.max(secs);
            if err > 5e-3 || secs >= 5.0 {
                failures.push(format!("w0={w0:e} t={t:e}: err {err:.2e}, {secs:.2} s"));
            }
        }
    }
    let detail = format!("worst width error {worst:.2e} (< 5e-3), slowest case {slowest:.2} s (< 5 s)");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn vortex_scaling() -> Outcome {
    let g = grid_1024();
    let (w0, t) = (0.1e-3, 5e-6);
    let mut errs = Vec::new();
    for l in 1..=3 {
        let input = ComplexField::from_fn(g, |x, y| vortex_gaussian(x, y, w0, l)).unwrap();
        let exact = ComplexField::from_fn(g, |x, y| vortex_gaussian_diffused(x, y, w0, l, D, t)).unwrap();
        let out = diffuse(&input, &StorageParams::new(D, t).unwrap()).unwrap();
        errs.push(rel_rms(out.values(), exact.values()));
    }
    let listed: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    let detail = format!("relative RMS for l=1..3: {} (< 1e-6)", listed.join(", "));
    if errs.iter().all(|&e| e < 1e-6) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn brute_force() -> Outcome {
    let dx = 10e-6;
    let g = make_grid(64, 64, dx, WAVELENGTH).unwrap();
    let t = (2.5 * dx).powi(2) / (4.0 * D);
    let f = ComplexField::from_fn(g, |x, y| {
        let env = (-((x - 30e-6).powi(2) + (y + 20e-6).powi(2)) / (60e-6f64).powi(2)).exp();
        Complex64::from_polar(env, 2e4 * x - 1e4 * y)
    })
    .unwrap();
    let spectral = diffuse(&f, &StorageParams::new(D, t).unwrap()).unwrap();
    let err = rel_rms(spectral.values(), &brute_force_diffuse(&f, D, t));
    let detail = format!("relative RMS {err:.2e} (< 1e-8)");
    if err < 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Peak shift and relative FWHM growth of a single stored POV.
fn pov_response(l: i32) -> (f64, f64) {
    let g = grid_1024();
    let f = synth_pov(&g, &ring(0.45e-3, 0.14e-3, l)).unwrap();
    let out = storage_sweep(&f, D, &[0.0, 5e-6]).unwrap();
    let p0 = radial_profile(&out[0], (0.0, 0.0), 256).unwrap();
    let p1 = radial_profile(&out[1], (0.0, 0.0), 256).unwrap();
    (
        peak_radius(&p1).unwrap() - peak_radius(&p0).unwrap(),
        fwhm(&p1).unwrap() / fwhm(&p0).unwrap() - 1.0,
    )
}

fn pov_reproduction() -> Outcome {
    let w = 0.14e-3;
    let (s0, g0) = pov_response(0);
    let (s5, g5) = pov_response(5);
    let ok = s0 < 0.0
        && s5 > 0.0
        && within(-s0, 0.26 * w, 0.3)
        && within(s5, 0.51 * w, 0.3)
        && within(g0, 0.97, 0.3)
        && within(g5, 0.80, 0.3);
    let detail = format!(
        "l=0 shift {:.3}w growth {:.0}%, l=5 shift {:+.3}w growth {:.0}% (targets -0.26w/97%, +0.51w/80%, +-30%)",
        s0 / w,
        100.0 * g0,
        s5 / w,
        100.0 * g5
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn crossover() -> Outcome {
    let shifts: Vec<f64> = (0..=5).map(|l| pov_response(l).0 / 0.14e-3).collect();
    let ok = shifts.iter().enumerate().all(|(l, &s)| if l <= 2 { s < 0.0 } else { s > 0.0 });
    let detail = format!("shift / w for l=0..5: {shifts:+.3?}");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn singularity_census() -> Outcome {
    let g = grid_1024();
    let (r1, r2, w) = (0.56e-3, 0.83e-3, 0.11e-3);
    let configs: Vec<(i32, i32)> = (1..=5).map(|l2| (0, l2)).chain((2..=6).map(|l2| (1, l2))).collect();
    let mut failures = Vec::new();
    let mut worst_cells: f64 = 0.0;
    for (l1, l2) in configs {
        let (a, b) = (ring(r1, w, l1), ring(r2, w, l2));
        let field = stored(&synth_mpov(&g, &MpovSpec::new(vec![a, b]).unwrap()).unwrap(), 2e-6);
        let found: Vec<_> = detect_singularities(&field, DEFAULT_AMPLITUDE_CEILING)
            .unwrap()
            .into_iter()
            .filter(|s| (r1..r2).contains(&s.x.hypot(s.y)))
            .collect();
        let expected = (l2 - l1).unsigned_abs() as usize;
        if found.len() != expected {
            failures.push(format!("({l1},{l2}): {} found, {expected} expected", found.len()));
            continue;
        }
        let rho = predicted_singularity_radius(&a, &b);
        for phi in predict_singularity_angles(&a, &b).unwrap() {
            let cells = found
                .iter()
                .map(|s| angular_gap(s.y.atan2(s.x), phi) * rho / g.dx())
                .fold(f64::INFINITY, f64::min);
            worst_cells = worst_cells.max(cells);
            if cells > 2.0 {
                failures.push(format!("({l1},{l2}): predicted angle {phi:.4} off by {cells:.2} cells"));
            }
        }
    }
    let detail = format!("10 configurations, worst angular offset {worst_cells:.2} cells (<= 2)");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn fidelity_ordering() -> Outcome {
    let g = grid_1024();
    let w = 0.11e-3;
    let variant = |l: i32, middle_phase: f64| {
        vec![ring(0.28e-3, w, l), ring(0.56e-3, w, l).with_phase(middle_phase), ring(0.83e-3, w, l)]
    };
    let times = [0.4e-6, 1e-6, 3e-6];
    let fidelities = |rings: Vec<PovRingSpec>| -> Vec<f64> {
        let input = synth_mpov(&g, &MpovSpec::new(rings).unwrap()).unwrap();
        storage_sweep(&input, D, &times)
            .unwrap()
            .iter()
            .map(|out| fidelity(out, &input).unwrap())
            .collect()
    };
    let a = fidelities(variant(0, 0.0));
    let b = fidelities(variant(0, PI));
    let c = fidelities(variant(1, PI));
    let mut ok = true;
    let mut rows = Vec::new();
    for k in 0..times.len() {
        let good = b[k] > a[k] && c[k] > a[k];
        ok &= good;
        rows.push(format!(
            "t={:.1}us a={:.3} b={:.3} c={:.3}{}",
            times[k] * 1e6,
            a[k],
            b[k],
            c[k],
            if good { "" } else { " (b, c not both above a)" }
        ));
    }
    let detail = rows.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn diffusion_round_trip() -> Outcome {
    let g = grid_1024();
    let times: Vec<f64> = (0..=6).map(|k| 5e-6 * k as f64).collect();
    let fields = storage_sweep(&synth_gaussian(&g, 0.2e-3, 1.0).unwrap(), D, &times).unwrap();
    let widths = measure_widths(&fields, 256).unwrap();
    let samples: Vec<(f64, f64)> = times.iter().copied().zip(widths).collect();
    let fit = fit_diffusion_coefficient(&samples).unwrap();
    let err = (fit.diffusion / D - 1.0).abs();
    let detail = format!("D = {:.4} cm2/s, relative error {err:.2e} (< 1e-2)", fit.diffusion * 1e4);
    if err < 1e-2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oam_readout() -> Outcome {
    let g = grid_1024();
    let (r1, r2, w, cut) = (0.28e-3, 0.83e-3, 0.11e-3, 0.555e-3);
    let lens = TiltedLensSpec::default();
    let mut rows = Vec::new();
    let mut ok = true;
    for (l1, l2) in [(1, 3), (3, 5), (5, 1)] {
        let input = synth_mpov(&g, &MpovSpec::new(vec![ring(r1, w, l1), ring(r2, w, l2)]).unwrap()).unwrap();
        let (inner, outer) = demultiplex(&stored(&input, 2e-6), cut).unwrap();
        let windings = (winding_on_circle(&inner, r1).unwrap(), winding_on_circle(&outer, r2).unwrap());
        let stripes: Vec<Result<usize, String>> = [&inner, &outer]
            .iter()
            .map(|part| {
                tilted_lens_image(part, &lens)
                    .and_then(|img| count_dark_stripes(&img))
                    .map_err(|e| e.to_string())
            })
            .collect();
        let good = windings == (-l1, -l2)
            && stripes[0].as_ref().ok() == Some(&(l1 as usize))
            && stripes[1].as_ref().ok() == Some(&(l2 as usize));
        ok &= good;
        rows.push(format!("({l1},{l2}): windings {windings:?}, stripes {stripes:?}"));
    }
    let detail = rows.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn charge_conservation() -> Outcome {
    // 20 cells per ring half-width.
    let g = make_grid(1024, 1024, 2e-6, WAVELENGTH).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut failures = Vec::new();
    for case in 0..50 {
        let rings = random_mpov(&mut rng, 0.04e-3);
        let outer = rings.last().unwrap().radius;
        let f = synth_mpov(&g, &MpovSpec::new(rings).unwrap()).unwrap();
        let winding = winding_on_circle(&f, outer).unwrap();
        let enclosed: i32 = detect_singularities(&f, DEFAULT_AMPLITUDE_CEILING)
            .unwrap()
            .iter()
            .filter(|s| s.x.hypot(s.y) < outer)
            .map(|s| s.charge)
            .sum();
        if enclosed != winding {
            failures.push(format!("case {case}: enclosed {enclosed}, winding {winding}"));
        }
    }
    if failures.is_empty() {
        Ok("50 random configurations conserve charge".into())
    } else {
        Err(failures.join("; "))
    }
}

fn text_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = 0;
    let mut failures = Vec::new();
    for (name, text) in BUNDLED {
        let mut runs = Vec::new();
        for k in 0..2 {
            let out_dir = tmp.path().join(format!("{name}_{k}"));
            let options = RunOptions {
                out_dir: out_dir.clone(),
                reproducible: true,
            };
            if let Err(e) = run_scenario(text, &format!("bundled:{name}"), &options) {
                return Err(format!("{name}: {e}"));
            }
            runs.push(text_outputs(&out_dir));
        }
        files += runs[0].len();
        if runs[0] != runs[1] {
            failures.push(name.to_string());
        }
    }
    if failures.is_empty() {
        Ok(format!("{} scenarios, {files} CSV/JSON files identical across runs", BUNDLED.len()))
    } else {
        Err(format!("outputs differ for {}", failures.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gaussian diffusion oracle", gaussian_oracle),
        ("vortex-gaussian scaling", vortex_scaling),
        ("brute-force convolution oracle", brute_force),
        ("single POV shift and broadening", pov_reproduction),
        ("peak shift crossover", crossover),
        ("double-ring singularity census", singularity_census),
        ("triple-ring fidelity ordering", fidelity_ordering),
        ("diffusion coefficient round trip", diffusion_round_trip),
        ("demultiplexed OAM readout", oam_readout),
        ("charge conservation", charge_conservation),
        ("reproducible scenario outputs", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
