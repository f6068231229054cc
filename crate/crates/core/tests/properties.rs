use std::f64::consts::{PI, TAU};

use mpov_core::analysis::{detect_singularities, fidelity, radial_profile, winding_on_circle, DEFAULT_AMPLITUDE_CEILING};
use mpov_core::beams::{predict_singularity_angles, predicted_singularity_radius, synth_mpov, MpovSpec, PovRingSpec};
use mpov_core::diagnostics::{demultiplex, fit_diffusion_coefficient};
use mpov_core::storage::{diffuse, diffusion_kernel_spectrum, StorageParams};
use mpov_core::{make_grid, ComplexField, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn small_grid() -> GridSpec {
    make_grid(64, 64, 10e-6, 795e-9).unwrap()
}

fn field_from(seed: &[(f64, f64)], g: GridSpec) -> ComplexField {
    // A handful of displaced Gaussian blobs with arbitrary complex weights.
    ComplexField::from_fn(g, |x, y| {
        seed.chunks(2)
            .map(|c| {
                let (cx, cy) = (c[0].0 * 1e-4, c[0].1 * 1e-4);
                let amp = Complex64::new(c[1].0, c[1].1);
                amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (80e-6f64).powi(2)).exp()
            })
            .sum()
    })
    .unwrap()
}

fn blobs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2..8).prop_map(|mut v| {
        if v.len() % 2 == 1 {
            v.pop();
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_is_unity_at_dc(d in 0.0..1.0f64, t in 0.0..1e-3f64) {
        let k = diffusion_kernel_spectrum(&small_grid(), &StorageParams::new(d, t).unwrap());
        prop_assert_eq!(k.at(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn diffusion_never_adds_power(seed in blobs(), t in 0.0..2e-7f64) {
        prop_assume!(!seed.is_empty());
        let f = field_from(&seed, small_grid());
        prop_assume!(f.power() > 0.0);
        let out = diffuse(&f, &StorageParams::new(2.5e-3, t).unwrap()).unwrap();
        prop_assert!(out.power() <= f.power() * (1.0 + 1e-12));
    }

    #[test]
    fn fidelity_is_symmetric_and_invariant(
        a in blobs(), b in blobs(),
        s1 in (0.1..5.0f64, -PI..PI), s2 in (0.1..5.0f64, -PI..PI),
    ) {
        prop_assume!(!a.is_empty() && !b.is_empty());
        let g = small_grid();
        let (fa, fb) = (field_from(&a, g), field_from(&b, g));
        prop_assume!(fa.power() > 1e-20 && fb.power() > 1e-20);
        let ab = fidelity(&fa, &fb).unwrap();
        prop_assert!((ab - fidelity(&fb, &fa).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        let ca = fa.map(|v| v * Complex64::from_polar(s1.0, s1.1)).unwrap();
        let cb = fb.map(|v| v * Complex64::from_polar(s2.0, s2.1)).unwrap();
        prop_assert!((fidelity(&ca, &cb).unwrap() - ab).abs() < 1e-10);
        prop_assert!((fidelity(&fa, &ca).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_is_invariant_under_quarter_turn(seed in blobs()) {
        prop_assume!(!seed.is_empty());
        let g = small_grid();
        let f = field_from(&seed, g);
        // (x, y) -> (-y, x): sample (i, j) of the rotated field is f(j, n-1-i).
        let n = g.nx();
        let rotated: Vec<Complex64> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| f.at(j, n - 1 - i))
            .collect();
        let r = ComplexField::new(g, rotated).unwrap();
        let pa = radial_profile(&f, (0.0, 0.0), 16).unwrap();
        let pb = radial_profile(&r, (0.0, 0.0), 16).unwrap();
        let scale = pa.mean_intensity().iter().copied().fold(0.0, f64::max).max(1e-300);
        for (x, y) in pa.mean_intensity().iter().zip(pb.mean_intensity()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
        prop_assert_eq!(pa.bin_count(), pb.bin_count());
    }

    #[test]
    fn demux_partition_is_lossless_and_idempotent(seed in blobs(), cut in 20e-6..300e-6f64) {
        prop_assume!(!seed.is_empty());
        let f = field_from(&seed, small_grid());
        let (inner, outer) = demultiplex(&f, cut).unwrap();
        prop_assert_eq!(&inner.add(&outer).unwrap(), &f);
        let (inner2, _) = demultiplex(&inner, cut).unwrap();
        let (_, outer2) = demultiplex(&outer, cut).unwrap();
        prop_assert_eq!(inner2, inner);
        prop_assert_eq!(outer2, outer);
    }

    #[test]
    fn diffusion_fit_inverts_exact_law(d in 1e-4..1e-1f64, w0 in 1e-5..1e-3f64, dt in 1e-7..1e-5f64) {
        let samples: Vec<(f64, f64)> = (0..5).map(|k| {
            let t = k as f64 * dt;
            (t, (w0 * w0 + 4.0 * d * t).sqrt())
        }).collect();
        let fit = fit_diffusion_coefficient(&samples).unwrap();
        prop_assert!((fit.diffusion - d).abs() < 1e-8 * d);
        prop_assert!((fit.w0 - w0).abs() < 1e-8 * w0);
    }

    #[test]
    fn predicted_angles_are_zeros_of_equal_rings(
        la in -6i32..=6, lb in -6i32..=6, pa in -PI..PI, pb in -PI..PI,
    ) {
        prop_assume!(la != lb);
        let a = PovRingSpec::new(0.5e-3, 0.1e-3, la).unwrap().with_phase(pa);
        let b = PovRingSpec::new(0.8e-3, 0.1e-3, lb).unwrap().with_phase(pb);
        let spec = MpovSpec::new(vec![a, b]).unwrap();
        let angles = predict_singularity_angles(&a, &b).unwrap();
        prop_assert_eq!(angles.len(), (la - lb).unsigned_abs() as usize);
        let rho = predicted_singularity_radius(&a, &b);
        for phi in angles {
            prop_assert!((0.0..TAU).contains(&phi));
            prop_assert!(spec.value_at(rho * phi.cos(), rho * phi.sin()).norm() < 1e-9);
        }
    }
}

/// Random well-separated MPOV, outermost ring within 0.7 mm.
fn mpov_strategy() -> impl Strategy<Value = Vec<PovRingSpec>> {
    let w = 0.04e-3;
    (
        2.0..5.0f64,
        proptest::collection::vec((2.05..4.0f64, -5i32..=5, -PI..PI, 0.5..1.5f64), 1..4),
        -5i32..=5,
        -PI..PI,
    )
        .prop_map(move |(r1, rest, l1, p1)| {
            let mut rings = vec![PovRingSpec::new(r1 * w, w, l1).unwrap().with_phase(p1)];
            for (gap, l, p, a) in rest {
                let r = rings.last().unwrap().radius + gap * w;
                rings.push(PovRingSpec::new(r, w, l).unwrap().with_phase(p).with_amplitude(a));
            }
            rings
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn interior_charge_equals_boundary_winding(rings in mpov_strategy()) {
        let g = make_grid(1024, 1024, 2e-6, 795e-9).unwrap();
        let outer = rings.last().unwrap().radius;
        let f = synth_mpov(&g, &MpovSpec::new(rings).unwrap()).unwrap();
        let winding = winding_on_circle(&f, outer).unwrap();
        let enclosed: i32 = detect_singularities(&f, DEFAULT_AMPLITUDE_CEILING)
            .unwrap()
            .iter()
            .filter(|s| s.x.hypot(s.y) < outer)
            .map(|s| s.charge)
            .sum();
        prop_assert_eq!(enclosed, winding);
    }
}
