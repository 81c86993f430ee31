//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use holoforge_core::autofocus::{autofocus, CoarseScan, REFINE_TOLERANCE};
use holoforge_core::dataset::{feasible_overlap, make_pairs, TileSpec, TrainingPairArchive};
use holoforge_core::forward::phantom::{tissue, TissueSpec};
use holoforge_core::forward::{standard_heights, synthesize_hologram, synthesize_stack};
use holoforge_core::metrics::{
    effective_refractive_volume, phase_integral, psnr, scattering_ratio, ssim, SsimParams,
};
use holoforge_core::propagation::{backpropagate_hologram, propagate, propagate_padded};
use holoforge_core::psr::{full_grid, psr_fuse, simulate_frames, PsrOptions};
use holoforge_core::retrieval::{multiheight_recover, RecoveryOptions};
use holoforge_core::{Complex64, ComplexField, Mask, OpticalConfig, RealImage};

use common::*;

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn cfg(z2: f64) -> OpticalConfig {
    OpticalConfig::new(LAMBDA, z2, 1.0).unwrap()
}

fn propagation_oracle(g: &mut Gate) {
    let src = gaussian_emitter(64, PITCH, 1.5);
    let reference = rayleigh_sommerfeld(&src, 300.0, LAMBDA);
    let t = Instant::now();
    let out = propagate_padded(&src, 300.0, &cfg(300.0), 2).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = out.relative_l2(&reference).unwrap();
    g.report(
        "propagation vs Rayleigh-Sommerfeld (64x64, z=300, lambda=0.53, pitch=1.12)",
        err < 1e-3 && secs < 1.0,
        format!("relative L2 {err:.3e} (< 1e-3), {secs:.3} s (< 1 s)"),
    );
}

fn round_trip(g: &mut Gate) {
    let c = cfg(300.0);
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let f = smooth_field(256, PITCH, seed);
        let back = propagate(&propagate(&f, 300.0, &c).unwrap(), -300.0, &c).unwrap();
        worst = worst.max(back.relative_l2(&f).unwrap());
    }
    g.report(
        "round trip +z/-z on 256^2 band-limited fields",
        worst < 1e-6,
        format!("worst relative L2 {worst:.3e} (< 1e-6)"),
    );
}

fn multi_height(g: &mut Gate) {
    let phantom = dense_phantom(256, 11);
    let truth = phantom.transmission().real();
    let params = SsimParams::for_reference(&truth);
    let c = cfg(300.0);
    let stack = synthesize_stack(&phantom, &standard_heights(300.0), &c, (0.0, 0.0)).unwrap();
    let opts = RecoveryOptions::default();

    let input = backpropagate_hologram(&stack.planes()[0].intensity, &c).unwrap();
    let ssim_input = ssim(&input.real(), &truth, &params).unwrap();

    let mut curve = Vec::new();
    let mut full_secs = 0.0;
    for k in 2..=8 {
        let sub = stack.truncated(k).unwrap();
        let t = Instant::now();
        let rec = multiheight_recover(&sub, &opts).unwrap();
        if k == 8 {
            full_secs = t.elapsed().as_secs_f64();
        }
        curve.push(ssim(&rec.object_field.real(), &truth, &params).unwrap());
    }
    let s8 = *curve.last().unwrap();
    g.report(
        "multi-height SSIM(real) at 8 heights, 50 iterations",
        s8 >= 0.95,
        format!("SSIM {s8:.4} (>= 0.95), R = {:.3}", phantom.scattering_strength()),
    );
    g.report(
        "multi-height beats single-hologram back-propagation",
        s8 > ssim_input,
        format!("{s8:.4} > input {ssim_input:.4}"),
    );
    let monotone = curve.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = curve.iter().map(|s| format!("{s:.4}")).collect();
    g.report(
        "multi-height SSIM non-decreasing over N_holo = 2..8",
        monotone,
        format!("[{}]", shown.join(", ")),
    );
    g.report(
        "multi-height runtime at 256^2",
        full_secs < 30.0,
        format!("{full_secs:.2} s (< 30 s)"),
    );
}

fn focus(g: &mut Gate) {
    let phantom = text_phantom(256);
    let mut worst: f64 = 0.0;
    let mut widest: f64 = 0.0;
    let mut parts = Vec::new();
    for z in [300.0, 500.0, 712.34] {
        let holo = synthesize_hologram(&phantom, z, &cfg(z)).unwrap();
        let r = autofocus(&holo, &cfg(z), &CoarseScan::default()).unwrap();
        worst = worst.max((r.z_best - z).abs());
        widest = widest.max(r.final_bracket_width());
        parts.push(format!("{z} -> {:.3}", r.z_best));
    }
    g.report(
        "autofocus recovers z2 in {300, 500, 712.34} um",
        worst <= 1.0,
        format!("{} (max error {worst:.3} um, <= 1 um)", parts.join(", ")),
    );
    g.report(
        "autofocus terminal golden-section bracket",
        widest < REFINE_TOLERANCE,
        format!("{widest:.5} um (< 0.01 um)"),
    );
}

fn pixel_super_resolution(g: &mut Gate) {
    // HR hologram of a tissue section sampled at one third of the sensor pitch
    let hr_pitch = PITCH / 3.0;
    let phantom = tissue(&TissueSpec::default(), 255, 255, hr_pitch, 5).unwrap();
    let truth = synthesize_hologram(&phantom, 300.0, &cfg(300.0)).unwrap();
    let set = simulate_frames(&truth, 3, &full_grid(3), &PsrOptions::default()).unwrap();
    let fused = psr_fuse(&set, &PsrOptions::default()).unwrap().image;
    let predicted = box_autocorrelation_filter(&truth, 3);
    let dev = fused
        .data()
        .iter()
        .zip(predicted.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (lo, hi) = truth.min_max();
    let db = psnr(&fused, &truth, hi - lo).unwrap();
    let oracle_db = psnr(&predicted, &truth, hi - lo).unwrap();
    g.report(
        "PSR 3x3 exact-shift fusion PSNR (clean)",
        db >= 40.0 && dev < 1e-9,
        format!("{db:.2} dB (>= 40 dB), aperture oracle {oracle_db:.2} dB, max deviation from oracle {dev:.1e}"),
    );
}

fn metric_oracles(g: &mut Gate) {
    let holo = synthesize_hologram(&dense_phantom(128, 3), 300.0, &cfg(300.0)).unwrap();
    let s = ssim(&holo, &holo, &SsimParams::for_reference(&holo)).unwrap();
    g.report("ssim(a, a) == 1", s == 1.0, format!("{s:?}"));

    let mut worst: f64 = 0.0;
    for (p, lambda) in [(60.0, 0.53), (1.0, 0.405), (1234.5, 0.63), (0.0, 0.53)] {
        let v = effective_refractive_volume(p, lambda).unwrap();
        let expect = p * lambda / (2.0 * PI);
        let rel = if expect == 0.0 { v.abs() } else { ((v - expect) / expect).abs() };
        worst = worst.max(rel);
    }
    g.report(
        "effective refractive volume identity",
        worst <= f64::EPSILON,
        format!("max relative deviation {worst:.2e}"),
    );

    // background on the left half; the right half carries a scattered wave whose RMS
    // modulus over the whole frame is 0.30
    let a = Complex64::from_polar(0.9, 0.4);
    let amp = 0.30 * 2f64.sqrt();
    let u = ComplexField::from_fn(128, 128, PITCH, |x, y| {
        if x < 64 {
            a
        } else {
            let ph = ((x * 131 + y * 71) % 97) as f64 * 0.29;
            a * (Complex64::new(1.0, 0.0) + Complex64::from_polar(amp, ph))
        }
    })
    .unwrap();
    let r = scattering_ratio(&u, &Mask::from_fn(128, 128, |x, _| x < 64), None).unwrap();
    g.report(
        "scattering ratio of constructed R = 0.30",
        (r - 0.30).abs() <= 0.01,
        format!("R = {r:.6} (0.30 +- 0.01)"),
    );

    // area-weighted disk of radius 40 px with uniform phase 1.5 rad
    let (n, radius, phi) = (128usize, 40.0, 1.5);
    let sub = 16;
    let coverage = RealImage::from_fn(n, n, PITCH, |x, y| {
        let mut inside = 0;
        for j in 0..sub {
            for i in 0..sub {
                let px = x as f64 + (i as f64 + 0.5) / sub as f64 - n as f64 / 2.0;
                let py = y as f64 + (j as f64 + 0.5) / sub as f64 - n as f64 / 2.0;
                if px * px + py * py < radius * radius {
                    inside += 1;
                }
            }
        }
        inside as f64 / (sub * sub) as f64
    })
    .unwrap();
    let phase = coverage.map(|c| c * phi);
    let mask = Mask::from_fn(n, n, |x, y| coverage.get(x, y) > 0.0);
    let p = phase_integral(&phase, &mask, PITCH).unwrap();
    let exact = phi * PI * (radius * PITCH).powi(2);
    let rel = ((p - exact) / exact).abs();
    g.report(
        "phase integral of a uniform disk",
        rel < 1e-3,
        format!("{p:.4} vs {exact:.4} rad um^2, relative error {rel:.2e} (< 1e-3)"),
    );
}

fn dataset_consistency(g: &mut Gate) {
    let phantoms: Vec<_> = (0..3).map(|s| dense_phantom(256, 100 + s)).collect();
    let dir = tempfile::tempdir().unwrap();
    let tile = TileSpec {
        count_per_side: 5,
        overlap: feasible_overlap(256, 5).unwrap(),
    };
    make_pairs(
        &phantoms,
        &cfg(300.0),
        &standard_heights(300.0),
        tile,
        &RecoveryOptions::default(),
        dir.path(),
    )
    .unwrap();
    let archive = TrainingPairArchive::open(dir.path()).unwrap();
    let rms = archive.forward_consistency().unwrap();
    let worst = rms.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    g.report(
        "dataset forward consistency of exported target tiles",
        !rms.is_empty() && worst < 5e-3,
        format!("{} tiles, worst RMS {worst:.3e} (< 5e-3)", rms.len()),
    );
}

fn main() {
    let mut g = Gate { failures: 0 };
    propagation_oracle(&mut g);
    round_trip(&mut g);
    multi_height(&mut g);
    focus(&mut g);
    pixel_super_resolution(&mut g);
    metric_oracles(&mut g);
    dataset_consistency(&mut g);
    if g.failures > 0 {
        println!("acceptance: {} criterion checks failed", g.failures);
        std::process::exit(1);
    }
    println!("acceptance: all criterion checks passed");
}
