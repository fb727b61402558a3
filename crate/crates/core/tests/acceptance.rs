//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use outlight::dataselect::{color_histogram, filter_images, histogram_similarity};
use outlight::envmap::{solid_angle, tonemap, Direction, EnvMap};
use outlight::fit::{fit_sh_lighting, reconstruction_loss};
use outlight::gbuffer::{reproject_all, CameraIntrinsics, GBuffer, ProbeLocation, PROBE_OFFSET};
use outlight::grid::{Grid, Mask, RgbImage, ScalarImage};
use outlight::metrics::{angular_errors, ssim, sun_position, tonemapped_ssim_loss};
use outlight::sh::{diffuse_convolve, fit_to_irradiance, render_sh, ShCoeffs};
use outlight::synth::StreetScene;
use outlight::warp::{warp_to_probe, zbuffer_splat};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> ShCoeffs<f64> {
    ShCoeffs {
        coeffs: std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
    }
}

/// Criterion 1: pixel solid angles sum to 4 pi.
fn solid_angle_closure() -> Check {
    let mut worst = 0.0f64;
    for dims in [(16, 8), (64, 32), (256, 128)] {
        let mut total = 0.0;
        for v in 0..dims.1 {
            for u in 0..dims.0 {
                total += solid_angle::<f64>(dims, (u, v)).map_err(|e| e.to_string())?;
            }
        }
        let rel = (total - 4.0 * PI).abs() / (4.0 * PI);
        ensure(rel < 1e-9, format!("{dims:?}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("max relative error {worst:.1e} (< 1e-9)"))
}

/// Criterion 2: optimized convolution against the brute-force double loop.
fn diffuse_convolution_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let random_env = |rng: &mut ChaCha8Rng, w, h| {
        EnvMap::new(RgbImage::from_fn(w, h, |_, _| {
            [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]
        }))
        .unwrap()
    };
    let h = random_env(&mut rng, 32, 16);
    let fast = diffuse_convolve(&h, (32, 16)).unwrap();
    ensure(fast == common::brute_diffuse(&h, (32, 16)), "32x16: not bit-identical")?;

    let h = random_env(&mut rng, 64, 32);
    let fast = diffuse_convolve(&h, (64, 32)).unwrap();
    let err64 = common::max_abs_diff(fast.image(), common::brute_diffuse(&h, (64, 32)).image());
    ensure(err64 <= 1e-12, format!("64x32: max abs diff {err64:e}"))?;

    let c = [1.7f64, 0.9, 0.35];
    let d = diffuse_convolve(&EnvMap::constant(128, 64, c).unwrap(), (128, 64)).unwrap();
    let mut worst = 0.0f64;
    for p in d.image().pixels() {
        for k in 0..3 {
            worst = worst.max((p[k] - c[k] / 2.0).abs());
        }
    }
    ensure(worst < 1e-3, format!("constant map: max deviation from c/2 {worst:e}"))?;
    Ok(format!(
        "32x16 bit-identical; 64x32 max diff {err64:.1e} (<= 1e-12); constant c/2 max dev {worst:.1e} (< 1e-3)"
    ))
}

/// Criterion 3: projecting an irradiance image generated from random L.
fn sh_round_trip() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let l = random_coeffs(&mut rng);
        let d = render_sh(&l, (64, 32), false).unwrap();
        let (fit, _) = fit_to_irradiance(&d).map_err(|e| e.to_string())?;
        worst = worst.max(fit.max_abs_diff(&l));
    }
    ensure(worst < 1e-6, format!("max abs coefficient error {worst:e}"))?;
    Ok(format!("10 seeds, max abs coefficient error {worst:.1e} (< 1e-6)"))
}

/// Criterion 4: inverse-rendering fit on a synthetic scene.
fn fit_round_trip() -> Check {
    let scene = StreetScene::default();
    ensure(scene.orientation_count() >= 4, "too few orientations")?;
    let g: GBuffer<f64> = scene.render().map_err(|e| e.to_string())?;
    let truth = &scene.lighting;
    let clean = fit_sh_lighting(&g).map_err(|e| e.to_string())?;
    let clean_err = clean.coeffs.max_abs_diff(truth);
    ensure(clean_err < 1e-6, format!("noise-free error {clean_err:e}"))?;
    let loss_gt = reconstruction_loss(&g, truth).map_err(|e| e.to_string())?;
    ensure(loss_gt < 1e-9, format!("loss at ground truth {loss_gt:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut noisy = g.clone();
    for p in noisy.image.pixels_mut() {
        for c in p.iter_mut() {
            let lin = c.powf(2.2) + noise.sample(&mut rng);
            *c = lin.max(0.0).powf(1.0 / 2.2);
        }
    }
    let fit = fit_sh_lighting(&noisy).map_err(|e| e.to_string())?;
    let noisy_err = fit.coeffs.max_abs_diff(truth);
    ensure(noisy_err <= 5e-2, format!("noisy error {noisy_err:e}"))?;
    Ok(format!(
        "{} orientations; noise-free error {clean_err:.1e} (< 1e-6); sigma 0.01 error {noisy_err:.1e} (<= 5e-2); loss at truth {loss_gt:.1e} (< 1e-9)",
        scene.orientation_count()
    ))
}

/// Criterion 5: reprojected points lie on their planes; probe offset.
fn reprojection_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut worst_off = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..20 {
        let (w, h) = (64, 48);
        let f = rng.random_range(30.0..120.0);
        let k = CameraIntrinsics::new(f, f * rng.random_range(0.9..1.1), rng.random_range(20.0..44.0), rng.random_range(16.0..32.0))
            .unwrap();
        // normal facing the camera
        let n = loop {
            let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..0.0)];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 0.2 && v[2] / r < -0.3 {
                break v.map(|c| c / r);
            }
        };
        let p = rng.random_range(0.5..10.0);
        let g = GBuffer::new(
            RgbImage::filled(w, h, [0.5; 3]),
            RgbImage::filled(w, h, [0.5; 3]),
            Grid::filled(w, h, n),
            ScalarImage::filled(w, h, p),
            ScalarImage::filled(w, h, 1.0),
            Mask::filled(w, h, false),
            k,
        )
        .map_err(|e| e.to_string())?;
        let cloud = reproject_all(&g);
        for (pt, &ok) in cloud.points.pixels().iter().zip(cloud.valid.pixels()) {
            if ok {
                worst = worst.max((common::dot(n, *pt) + p).abs());
                checked += 1;
            }
        }
        for _ in 0..5 {
            let px = (rng.random_range(0..w), rng.random_range(0..h));
            if !cloud.valid.get(px.0, px.1) {
                continue;
            }
            let probe = ProbeLocation::locate(&g, px).map_err(|e| e.to_string())?;
            let base = cloud.points.get(px.0, px.1);
            let off = [0, 1, 2].map(|i| probe.center[i] - base[i]);
            worst_off = worst_off.max((common::dot(off, off).sqrt() - PROBE_OFFSET).abs());
        }
    }
    ensure(worst < 1e-9, format!("plane residual {worst:e}"))?;
    ensure(worst_off < 1e-12, format!("probe offset error {worst_off:e}"))?;
    Ok(format!(
        "{checked} points, max |n.P + p| {worst:.1e} (< 1e-9); probe offset |err| {worst_off:.1e} (< 1e-12)"
    ))
}

/// Criterion 6: Z-buffer equivalence, ray-cast round trip, thread determinism.
fn warp_oracles() -> Check {
    let scene = common::TwoPlaneScene::new(64, 48);
    let g = scene.gbuffer();
    let cloud = reproject_all(&g);
    let pts: Vec<(usize, [f64; 3])> = cloud
        .points
        .pixels()
        .iter()
        .zip(cloud.valid.pixels())
        .enumerate()
        .filter_map(|(i, (p, &ok))| ok.then_some((i, *p)))
        .collect();
    let probe = ProbeLocation::locate(&g, (32, 44)).map_err(|e| e.to_string())?;
    ensure(
        zbuffer_splat(&pts, probe.center, (32, 16)) == common::brute_zbuffer(&pts, probe.center, (32, 16)),
        "Z-buffer differs from exhaustive scan at 32x16",
    )?;

    let warped = warp_to_probe(&g, &probe, (128, 64)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for src in warped.source.pixels().iter().flatten() {
        let p = cloud.points.pixels()[*src];
        let d = [0, 1, 2].map(|i| p[i] - probe.center[i]);
        let hit = scene.ray_cast(probe.center, d).ok_or("winner not on any surface")?;
        let (x, y) = scene.project(hit);
        let (sx, sy) = ((src % 64) as f64, (src / 64) as f64);
        worst = worst.max((x - sx).abs().max((y - sy).abs()));
    }
    ensure(worst <= 1.0, format!("round trip off by {worst} source pixels"))?;

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| warp_to_probe(&g, &probe, (64, 32)).unwrap())
    };
    let one = run(1);
    ensure(run(2) == one && run(8) == one, "warp differs across thread counts")?;
    Ok(format!(
        "32x16 Z-buffer identical to scan; round trip max {worst:.1e} px (<= 1); identical under 1/2/8 threads"
    ))
}

/// Criterion 7: sun extraction on synthetic discs.
fn sun_extraction() -> Check {
    let dims = (256, 128);
    let az_tol = 360.0 / dims.0 as f64;
    let el_tol = 180.0 / dims.1 as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let radius = 2.5f64.to_radians();
    let (mut worst_az, mut worst_el) = (0.0f64, 0.0f64);
    let mut cases: Vec<(f64, f64)> = (0..20)
        .map(|_| (rng.random_range(-180.0..180.0), rng.random_range(5.0..70.0)))
        .collect();
    // straddles the left/right seam
    cases.push((179.6, 35.0));
    for (az, el) in cases {
        let truth = Direction::from_spherical(f64::to_radians(az), f64::to_radians(el));
        let h = common::sun_disc_map(dims, truth, radius);
        let s = sun_position(&h).map_err(|e| e.to_string())?;
        let e = angular_errors(&s.direction, &truth).to_degrees();
        ensure(
            e.azimuth <= az_tol && e.elevation <= el_tol,
            format!("sun at ({az:.2}, {el:.2}): errors az {:.3} el {:.3}", e.azimuth, e.elevation),
        )?;
        worst_az = worst_az.max(e.azimuth);
        worst_el = worst_el.max(e.elevation);
        let scaled = sun_position(&h.scaled(10.0).unwrap()).map_err(|e| e.to_string())?;
        ensure(scaled.direction == s.direction, "direction changed under 10x scaling")?;
    }
    Ok(format!(
        "20 random discs + seam disc: max az err {worst_az:.3} deg (<= {az_tol:.3}), max el err {worst_el:.3} deg (<= {el_tol:.3}); 10x scale invariant"
    ))
}

/// Criterion 8: SSIM, tonemapped SSIM loss, angular wraparound.
fn metric_checks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rand_img = |w, h| RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]);
    let mut worst_self = 0.0f64;
    let mut worst_ref = 0.0f64;
    for _ in 0..5 {
        let (a, b) = (rand_img(32, 32), rand_img(32, 32));
        worst_self = worst_self.max((ssim::<f64>(&a, &a).unwrap() - 1.0).abs());
        // correlated pair so the comparison is not only near zero
        let mix = RgbImage::from_fn(32, 32, |x, y| {
            let (p, q) = (a.get(x, y), b.get(x, y));
            [0, 1, 2].map(|c| 0.7 * p[c] + 0.3 * q[c])
        });
        for (x, y) in [(&a, &b), (&a, &mix)] {
            worst_ref = worst_ref.max((ssim::<f64>(x, y).unwrap() - common::brute_ssim(x, y)).abs());
        }
    }
    ensure(worst_self < 1e-12, format!("ssim(x, x) off by {worst_self:e}"))?;
    ensure(worst_ref < 1e-9, format!("ssim vs reference {worst_ref:e}"))?;

    let sun = Direction::from_spherical(0.4f64, 0.5);
    let hdr = common::sun_disc_map((64, 32), sun, 0.2);
    let same = tonemapped_ssim_loss(&hdr, &hdr).unwrap();
    ensure(same == 0.0, format!("identical maps: loss {same}"))?;
    let over_a = EnvMap::from_directions(64, 32, |d: Direction<f64>| [1.5 + d.x().abs(); 3]).unwrap();
    let over_b = EnvMap::from_directions(64, 32, |d: Direction<f64>| [3.0 + 5.0 * d.z().abs(); 3]).unwrap();
    let e = -0.3;
    let both_clamped = [&over_a, &over_b]
        .iter()
        .all(|m| m.image().pixels().iter().all(|p| p.iter().all(|&c| 2f64.powf(e) * c > 1.0)));
    ensure(both_clamped, "saturating pair is not above the clamp")?;
    ensure(tonemap(&over_a, e, 2.2).unwrap() == tonemap(&over_b, e, 2.2).unwrap(), "tonemaps differ")?;
    let sat = tonemapped_ssim_loss(&over_a, &over_b).unwrap();
    ensure(sat == 0.0, format!("saturating pair: loss {sat}"))?;

    let a = Direction::from_spherical(179f64.to_radians(), 0.2);
    let b = Direction::from_spherical((-179f64).to_radians(), 0.2);
    let wrap = angular_errors(&a, &b).azimuth.to_degrees();
    ensure((wrap - 2.0).abs() < 1e-9, format!("wraparound error {wrap}"))?;
    Ok(format!(
        "ssim(x,x) dev {worst_self:.1e} (< 1e-12); vs reference {worst_ref:.1e} (< 1e-9); tonemapped loss 0 on identical and saturated pairs; 179 vs -179 -> {wrap:.6} deg"
    ))
}

/// Criterion 9: histogram filtering.
fn data_filtering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // palette images so that scores spread over [0, 1]
    let palette_img = |rng: &mut ChaCha8Rng| {
        let base: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        RgbImage::from_fn(16, 16, |_, _| {
            base.map(|c: f64| (c + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0))
        })
    };
    let cands: Vec<_> = (0..50).map(|_| palette_img(&mut rng)).collect();
    let mut refs: Vec<_> = (0..20).map(|_| palette_img(&mut rng)).collect();
    refs[7] = cands[13].clone();
    let out = filter_images(&cands, &refs, 0.7).map_err(|e| e.to_string())?;

    let bin = |p: [f64; 3]| {
        let b = p.map(|c| ((c * 16.0).floor() as usize).min(15));
        (b[0] * 16 + b[1]) * 16 + b[2]
    };
    let freq = |img: &RgbImage<f64>| {
        let mut f = vec![0.0; 4096];
        for &p in img.pixels() {
            f[bin(p)] += 1.0 / img.len() as f64;
        }
        f
    };
    let ref_freq: Vec<_> = refs.iter().map(freq).collect();
    let mut worst = 0.0f64;
    for (c, r) in cands.iter().zip(&out) {
        let fc = freq(c);
        let best = ref_freq
            .iter()
            .map(|fr| fc.iter().zip(fr).map(|(a, b)| a.min(*b)).sum::<f64>())
            .fold(0.0, f64::max);
        worst = worst.max((best - r.score).abs());
        ensure(r.kept == (r.score > 0.7), "kept flag disagrees with score")?;
    }
    ensure(worst < 1e-12, format!("score mismatch {worst:e}"))?;
    ensure(out[13].score == 1.0 && out[13].kept, "identical image not scored 1 / kept")?;

    let dark = color_histogram(&RgbImage::filled(8, 8, [0.05f64; 3])).unwrap();
    let light = color_histogram(&RgbImage::filled(8, 8, [0.95f64; 3])).unwrap();
    ensure(histogram_similarity(&dark, &light) == 0.0, "disjoint score not 0")?;
    let disjoint = filter_images(&[RgbImage::filled(8, 8, [0.05f64; 3])], &[RgbImage::filled(8, 8, [0.95; 3])], 0.7)
        .map_err(|e| e.to_string())?;
    ensure(!disjoint[0].kept, "disjoint candidate kept")?;
    let kept = out.iter().filter(|r| r.kept).count();
    Ok(format!(
        "50x20 scores match scan within {worst:.1e} (< 1e-12), {kept} kept at 0.7; identical -> 1 kept; disjoint -> 0 rejected"
    ))
}

/// Criterion 10: two CLI pipeline runs on the bundled scene are byte-identical.
fn pipeline_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = common::bundled_scene_manifest();
    let run = |dir: &Path| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_outlight"))
            .args(["pipeline", "--gbuffer"])
            .arg(&manifest)
            .args(["--probe", "57,57", "--out-dir"])
            .arg(dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            out.status.success(),
            format!("pipeline failed: {}", String::from_utf8_lossy(&out.stderr)),
        )
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a)?;
    run(&b)?;
    let files = [
        "shcoeffs.json",
        "fit_report.json",
        "sky.pfm",
        "warp/color.pfm",
        "warp/shadow.pfm",
        "warp/valid.png",
        "warp/depth.pfm",
        "local.pfm",
    ];
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        let (x, y) = (x.map_err(|e| format!("{f}: {e}"))?, y.map_err(|e| format!("{f}: {e}"))?);
        ensure(x == y, format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", files.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 10] = [
        ("solid-angle closure", Duration::from_secs(1), solid_angle_closure),
        ("diffuse-convolution oracle", Duration::from_secs(30), diffuse_convolution_oracle),
        ("SH round trip", Duration::from_secs(10), sh_round_trip),
        ("inverse-rendering fit round trip", Duration::from_secs(10), fit_round_trip),
        ("reprojection and probe geometry", Duration::from_secs(5), reprojection_geometry),
        ("warp oracles", Duration::from_secs(30), warp_oracles),
        ("sun extraction", Duration::from_secs(10), sun_extraction),
        ("metrics", Duration::from_secs(10), metric_checks),
        ("data filtering", Duration::from_secs(10), data_filtering),
        ("pipeline determinism", Duration::from_secs(60), pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let timing = format!("{:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs());
        let (ok, detail) = match result {
            Ok(d) if took <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail}; {timing}",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
