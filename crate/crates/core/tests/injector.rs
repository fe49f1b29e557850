mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use roadscale::cutout_pool::{CutoutPool, ObjectCutout};
use roadscale::geometry::{depth_at, project_road_point, render_road_mask, CameraRig, GroundPoint, PixelCoord};
use roadscale::injector::{
    add_noise, build_grid, render_frame, synthesize_frame, InjectionConfig, InjectionMode, SkipReason,
    SynthesizedFrame,
};
use roadscale::raster::{Grid, LabelMap, RgbImage};
use roadscale::synthetic::{road_scene, synthetic_pool};

struct Scene {
    rig: CameraRig,
    image: RgbImage,
    road: LabelMap,
    pool: CutoutPool,
}

fn scene() -> Scene {
    let rig = CameraRig::centered(566.0, 1.5, 0.03, 256, 512).unwrap();
    let (image, road) = road_scene(&rig, 80.0, 6.0, 7).unwrap();
    Scene {
        rig,
        image,
        road,
        pool: synthetic_pool(300, 1.5, 60.0, 11).unwrap(),
    }
}

fn cutout<'a>(pool: &'a CutoutPool, source_id: &str) -> &'a ObjectCutout {
    pool.cutouts().iter().find(|c| c.source_id == source_id).unwrap()
}

/// Every structural promise one synthesized frame makes.
fn check_frame(s: &Scene, cfg: &InjectionConfig, out: &SynthesizedFrame) {
    let ids: BTreeSet<u32> = out.labels.as_slice().iter().copied().filter(|&v| v != 0).collect();
    let rec_ids: BTreeSet<u32> = out.records.iter().map(|r| r.id).collect();
    assert_eq!(ids, rec_ids);
    assert_eq!(rec_ids.len(), out.records.len());

    for rec in &out.records {
        let (lo, hi) = rec.pixel_size_range;
        assert!(lo <= rec.placed_size_px && rec.placed_size_px <= hi, "{rec:?}");
        let (r, c) = rec.anchor.contact_pixel();
        assert!(*s.road.get(r as usize, c as usize) != 0);
        assert!(r as f64 > s.rig.horizon_row());

        let src = cutout(&s.pool, &rec.source_id);
        let (top, left, h, w) = rec.placed_bbox;
        assert_eq!((h, w), src.mask.dims());
        assert_eq!(top + h as i64 - 1, r);
        assert_eq!(left + (w / 2) as i64, c);
        for dr in 0..h {
            for dc in 0..w {
                let (ir, ic) = (top + dr as i64, left + dc as i64);
                if !out.labels.contains(ir, ic) {
                    continue;
                }
                let (ir, ic) = (ir as usize, ic as usize);
                if *out.labels.get(ir, ic) == rec.id {
                    assert!(*src.mask.get(dr, dc));
                    if cfg.feather_px == 0 {
                        assert_eq!(out.image.get(ir, ic), src.pixels.get(dr, dc));
                    }
                }
            }
        }
    }
    // background untouched
    for (i, &l) in out.labels.as_slice().iter().enumerate() {
        if l == 0 {
            assert_eq!(out.image.as_slice()[i], s.image.as_slice()[i]);
        }
    }
}

#[test]
fn perspective_frames_keep_every_promise() {
    let s = scene();
    let cfg = InjectionConfig {
        feather_px: 0,
        master_seed: 3,
        ..Default::default()
    };
    let mut placed = 0;
    for i in 0..30 {
        let out = synthesize_frame(&s.image, &s.road, &s.rig, &s.pool, &cfg, &format!("f{i}")).unwrap();
        check_frame(&s, &cfg, &out);
        placed += out.records.len();
    }
    assert!(placed > 100, "only {placed} objects placed");
}

#[test]
fn uniform_frames_keep_structural_promises() {
    let s = scene();
    let cfg = InjectionConfig {
        mode: InjectionMode::Uniform,
        feather_px: 0,
        master_seed: 3,
        ..Default::default()
    };
    for i in 0..10 {
        let out = render_frame(&s.image, &s.road, &s.rig, &s.pool, &cfg, &format!("f{i}")).unwrap();
        let ids: BTreeSet<u32> = out.labels.as_slice().iter().copied().filter(|&v| v != 0).collect();
        assert_eq!(ids, out.records.iter().map(|r| r.id).collect());
        for rec in &out.records {
            let (r, c) = rec.anchor.contact_pixel();
            assert!(*s.road.get(r as usize, c as usize) != 0);
        }
    }
}

#[test]
fn feathered_paste_only_touches_the_mask() {
    let s = scene();
    let cfg = InjectionConfig {
        feather_px: 2,
        master_seed: 9,
        ..Default::default()
    };
    let out = synthesize_frame(&s.image, &s.road, &s.rig, &s.pool, &cfg, "f").unwrap();
    check_frame(&s, &cfg, &out);
}

#[test]
fn empty_pool_places_nothing() {
    let s = scene();
    let empty = CutoutPool::new(Vec::new());
    for mode in [InjectionMode::Perspective, InjectionMode::Uniform] {
        let cfg = InjectionConfig {
            mode,
            ..Default::default()
        };
        let out = render_frame(&s.image, &s.road, &s.rig, &empty, &cfg, "f").unwrap();
        assert!(out.records.is_empty());
        assert!(!out.skips.is_empty());
        assert!(out.skips.iter().all(|k| k.reason == SkipReason::NoCandidate));
        assert_eq!(out.image, s.image);
        assert!(out.labels.as_slice().iter().all(|&v| v == 0));
    }
}

#[test]
fn zero_fill_probability_leaves_frame_alone() {
    let s = scene();
    let cfg = InjectionConfig {
        fill_probability: 0.0,
        ..Default::default()
    };
    let out = render_frame(&s.image, &s.road, &s.rig, &s.pool, &cfg, "f").unwrap();
    assert!(out.records.is_empty() && out.skips.is_empty());
    assert_eq!(out.image, s.image);
}

fn fingerprint(out: &SynthesizedFrame) -> (Vec<[u8; 3]>, Vec<u32>, String) {
    (
        out.image.as_slice().to_vec(),
        out.labels.as_slice().to_vec(),
        serde_json::to_string(&(&out.records, &out.skips)).unwrap(),
    )
}

#[test]
fn results_do_not_depend_on_order_or_threads() {
    let s = scene();
    for mode in [InjectionMode::Perspective, InjectionMode::Uniform] {
        let cfg = InjectionConfig {
            mode,
            master_seed: 42,
            noise: 2.0,
            ..Default::default()
        };
        let ids: Vec<String> = (0..12).map(|i| format!("frame{i}")).collect();
        let run = |id: &String| {
            let out = render_frame(&s.image, &s.road, &s.rig, &s.pool, &cfg, id).unwrap();
            (id.clone(), fingerprint(&out))
        };
        let forward: BTreeMap<_, _> = ids.iter().map(run).collect();
        let backward: BTreeMap<_, _> = ids.iter().rev().map(run).collect();
        let parallel: BTreeMap<_, _> = ids.par_iter().map(run).collect();
        assert_eq!(forward, backward);
        assert_eq!(forward, parallel);
        // different frames, different content
        assert_ne!(forward["frame0"], forward["frame1"]);
    }
}

#[test]
fn master_seed_changes_output() {
    let s = scene();
    let a = InjectionConfig::default();
    let b = InjectionConfig {
        master_seed: 1,
        ..Default::default()
    };
    let fa = render_frame(&s.image, &s.road, &s.rig, &s.pool, &a, "f").unwrap();
    let fb = render_frame(&s.image, &s.road, &s.rig, &s.pool, &b, "f").unwrap();
    assert_ne!(fingerprint(&fa), fingerprint(&fb));
}

#[test]
fn jitter_has_the_configured_spread() {
    // widely spaced nodes make the nearest node unambiguous
    let rig = CameraRig::centered(1000.0, 1.5, 0.05, 1024, 2048).unwrap();
    let road = render_road_mask(&rig, 1e6, 1e6).unwrap();
    let cfg = InjectionConfig {
        grid_depth_m: 10.0,
        grid_lateral_m: 10.0,
        ..Default::default()
    };
    let sigma = cfg.jitter_sigma_m;
    let z_near = depth_at(&rig, PixelCoord::new(1023.0, rig.principal_col)).unwrap();
    let margin = 4.0 * sigma;
    let interior = |x: f64, z: f64| {
        [(-margin, -margin), (-margin, margin), (margin, -margin), (margin, margin)]
            .iter()
            .all(|&(dx, dz)| {
                let p = project_road_point(&rig, GroundPoint::new(x + dx, z + dz)).unwrap();
                p.row > rig.horizon_row() + 1.0
                    && p.row < 1022.5
                    && p.col > 0.5
                    && p.col < 2046.5
            })
    };
    let (mut lateral, mut depth) = (Vec::new(), Vec::new());
    let mut frame = 0u64;
    while depth.len() < 10_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(frame);
        frame += 1;
        for a in build_grid(&rig, &road, &cfg, &mut rng).unwrap() {
            let x0 = (a.ground.lateral_m / 10.0).round() * 10.0;
            let z0 = z_near + ((a.ground.depth_m - z_near) / 10.0).round() * 10.0;
            if interior(x0, z0) {
                lateral.push(a.ground.lateral_m - x0);
                depth.push(a.ground.depth_m - z0);
            }
        }
    }
    for residuals in [lateral, depth] {
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
        assert!((sd / sigma - 1.0).abs() < 0.05, "sd {sd}");
    }
}

#[test]
fn anchor_scale_tracks_depth() {
    let s = scene();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let anchors = build_grid(&s.rig, &s.road, &InjectionConfig::default(), &mut rng).unwrap();
    assert!(!anchors.is_empty());
    for a in anchors {
        assert!((a.scale_px_per_m * a.ground.depth_m - s.rig.focal_px).abs() < 1e-9);
        let back = depth_at(&s.rig, a.pixel).unwrap();
        assert!((back - a.ground.depth_m).abs() < 1e-6 * a.ground.depth_m);
    }
}

#[test]
fn noise_is_centered_with_requested_spread() {
    let image = Grid::filled(200, 200, [128u8; 3]);
    let sigma = 4.0;
    let noisy = add_noise(&image, sigma, &mut ChaCha8Rng::seed_from_u64(0));
    let diffs: Vec<f64> = noisy
        .as_slice()
        .iter()
        .flat_map(|p| p.iter().map(|&v| v as f64 - 128.0))
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    // rounding adds 1/12 to the variance
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
    assert!((sd - (sigma * sigma + 1.0 / 12.0).sqrt()).abs() < 0.05, "sd {sd}");
    assert_eq!(add_noise(&image, 0.0, &mut ChaCha8Rng::seed_from_u64(0)), image);
}
