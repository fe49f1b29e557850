//! Seeded procedural scenes for demos and tests: road frames rendered from a
//! camera rig, instance-labeled object frames, and ready-made cut-out pools.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cutout_pool::{CutoutPool, ObjectCutout};
use crate::error::Result;
use crate::geometry::{render_road_mask, CameraRig};
use crate::raster::{Grid, LabelMap, RgbImage};

/// Road frame: textured asphalt inside a straight road of half-width
/// `half_width_m` up to `max_depth_m`, grass beside it, sky above the
/// horizon. Returns the image and its road mask.
pub fn road_scene(
    rig: &CameraRig,
    max_depth_m: f64,
    half_width_m: f64,
    seed: u64,
) -> Result<(RgbImage, LabelMap)> {
    let mask = render_road_mask(rig, max_depth_m, half_width_m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rig.horizon_row();
    let image = Grid::from_fn(rig.image_rows, rig.image_cols, |r, _c| {
        let jitter = rng.random_range(0..12u8);
        if (r as f64) <= horizon {
            let t = (r as f64 / horizon.max(1.0)).clamp(0.0, 1.0);
            [(120.0 + 60.0 * t) as u8, (160.0 + 50.0 * t) as u8, 230]
        } else {
            [60 + jitter, 110 + jitter, 50 + jitter / 2]
        }
    });
    let mut image = image;
    for r in 0..rig.image_rows {
        for c in 0..rig.image_cols {
            if *mask.get(r, c) != 0 {
                let g = 95 + rng.random_range(0..20u8);
                image.set(r, c, [g, g, g + 3]);
            }
        }
    }
    Ok((image, mask))
}

fn ellipse_mask(h: usize, w: usize) -> Grid<bool> {
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (ry, rx) = (h as f64 / 2.0, w as f64 / 2.0);
    Grid::from_fn(h, w, |r, c| {
        let dy = (r as f64 - cy) / ry;
        let dx = (c as f64 - cx) / rx;
        dy * dy + dx * dx <= 1.0
    })
}

fn shaded_patch<R: Rng + ?Sized>(h: usize, w: usize, rng: &mut R) -> RgbImage {
    let base = [
        rng.random_range(30..220u8),
        rng.random_range(30..220u8),
        rng.random_range(30..220u8),
    ];
    Grid::from_fn(h, w, |r, _| {
        let shade = (r * 40 / h.max(1)) as u8;
        [
            base[0].saturating_sub(shade),
            base[1].saturating_sub(shade),
            base[2].saturating_sub(shade),
        ]
    })
}

/// Random object patch: an ellipse or a full rectangle whose overall size is
/// close to `target_px`.
pub fn random_object<R: Rng + ?Sized>(target_px: f64, rng: &mut R) -> (RgbImage, Grid<bool>) {
    let aspect: f64 = rng.random_range(0.4..2.5);
    let side = target_px.max(1.0);
    let h = ((side * aspect.sqrt()).round() as usize).max(1);
    let w = ((side / aspect.sqrt()).round() as usize).max(1);
    let mask = if rng.random_bool(0.5) && h >= 3 && w >= 3 {
        ellipse_mask(h, w)
    } else {
        Grid::filled(h, w, true)
    };
    (shaded_patch(h, w, rng), mask)
}

/// Pool of `n` cut-outs with overall sizes spread log-uniformly over
/// `[min_px, max_px]`.
pub fn synthetic_pool(n: usize, min_px: f64, max_px: f64, seed: u64) -> Result<CutoutPool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (min_px.max(1.0).ln(), max_px.max(min_px).max(1.0).ln());
    let mut cutouts = Vec::with_capacity(n);
    for i in 0..n {
        let target = if hi > lo { rng.random_range(lo..hi) } else { lo }.exp();
        let (pixels, mask) = random_object(target, &mut rng);
        let class = if rng.random_bool(0.5) { "car" } else { "person" };
        cutouts.push(ObjectCutout::new(pixels, mask, format!("synthetic:{i}"), class)?);
    }
    Ok(CutoutPool::new(cutouts))
}

/// Frame with up to `n_objects` non-overlapping objects labeled with
/// Cityscapes-style instance ids (`26000 + k` for cars, `24000 + k` for
/// persons), none touching the border.
pub fn object_frame(
    rows: usize,
    cols: usize,
    n_objects: usize,
    min_px: f64,
    max_px: f64,
    seed: u64,
) -> (RgbImage, LabelMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = Grid::from_fn(rows, cols, |r, c| [(r % 50) as u8 + 80, (c % 50) as u8 + 80, 90]);
    let mut labels = Grid::filled(rows, cols, 0u32);
    let (lo, hi) = (min_px.max(1.0).ln(), max_px.max(min_px).max(1.0).ln());
    let mut placed = 0;
    for _ in 0..n_objects * 20 {
        if placed == n_objects {
            break;
        }
        let target = if hi > lo { rng.random_range(lo..hi) } else { lo }.exp();
        let (pixels, mask) = random_object(target, &mut rng);
        let (h, w) = mask.dims();
        if h + 2 >= rows || w + 2 >= cols {
            continue;
        }
        let top = rng.random_range(1..rows - h - 1);
        let left = rng.random_range(1..cols - w - 1);
        let free = (0..h).all(|r| (0..w).all(|c| *labels.get(top + r, left + c) == 0));
        if !free {
            continue;
        }
        placed += 1;
        let class = if rng.random_bool(0.5) { 26 } else { 24 };
        let id = class * 1000 + placed as u32;
        for r in 0..h {
            for c in 0..w {
                if *mask.get(r, c) {
                    labels.set(top + r, left + c, id);
                    image.set(top + r, left + c, *pixels.get(r, c));
                }
            }
        }
    }
    (image, labels)
}
