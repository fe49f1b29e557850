//! Perspective-aware obstacle injection.
//!
//! Anchors come from a jittered metric grid on the road plane. Each anchor
//! turns the expected object size in meters into a pixel range through the
//! local scale, and a cut-out whose overall size falls inside that range is
//! pasted unscaled with its bottom-center on the anchor. The uniform
//! baseline ignores perspective: it draws road pixels uniformly and objects
//! from the whole pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cutout_pool::{CutoutPool, ObjectCutout};
use crate::error::{Error, Result};
use crate::geometry::{back_project, project_road_point, CameraRig, GroundPoint, PixelCoord};
use crate::raster::{Grid, LabelMap, RgbImage};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionMode {
    #[default]
    Perspective,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionConfig {
    /// Grid spacing along the road, meters.
    pub grid_depth_m: f64,
    /// Grid spacing across the road, meters.
    pub grid_lateral_m: f64,
    /// Standard deviation of the per-axis anchor jitter, meters.
    pub jitter_sigma_m: f64,
    pub obj_min_m: f64,
    pub obj_max_m: f64,
    /// Probability that an anchor receives an object.
    pub fill_probability: f64,
    pub mode: InjectionMode,
    pub master_seed: u64,
    /// Width of the linear alpha ramp at the cut-out boundary; 0 pastes hard.
    pub feather_px: u32,
    /// Standard deviation of additive Gaussian noise in 8-bit units; 0 disables.
    pub noise: f64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            grid_depth_m: 3.5,
            grid_lateral_m: 1.0,
            jitter_sigma_m: 0.5,
            obj_min_m: 0.25,
            obj_max_m: 0.55,
            fill_probability: 0.5,
            mode: InjectionMode::Perspective,
            master_seed: 0,
            feather_px: 1,
            noise: 0.0,
        }
    }
}

impl InjectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.grid_depth_m > 0.0 && self.grid_depth_m.is_finite())
            || !(self.grid_lateral_m > 0.0 && self.grid_lateral_m.is_finite())
        {
            return bad(format!(
                "grid spacings must be positive, got {} x {}",
                self.grid_depth_m, self.grid_lateral_m
            ));
        }
        if !(self.jitter_sigma_m >= 0.0 && self.jitter_sigma_m.is_finite()) {
            return bad(format!("jitter_sigma_m = {}", self.jitter_sigma_m));
        }
        if !(self.obj_min_m > 0.0 && self.obj_min_m <= self.obj_max_m && self.obj_max_m.is_finite())
        {
            return bad(format!(
                "object size range [{}, {}]",
                self.obj_min_m, self.obj_max_m
            ));
        }
        if !(0.0..=1.0).contains(&self.fill_probability) {
            return bad(format!("fill_probability = {}", self.fill_probability));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise = {}", self.noise));
        }
        Ok(())
    }
}

/// Seed of a frame's private random stream: the first 8 bytes of
/// SHA-256(master_seed as little-endian bytes ‖ frame_id).
pub fn frame_seed(master_seed: u64, frame_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(frame_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Random stream used for placement in `frame_id`.
pub fn frame_rng(master_seed: u64, frame_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(frame_seed(master_seed, frame_id))
}

/// Random stream used for the noise stage of `frame_id`, independent of the
/// placement stream.
pub fn noise_rng(master_seed: u64, frame_id: &str) -> ChaCha8Rng {
    let mut rng = frame_rng(master_seed, frame_id);
    rng.set_stream(1);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub ground: GroundPoint,
    pub pixel: PixelCoord,
    pub scale_px_per_m: f64,
}

impl AnchorPoint {
    /// Integer pixel the object's bottom-center is pasted on.
    pub fn contact_pixel(&self) -> (i64, i64) {
        (self.pixel.row.round() as i64, self.pixel.col.round() as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    /// Instance id of the object in the label map.
    pub id: u32,
    pub anchor: AnchorPoint,
    pub source_id: String,
    pub class_label: String,
    pub pixel_size_range: (f64, f64),
    pub placed_size_px: f64,
    /// Top-left row, top-left column, height, width. May extend past the
    /// image edge; only the inside part is pasted.
    pub placed_bbox: (i64, i64, usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// No cut-out in the pool has a size inside the pixel range.
    NoCandidate,
    /// Pasting would hide every visible pixel of an earlier object.
    WouldOcclude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub anchor: AnchorPoint,
    pub pixel_size_range: (f64, f64),
    pub reason: SkipReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

/// Result of synthesizing one frame.
#[derive(Clone, Debug)]
pub struct SynthesizedFrame {
    pub image: RgbImage,
    /// 0 for background, record `id` for each placed object.
    pub labels: LabelMap,
    pub records: Vec<InjectionRecord>,
    pub skips: Vec<SkipRecord>,
}

fn row_extents(road_mask: &LabelMap) -> Vec<Option<(usize, usize)>> {
    (0..road_mask.rows())
        .map(|r| {
            let row = road_mask.row(r);
            let first = row.iter().position(|&v| v != 0)?;
            let last = row.iter().rposition(|&v| v != 0)?;
            Some((first, last))
        })
        .collect()
}

/// Jittered road-plane grid projected into the image.
///
/// Grid depths start at the depth of the nearest road row and step by
/// `grid_depth_m` until objects of `obj_max_m` shrink below 2 px or the
/// grid passes the farthest road row by more than three jitter deviations.
/// At each depth, lateral nodes cover the road's extent on the
/// corresponding image row. Every node is displaced by independent
/// `N(0, jitter_sigma_m)` offsets along both ground axes; anchors landing
/// outside the image, at or above the horizon, or off the road are dropped.
pub fn build_grid<R: Rng + ?Sized>(
    rig: &CameraRig,
    road_mask: &LabelMap,
    cfg: &InjectionConfig,
    rng: &mut R,
) -> Result<Vec<AnchorPoint>> {
    rig.validate()?;
    cfg.validate()?;
    let expected = Grid::filled(rig.image_rows, rig.image_cols, ());
    expected.ensure_same_dims(road_mask, "road mask")?;

    let horizon = rig.horizon_row();
    let extents = row_extents(road_mask);
    let visible = |r: usize| r as f64 > horizon && extents[r].is_some();
    let Some(near_row) = (0..road_mask.rows()).rev().find(|&r| visible(r)) else {
        return Ok(Vec::new());
    };
    let far_row = (0..road_mask.rows()).find(|&r| visible(r)).unwrap_or(near_row);

    let depth_of_row = |r: usize| back_project(rig, PixelCoord::new(r as f64, rig.principal_col));
    let z_near = depth_of_row(near_row)?.depth_m;
    let z_far = depth_of_row(far_row)?.depth_m;
    let z_tiny = cfg.obj_max_m * rig.focal_px / 2.0;
    let z_end = z_tiny.min(z_far + 3.0 * cfg.jitter_sigma_m);

    let jitter = if cfg.jitter_sigma_m > 0.0 {
        Some(Normal::new(0.0, cfg.jitter_sigma_m).expect("sigma validated"))
    } else {
        None
    };

    let mut anchors = Vec::new();
    let mut k = 0u64;
    loop {
        let depth = z_near + k as f64 * cfg.grid_depth_m;
        if depth > z_end {
            break;
        }
        k += 1;
        let row = project_road_point(rig, GroundPoint::new(0.0, depth))?.row.round();
        let row = (row.max(far_row as f64) as usize).min(near_row);
        let Some((c0, c1)) = extents[row] else {
            continue;
        };
        let lateral = |c: usize| (c as f64 - rig.principal_col) * depth / rig.focal_px;
        let m0 = (lateral(c0) / cfg.grid_lateral_m).floor() as i64;
        let m1 = (lateral(c1) / cfg.grid_lateral_m).ceil() as i64;
        for m in m0..=m1 {
            let (dx, dz) = match &jitter {
                Some(n) => (n.sample(rng), n.sample(rng)),
                None => (0.0, 0.0),
            };
            let ground = GroundPoint::new(m as f64 * cfg.grid_lateral_m + dx, depth + dz);
            if ground.depth_m <= 0.0 {
                continue;
            }
            let pixel = project_road_point(rig, ground)?;
            let anchor = AnchorPoint {
                ground,
                pixel,
                scale_px_per_m: rig.focal_px / ground.depth_m,
            };
            let (r, c) = anchor.contact_pixel();
            if !road_mask.contains(r, c) || (r as f64) <= horizon || pixel.row <= horizon {
                continue;
            }
            if *road_mask.get(r as usize, c as usize) == 0 {
                continue;
            }
            anchors.push(anchor);
        }
    }
    Ok(anchors)
}

/// Pixel size range of objects at `anchor`: the metric range times the
/// local scale.
pub fn pixel_size_range(anchor: &AnchorPoint, cfg: &InjectionConfig) -> Result<(f64, f64)> {
    let s = anchor.scale_px_per_m;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::NonPositiveScale(s));
    }
    Ok((cfg.obj_min_m * s, cfg.obj_max_m * s))
}

/// Alpha of each cut-out pixel: `min(1, d / (feather + 1))` where `d` is the
/// chessboard distance to the nearest pixel outside the mask (the patch
/// border counts as outside). Zero outside the mask.
pub fn feathered_alpha(mask: &Grid<bool>, feather_px: u32) -> Grid<f32> {
    let (rows, cols) = mask.dims();
    if feather_px == 0 {
        return mask.map(|&m| if m { 1.0 } else { 0.0 });
    }
    let levels = feather_px + 1;
    let mut dist = Grid::filled(rows, cols, 0u32);
    let off = |r: i64, c: i64| !mask.contains(r, c) || !*mask.get(r as usize, c as usize);
    for r in 0..rows {
        for c in 0..cols {
            if !*mask.get(r, c) {
                continue;
            }
            let (ri, ci) = (r as i64, c as i64);
            let edge = (-1..=1).any(|dr| (-1..=1).any(|dc| off(ri + dr, ci + dc)));
            if edge {
                dist.set(r, c, 1);
            }
        }
    }
    for level in 2..=levels {
        let prev = dist.clone();
        for r in 0..rows {
            for c in 0..cols {
                if !*mask.get(r, c) || *prev.get(r, c) != 0 {
                    continue;
                }
                let (ri, ci) = (r as i64, c as i64);
                let near = (-1..=1).any(|dr| {
                    (-1..=1).any(|dc| {
                        prev.contains(ri + dr, ci + dc)
                            && *prev.get((ri + dr) as usize, (ci + dc) as usize) == level - 1
                    })
                });
                if near {
                    dist.set(r, c, level);
                }
            }
        }
    }
    Grid::from_fn(rows, cols, |r, c| {
        if !*mask.get(r, c) {
            0.0
        } else {
            let d = match *dist.get(r, c) {
                0 => levels,
                d => d,
            };
            (d as f32 / levels as f32).min(1.0)
        }
    })
}

fn blend(src: [u8; 3], dst: [u8; 3], alpha: f32) -> [u8; 3] {
    if alpha >= 1.0 {
        return src;
    }
    let mix = |s: u8, d: u8| (alpha * s as f32 + (1.0 - alpha) * d as f32).round() as u8;
    [mix(src[0], dst[0]), mix(src[1], dst[1]), mix(src[2], dst[2])]
}

/// Mutable canvas of one frame under synthesis.
struct Canvas {
    image: RgbImage,
    labels: LabelMap,
    visible: Vec<usize>,
}

impl Canvas {
    fn new(image: &RgbImage) -> Self {
        Self {
            image: image.clone(),
            labels: Grid::filled(image.rows(), image.cols(), 0),
            visible: vec![0],
        }
    }

    /// Pastes `cutout` with its bottom-center at `(row, col)`. Returns the
    /// bbox, or `None` if the paste would completely hide an earlier object.
    fn paste(
        &mut self,
        cutout: &ObjectCutout,
        row: i64,
        col: i64,
        feather_px: u32,
    ) -> Option<(i64, i64, usize, usize)> {
        let (h, w) = cutout.mask.dims();
        let top = row - h as i64 + 1;
        let left = col - (w / 2) as i64;
        let (rows, cols) = self.labels.dims();
        let inside = move |r: usize, c: usize| {
            let (ir, ic) = (top + r as i64, left + c as i64);
            (ir >= 0 && ic >= 0 && (ir as usize) < rows && (ic as usize) < cols)
                .then_some((ir as usize, ic as usize))
        };

        let mut covered = vec![0usize; self.visible.len()];
        for r in 0..h {
            for c in 0..w {
                if !*cutout.mask.get(r, c) {
                    continue;
                }
                if let Some((ir, ic)) = inside(r, c) {
                    covered[*self.labels.get(ir, ic) as usize] += 1;
                }
            }
        }
        let hides = (1..self.visible.len()).any(|id| covered[id] > 0 && covered[id] == self.visible[id]);
        if hides {
            return None;
        }

        let id = self.visible.len() as u32;
        let alpha = feathered_alpha(&cutout.mask, feather_px);
        let mut count = 0;
        for r in 0..h {
            for c in 0..w {
                if !*cutout.mask.get(r, c) {
                    continue;
                }
                let Some((ir, ic)) = inside(r, c) else {
                    continue;
                };
                let old = *self.labels.get(ir, ic) as usize;
                if old != 0 {
                    self.visible[old] -= 1;
                }
                self.labels.set(ir, ic, id);
                count += 1;
                let dst = *self.image.get(ir, ic);
                self.image
                    .set(ir, ic, blend(*cutout.pixels.get(r, c), dst, *alpha.get(r, c)));
            }
        }
        self.visible.push(count);
        Some((top, left, h, w))
    }

    fn next_id(&self) -> u32 {
        self.visible.len() as u32
    }
}

fn check_inputs(image: &RgbImage, road_mask: &LabelMap, rig: &CameraRig) -> Result<()> {
    rig.validate()?;
    let expected = Grid::filled(rig.image_rows, rig.image_cols, ());
    expected.ensure_same_dims(image, "image")?;
    expected.ensure_same_dims(road_mask, "road mask")
}

struct Site<'a> {
    anchor: AnchorPoint,
    range: (f64, f64),
    cutout: Option<&'a ObjectCutout>,
}

fn place_sites(
    image: &RgbImage,
    mut sites: Vec<Site<'_>>,
    feather_px: u32,
) -> SynthesizedFrame {
    // far to near so that nearer objects end up on top
    sites.sort_by(|a, b| b.anchor.ground.depth_m.total_cmp(&a.anchor.ground.depth_m));
    let mut canvas = Canvas::new(image);
    let mut records = Vec::new();
    let mut skips = Vec::new();
    for site in sites {
        let Some(cutout) = site.cutout else {
            skips.push(SkipRecord {
                anchor: site.anchor,
                pixel_size_range: site.range,
                reason: SkipReason::NoCandidate,
                source_id: None,
            });
            continue;
        };
        let id = canvas.next_id();
        let (row, col) = site.anchor.contact_pixel();
        match canvas.paste(cutout, row, col, feather_px) {
            Some(placed_bbox) => records.push(InjectionRecord {
                id,
                anchor: site.anchor,
                source_id: cutout.source_id.clone(),
                class_label: cutout.class_label.clone(),
                pixel_size_range: site.range,
                placed_size_px: cutout.overall_size_px,
                placed_bbox,
            }),
            None => skips.push(SkipRecord {
                anchor: site.anchor,
                pixel_size_range: site.range,
                reason: SkipReason::WouldOcclude,
                source_id: Some(cutout.source_id.clone()),
            }),
        }
    }
    SynthesizedFrame {
        image: canvas.image,
        labels: canvas.labels,
        records,
        skips,
    }
}

/// Perspective-aware synthesis of one frame.
///
/// A Bernoulli(`fill_probability`) subset of the grid anchors each receives
/// a cut-out drawn uniformly among those whose overall size lies in the
/// anchor's pixel size range. Cut-outs are never rescaled. Anchors without
/// a candidate are skipped and logged.
pub fn synthesize_frame(
    image: &RgbImage,
    road_mask: &LabelMap,
    rig: &CameraRig,
    pool: &CutoutPool,
    cfg: &InjectionConfig,
    frame_id: &str,
) -> Result<SynthesizedFrame> {
    check_inputs(image, road_mask, rig)?;
    let mut rng = frame_rng(cfg.master_seed, frame_id);
    let anchors = build_grid(rig, road_mask, cfg, &mut rng)?;
    let mut sites = Vec::new();
    for anchor in anchors {
        if !rng.random_bool(cfg.fill_probability) {
            continue;
        }
        let range = pixel_size_range(&anchor, cfg)?;
        let cutout = pool.query_by_size(range.0, range.1, &mut rng)?;
        sites.push(Site {
            anchor,
            range,
            cutout,
        });
    }
    Ok(place_sites(image, sites, cfg.feather_px))
}

/// Uniform baseline: as many candidate sites as the perspective grid would
/// produce, each at a uniformly drawn road pixel below the horizon, filled
/// with probability `fill_probability` by a cut-out drawn uniformly from the
/// whole pool. Records still carry the perspective pixel range of the site
/// for comparison.
pub fn synthesize_frame_uniform(
    image: &RgbImage,
    road_mask: &LabelMap,
    rig: &CameraRig,
    pool: &CutoutPool,
    cfg: &InjectionConfig,
    frame_id: &str,
) -> Result<SynthesizedFrame> {
    check_inputs(image, road_mask, rig)?;
    let mut rng = frame_rng(cfg.master_seed, frame_id);
    let n_sites = build_grid(rig, road_mask, cfg, &mut rng)?.len();
    let horizon = rig.horizon_row();
    let road: Vec<(usize, usize)> = (0..road_mask.rows())
        .filter(|&r| r as f64 > horizon)
        .flat_map(|r| {
            road_mask
                .row(r)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(move |(c, _)| (r, c))
        })
        .collect();
    let mut sites = Vec::new();
    if !road.is_empty() {
        for _ in 0..n_sites {
            let (r, c) = road[rng.random_range(0..road.len())];
            if !rng.random_bool(cfg.fill_probability) {
                continue;
            }
            let pixel = PixelCoord::new(r as f64, c as f64);
            let ground = back_project(rig, pixel)?;
            let anchor = AnchorPoint {
                ground,
                pixel,
                scale_px_per_m: rig.focal_px / ground.depth_m,
            };
            let range = pixel_size_range(&anchor, cfg)?;
            sites.push(Site {
                anchor,
                range,
                cutout: pool.sample_any(&mut rng),
            });
        }
    }
    Ok(place_sites(image, sites, cfg.feather_px))
}

/// Zero-mean Gaussian noise with standard deviation `magnitude` added to
/// every channel, rounded and clamped to `[0, 255]`.
pub fn add_noise<R: Rng + ?Sized>(image: &RgbImage, magnitude: f64, rng: &mut R) -> RgbImage {
    if !(magnitude > 0.0) {
        return image.clone();
    }
    let normal = Normal::new(0.0, magnitude).expect("finite positive sigma");
    image.map(|px| {
        let mut out = [0u8; 3];
        for (o, &v) in out.iter_mut().zip(px) {
            *o = (v as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
        out
    })
}

/// Full per-frame pipeline: synthesis in the configured mode, then noise.
pub fn render_frame(
    image: &RgbImage,
    road_mask: &LabelMap,
    rig: &CameraRig,
    pool: &CutoutPool,
    cfg: &InjectionConfig,
    frame_id: &str,
) -> Result<SynthesizedFrame> {
    cfg.validate()?;
    let mut frame = match cfg.mode {
        InjectionMode::Perspective => synthesize_frame(image, road_mask, rig, pool, cfg, frame_id)?,
        InjectionMode::Uniform => {
            synthesize_frame_uniform(image, road_mask, rig, pool, cfg, frame_id)?
        }
    };
    if cfg.noise > 0.0 {
        frame.image = add_noise(&frame.image, cfg.noise, &mut noise_rng(cfg.master_seed, frame_id));
    }
    Ok(frame)
}

/// Pearson correlation coefficient; `None` for fewer than two points or a
/// constant series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
