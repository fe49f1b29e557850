//! File formats: PNG rasters, PFM float maps, calibration sidecars, dataset
//! manifests, cut-out pools and synthesized frames.
//!
//! All manifest paths are relative to the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::cutout_pool::{overall_size, CutoutPool, ObjectCutout};
use crate::error::{Error, Result};
use crate::geometry::{estimate_pitch, CameraRig, DEFAULT_HORIZON_OFFSET_PX};
use crate::injector::SynthesizedFrame;
use crate::raster::{Grid, LabelMap, RgbImage, ScoreMap};

// ---------------------------------------------------------------- JSON

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- PNG

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn save_image(path: &Path, img: DynamicImage) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// (rows, cols) from the file header only.
pub fn image_dims(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((h as usize, w as usize))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open_image(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Grid::from_vec(h as usize, w as usize, data)
}

pub fn write_rgb(path: &Path, image: &RgbImage) -> Result<()> {
    let mut buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(image.cols() as u32, image.rows() as u32);
    for (dst, src) in buf.pixels_mut().zip(image.as_slice()) {
        *dst = Rgb(*src);
    }
    save_image(path, DynamicImage::ImageRgb8(buf))
}

/// Integer label PNG; 8- and 16-bit grayscale are read verbatim.
pub fn read_labels(path: &Path) -> Result<LabelMap> {
    let img = open_image(path)?;
    let (rows, cols) = (img.height() as usize, img.width() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as u32).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as u32).collect(),
        other => {
            return Err(Error::dataset(
                path,
                format!("label maps must be 8/16-bit grayscale, got {:?}", other.color()),
            ))
        }
    };
    Grid::from_vec(rows, cols, data)
}

/// 16-bit grayscale label PNG.
pub fn write_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    let mut buf = ImageBuffer::<Luma<u16>, Vec<u16>>::new(labels.cols() as u32, labels.rows() as u32);
    for (dst, &v) in buf.pixels_mut().zip(labels.as_slice()) {
        let v = u16::try_from(v)
            .map_err(|_| Error::dataset(path, format!("label {v} does not fit in 16 bits")))?;
        *dst = Luma([v]);
    }
    save_image(path, DynamicImage::ImageLuma16(buf))
}

/// Road mask: nonzero pixels, or pixels equal to `road_label` when given.
pub fn read_road_mask(path: &Path, road_label: Option<u32>) -> Result<LabelMap> {
    let labels = read_labels(path)?;
    Ok(match road_label {
        Some(id) => labels.map(|&v| (v == id) as u32),
        None => labels.map(|&v| (v != 0) as u32),
    })
}

fn write_mask(path: &Path, mask: &Grid<bool>) -> Result<()> {
    let mut buf = ImageBuffer::<Luma<u8>, Vec<u8>>::new(mask.cols() as u32, mask.rows() as u32);
    for (dst, &m) in buf.pixels_mut().zip(mask.as_slice()) {
        *dst = Luma([if m { 255 } else { 0 }]);
    }
    save_image(path, DynamicImage::ImageLuma8(buf))
}

/// Score map stored as 16-bit PNG; values are `pixel / 65535`.
pub fn read_score_png(path: &Path) -> Result<Grid<f32>> {
    match open_image(path)? {
        DynamicImage::ImageLuma16(b) => {
            let data = b.pixels().map(|p| p.0[0] as f32 / 65535.0).collect();
            Grid::from_vec(b.height() as usize, b.width() as usize, data)
        }
        other => Err(Error::dataset(
            path,
            format!("score PNGs must be 16-bit grayscale, got {:?}", other.color()),
        )),
    }
}

// ---------------------------------------------------------------- PFM

/// Serializes a single-channel float raster as little-endian PFM. Rows are
/// stored bottom to top.
pub fn write_pfm(raster: &Grid<f32>) -> Result<Vec<u8>> {
    if let Some(i) = raster.as_slice().iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite(i));
    }
    let header = format!("Pf\n{} {}\n-1.0\n", raster.cols(), raster.rows());
    let mut out = Vec::with_capacity(header.len() + 4 * raster.as_slice().len());
    out.extend_from_slice(header.as_bytes());
    for r in (0..raster.rows()).rev() {
        for v in raster.row(r) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a single-channel little-endian PFM.
pub fn read_pfm(bytes: &[u8]) -> Result<Grid<f32>> {
    let bad = |msg: &str| Error::Pfm(msg.to_string());
    // header: three whitespace-separated tokens after the magic, then one
    // whitespace byte before the data
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if pos >= bytes.len() {
        return Err(bad("missing data"));
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err(bad("three-channel PFM not supported")),
        other => return Err(bad(&format!("bad magic {other:?}"))),
    }
    let cols: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    if !(scale < 0.0) {
        return Err(bad("only little-endian (negative scale) PFM is supported"));
    }
    let data = &bytes[pos..];
    if data.len() != rows * cols * 4 {
        return Err(bad(&format!(
            "expected {} data bytes, found {}",
            rows * cols * 4,
            data.len()
        )));
    }
    let mut values = vec![0f32; rows * cols];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if v.is_nan() {
            return Err(Error::NonFinite(i));
        }
        let (file_row, c) = (i / cols, i % cols);
        values[(rows - 1 - file_row) * cols + c] = v;
    }
    Grid::from_vec(rows, cols, values)
}

pub fn write_pfm_file(path: &Path, raster: &Grid<f32>) -> Result<()> {
    fs::write(path, write_pfm(raster)?).map_err(|e| Error::io(path, e))
}

pub fn read_pfm_file(path: &Path) -> Result<Grid<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pfm(&bytes).map_err(|e| Error::dataset(path, e.to_string()))
}

/// Score map from a `.pfm` or 16-bit `.png` file.
pub fn read_score_file(path: &Path) -> Result<Grid<f32>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => read_pfm_file(path),
        Some("png") => read_score_png(path),
        _ => Err(Error::dataset(path, "score maps must be .pfm or .png")),
    }
}

// ---------------------------------------------------------------- calibration

/// Per-frame calibration sidecar. Missing principal point defaults to the
/// image centre; missing pitch is estimated from the road mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSidecar {
    pub focal_px: f64,
    pub cam_height_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_row: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_col: Option<f64>,
    pub image_rows: usize,
    pub image_cols: usize,
}

impl CalibrationSidecar {
    pub fn from_rig(rig: &CameraRig) -> Self {
        Self {
            focal_px: rig.focal_px,
            cam_height_m: rig.cam_height_m,
            pitch_rad: Some(rig.pitch_rad),
            principal_row: Some(rig.principal_row),
            principal_col: Some(rig.principal_col),
            image_rows: rig.image_rows,
            image_cols: rig.image_cols,
        }
    }

    fn principal_row(&self) -> f64 {
        self.principal_row.unwrap_or(self.image_rows as f64 / 2.0)
    }

    /// Camera rig with `pitch` substituted when the sidecar has none.
    pub fn to_rig(&self, pitch: Option<f64>) -> Result<CameraRig> {
        let pitch_rad = self
            .pitch_rad
            .or(pitch)
            .ok_or_else(|| Error::InvalidRig("pitch_rad missing".into()))?;
        let rig = CameraRig {
            focal_px: self.focal_px,
            cam_height_m: self.cam_height_m,
            pitch_rad,
            principal_row: self.principal_row(),
            principal_col: self.principal_col.unwrap_or(self.image_cols as f64 / 2.0),
            image_rows: self.image_rows,
            image_cols: self.image_cols,
        };
        rig.validate()?;
        Ok(rig)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CalibrationRef {
    Path(PathBuf),
    Inline(CalibrationSidecar),
}

// ---------------------------------------------------------------- manifest

/// On-disk manifest layout.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    #[serde(default)]
    pub defaults: ManifestDefaults,
    pub frames: Vec<ManifestFrame>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRef>,
    /// Label value marking road in road-mask files; any nonzero value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_label: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame_id: String,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRef>,
}

/// A validated frame with absolute paths and resolved calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame_id: String,
    pub image: PathBuf,
    pub labels: Option<PathBuf>,
    pub road_mask: Option<PathBuf>,
    pub calibration: CalibrationSidecar,
    pub road_label: Option<u32>,
}

impl FrameRecord {
    pub fn load_image(&self) -> Result<RgbImage> {
        read_rgb(&self.image)
    }

    pub fn load_labels(&self) -> Result<LabelMap> {
        let path = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::dataset(&self.image, format!("frame {} has no labels", self.frame_id)))?;
        read_labels(path)
    }

    pub fn load_road_mask(&self) -> Result<LabelMap> {
        let path = self.road_mask.as_ref().ok_or_else(|| {
            Error::dataset(&self.image, format!("frame {} has no road mask", self.frame_id))
        })?;
        read_road_mask(path, self.road_label)
    }

    /// Camera rig; a missing pitch is estimated from the road mask with the
    /// default horizon offset.
    pub fn rig(&self) -> Result<CameraRig> {
        if self.calibration.pitch_rad.is_some() {
            return self.calibration.to_rig(None);
        }
        let mask = self.load_road_mask()?;
        let pitch = estimate_pitch(
            &mask,
            self.calibration.focal_px,
            self.calibration.principal_row(),
            DEFAULT_HORIZON_OFFSET_PX,
        )?;
        self.calibration.to_rig(Some(pitch))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub frames: Vec<FrameRecord>,
}

fn resolve_calibration(base: &Path, cal: &CalibrationRef) -> Result<CalibrationSidecar> {
    match cal {
        CalibrationRef::Inline(s) => Ok(s.clone()),
        CalibrationRef::Path(p) => read_json(&base.join(p)),
    }
}

/// Loads and validates a manifest.
///
/// Checks that frame ids are unique, that every referenced file exists and
/// has the calibrated image size, and that each frame has a calibration
/// (its own sidecar, else the dataset default) with a pitch or a road mask
/// to estimate it from.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file: ManifestFile = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let default_cal = file
        .defaults
        .calibration
        .as_ref()
        .map(|c| resolve_calibration(&base, c))
        .transpose()?;

    let mut seen = BTreeSet::new();
    let mut frames = Vec::with_capacity(file.frames.len());
    for f in &file.frames {
        if !seen.insert(f.frame_id.as_str()) {
            return Err(Error::dataset(path, format!("duplicate frame_id {:?}", f.frame_id)));
        }
        let calibration = match &f.calibration {
            Some(c) => resolve_calibration(&base, c)?,
            None => default_cal.clone().ok_or_else(|| {
                Error::dataset(path, format!("frame {:?} has no calibration", f.frame_id))
            })?,
        };
        let record = FrameRecord {
            frame_id: f.frame_id.clone(),
            image: base.join(&f.image),
            labels: f.labels.as_ref().map(|p| base.join(p)),
            road_mask: f.road_mask.as_ref().map(|p| base.join(p)),
            calibration,
            road_label: file.defaults.road_label,
        };
        if record.calibration.pitch_rad.is_none() && record.road_mask.is_none() {
            return Err(Error::dataset(
                path,
                format!("frame {:?}: pitch_rad missing and no road mask to estimate it", f.frame_id),
            ));
        }
        let expected = (record.calibration.image_rows, record.calibration.image_cols);
        let files = [Some(&record.image), record.labels.as_ref(), record.road_mask.as_ref()];
        for file in files.into_iter().flatten() {
            if !file.is_file() {
                return Err(Error::dataset(file, "referenced file does not exist"));
            }
            let dims = image_dims(file)?;
            if dims != expected {
                return Err(Error::dataset(
                    file,
                    format!(
                        "image is {}x{}, calibration says {}x{}",
                        dims.0, dims.1, expected.0, expected.1
                    ),
                ));
            }
        }
        frames.push(record);
    }
    Ok(DatasetManifest { root: base, frames })
}

/// Builds a manifest for a Cityscapes-style tree:
/// `leftImg8bit/<split>/<city>/<stem>_leftImg8bit.png`, with
/// `gtFine/.../<stem>_gtFine_instanceIds.png` as labels,
/// `gtFine/.../<stem>_gtFine_labelIds.png` as road mask (road id 7) and
/// `camera/.../<stem>_camera.json` as calibration. Paths in the returned
/// manifest are relative to `root`.
pub fn cityscapes_manifest(root: &Path, split: &str) -> Result<ManifestFile> {
    #[derive(Deserialize)]
    struct Intrinsic {
        fx: f64,
        u0: f64,
        v0: f64,
    }
    #[derive(Deserialize)]
    struct Extrinsic {
        pitch: f64,
        z: f64,
    }
    #[derive(Deserialize)]
    struct Camera {
        intrinsic: Intrinsic,
        extrinsic: Extrinsic,
    }

    let img_dir = root.join("leftImg8bit").join(split);
    let list = |dir: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        v.sort();
        Ok(v)
    };
    let mut frames = Vec::new();
    for city in list(&img_dir)?.into_iter().filter(|p| p.is_dir()) {
        let city_name = city.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for img in list(&city)? {
            let name = img.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix("_leftImg8bit.png") else {
                continue;
            };
            let rel = |kind: &str, file: String| PathBuf::from(kind).join(split).join(&city_name).join(file);
            let labels = rel("gtFine", format!("{stem}_gtFine_instanceIds.png"));
            let road = rel("gtFine", format!("{stem}_gtFine_labelIds.png"));
            let cam_path = root.join(rel("camera", format!("{stem}_camera.json")));
            let cam: Camera = read_json(&cam_path)?;
            let (rows, cols) = image_dims(&img)?;
            frames.push(ManifestFrame {
                frame_id: stem.to_string(),
                image: rel("leftImg8bit", name.clone()),
                labels: root.join(&labels).is_file().then_some(labels),
                road_mask: root.join(&road).is_file().then_some(road),
                calibration: Some(CalibrationRef::Inline(CalibrationSidecar {
                    focal_px: cam.intrinsic.fx,
                    cam_height_m: cam.extrinsic.z,
                    pitch_rad: Some(cam.extrinsic.pitch),
                    principal_row: Some(cam.intrinsic.v0),
                    principal_col: Some(cam.intrinsic.u0),
                    image_rows: rows,
                    image_cols: cols,
                })),
            });
        }
    }
    Ok(ManifestFile {
        defaults: ManifestDefaults {
            calibration: None,
            road_label: Some(7),
        },
        frames,
    })
}

// ---------------------------------------------------------------- cut-out pools

pub const POOL_MANIFEST: &str = "pool.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub source_id: String,
    pub class_label: String,
    pub bbox_w: usize,
    pub bbox_h: usize,
    pub area_px: usize,
    pub overall_size_px: f64,
    pub pixels: PathBuf,
    pub mask: PathBuf,
}

/// Writes `pool.json` plus one RGB and one mask PNG per cut-out.
pub fn save_pool(dir: &Path, pool: &CutoutPool) -> Result<()> {
    let cut_dir = dir.join("cutouts");
    fs::create_dir_all(&cut_dir).map_err(|e| Error::io(&cut_dir, e))?;
    let mut entries = Vec::with_capacity(pool.len());
    for (i, c) in pool.cutouts().iter().enumerate() {
        let pixels = PathBuf::from("cutouts").join(format!("{i:06}_pixels.png"));
        let mask = PathBuf::from("cutouts").join(format!("{i:06}_mask.png"));
        write_rgb(&dir.join(&pixels), &c.pixels)?;
        write_mask(&dir.join(&mask), &c.mask)?;
        entries.push(PoolEntry {
            source_id: c.source_id.clone(),
            class_label: c.class_label.clone(),
            bbox_w: c.bbox_w,
            bbox_h: c.bbox_h,
            area_px: c.area_px,
            overall_size_px: c.overall_size_px,
            pixels,
            mask,
        });
    }
    write_json(&dir.join(POOL_MANIFEST), &entries)
}

/// Reads a pool written by [`save_pool`], checking the stored statistics
/// against the loaded masks.
pub fn load_pool(dir: &Path) -> Result<CutoutPool> {
    let manifest = dir.join(POOL_MANIFEST);
    let entries: Vec<PoolEntry> = read_json(&manifest)?;
    let mut cutouts = Vec::with_capacity(entries.len());
    for e in entries {
        let pixels = read_rgb(&dir.join(&e.pixels))?;
        let mask = read_labels(&dir.join(&e.mask))?.map(|&v| v != 0);
        let cut = ObjectCutout::new(pixels, mask, e.source_id.clone(), e.class_label)?;
        let expected = overall_size(e.area_px, e.bbox_w, e.bbox_h);
        if (cut.bbox_w, cut.bbox_h, cut.area_px) != (e.bbox_w, e.bbox_h, e.area_px)
            || cut.overall_size_px != e.overall_size_px
            || expected != e.overall_size_px
        {
            return Err(Error::dataset(
                &manifest,
                format!("statistics of {} do not match its mask", e.source_id),
            ));
        }
        cutouts.push(cut);
    }
    Ok(CutoutPool::new(cutouts))
}

// ---------------------------------------------------------------- synthesized frames

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameRecordsFile {
    pub frame_id: String,
    pub records: Vec<crate::injector::InjectionRecord>,
    pub skips: Vec<crate::injector::SkipRecord>,
}

pub fn image_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}_image.png"))
}

pub fn labels_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}_labels.png"))
}

pub fn records_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}_records.json"))
}

/// Writes `<id>_image.png`, `<id>_labels.png` and `<id>_records.json`.
pub fn write_synthesized(dir: &Path, frame_id: &str, frame: &SynthesizedFrame) -> Result<()> {
    write_rgb(&image_path(dir, frame_id), &frame.image)?;
    write_labels(&labels_path(dir, frame_id), &frame.labels)?;
    write_json(
        &records_path(dir, frame_id),
        &FrameRecordsFile {
            frame_id: frame_id.to_string(),
            records: frame.records.clone(),
            skips: frame.skips.clone(),
        },
    )
}

/// Score map with an optional eval mask (nonzero = evaluated).
pub fn load_score_map(scores: &Path, eval_mask: Option<&Path>) -> Result<ScoreMap> {
    let values = read_score_file(scores)?;
    let map = match eval_mask {
        Some(p) => ScoreMap::with_mask(values, read_labels(p)?.to_binary()),
        None => ScoreMap::new(values),
    };
    map.map_err(|e| Error::dataset(scores, e.to_string()))
}
