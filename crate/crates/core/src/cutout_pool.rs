//! Object cut-outs harvested from instance-labeled frames, indexed by size.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::components;
use crate::raster::{Grid, LabelMap, RgbImage};

/// Mapping from label values to class names.
///
/// Label values at or above `instance_divisor` encode
/// `class_id * instance_divisor + k` and are individual instances (the
/// Cityscapes convention). Values below it are bare class ids; those regions
/// become instances only for classes in `component_classes`, split into
/// 8-connected components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    #[serde(default = "default_divisor")]
    pub instance_divisor: u32,
    pub classes: BTreeMap<u32, String>,
    #[serde(default)]
    pub component_classes: BTreeSet<String>,
}

fn default_divisor() -> u32 {
    1000
}

impl ClassTable {
    /// Cityscapes ids for the object classes usable as obstacles.
    pub fn cityscapes() -> Self {
        let classes = [
            (19, "traffic light"),
            (20, "traffic sign"),
            (24, "person"),
            (25, "rider"),
            (26, "car"),
            (27, "truck"),
            (28, "bus"),
            (31, "train"),
            (32, "motorcycle"),
            (33, "bicycle"),
        ]
        .into_iter()
        .map(|(id, name)| (id, name.to_string()))
        .collect();
        Self {
            instance_divisor: 1000,
            classes,
            component_classes: ["traffic light", "traffic sign"]
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }

    pub fn class_of(&self, label: u32) -> Option<&str> {
        let id = if label >= self.instance_divisor {
            label / self.instance_divisor
        } else {
            label
        };
        self.classes.get(&id).map(String::as_str)
    }
}

/// Pixels and binary mask of one object instance, cropped to its tight bbox.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectCutout {
    pub pixels: RgbImage,
    pub mask: Grid<bool>,
    pub bbox_w: usize,
    pub bbox_h: usize,
    pub area_px: usize,
    pub overall_size_px: f64,
    pub source_id: String,
    pub class_label: String,
}

/// Mean of `sqrt(area)`, bbox width and bbox height.
pub fn overall_size(area_px: usize, bbox_w: usize, bbox_h: usize) -> f64 {
    ((area_px as f64).sqrt() + bbox_w as f64 + bbox_h as f64) / 3.0
}

impl ObjectCutout {
    /// Builds a cut-out from a patch and mask, deriving the size statistics.
    pub fn new(
        pixels: RgbImage,
        mask: Grid<bool>,
        source_id: impl Into<String>,
        class_label: impl Into<String>,
    ) -> Result<Self> {
        pixels.ensure_same_dims(&mask, "cut-out mask")?;
        let area_px = mask.count();
        let (bbox_h, bbox_w) = pixels.dims();
        Ok(Self {
            pixels,
            mask,
            bbox_w,
            bbox_h,
            area_px,
            overall_size_px: overall_size(area_px, bbox_w, bbox_h),
            source_id: source_id.into(),
            class_label: class_label.into(),
        })
    }
}

struct Support {
    class_label: String,
    source_id: String,
    pixels: Vec<(usize, usize)>,
}

/// Cuts one patch per eligible instance out of `image`.
///
/// Instances whose bounding box touches the frame border are skipped, as are
/// labels whose class is missing from `classes`. The mask is the full label
/// support, so occluded instances split into several pieces stay whole.
pub fn extract_cutouts(
    image: &RgbImage,
    labels: &LabelMap,
    classes: &ClassTable,
    eligible: &BTreeSet<String>,
    frame_id: &str,
) -> Result<Vec<ObjectCutout>> {
    image.ensure_same_dims(labels, "instance labels")?;
    let mut instances: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    let mut bare: BTreeMap<u32, Grid<bool>> = BTreeMap::new();
    for r in 0..labels.rows() {
        for c in 0..labels.cols() {
            let v = *labels.get(r, c);
            if v == 0 {
                continue;
            }
            let Some(class) = classes.class_of(v) else {
                continue;
            };
            if !eligible.contains(class) {
                continue;
            }
            if v >= classes.instance_divisor {
                instances.entry(v).or_default().push((r, c));
            } else if classes.component_classes.contains(class) {
                bare.entry(v)
                    .or_insert_with(|| Grid::filled(labels.rows(), labels.cols(), false))
                    .set(r, c, true);
            }
        }
    }

    let mut supports: Vec<Support> = instances
        .into_iter()
        .map(|(v, pixels)| Support {
            class_label: classes.class_of(v).unwrap_or_default().to_string(),
            source_id: format!("{frame_id}:{v}"),
            pixels,
        })
        .collect();
    for (v, region) in bare {
        let cc = components(&region);
        let mut parts: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for r in 0..cc.rows() {
            for c in 0..cc.cols() {
                let k = *cc.get(r, c);
                if k != 0 {
                    parts.entry(k).or_default().push((r, c));
                }
            }
        }
        for (k, pixels) in parts {
            supports.push(Support {
                class_label: classes.class_of(v).unwrap_or_default().to_string(),
                source_id: format!("{frame_id}:{v}#{k}"),
                pixels,
            });
        }
    }

    let (rows, cols) = labels.dims();
    let mut out = Vec::with_capacity(supports.len());
    for s in supports {
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for &(r, c) in &s.pixels {
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
        }
        if r0 == 0 || c0 == 0 || r1 + 1 == rows || c1 + 1 == cols {
            continue;
        }
        let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
        let mut mask = Grid::filled(h, w, false);
        for &(r, c) in &s.pixels {
            mask.set(r - r0, c - c0, true);
        }
        let pixels = Grid::from_fn(h, w, |r, c| *image.get(r0 + r, c0 + c));
        out.push(ObjectCutout::new(pixels, mask, s.source_id, s.class_label)?);
    }
    Ok(out)
}

/// Immutable collection of cut-outs sorted by overall size.
#[derive(Clone, Debug, Default)]
pub struct CutoutPool {
    cutouts: Vec<ObjectCutout>,
}

impl CutoutPool {
    pub fn new(mut cutouts: Vec<ObjectCutout>) -> Self {
        cutouts.sort_by(|a, b| {
            a.overall_size_px
                .total_cmp(&b.overall_size_px)
                .then_with(|| a.source_id.cmp(&b.source_id))
        });
        Self { cutouts }
    }

    pub fn len(&self) -> usize {
        self.cutouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cutouts.is_empty()
    }

    /// Cut-outs in ascending size order.
    pub fn cutouts(&self) -> &[ObjectCutout] {
        &self.cutouts
    }

    /// All cut-outs whose overall size lies in `[min_px, max_px]`.
    pub fn in_range(&self, min_px: f64, max_px: f64) -> Result<&[ObjectCutout]> {
        if !(min_px <= max_px) {
            return Err(Error::InvertedInterval {
                min: min_px,
                max: max_px,
            });
        }
        let lo = self.cutouts.partition_point(|c| c.overall_size_px < min_px);
        let hi = self.cutouts.partition_point(|c| c.overall_size_px <= max_px);
        Ok(&self.cutouts[lo..hi.max(lo)])
    }

    /// Uniformly random cut-out with overall size in `[min_px, max_px]`.
    pub fn query_by_size<R: Rng + ?Sized>(
        &self,
        min_px: f64,
        max_px: f64,
        rng: &mut R,
    ) -> Result<Option<&ObjectCutout>> {
        let candidates = self.in_range(min_px, max_px)?;
        if candidates.is_empty() {
            return Ok(None);
        }
        Ok(Some(&candidates[rng.random_range(0..candidates.len())]))
    }

    /// Uniformly random cut-out from the whole pool.
    pub fn sample_any<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&ObjectCutout> {
        if self.cutouts.is_empty() {
            None
        } else {
            Some(&self.cutouts[rng.random_range(0..self.cutouts.len())])
        }
    }
}
