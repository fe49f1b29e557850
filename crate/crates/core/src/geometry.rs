//! Ground-plane projective geometry for a pitched pinhole camera.
//!
//! Image coordinates: `row` grows downward from the top edge, `col` grows
//! rightward from the left edge. The signed coordinates relative to the
//! principal point are `u = col - principal_col` and
//! `v = principal_row - row`, so `v` is positive above the principal point.
//! Camera frame: `x` to the right, `y` up, `z` along the optical axis.
//!
//! A road point at depth `z` satisfies `y = z tan(pitch) - h0` with
//! `h0 = H / cos(pitch)`, which gives the closed forms
//!
//! ```text
//! depth(v) = h0 f / (f tan(pitch) - v)
//! scale(v) = f / depth(v) = cos(pitch) / H * (f tan(pitch) - v)
//! ```
//!
//! Images are assumed rectified; there is no distortion model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Grid, LabelMap};

/// Default number of rows between the top of the road and the horizon.
pub const DEFAULT_HORIZON_OFFSET_PX: i64 = 16;

/// Divisor that brings scale values into roughly `[0, 1]` for network input.
pub const SCALE_NORMALIZER: f32 = 400.0;

/// Intrinsic and mounting parameters of a road-facing camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    /// Focal length in pixels.
    pub focal_px: f64,
    /// Perpendicular distance from the camera centre to the road plane, meters.
    pub cam_height_m: f64,
    /// Tilt of the optical axis; positive means tilted down toward the road.
    pub pitch_rad: f64,
    pub principal_row: f64,
    pub principal_col: f64,
    pub image_rows: usize,
    pub image_cols: usize,
}

impl CameraRig {
    /// Rig with the principal point at the image centre.
    pub fn centered(
        focal_px: f64,
        cam_height_m: f64,
        pitch_rad: f64,
        image_rows: usize,
        image_cols: usize,
    ) -> Result<Self> {
        let rig = Self {
            focal_px,
            cam_height_m,
            pitch_rad,
            principal_row: image_rows as f64 / 2.0,
            principal_col: image_cols as f64 / 2.0,
            image_rows,
            image_cols,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.focal_px,
            self.cam_height_m,
            self.pitch_rad,
            self.principal_row,
            self.principal_col,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRig("non-finite parameter".into()));
        }
        if self.focal_px <= 0.0 {
            return Err(Error::InvalidRig(format!("focal_px = {}", self.focal_px)));
        }
        if self.cam_height_m <= 0.0 {
            return Err(Error::InvalidRig(format!(
                "cam_height_m = {}",
                self.cam_height_m
            )));
        }
        if self.pitch_rad.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::InvalidRig(format!("pitch_rad = {}", self.pitch_rad)));
        }
        if self.image_rows == 0 || self.image_cols == 0 {
            return Err(Error::InvalidRig("empty image".into()));
        }
        if !(0.0..=self.image_rows as f64).contains(&self.principal_row)
            || !(0.0..=self.image_cols as f64).contains(&self.principal_col)
        {
            return Err(Error::InvalidRig(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.principal_row, self.principal_col, self.image_rows, self.image_cols
            )));
        }
        Ok(())
    }

    /// `h0 = H / cos(pitch)`: distance from the camera to the road along the
    /// camera's vertical axis.
    pub fn h0(&self) -> f64 {
        self.cam_height_m / self.pitch_rad.cos()
    }

    /// Signed horizontal offset from the principal point.
    pub fn u(&self, pix: PixelCoord) -> f64 {
        pix.col - self.principal_col
    }

    /// Signed vertical offset from the principal point, positive upward.
    pub fn v(&self, pix: PixelCoord) -> f64 {
        self.principal_row - pix.row
    }

    /// Row at which the road plane vanishes.
    pub fn horizon_row(&self) -> f64 {
        self.principal_row - self.focal_px * self.pitch_rad.tan()
    }

    fn check_bounds(&self, pix: PixelCoord) -> Result<()> {
        let inside = pix.row.is_finite()
            && pix.col.is_finite()
            && pix.row >= 0.0
            && pix.col >= 0.0
            && pix.row < self.image_rows as f64
            && pix.col < self.image_cols as f64;
        if inside {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: pix.row,
                col: pix.col,
                rows: self.image_rows,
                cols: self.image_cols,
            })
        }
    }

    /// `f tan(pitch) - v`; positive strictly below the horizon.
    fn horizon_gap(&self, pix: PixelCoord) -> f64 {
        self.focal_px * self.pitch_rad.tan() - self.v(pix)
    }
}

/// Image position in pixels; fractional values are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub row: f64,
    pub col: f64,
}

impl PixelCoord {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }
}

/// Point in the camera frame, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Position on the road plane: lateral offset and depth along the optical
/// axis, both in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub lateral_m: f64,
    pub depth_m: f64,
}

impl GroundPoint {
    pub fn new(lateral_m: f64, depth_m: f64) -> Self {
        Self { lateral_m, depth_m }
    }
}

/// Per-pixel pixels-per-meter scale of objects standing on the road.
#[derive(Clone, Debug)]
pub struct PerspectiveMap {
    pub values: Grid<f32>,
    pub horizon_row: f64,
    pub rig: CameraRig,
}

/// Width in pixels of a one-meter-wide object on the road at `pix`.
///
/// Returns 0 at and above the horizon.
pub fn scale_at(rig: &CameraRig, pix: PixelCoord) -> Result<f64> {
    rig.validate()?;
    rig.check_bounds(pix)?;
    Ok(scale_unchecked(rig, pix.row))
}

#[inline]
fn scale_unchecked(rig: &CameraRig, row: f64) -> f64 {
    let gap = rig.focal_px * rig.pitch_rad.tan() - (rig.principal_row - row);
    let p = rig.pitch_rad.cos() / rig.cam_height_m * gap;
    if p > 0.0 {
        p
    } else {
        0.0
    }
}

/// Depth `z` of the road point seen at `pix`.
pub fn depth_at(rig: &CameraRig, pix: PixelCoord) -> Result<f64> {
    rig.validate()?;
    rig.check_bounds(pix)?;
    depth_unchecked(rig, pix)
}

fn depth_unchecked(rig: &CameraRig, pix: PixelCoord) -> Result<f64> {
    let gap = rig.horizon_gap(pix);
    if !(gap > 0.0) {
        return Err(Error::AboveHorizon {
            row: pix.row,
            col: pix.col,
            horizon_row: rig.horizon_row(),
        });
    }
    Ok(rig.h0() * rig.focal_px / gap)
}

/// Road-plane position seen at `pix`; inverse of [`project_road_point`].
///
/// Does not require the pixel to lie inside the image.
pub fn back_project(rig: &CameraRig, pix: PixelCoord) -> Result<GroundPoint> {
    rig.validate()?;
    let depth_m = depth_unchecked(rig, pix)?;
    Ok(GroundPoint {
        lateral_m: rig.u(pix) * depth_m / rig.focal_px,
        depth_m,
    })
}

/// Camera-frame coordinates of a road-plane position.
pub fn road_point(rig: &CameraRig, ground: GroundPoint) -> Result<RoadPoint> {
    if !(ground.depth_m > 0.0) {
        return Err(Error::NonPositiveDepth(ground.depth_m));
    }
    Ok(RoadPoint {
        x: ground.lateral_m,
        y: ground.depth_m * rig.pitch_rad.tan() - rig.h0(),
        z: ground.depth_m,
    })
}

/// Pinhole projection of a road-plane position. The result may fall outside
/// the image.
pub fn project_road_point(rig: &CameraRig, ground: GroundPoint) -> Result<PixelCoord> {
    rig.validate()?;
    let b = road_point(rig, ground)?;
    let u = rig.focal_px * b.x / b.z;
    let v = rig.focal_px * b.y / b.z;
    Ok(PixelCoord {
        row: rig.principal_row - v,
        col: rig.principal_col + u,
    })
}

/// Scale map over the whole image. Values depend only on the row.
pub fn perspective_map(rig: &CameraRig) -> Result<PerspectiveMap> {
    rig.validate()?;
    let row_scale: Vec<f32> = (0..rig.image_rows)
        .map(|r| scale_unchecked(rig, r as f64) as f32)
        .collect();
    let values = Grid::from_fn(rig.image_rows, rig.image_cols, |r, _| row_scale[r]);
    Ok(PerspectiveMap {
        values,
        horizon_row: rig.horizon_row(),
        rig: *rig,
    })
}

/// Scale map divided by [`SCALE_NORMALIZER`].
pub fn normalize(map: &PerspectiveMap) -> Grid<f32> {
    map.values.map(|&v| v / SCALE_NORMALIZER)
}

/// Recovers the camera pitch from the topmost row of a road segmentation.
///
/// The horizon is taken to sit `horizon_offset_px` rows above the topmost
/// road pixel; the pitch is then `atan(v_horizon / f)`. Negative results
/// mean the horizon lies below the principal point.
pub fn estimate_pitch(
    road_mask: &LabelMap,
    focal_px: f64,
    principal_row: f64,
    horizon_offset_px: i64,
) -> Result<f64> {
    if !(focal_px > 0.0) || !focal_px.is_finite() || !principal_row.is_finite() {
        return Err(Error::InvalidRig(format!(
            "focal_px = {focal_px}, principal_row = {principal_row}"
        )));
    }
    let top = (0..road_mask.rows())
        .find(|&r| road_mask.row(r).iter().any(|&v| v != 0))
        .ok_or(Error::EmptyRoadMask)?;
    let horizon_row = top as f64 - horizon_offset_px as f64;
    let v_horizon = principal_row - horizon_row;
    Ok((v_horizon / focal_px).atan())
}

/// Renders a road mask for `rig`: every pixel whose road point lies no
/// farther than `max_depth_m` and within `half_width_m` of the optical axis.
pub fn render_road_mask(rig: &CameraRig, max_depth_m: f64, half_width_m: f64) -> Result<LabelMap> {
    rig.validate()?;
    Ok(Grid::from_fn(rig.image_rows, rig.image_cols, |r, c| {
        let pix = PixelCoord::new(r as f64, c as f64);
        match back_project(rig, pix) {
            Ok(g) if g.depth_m <= max_depth_m && g.lateral_m.abs() <= half_width_m => 1,
            _ => 0,
        }
    }))
}
