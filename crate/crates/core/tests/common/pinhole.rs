use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use roadscale::geometry::CameraRig;

/// Full pinhole camera at height H above the road plane Y = 0 (world frame:
/// X right, Y up, Z forward), tilted down by the pitch.
pub struct Pinhole {
    pub rig: CameraRig,
    pub rot: Matrix3<f64>,
    pub centre: Vector3<f64>,
}

impl Pinhole {
    pub fn new(rig: CameraRig) -> Self {
        let (s, c) = rig.pitch_rad.sin_cos();
        // rows: camera x (right), y (up), z (optical axis) in world coordinates
        let rot = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c);
        Self {
            rig,
            rot,
            centre: Vector3::new(0.0, rig.cam_height_m, 0.0),
        }
    }

    pub fn projection(&self) -> Matrix3x4<f64> {
        // image coordinates with v up: row = pr - v, col = pc + u
        let k = Matrix3::new(
            self.rig.focal_px, 0.0, self.rig.principal_col,
            0.0, -self.rig.focal_px, self.rig.principal_row,
            0.0, 0.0, 1.0,
        );
        let t = -self.rot * self.centre;
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        k * rt
    }

    pub fn project(&self, world: Vector3<f64>) -> (f64, f64) {
        let x = self.projection() * Vector4::new(world.x, world.y, world.z, 1.0);
        (x.y / x.z, x.x / x.z)
    }

    /// Road point hit by the ray through a pixel.
    pub fn cast(&self, row: f64, col: f64) -> Option<Vector3<f64>> {
        let u = col - self.rig.principal_col;
        let v = self.rig.principal_row - row;
        let dir = self.rot.transpose() * Vector3::new(u, v, self.rig.focal_px);
        if dir.y >= 0.0 {
            return None;
        }
        let t = -self.centre.y / dir.y;
        Some(self.centre + dir * t)
    }

    /// Pixel length of a 1 m lateral road segment centred under the pixel.
    pub fn scale(&self, row: f64, col: f64) -> Option<f64> {
        let g = self.cast(row, col)?;
        let (r0, c0) = self.project(g - Vector3::new(0.5, 0.0, 0.0));
        let (r1, c1) = self.project(g + Vector3::new(0.5, 0.0, 0.0));
        Some(((r1 - r0).powi(2) + (c1 - c0).powi(2)).sqrt())
    }
}
