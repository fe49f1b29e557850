//! Pitch recovery from a road mask: render the road seen by cameras of
//! known pitch, then estimate the pitch from the top edge of the road.

use roadscale::geometry::{estimate_pitch, render_road_mask, CameraRig, DEFAULT_HORIZON_OFFSET_PX};

fn main() -> roadscale::Result<()> {
    run()
}

pub fn run() -> roadscale::Result<()> {
    let bound = (2.0 * DEFAULT_HORIZON_OFFSET_PX as f64 / 2265.0).atan();
    for truth in [0.0, 0.02, 0.05, 0.1] {
        let rig = CameraRig::centered(2265.0, 1.5, truth, 1024, 2048)?;
        let road = render_road_mask(&rig, 150.0, 10.0)?;
        let theta = estimate_pitch(&road, rig.focal_px, rig.principal_row, DEFAULT_HORIZON_OFFSET_PX)?;
        println!(
            "true {truth:.4} rad  estimated {theta:.4} rad  error {:+.5} (bound {bound:.5})",
            theta - truth
        );
    }
    Ok(())
}
