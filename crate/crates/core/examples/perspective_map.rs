//! Scale map of a Cityscapes-like camera: horizon row, a few scale values
//! and their depths, and a PFM export.
//!
//! cargo run --example perspective_map -- [out.pfm]

use roadscale::dataset_io::{read_pfm_file, write_pfm_file};
use roadscale::geometry::{depth_at, normalize, perspective_map, scale_at, CameraRig, PixelCoord};

fn main() -> roadscale::Result<()> {
    run(std::env::args().nth(1))
}

pub fn run(out: Option<String>) -> roadscale::Result<()> {
    let rig = CameraRig {
        focal_px: 2265.0,
        cam_height_m: 1.5,
        pitch_rad: 0.05,
        principal_row: 512.0,
        principal_col: 1024.0,
        image_rows: 1024,
        image_cols: 2048,
    };
    let map = perspective_map(&rig)?;
    println!("horizon row: {:.2}", map.horizon_row);
    for row in [450.0, 500.0, 600.0, 800.0, 900.0, 1023.0] {
        let pix = PixelCoord::new(row, 1024.0);
        let scale = scale_at(&rig, pix)?;
        match depth_at(&rig, pix) {
            Ok(z) => println!("row {row:>6}: {scale:8.2} px/m at {z:7.2} m"),
            Err(_) => println!("row {row:>6}: {scale:8.2} px/m (no road intersection)"),
        }
    }
    let net_input = normalize(&map);
    println!("normalized bottom-row value: {:.4}", net_input.get(1023, 0));

    if let Some(path) = out {
        let path = std::path::Path::new(&path);
        write_pfm_file(path, &map.values)?;
        assert_eq!(read_pfm_file(path)?, map.values);
        println!("wrote {}", path.display());
    }
    Ok(())
}
