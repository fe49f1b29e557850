#![allow(dead_code)]

use std::path::Path;

use roadscale::dataset_io::{load_manifest, write_json, write_labels, write_rgb};
use roadscale::geometry::CameraRig;
use roadscale::raster::Grid;
use roadscale::synthetic::{object_frame, road_scene};

#[path = "../examples/perspective_map.rs"]
mod perspective_map;
#[path = "../examples/estimate_pitch.rs"]
mod estimate_pitch;
#[path = "../examples/extract_pool.rs"]
mod extract_pool;
#[path = "../examples/inject_frame.rs"]
mod inject_frame;
#[path = "../examples/mode_contrast.rs"]
mod mode_contrast;
#[path = "../examples/size_range_ablation.rs"]
mod size_range_ablation;
#[path = "../examples/evaluate.rs"]
mod evaluate;
#[path = "../examples/cityscapes_manifest.rs"]
mod cityscapes_manifest;

fn tmp_arg(dir: &Path) -> Option<String> {
    Some(dir.to_str().unwrap().to_string())
}

#[test]
fn perspective_map_runs() {
    let dir = tempfile::tempdir().unwrap();
    perspective_map::run(tmp_arg(&dir.path().join("pmap.pfm"))).unwrap();
    assert!(dir.path().join("pmap.pfm").is_file());
}

#[test]
fn estimate_pitch_runs() {
    estimate_pitch::run().unwrap();
}

#[test]
fn extract_pool_runs() {
    let dir = tempfile::tempdir().unwrap();
    extract_pool::run(tmp_arg(dir.path())).unwrap();
}

#[test]
fn inject_frame_runs() {
    let dir = tempfile::tempdir().unwrap();
    inject_frame::run(tmp_arg(dir.path())).unwrap();
}

#[test]
fn mode_contrast_runs() {
    mode_contrast::run(3).unwrap();
}

#[test]
fn size_range_ablation_runs() {
    size_range_ablation::run().unwrap();
}

#[test]
fn evaluate_runs() {
    evaluate::run().unwrap();
}

fn fake_cityscapes(root: &Path, city: &str, stems: &[&str]) {
    let rig = CameraRig::centered(300.0, 1.2, 0.04, 96, 192).unwrap();
    for (k, stem) in stems.iter().enumerate() {
        let img_dir = root.join("leftImg8bit/val").join(city);
        let gt_dir = root.join("gtFine/val").join(city);
        let cam_dir = root.join("camera/val").join(city);
        for d in [&img_dir, &gt_dir, &cam_dir] {
            std::fs::create_dir_all(d).unwrap();
        }
        let (image, road) = road_scene(&rig, 50.0, 4.0, k as u64).unwrap();
        let (_, inst) = object_frame(96, 192, 3, 4.0, 15.0, k as u64);
        write_rgb(&img_dir.join(format!("{stem}_leftImg8bit.png")), &image).unwrap();
        write_labels(&gt_dir.join(format!("{stem}_gtFine_labelIds.png")), &road.map(|&v| if v != 0 { 7 } else { 1 })).unwrap();
        write_labels(&gt_dir.join(format!("{stem}_gtFine_instanceIds.png")), &inst).unwrap();
        write_json(
            &cam_dir.join(format!("{stem}_camera.json")),
            &serde_json::json!({
                "extrinsic": { "baseline": 0.2, "pitch": 0.04, "roll": 0.0, "x": 1.7, "y": 0.1, "yaw": 0.0, "z": 1.2 },
                "intrinsic": { "fx": 300.0, "fy": 300.0, "u0": 96.0, "v0": 48.0 }
            }),
        )
        .unwrap();
    }
}

#[test]
fn cityscapes_manifest_runs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fake_cityscapes(root, "bonn", &["bonn_000000_000019", "bonn_000001_000019"]);
    fake_cityscapes(root, "aachen", &["aachen_000000_000019"]);
    let out = root.join("manifest.json");
    let n = cityscapes_manifest::run(root.to_str().unwrap(), "val", out.to_str().unwrap()).unwrap();
    assert_eq!(n, 3);

    let ds = load_manifest(&out).unwrap();
    assert_eq!(ds.frames[0].frame_id, "aachen_000000_000019");
    let f = &ds.frames[1];
    let rig = f.rig().unwrap();
    assert_eq!((rig.focal_px, rig.cam_height_m, rig.pitch_rad), (300.0, 1.2, 0.04));
    let road = f.load_road_mask().unwrap();
    assert!(road.as_slice().iter().all(|&v| v <= 1));
    assert!(road.as_slice().contains(&1));
    let _: &Grid<u32> = &f.load_labels().unwrap();
}
