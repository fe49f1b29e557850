//! One perspective-aware synthetic frame: anchors, pixel size ranges and the
//! placed objects, optionally written to disk.
//!
//! cargo run --example inject_frame -- [out_dir]

use roadscale::dataset_io::write_synthesized;
use roadscale::geometry::CameraRig;
use roadscale::injector::{build_grid, frame_rng, pixel_size_range, synthesize_frame, InjectionConfig};
use roadscale::synthetic::{road_scene, synthetic_pool};

fn main() -> roadscale::Result<()> {
    run(std::env::args().nth(1))
}

pub fn run(out: Option<String>) -> roadscale::Result<()> {
    let rig = CameraRig::centered(566.0, 1.5, 0.03, 256, 512)?;
    let (image, road) = road_scene(&rig, 80.0, 6.0, 1)?;
    let pool = synthetic_pool(400, 1.5, 60.0, 2)?;
    let cfg = InjectionConfig {
        master_seed: 7,
        ..Default::default()
    };

    let anchors = build_grid(&rig, &road, &cfg, &mut frame_rng(cfg.master_seed, "demo"))?;
    println!("{} anchors", anchors.len());
    for a in anchors.iter().step_by(40) {
        let (lo, hi) = pixel_size_range(a, &cfg)?;
        println!(
            "  ({:6.2} m, {:6.2} m) -> row {:6.1} col {:6.1}: {:6.2} px/m, objects {lo:.1}-{hi:.1} px",
            a.ground.lateral_m, a.ground.depth_m, a.pixel.row, a.pixel.col, a.scale_px_per_m
        );
    }

    let frame = synthesize_frame(&image, &road, &rig, &pool, &cfg, "demo")?;
    println!("{} placed, {} skipped", frame.records.len(), frame.skips.len());
    for r in frame.records.iter().rev().take(5) {
        println!(
            "  #{:<3} {:<14} size {:5.1} px in [{:5.1}, {:5.1}] at depth {:5.2} m",
            r.id, r.source_id, r.placed_size_px, r.pixel_size_range.0, r.pixel_size_range.1,
            r.anchor.ground.depth_m
        );
    }

    if let Some(dir) = out {
        let dir = std::path::Path::new(&dir);
        std::fs::create_dir_all(dir).expect("create output dir");
        write_synthesized(dir, "demo", &frame)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
