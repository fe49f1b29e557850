//! Perspective vs uniform injection: correlation between placed object size
//! and local scale over a batch of procedural road frames.
//!
//! cargo run --release --example mode_contrast -- [frames]

use roadscale::geometry::CameraRig;
use roadscale::injector::{pearson, render_frame, InjectionConfig, InjectionMode};
use roadscale::synthetic::{road_scene, synthetic_pool};

fn main() -> roadscale::Result<()> {
    let frames = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    run(frames)
}

pub fn run(frames: usize) -> roadscale::Result<()> {
    let rig = CameraRig::centered(566.0, 1.5, 0.03, 256, 512)?;
    let (image, road) = road_scene(&rig, 80.0, 6.0, 1)?;
    let pool = synthetic_pool(400, 1.5, 60.0, 2)?;

    for mode in [InjectionMode::Perspective, InjectionMode::Uniform] {
        let cfg = InjectionConfig {
            mode,
            master_seed: 42,
            ..Default::default()
        };
        let (mut sizes, mut scales) = (Vec::new(), Vec::new());
        let mut skipped = 0;
        for i in 0..frames {
            let out = render_frame(&image, &road, &rig, &pool, &cfg, &format!("frame{i:04}"))?;
            skipped += out.skips.len();
            for rec in &out.records {
                sizes.push(rec.placed_size_px);
                scales.push(rec.anchor.scale_px_per_m);
            }
        }
        println!(
            "{mode:?}: {} injections, {} skipped, r = {:.3}",
            sizes.len(),
            skipped,
            pearson(&sizes, &scales).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
