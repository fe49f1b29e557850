//! Cut-out extraction from an instance-labeled frame, size queries and pool
//! persistence.
//!
//! cargo run --example extract_pool -- [pool_dir]

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadscale::cutout_pool::{extract_cutouts, ClassTable, CutoutPool};
use roadscale::dataset_io::{load_pool, save_pool};
use roadscale::synthetic::object_frame;

fn main() -> roadscale::Result<()> {
    run(std::env::args().nth(1))
}

pub fn run(out: Option<String>) -> roadscale::Result<()> {
    let classes: BTreeSet<String> = ["car", "person"].into_iter().map(String::from).collect();
    let table = ClassTable::cityscapes();
    let mut cutouts = Vec::new();
    for seed in 0..4 {
        let (image, labels) = object_frame(256, 512, 12, 4.0, 60.0, seed);
        cutouts.extend(extract_cutouts(&image, &labels, &table, &classes, &format!("src{seed}"))?);
    }
    let pool = CutoutPool::new(cutouts);
    println!("{} cut-outs", pool.len());
    for c in pool.cutouts().iter().step_by(8) {
        println!(
            "  {:<12} {:<7} {:>3}x{:<3} area {:>5}  size {:6.2}",
            c.source_id, c.class_label, c.bbox_w, c.bbox_h, c.area_px, c.overall_size_px
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (lo, hi) = (10.0, 20.0);
    println!("{} candidates in [{lo}, {hi}] px", pool.in_range(lo, hi)?.len());
    if let Some(c) = pool.query_by_size(lo, hi, &mut rng)? {
        println!("picked {} ({:.2} px)", c.source_id, c.overall_size_px);
    }

    if let Some(dir) = out {
        let dir = std::path::Path::new(&dir);
        save_pool(dir, &pool)?;
        let back = load_pool(dir)?;
        assert_eq!(back.cutouts(), pool.cutouts());
        println!("saved and reloaded {}", dir.display());
    }
    Ok(())
}
