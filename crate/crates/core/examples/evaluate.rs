//! Pixel and component metrics of a simulated detector on synthetic frames:
//! the ground truth is blurred into a score map, a few objects are dropped
//! and some false alarms are added.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadscale::geometry::CameraRig;
use roadscale::injector::{synthesize_frame, InjectionConfig};
use roadscale::metrics::{EvalAccumulator, EvalOptions};
use roadscale::raster::{Grid, ScoreMap};
use roadscale::synthetic::{road_scene, synthetic_pool};

fn main() -> roadscale::Result<()> {
    run()
}

pub fn run() -> roadscale::Result<()> {
    let rig = CameraRig::centered(566.0, 1.5, 0.03, 256, 512)?;
    let (image, road) = road_scene(&rig, 80.0, 6.0, 1)?;
    let pool = synthetic_pool(400, 3.0, 60.0, 2)?;
    let cfg = InjectionConfig {
        fill_probability: 0.1,
        ..Default::default()
    };
    let opts = EvalOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = EvalAccumulator::default();

    for i in 0..10 {
        let frame = synthesize_frame(&image, &road, &rig, &pool, &cfg, &format!("f{i}"))?;
        let missed: Vec<u32> = frame
            .records
            .iter()
            .filter(|_| rng.random_bool(0.2))
            .map(|r| r.id)
            .collect();
        let mut scores = Grid::from_fn(rig.image_rows, rig.image_cols, |r, c| {
            let id = *frame.labels.get(r, c);
            if id != 0 && !missed.contains(&id) {
                rng.random_range(0.55..1.0f32)
            } else {
                rng.random_range(0.0..0.45f32)
            }
        });
        for _ in 0..3 {
            let (r0, c0) = (rng.random_range(150..240), rng.random_range(50..450));
            for r in r0..r0 + 4 {
                for c in c0..c0 + 6 {
                    scores.set(r, c, 0.9);
                }
            }
        }
        let map = ScoreMap::with_mask(scores, road.to_binary())?;
        total.merge(&EvalAccumulator::from_frame(&map, &frame.labels, &opts)?);
    }

    let report = total.report(&opts.taus)?;
    println!("AuPRC      {:.4}", report.auprc.unwrap_or(f64::NAN));
    println!("mean sIoU  {:.4} over {} objects", report.mean_siou, report.siou.len());
    println!("mean PPV   {:.4} over {} predictions", report.mean_ppv, report.ppv.len());
    println!("mean F1    {:.4}", report.mean_f1);
    for f in &report.f1_at_tau {
        println!("  F1(τ={:.2}) = {:.4}", f.tau, f.f1);
    }
    Ok(())
}
