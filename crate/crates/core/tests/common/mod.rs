#![allow(dead_code)]

pub mod oracle;
pub mod pinhole;

use std::path::{Path, PathBuf};

use roadscale::dataset_io::{write_json, write_labels, write_rgb, CalibrationSidecar};
use roadscale::geometry::CameraRig;
use roadscale::synthetic::{object_frame, road_scene};

/// Small rig used by the on-disk fixtures.
pub fn small_rig() -> CameraRig {
    CameraRig::centered(283.0, 1.5, 0.03, 128, 256).unwrap()
}

/// Writes `n` road frames (image, road mask, object labels, sidecar) and a
/// manifest under `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, n: usize, rig: &CameraRig) -> PathBuf {
    std::fs::create_dir_all(dir.join("frames")).unwrap();
    write_json(&dir.join("calib.json"), &CalibrationSidecar::from_rig(rig)).unwrap();
    let mut frames = Vec::new();
    for i in 0..n {
        let id = format!("frame{i:03}");
        let (image, road) = road_scene(rig, 60.0, 5.0, i as u64).unwrap();
        let (_, labels) = object_frame(rig.image_rows, rig.image_cols, 6, 3.0, 25.0, 100 + i as u64);
        write_rgb(&dir.join(format!("frames/{id}.png")), &image).unwrap();
        write_labels(&dir.join(format!("frames/{id}_road.png")), &road).unwrap();
        write_labels(&dir.join(format!("frames/{id}_inst.png")), &labels).unwrap();
        frames.push(serde_json::json!({
            "frame_id": id,
            "image": format!("frames/{id}.png"),
            "road_mask": format!("frames/{id}_road.png"),
            "labels": format!("frames/{id}_inst.png"),
        }));
    }
    let manifest = dir.join("manifest.json");
    write_json(
        &manifest,
        &serde_json::json!({ "defaults": { "calibration": "calib.json" }, "frames": frames }),
    )
    .unwrap();
    manifest
}

/// Relative path → file bytes for every file under `root`.
pub fn tree_contents(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// SHA-256 over the sorted (path, bytes) pairs of a directory tree.
pub fn tree_hash(root: &Path) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for (rel, bytes) in tree_contents(root) {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Random evaluation case of at most 32x32 pixels.
pub struct MetricCase {
    pub rows: usize,
    pub cols: usize,
    pub gt: Vec<u32>,
    pub scores: Vec<f32>,
    pub eval: Vec<bool>,
}

impl MetricCase {
    pub fn random<R: rand::Rng>(rng: &mut R) -> Self {
        let rows = rng.random_range(1..=32);
        let cols = rng.random_range(1..=32);
        let mut gt = vec![0u32; rows * cols];
        let n_inst = rng.random_range(0..6);
        for id in 1..=n_inst {
            let h = rng.random_range(1..=rows.min(8));
            let w = rng.random_range(1..=cols.min(8));
            let r0 = rng.random_range(0..=rows - h);
            let c0 = rng.random_range(0..=cols - w);
            for r in r0..r0 + h {
                for c in c0..c0 + w {
                    if rng.random_bool(0.85) {
                        gt[r * cols + c] = id;
                    }
                }
            }
        }
        // coarse levels produce ties, fine ones mostly distinct scores
        let levels = if rng.random_bool(0.5) { 8 } else { 1 << 20 };
        let scores = gt
            .iter()
            .map(|&g| {
                let noise = rng.random_range(0..levels) as f32 / levels as f32;
                if g != 0 && rng.random_bool(0.7) {
                    0.5 + noise / 2.0
                } else {
                    noise * if rng.random_bool(0.8) { 0.5 } else { 1.0 }
                }
            })
            .collect();
        let eval = (0..rows * cols).map(|_| rng.random_bool(0.9)).collect();
        Self {
            rows,
            cols,
            gt,
            scores,
            eval,
        }
    }

    pub fn score_map(&self) -> roadscale::raster::ScoreMap {
        use roadscale::raster::{Grid, ScoreMap};
        ScoreMap::with_mask(
            Grid::from_vec(self.rows, self.cols, self.scores.clone()).unwrap(),
            Grid::from_vec(self.rows, self.cols, self.eval.clone()).unwrap(),
        )
        .unwrap()
    }

    pub fn gt_map(&self) -> roadscale::raster::LabelMap {
        roadscale::raster::Grid::from_vec(self.rows, self.cols, self.gt.clone()).unwrap()
    }

    /// (score, positive) for every evaluated pixel.
    pub fn samples(&self) -> Vec<(f32, bool)> {
        (0..self.gt.len())
            .filter(|&i| self.eval[i])
            .map(|i| (self.scores[i], self.gt[i] != 0))
            .collect()
    }
}

/// Checks one case against the brute-force references; returns a
/// description of the first disagreement.
pub fn check_metric_case(case: &MetricCase) -> Result<(), String> {
    use roadscale::metrics::{auprc, components, component_f1, ppv, siou, EvalOptions};
    use roadscale::raster::Grid;
    use std::collections::BTreeSet;

    let opts = EvalOptions::default();
    let scores = case.score_map();
    let gt = case.gt_map();
    let at = |i: usize| (i / case.cols, i % case.cols);

    // auprc
    let samples = case.samples();
    let has_pos = samples.iter().any(|s| s.1);
    let has_neg = samples.iter().any(|s| !s.1);
    match auprc(&scores, &gt) {
        Ok(ap) if has_pos && has_neg => {
            let want = oracle::average_precision(&samples);
            if (ap - want).abs() > 1e-9 {
                return Err(format!("auprc {ap} vs oracle {want}"));
            }
        }
        Err(_) if !(has_pos && has_neg) => {}
        other => return Err(format!("auprc degenerate handling: {other:?}")),
    }

    // connected components of the gt support
    let on: BTreeSet<_> = (0..case.gt.len()).filter(|&i| case.gt[i] != 0).map(at).collect();
    let cc = components(&gt.to_binary());
    let want = oracle::flood_fill(&on);
    let got_n = cc.as_slice().iter().copied().max().unwrap_or(0) as usize;
    if got_n != want.len() {
        return Err(format!("{got_n} components vs oracle {}", want.len()));
    }
    for comp in &want {
        let ids: BTreeSet<u32> = comp.iter().map(|&(r, c)| *cc.get(r, c)).collect();
        if ids.len() != 1 || ids.contains(&0) {
            return Err("component split or merged".into());
        }
    }

    // siou / ppv on explicit masks
    let to_mask = |set: &BTreeSet<(usize, usize)>| {
        Grid::from_fn(case.rows, case.cols, |r, c| set.contains(&(r, c)))
    };
    let pred: BTreeSet<_> = (0..case.gt.len())
        .filter(|&i| case.eval[i] && case.scores[i] >= 0.5)
        .map(at)
        .collect();
    let ids: BTreeSet<u32> = case.gt.iter().copied().filter(|&g| g != 0).collect();
    for &id in &ids {
        let k: BTreeSet<_> = (0..case.gt.len()).filter(|&i| case.gt[i] == id).map(at).collect();
        let other: BTreeSet<_> = on.difference(&k).copied().collect();
        let got = siou(&to_mask(&k), &to_mask(&pred), &to_mask(&other));
        let want = oracle::siou(&k, &pred, &other);
        if got != want {
            return Err(format!("siou {got} vs {want}"));
        }
    }
    for comp in oracle::flood_fill(&pred) {
        let got = ppv(&to_mask(&comp), &to_mask(&on));
        let want = oracle::ppv(&comp, &on);
        if got != want {
            return Err(format!("ppv {got} vs {want}"));
        }
    }

    // full component evaluation
    let rep = component_f1(&scores, &gt, &opts).map_err(|e| e.to_string())?;
    let want = oracle::component_eval(
        &case.scores,
        &case.eval,
        &case.gt,
        case.cols,
        opts.binarize_threshold,
        &opts.taus,
    );
    if rep.siou != want.siou {
        return Err(format!("component sIoU {:?} vs {:?}", rep.siou, want.siou));
    }
    if rep.ppv != want.ppv {
        return Err(format!("component PPV {:?} vs {:?}", rep.ppv, want.ppv));
    }
    let f1: Vec<f64> = rep.f1_at_tau.iter().map(|x| x.f1).collect();
    if f1 != want.f1 {
        return Err(format!("F1 {f1:?} vs {:?}", want.f1));
    }
    Ok(())
}
