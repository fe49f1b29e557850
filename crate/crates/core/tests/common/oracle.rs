//! Brute-force reference implementations of the metrics, written with
//! explicit pixel sets and written independently of the library code.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type Px = (usize, usize);

/// Connected components (8-connectivity) by breadth-first flood fill.
pub fn flood_fill(on: &BTreeSet<Px>) -> Vec<BTreeSet<Px>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in on {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((r, c)) = queue.pop_front() {
            comp.insert((r, c));
            for nr in r.saturating_sub(1)..=r + 1 {
                for nc in c.saturating_sub(1)..=c + 1 {
                    if on.contains(&(nr, nc)) && seen.insert((nr, nc)) {
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Average precision from scratch: for every distinct score t (high to
/// low) count the pixels with score >= t.
pub fn average_precision(samples: &[(f32, bool)]) -> f64 {
    let total_pos = samples.iter().filter(|s| s.1).count() as f64;
    let mut thresholds: Vec<f32> = samples.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = samples.iter().filter(|s| s.0 >= t && s.1).count() as f64;
        let fp = samples.iter().filter(|s| s.0 >= t && !s.1).count() as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}

pub fn siou(k: &BTreeSet<Px>, p: &BTreeSet<Px>, other: &BTreeSet<Px>) -> f64 {
    let inter = k.intersection(p).count();
    let union = k.union(p).count();
    let on_other = p.intersection(other).count();
    let den = union - on_other;
    if den == 0 {
        0.0
    } else {
        inter as f64 / den as f64
    }
}

pub fn ppv(kh: &BTreeSet<Px>, gt: &BTreeSet<Px>) -> f64 {
    if kh.is_empty() {
        0.0
    } else {
        kh.intersection(gt).count() as f64 / kh.len() as f64
    }
}

pub struct Reference {
    pub siou: Vec<f64>,
    pub ppv: Vec<f64>,
    pub f1: Vec<f64>,
}

/// Component evaluation on explicit sets. `scores`, `eval` and `gt` are
/// row-major with `cols` columns.
pub fn component_eval(
    scores: &[f32],
    eval: &[bool],
    gt: &[u32],
    cols: usize,
    threshold: f32,
    taus: &[f64],
) -> Reference {
    let at = |i: usize| (i / cols, i % cols);
    let pred_px: BTreeSet<Px> = (0..scores.len())
        .filter(|&i| eval[i] && scores[i] >= threshold)
        .map(at)
        .collect();
    let pred_comps = flood_fill(&pred_px);
    let mut instances: BTreeMap<u32, BTreeSet<Px>> = BTreeMap::new();
    for (i, &g) in gt.iter().enumerate() {
        if g != 0 {
            instances.entry(g).or_default().insert(at(i));
        }
    }
    let all_gt: BTreeSet<Px> = instances.values().flatten().copied().collect();

    let siou_list: Vec<f64> = instances
        .values()
        .map(|k| {
            let p: BTreeSet<Px> = pred_comps
                .iter()
                .filter(|comp| !comp.is_disjoint(k))
                .flatten()
                .copied()
                .collect();
            let other: BTreeSet<Px> = all_gt.difference(k).copied().collect();
            siou(k, &p, &other)
        })
        .collect();
    // the library numbers predicted components in scan order of their first
    // pixel; BTreeSet iteration order gives the same order here
    let mut comps = pred_comps;
    comps.sort_by_key(|c| *c.iter().next().unwrap());
    let ppv_list: Vec<f64> = comps.iter().map(|c| ppv(c, &all_gt)).collect();
    let f1 = taus
        .iter()
        .map(|&tau| {
            let tp = siou_list.iter().filter(|&&s| s > tau).count() as f64;
            let fneg = siou_list.len() as f64 - tp;
            let fpos = ppv_list.iter().filter(|&&p| p <= tau).count() as f64;
            if 2.0 * tp + fneg + fpos == 0.0 {
                1.0
            } else {
                2.0 * tp / (2.0 * tp + fneg + fpos)
            }
        })
        .collect();
    Reference {
        siou: siou_list,
        ppv: ppv_list,
        f1,
    }
}
