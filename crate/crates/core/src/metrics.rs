//! Pixel-level AuPRC and component-level sIoU / PPV / F1 scoring.
//!
//! Component metrics follow the obstacle-track convention:
//!
//! * every ground-truth instance `K` is scored by
//!   `sIoU = |K ∩ P| / (|K ∪ P| - |P ∩ other_gt|)` where `P` is the union of
//!   predicted components that touch `K`;
//! * every predicted component `K̂` is scored by `PPV = |K̂ ∩ gt| / |K̂|`;
//! * at threshold `τ`, a ground-truth instance with `sIoU > τ` is a true
//!   positive, otherwise a false negative, and a predicted component with
//!   `PPV <= τ` is a false positive; `F1(τ) = 2TP / (2TP + FN + FP)`.
//!
//! Averages over empty sets are reported as 1.0: with no ground truth there
//! is nothing to miss and with no prediction there is nothing spurious.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Grid, LabelMap, ScoreMap};

/// Score at or above which a pixel counts as predicted obstacle.
pub const DEFAULT_BINARIZE_THRESHOLD: f32 = 0.5;

/// τ = 0.25, 0.30, …, 0.75.
pub fn default_taus() -> Vec<f64> {
    (0..=10).map(|i| (25 + 5 * i) as f64 / 100.0).collect()
}

/// 8-connected component labeling. Ids are assigned 1, 2, … in the
/// row-major order of each component's first pixel.
pub fn components(mask: &Grid<bool>) -> LabelMap {
    let (rows, cols) = mask.dims();
    let mut out = Grid::filled(rows, cols, 0u32);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !*mask.get(r, c) || *out.get(r, c) != 0 {
                continue;
            }
            next += 1;
            out.set(r, c, next);
            stack.push((r, c));
            while let Some((pr, pc)) = stack.pop() {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (pr as i64 + dr, pc as i64 + dc);
                        if !mask.contains(nr, nc) {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if *mask.get(nr, nc) && *out.get(nr, nc) == 0 {
                            out.set(nr, nc, next);
                            stack.push((nr, nc));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjusted IoU of ground-truth component `gt_component` against the
/// prediction, ignoring predicted pixels that lie on other ground truth.
pub fn siou(gt_component: &Grid<bool>, prediction: &Grid<bool>, other_gt: &Grid<bool>) -> f64 {
    let (mut inter, mut union, mut on_other) = (0usize, 0usize, 0usize);
    for ((&k, &p), &o) in gt_component
        .as_slice()
        .iter()
        .zip(prediction.as_slice())
        .zip(other_gt.as_slice())
    {
        inter += (k && p) as usize;
        union += (k || p) as usize;
        on_other += (p && o) as usize;
    }
    ratio(inter, union - on_other)
}

/// Fraction of a predicted component's pixels that lie on ground truth.
pub fn ppv(pred_component: &Grid<bool>, gt_mask: &Grid<bool>) -> f64 {
    let (mut hit, mut size) = (0usize, 0usize);
    for (&p, &g) in pred_component.as_slice().iter().zip(gt_mask.as_slice()) {
        size += p as usize;
        hit += (p && g) as usize;
    }
    ratio(hit, size)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug)]
struct ScoreKey(f32);

impl PartialEq for ScoreKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for ScoreKey {}
impl PartialOrd for ScoreKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ScoreKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Positive / negative pixel counts per distinct score; merging two
/// histograms is associative, so frames can be accumulated in any order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PixelCounts {
    bins: BTreeMap<ScoreKey, (u64, u64)>,
}

/// One point of the precision-recall curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f32,
    pub precision: f64,
    pub recall: f64,
}

impl PixelCounts {
    /// Collects the pixels inside the score map's eval mask.
    pub fn from_frame(scores: &ScoreMap, gt: &LabelMap) -> Result<Self> {
        scores.values.ensure_same_dims(gt, "ground truth")?;
        let mut counts = Self::default();
        for ((&s, &m), &g) in scores
            .values
            .as_slice()
            .iter()
            .zip(scores.eval_mask.as_slice())
            .zip(gt.as_slice())
        {
            if m {
                counts.add(s, g != 0);
            }
        }
        Ok(counts)
    }

    pub fn add(&mut self, score: f32, positive: bool) {
        // fold -0.0 into 0.0 so ties compare equal
        let key = ScoreKey(if score == 0.0 { 0.0 } else { score });
        let bin = self.bins.entry(key).or_default();
        if positive {
            bin.0 += 1;
        } else {
            bin.1 += 1;
        }
    }

    pub fn merge(&mut self, other: &PixelCounts) {
        for (k, (p, n)) in &other.bins {
            let bin = self.bins.entry(*k).or_default();
            bin.0 += p;
            bin.1 += n;
        }
    }

    pub fn totals(&self) -> (u64, u64) {
        self.bins
            .values()
            .fold((0, 0), |(p, n), &(bp, bn)| (p + bp, n + bn))
    }

    /// Precision and recall at each distinct score, from the highest score
    /// down. Pixels with equal scores enter the curve together.
    pub fn pr_curve(&self) -> Vec<PrPoint> {
        let (total_pos, _) = self.totals();
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut curve = Vec::with_capacity(self.bins.len());
        for (k, (p, n)) in self.bins.iter().rev() {
            tp += p;
            fp += n;
            curve.push(PrPoint {
                threshold: k.0,
                precision: tp as f64 / (tp + fp) as f64,
                recall: if total_pos == 0 {
                    0.0
                } else {
                    tp as f64 / total_pos as f64
                },
            });
        }
        curve
    }

    /// Average precision: the sum of precision times recall increment over
    /// the curve.
    pub fn average_precision(&self) -> Result<f64> {
        let (pos, neg) = self.totals();
        if pos == 0 {
            return Err(Error::DegenerateGroundTruth("no positive pixels"));
        }
        if neg == 0 {
            return Err(Error::DegenerateGroundTruth("no negative pixels"));
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for pt in self.pr_curve() {
            ap += (pt.recall - prev_recall) * pt.precision;
            prev_recall = pt.recall;
        }
        Ok(ap)
    }
}

/// Area under the pixel-level precision-recall curve inside the eval mask.
pub fn auprc(scores: &ScoreMap, gt: &LabelMap) -> Result<f64> {
    PixelCounts::from_frame(scores, gt)?.average_precision()
}

/// Options of the component-level evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub binarize_threshold: f32,
    pub taus: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
            taus: default_taus(),
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() {
            return Err(Error::EmptyThresholds);
        }
        if let Some(&t) = self.taus.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidThreshold(t));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1AtTau {
    pub tau: f64,
    pub f1: f64,
}

/// Pixel and component metrics for one frame or an aggregate of frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// One entry per ground-truth component.
    pub siou: Vec<f64>,
    /// One entry per predicted component.
    pub ppv: Vec<f64>,
    pub f1_at_tau: Vec<F1AtTau>,
    pub mean_f1: f64,
    pub mean_siou: f64,
    pub mean_ppv: f64,
    /// `None` when the ground truth has no positive or no negative pixel.
    pub auprc: Option<f64>,
}

/// Per-component scores of a single frame, before thresholding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComponentScores {
    pub siou: Vec<f64>,
    pub ppv: Vec<f64>,
}

/// Scores every ground-truth instance and predicted component of a frame.
///
/// Each distinct nonzero id of `gt_instances` is one ground-truth
/// component. The prediction is `score >= threshold` restricted to the eval
/// mask, split into 8-connected components.
pub fn component_scores(
    scores: &ScoreMap,
    gt_instances: &LabelMap,
    threshold: f32,
) -> Result<ComponentScores> {
    scores.values.ensure_same_dims(gt_instances, "ground truth")?;
    let (rows, cols) = scores.dims();
    let pred = Grid::from_fn(rows, cols, |r, c| {
        *scores.eval_mask.get(r, c) && *scores.values.get(r, c) >= threshold
    });
    let pred_cc = components(&pred);

    // Pixel counts gathered in one pass; equivalent to evaluating `siou`
    // and `ppv` on the explicit masks.
    let n_pred = pred_cc.as_slice().iter().copied().max().unwrap_or(0) as usize;
    let mut pred_size = vec![0usize; n_pred + 1];
    let mut pred_on_gt = vec![0usize; n_pred + 1];
    let mut gt_size: BTreeMap<u32, usize> = BTreeMap::new();
    let mut touching: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (&g, &p) in gt_instances.as_slice().iter().zip(pred_cc.as_slice()) {
        if g != 0 {
            *gt_size.entry(g).or_default() += 1;
        }
        if p != 0 {
            pred_size[p as usize] += 1;
            if g != 0 {
                pred_on_gt[p as usize] += 1;
                touching.entry(g).or_default().insert(p);
            }
        }
    }
    // pixels of predicted component p lying on gt instance g
    let mut overlap: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&g, &p) in gt_instances.as_slice().iter().zip(pred_cc.as_slice()) {
        if g != 0 && p != 0 {
            *overlap.entry((g, p)).or_default() += 1;
        }
    }

    let empty = BTreeSet::new();
    let siou = gt_size
        .iter()
        .map(|(&g, &size)| {
            let preds = touching.get(&g).unwrap_or(&empty);
            let p_size: usize = preds.iter().map(|&p| pred_size[p as usize]).sum();
            let inter: usize = preds.iter().map(|&p| overlap[&(g, p)]).sum();
            let on_other: usize = preds
                .iter()
                .map(|&p| pred_on_gt[p as usize] - overlap[&(g, p)])
                .sum();
            ratio(inter, size + p_size - inter - on_other)
        })
        .collect();
    let ppv = (1..=n_pred)
        .map(|p| ratio(pred_on_gt[p], pred_size[p]))
        .collect();
    Ok(ComponentScores { siou, ppv })
}

/// Running totals over frames; `merge` is associative and commutative up
/// to the order of the per-component lists.
#[derive(Clone, Debug, Default)]
pub struct EvalAccumulator {
    pub pixels: PixelCounts,
    pub components: ComponentScores,
}

impl EvalAccumulator {
    pub fn from_frame(scores: &ScoreMap, gt: &LabelMap, opts: &EvalOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Self {
            pixels: PixelCounts::from_frame(scores, gt)?,
            components: component_scores(scores, gt, opts.binarize_threshold)?,
        })
    }

    pub fn merge(&mut self, other: &EvalAccumulator) {
        self.pixels.merge(&other.pixels);
        self.components.siou.extend_from_slice(&other.components.siou);
        self.components.ppv.extend_from_slice(&other.components.ppv);
    }

    pub fn report(&self, taus: &[f64]) -> Result<ComponentReport> {
        if taus.is_empty() {
            return Err(Error::EmptyThresholds);
        }
        let ComponentScores { siou, ppv } = &self.components;
        let f1_at_tau: Vec<F1AtTau> = taus
            .iter()
            .map(|&tau| {
                let tp = siou.iter().filter(|&&s| s > tau).count();
                let fneg = siou.len() - tp;
                let fpos = ppv.iter().filter(|&&p| p <= tau).count();
                let den = 2 * tp + fneg + fpos;
                let f1 = if den == 0 {
                    1.0
                } else {
                    2.0 * tp as f64 / den as f64
                };
                F1AtTau { tau, f1 }
            })
            .collect();
        let mean_f1 = f1_at_tau.iter().map(|x| x.f1).sum::<f64>() / f1_at_tau.len() as f64;
        Ok(ComponentReport {
            siou: siou.clone(),
            ppv: ppv.clone(),
            mean_f1,
            mean_siou: mean_or_one(siou),
            mean_ppv: mean_or_one(ppv),
            f1_at_tau,
            auprc: self.pixels.average_precision().ok(),
        })
    }
}

fn mean_or_one(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        1.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Full pixel and component evaluation of one frame.
pub fn component_f1(
    scores: &ScoreMap,
    gt_instances: &LabelMap,
    opts: &EvalOptions,
) -> Result<ComponentReport> {
    EvalAccumulator::from_frame(scores, gt_instances, opts)?.report(&opts.taus)
}
