//! Caltech/CityPersons-style evaluation: subset filtering by height and
//! occlusion, greedy matching with ignore handling, FPPI-miss-rate curves,
//! the log-average miss rate MR^-2, and average-recall curves.
//!
//! Matching is done once per image in descending score order; because a
//! detection's match depends only on higher-scoring detections, the result
//! at any score cutoff equals re-matching the filtered set, so one pass
//! yields the whole curve.

use serde::{Deserialize, Serialize};

use crate::assignment::GroundTruth;
use crate::error::{Error, Result};
use crate::fusion::Detection;
use crate::geometry::{area, intersection_over_area, iou};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub name: String,
    pub min_height: f64,
    pub occ_lo: f64,
    pub occ_hi: f64,
}

impl SubsetSpec {
    /// Height >= 50 px, occlusion in [0, 0.35).
    pub fn reasonable() -> Self {
        Self {
            name: "reasonable".into(),
            min_height: 50.0,
            occ_lo: 0.0,
            occ_hi: 0.35,
        }
    }

    /// Height >= 50 px, occlusion in [0.35, 0.8).
    pub fn heavy() -> Self {
        Self {
            name: "heavy".into(),
            min_height: 50.0,
            occ_lo: 0.35,
            occ_hi: 0.8,
        }
    }

    /// Every non-ignore pedestrian.
    pub fn all() -> Self {
        Self {
            name: "all".into(),
            min_height: 0.0,
            occ_lo: 0.0,
            occ_hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.occ_lo > self.occ_hi || self.min_height < 0.0 {
            return Err(Error::InvalidConfig(
                "subset needs occ_lo <= occ_hi and min_height >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Nine reference FPPI points log-spaced by quarter decades in [1e-2, 1].
pub fn default_fppi_refs() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-2.0 + k as f64 / 4.0)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    pub fppi_refs: Vec<f64>,
    pub subset: SubsetSpec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: 0.5,
            fppi_refs: default_fppi_refs(),
            subset: SubsetSpec::reasonable(),
        }
    }
}

/// 1 - visible area / full area. Missing visible box means unoccluded.
pub fn occlusion_ratio(gt: &GroundTruth) -> f64 {
    match &gt.visible {
        Some(v) => 1.0 - area(v) / area(&gt.full),
        None => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtStatus {
    Evaluate,
    TreatAsIgnore,
}

/// Decide per ground truth whether it is evaluated under the subset or
/// treated as an ignore region for matching.
pub fn subset_filter(gts: &[GroundTruth], spec: &SubsetSpec) -> Vec<GtStatus> {
    gts.iter()
        .map(|gt| {
            let occ = occlusion_ratio(gt);
            let evaluate = !gt.ignore
                && gt.full.height() >= spec.min_height
                && occ >= spec.occ_lo
                && occ < spec.occ_hi;
            if evaluate {
                GtStatus::Evaluate
            } else {
                GtStatus::TreatAsIgnore
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetStatus {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// One image's matching outcome: per-detection status in descending score
/// order, plus the evaluated ground-truth count.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub dets: Vec<(f64, DetStatus)>,
    pub num_evaluated_gt: usize,
}

/// Greedy single-image matching. Detections are processed in descending
/// score order; each is matched to the best unmatched evaluated ground
/// truth (IoU >= threshold), else to an ignore ground truth by
/// intersection-over-detection-area >= threshold, else counted as FP.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruth],
    statuses: &[GtStatus],
    iou_thresh: f64,
) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(dets[a].box_.x1.partial_cmp(&dets[b].box_.x1).unwrap())
            .then(dets[a].box_.y1.partial_cmp(&dets[b].box_.y1).unwrap())
    });
    let mut gt_matched = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for &di in &order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if statuses[gi] != GtStatus::Evaluate || gt_matched[gi] {
                continue;
            }
            let v = iou(&det.box_, &gt.full);
            if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        let status = if let Some((gi, _)) = best {
            gt_matched[gi] = true;
            DetStatus::TruePositive
        } else {
            let hits_ignore = gts.iter().enumerate().any(|(gi, gt)| {
                statuses[gi] == GtStatus::TreatAsIgnore
                    && intersection_over_area(&det.box_, &gt.full) >= iou_thresh
            });
            if hits_ignore {
                DetStatus::Ignored
            } else {
                DetStatus::FalsePositive
            }
        };
        out.push((det.score, status));
    }
    let num_evaluated_gt = statuses.iter().filter(|s| **s == GtStatus::Evaluate).count();
    MatchResult {
        dets: out,
        num_evaluated_gt,
    }
}

/// Sorted (FPPI, miss rate) points, one per distinct score threshold, in
/// descending-threshold order (FPPI non-decreasing).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FppiCurve {
    pub points: Vec<(f64, f64)>,
    pub num_gt: usize,
    pub num_images: usize,
}

/// Sweep every distinct detection score as a threshold and accumulate
/// FPPI = cumulative FP / images, miss rate = 1 - cumulative TP / GT.
pub fn fppi_miss_curve(results: &[MatchResult], num_images: usize) -> Result<FppiCurve> {
    if num_images == 0 {
        return Err(Error::EmptyInput("need at least one image"));
    }
    let num_gt: usize = results.iter().map(|r| r.num_evaluated_gt).sum();
    if num_gt == 0 {
        return Err(Error::NoEvaluatedGroundTruth);
    }
    let mut all: Vec<(f64, DetStatus)> = results.iter().flat_map(|r| r.dets.iter().copied()).collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if all.is_empty() {
        return Ok(FppiCurve {
            points: vec![(0.0, 1.0)],
            num_gt,
            num_images,
        });
    }
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (i, (score, status)) in all.iter().enumerate() {
        match status {
            DetStatus::TruePositive => tp += 1,
            DetStatus::FalsePositive => fp += 1,
            DetStatus::Ignored => {}
        }
        let last_of_score = i + 1 == all.len() || all[i + 1].0 != *score;
        if last_of_score {
            points.push((fp as f64 / num_images as f64, 1.0 - tp as f64 / num_gt as f64));
        }
    }
    Ok(FppiCurve {
        points,
        num_gt,
        num_images,
    })
}

pub const MISS_RATE_FLOOR: f64 = 1e-6;

/// Geometric mean of the miss rates sampled at the reference FPPI points.
/// Each sample is the miss rate at the largest achieved FPPI <= ref (1.0
/// when the curve starts above the reference), clamped at 1e-6 so the log
/// stays finite for perfect detectors.
pub fn log_average_miss_rate(curve: &FppiCurve, refs: &[f64]) -> f64 {
    let mut log_sum = 0.0;
    for &r in refs {
        let mut sample = 1.0;
        for &(fppi, miss) in &curve.points {
            if fppi <= r {
                // later points at the same fppi have more TPs, keep the last
                sample = miss;
            } else {
                break;
            }
        }
        log_sum += sample.max(MISS_RATE_FLOOR).ln();
    }
    (log_sum / refs.len() as f64).exp()
}

/// Average recall of the top-k proposals per image at IoU 0.5, over all
/// non-ignore ground truths (no height or occlusion filter).
pub fn average_recall_curve(
    proposals_per_image: &[Vec<Detection>],
    gts_per_image: &[Vec<GroundTruth>],
    budgets: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let total_gt: usize = gts_per_image
        .iter()
        .map(|gts| gts.iter().filter(|g| !g.ignore).count())
        .sum();
    if total_gt == 0 {
        return Err(Error::NoEvaluatedGroundTruth);
    }
    let mut out = Vec::with_capacity(budgets.len());
    for &k in budgets {
        let mut matched = 0usize;
        for (props, gts) in proposals_per_image.iter().zip(gts_per_image) {
            let mut sorted = props.clone();
            sorted.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap()
                    .then(a.box_.x1.partial_cmp(&b.box_.x1).unwrap())
                    .then(a.box_.y1.partial_cmp(&b.box_.y1).unwrap())
            });
            sorted.truncate(k);
            let mut gt_matched: Vec<bool> = gts.iter().map(|g| g.ignore).collect();
            for p in &sorted {
                let mut best: Option<(usize, f64)> = None;
                for (gi, gt) in gts.iter().enumerate() {
                    if gt_matched[gi] {
                        continue;
                    }
                    let v = iou(&p.box_, &gt.full);
                    if v >= 0.5 && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((gi, v));
                    }
                }
                if let Some((gi, _)) = best {
                    gt_matched[gi] = true;
                    matched += 1;
                }
            }
        }
        out.push((k, matched as f64 / total_gt as f64));
    }
    Ok(out)
}
