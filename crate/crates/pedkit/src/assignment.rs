//! Dual-branch label assignment: each RoI gets independent body and s-head
//! labels, so the two branches can disagree about the same candidate box.
//!
//! The body label comes from IoU against the ground-truth full box; the
//! s-head label from IoU between the RoI's cut s-head region and the ground
//! truth's cut s-head region. Ignore regions exclude RoIs from both
//! branches, and an optional visible-ratio filter demotes positives matched
//! to mostly-invisible pedestrians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cut_part, intersection_over_area, iou, Box, PartSpec};
use crate::losses::{encode_deltas, RegressionTarget};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub full: Box,
    pub visible: Option<Box>,
    pub ignore: bool,
    pub id: i64,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = &self.visible {
            let inside = v.x1 >= self.full.x1 - 1e-6
                && v.y1 >= self.full.y1 - 1e-6
                && v.x2 <= self.full.x2 + 1e-6
                && v.y2 <= self.full.y2 + 1e-6;
            if !inside {
                return Err(Error::InvalidConfig(format!(
                    "visible box of ground truth {} exceeds the full box",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignConfig {
    pub pos_iou: f64,
    pub neg_iou_hi: f64,
    pub neg_iou_lo: f64,
    pub ignore_ioa: f64,
    pub visible_ratio_min: Option<f64>,
    /// RPN-style forcing: the best-IoU RoI for each ground truth becomes
    /// positive even below `pos_iou`. Off by default.
    pub force_best_match: bool,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self {
            pos_iou: 0.5,
            neg_iou_hi: 0.5,
            neg_iou_lo: 0.0,
            ignore_ioa: 0.5,
            visible_ratio_min: None,
            force_best_match: false,
        }
    }
}

impl AssignConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.neg_iou_lo
            && self.neg_iou_lo < self.neg_iou_hi
            && self.neg_iou_hi <= self.pos_iou
            && self.pos_iou <= 1.0;
        if !ok {
            return Err(Error::InvalidConfig(
                "need 0 <= neg_iou_lo < neg_iou_hi <= pos_iou <= 1".into(),
            ));
        }
        if let Some(r) = self.visible_ratio_min {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(
                    "visible_ratio_min must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Excluded,
}

#[derive(Debug, Clone)]
pub struct RoiLabels {
    pub body_label: Label,
    pub head_label: Label,
    pub matched_gt_body: Option<i64>,
    pub matched_gt_head: Option<i64>,
    pub body_target: Option<RegressionTarget>,
    pub head_target: Option<RegressionTarget>,
}

fn label_from_iou(best: f64, cfg: &AssignConfig) -> Label {
    if best >= cfg.pos_iou {
        Label::Positive
    } else if best >= cfg.neg_iou_lo && best < cfg.neg_iou_hi {
        Label::Negative
    } else {
        Label::Excluded
    }
}

/// Argmax-IoU match against non-ignore ground truths, ties broken by lowest
/// ground-truth id. Returns (index into gts, iou).
fn best_match(roi: &Box, boxes: &[(usize, Box, i64)]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, i64)> = None;
    for &(gi, ref gbox, id) in boxes {
        let v = iou(roi, gbox);
        let better = match best {
            None => true,
            Some((_, bv, bid)) => v > bv || (v == bv && id < bid),
        };
        if better {
            best = Some((gi, v, id));
        }
    }
    best.map(|(gi, v, _)| (gi, v))
}

/// Assign body and s-head labels independently for every RoI.
///
/// With no ground truth at all, every RoI is negative on both branches.
pub fn assign_labels(rois: &[Box], gts: &[GroundTruth], cfg: &AssignConfig) -> Result<Vec<RoiLabels>> {
    cfg.validate()?;
    for gt in gts {
        gt.validate()?;
    }
    let head_spec = PartSpec::s_head();
    let candidates: Vec<(usize, Box, i64)> = gts
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.ignore)
        .map(|(i, g)| (i, g.full, g.id))
        .collect();
    let head_candidates: Vec<(usize, Box, i64)> = candidates
        .iter()
        .map(|&(i, b, id)| (i, cut_part(&b, &head_spec), id))
        .collect();

    let mut out: Vec<RoiLabels> = rois
        .iter()
        .map(|roi| {
            let head_roi = cut_part(roi, &head_spec);
            let (body_label, matched_body, body_target) = match best_match(roi, &candidates) {
                Some((gi, v)) => {
                    let label = label_from_iou(v, cfg);
                    if label == Label::Positive {
                        (
                            label,
                            Some(gts[gi].id),
                            Some(encode_deltas(&gts[gi].full, roi)),
                        )
                    } else {
                        (label, None, None)
                    }
                }
                None => (Label::Negative, None, None),
            };
            let (head_label, matched_head, head_target) =
                match best_match(&head_roi, &head_candidates) {
                    Some((gi, v)) => {
                        let label = label_from_iou(v, cfg);
                        if label == Label::Positive {
                            let gt_head = cut_part(&gts[gi].full, &head_spec);
                            (label, Some(gts[gi].id), Some(encode_deltas(&gt_head, &head_roi)))
                        } else {
                            (label, None, None)
                        }
                    }
                    None => (Label::Negative, None, None),
                };
            RoiLabels {
                body_label,
                head_label,
                matched_gt_body: matched_body,
                matched_gt_head: matched_head,
                body_target,
                head_target,
            }
        })
        .collect();

    if cfg.force_best_match {
        for &(gi, ref gbox, _) in &candidates {
            force_best(rois, gbox, &mut out, |l| &mut l.body_label, gts[gi].id, |l| {
                &mut l.matched_gt_body
            });
        }
        for &(gi, ref gbox, _) in &head_candidates {
            let rois_head: Vec<Box> = rois.iter().map(|r| cut_part(r, &head_spec)).collect();
            force_best(&rois_head, gbox, &mut out, |l| &mut l.head_label, gts[gi].id, |l| {
                &mut l.matched_gt_head
            });
        }
    }

    Ok(out)
}

fn force_best(
    rois: &[Box],
    gbox: &Box,
    labels: &mut [RoiLabels],
    label_of: impl Fn(&mut RoiLabels) -> &mut Label,
    gt_id: i64,
    matched_of: impl Fn(&mut RoiLabels) -> &mut Option<i64>,
) {
    let mut best: Option<(usize, f64)> = None;
    for (ri, roi) in rois.iter().enumerate() {
        let v = iou(roi, gbox);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((ri, v));
        }
    }
    if let Some((ri, v)) = best {
        if v > 0.0 {
            *label_of(&mut labels[ri]) = Label::Positive;
            *matched_of(&mut labels[ri]) = Some(gt_id);
        }
    }
}

/// Flag every RoI whose overlap with some ignore region, measured as
/// intersection over the RoI's own area, strictly exceeds `ignore_ioa`.
pub fn ignore_filter(
    rois: &[Box],
    ignore_regions: &[Box],
    ignore_ioa: f64,
) -> Vec<(Box, bool)> {
    rois.iter()
        .map(|roi| {
            let excluded = ignore_regions
                .iter()
                .any(|region| intersection_over_area(roi, region) > ignore_ioa);
            (*roi, excluded)
        })
        .collect()
}

/// Demote body-positive RoIs whose matched ground truth is mostly invisible
/// (visible area / full area below `min_ratio`). Ground truths without a
/// visible box are left alone.
pub fn visible_ratio_filter(
    labels: &[RoiLabels],
    gts: &[GroundTruth],
    min_ratio: f64,
) -> Vec<RoiLabels> {
    labels
        .iter()
        .map(|l| {
            let mut l = l.clone();
            if l.body_label == Label::Positive {
                if let Some(id) = l.matched_gt_body {
                    if let Some(gt) = gts.iter().find(|g| g.id == id) {
                        if let Some(vis) = &gt.visible {
                            let ratio = crate::geometry::area(vis) / crate::geometry::area(&gt.full);
                            if ratio < min_ratio {
                                l.body_label = Label::Excluded;
                            }
                        }
                    }
                }
            }
            l
        })
        .collect()
}

/// Deterministic minibatch sampling: at most `pos_fraction * batch_size`
/// positives, the rest negatives, never an excluded RoI.
pub fn sample_minibatch(
    labels: &[Label],
    batch_size: usize,
    pos_fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if batch_size < 1 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&pos_fraction) {
        return Err(Error::InvalidConfig("pos_fraction must lie in [0, 1]".into()));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Positive => pos.push(i),
            Label::Negative => neg.push(i),
            Label::Excluded => {}
        }
    }
    if pos.is_empty() && neg.is_empty() {
        return Err(Error::NoSampleableRois);
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut pos);
    rng.shuffle(&mut neg);
    let pos_quota = ((pos_fraction * batch_size as f64).floor() as usize).min(pos.len());
    let neg_quota = (batch_size - pos_quota).min(neg.len());
    let mut picked: Vec<usize> = pos[..pos_quota].to_vec();
    picked.extend_from_slice(&neg[..neg_quota]);
    Ok(picked)
}
