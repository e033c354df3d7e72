//! Branch fusion: expand s-head detections to the body frame, merge with
//! body detections, re-rank by score and greedily suppress duplicates.

use serde::{Deserialize, Serialize};

use crate::anchors::Branch;
use crate::error::{Error, Result};
use crate::geometry::{expand_part, iou, Box, PartSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: i64,
    pub box_: Box,
    pub score: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub nms_iou: f64,
    pub per_branch_prenms: bool,
    pub max_keep: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            nms_iou: 0.5,
            per_branch_prenms: true,
            max_keep: 300,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(Error::InvalidConfig("nms_iou must lie in (0, 1)".into()));
        }
        if self.max_keep < 1 {
            return Err(Error::InvalidConfig("max_keep must be >= 1".into()));
        }
        Ok(())
    }
}

/// Replace every s-head detection box by its expanded body region; scores
/// and tags are untouched. Rejects body-tagged input.
pub fn expand_head_detections(dets: &[Detection]) -> Result<Vec<Detection>> {
    let spec = PartSpec::s_head();
    dets.iter()
        .map(|d| {
            if d.branch != Branch::SHead {
                return Err(Error::BranchMismatch { expected: "s-head" });
            }
            Ok(Detection {
                box_: expand_part(&d.box_, &spec),
                ..d.clone()
            })
        })
        .collect()
}

/// Sort detections by descending score, with deterministic tie-breaking on
/// (x1, y1).
fn sort_by_score(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.box_.x1.partial_cmp(&b.box_.x1).unwrap())
            .then(a.box_.y1.partial_cmp(&b.box_.y1).unwrap())
    });
}

/// Greedy NMS over one image's detections: keep the highest-scoring box,
/// drop everything overlapping it beyond `iou_thresh`, repeat.
pub fn greedy_nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sort_by_score(&mut sorted);
    let mut kept: Vec<Detection> = Vec::new();
    for d in sorted {
        if kept.iter().all(|k| iou(&k.box_, &d.box_) <= iou_thresh) {
            kept.push(d);
        }
    }
    kept
}

/// Full fusion pipeline for one image: optional per-branch NMS, head
/// expansion, merge, re-rank, final NMS, truncate to `max_keep`.
pub fn pipeline_fuse(
    body_dets: &[Detection],
    head_dets: &[Detection],
    cfg: &FusionConfig,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let (body, head) = if cfg.per_branch_prenms {
        (
            greedy_nms(body_dets, cfg.nms_iou),
            greedy_nms(head_dets, cfg.nms_iou),
        )
    } else {
        (body_dets.to_vec(), head_dets.to_vec())
    };
    let mut merged = body;
    merged.extend(expand_head_detections(&head)?);
    sort_by_score(&mut merged);
    let mut fused = greedy_nms(&merged, cfg.nms_iou);
    fused.truncate(cfg.max_keep);
    Ok(fused)
}
