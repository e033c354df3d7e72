//! Annotation and detection file schemas.
//!
//! Both are JSON documents. An annotation file is
//!
//! ```json
//! {
//!   "images": [
//!     {
//!       "id": 0, "width": 2048.0, "height": 1024.0,
//!       "annotations": [
//!         { "bbox": [x1, y1, x2, y2],
//!           "vis_bbox": [x1, y1, x2, y2],   // optional
//!           "ignore": false }                 // optional, default false
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! and a detection file is
//!
//! ```json
//! { "detections": [
//!     { "image_id": 0, "bbox": [x1, y1, x2, y2], "score": 0.9,
//!       "branch": "body" }                    // optional, default body
//! ] }
//! ```
//!
//! Numbers round-trip at full 64-bit precision (shortest decimal). Parsing
//! validates every invariant and rejects rather than repairing; violations
//! are reported with the image id and record index.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::Branch;
use crate::assignment::GroundTruth;
use crate::error::{Error, Result};
use crate::fusion::Detection;
use crate::geometry::Box;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub bbox: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vis_bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ignore: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: i64,
    pub width: f64,
    pub height: f64,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub images: Vec<ImageRecord>,
}

impl AnnotationFile {
    pub fn validate(&self, file: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for img in &self.images {
            if !seen.insert(img.id) {
                return Err(Error::Malformed {
                    file: file.to_string(),
                    reason: format!("duplicate image id {}", img.id),
                });
            }
            if !(img.width > 0.0 && img.height > 0.0) {
                return Err(Error::Malformed {
                    file: file.to_string(),
                    reason: format!("image {} has non-positive dimensions", img.id),
                });
            }
            for (index, ann) in img.annotations.iter().enumerate() {
                let schema_err = |reason: String| Error::Schema {
                    file: file.to_string(),
                    image_id: img.id,
                    index,
                    reason,
                };
                let [x1, y1, x2, y2] = ann.bbox;
                Box::new(x1, y1, x2, y2)
                    .map_err(|e| schema_err(format!("bbox: {e}")))?;
                if let Some([vx1, vy1, vx2, vy2]) = ann.vis_bbox {
                    Box::new(vx1, vy1, vx2, vy2)
                        .map_err(|e| schema_err(format!("vis_bbox: {e}")))?;
                    let inside = vx1 >= x1 - 1e-6
                        && vy1 >= y1 - 1e-6
                        && vx2 <= x2 + 1e-6
                        && vy2 <= y2 + 1e-6;
                    if !inside {
                        return Err(schema_err("vis_bbox exceeds bbox".to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Ground truths of one image, ids equal to the record index.
    pub fn ground_truths(&self, img: &ImageRecord) -> Vec<GroundTruth> {
        img.annotations
            .iter()
            .enumerate()
            .map(|(i, ann)| {
                let [x1, y1, x2, y2] = ann.bbox;
                GroundTruth {
                    full: Box { x1, y1, x2, y2 },
                    visible: ann.vis_bbox.map(|[a, b, c, d]| Box {
                        x1: a,
                        y1: b,
                        x2: c,
                        y2: d,
                    }),
                    ignore: ann.ignore,
                    id: i as i64,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub image_id: i64,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub detections: Vec<DetectionRecord>,
}

impl DetectionFile {
    pub fn validate(&self, file: &str) -> Result<()> {
        for (index, rec) in self.detections.iter().enumerate() {
            let [x1, y1, x2, y2] = rec.bbox;
            Box::new(x1, y1, x2, y2).map_err(|e| Error::Schema {
                file: file.to_string(),
                image_id: rec.image_id,
                index,
                reason: format!("bbox: {e}"),
            })?;
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(Error::Schema {
                    file: file.to_string(),
                    image_id: rec.image_id,
                    index,
                    reason: format!("score {} outside [0, 1]", rec.score),
                });
            }
        }
        Ok(())
    }

    pub fn to_detections(&self) -> Vec<Detection> {
        self.detections
            .iter()
            .map(|rec| {
                let [x1, y1, x2, y2] = rec.bbox;
                Detection {
                    image_id: rec.image_id,
                    box_: Box { x1, y1, x2, y2 },
                    score: rec.score,
                    branch: rec.branch.unwrap_or(Branch::Body),
                }
            })
            .collect()
    }

    pub fn from_detections(dets: &[Detection]) -> Self {
        Self {
            detections: dets
                .iter()
                .map(|d| DetectionRecord {
                    image_id: d.image_id,
                    bbox: [d.box_.x1, d.box_.y1, d.box_.x2, d.box_.y2],
                    score: d.score,
                    branch: Some(d.branch),
                })
                .collect(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        file: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Malformed {
        file: path.display().to_string(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_annotations(path: &Path) -> Result<AnnotationFile> {
    let file: AnnotationFile = read_json(path)?;
    file.validate(&path.display().to_string())?;
    Ok(file)
}

pub fn write_annotations(path: &Path, file: &AnnotationFile) -> Result<()> {
    file.validate(&path.display().to_string())?;
    write_json(path, file)
}

pub fn parse_detections(path: &Path) -> Result<DetectionFile> {
    let file: DetectionFile = read_json(path)?;
    file.validate(&path.display().to_string())?;
    Ok(file)
}

pub fn write_detections(path: &Path, file: &DetectionFile) -> Result<()> {
    file.validate(&path.display().to_string())?;
    write_json(path, file)
}
