//! Quantized anchor scales from annotation height statistics, and the
//! body / s-head anchor template sets derived from them.
//!
//! The scale range of the training annotations is split into equal-count
//! quantile bins; the bin endpoints become the RPN scales. Anchor "scale"
//! here means pedestrian height, the quantity the annotation protocol
//! fixes (width follows from the 2.44 height/width ratio).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_to_image, Box, PartSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchorConfig {
    pub num_bins: usize,
    /// Height / width of every body anchor (1 / 0.41).
    pub body_ratio: f64,
    pub feature_stride: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            num_bins: 10,
            body_ratio: 2.44,
            feature_stride: 8.0,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 1 {
            return Err(Error::InvalidConfig("num_bins must be >= 1".into()));
        }
        if self.body_ratio <= 0.0 || self.feature_stride <= 0.0 {
            return Err(Error::InvalidConfig(
                "body_ratio and feature_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Body,
    SHead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTemplate {
    pub height: f64,
    /// Height / width.
    pub ratio: f64,
}

impl AnchorTemplate {
    pub fn width(&self) -> f64 {
        self.height / self.ratio
    }
}

#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub branch: Branch,
    pub templates: Vec<AnchorTemplate>,
}

/// Empirical quantile endpoints at k/num_bins for k = 0..=num_bins.
///
/// Quantiles use linear interpolation between order statistics at fractional
/// index q * (n - 1), so the first endpoint is the minimum and the last the
/// maximum.
pub fn quantized_scales(heights: &[f64], num_bins: usize) -> Result<Vec<f64>> {
    if heights.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 heights to quantize"));
    }
    if num_bins < 1 {
        return Err(Error::InvalidConfig("num_bins must be >= 1".into()));
    }
    if heights.iter().any(|&h| h <= 0.0 || h.is_nan() || !h.is_finite()) {
        return Err(Error::InvalidConfig("heights must be positive".into()));
    }
    let mut sorted = heights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let endpoints = (0..=num_bins)
        .map(|k| {
            let idx = (k as f64 / num_bins as f64) * (n - 1) as f64;
            let lo = idx.floor() as usize;
            let hi = idx.ceil() as usize;
            let frac = idx - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect();
    Ok(endpoints)
}

/// One body template per scale: height = scale, width = height / body_ratio.
pub fn generate_body_anchors(cfg: &AnchorConfig, scales: &[f64]) -> Result<AnchorSet> {
    cfg.validate()?;
    if scales.is_empty() {
        return Err(Error::EmptyInput("no scales"));
    }
    Ok(AnchorSet {
        branch: Branch::Body,
        templates: scales
            .iter()
            .map(|&h| AnchorTemplate {
                height: h,
                ratio: cfg.body_ratio,
            })
            .collect(),
    })
}

/// Apply the s-head cut to every body template: height' = h/3,
/// width' = 2w/3, so the area ratio is exactly 2/9 and the aspect halves.
pub fn derive_head_anchors(body: &AnchorSet) -> AnchorSet {
    AnchorSet {
        branch: Branch::SHead,
        templates: body
            .templates
            .iter()
            .map(|t| AnchorTemplate {
                height: t.height / 3.0,
                ratio: t.ratio / 2.0,
            })
            .collect(),
    }
}

/// Tile a template set over the stride-spaced feature grid of an image,
/// clipping to the image rectangle. The CNN that would consume these is not
/// part of this toolkit; placement exists so proposal pipelines have a
/// concrete anchor enumeration.
pub fn place_on_grid(set: &AnchorSet, image_w: f64, image_h: f64, stride: f64) -> Vec<Box> {
    let mut out = Vec::new();
    let mut cy = stride / 2.0;
    while cy < image_h {
        let mut cx = stride / 2.0;
        while cx < image_w {
            for t in &set.templates {
                let w = t.width();
                let h = t.height;
                let candidate = Box {
                    x1: cx - w / 2.0,
                    y1: cy - h / 2.0,
                    x2: cx + w / 2.0,
                    y2: cy + h / 2.0,
                };
                if let Some(clipped) = clip_to_image(&candidate, image_w, image_h) {
                    out.push(clipped);
                }
            }
            cx += stride;
        }
        cy += stride;
    }
    out
}

/// Area ratio produced by cutting a template with the s-head spec.
pub fn head_area_ratio() -> f64 {
    PartSpec::s_head().fractional_area()
}
