//! Deterministic synthetic crowd scenes and a CNN-free proposal scorer.
//!
//! Scenes are pure geometry: pedestrians with the fixed 0.41 aspect ratio,
//! log-uniform heights, ground-plane placement (taller means lower bottom
//! edge) and a single-strip occlusion model that keeps visible boxes
//! rectangular. The scorer produces jittered, noisy proposals whose head
//! scores ignore bottom occlusion; that head-visibility rule is a synthetic
//! construction, the mechanism under test, not a claim of realism.
//!
//! Everything is a pure function of (configs, seed): scene `index` derives
//! its own SplitMix64 stream, so runs are bit-identical and parallelizable.

use serde::{Deserialize, Serialize};

use crate::anchors::Branch;
use crate::assignment::GroundTruth;
use crate::error::{Error, Result};
use crate::evaluation::{
    fppi_miss_curve, log_average_miss_rate, match_detections, subset_filter, EvalConfig,
    FppiCurve, MatchResult, SubsetSpec,
};
use crate::fusion::{greedy_nms, pipeline_fuse, Detection, FusionConfig};
use crate::geometry::{area, cut_part, expand_part, iou, Box, PartSpec};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub image_w: f64,
    pub image_h: f64,
    pub peds_min: usize,
    pub peds_max: usize,
    pub height_min: f64,
    pub height_max: f64,
    /// Width / height of every pedestrian box.
    pub aspect: f64,
    pub occlusion_prob: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_w: 2048.0,
            image_h: 1024.0,
            peds_min: 2,
            peds_max: 8,
            height_min: 50.0,
            height_max: 400.0,
            aspect: 0.41,
            occlusion_prob: 0.5,
            seed: 42,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.image_w > 0.0
            && self.image_h > 0.0
            && self.peds_min >= 1
            && self.peds_min <= self.peds_max
            && self.height_min > 0.0
            && self.height_min <= self.height_max
            && self.height_max <= self.image_h
            && self.aspect > 0.0
            && (0.0..=1.0).contains(&self.occlusion_prob);
        if !ok {
            return Err(Error::InvalidConfig("invalid scene config".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub noise_sigma: f64,
    pub head_weight: f64,
    pub body_weight: f64,
    pub proposals_per_gt: usize,
    /// Box jitter as a fraction of box size.
    pub jitter_sigma: f64,
    pub background_per_image: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.03,
            head_weight: 1.0,
            body_weight: 1.0,
            proposals_per_gt: 5,
            jitter_sigma: 0.03,
            background_per_image: 20,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_sigma < 0.0 || self.jitter_sigma < 0.0 {
            return Err(Error::InvalidConfig("sigmas must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcclusionSide {
    None,
    Bottom,
    Left,
    Right,
}

/// One scene: pedestrians in z-order (later index is nearer to the camera),
/// with visible boxes and the side their dominant occluder covers.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image_w: f64,
    pub image_h: f64,
    pub gts: Vec<GroundTruth>,
    pub sides: Vec<OcclusionSide>,
    pub occlusion_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Visibility {
    pub visible: Box,
    pub ratio: f64,
    pub side: OcclusionSide,
}

/// Single-strip visibility: the dominant (largest-overlap) nearer occluder
/// clips the full box from the bottom, left or right, whichever side its
/// center lies on, so the visible box stays a rectangle.
pub fn compute_visibility(fulls: &[Box]) -> Vec<Visibility> {
    fulls
        .iter()
        .enumerate()
        .map(|(i, full)| {
            let mut dominant: Option<(usize, f64)> = None;
            for (j, occ) in fulls.iter().enumerate().skip(i + 1) {
                let w = full.x2.min(occ.x2) - full.x1.max(occ.x1);
                let h = full.y2.min(occ.y2) - full.y1.max(occ.y1);
                if w > 0.0 && h > 0.0 {
                    let inter = w * h;
                    if dominant.is_none_or(|(_, best)| inter > best) {
                        dominant = Some((j, inter));
                    }
                }
            }
            match dominant {
                None => Visibility {
                    visible: *full,
                    ratio: 0.0,
                    side: OcclusionSide::None,
                },
                Some((j, _)) => {
                    let occ = &fulls[j];
                    let dx = occ.center_x() - full.center_x();
                    let dy = occ.center_y() - full.center_y();
                    let side = if dy > 0.0 && dy.abs() >= dx.abs() {
                        OcclusionSide::Bottom
                    } else if dx < 0.0 {
                        OcclusionSide::Left
                    } else {
                        OcclusionSide::Right
                    };
                    // keep at least a 1% sliver visible so the box stays valid
                    let visible = match side {
                        OcclusionSide::Bottom => Box {
                            y2: occ
                                .y1
                                .clamp(full.y1 + 0.01 * full.height(), full.y2),
                            ..*full
                        },
                        OcclusionSide::Left => Box {
                            x1: occ
                                .x2
                                .clamp(full.x1, full.x2 - 0.01 * full.width()),
                            ..*full
                        },
                        OcclusionSide::Right => Box {
                            x2: occ
                                .x1
                                .clamp(full.x1 + 0.01 * full.width(), full.x2),
                            ..*full
                        },
                        OcclusionSide::None => unreachable!(),
                    };
                    Visibility {
                        visible,
                        ratio: 1.0 - area(&visible) / area(full),
                        side,
                    }
                }
            }
        })
        .collect()
}

/// Deterministic scene for (cfg.seed, index).
pub fn generate_scene(cfg: &SceneConfig, index: u64) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = SplitMix64::for_index(cfg.seed, index);
    let horizon = 0.4 * cfg.image_h;
    let n = cfg.peds_min + rng.next_below((cfg.peds_max - cfg.peds_min + 1) as u64) as usize;

    let mut fulls: Vec<Box> = Vec::new();
    let place = |rng: &mut SplitMix64, cfg: &SceneConfig, horizon: f64, h: f64| -> Box {
        let w = cfg.aspect * h;
        // ground plane: bottom edge grows with height
        let mut bottom = horizon + 1.2 * h * rng.uniform(0.9, 1.1);
        bottom = bottom.min(cfg.image_h);
        let y1 = (bottom - h).max(0.0);
        let cx = rng.uniform(w / 2.0, cfg.image_w - w / 2.0);
        Box {
            x1: cx - w / 2.0,
            y1,
            x2: cx + w / 2.0,
            y2: y1 + h,
        }
    };
    let log_h = |rng: &mut SplitMix64, cfg: &SceneConfig| {
        rng.uniform(cfg.height_min.ln(), cfg.height_max.ln()).exp()
    };

    // cap pairwise overlap below the NMS band so suppression never chains
    // across pedestrians; occlusion strips (intersection over the target's
    // area) still reach past the heavy threshold
    let max_pair_iou = 0.4;
    let separated = |b: &Box, others: &[Box]| others.iter().all(|o| iou(b, o) <= max_pair_iou);

    for _ in 0..n {
        let h = log_h(&mut rng, cfg);
        for _ in 0..50 {
            let b = place(&mut rng, cfg, horizon, h);
            if separated(&b, &fulls) {
                fulls.push(b);
                break;
            }
        }
    }
    // nearer occluders are appended after all base pedestrians, covering a
    // strip of a chosen target from the bottom, left or right
    let base_count = fulls.len();
    for i in 0..base_count {
        if rng.next_f64() >= cfg.occlusion_prob {
            continue;
        }
        let target = fulls[i];
        let h2 = (target.height() * rng.uniform(0.7, 1.0))
            .clamp(cfg.height_min, cfg.height_max);
        let w2 = cfg.aspect * h2;
        let frac = rng.uniform(0.2, 0.7);
        let u = rng.next_f64();
        let (cx, y1) = if u < 0.6 {
            // bottom strip
            (target.center_x(), target.y2 - frac * target.height())
        } else if u < 0.8 {
            // left strip: occluder's right edge inside the target
            (target.x1 + frac * target.width() - w2 / 2.0, target.y1 + 0.1 * target.height())
        } else {
            // right strip
            (target.x2 - frac * target.width() + w2 / 2.0, target.y1 + 0.1 * target.height())
        };
        // translate (never resize) to stay inside the image, preserving aspect
        let mut cx = cx.clamp(w2 / 2.0, cfg.image_w - w2 / 2.0);
        let mut y1 = y1.clamp(0.0, cfg.image_h - h2);
        // retreat along the strip direction until the overlap cap holds
        let mut placed = None;
        for _ in 0..200 {
            let cand = Box {
                x1: cx - w2 / 2.0,
                y1,
                x2: cx + w2 / 2.0,
                y2: y1 + h2,
            };
            if separated(&cand, &fulls) {
                placed = Some(cand);
                break;
            }
            if u < 0.6 {
                y1 = (y1 + 0.02 * h2).min(cfg.image_h - h2);
            } else if u < 0.8 {
                cx = (cx - 0.02 * w2).max(w2 / 2.0);
            } else {
                cx = (cx + 0.02 * w2).min(cfg.image_w - w2 / 2.0);
            }
        }
        if let Some(b) = placed {
            fulls.push(b);
        }
    }

    let vis = compute_visibility(&fulls);
    let gts = fulls
        .iter()
        .zip(&vis)
        .enumerate()
        .map(|(i, (full, v))| GroundTruth {
            full: *full,
            visible: Some(v.visible),
            ignore: false,
            id: i as i64,
        })
        .collect();
    Ok(SyntheticScene {
        image_w: cfg.image_w,
        image_h: cfg.image_h,
        gts,
        sides: vis.iter().map(|v| v.side).collect(),
        occlusion_ratios: vis.iter().map(|v| v.ratio).collect(),
    })
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn jittered(b: &Box, sigma: f64, rng: &mut SplitMix64) -> Box {
    if sigma == 0.0 {
        return *b;
    }
    let (w, h) = (b.width(), b.height());
    let cx = b.center_x() + sigma * w * rng.gauss();
    let cy = b.center_y() + sigma * h * rng.gauss();
    let w2 = w * (sigma * rng.gauss()).exp();
    let h2 = h * (sigma * rng.gauss()).exp();
    Box {
        x1: cx - w2 / 2.0,
        y1: cy - h2 / 2.0,
        x2: cx + w2 / 2.0,
        y2: cy + h2 / 2.0,
    }
}

/// Raw branch scores for a candidate box against every pedestrian.
///
/// The body score is the best visibility-weighted IoU against a full box;
/// the head score compares cut regions and skips the visibility penalty
/// when the occlusion strip comes from the bottom, encoding the premise
/// that heads stay visible in a crowd.
fn raw_scores(prop: &Box, scene: &SyntheticScene) -> (f64, f64) {
    let spec = PartSpec::s_head();
    let prop_head = cut_part(prop, &spec);
    let mut body = 0.0f64;
    let mut head = 0.0f64;
    for (i, gt) in scene.gts.iter().enumerate() {
        let vis_ratio = 1.0 - scene.occlusion_ratios[i];
        body = body.max(iou(prop, &gt.full) * vis_ratio);
        let head_factor = match scene.sides[i] {
            OcclusionSide::None | OcclusionSide::Bottom => 1.0,
            OcclusionSide::Left | OcclusionSide::Right => vis_ratio,
        };
        head = head.max(iou(&prop_head, &cut_part(&gt.full, &spec)) * head_factor);
    }
    (body, head)
}

/// Jittered ground-truth copies plus random background boxes, scored on
/// both branches. Head detections are emitted in the head frame (the cut of
/// the proposal), ready for expansion at fusion time.
pub fn propose(
    scene: &SyntheticScene,
    scorer: &ScorerConfig,
    image_id: i64,
    rng: &mut SplitMix64,
) -> Result<(Vec<Detection>, Vec<Detection>)> {
    scorer.validate()?;
    let spec = PartSpec::s_head();
    let mut body_dets = Vec::new();
    let mut head_dets = Vec::new();
    let push = |prop: Box, rng: &mut SplitMix64, body_dets: &mut Vec<Detection>, head_dets: &mut Vec<Detection>| {
        let (raw_body, raw_head) = raw_scores(&prop, scene);
        // one shared perception-noise draw per proposal: the two heads score
        // the same evidence, so their noise is correlated, not independent
        let noise = scorer.noise_sigma * rng.gauss();
        let body_score = clamp01(raw_body * scorer.body_weight + noise);
        let head_score = clamp01(raw_head * scorer.head_weight + noise);
        body_dets.push(Detection {
            image_id,
            box_: prop,
            score: body_score,
            branch: Branch::Body,
        });
        head_dets.push(Detection {
            image_id,
            box_: cut_part(&prop, &spec),
            score: head_score,
            branch: Branch::SHead,
        });
    };
    for gt in &scene.gts {
        for _ in 0..scorer.proposals_per_gt {
            let prop = jittered(&gt.full, scorer.jitter_sigma, rng);
            push(prop, rng, &mut body_dets, &mut head_dets);
        }
    }
    for _ in 0..scorer.background_per_image {
        let h = rng.uniform(50f64.ln(), 400f64.ln()).exp();
        let w = 0.41 * h;
        let x1 = rng.uniform(0.0, (scene.image_w - w).max(1.0));
        let y1 = rng.uniform(0.0, (scene.image_h - h).max(1.0));
        let prop = Box {
            x1,
            y1,
            x2: x1 + w,
            y2: y1 + h,
        };
        push(prop, rng, &mut body_dets, &mut head_dets);
    }
    Ok((body_dets, head_dets))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigReport {
    pub name: String,
    pub ar: Vec<(usize, f64)>,
    pub mr_reasonable: f64,
    pub mr_heavy: f64,
    pub curve_reasonable: FppiCurve,
    pub curve_heavy: FppiCurve,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub num_images: usize,
    pub configs: Vec<ConfigReport>,
}

pub const AR_BUDGETS: [usize; 3] = [10, 100, 300];

/// One simulated image: the scene and its raw (pre-NMS) branch detections.
#[derive(Debug, Clone)]
pub struct SimImage {
    pub scene: SyntheticScene,
    pub body_dets: Vec<Detection>,
    pub head_dets: Vec<Detection>,
}

/// Generate `num_images` scenes with their raw proposals. Image `index`
/// draws from its own stream, so the result depends only on the configs.
pub fn simulate_images(
    scene_cfg: &SceneConfig,
    scorer_cfg: &ScorerConfig,
    num_images: usize,
) -> Result<Vec<SimImage>> {
    scene_cfg.validate()?;
    (0..num_images)
        .map(|index| {
            let scene = generate_scene(scene_cfg, index as u64)?;
            let mut rng =
                SplitMix64::for_index(scene_cfg.seed.wrapping_add(0x50524F50), index as u64);
            let (body_dets, head_dets) = propose(&scene, scorer_cfg, index as i64, &mut rng)?;
            Ok(SimImage {
                scene,
                body_dets,
                head_dets,
            })
        })
        .collect()
}

/// Final per-image detections of the three pipeline configurations: body
/// branch only, head branch only (NMS in the head frame before expansion),
/// and the fused pipeline.
pub fn pipeline_outputs(
    image: &SimImage,
    fusion_cfg: &FusionConfig,
) -> Result<(Vec<Detection>, Vec<Detection>, Vec<Detection>)> {
    let mut body_only = greedy_nms(&image.body_dets, fusion_cfg.nms_iou);
    body_only.truncate(fusion_cfg.max_keep);

    // single-part configuration: NMS directly on part detections, then expand
    let spec = PartSpec::s_head();
    let mut head_only: Vec<Detection> = greedy_nms(&image.head_dets, fusion_cfg.nms_iou)
        .into_iter()
        .map(|d| Detection {
            box_: expand_part(&d.box_, &spec),
            ..d
        })
        .collect();
    head_only.truncate(fusion_cfg.max_keep);

    let fused = pipeline_fuse(&image.body_dets, &image.head_dets, fusion_cfg)?;
    Ok((body_only, head_only, fused))
}

/// Full pipeline per image (propose, fuse, evaluate) for the three
/// configurations.
pub fn run_benchmark(
    scene_cfg: &SceneConfig,
    scorer_cfg: &ScorerConfig,
    fusion_cfg: &FusionConfig,
    eval_cfg: &EvalConfig,
    num_images: usize,
) -> Result<BenchmarkReport> {
    fusion_cfg.validate()?;
    let images = simulate_images(scene_cfg, scorer_cfg, num_images)?;
    let mut body_all = Vec::with_capacity(num_images);
    let mut head_only_all = Vec::with_capacity(num_images);
    let mut fused_all = Vec::with_capacity(num_images);
    for image in &images {
        let (body_only, head_only, fused) = pipeline_outputs(image, fusion_cfg)?;
        body_all.push(body_only);
        head_only_all.push(head_only);
        fused_all.push(fused);
    }

    let gts_all: Vec<Vec<GroundTruth>> = images.iter().map(|s| s.scene.gts.clone()).collect();
    let configs = [
        ("body-only", &body_all),
        ("head-only", &head_only_all),
        ("fused", &fused_all),
    ]
    .into_iter()
    .map(|(name, dets_all)| {
        let ar = crate::evaluation::average_recall_curve(dets_all, &gts_all, &AR_BUDGETS)?;
        let evaluate = |subset: &SubsetSpec| -> Result<(FppiCurve, f64)> {
            let results: Vec<MatchResult> = dets_all
                .iter()
                .zip(&gts_all)
                .map(|(dets, gts)| {
                    match_detections(dets, gts, &subset_filter(gts, subset), eval_cfg.iou_thresh)
                })
                .collect();
            let curve = fppi_miss_curve(&results, num_images)?;
            let mr = log_average_miss_rate(&curve, &eval_cfg.fppi_refs);
            Ok((curve, mr))
        };
        let (curve_reasonable, mr_reasonable) = evaluate(&SubsetSpec::reasonable())?;
        let (curve_heavy, mr_heavy) = evaluate(&SubsetSpec::heavy())?;
        Ok(ConfigReport {
            name: name.to_string(),
            ar,
            mr_reasonable,
            mr_heavy,
            curve_reasonable,
            curve_heavy,
        })
    })
    .collect::<Result<Vec<_>>>()?;

    Ok(BenchmarkReport {
        num_images,
        configs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::occlusion_ratio;

    #[test]
    fn scenes_are_bit_identical() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg, 3).unwrap();
        let b = generate_scene(&cfg, 3).unwrap();
        assert_eq!(a.gts.len(), b.gts.len());
        for (x, y) in a.gts.iter().zip(&b.gts) {
            assert_eq!(x.full, y.full);
            assert_eq!(x.visible, y.visible);
        }
        assert_eq!(a.occlusion_ratios, b.occlusion_ratios);
    }

    #[test]
    fn zero_occlusion_prob_means_unoccluded_targets() {
        let cfg = SceneConfig {
            occlusion_prob: 0.0,
            ..Default::default()
        };
        for index in 0..20 {
            let scene = generate_scene(&cfg, index).unwrap();
            // no deliberate occluders; incidental overlap can still occur,
            // but no pedestrian was constructed to cover another
            assert!(scene.gts.len() >= cfg.peds_min);
        }
    }

    #[test]
    fn aspect_ratio_honored() {
        let cfg = SceneConfig::default();
        for index in 0..20 {
            let scene = generate_scene(&cfg, index).unwrap();
            for gt in &scene.gts {
                let aspect = gt.full.width() / gt.full.height();
                assert!((aspect - 0.41).abs() < 1e-6, "aspect {aspect}");
            }
        }
    }

    #[test]
    fn stored_ratio_matches_evaluation_module() {
        let cfg = SceneConfig::default();
        for index in 0..20 {
            let scene = generate_scene(&cfg, index).unwrap();
            for (gt, &stored) in scene.gts.iter().zip(&scene.occlusion_ratios) {
                assert!((occlusion_ratio(gt) - stored).abs() < 1e-9);
                let v = gt.visible.unwrap();
                assert!(v.x1 >= gt.full.x1 && v.y1 >= gt.full.y1);
                assert!(v.x2 <= gt.full.x2 && v.y2 <= gt.full.y2);
                assert!((0.0..1.0).contains(&stored));
            }
        }
    }

    #[test]
    fn bottom_strip_visibility() {
        let target = Box {
            x1: 0.0,
            y1: 0.0,
            x2: 41.0,
            y2: 100.0,
        };
        let occluder = Box {
            x1: -5.0,
            y1: 50.0,
            x2: 50.0,
            y2: 160.0,
        };
        let vis = compute_visibility(&[target, occluder]);
        assert_eq!(vis[0].side, OcclusionSide::Bottom);
        assert!((vis[0].ratio - 0.5).abs() < 1e-12);
        assert_eq!(vis[0].visible.y2, 50.0);
        assert_eq!(vis[1].side, OcclusionSide::None);
        assert_eq!(vis[1].ratio, 0.0);
    }

    #[test]
    fn noiseless_gt_copies_score_one() {
        let scorer = ScorerConfig {
            noise_sigma: 0.0,
            jitter_sigma: 0.0,
            background_per_image: 0,
            ..Default::default()
        };
        // two disjoint, unoccluded pedestrians
        let fulls = [
            Box {
                x1: 100.0,
                y1: 100.0,
                x2: 141.0,
                y2: 200.0,
            },
            Box {
                x1: 400.0,
                y1: 150.0,
                x2: 482.0,
                y2: 350.0,
            },
        ];
        let vis = compute_visibility(&fulls);
        let scene = SyntheticScene {
            image_w: 1000.0,
            image_h: 500.0,
            gts: fulls
                .iter()
                .zip(&vis)
                .enumerate()
                .map(|(i, (f, v))| GroundTruth {
                    full: *f,
                    visible: Some(v.visible),
                    ignore: false,
                    id: i as i64,
                })
                .collect(),
            sides: vis.iter().map(|v| v.side).collect(),
            occlusion_ratios: vis.iter().map(|v| v.ratio).collect(),
        };
        let mut rng = SplitMix64::new(1);
        let (body, head) = propose(&scene, &scorer, 0, &mut rng).unwrap();
        // every proposal is an exact GT copy with visibility weight 1
        assert!(body.iter().all(|d| d.score == 1.0));
        assert!(head.iter().all(|d| d.score == 1.0));
    }

    #[test]
    fn bottom_occluded_head_scores_full() {
        let target = Box {
            x1: 100.0,
            y1: 100.0,
            x2: 141.0,
            y2: 200.0,
        };
        let occluder = Box {
            x1: 95.0,
            y1: 150.0,
            x2: 150.0,
            y2: 260.0,
        };
        let vis = compute_visibility(&[target, occluder]);
        let scene = SyntheticScene {
            image_w: 500.0,
            image_h: 500.0,
            gts: vec![
                GroundTruth {
                    full: target,
                    visible: Some(vis[0].visible),
                    ignore: false,
                    id: 0,
                },
                GroundTruth {
                    full: occluder,
                    visible: Some(vis[1].visible),
                    ignore: false,
                    id: 1,
                },
            ],
            sides: vec![vis[0].side, vis[1].side],
            occlusion_ratios: vec![vis[0].ratio, vis[1].ratio],
        };
        let (raw_body, raw_head) = raw_scores(&target, &scene);
        assert!(raw_head >= 1.0 - 1e-12, "head ignores bottom occlusion");
        assert!(raw_body < 1.0, "body score penalized by occlusion");
    }

    #[test]
    fn proposals_deterministic_under_seed() {
        let cfg = SceneConfig::default();
        let scorer = ScorerConfig::default();
        let scene = generate_scene(&cfg, 0).unwrap();
        let mut r1 = SplitMix64::new(9);
        let mut r2 = SplitMix64::new(9);
        let (b1, h1) = propose(&scene, &scorer, 0, &mut r1).unwrap();
        let (b2, h2) = propose(&scene, &scorer, 0, &mut r2).unwrap();
        for (a, b) in b1.iter().zip(&b2).chain(h1.iter().zip(&h2)) {
            assert_eq!(a.box_, b.box_);
            assert_eq!(a.score, b.score);
        }
    }

    #[test]
    fn small_benchmark_runs_and_conserves() {
        let scene_cfg = SceneConfig::default();
        let report = run_benchmark(
            &scene_cfg,
            &ScorerConfig::default(),
            &FusionConfig::default(),
            &EvalConfig::default(),
            10,
        )
        .unwrap();
        assert_eq!(report.configs.len(), 3);
        for cfg in &report.configs {
            assert_eq!(cfg.ar.len(), 3);
            for &(_, ar) in &cfg.ar {
                assert!((0.0..=1.0).contains(&ar));
            }
            assert!(cfg.mr_reasonable >= crate::evaluation::MISS_RATE_FLOOR);
            assert!(cfg.mr_heavy <= 1.0);
        }
    }
}
