//! End-to-end acceptance checks. Each test covers one release criterion,
//! prints a single pass line on success, and pins its tolerances locally so
//! a regression in any module fails loudly here.

use std::time::Instant;

use pedkit::anchors::quantized_scales;
use pedkit::assignment::{assign_labels, AssignConfig, GroundTruth, Label};
use pedkit::cli::cli_dispatch;
use pedkit::evaluation::{
    default_fppi_refs, fppi_miss_curve, log_average_miss_rate, match_detections, subset_filter,
    DetStatus, MatchResult, SubsetSpec, MISS_RATE_FLOOR,
};
use pedkit::fusion::{greedy_nms, Detection};
use pedkit::geometry::{area, cut_part, expand_part, iou, Box, PartPool, PartSpec};
use pedkit::losses::{align_loss, gradient_verification_suite, LossConfig};
use pedkit::rng::SplitMix64;
use pedkit::synth::{run_benchmark, SceneConfig, ScorerConfig};
use pedkit::anchors::Branch;
use pedkit::config::RunConfig;

fn random_box(rng: &mut SplitMix64) -> Box {
    let x1 = rng.uniform(-500.0, 500.0);
    let y1 = rng.uniform(-500.0, 500.0);
    Box {
        x1,
        y1,
        x2: x1 + rng.uniform(1.0, 400.0),
        y2: y1 + rng.uniform(1.0, 400.0),
    }
}

#[test]
fn criterion_1_geometry_round_trip() {
    let start = Instant::now();
    let pool = PartPool::default_pool();
    let specs: Vec<&PartSpec> = pool.iter().map(|(_, s)| s).collect();
    let s_head = PartSpec::s_head();
    let mut rng = SplitMix64::new(1);
    for _ in 0..10_000 {
        let b = random_box(&mut rng);
        for spec in &specs {
            let back = expand_part(&cut_part(&b, spec), spec);
            assert!(
                (back.x1 - b.x1).abs() < 1e-9
                    && (back.y1 - b.y1).abs() < 1e-9
                    && (back.x2 - b.x2).abs() < 1e-9
                    && (back.y2 - b.y2).abs() < 1e-9,
                "round trip drifted: {b:?} -> {back:?}"
            );
        }
        let ratio = area(&cut_part(&b, &s_head)) / area(&b);
        assert!((ratio - 2.0 / 9.0).abs() < 1e-12, "area ratio {ratio}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 (geometry round-trip, 10k boxes x 5 parts): pass");
}

#[test]
fn criterion_2_gradient_verification() {
    let start = Instant::now();
    let checks = gradient_verification_suite(7, 100);
    assert_eq!(checks.len(), 3);
    for c in &checks {
        assert!(
            c.max_rel_error < 1e-5,
            "{}: max relative error {} >= 1e-5",
            c.name,
            c.max_rel_error
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("criterion 2 (analytic vs finite-difference gradients, 100 points): pass");
}

#[test]
fn criterion_3_align_loss_characterization() {
    let cfg = LossConfig::default();
    let spec = PartSpec::s_head();
    let mut rng = SplitMix64::new(3);
    for _ in 0..200 {
        let body = random_box(&mut rng);
        let head = cut_part(&body, &spec);
        // aligned pairs: zero up to the round-trip rounding of cut/expand
        let (l0, _) = align_loss(&[(body, head)], &cfg).unwrap();
        assert!(l0 < 1e-24, "aligned pair gave {l0}");

        // any >= 1e-3 perturbation in normalized coordinates is punished
        let eps = rng.uniform(1e-3, 0.3);
        let coord = rng.next_below(4);
        let mut moved = head;
        match coord {
            0 => {
                moved.x1 += eps * head.width();
                moved.x2 += eps * head.width();
            }
            1 => {
                moved.y1 += eps * head.height();
                moved.y2 += eps * head.height();
            }
            2 => moved.x2 += eps * head.width(),
            _ => moved.y2 += eps * head.height(),
        }
        let (l1, _) = align_loss(&[(body, moved)], &cfg).unwrap();
        assert!(l1 > 1e-9, "perturbed pair gave {l1} (eps = {eps})");

        // invariance under joint translation and uniform scaling
        let s = rng.uniform(0.2, 5.0);
        let (tx, ty) = (rng.uniform(-300.0, 300.0), rng.uniform(-300.0, 300.0));
        let tf = |b: &Box| Box {
            x1: s * b.x1 + tx,
            y1: s * b.y1 + ty,
            x2: s * b.x2 + tx,
            y2: s * b.y2 + ty,
        };
        let (l2, _) = align_loss(&[(tf(&body), tf(&moved))], &cfg).unwrap();
        assert!((l1 - l2).abs() < 1e-9, "{l1} vs {l2} after similarity map");
    }
    println!("criterion 3 (alignment loss: zero iff aligned, similarity-invariant): pass");
}

/// Quadratic-time reference: repeatedly take the highest-scored remaining
/// box (ties by x1 then y1) and delete everything overlapping it.
fn nms_reference(dets: &[Detection], thresh: f64) -> Vec<Detection> {
    let mut remaining: Vec<Detection> = dets.to_vec();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let a = &remaining[i];
            let b = &remaining[best];
            let better = a.score > b.score
                || (a.score == b.score
                    && (a.box_.x1 < b.box_.x1
                        || (a.box_.x1 == b.box_.x1 && a.box_.y1 < b.box_.y1)));
            if better {
                best = i;
            }
        }
        let winner = remaining.remove(best);
        remaining.retain(|d| iou(&d.box_, &winner.box_) <= thresh);
        kept.push(winner);
    }
    kept
}

#[test]
fn criterion_4_nms_oracle() {
    let mut rng = SplitMix64::new(4);
    for _ in 0..1000 {
        let n = rng.next_below(51) as usize;
        let dets: Vec<Detection> = (0..n)
            .map(|_| {
                let x1 = rng.uniform(0.0, 80.0);
                let y1 = rng.uniform(0.0, 80.0);
                Detection {
                    image_id: 0,
                    box_: Box {
                        x1,
                        y1,
                        x2: x1 + rng.uniform(1.0, 40.0),
                        y2: y1 + rng.uniform(1.0, 40.0),
                    },
                    // coarse scores force plenty of ties
                    score: (rng.next_below(10) as f64) / 10.0,
                    branch: Branch::Body,
                }
            })
            .collect();
        let thresh = rng.uniform(0.1, 0.9);
        let got = greedy_nms(&dets, thresh);
        let want = nms_reference(&dets, thresh);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!(g.box_ == w.box_ && g.score == w.score, "{g:?} vs {w:?}");
        }
    }
    println!("criterion 4 (greedy NMS vs quadratic reference, 1000 instances): pass");
}

fn random_gt(rng: &mut SplitMix64, id: i64) -> GroundTruth {
    let x1 = rng.uniform(0.0, 150.0);
    let y1 = rng.uniform(0.0, 150.0);
    let full = Box {
        x1,
        y1,
        x2: x1 + rng.uniform(20.0, 60.0),
        y2: y1 + rng.uniform(50.0, 120.0),
    };
    GroundTruth {
        full,
        visible: None,
        ignore: rng.next_f64() < 0.15,
        id,
    }
}

#[test]
fn criterion_5_metric_oracle() {
    let spec = SubsetSpec::all();
    let mut rng = SplitMix64::new(5);
    let mut tried = 0usize;
    let mut checked = 0usize;
    while checked < 500 {
        tried += 1;
        assert!(tried < 5000, "instance generator starved");
        let num_images = 1 + rng.next_below(3) as usize;
        let mut per_image: Vec<(Vec<Detection>, Vec<GroundTruth>)> = Vec::new();
        for img in 0..num_images {
            let gts: Vec<GroundTruth> = (0..rng.next_below(4)).map(|i| random_gt(&mut rng, i as i64)).collect();
            let nd = rng.next_below(11) as usize;
            let dets: Vec<Detection> = (0..nd)
                .map(|_| {
                    let b = if !gts.is_empty() && rng.next_f64() < 0.6 {
                        // near a ground truth so TPs actually happen
                        let g = &gts[rng.next_below(gts.len() as u64) as usize].full;
                        let dx = rng.uniform(-8.0, 8.0);
                        let dy = rng.uniform(-8.0, 8.0);
                        Box {
                            x1: g.x1 + dx,
                            y1: g.y1 + dy,
                            x2: g.x2 + dx,
                            y2: g.y2 + dy,
                        }
                    } else {
                        random_box(&mut rng)
                    };
                    Detection {
                        image_id: img as i64,
                        box_: b,
                        score: (rng.next_below(8) as f64) / 8.0, // duplicate scores likely
                        branch: Branch::Body,
                    }
                })
                .collect();
            per_image.push((dets, gts));
        }
        let results: Vec<MatchResult> = per_image
            .iter()
            .map(|(dets, gts)| match_detections(dets, gts, &subset_filter(gts, &spec), 0.5))
            .collect();
        let Ok(curve) = fppi_miss_curve(&results, num_images) else {
            continue; // no evaluated ground truth in this draw
        };
        checked += 1;

        // oracle: re-run the matching from scratch at every distinct score
        let mut cutoffs: Vec<f64> = per_image
            .iter()
            .flat_map(|(dets, _)| dets.iter().map(|d| d.score))
            .collect();
        cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        cutoffs.dedup();
        let num_gt: usize = results.iter().map(|r| r.num_evaluated_gt).sum();
        let expected: Vec<(f64, f64)> = cutoffs
            .iter()
            .map(|&cut| {
                let mut tp = 0usize;
                let mut fp = 0usize;
                for (dets, gts) in &per_image {
                    let subset_dets: Vec<Detection> =
                        dets.iter().filter(|d| d.score >= cut).cloned().collect();
                    let res =
                        match_detections(&subset_dets, gts, &subset_filter(gts, &spec), 0.5);
                    for (_, st) in res.dets {
                        match st {
                            DetStatus::TruePositive => tp += 1,
                            DetStatus::FalsePositive => fp += 1,
                            DetStatus::Ignored => {}
                        }
                    }
                }
                (
                    fp as f64 / num_images as f64,
                    1.0 - tp as f64 / num_gt as f64,
                )
            })
            .collect();
        if cutoffs.is_empty() {
            assert_eq!(curve.points, vec![(0.0, 1.0)]);
        } else {
            assert_eq!(curve.points, expected);
        }

        // log-average against a literal left-step lookup on the oracle points
        let refs = default_fppi_refs();
        let mr = log_average_miss_rate(&curve, &refs);
        let mut log_sum = 0.0;
        for &r in &refs {
            let mut sample = 1.0;
            for &(fppi, miss) in &curve.points {
                if fppi <= r {
                    sample = miss;
                }
            }
            log_sum += sample.max(MISS_RATE_FLOOR).ln();
        }
        let want = (log_sum / refs.len() as f64).exp();
        assert_eq!(mr, want);
    }

    // no detections at all: every ground truth is missed
    let gts = vec![GroundTruth {
        full: Box { x1: 0.0, y1: 0.0, x2: 40.0, y2: 100.0 },
        visible: None,
        ignore: false,
        id: 0,
    }];
    let res = match_detections(&[], &gts, &subset_filter(&gts, &spec), 0.5);
    let curve = fppi_miss_curve(&[res], 1).unwrap();
    assert_eq!(log_average_miss_rate(&curve, &default_fppi_refs()), 1.0);

    // perfect detector: every sample sits on the clamp floor
    let det = Detection {
        image_id: 0,
        box_: gts[0].full,
        score: 1.0,
        branch: Branch::Body,
    };
    let res = match_detections(&[det], &gts, &subset_filter(&gts, &spec), 0.5);
    let curve = fppi_miss_curve(&[res], 1).unwrap();
    let mr = log_average_miss_rate(&curve, &default_fppi_refs());
    assert!((mr / MISS_RATE_FLOOR - 1.0).abs() < 1e-12, "mr = {mr}");

    println!("criterion 5 (FPPI curve and log-average vs brute force, 500 instances): pass");
}

#[test]
fn criterion_6_label_conflict() {
    let gt_box = Box { x1: 0.0, y1: 0.0, x2: 41.0, y2: 100.0 };
    let roi = Box { x1: 0.0, y1: 20.0, x2: 41.0, y2: 120.0 };

    // independent overlap oracle: direct interval arithmetic, no library calls
    let overlap = |a: &Box, b: &Box| {
        let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
        let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
        let inter = w * h;
        let area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
        let area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
        inter / (area_a + area_b - inter)
    };

    let body_iou = iou(&roi, &gt_box);
    assert!((body_iou - 2.0 / 3.0).abs() < 1e-12, "body IoU {body_iou}");
    assert!((body_iou - overlap(&roi, &gt_box)).abs() < 1e-15);

    let spec = PartSpec::s_head();
    let head_iou = iou(&cut_part(&roi, &spec), &cut_part(&gt_box, &spec));
    assert!((head_iou - 0.25).abs() < 1e-12, "head IoU {head_iou}");
    assert!((head_iou - overlap(&cut_part(&roi, &spec), &cut_part(&gt_box, &spec))).abs() < 1e-15);

    let gts = vec![GroundTruth { full: gt_box, visible: None, ignore: false, id: 0 }];
    let labels = assign_labels(&[roi], &gts, &AssignConfig::default()).unwrap();
    assert_eq!(labels[0].body_label, Label::Positive);
    assert_eq!(labels[0].head_label, Label::Negative);
    println!("criterion 6 (conflicting body/head labels on the constructed pair): pass");
}

#[test]
fn criterion_7_quantile_endpoints() {
    // 11 uniformly spaced heights, 10 bins: endpoints are the grid itself
    let grid: Vec<f64> = (0..=10).map(|k| 50.0 + 10.0 * k as f64).collect();
    let got = quantized_scales(&grid, 10).unwrap();
    assert_eq!(got, grid);

    // sort-based oracle on random data
    let mut rng = SplitMix64::new(7);
    let heights: Vec<f64> = (0..1000).map(|_| rng.uniform(30.0, 400.0)).collect();
    for bins in [1usize, 3, 10] {
        let got = quantized_scales(&heights, bins).unwrap();
        let mut sorted = heights.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let want: Vec<f64> = (0..=bins)
            .map(|k| {
                let pos = k as f64 / bins as f64 * (n - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                let frac = pos - lo as f64;
                sorted[lo] + (sorted[hi] - sorted[lo]) * frac
            })
            .collect();
        assert_eq!(got, want, "bins = {bins}");
    }
    println!("criterion 7 (quantile endpoints: uniform grid identity and sort oracle): pass");
}

#[test]
fn criterion_8_fusion_beats_body_only() {
    let start = Instant::now();
    let scene = SceneConfig { occlusion_prob: 0.5, seed: 42, ..SceneConfig::default() };
    let cfg = RunConfig::default();
    let report = run_benchmark(&scene, &ScorerConfig::default(), &cfg.fusion, &cfg.eval, 200)
        .unwrap();
    let body = report.configs.iter().find(|c| c.name == "body-only").unwrap();
    let fused = report.configs.iter().find(|c| c.name == "fused").unwrap();
    for (b, f) in body.ar.iter().zip(&fused.ar) {
        assert_eq!(b.0, f.0);
        assert!(
            f.1 >= b.1,
            "fused AR@{} = {} < body-only {}",
            f.0,
            f.1,
            b.1
        );
    }
    assert!(
        fused.mr_heavy <= body.mr_heavy,
        "fused heavy log-average {} > body-only {}",
        fused.mr_heavy,
        body.mr_heavy
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 8 (200-image benchmark: fused AR >= body-only, heavy log-average <=): pass"
    );
}

#[test]
fn criterion_9_byte_identical_runs() {
    let run = |dir: &std::path::Path| {
        let out = dir.join("sim");
        let code = cli_dispatch([
            "pedkit",
            "simulate",
            "--scenes",
            "30",
            "--occlusion",
            "0.5",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let code = cli_dispatch([
            "pedkit",
            "eval",
            "--gt",
            out.join("annotations.json").to_str().unwrap(),
            "--dets",
            out.join("detections_fused.json").to_str().unwrap(),
            "--out-csv",
            dir.join("eval.csv").to_str().unwrap(),
            "--out-svg",
            dir.join("eval.svg").to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for rel in [
        "sim/annotations.json",
        "sim/detections_body.json",
        "sim/detections_head.json",
        "sim/detections_fused.json",
        "sim/report.csv",
        "sim/report.svg",
        "sim/curves_heavy.svg",
        "eval.csv",
        "eval.svg",
    ] {
        let fa = std::fs::read(a.path().join(rel)).unwrap();
        let fb = std::fs::read(b.path().join(rel)).unwrap();
        assert_eq!(fa, fb, "{rel} differs between identical runs");
    }
    println!("criterion 9 (simulate + eval twice, byte-identical outputs): pass");
}
