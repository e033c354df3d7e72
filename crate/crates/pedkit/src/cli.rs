//! CLI front door. Exit codes: 0 success, 1 validation/runtime failure,
//! 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assignment::{
    assign_labels, ignore_filter, visible_ratio_filter, GroundTruth, Label,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    average_recall_curve, fppi_miss_curve, log_average_miss_rate, match_detections,
    subset_filter, FppiCurve, MatchResult, SubsetSpec,
};
use crate::fusion::{pipeline_fuse, Detection};
use crate::geometry::{cut_part, PartSpec};
use crate::io::{
    parse_annotations, parse_detections, write_annotations, write_detections, AnnotationFile,
    AnnotationRecord, DetectionFile, ImageRecord,
};
use crate::losses::gradient_verification_suite;
use crate::synth::{pipeline_outputs, run_benchmark, simulate_images, AR_BUDGETS};

pub const CSV_VERSION: &str = "pedkit-csv v1";

#[derive(Parser, Debug)]
#[command(name = "pedkit", version, about = "Pedestrian detection geometry, losses and evaluation toolkit")]
struct Cli {
    /// Run configuration file (JSON); PEDKIT_CONFIG is consulted when absent.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write s-head boxes for every non-ignore annotation.
    DeriveHeads {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Anchor utilities.
    Anchors {
        #[command(subcommand)]
        command: AnchorsCommand,
    },
    /// Dual-branch label assignment for proposals against annotations.
    Assign {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        proposals: PathBuf,
        /// Output CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    Losscheck {
        /// Random evaluation points per check.
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Fuse body and s-head detection files.
    Fuse {
        #[arg(long)]
        body: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nms_iou: Option<f64>,
        #[arg(long)]
        max_keep: Option<usize>,
        /// Skip the per-branch NMS pass before merging.
        #[arg(long)]
        no_prenms: bool,
    },
    /// FPPI-miss-rate evaluation: MR^-2 plus the full curve.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        /// reasonable | heavy | all | custom (custom reads the config's eval.subset).
        #[arg(long, default_value = "reasonable")]
        subset: String,
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
    /// Average recall of the top-k proposals per image.
    ArCurve {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,100,300")]
        budgets: Vec<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
    /// Generate the synthetic benchmark and its comparison report.
    Simulate {
        #[arg(long, default_value_t = 200)]
        scenes: usize,
        /// Override the configured occlusion probability.
        #[arg(long)]
        occlusion: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum AnchorsCommand {
    /// Print the quantile-bin scale endpoints of an annotation file as CSV.
    Quantize {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse and run; returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.scene.seed = seed;
    }
    match cli.command {
        Command::DeriveHeads { annotations, out } => derive_heads(&annotations, &out),
        Command::Anchors {
            command: AnchorsCommand::Quantize {
                annotations,
                bins,
                out,
            },
        } => quantize(&cfg, &annotations, bins, out.as_deref()),
        Command::Assign {
            annotations,
            proposals,
            out,
        } => assign(&cfg, &annotations, &proposals, out.as_deref()),
        Command::Losscheck { points } => losscheck(cfg.scene.seed, points),
        Command::Fuse {
            body,
            head,
            out,
            nms_iou,
            max_keep,
            no_prenms,
        } => {
            let mut fusion = cfg.fusion.clone();
            if let Some(v) = nms_iou {
                fusion.nms_iou = v;
            }
            if let Some(v) = max_keep {
                fusion.max_keep = v;
            }
            if no_prenms {
                fusion.per_branch_prenms = false;
            }
            fusion.validate()?;
            fuse(&fusion, &body, &head, &out)
        }
        Command::Eval {
            gt,
            dets,
            subset,
            iou,
            out_csv,
            out_svg,
        } => {
            let spec = resolve_subset(&subset, &cfg)?;
            let iou = iou.unwrap_or(cfg.eval.iou_thresh);
            eval(&cfg, &spec, iou, &gt, &dets, out_csv.as_deref(), out_svg.as_deref())
        }
        Command::ArCurve {
            gt,
            proposals,
            budgets,
            out_csv,
            out_svg,
        } => ar_curve(&gt, &proposals, &budgets, out_csv.as_deref(), out_svg.as_deref()),
        Command::Simulate {
            scenes,
            occlusion,
            out,
        } => {
            if let Some(p) = occlusion {
                cfg.scene.occlusion_prob = p;
            }
            cfg.validate()?;
            simulate(&cfg, scenes, &out)
        }
    }
}

fn resolve_subset(name: &str, cfg: &RunConfig) -> Result<SubsetSpec> {
    match name {
        "reasonable" => Ok(SubsetSpec::reasonable()),
        "heavy" => Ok(SubsetSpec::heavy()),
        "all" => Ok(SubsetSpec::all()),
        "custom" => Ok(cfg.eval.subset.clone()),
        other => Err(Error::InvalidConfig(format!(
            "unknown subset '{other}' (expected reasonable, heavy, all or custom)"
        ))),
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn derive_heads(annotations: &Path, out: &Path) -> Result<()> {
    let file = parse_annotations(annotations)?;
    let spec = PartSpec::s_head();
    let derived = AnnotationFile {
        images: file
            .images
            .iter()
            .map(|img| ImageRecord {
                id: img.id,
                width: img.width,
                height: img.height,
                annotations: img
                    .annotations
                    .iter()
                    .filter(|a| !a.ignore)
                    .map(|a| {
                        let [x1, y1, x2, y2] = a.bbox;
                        let head = cut_part(
                            &crate::geometry::Box { x1, y1, x2, y2 },
                            &spec,
                        );
                        AnnotationRecord {
                            bbox: [head.x1, head.y1, head.x2, head.y2],
                            vis_bbox: None,
                            ignore: false,
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    write_annotations(out, &derived)
}

fn quantize(
    cfg: &RunConfig,
    annotations: &Path,
    bins: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let file = parse_annotations(annotations)?;
    let heights: Vec<f64> = file
        .images
        .iter()
        .flat_map(|img| {
            img.annotations
                .iter()
                .filter(|a| !a.ignore)
                .map(|a| a.bbox[3] - a.bbox[1])
        })
        .collect();
    let bins = bins.unwrap_or(cfg.anchors.num_bins);
    let scales = crate::anchors::quantized_scales(&heights, bins)?;
    let mut csv = format!("# {CSV_VERSION} anchor-scales\nendpoint\n");
    for s in scales {
        csv.push_str(&format!("{s}\n"));
    }
    emit(out, &csv)
}

fn group_by_image(dets: &[Detection]) -> BTreeMap<i64, Vec<Detection>> {
    let mut map: BTreeMap<i64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        map.entry(d.image_id).or_default().push(d.clone());
    }
    map
}

fn label_str(l: Label) -> &'static str {
    match l {
        Label::Positive => "positive",
        Label::Negative => "negative",
        Label::Excluded => "excluded",
    }
}

fn assign(cfg: &RunConfig, annotations: &Path, proposals: &Path, out: Option<&Path>) -> Result<()> {
    let ann = parse_annotations(annotations)?;
    let dets = parse_detections(proposals)?.to_detections();
    let grouped = group_by_image(&dets);
    for id in grouped.keys() {
        if !ann.images.iter().any(|img| img.id == *id) {
            return Err(Error::InvalidConfig(format!(
                "proposal image id {id} not present in the annotation file"
            )));
        }
    }
    let mut csv = format!(
        "# {CSV_VERSION} roi-labels\nimage_id,roi,x1,y1,x2,y2,body_label,head_label,matched_gt_body,matched_gt_head\n"
    );
    for img in &ann.images {
        let gts = ann.ground_truths(img);
        let rois: Vec<crate::geometry::Box> = grouped
            .get(&img.id)
            .map(|v| v.iter().map(|d| d.box_).collect())
            .unwrap_or_default();
        if rois.is_empty() {
            continue;
        }
        let mut labels = assign_labels(&rois, &gts, &cfg.assign)?;
        let ignore_regions: Vec<crate::geometry::Box> =
            gts.iter().filter(|g| g.ignore).map(|g| g.full).collect();
        for (l, (_, excluded)) in labels
            .iter_mut()
            .zip(ignore_filter(&rois, &ignore_regions, cfg.assign.ignore_ioa))
        {
            if excluded {
                l.body_label = Label::Excluded;
                l.head_label = Label::Excluded;
            }
        }
        if let Some(min_ratio) = cfg.assign.visible_ratio_min {
            labels = visible_ratio_filter(&labels, &gts, min_ratio);
        }
        for (i, (roi, l)) in rois.iter().zip(&labels).enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                img.id,
                i,
                roi.x1,
                roi.y1,
                roi.x2,
                roi.y2,
                label_str(l.body_label),
                label_str(l.head_label),
                l.matched_gt_body.map(|v| v.to_string()).unwrap_or_default(),
                l.matched_gt_head.map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
    }
    emit(out, &csv)
}

fn losscheck(seed: u64, points: usize) -> Result<()> {
    let checks = gradient_verification_suite(seed, points);
    let mut csv = format!("# {CSV_VERSION} losscheck\ncheck,max_rel_error,threshold,status\n");
    let mut failed = false;
    for c in &checks {
        let status = if c.passed() { "pass" } else { "fail" };
        failed |= !c.passed();
        csv.push_str(&format!("{},{:e},{:e},{}\n", c.name, c.max_rel_error, c.threshold, status));
    }
    emit(None, &csv)?;
    if failed {
        Err(Error::InvalidConfig("gradient verification failed".into()))
    } else {
        Ok(())
    }
}

fn fuse(
    fusion: &crate::fusion::FusionConfig,
    body: &Path,
    head: &Path,
    out: &Path,
) -> Result<()> {
    let body = group_by_image(&parse_detections(body)?.to_detections());
    let head = group_by_image(&parse_detections(head)?.to_detections());
    let mut image_ids: Vec<i64> = body.keys().chain(head.keys()).copied().collect();
    image_ids.sort_unstable();
    image_ids.dedup();
    let empty = Vec::new();
    let mut fused = Vec::new();
    for id in image_ids {
        let b = body.get(&id).unwrap_or(&empty);
        let h = head.get(&id).unwrap_or(&empty);
        fused.extend(pipeline_fuse(b, h, fusion)?);
    }
    write_detections(out, &DetectionFile::from_detections(&fused))
}

fn curve_csv(curve: &FppiCurve, mr: f64, subset: &str) -> String {
    let mut csv = format!(
        "# {CSV_VERSION} fppi-curve subset={subset} mr2={mr}\nfppi,miss_rate\n"
    );
    for &(fppi, miss) in &curve.points {
        csv.push_str(&format!("{fppi},{miss}\n"));
    }
    csv
}

fn eval(
    cfg: &RunConfig,
    spec: &SubsetSpec,
    iou: f64,
    gt: &Path,
    dets: &Path,
    out_csv: Option<&Path>,
    out_svg: Option<&Path>,
) -> Result<()> {
    let ann = parse_annotations(gt)?;
    let dets = parse_detections(dets)?.to_detections();
    let grouped = group_by_image(&dets);
    for id in grouped.keys() {
        if !ann.images.iter().any(|img| img.id == *id) {
            return Err(Error::InvalidConfig(format!(
                "detection image id {id} not present in the annotation file"
            )));
        }
    }
    let empty = Vec::new();
    let results: Vec<MatchResult> = ann
        .images
        .iter()
        .map(|img| {
            let gts = ann.ground_truths(img);
            let statuses = subset_filter(&gts, spec);
            let image_dets = grouped.get(&img.id).unwrap_or(&empty);
            match_detections(image_dets, &gts, &statuses, iou)
        })
        .collect();
    let curve = fppi_miss_curve(&results, ann.images.len())?;
    let mr = log_average_miss_rate(&curve, &cfg.eval.fppi_refs);
    println!("subset={} iou={} mr2={}", spec.name, iou, mr);
    let csv = curve_csv(&curve, mr, &spec.name);
    if out_csv.is_some() {
        emit(out_csv, &csv)?;
    } else {
        emit(None, &csv)?;
    }
    if let Some(path) = out_svg {
        let chart = crate::plot::line_chart(
            &crate::plot::ChartSpec {
                title: "FPPI vs miss rate",
                x_label: "log10 FPPI",
                y_label: "miss rate",
                log_x: true,
            },
            &[crate::plot::Series {
                name: &spec.name,
                points: &curve.points,
            }],
        );
        std::fs::write(path, chart)?;
    }
    Ok(())
}

fn ar_curve(
    gt: &Path,
    proposals: &Path,
    budgets: &[usize],
    out_csv: Option<&Path>,
    out_svg: Option<&Path>,
) -> Result<()> {
    let ann = parse_annotations(gt)?;
    let dets = parse_detections(proposals)?.to_detections();
    let grouped = group_by_image(&dets);
    let empty = Vec::new();
    let props: Vec<Vec<Detection>> = ann
        .images
        .iter()
        .map(|img| grouped.get(&img.id).unwrap_or(&empty).clone())
        .collect();
    let gts: Vec<Vec<GroundTruth>> = ann.images.iter().map(|img| ann.ground_truths(img)).collect();
    let curve = average_recall_curve(&props, &gts, budgets)?;
    let mut csv = format!("# {CSV_VERSION} ar-curve\nbudget,average_recall\n");
    for &(k, ar) in &curve {
        csv.push_str(&format!("{k},{ar}\n"));
    }
    emit(out_csv, &csv)?;
    if let Some(path) = out_svg {
        let points: Vec<(f64, f64)> = curve.iter().map(|&(k, ar)| (k as f64, ar)).collect();
        let chart = crate::plot::line_chart(
            &crate::plot::ChartSpec {
                title: "Average recall vs proposal budget",
                x_label: "proposals per image",
                y_label: "average recall",
                log_x: false,
            },
            &[crate::plot::Series {
                name: "proposals",
                points: &points,
            }],
        );
        std::fs::write(path, chart)?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, scenes: usize, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let images = simulate_images(&cfg.scene, &cfg.scorer, scenes)?;

    let annotations = AnnotationFile {
        images: images
            .iter()
            .enumerate()
            .map(|(i, img)| ImageRecord {
                id: i as i64,
                width: img.scene.image_w,
                height: img.scene.image_h,
                annotations: img
                    .scene
                    .gts
                    .iter()
                    .map(|g| AnnotationRecord {
                        bbox: [g.full.x1, g.full.y1, g.full.x2, g.full.y2],
                        vis_bbox: g.visible.map(|v| [v.x1, v.y1, v.x2, v.y2]),
                        ignore: g.ignore,
                    })
                    .collect(),
            })
            .collect(),
    };
    write_annotations(&out.join("annotations.json"), &annotations)?;

    let mut body_raw = Vec::new();
    let mut head_raw = Vec::new();
    let mut fused_all = Vec::new();
    for img in &images {
        body_raw.extend(img.body_dets.clone());
        head_raw.extend(img.head_dets.clone());
        let (_, _, fused) = pipeline_outputs(img, &cfg.fusion)?;
        fused_all.extend(fused);
    }
    write_detections(
        &out.join("detections_body.json"),
        &DetectionFile::from_detections(&body_raw),
    )?;
    write_detections(
        &out.join("detections_head.json"),
        &DetectionFile::from_detections(&head_raw),
    )?;
    write_detections(
        &out.join("detections_fused.json"),
        &DetectionFile::from_detections(&fused_all),
    )?;

    let report = run_benchmark(&cfg.scene, &cfg.scorer, &cfg.fusion, &cfg.eval, scenes)?;
    let mut csv = format!(
        "# {CSV_VERSION} benchmark\nconfig,ar{},ar{},ar{},mr_reasonable,mr_heavy\n",
        AR_BUDGETS[0], AR_BUDGETS[1], AR_BUDGETS[2]
    );
    for c in &report.configs {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.name, c.ar[0].1, c.ar[1].1, c.ar[2].1, c.mr_reasonable, c.mr_heavy
        ));
    }
    std::fs::write(out.join("report.csv"), &csv)?;

    let ar_points: Vec<Vec<(f64, f64)>> = report
        .configs
        .iter()
        .map(|c| c.ar.iter().map(|&(k, ar)| (k as f64, ar)).collect())
        .collect();
    let series: Vec<crate::plot::Series> = report
        .configs
        .iter()
        .zip(&ar_points)
        .map(|(c, points)| crate::plot::Series {
            name: &c.name,
            points,
        })
        .collect();
    let chart = crate::plot::line_chart(
        &crate::plot::ChartSpec {
            title: "Average recall vs proposal budget",
            x_label: "proposals per image",
            y_label: "average recall",
            log_x: false,
        },
        &series,
    );
    std::fs::write(out.join("report.svg"), chart)?;

    let heavy_series: Vec<crate::plot::Series> = report
        .configs
        .iter()
        .map(|c| crate::plot::Series {
            name: &c.name,
            points: &c.curve_heavy.points,
        })
        .collect();
    let chart = crate::plot::line_chart(
        &crate::plot::ChartSpec {
            title: "Heavy subset: FPPI vs miss rate",
            x_label: "log10 FPPI",
            y_label: "miss rate",
            log_x: true,
        },
        &heavy_series,
    );
    std::fs::write(out.join("curves_heavy.svg"), chart)?;

    println!("wrote benchmark for {scenes} scenes to {}", out.display());
    Ok(())
}
