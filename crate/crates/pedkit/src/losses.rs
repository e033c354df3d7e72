//! The RCNN loss stack: per-branch classification + regression losses, the
//! self-supervised alignment loss over cut/expanded virtual regions, OHEM
//! selection, and analytic gradients checked against central differences.
//!
//! The alignment loss takes paired absolute boxes (body t, s-head s), forms
//! the virtual regions t_cut = cut(t) and s_exp = expand(s), and penalizes
//! SmoothL1 of the normalized-delta residuals encode(t, s_exp) and
//! encode(s, t_cut), averaged over pairs. Residuals live in delta space
//! (center offsets over reference size, log size ratios), which makes the
//! loss invariant to joint translation and uniform scaling of a pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Box, PartSpec};

/// Center-offset / log-size parameterization of a box against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionTarget {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl RegressionTarget {
    pub fn as_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dw, self.dh]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            dx: a[0],
            dy: a[1],
            dw: a[2],
            dh: a[3],
        }
    }
}

pub fn encode_deltas(b: &Box, reference: &Box) -> RegressionTarget {
    let (wr, hr) = (reference.width(), reference.height());
    RegressionTarget {
        dx: (b.center_x() - reference.center_x()) / wr,
        dy: (b.center_y() - reference.center_y()) / hr,
        dw: (b.width() / wr).ln(),
        dh: (b.height() / hr).ln(),
    }
}

pub fn decode_deltas(t: &RegressionTarget, reference: &Box) -> Box {
    let (wr, hr) = (reference.width(), reference.height());
    let cx = reference.center_x() + t.dx * wr;
    let cy = reference.center_y() + t.dy * hr;
    let w = wr * t.dw.exp();
    let h = hr * t.dh.exp();
    Box {
        x1: cx - w / 2.0,
        y1: cy - h / 2.0,
        x2: cx + w / 2.0,
        y2: cy + h / 2.0,
    }
}

/// SmoothL1 value and derivative: quadratic inside |x| < beta, linear
/// outside, C1 at the junction.
pub fn smooth_l1(x: f64, beta: f64) -> (f64, f64) {
    if x.abs() < beta {
        (0.5 * x * x / beta, x / beta)
    } else {
        (x.abs() - 0.5 * beta, x.signum())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub smooth_l1_beta: f64,
    pub align_weight: f64,
    pub ohem_keep: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            smooth_l1_beta: 1.0,
            align_weight: 1.0,
            ohem_keep: 128,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.align_weight < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be >= 0".into()));
        }
        if self.smooth_l1_beta <= 0.0 {
            return Err(Error::InvalidConfig("smooth_l1_beta must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

/// One branch's output for one RoI: post-softmax pedestrian probability and
/// regression deltas relative to the reference box.
#[derive(Debug, Clone, Copy)]
pub struct BranchPrediction {
    pub score: f64,
    pub target: RegressionTarget,
    pub reference: Box,
}

/// Gradient of a branch loss w.r.t. one prediction.
#[derive(Debug, Clone, Copy, Default)]
pub struct PredictionGrad {
    pub d_score: f64,
    pub d_target: [f64; 4],
}

/// Mean cross-entropy over the batch plus alpha times the mean (over
/// positives) SmoothL1 of the four delta residuals.
pub fn branch_loss(
    preds: &[BranchPrediction],
    labels: &[SampleLabel],
    targets: &[Option<RegressionTarget>],
    cfg: &LossConfig,
) -> Result<(f64, Vec<PredictionGrad>)> {
    cfg.validate()?;
    if preds.is_empty() {
        return Err(Error::EmptyInput("branch_loss needs at least one RoI"));
    }
    if preds.len() != labels.len() || preds.len() != targets.len() {
        return Err(Error::InvalidConfig("branch_loss inputs must be aligned".into()));
    }
    let n = preds.len() as f64;
    let n_pos = labels.iter().filter(|l| **l == SampleLabel::Positive).count();
    let mut grads = vec![PredictionGrad::default(); preds.len()];
    let mut cls = 0.0;
    let mut reg = 0.0;
    for (i, (pred, label)) in preds.iter().zip(labels).enumerate() {
        match label {
            SampleLabel::Positive => {
                cls += -pred.score.ln();
                grads[i].d_score = -1.0 / (pred.score * n);
                let target = targets[i].ok_or(Error::InvalidConfig(
                    "positive sample without a regression target".into(),
                ))?;
                let diff_pred = pred.target.as_array();
                let diff_tgt = target.as_array();
                for c in 0..4 {
                    let (v, d) = smooth_l1(diff_pred[c] - diff_tgt[c], cfg.smooth_l1_beta);
                    reg += v;
                    grads[i].d_target[c] = cfg.alpha * d / n_pos as f64;
                }
            }
            SampleLabel::Negative => {
                cls += -(1.0 - pred.score).ln();
                grads[i].d_score = 1.0 / ((1.0 - pred.score) * n);
            }
        }
    }
    let loss = cls / n
        + if n_pos > 0 {
            cfg.alpha * reg / n_pos as f64
        } else {
            0.0
        };
    Ok((loss, grads))
}

/// Gradient of the alignment loss w.r.t. the eight coordinates of one pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairGrad {
    pub d_body: [f64; 4],
    pub d_head: [f64; 4],
}

type Mat4 = [[f64; 4]; 4];

fn matvec_t(m: &Mat4, v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (r, row) in m.iter().enumerate() {
        for c in 0..4 {
            out[c] += row[c] * v[r];
        }
    }
    out
}

/// Linear matrix of the cut transform for a part spec (body coords -> part
/// coords). Expand is its exact inverse.
fn cut_matrix(spec: &PartSpec) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    // px1 = (1-fx1) x1 + fx1 x2 ; px2 = (1-fx2) x1 + fx2 x2, same for y
    m[0][0] = 1.0 - spec.fx1;
    m[0][2] = spec.fx1;
    m[2][0] = 1.0 - spec.fx2;
    m[2][2] = spec.fx2;
    m[1][1] = 1.0 - spec.fy1;
    m[1][3] = spec.fy1;
    m[3][1] = 1.0 - spec.fy2;
    m[3][3] = spec.fy2;
    m
}

fn expand_matrix(spec: &PartSpec) -> Mat4 {
    let kx = spec.fx2 - spec.fx1;
    let ky = spec.fy2 - spec.fy1;
    let mut m = [[0.0; 4]; 4];
    // x1 = (1 + fx1/kx) px1 - (fx1/kx) px2 ; x2 = (1 - c) px1 + c px2
    // with c = (1 - fx1)/kx, same for y
    let ax = spec.fx1 / kx;
    let cx = (1.0 - spec.fx1) / kx;
    m[0][0] = 1.0 + ax;
    m[0][2] = -ax;
    m[2][0] = 1.0 - cx;
    m[2][2] = cx;
    let ay = spec.fy1 / ky;
    let cy = (1.0 - spec.fy1) / ky;
    m[1][1] = 1.0 + ay;
    m[1][3] = -ay;
    m[3][1] = 1.0 - cy;
    m[3][3] = cy;
    m
}

fn apply(m: &Mat4, v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (r, row) in m.iter().enumerate() {
        for (c, coef) in row.iter().enumerate() {
            out[r] += coef * v[c];
        }
    }
    out
}

/// Deltas of `b` against `r` plus the 4x4 jacobians w.r.t. both boxes.
/// Coordinates ordered (x1, y1, x2, y2); deltas ordered (dx, dy, dw, dh).
fn encode_with_jacobians(b: &[f64; 4], r: &[f64; 4]) -> ([f64; 4], Mat4, Mat4) {
    let (wb, hb) = (b[2] - b[0], b[3] - b[1]);
    let (wr, hr) = (r[2] - r[0], r[3] - r[1]);
    let dx = (0.5 * (b[0] + b[2]) - 0.5 * (r[0] + r[2])) / wr;
    let dy = (0.5 * (b[1] + b[3]) - 0.5 * (r[1] + r[3])) / hr;
    let dw = (wb / wr).ln();
    let dh = (hb / hr).ln();

    let mut jb = [[0.0; 4]; 4];
    let mut jr = [[0.0; 4]; 4];
    // dx row
    jb[0][0] = 0.5 / wr;
    jb[0][2] = 0.5 / wr;
    jr[0][0] = (-0.5 + dx) / wr;
    jr[0][2] = (-0.5 - dx) / wr;
    // dy row
    jb[1][1] = 0.5 / hr;
    jb[1][3] = 0.5 / hr;
    jr[1][1] = (-0.5 + dy) / hr;
    jr[1][3] = (-0.5 - dy) / hr;
    // dw row
    jb[2][0] = -1.0 / wb;
    jb[2][2] = 1.0 / wb;
    jr[2][0] = 1.0 / wr;
    jr[2][2] = -1.0 / wr;
    // dh row
    jb[3][1] = -1.0 / hb;
    jb[3][3] = 1.0 / hb;
    jr[3][1] = 1.0 / hr;
    jr[3][3] = -1.0 / hr;

    ([dx, dy, dw, dh], jb, jr)
}

/// Alignment loss over (body, s-head) pairs with gradients w.r.t. all eight
/// coordinates per pair. Zero exactly when every head equals the cut of its
/// body.
pub fn align_loss(pairs: &[(Box, Box)], cfg: &LossConfig) -> Result<(f64, Vec<PairGrad>)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("align_loss needs at least one pair"));
    }
    let spec = PartSpec::s_head();
    let cut_m = cut_matrix(&spec);
    let exp_m = expand_matrix(&spec);
    let np = pairs.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(pairs.len());
    for (body, head) in pairs {
        let t = [body.x1, body.y1, body.x2, body.y2];
        let s = [head.x1, head.y1, head.x2, head.y2];
        let s_exp = apply(&exp_m, &s);
        let t_cut = apply(&cut_m, &t);

        let (e1, jb1, jr1) = encode_with_jacobians(&t, &s_exp);
        let (e2, jb2, jr2) = encode_with_jacobians(&s, &t_cut);

        let mut g1 = [0.0; 4];
        let mut g2 = [0.0; 4];
        for c in 0..4 {
            let (v1, d1) = smooth_l1(e1[c], cfg.smooth_l1_beta);
            let (v2, d2) = smooth_l1(e2[c], cfg.smooth_l1_beta);
            total += v1 + v2;
            g1[c] = d1 / np;
            g2[c] = d2 / np;
        }

        let d_body_direct = matvec_t(&jb1, &g1);
        let d_body_via_cut = matvec_t(&cut_m, &matvec_t(&jr2, &g2));
        let d_head_direct = matvec_t(&jb2, &g2);
        let d_head_via_exp = matvec_t(&exp_m, &matvec_t(&jr1, &g1));
        let mut pg = PairGrad::default();
        for c in 0..4 {
            pg.d_body[c] = d_body_direct[c] + d_body_via_cut[c];
            pg.d_head[c] = d_head_direct[c] + d_head_via_exp[c];
        }
        grads.push(pg);
    }
    Ok((total / np, grads))
}

#[derive(Debug, Clone)]
pub struct LossReport {
    pub l_body: f64,
    pub l_head: f64,
    pub l_align: f64,
    pub l_total: f64,
    pub body_grads: Vec<PredictionGrad>,
    pub head_grads: Vec<PredictionGrad>,
    pub align_grads: Vec<PairGrad>,
}

/// Total RCNN loss: body branch + s-head branch + weighted alignment term.
/// An empty pair set contributes zero alignment loss (no positive-head RoIs
/// in the batch).
#[allow(clippy::too_many_arguments)]
pub fn rcnn_total_loss(
    body_preds: &[BranchPrediction],
    body_labels: &[SampleLabel],
    body_targets: &[Option<RegressionTarget>],
    head_preds: &[BranchPrediction],
    head_labels: &[SampleLabel],
    head_targets: &[Option<RegressionTarget>],
    pairs: &[(Box, Box)],
    cfg: &LossConfig,
) -> Result<LossReport> {
    let (l_body, body_grads) = branch_loss(body_preds, body_labels, body_targets, cfg)?;
    let (l_head, head_grads) = branch_loss(head_preds, head_labels, head_targets, cfg)?;
    let (l_align, align_grads) = if pairs.is_empty() {
        (0.0, Vec::new())
    } else {
        align_loss(pairs, cfg)?
    };
    Ok(LossReport {
        l_body,
        l_head,
        l_align,
        l_total: l_body + l_head + cfg.align_weight * l_align,
        body_grads,
        head_grads,
        align_grads,
    })
}

/// Indices of the `keep` largest losses, ties broken by lower index.
pub fn ohem_select(per_roi_losses: &[f64], keep: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..per_roi_losses.len()).collect();
    idx.sort_by(|&a, &b| {
        per_roi_losses[b]
            .partial_cmp(&per_roi_losses[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

/// Max relative error between the analytic gradient of `f` and central
/// finite differences at `point`.
pub fn finite_diff_check<F>(f: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(point);
    let mut worst = 0.0f64;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x).0;
        x[i] = orig - h;
        let down = f(&x).0;
        x[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1.0);
        worst = worst.max(rel);
    }
    worst
}

/// Outcome of one gradient verification check.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

/// Verify the analytic gradients of smooth_l1, branch_loss and align_loss
/// against central finite differences at `points` random non-kink points
/// each. The finite-difference comparison is the oracle here: a check fails
/// when the relative error exceeds 1e-5.
pub fn gradient_verification_suite(seed: u64, points: usize) -> Vec<GradCheck> {
    use crate::geometry::cut_part;
    use crate::rng::SplitMix64;
    let h = 1e-6;
    let threshold = 1e-5;
    let cfg = LossConfig::default();
    let mut rng = SplitMix64::new(seed);

    let mut sl1_err = 0.0f64;
    let f_sl1 = |x: &[f64]| {
        let (v, d) = smooth_l1(x[0], 1.0);
        (v, vec![d])
    };
    for _ in 0..points {
        let mut x = rng.uniform(-3.0, 3.0);
        while (x.abs() - 1.0).abs() < 1e-3 {
            x = rng.uniform(-3.0, 3.0);
        }
        sl1_err = sl1_err.max(finite_diff_check(f_sl1, &[x], h));
    }

    let mut branch_err = 0.0f64;
    for _ in 0..points {
        let n = 1 + rng.next_below(6) as usize;
        let mut labels = Vec::new();
        let mut targets = Vec::new();
        let mut flat = Vec::new();
        for _ in 0..n {
            let pos = rng.next_f64() < 0.5;
            labels.push(if pos { SampleLabel::Positive } else { SampleLabel::Negative });
            flat.push(rng.uniform(0.1, 0.9)); // score
            let mut tgt = [0.0; 4];
            for t in tgt.iter_mut() {
                // keep residuals away from the SmoothL1 kink at |x| = beta
                let mut pred = rng.uniform(-0.9, 0.9);
                let mut target = rng.uniform(-0.9, 0.9);
                while ((pred - target).abs() - cfg.smooth_l1_beta).abs() < 1e-3 {
                    pred = rng.uniform(-0.9, 0.9);
                    target = rng.uniform(-0.9, 0.9);
                }
                flat.push(pred);
                *t = target;
            }
            targets.push(if pos {
                Some(RegressionTarget::from_array(tgt))
            } else {
                None
            });
        }
        let labels2 = labels.clone();
        let targets2 = targets.clone();
        let f = move |x: &[f64]| {
            let reference = Box {
                x1: 0.0,
                y1: 0.0,
                x2: 1.0,
                y2: 1.0,
            };
            let preds: Vec<BranchPrediction> = x
                .chunks(5)
                .map(|c| BranchPrediction {
                    score: c[0],
                    target: RegressionTarget::from_array([c[1], c[2], c[3], c[4]]),
                    reference,
                })
                .collect();
            let (loss, grads) =
                branch_loss(&preds, &labels2, &targets2, &LossConfig::default()).unwrap();
            let mut flat_g = Vec::with_capacity(x.len());
            for g in grads {
                flat_g.push(g.d_score);
                flat_g.extend_from_slice(&g.d_target);
            }
            (loss, flat_g)
        };
        branch_err = branch_err.max(finite_diff_check(f, &flat, h));
    }

    let mut align_err = 0.0f64;
    let f_align = |x: &[f64]| {
        let pairs: Vec<(Box, Box)> = x
            .chunks(8)
            .map(|c| {
                (
                    Box {
                        x1: c[0],
                        y1: c[1],
                        x2: c[2],
                        y2: c[3],
                    },
                    Box {
                        x1: c[4],
                        y1: c[5],
                        x2: c[6],
                        y2: c[7],
                    },
                )
            })
            .collect();
        let (loss, grads) = align_loss(&pairs, &LossConfig::default()).unwrap();
        let mut flat = Vec::with_capacity(x.len());
        for g in grads {
            flat.extend_from_slice(&g.d_body);
            flat.extend_from_slice(&g.d_head);
        }
        (loss, flat)
    };
    for _ in 0..points {
        let n = 1 + rng.next_below(3) as usize;
        let mut point = Vec::new();
        for _ in 0..n {
            let x = rng.uniform(0.0, 500.0);
            let y = rng.uniform(0.0, 500.0);
            let hh = rng.uniform(50.0, 300.0);
            let body = Box {
                x1: x,
                y1: y,
                x2: x + 0.41 * hh,
                y2: y + hh,
            };
            let base = cut_part(&body, &PartSpec::s_head());
            let jitter = 0.1 * base.width();
            point.extend_from_slice(&[body.x1, body.y1, body.x2, body.y2]);
            point.extend_from_slice(&[
                base.x1 + rng.uniform(-jitter, jitter),
                base.y1 + rng.uniform(-jitter, jitter),
                base.x2 + rng.uniform(-jitter, jitter),
                base.y2 + rng.uniform(-jitter, jitter),
            ]);
        }
        align_err = align_err.max(finite_diff_check(f_align, &point, h));
    }

    vec![
        GradCheck {
            name: "smooth_l1".into(),
            max_rel_error: sl1_err,
            threshold,
        },
        GradCheck {
            name: "branch_loss".into(),
            max_rel_error: branch_err,
            threshold,
        },
        GradCheck {
            name: "align_loss".into(),
            max_rel_error: align_err,
            threshold,
        },
    ]
}
