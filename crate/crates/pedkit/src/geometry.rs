//! Box algebra and the cut/expand part transforms.
//!
//! All geometry is continuous: a box is four real corner coordinates with a
//! top-left origin and y growing downward. Degenerate (zero-area) boxes are
//! rejected at construction, so every `Box` has strictly positive width and
//! height. Part transforms map a body box to a fractional sub-rectangle
//! (`cut`) and back (`expand`); the two are exact inverses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Box {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidBox {
                x1,
                y1,
                x2,
                y2,
                reason: "non-finite coordinate",
            });
        }
        if x2 <= x1 || y2 <= y1 {
            return Err(Error::InvalidBox {
                x1,
                y1,
                x2,
                y2,
                reason: "width and height must be strictly positive",
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    pub fn center_y(&self) -> f64 {
        0.5 * (self.y1 + self.y2)
    }
}

pub fn area(b: &Box) -> f64 {
    b.width() * b.height()
}

fn intersection_area(a: &Box, b: &Box) -> f64 {
    let w = a.x2.min(b.x2) - a.x1.max(b.x1);
    let h = a.y2.min(b.y2) - a.y1.max(b.y1);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

/// Intersection area over union area; 0 for disjoint boxes.
pub fn iou(a: &Box, b: &Box) -> f64 {
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (area(a) + area(b) - inter)
}

/// Intersection area over the area of `det`. This is the overlap measure
/// used against ignore regions: it saturates at 1 when the detection lies
/// entirely inside the region regardless of the region's size.
pub fn intersection_over_area(det: &Box, region: &Box) -> f64 {
    intersection_area(det, region) / area(det)
}

/// Fractional sub-rectangle of a body box, in unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub fx1: f64,
    pub fy1: f64,
    pub fx2: f64,
    pub fy2: f64,
}

impl PartSpec {
    pub fn new(fx1: f64, fy1: f64, fx2: f64, fy2: f64) -> Result<Self> {
        let ok = (0.0..1.0).contains(&fx1)
            && (0.0..1.0).contains(&fy1)
            && fx1 < fx2
            && fy1 < fy2
            && fx2 <= 1.0
            && fy2 <= 1.0;
        if !ok {
            return Err(Error::InvalidPartSpec {
                fx1,
                fy1,
                fx2,
                fy2,
                reason: "fractions must satisfy 0 <= f1 < f2 <= 1 on both axes",
            });
        }
        Ok(Self { fx1, fy1, fx2, fy2 })
    }

    /// Fraction of the body area this part covers, in (0, 1].
    pub fn fractional_area(&self) -> f64 {
        (self.fx2 - self.fx1) * (self.fy2 - self.fy1)
    }

    /// Upper 1/3, middle 2/3 of the body box: the semantic head region.
    pub fn s_head() -> Self {
        Self {
            fx1: 1.0 / 6.0,
            fy1: 0.0,
            fx2: 5.0 / 6.0,
            fy2: 1.0 / 3.0,
        }
    }
}

/// Cut the fractional part out of a body box.
///
/// For the s-head spec this is H = (x1 + w/6, y1, x2 - w/6, y1 + h/3).
pub fn cut_part(b: &Box, spec: &PartSpec) -> Box {
    let w = b.width();
    let h = b.height();
    Box {
        x1: b.x1 + spec.fx1 * w,
        y1: b.y1 + spec.fy1 * h,
        x2: b.x1 + spec.fx2 * w,
        y2: b.y1 + spec.fy2 * h,
    }
}

/// Exact inverse of [`cut_part`]: recover the body box a part was cut from.
pub fn expand_part(p: &Box, spec: &PartSpec) -> Box {
    let w = p.width() / (spec.fx2 - spec.fx1);
    let h = p.height() / (spec.fy2 - spec.fy1);
    let x1 = p.x1 - spec.fx1 * w;
    let y1 = p.y1 - spec.fy1 * h;
    Box {
        x1,
        y1,
        x2: x1 + w,
        y2: y1 + h,
    }
}

/// Intersect a box with the image rectangle. `None` when there is no overlap
/// (an empty intersection is not a valid `Box`).
pub fn clip_to_image(b: &Box, width: f64, height: f64) -> Option<Box> {
    let x1 = b.x1.max(0.0);
    let y1 = b.y1.max(0.0);
    let x2 = b.x2.min(width);
    let y2 = b.y2.min(height);
    if x2 > x1 && y2 > y1 {
        Some(Box { x1, y1, x2, y2 })
    } else {
        None
    }
}

/// Named part specs: s-head, middle, lower, left, right. Every spec covers
/// exactly 2/9 of the body area so single-part experiments compare fairly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartPool {
    specs: BTreeMap<String, PartSpec>,
}

pub const PART_AREA: f64 = 2.0 / 9.0;

impl PartPool {
    pub fn new(specs: BTreeMap<String, PartSpec>) -> Result<Self> {
        for (name, spec) in &specs {
            if (spec.fractional_area() - PART_AREA).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "part '{name}' has fractional area {} (expected 2/9)",
                    spec.fractional_area()
                )));
            }
        }
        Ok(Self { specs })
    }

    pub fn default_pool() -> Self {
        let mut specs = BTreeMap::new();
        specs.insert("s-head".to_string(), PartSpec::s_head());
        specs.insert(
            "middle".to_string(),
            PartSpec {
                fx1: 1.0 / 6.0,
                fy1: 1.0 / 3.0,
                fx2: 5.0 / 6.0,
                fy2: 2.0 / 3.0,
            },
        );
        specs.insert(
            "lower".to_string(),
            PartSpec {
                fx1: 1.0 / 6.0,
                fy1: 2.0 / 3.0,
                fx2: 5.0 / 6.0,
                fy2: 1.0,
            },
        );
        specs.insert(
            "left".to_string(),
            PartSpec {
                fx1: 0.0,
                fy1: 1.0 / 6.0,
                fx2: 1.0 / 3.0,
                fy2: 5.0 / 6.0,
            },
        );
        specs.insert(
            "right".to_string(),
            PartSpec {
                fx1: 2.0 / 3.0,
                fy1: 1.0 / 6.0,
                fx2: 1.0,
                fy2: 5.0 / 6.0,
            },
        );
        Self::new(specs).expect("default part pool has equal 2/9 areas")
    }

    pub fn get(&self, name: &str) -> Option<&PartSpec> {
        self.specs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &PartSpec)> {
        self.specs.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> Box {
        Box::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn area_basic() {
        assert_eq!(area(&b(0.0, 0.0, 10.0, 10.0)), 100.0);
        assert_eq!(area(&b(10.0, 20.0, 70.0, 140.0)), 7200.0);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(Box::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(Box::new(0.0, 0.0, 10.0, 0.0).is_err());
        assert!(Box::new(0.0, 0.0, f64::NAN, 10.0).is_err());
    }

    #[test]
    fn iou_basic() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        let shifted = b(5.0, 0.0, 15.0, 10.0);
        assert!((iou(&a, &shifted) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &b(20.0, 20.0, 30.0, 30.0)), 0.0);
    }

    #[test]
    fn ioa_basic() {
        let det = b(2.0, 2.0, 4.0, 4.0);
        let region = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(intersection_over_area(&det, &region), 1.0);
        assert_eq!(
            intersection_over_area(&det, &b(20.0, 20.0, 30.0, 30.0)),
            0.0
        );
        let half = b(0.0, 0.0, 10.0, 5.0);
        assert_eq!(
            intersection_over_area(&b(0.0, 0.0, 10.0, 10.0), &half),
            0.5
        );
    }

    #[test]
    fn s_head_cut_matches_formula() {
        let body = b(10.0, 20.0, 70.0, 140.0);
        let head = cut_part(&body, &PartSpec::s_head());
        assert_eq!(head, b(20.0, 20.0, 60.0, 60.0));

        let body = b(0.0, 0.0, 6.0, 12.0);
        let head = cut_part(&body, &PartSpec::s_head());
        assert_eq!(head, b(1.0, 0.0, 5.0, 4.0));
    }

    #[test]
    fn s_head_area_ratio_is_two_ninths() {
        let body = b(10.0, 20.0, 70.0, 140.0);
        let head = cut_part(&body, &PartSpec::s_head());
        assert!((area(&head) / area(&body) - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn expand_inverts_cut() {
        let close = |a: &Box, w: &Box| {
            assert!(
                (a.x1 - w.x1).abs() < 1e-9
                    && (a.y1 - w.y1).abs() < 1e-9
                    && (a.x2 - w.x2).abs() < 1e-9
                    && (a.y2 - w.y2).abs() < 1e-9,
                "{a:?} vs {w:?}"
            );
        };
        let head = b(20.0, 20.0, 60.0, 60.0);
        close(
            &expand_part(&head, &PartSpec::s_head()),
            &b(10.0, 20.0, 70.0, 140.0),
        );
        close(
            &expand_part(&b(1.0, 0.0, 5.0, 4.0), &PartSpec::s_head()),
            &b(0.0, 0.0, 6.0, 12.0),
        );
    }

    #[test]
    fn clip_basic() {
        let clipped = clip_to_image(&b(-5.0, -5.0, 10.0, 10.0), 100.0, 100.0).unwrap();
        assert_eq!(clipped, b(0.0, 0.0, 10.0, 10.0));
        let inside = b(5.0, 5.0, 10.0, 10.0);
        assert_eq!(clip_to_image(&inside, 100.0, 100.0).unwrap(), inside);
        assert!(clip_to_image(&b(200.0, 200.0, 210.0, 210.0), 100.0, 100.0).is_none());
    }

    #[test]
    fn default_pool_has_equal_areas() {
        let pool = PartPool::default_pool();
        assert_eq!(pool.iter().count(), 5);
        for (_, spec) in pool.iter() {
            assert!((spec.fractional_area() - PART_AREA).abs() < 1e-15);
        }
        assert_eq!(*pool.get("s-head").unwrap(), PartSpec::s_head());
    }

    #[test]
    fn unequal_area_pool_rejected() {
        let mut specs = BTreeMap::new();
        specs.insert(
            "half".to_string(),
            PartSpec::new(0.0, 0.0, 1.0, 0.5).unwrap(),
        );
        assert!(PartPool::new(specs).is_err());
    }

    fn arb_box() -> impl Strategy<Value = Box> {
        (
            -500.0..500.0f64,
            -500.0..500.0f64,
            1.0..400.0f64,
            1.0..400.0f64,
        )
            .prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn cut_expand_round_trip(body in arb_box()) {
            for (_, spec) in PartPool::default_pool().iter() {
                let back = expand_part(&cut_part(&body, spec), spec);
                prop_assert!((back.x1 - body.x1).abs() < 1e-9);
                prop_assert!((back.y1 - body.y1).abs() < 1e-9);
                prop_assert!((back.x2 - body.x2).abs() < 1e-9);
                prop_assert!((back.y2 - body.y2).abs() < 1e-9);
            }
        }

        #[test]
        fn s_head_anchored_top_center(body in arb_box()) {
            let head = cut_part(&body, &PartSpec::s_head());
            prop_assert_eq!(head.y1, body.y1);
            prop_assert!((head.center_x() - body.center_x()).abs() < 1e-9);
        }

        #[test]
        fn cut_area_law(body in arb_box()) {
            for (_, spec) in PartPool::default_pool().iter() {
                let cut = cut_part(&body, spec);
                let expected = spec.fractional_area() * area(&body);
                prop_assert!((area(&cut) - expected).abs() <= 1e-9 * expected);
            }
        }

        #[test]
        fn iou_symmetric_and_translation_invariant(
            a in arb_box(), c in arb_box(), dx in -100.0..100.0f64, dy in -100.0..100.0f64
        ) {
            prop_assert_eq!(iou(&a, &c), iou(&c, &a));
            let shift = |x: &Box| b(x.x1 + dx, x.y1 + dy, x.x2 + dx, x.y2 + dy);
            prop_assert!((iou(&shift(&a), &shift(&c)) - iou(&a, &c)).abs() < 1e-9);
        }

        #[test]
        fn iou_one_iff_identical(a in arb_box(), c in arb_box()) {
            if iou(&a, &c) == 1.0 {
                prop_assert_eq!(a, c);
            }
            prop_assert_eq!(iou(&a, &a), 1.0);
        }
    }
}
