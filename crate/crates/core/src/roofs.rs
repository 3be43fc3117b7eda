//! Roof-section regularization against building footprints and geometric
//! azimuth estimation.
//!
//! Raw vectorized sections are replaced by oriented rectangles aligned to the
//! building's principal facade, with pairwise overlaps cut along their
//! intersection axis. Azimuths follow from the section bounding-box
//! orientation plus a 90-degree multiple chosen so sections face away from
//! their siblings.

use serde::{Deserialize, Serialize};

use crate::geom::{self, Point2, Polygon2};
use crate::pitch::FeatureVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub footprint: Polygon2,
    /// Roof height above ground, meters.
    pub height_m: f64,
    /// Ground elevation above sea level, meters.
    pub ground_elev_m: f64,
    /// Unrecognized input properties, preserved on save.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Building {
    /// Absolute rooftop elevation.
    pub fn top_elev_m(&self) -> f64 {
        self.ground_elev_m + self.height_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofObjectKind {
    SmokeVent,
    RoofWindow,
    Chimney,
    Dormer,
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoofObject {
    pub id: String,
    pub section_id: String,
    pub polygon: Polygon2,
    pub kind: RoofObjectKind,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoofSection {
    pub id: String,
    pub building_id: String,
    /// Plan-view (horizontal projection) geometry.
    pub plan_polygon: Polygon2,
    pub ridge_segments: Vec<(Point2, Point2)>,
    /// Degrees in [0, 90); `None` until estimated.
    pub pitch_deg: Option<f64>,
    /// Degrees in [0, 360) clockwise from north; `None` until estimated.
    pub azimuth_deg: Option<f64>,
    pub features: FeatureVector,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Pitch below which a section counts as flat and receives the configured
/// mounting azimuth instead of the geometric estimate.
pub const FLAT_PITCH_THRESHOLD_DEG: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AzimuthOptions {
    /// Mounting azimuth assigned to flat sections.
    pub flat_roof_azimuth_deg: f64,
    /// Hemisphere for the empty-neighbor equator-facing fallback.
    pub northern_hemisphere: bool,
}

impl Default for AzimuthOptions {
    fn default() -> Self {
        AzimuthOptions { flat_roof_azimuth_deg: 180.0, northern_hemisphere: true }
    }
}

/// Orientation of the longest exterior edge of `footprint`, degrees modulo 90.
/// Length ties are broken by the edge whose start vertex is smallest in
/// (x, y) lexicographic order.
pub fn principal_facade_angle(footprint: &Polygon2) -> Result<f64> {
    let ring = footprint.exterior();
    let n = ring.len();
    if n < 3 {
        return Err(Error::Geometry("degenerate footprint".into()));
    }
    let mut best: Option<(f64, Point2, f64)> = None; // (len, start, angle)
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let len = a.dist(b);
        let angle = (b.y - a.y).atan2(b.x - a.x).to_degrees().rem_euclid(90.0);
        let better = match best {
            None => true,
            Some((blen, bstart, _)) => {
                len > blen + 1e-9
                    || ((len - blen).abs() <= 1e-9
                        && (a.x, a.y) < (bstart.x, bstart.y))
            }
        };
        if better {
            best = Some((len, a, angle));
        }
    }
    let (len, _, angle) = best.unwrap();
    if len <= geom::EPS {
        return Err(Error::Geometry("degenerate footprint edge".into()));
    }
    Ok(if (angle - 90.0).abs() < 1e-9 { 0.0 } else { angle })
}

/// Axis-aligned rectangle helper used in the facade-rotated frame.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    fn is_valid(&self) -> bool {
        self.width() > geom::EPS && self.height() > geom::EPS
    }
    fn clip(&self, o: &Rect) -> Rect {
        Rect {
            x0: self.x0.max(o.x0),
            y0: self.y0.max(o.y0),
            x1: self.x1.min(o.x1),
            y1: self.y1.min(o.y1),
        }
    }
    fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// Regularize raw roof sections against their supporting footprint.
///
/// Each raw polygon becomes an oriented rectangle aligned to the footprint's
/// principal facade angle, clipped to the footprint's oriented bounding box;
/// overlapping rectangles are cut along the centerline of their overlap
/// (parallel to the longer overlap dimension). The result is aligned with the
/// input: `None` marks sections that were disjoint from the footprint or
/// annihilated by clipping.
pub fn regularize_sections(
    footprint: &Polygon2,
    raw_sections: &[Polygon2],
) -> Result<Vec<Option<Polygon2>>> {
    let angle = principal_facade_angle(footprint)?;
    let origin = Point2::new(0.0, 0.0);
    let fp_rot = geom::rotate_frame(footprint, -angle, origin);
    let (fp_min, fp_max) = fp_rot.aabb();
    let fp_box = Rect { x0: fp_min.x, y0: fp_min.y, x1: fp_max.x, y1: fp_max.y };

    let mut rects: Vec<Option<Rect>> = Vec::with_capacity(raw_sections.len());
    for raw in raw_sections {
        if !geom::intersects(raw, footprint) {
            rects.push(None);
            continue;
        }
        let rot = geom::rotate_frame(raw, -angle, origin);
        let (min, max) = rot.aabb();
        let clipped = Rect { x0: min.x, y0: min.y, x1: max.x, y1: max.y }.clip(&fp_box);
        rects.push(clipped.is_valid().then_some(clipped));
    }

    // Cut pairwise overlaps along the centerline of the overlap region,
    // parallel to its longer dimension; iterate until stable.
    for _ in 0..32 {
        let mut changed = false;
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                let (Some(a), Some(b)) = (rects[i], rects[j]) else { continue };
                let o = a.clip(&b);
                if !o.is_valid() {
                    continue;
                }
                let (mut a, mut b) = (a, b);
                if o.width() >= o.height() {
                    // Cut with a horizontal centerline.
                    let cy = (o.y0 + o.y1) / 2.0;
                    if a.center().1 <= b.center().1 {
                        a.y1 = a.y1.min(cy);
                        b.y0 = b.y0.max(cy);
                    } else {
                        a.y0 = a.y0.max(cy);
                        b.y1 = b.y1.min(cy);
                    }
                } else {
                    let cx = (o.x0 + o.x1) / 2.0;
                    if a.center().0 <= b.center().0 {
                        a.x1 = a.x1.min(cx);
                        b.x0 = b.x0.max(cx);
                    } else {
                        a.x0 = a.x0.max(cx);
                        b.x1 = b.x1.min(cx);
                    }
                }
                rects[i] = a.is_valid().then_some(a);
                rects[j] = b.is_valid().then_some(b);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(rects
        .into_iter()
        .map(|r| {
            r.map(|r| {
                let poly = Polygon2::new_unchecked(
                    vec![
                        Point2::new(r.x0, r.y0),
                        Point2::new(r.x1, r.y0),
                        Point2::new(r.x1, r.y1),
                        Point2::new(r.x0, r.y1),
                    ],
                    vec![],
                );
                geom::rotate_frame(&poly, angle, origin)
            })
        })
        .collect())
}

/// Geometric azimuth estimate: `theta_bb + k*90` with the 90-degree multiple
/// chosen so the downslope direction points away from the mean of the sibling
/// sections' centroids. Flat sections receive the configured mounting azimuth.
pub fn estimate_azimuth(
    section: &RoofSection,
    neighbors: &[RoofSection],
    opts: &AzimuthOptions,
) -> Result<f64> {
    if section
        .pitch_deg
        .is_some_and(|p| p < FLAT_PITCH_THRESHOLD_DEG)
    {
        return Ok(opts.flat_roof_azimuth_deg.rem_euclid(360.0));
    }
    let theta_bb = geom::oriented_bbox(&section.plan_polygon)?.angle_deg;
    // theta_bb is CCW from +x; the compass azimuth of that direction is
    // 90 - theta_bb (clockwise from north), and the downslope candidates are
    // its four quarter-turns.
    let candidates: Vec<f64> =
        (0..4).map(|k| (90.0 - theta_bb + 90.0 * k as f64).rem_euclid(360.0)).collect();

    let others: Vec<&RoofSection> =
        neighbors.iter().filter(|n| n.id != section.id).collect();
    if others.is_empty() {
        // Equator-facing preference: pick the candidate closest to the
        // equator azimuth (180 in the northern hemisphere, 0 in the
        // southern); ties favor the smaller delta-theta.
        let equator = if opts.northern_hemisphere { 180.0 } else { 0.0 };
        let mut best = candidates[0];
        let mut best_d = f64::INFINITY;
        for &a in &candidates {
            let d = circular_distance_deg(a, equator);
            if d < best_d - 1e-9 {
                best_d = d;
                best = a;
            }
        }
        return Ok(best);
    }

    let c = section.plan_polygon.centroid();
    let mut mean = Point2::new(0.0, 0.0);
    for n in &others {
        mean = mean.add(n.plan_polygon.centroid());
    }
    mean = mean.scale(1.0 / others.len() as f64);
    let away = c.sub(mean);

    let mut best = candidates[0];
    let mut best_score = f64::NEG_INFINITY;
    for &a in &candidates {
        let rad = a.to_radians();
        // Compass azimuth to planar direction: x east, y north.
        let d = Point2::new(rad.sin(), rad.cos());
        let score = d.dot(away);
        if score > best_score + 1e-9 {
            best_score = score;
            best = a;
        }
    }
    Ok(best)
}

fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
