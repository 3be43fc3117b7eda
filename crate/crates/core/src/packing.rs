//! Greedy maximum-count placement of rectangular modules on a roof section.
//!
//! The section is unprojected from plan view onto the roof plane, rotated so
//! the downslope axis points -y (rows horizontal), eroded by the edge margin,
//! and filled row by row for both panel orientations over a grid of phase
//! offsets. Ridges are buffered and treated as obstacles.

use serde::{Deserialize, Serialize};

use crate::geom::{self, Point2, Polygon2};
use crate::roofs::{RoofObject, RoofSection};
use crate::{Error, Result};

/// Phase-offset sweep step, meters.
const OFFSET_STEP: f64 = 0.1;
/// Half-width of the obstacle buffer around ridge segments, meters.
const RIDGE_BUFFER: f64 = 0.3;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Long side, meters.
    pub width_m: f64,
    /// Short side, meters.
    pub height_m: f64,
    pub power_wp: f64,
    pub edge_margin_m: f64,
    pub inter_row_gap_m: f64,
    pub inter_col_gap_m: f64,
}

impl PanelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_m >= self.height_m && self.height_m > 0.0) {
            return Err(Error::Argument(format!(
                "panel dimensions must satisfy width >= height > 0, got {} x {}",
                self.width_m, self.height_m
            )));
        }
        if self.power_wp <= 0.0 {
            return Err(Error::Argument("panel power must be positive".into()));
        }
        if self.edge_margin_m < 0.0 || self.inter_row_gap_m < 0.0 || self.inter_col_gap_m < 0.0 {
            return Err(Error::Argument("margins and gaps must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec {
            width_m: 1.7,
            height_m: 1.0,
            power_wp: 400.0,
            edge_margin_m: 0.3,
            inter_row_gap_m: 0.02,
            inter_col_gap_m: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Landscape,
    Portrait,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Panel center in the packing frame (roof plane, downslope = -y).
    pub center: Point2,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelLayout {
    pub placements: Vec<Placement>,
    pub count: usize,
    /// Roof-plane section polygon in the packing frame.
    pub plane_polygon: Polygon2,
}

/// Stretch plan-view coordinates along the downslope axis by 1/cos(pitch),
/// mapping the horizontal projection back onto the inclined roof plane.
pub fn unproject_point(p: Point2, pitch_deg: f64, azimuth_deg: f64) -> Point2 {
    let rad = azimuth_deg.to_radians();
    let d = Point2::new(rad.sin(), rad.cos());
    let k = 1.0 / pitch_deg.to_radians().cos();
    let along = p.dot(d);
    p.add(d.scale(along * (k - 1.0)))
}

pub fn unproject_to_roof_plane(
    plan: &Polygon2,
    pitch_deg: f64,
    azimuth_deg: f64,
) -> Result<Polygon2> {
    if !(0.0..90.0).contains(&pitch_deg) {
        return Err(Error::Argument(format!("pitch {pitch_deg} outside [0, 90)")));
    }
    if pitch_deg == 0.0 {
        return Ok(plan.clone());
    }
    let map = |ring: &[Point2]| -> Vec<Point2> {
        ring.iter().map(|&p| unproject_point(p, pitch_deg, azimuth_deg)).collect()
    };
    Ok(Polygon2::new_unchecked(
        map(plan.exterior()),
        plan.holes().iter().map(|h| map(h)).collect(),
    ))
}

pub fn max_module_count(layout: &PanelLayout) -> usize {
    layout.count
}

fn panel_rect(x: f64, y: f64, w: f64, h: f64) -> Polygon2 {
    Polygon2::new_unchecked(
        vec![
            Point2::new(x, y),
            Point2::new(x + w, y),
            Point2::new(x + w, y + h),
            Point2::new(x, y + h),
        ],
        vec![],
    )
}

fn ridge_obstacle(a: Point2, b: Point2) -> Option<Polygon2> {
    let d = b.sub(a);
    let len = d.norm();
    if len <= geom::EPS {
        return None;
    }
    let dir = d.scale(1.0 / len);
    let n = dir.left_normal().scale(RIDGE_BUFFER);
    let a = a.sub(dir.scale(RIDGE_BUFFER));
    let b = b.add(dir.scale(RIDGE_BUFFER));
    Some(Polygon2::new_unchecked(
        vec![a.sub(n), b.sub(n), b.add(n), a.add(n)],
        vec![],
    ))
}

/// Greedy row-fill packing over both orientations and a 10 cm phase-offset
/// sweep; returns the best configuration (ties: landscape first, smallest
/// offsets).
pub fn pack_panels(
    section: &RoofSection,
    obstacles: &[RoofObject],
    spec: &PanelSpec,
) -> Result<PanelLayout> {
    spec.validate()?;
    let pitch = section
        .pitch_deg
        .ok_or_else(|| Error::State(format!("section {} has no pitch", section.id)))?;
    let azimuth = section
        .azimuth_deg
        .ok_or_else(|| Error::State(format!("section {} has no azimuth", section.id)))?;

    // Roof-plane transform, then rotate the downslope direction onto -y.
    let plane = unproject_to_roof_plane(&section.plan_polygon, pitch, azimuth)?;
    let rad = azimuth.to_radians();
    let downslope_planar_deg = rad.cos().atan2(rad.sin()).to_degrees();
    let rot = -90.0 - downslope_planar_deg;
    let origin = Point2::new(0.0, 0.0);
    let plane = geom::rotate_frame(&plane, rot, origin);

    let mut blocks: Vec<Polygon2> = Vec::new();
    for obj in obstacles {
        let p = unproject_to_roof_plane(&obj.polygon, pitch, azimuth)?;
        blocks.push(geom::rotate_frame(&p, rot, origin));
    }
    for &(a, b) in &section.ridge_segments {
        let a = unproject_point(a, pitch, azimuth).rotated(rot, origin);
        let b = unproject_point(b, pitch, azimuth).rotated(rot, origin);
        if let Some(r) = ridge_obstacle(a, b) {
            blocks.push(r);
        }
    }

    let regions = geom::erode(&plane, spec.edge_margin_m)?;
    if regions.is_empty() {
        return Ok(PanelLayout { placements: vec![], count: 0, plane_polygon: plane });
    }

    let mut best: Option<(usize, Vec<Placement>)> = None;
    for orientation in [Orientation::Landscape, Orientation::Portrait] {
        let (pw, ph) = match orientation {
            Orientation::Landscape => (spec.width_m, spec.height_m),
            Orientation::Portrait => (spec.height_m, spec.width_m),
        };
        let period_x = pw + spec.inter_col_gap_m;
        let period_y = ph + spec.inter_row_gap_m;
        let nx = (period_x / OFFSET_STEP).ceil() as usize;
        let ny = (period_y / OFFSET_STEP).ceil() as usize;
        for ix in 0..nx {
            let dx = ix as f64 * OFFSET_STEP;
            if dx >= period_x {
                break;
            }
            for iy in 0..ny {
                let dy = iy as f64 * OFFSET_STEP;
                if dy >= period_y {
                    break;
                }
                let placements =
                    fill(&regions, &blocks, pw, ph, period_x, period_y, dx, dy, orientation);
                if best.as_ref().is_none_or(|(c, _)| placements.len() > *c) {
                    best = Some((placements.len(), placements));
                }
            }
        }
    }

    let (count, placements) = best.unwrap_or((0, vec![]));
    Ok(PanelLayout { placements, count, plane_polygon: plane })
}

#[allow(clippy::too_many_arguments)]
fn fill(
    regions: &[Polygon2],
    blocks: &[Polygon2],
    pw: f64,
    ph: f64,
    period_x: f64,
    period_y: f64,
    dx: f64,
    dy: f64,
    orientation: Orientation,
) -> Vec<Placement> {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in regions {
        let (rmin, rmax) = r.aabb();
        min.x = min.x.min(rmin.x);
        min.y = min.y.min(rmin.y);
        max.x = max.x.max(rmax.x);
        max.y = max.y.max(rmax.y);
    }
    let mut placements = Vec::new();
    let mut y = min.y + dy;
    while y + ph <= max.y + geom::EPS {
        let mut x = min.x + dx;
        while x + pw <= max.x + geom::EPS {
            let rect = panel_rect(x, y, pw, ph);
            let inside = regions.iter().any(|r| geom::contains_polygon(r, &rect));
            if inside && !blocks.iter().any(|b| geom::intersects(b, &rect)) {
                placements.push(Placement {
                    center: Point2::new(x + pw / 2.0, y + ph / 2.0),
                    orientation,
                });
            }
            x += period_x;
        }
        y += period_y;
    }
    placements
}

/// Per-axis tile count with gap handling: n = floor((L + g) / (s + g)).
pub fn axis_tile_count(length: f64, side: f64, gap: f64) -> usize {
    if length + 1e-9 < side {
        return 0;
    }
    ((length + gap) / (side + gap) + 1e-9).floor() as usize
}
