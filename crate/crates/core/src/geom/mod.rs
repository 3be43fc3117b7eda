//! Planar geometry kernel: polygons, oriented bounding boxes, erosion,
//! intersection tests and frame rotations.
//!
//! Coordinates are meters in a locally projected planar frame. All values are
//! immutable after construction and every operation is a pure function.

mod erode;

pub use erode::erode;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coincidence tolerance for point/segment predicates, in meters.
pub const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    /// Left-hand normal (rotate +90 degrees CCW).
    pub fn left_normal(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotate by `angle_deg` CCW about `origin`.
    pub fn rotated(self, angle_deg: f64, origin: Point2) -> Point2 {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let d = self.sub(origin);
        Point2::new(origin.x + d.x * c - d.y * s, origin.y + d.x * s + d.y * c)
    }
}

/// Simple polygon with optional holes. The exterior ring is stored
/// counter-clockwise, holes clockwise; rings are not closed (first vertex is
/// not repeated at the end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon2 {
    exterior: Vec<Point2>,
    holes: Vec<Vec<Point2>>,
}

fn ring_signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        a += p.cross(q);
    }
    a / 2.0
}

fn ring_is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            // Skip adjacent edges (they share a vertex).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn dedup_ring(ring: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
    for &p in ring {
        if out.last().is_none_or(|&q| p.dist(q) > EPS) {
            out.push(p);
        }
    }
    if out.len() >= 2 && out[0].dist(*out.last().unwrap()) <= EPS {
        out.pop();
    }
    out
}

impl Polygon2 {
    /// Validating constructor. Ring orientation is normalized (exterior CCW,
    /// holes CW); duplicate consecutive vertices and a repeated closing vertex
    /// are dropped.
    pub fn new(exterior: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Result<Polygon2> {
        let mut exterior = dedup_ring(&exterior);
        if exterior.len() < 3 {
            return Err(Error::Geometry(format!(
                "exterior ring has {} distinct vertices, need at least 3",
                exterior.len()
            )));
        }
        if exterior.iter().any(|p| !p.is_finite()) {
            return Err(Error::Geometry("non-finite coordinate".into()));
        }
        let area = ring_signed_area(&exterior);
        if area.abs() < EPS * EPS {
            return Err(Error::Geometry("polygon area is zero".into()));
        }
        if area < 0.0 {
            exterior.reverse();
        }
        if !ring_is_simple(&exterior) {
            return Err(Error::Geometry("exterior ring is self-intersecting".into()));
        }
        let mut norm_holes = Vec::with_capacity(holes.len());
        for h in holes {
            let mut h = dedup_ring(&h);
            if h.len() < 3 {
                return Err(Error::Geometry("hole ring has fewer than 3 vertices".into()));
            }
            if h.iter().any(|p| !p.is_finite()) {
                return Err(Error::Geometry("non-finite coordinate in hole".into()));
            }
            if ring_signed_area(&h) > 0.0 {
                h.reverse();
            }
            if !ring_is_simple(&h) {
                return Err(Error::Geometry("hole ring is self-intersecting".into()));
            }
            if !h.iter().all(|&p| point_in_ring(p, &exterior) != RingSide::Outside) {
                return Err(Error::Geometry("hole extends outside the exterior ring".into()));
            }
            norm_holes.push(h);
        }
        Ok(Polygon2 { exterior, holes: norm_holes })
    }

    /// Construct without simplicity checks. Used by algorithms whose outputs
    /// are simple by construction; orientation is still normalized.
    pub(crate) fn new_unchecked(mut exterior: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Polygon2 {
        if ring_signed_area(&exterior) < 0.0 {
            exterior.reverse();
        }
        let holes = holes
            .into_iter()
            .map(|mut h| {
                if ring_signed_area(&h) > 0.0 {
                    h.reverse();
                }
                h
            })
            .collect();
        Polygon2 { exterior, holes }
    }

    pub fn rect(min: Point2, max: Point2) -> Result<Polygon2> {
        Polygon2::new(
            vec![
                min,
                Point2::new(max.x, min.y),
                max,
                Point2::new(min.x, max.y),
            ],
            vec![],
        )
    }

    pub fn exterior(&self) -> &[Point2] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point2>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Area centroid of the exterior minus holes.
    pub fn centroid(&self) -> Point2 {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        let mut accum = |ring: &[Point2]| {
            let n = ring.len();
            for i in 0..n {
                let p = ring[i];
                let q = ring[(i + 1) % n];
                let w = p.cross(q);
                cx += (p.x + q.x) * w;
                cy += (p.y + q.y) * w;
                a += w;
            }
        };
        accum(&self.exterior);
        for h in &self.holes {
            accum(h);
        }
        Point2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn aabb(&self) -> (Point2, Point2) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    /// True iff `p` is inside the polygon (boundary counts as inside).
    pub fn contains_point(&self, p: Point2) -> bool {
        match point_in_ring(p, &self.exterior) {
            RingSide::Outside => false,
            RingSide::Boundary => true,
            RingSide::Inside => !self
                .holes
                .iter()
                .any(|h| point_in_ring(p, h) == RingSide::Inside),
        }
    }

    /// Minimum distance from `p` to any ring of the polygon boundary.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        let mut d = f64::INFINITY;
        let mut scan = |ring: &[Point2]| {
            let n = ring.len();
            for i in 0..n {
                d = d.min(point_segment_distance(p, ring[i], ring[(i + 1) % n]));
            }
        };
        scan(&self.exterior);
        for h in &self.holes {
            scan(h);
        }
        d
    }

    pub(crate) fn all_edges(&self) -> Vec<(Point2, Point2)> {
        let mut edges = Vec::new();
        let mut push = |ring: &[Point2]| {
            let n = ring.len();
            for i in 0..n {
                edges.push((ring[i], ring[(i + 1) % n]));
            }
        };
        push(&self.exterior);
        for h in &self.holes {
            push(h);
        }
        edges
    }
}

/// Minimum-area oriented bounding box of a polygon, angle normalized to
/// [0, 90) degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbFit {
    pub center: Point2,
    /// Orientation of the `u` axis, degrees CCW from +x, in [0, 90).
    pub angle_deg: f64,
    pub half_extent_u: f64,
    pub half_extent_v: f64,
}

/// Shoelace area of the exterior minus holes.
pub fn polygon_area(p: &Polygon2) -> f64 {
    let mut a = ring_signed_area(&p.exterior);
    for h in &p.holes {
        // Hole rings are CW, signed area negative.
        a += ring_signed_area(h);
    }
    a
}

/// Convex hull (Andrew monotone chain), CCW, no collinear points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| a.dist(*b) <= EPS);
    if pts.len() < 3 {
        return pts;
    }
    let build = |iter: &mut dyn Iterator<Item = Point2>| {
        let mut chain: Vec<Point2> = Vec::new();
        for p in iter {
            while chain.len() >= 2 {
                let a = chain[chain.len() - 2];
                let b = chain[chain.len() - 1];
                if b.sub(a).cross(p.sub(a)) <= 1e-12 {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(p);
        }
        chain
    };
    let lower = build(&mut pts.iter().copied());
    let upper = build(&mut pts.iter().rev().copied());
    let mut hull = lower;
    hull.pop();
    hull.extend(upper);
    hull.pop();
    hull
}

/// Minimum-area oriented bounding box via edge-direction search over the
/// convex hull (rotating calipers candidate set).
pub fn oriented_bbox(p: &Polygon2) -> Result<ObbFit> {
    let hull = convex_hull(&p.exterior);
    if hull.len() < 3 {
        return Err(Error::Geometry("degenerate polygon for oriented bbox".into()));
    }
    let n = hull.len();
    let mut candidates: Vec<(f64, f64, Point2, f64, f64)> = Vec::new(); // (area, angle_rad, center, hu, hv)
    for i in 0..n {
        let e = hull[(i + 1) % n].sub(hull[i]);
        if e.norm() <= EPS {
            continue;
        }
        let theta = e.y.atan2(e.x);
        let (s, c) = theta.sin_cos();
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        for &q in &hull {
            let u = q.x * c + q.y * s;
            let v = -q.x * s + q.y * c;
            min_u = min_u.min(u);
            max_u = max_u.max(u);
            min_v = min_v.min(v);
            max_v = max_v.max(v);
        }
        let hu = (max_u - min_u) / 2.0;
        let hv = (max_v - min_v) / 2.0;
        let area = 4.0 * hu * hv;
        let cu = (min_u + max_u) / 2.0;
        let cv = (min_v + max_v) / 2.0;
        let center = Point2::new(cu * c - cv * s, cu * s + cv * c);
        candidates.push((area, theta, center, hu, hv));
    }
    let min_area = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    // Minimum-area ties are common (any acute triangle has three edge-aligned
    // boxes of identical area); break them toward the orientation of the
    // polygon's longest edge, which is rotation-equivariant.
    let ref_angle = longest_edge_angle_mod90(&p.exterior);
    let mut best: Option<(f64, &(f64, f64, Point2, f64, f64))> = None;
    for cand in &candidates {
        if cand.0 > min_area * (1.0 + 1e-9) + 1e-12 {
            continue;
        }
        let a = cand.1.to_degrees().rem_euclid(90.0);
        let d = (a - ref_angle).abs();
        let d = d.min(90.0 - d);
        // Secondary tie-break on the normalized angle itself.
        let key = d + a * 1e-12;
        if best.is_none_or(|(bk, _)| key < bk) {
            best = Some((key, cand));
        }
    }
    let &(_, theta, center, hu, hv) = best.unwrap().1;
    let (angle_deg, half_extent_u, half_extent_v) = normalize_obb_angle(theta.to_degrees(), hu, hv);
    Ok(ObbFit { center, angle_deg, half_extent_u, half_extent_v })
}

fn longest_edge_angle_mod90(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut best_len = -1.0;
    let mut best_angle = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let len = a.dist(b);
        if len > best_len + 1e-9 {
            best_len = len;
            best_angle = (b.y - a.y).atan2(b.x - a.x).to_degrees().rem_euclid(90.0);
        }
    }
    best_angle
}

/// Normalize an orientation to [0, 90), swapping extents when the axis labels
/// rotate by an odd multiple of 90.
fn normalize_obb_angle(angle_deg: f64, hu: f64, hv: f64) -> (f64, f64, f64) {
    let mut a = angle_deg.rem_euclid(180.0);
    let mut swaps = 0u32;
    if a >= 90.0 {
        a -= 90.0;
        swaps += 1;
    }
    // Snap values that round to exactly 90 back to 0.
    if (a - 90.0).abs() < 1e-9 {
        a = 0.0;
        swaps += 1;
    }
    if a.abs() < 1e-9 {
        a = 0.0;
    }
    if swaps % 2 == 1 {
        (a, hv, hu)
    } else {
        (a, hu, hv)
    }
}

/// Rigid rotation of a polygon about `origin` by `angle_deg` CCW.
pub fn rotate_frame(p: &Polygon2, angle_deg: f64, origin: Point2) -> Polygon2 {
    let rot_ring =
        |ring: &[Point2]| ring.iter().map(|q| q.rotated(angle_deg, origin)).collect::<Vec<_>>();
    Polygon2 {
        exterior: rot_ring(&p.exterior),
        holes: p.holes.iter().map(|h| rot_ring(h)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RingSide {
    Inside,
    Outside,
    Boundary,
}

/// Even-odd point-in-ring test with boundary detection.
pub(crate) fn point_in_ring(p: Point2, ring: &[Point2]) -> RingSide {
    let n = ring.len();
    for i in 0..n {
        if point_segment_distance(p, ring[i], ring[(i + 1) % n]) <= EPS {
            return RingSide::Boundary;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x = a.x + t * (b.x - a.x);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingSide::Inside
    } else {
        RingSide::Outside
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 <= EPS * EPS {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// True iff segments [a1,a2] and [b1,b2] share a point (within EPS).
pub fn segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    segment_intersection(a1, a2, b1, b2).is_some()
        || point_segment_distance(a1, b1, b2) <= EPS
        || point_segment_distance(a2, b1, b2) <= EPS
        || point_segment_distance(b1, a1, a2) <= EPS
        || point_segment_distance(b2, a1, a2) <= EPS
}

/// Proper intersection point of two segments, if any (excludes near-parallel
/// overlaps; those are caught by the endpoint-distance checks of
/// `segments_intersect`).
pub fn segment_intersection(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> Option<Point2> {
    let r = a2.sub(a1);
    let s = b2.sub(b1);
    let denom = r.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = b1.sub(a1);
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let tol = 1e-9;
    if t >= -tol && t <= 1.0 + tol && u >= -tol && u <= 1.0 + tol {
        Some(a1.add(r.scale(t)))
    } else {
        None
    }
}

/// True iff the interiors or boundaries of `a` and `b` share any point.
pub fn intersects(a: &Polygon2, b: &Polygon2) -> bool {
    let (amin, amax) = a.aabb();
    let (bmin, bmax) = b.aabb();
    if amax.x < bmin.x - EPS
        || bmax.x < amin.x - EPS
        || amax.y < bmin.y - EPS
        || bmax.y < amin.y - EPS
    {
        return false;
    }
    for (a1, a2) in a.all_edges() {
        for (b1, b2) in b.all_edges() {
            if segments_intersect(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    // No boundary crossing: containment one way or the other, or disjoint.
    a.contains_point(b.exterior[0]) || b.contains_point(a.exterior[0])
}

/// True iff every point of `inner` (a convex polygon, e.g. a panel rectangle)
/// lies inside `outer`. Assumes no boundary crossing implies containment of
/// the whole shape, so edges are checked too.
pub fn contains_polygon(outer: &Polygon2, inner: &Polygon2) -> bool {
    for &p in &inner.exterior {
        if !outer.contains_point(p) {
            return false;
        }
    }
    for (a1, a2) in inner.all_edges() {
        for (b1, b2) in outer.all_edges() {
            if segment_intersection(a1, a2, b1, b2).is_some() {
                // A proper crossing of the outer boundary means part of the
                // inner edge is outside. Touching at EPS scale is tolerated.
                let r = a2.sub(a1);
                let s = b2.sub(b1);
                if r.cross(s).abs() > 1e-12 {
                    let qp = b1.sub(a1);
                    let t = qp.cross(s) / r.cross(s);
                    let u = qp.cross(r) / r.cross(s);
                    let tol = EPS / r.norm().max(EPS);
                    let tol_u = EPS / s.norm().max(EPS);
                    if t > tol && t < 1.0 - tol && u > tol_u && u < 1.0 - tol_u {
                        // Midpoints on either side of the crossing decide.
                        let x = a1.add(r.scale(t));
                        let m1 = a1.add(x.sub(a1).scale(0.5));
                        let m2 = x.add(a2.sub(x).scale(0.5));
                        if !outer.contains_point(m1) || !outer.contains_point(m2) {
                            return false;
                        }
                    }
                }
            }
        }
        // Hole interiors: edge midpoint must not sit inside a hole.
        let mid = a1.add(a2.sub(a1).scale(0.5));
        if !outer.contains_point(mid) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests;
