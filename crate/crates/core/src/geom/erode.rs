//! Inward polygon offsetting.
//!
//! Rings are offset edge-by-edge toward the polygon interior with miter joins
//! at convex corners and chord-capped joins at reflex corners. The resulting
//! (possibly self-intersecting) offset curves are resolved through a segment
//! arrangement: faces are extracted and kept when their winding number with
//! respect to the offset curves is positive. Erosion can therefore split a
//! shape into several polygons or annihilate it entirely.

use super::{ring_signed_area, segment_intersection, Point2, Polygon2};
use crate::{Error, Result};

const SNAP: f64 = 1e-9;
const AREA_MIN: f64 = 1e-6;

/// Inward offset of `p` by `margin` meters. Returns zero, one or several
/// polygons; `margin == 0` returns the input unchanged.
pub fn erode(p: &Polygon2, margin: f64) -> Result<Vec<Polygon2>> {
    if margin < 0.0 {
        return Err(Error::Argument(format!("negative erosion margin {margin}")));
    }
    if margin == 0.0 {
        return Ok(vec![p.clone()]);
    }

    // Exterior stored CCW and holes CW: traversal order keeps the polygon
    // interior on the left of every ring, so one uniform left-shift offsets
    // all rings inward.
    let mut rings: Vec<Vec<Point2>> = Vec::with_capacity(1 + p.holes().len());
    rings.push(offset_ring(p.exterior(), margin));
    for h in p.holes() {
        rings.push(offset_ring(h, margin));
    }
    rings.retain(|r| r.len() >= 3);
    if rings.is_empty() {
        return Ok(vec![]);
    }

    let faces = arrangement_faces(&rings);

    // A face survives erosion iff an interior sample lies inside the source
    // polygon at distance >= margin from its boundary. Chord caps at reflex
    // corners undercut the exact arc by at most the 5 mm sagitta, hence the
    // slack.
    let slack = 0.006;
    let is_eroded_interior =
        |q: Point2| p.contains_point(q) && p.boundary_distance(q) >= margin - slack;

    let mut kept: Vec<(Vec<Point2>, f64)> = Vec::new();
    let mut hole_loops: Vec<(Vec<Point2>, Point2)> = Vec::new();
    for face in faces {
        let area = ring_signed_area(&face.points);
        if area > AREA_MIN {
            if is_eroded_interior(face.rep) {
                kept.push((face.points, area));
            }
        } else if area < -AREA_MIN {
            // Inner cycle of some face; its enclosed region is a hole of the
            // eroded output when that region is not itself eroded-interior.
            if !is_eroded_interior(face.enclosed_rep) {
                hole_loops.push((face.points, face.enclosed_rep));
            }
        }
    }

    let mut out: Vec<(Vec<Point2>, Vec<Vec<Point2>>, f64)> =
        kept.into_iter().map(|(pts, a)| (pts, Vec::new(), a)).collect();
    for (hole, rep) in hole_loops {
        // Attach to the smallest kept loop that contains the hole.
        let mut best: Option<(usize, f64)> = None;
        for (i, (outer, _, area)) in out.iter().enumerate() {
            if point_in_ring_evenodd(rep, outer)
                && best.is_none_or(|(_, ba)| *area < ba)
            {
                best = Some((i, *area));
            }
        }
        if let Some((i, _)) = best {
            out[i].1.push(hole);
        }
    }

    let mut polys: Vec<Polygon2> = out
        .into_iter()
        .map(|(ext, holes, _)| Polygon2::new_unchecked(ext, holes))
        .filter(|p| p.area() > AREA_MIN)
        .collect();
    // Deterministic output order.
    polys.sort_by(|a, b| {
        let (am, _) = a.aabb();
        let (bm, _) = b.aabb();
        am.x.partial_cmp(&bm.x).unwrap().then(am.y.partial_cmp(&bm.y).unwrap())
    });
    Ok(polys)
}

/// Offset one ring to the left of its traversal direction by `m`.
fn offset_ring(ring: &[Point2], m: f64) -> Vec<Point2> {
    let n = ring.len();
    let mut out: Vec<Point2> = Vec::with_capacity(n + 4);
    // Chord step keeping the sagitta of reflex-corner arcs under 5 mm.
    let max_sag = 0.005;
    let step = (2.0 * (1.0 - max_sag / m).max(0.0).acos())
        .clamp(1f64.to_radians(), 10f64.to_radians());
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let v = ring[i];
        let next = ring[(i + 1) % n];
        let d0 = v.sub(prev).normalized();
        let d1 = next.sub(v).normalized();
        let n0 = d0.left_normal();
        let n1 = d1.left_normal();
        let turn = d0.cross(d1);
        if turn.abs() < 1e-9 && d0.dot(d1) > 0.0 {
            out.push(v.add(n0.scale(m)));
        } else if turn > 0.0 {
            // Convex corner (interior on the left): miter join.
            match line_intersection(prev.add(n0.scale(m)), d0, v.add(n1.scale(m)), d1) {
                Some(q) => out.push(q),
                None => out.push(v.add(n0.scale(m))),
            }
        } else {
            // Reflex corner: approximate the erosion arc with chords from n0
            // to n1, sweeping clockwise.
            let a0 = n0.y.atan2(n0.x);
            let a1 = n1.y.atan2(n1.x);
            let mut sweep = a1 - a0;
            while sweep > 0.0 {
                sweep -= std::f64::consts::TAU;
            }
            let k = ((-sweep) / step).ceil().max(1.0) as usize;
            for j in 0..=k {
                let a = a0 + sweep * (j as f64) / (k as f64);
                out.push(v.add(Point2::new(a.cos(), a.sin()).scale(m)));
            }
        }
    }
    // Drop consecutive duplicates.
    let mut clean: Vec<Point2> = Vec::with_capacity(out.len());
    for p in out {
        if clean.last().is_none_or(|&q| p.dist(q) > SNAP) {
            clean.push(p);
        }
    }
    if clean.len() >= 2 && clean[0].dist(*clean.last().unwrap()) <= SNAP {
        clean.pop();
    }
    clean
}

fn line_intersection(p0: Point2, d0: Point2, p1: Point2, d1: Point2) -> Option<Point2> {
    let denom = d0.cross(d1);
    if denom.abs() < 1e-9 {
        return None;
    }
    let t = p1.sub(p0).cross(d1) / denom;
    Some(p0.add(d0.scale(t)))
}

struct Face {
    points: Vec<Point2>,
    /// A point strictly inside the face (for positive loops).
    rep: Point2,
    /// For negative loops: a point strictly inside the region the loop
    /// encloses (which lies outside the face the loop bounds).
    enclosed_rep: Point2,
}

/// Split the rings' segments at all mutual intersections, build the planar
/// subdivision and extract its boundary cycles.
fn arrangement_faces(rings: &[Vec<Point2>]) -> Vec<Face> {
    // Collect raw segments.
    let mut segs: Vec<(Point2, Point2)> = Vec::new();
    for r in rings {
        let n = r.len();
        for i in 0..n {
            let a = r[i];
            let b = r[(i + 1) % n];
            if a.dist(b) > SNAP {
                segs.push((a, b));
            }
        }
    }
    // Split points per segment.
    let mut splits: Vec<Vec<Point2>> = segs.iter().map(|_| Vec::new()).collect();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a1, a2) = segs[i];
            let (b1, b2) = segs[j];
            if let Some(x) = segment_intersection(a1, a2, b1, b2) {
                splits[i].push(x);
                splits[j].push(x);
            }
        }
    }
    // Node table keyed by snapped coordinates.
    let key = |p: Point2| ((p.x / SNAP).round() as i64, (p.y / SNAP).round() as i64);
    let mut nodes: Vec<Point2> = Vec::new();
    let mut node_ids: std::collections::HashMap<(i64, i64), usize> =
        std::collections::HashMap::new();
    let mut node_of = |p: Point2, nodes: &mut Vec<Point2>| -> usize {
        *node_ids.entry(key(p)).or_insert_with(|| {
            nodes.push(p);
            nodes.len() - 1
        })
    };
    // Sub-edges as node pairs.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_set: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for (idx, (a, b)) in segs.iter().enumerate() {
        let dir = b.sub(*a);
        let len = dir.norm();
        let mut ts: Vec<f64> = vec![0.0, 1.0];
        for x in &splits[idx] {
            let t = x.sub(*a).dot(dir) / (len * len);
            ts.push(t.clamp(0.0, 1.0));
        }
        ts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut prev_node: Option<usize> = None;
        let mut prev_t = f64::NEG_INFINITY;
        for &t in &ts {
            if (t - prev_t) * len <= SNAP {
                continue;
            }
            prev_t = t;
            let p = a.add(dir.scale(t));
            let id = node_of(p, &mut nodes);
            if let Some(prev) = prev_node {
                if prev != id {
                    let e = (prev.min(id), prev.max(id));
                    if edge_set.insert(e) {
                        edges.push((prev, id));
                    }
                }
            }
            prev_node = Some(id);
        }
    }

    // Half-edge structure: 2 directed edges per undirected edge.
    let nh = edges.len() * 2;
    let he_from = |i: usize| -> (usize, usize) {
        let (u, v) = edges[i / 2];
        if i.is_multiple_of(2) {
            (u, v)
        } else {
            (v, u)
        }
    };
    // Outgoing half-edges per node, sorted CCW by angle.
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for h in 0..nh {
        let (u, _) = he_from(h);
        outgoing[u].push(h);
    }
    let angle_of = |h: usize| -> f64 {
        let (u, v) = he_from(h);
        let d = nodes[v].sub(nodes[u]);
        d.y.atan2(d.x)
    };
    for list in outgoing.iter_mut() {
        list.sort_by(|&a, &b| angle_of(a).partial_cmp(&angle_of(b)).unwrap());
    }
    // next(h): at head(h), take the CCW predecessor of twin(h).
    let twin = |h: usize| -> usize { h ^ 1 };
    let next = |h: usize| -> usize {
        let (_, v) = he_from(h);
        let t = twin(h);
        let list = &outgoing[v];
        let pos = list.iter().position(|&x| x == t).unwrap();
        list[(pos + list.len() - 1) % list.len()]
    };

    // Walk cycles.
    let mut visited = vec![false; nh];
    let mut faces = Vec::new();
    for start in 0..nh {
        if visited[start] {
            continue;
        }
        let mut pts: Vec<Point2> = Vec::new();
        let mut h = start;
        let mut guard = 0;
        loop {
            visited[h] = true;
            let (u, _) = he_from(h);
            pts.push(nodes[u]);
            h = next(h);
            guard += 1;
            if h == start || guard > nh + 4 {
                break;
            }
        }
        if pts.len() < 3 {
            continue;
        }
        let all_edge_pts: Vec<(Point2, Point2)> =
            edges.iter().map(|&(u, v)| (nodes[u], nodes[v])).collect();
        let area = ring_signed_area(&pts);
        if area.abs() <= AREA_MIN {
            continue;
        }
        let rep = if area > 0.0 {
            face_interior_point(&pts, &all_edge_pts)
        } else {
            Point2::new(f64::NAN, f64::NAN)
        };
        let enclosed_rep = if area < 0.0 {
            // Even-odd interior of the loop itself, clipped to the first
            // sub-face; good enough as "a point in the enclosed region".
            face_interior_point(&pts, &all_edge_pts)
        } else {
            Point2::new(f64::NAN, f64::NAN)
        };
        faces.push(Face { points: pts, rep, enclosed_rep });
    }
    faces
}

/// A point strictly inside the face bounded (on the left of the scanline
/// entry crossing) by `ring`, avoiding every other arrangement edge.
fn face_interior_point(ring: &[Point2], all_edges: &[(Point2, Point2)]) -> Point2 {
    let ys: Vec<f64> = ring.iter().map(|p| p.y).collect();
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (y_max - y_min).max(SNAP);
    for attempt in 0..64 {
        let frac = 0.5 + 0.37 * ((attempt as f64) * 0.618).sin();
        let y = y_min + span * frac.clamp(0.05, 0.95);
        // Keep away from vertex y-coordinates to avoid crossing ambiguity.
        if all_edges
            .iter()
            .any(|(a, b)| (a.y - y).abs() < span * 1e-9 || (b.y - y).abs() < span * 1e-9)
        {
            continue;
        }
        // Crossings of the ring with the horizontal line.
        let mut ring_xs: Vec<f64> = Vec::new();
        let n = ring.len();
        for i in 0..n {
            let a = ring[i];
            let b = ring[(i + 1) % n];
            if (a.y > y) != (b.y > y) {
                ring_xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        if ring_xs.len() < 2 {
            continue;
        }
        ring_xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let x0 = ring_xs[0];
        // Nearest crossing of ANY arrangement edge to the right of x0.
        let mut x_next = ring_xs[1];
        for (a, b) in all_edges {
            if (a.y > y) != (b.y > y) {
                let x = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
                if x > x0 + SNAP && x < x_next {
                    x_next = x;
                }
            }
        }
        if x_next - x0 > SNAP * 4.0 {
            return Point2::new((x0 + x_next) / 2.0, y);
        }
    }
    // Fallback: ring centroid.
    let n = ring.len() as f64;
    let mut c = Point2::new(0.0, 0.0);
    for p in ring {
        c = c.add(*p);
    }
    c.scale(1.0 / n)
}

fn point_in_ring_evenodd(p: Point2, ring: &[Point2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}
