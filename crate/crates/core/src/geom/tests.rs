use super::*;
use proptest::prelude::*;

fn unit_square() -> Polygon2 {
    Polygon2::rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap()
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2 {
    Polygon2::rect(Point2::new(x0, y0), Point2::new(x1, y1)).unwrap()
}

#[test]
fn area_unit_square() {
    assert!((polygon_area(&unit_square()) - 1.0).abs() < 1e-12);
}

#[test]
fn area_square_with_centered_hole() {
    let p = Polygon2::new(
        unit_square().exterior().to_vec(),
        vec![vec![
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.25),
            Point2::new(0.75, 0.75),
            Point2::new(0.25, 0.75),
        ]],
    )
    .unwrap();
    assert!((polygon_area(&p) - 0.75).abs() < 1e-12);
}

#[test]
fn degenerate_ring_is_error() {
    let r = Polygon2::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)], vec![]);
    assert!(r.is_err());
}

#[test]
fn self_intersecting_ring_is_error() {
    let bowtie = vec![
        Point2::new(0.0, 0.0),
        Point2::new(2.0, 2.0),
        Point2::new(2.0, 0.0),
        Point2::new(0.0, 2.0),
    ];
    assert!(Polygon2::new(bowtie, vec![]).is_err());
}

#[test]
fn obb_axis_aligned_rectangle() {
    let p = rect(-2.0, -1.0, 2.0, 1.0);
    let obb = oriented_bbox(&p).unwrap();
    assert!(obb.angle_deg.abs() < 1e-9);
    let (a, b) = (obb.half_extent_u.max(obb.half_extent_v), obb.half_extent_u.min(obb.half_extent_v));
    assert!((a - 2.0).abs() < 1e-9);
    assert!((b - 1.0).abs() < 1e-9);
    assert!(obb.center.dist(Point2::new(0.0, 0.0)) < 1e-9);
}

#[test]
fn obb_rotated_rectangle() {
    let p = rect(-2.0, -1.0, 2.0, 1.0);
    for (rot, expect) in [(30.0, 30.0), (120.0, 30.0)] {
        let r = rotate_frame(&p, rot, Point2::new(0.0, 0.0));
        let obb = oriented_bbox(&r).unwrap();
        assert!(
            (obb.angle_deg - expect).abs() < 1e-6,
            "rot {rot}: got {}",
            obb.angle_deg
        );
    }
}

#[test]
fn obb_contains_all_vertices() {
    let p = rotate_frame(&rect(0.0, 0.0, 4.0, 2.0), 17.0, Point2::new(1.0, 1.0));
    let obb = oriented_bbox(&p).unwrap();
    let (s, c) = obb.angle_deg.to_radians().sin_cos();
    for &v in p.exterior() {
        let d = v.sub(obb.center);
        let u = d.x * c + d.y * s;
        let w = -d.x * s + d.y * c;
        assert!(u.abs() <= obb.half_extent_u + 1e-9);
        assert!(w.abs() <= obb.half_extent_v + 1e-9);
    }
}

#[test]
fn rotate_identity_and_inverse() {
    let p = rect(0.0, 0.0, 3.0, 2.0);
    let same = rotate_frame(&p, 0.0, Point2::new(5.0, 5.0));
    assert_eq!(p, same);
    let back = rotate_frame(&rotate_frame(&p, 90.0, Point2::new(1.0, 1.0)), -90.0, Point2::new(1.0, 1.0));
    for (a, b) in p.exterior().iter().zip(back.exterior()) {
        assert!(a.dist(*b) < 1e-9);
    }
}

#[test]
fn rotate_unit_square_45_about_center() {
    let center = Point2::new(0.5, 0.5);
    let r = rotate_frame(&unit_square(), 45.0, center);
    let expect = Point2::new(0.5, 0.5 + std::f64::consts::SQRT_2 / 2.0);
    assert!(
        r.exterior().iter().any(|p| p.dist(expect) < 1e-9),
        "no vertex at {expect:?}: {:?}",
        r.exterior()
    );
}

#[test]
fn erode_rectangle() {
    let p = rect(0.0, 0.0, 10.0, 6.0);
    let out = erode(&p, 0.5).unwrap();
    assert_eq!(out.len(), 1);
    assert!((out[0].area() - 45.0).abs() < 1e-6);
    let (min, max) = out[0].aabb();
    assert!(min.dist(Point2::new(0.5, 0.5)) < 1e-9);
    assert!(max.dist(Point2::new(9.5, 5.5)) < 1e-9);
}

#[test]
fn erode_annihilates_small_square() {
    let out = erode(&unit_square(), 0.6).unwrap();
    assert!(out.is_empty());
}

#[test]
fn erode_zero_margin_is_identity() {
    let p = rect(0.0, 0.0, 10.0, 6.0);
    let out = erode(&p, 0.0).unwrap();
    assert_eq!(out, vec![p]);
}

#[test]
fn erode_negative_margin_is_error() {
    assert!(erode(&unit_square(), -0.1).is_err());
}

fn dumbbell() -> Polygon2 {
    // Two 2x2 lobes joined by a 1 m long, 0.4 m wide neck.
    Polygon2::new(
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 0.8),
            Point2::new(3.0, 0.8),
            Point2::new(3.0, 0.0),
            Point2::new(5.0, 0.0),
            Point2::new(5.0, 2.0),
            Point2::new(3.0, 2.0),
            Point2::new(3.0, 1.2),
            Point2::new(2.0, 1.2),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ],
        vec![],
    )
    .unwrap()
}

/// Raster oracle: every 1 cm grid point inside any eroded output must lie in
/// the source polygon at distance >= margin - 1 cm from its boundary, and the
/// number of connected components matches by flood fill on the raster of
/// points with distance >= margin.
fn check_erode_against_raster(p: &Polygon2, margin: f64, expect_components: Option<usize>) {
    let out = erode(p, margin).unwrap();
    for poly in &out {
        let (min, max) = poly.aabb();
        let step = 0.01;
        let nx = ((max.x - min.x) / step).ceil() as usize + 1;
        let ny = ((max.y - min.y) / step).ceil() as usize + 1;
        for iy in 0..ny {
            for ix in 0..nx {
                let q = Point2::new(min.x + ix as f64 * step, min.y + iy as f64 * step);
                if poly.contains_point(q) {
                    assert!(p.contains_point(q), "eroded point {q:?} escapes source");
                    assert!(
                        p.boundary_distance(q) >= margin - 0.0101,
                        "point {q:?} too close to boundary: {} < {}",
                        p.boundary_distance(q),
                        margin
                    );
                }
            }
        }
    }
    if let Some(k) = expect_components {
        assert_eq!(out.len(), k, "component count");
    }
}

#[test]
fn erode_dumbbell_splits_in_two() {
    check_erode_against_raster(&dumbbell(), 0.25, Some(2));
}

#[test]
fn erode_square_with_hole_grows_hole() {
    let p = Polygon2::new(
        rect(0.0, 0.0, 10.0, 10.0).exterior().to_vec(),
        vec![vec![
            Point2::new(4.0, 4.0),
            Point2::new(6.0, 4.0),
            Point2::new(6.0, 6.0),
            Point2::new(4.0, 6.0),
        ]],
    )
    .unwrap();
    let out = erode(&p, 0.5).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].holes().len(), 1);
    // 9x9 outer minus the grown hole (2x2 dilated by 0.5, corners chord-capped).
    let expected = 81.0 - (8.0 + std::f64::consts::PI * 0.25);
    assert!((out[0].area() - expected).abs() < 0.05, "area {}", out[0].area());
    check_erode_against_raster(&p, 0.5, Some(1));
}

#[test]
fn intersects_disjoint_and_overlapping_squares() {
    let a = unit_square();
    let b = rect(6.0, 0.0, 7.0, 1.0);
    assert!(!intersects(&a, &b));
    let c = rect(0.5, 0.0, 1.5, 1.0);
    assert!(intersects(&a, &c));
}

#[test]
fn intersects_rect_inside_hole_is_false() {
    let outer = Polygon2::new(
        rect(0.0, 0.0, 10.0, 10.0).exterior().to_vec(),
        vec![vec![
            Point2::new(3.0, 3.0),
            Point2::new(7.0, 3.0),
            Point2::new(7.0, 7.0),
            Point2::new(3.0, 7.0),
        ]],
    )
    .unwrap();
    let inner = rect(4.0, 4.0, 6.0, 6.0);
    assert!(!intersects(&outer, &inner));
    // Point-sampling oracle at 1 cm grid over the inner rectangle.
    let (min, max) = inner.aabb();
    let mut any_shared = false;
    let step = 0.01;
    let nx = ((max.x - min.x) / step) as usize + 1;
    for iy in 0..nx {
        for ix in 0..nx {
            let q = Point2::new(min.x + ix as f64 * step, min.y + iy as f64 * step);
            if inner.contains_point(q) && outer.contains_point(q) {
                any_shared = true;
            }
        }
    }
    assert!(!any_shared);
}

#[test]
fn contains_polygon_basics() {
    let outer = rect(0.0, 0.0, 10.0, 6.0);
    assert!(contains_polygon(&outer, &rect(1.0, 1.0, 3.0, 2.0)));
    assert!(!contains_polygon(&outer, &rect(9.0, 5.0, 11.0, 7.0)));
}

fn arb_star_polygon() -> impl Strategy<Value = Polygon2> {
    (4usize..12, proptest::collection::vec(0.5f64..2.0, 12), -50.0f64..50.0, -50.0f64..50.0).prop_map(
        |(n, radii, cx, cy)| {
            let pts: Vec<Point2> = (0..n)
                .map(|i| {
                    let a = i as f64 / n as f64 * std::f64::consts::TAU;
                    let r = radii[i % radii.len()];
                    Point2::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            Polygon2::new(pts, vec![]).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn obb_area_never_exceeds_aabb_area(poly in arb_star_polygon()) {
        let hull = convex_hull(poly.exterior());
        let convex = Polygon2::new(hull, vec![]).unwrap();
        let obb = oriented_bbox(&convex).unwrap();
        let (min, max) = convex.aabb();
        let aabb_area = (max.x - min.x) * (max.y - min.y);
        prop_assert!(4.0 * obb.half_extent_u * obb.half_extent_v <= aabb_area + 1e-9);
    }

    #[test]
    fn intersects_is_symmetric(a in arb_star_polygon(), b in arb_star_polygon()) {
        prop_assert_eq!(intersects(&a, &b), intersects(&b, &a));
    }

    #[test]
    fn rotate_preserves_area(poly in arb_star_polygon(), angle in -360.0f64..360.0) {
        let rotated = rotate_frame(&poly, angle, Point2::new(1.0, -2.0));
        let rel = (rotated.area() - poly.area()).abs() / poly.area();
        prop_assert!(rel < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn erode_results_respect_margin(poly in arb_star_polygon(), margin in 0.05f64..0.4) {
        check_erode_against_raster(&poly, margin, None);
    }
}
