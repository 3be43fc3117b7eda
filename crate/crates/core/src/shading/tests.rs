use super::*;
use crate::geom::Polygon2;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2 {
    Polygon2::rect(Point2::new(x0, y0), Point2::new(x1, y1)).unwrap()
}

fn building(id: &str, fp: Polygon2, height: f64, ground: f64) -> Building {
    Building {
        id: id.into(),
        footprint: fp,
        height_m: height,
        ground_elev_m: ground,
        extra: Default::default(),
    }
}

#[test]
fn mask_validation() {
    assert!(HorizonMask::new(vec![]).is_err());
    assert!(HorizonMask::new(vec![0.0, 91.0]).is_err());
    assert!(HorizonMask::new(vec![0.0, -0.1]).is_err());
    let m = HorizonMask::new(vec![10.0; 72]).unwrap();
    assert_eq!(m.n_sectors(), 72);
    assert_eq!(m.sector_of(0.0), 0);
    assert_eq!(m.sector_of(359.9), 71);
    assert_eq!(m.sector_of(360.0), 0);
    assert_eq!(m.sector_of(182.5), 36);
    assert!((m.sector_center_deg(36) - 182.5).abs() < 1e-12);
}

#[test]
fn horizon_no_buildings_is_open() {
    let index = SpatialIndex::build(vec![]);
    let m = building_horizon(Point2::new(0.0, 0.0), 10.0, &index, 72, 500.0).unwrap();
    assert!(m.gamma_deg.iter().all(|&g| g == 0.0));
}

#[test]
fn horizon_single_south_building_45deg() {
    // Front edge 10 m due south, roof 10 m above the evaluation height.
    let b = building("b", rect(-1.0, -11.0, 1.0, -10.0), 15.0, 0.0);
    let index = SpatialIndex::build(vec![b]);
    let m = building_horizon(Point2::new(0.0, 0.0), 5.0, &index, 72, 500.0).unwrap();
    for (i, &g) in m.gamma_deg.iter().enumerate() {
        if i == 35 || i == 36 {
            assert!((g - 45.0).abs() < 0.1, "sector {i} gamma {g}");
        } else {
            assert_eq!(g, 0.0, "sector {i} gamma {g}");
        }
    }
}

#[test]
fn horizon_takes_max_over_occluders() {
    let near = building("a", rect(-2.0, -11.0, 2.0, -10.0), 10.0 * 30f64.to_radians().tan(), 0.0);
    let far = building("b", rect(-2.0, -16.0, 2.0, -15.0), 15.0 * 50f64.to_radians().tan(), 0.0);
    let index = SpatialIndex::build(vec![near, far]);
    let m = building_horizon(Point2::new(0.0, 0.0), 0.0, &index, 72, 500.0).unwrap();
    assert!((m.gamma_deg[36] - 50.0).abs() < 0.2, "gamma {}", m.gamma_deg[36]);
}

#[test]
fn horizon_ignores_buildings_below_eval_height() {
    let b = building("b", rect(-2.0, -11.0, 2.0, -10.0), 4.0, 0.0);
    let index = SpatialIndex::build(vec![b]);
    let m = building_horizon(Point2::new(0.0, 0.0), 5.0, &index, 72, 500.0).unwrap();
    assert!(m.gamma_deg.iter().all(|&g| g == 0.0));
}

#[test]
fn prefilter_examples() {
    let low = building("low", rect(-5.0, -15.0, 5.0, -10.0), 8.0, 0.0);
    let far = building("far", rect(1000.0, -5.0, 1010.0, 5.0), 13.0, 0.0);
    let tall = building("tall", rect(-5.0, 20.0, 5.0, 30.0), 40.0, 0.0);
    let index = SpatialIndex::build(vec![low, far, tall]);
    let kept = prefilter_buildings(&index, Point2::new(0.0, 0.0), 10.0, 1.0).unwrap();
    let ids: Vec<&str> = kept.iter().map(|b| b.id.as_str()).collect();
    assert_eq!(ids, vec!["tall"]);
    assert!(prefilter_buildings(&index, Point2::new(0.0, 0.0), 10.0, 0.0).is_err());
    assert!(prefilter_buildings(&index, Point2::new(0.0, 0.0), 10.0, 90.0).is_err());
}

fn random_city(seed: u64, n: usize) -> Vec<Building> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let cx: f64 = rng.gen_range(-400.0..400.0);
            let cy: f64 = rng.gen_range(-400.0..400.0);
            let w: f64 = rng.gen_range(4.0..25.0);
            let h: f64 = rng.gen_range(4.0..25.0);
            building(
                &format!("b{i}"),
                rect(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
                rng.gen_range(2.0..40.0),
                rng.gen_range(0.0..10.0),
            )
        })
        .collect()
}

#[test]
fn prefilter_mask_equals_brute_force_floored() {
    for seed in [1u64, 2, 3] {
        let city = random_city(seed, 80);
        let index = SpatialIndex::build(city);
        let eval = Point2::new(0.0, 0.0);
        let brute =
            horizon_from_buildings(eval, 15.0, index.all().iter(), 72, 500.0).unwrap();
        let kept = prefilter_buildings(&index, eval, 15.0, 0.5).unwrap();
        let filtered =
            horizon_from_buildings(eval, 15.0, kept.iter().copied(), 72, 500.0).unwrap();
        for (a, b) in brute.gamma_deg.iter().zip(&filtered.gamma_deg) {
            assert!((a.max(0.5) - b.max(0.5)).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn spatial_index_query_matches_brute_force() {
    let city = random_city(9, 60);
    let index = SpatialIndex::build(city.clone());
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    for _ in 0..50 {
        let x: f64 = rng.gen_range(-500.0..500.0);
        let y: f64 = rng.gen_range(-500.0..500.0);
        let w: f64 = rng.gen_range(1.0..300.0);
        let lo = Point2::new(x, y);
        let hi = Point2::new(x + w, y + w);
        let got: Vec<&str> = index.query(lo, hi).iter().map(|b| b.id.as_str()).collect();
        let want: Vec<&str> = city
            .iter()
            .filter(|b| {
                let (bmin, bmax) = b.footprint.aabb();
                bmin.x <= hi.x && lo.x <= bmax.x && bmin.y <= hi.y && lo.y <= bmax.y
            })
            .map(|b| b.id.as_str())
            .collect();
        assert_eq!(got, want);
    }
}

fn flat_dem(elev: f64) -> DemRaster {
    DemRaster::new(Point2::new(0.0, 0.0), 10.0, 201, 201, vec![elev; 201 * 201], -9999.0)
        .unwrap()
}

#[test]
fn dem_flat_is_open() {
    let dem = flat_dem(0.0);
    let m = dem_horizon(Point2::new(1005.0, 1005.0), 0.0, &dem, 72, 900.0, 10.0).unwrap();
    assert!(m.gamma_deg.iter().all(|&g| g == 0.0));
}

#[test]
fn dem_errors() {
    let dem = flat_dem(0.0);
    assert!(dem_horizon(Point2::new(-5.0, 100.0), 0.0, &dem, 72, 900.0, 10.0).is_err());
    assert!(dem_horizon(Point2::new(1005.0, 1005.0), 0.0, &dem, 72, 900.0, 4.0).is_err());
    assert!(DemRaster::new(Point2::new(0.0, 0.0), 0.0, 2, 2, vec![0.0; 4], -9999.0).is_err());
    assert!(DemRaster::new(Point2::new(0.0, 0.0), 1.0, 2, 2, vec![0.0; 3], -9999.0).is_err());
}

#[test]
fn dem_ridge_east() {
    // Two high columns centered 1000 m east of the evaluation point.
    let mut dem = flat_dem(0.0);
    for r in 0..201 {
        dem.elevation_m[r * 201 + 199] = 100.0;
        dem.elevation_m[r * 201 + 200] = 100.0;
    }
    let m = dem_horizon(Point2::new(1005.0, 1005.0), 0.0, &dem, 72, 1100.0, 10.0).unwrap();
    let east = m.gamma_deg[m.sector_of(90.0)];
    assert!((east - 5.71).abs() < 0.05, "east gamma {east}");
    assert_eq!(m.gamma_deg[m.sector_of(270.0)], 0.0);
}

#[test]
fn dem_nodata_is_transparent() {
    let mut dem = flat_dem(0.0);
    for r in 0..201 {
        dem.elevation_m[r * 201 + 199] = -9999.0;
        dem.elevation_m[r * 201 + 200] = -9999.0;
    }
    let m = dem_horizon(Point2::new(1005.0, 1005.0), 0.0, &dem, 72, 1100.0, 10.0).unwrap();
    assert!(m.gamma_deg.iter().all(|&g| g == 0.0));
}

#[test]
fn dem_cone_matches_analytic_slope() {
    // Cone rising outward from the evaluation point with slope 0.2.
    let slope = 0.2;
    let center = Point2::new(1005.0, 1005.0);
    let mut dem = flat_dem(0.0);
    for r in 0..201 {
        for c in 0..201 {
            let p = Point2::new(c as f64 * 10.0 + 5.0, r as f64 * 10.0 + 5.0);
            dem.elevation_m[r * 201 + c] = 100.0 + slope * p.dist(center);
        }
    }
    // Step 50 m: the first samples stay far enough from the apex that
    // bilinear interpolation of the radial surface is accurate.
    let m = dem_horizon(center, 100.0, &dem, 72, 900.0, 50.0).unwrap();
    let expect = slope.atan().to_degrees();
    for (i, &g) in m.gamma_deg.iter().enumerate() {
        assert!((g - expect).abs() < 0.2, "sector {i}: {g} vs {expect}");
    }
}

#[test]
fn combine_identity_and_idempotence() {
    let m = HorizonMask::new((0..72).map(|i| (i % 30) as f64).collect()).unwrap();
    let zero = HorizonMask::open(72);
    assert_eq!(combine_masks(&[m.clone(), zero]).unwrap(), m);
    assert_eq!(combine_masks(&[m.clone(), m.clone()]).unwrap(), m);
    assert!(combine_masks(&[m, HorizonMask::open(36)]).is_err());
    assert!(combine_masks(&[]).is_err());
}

#[test]
fn svf_analytic_values() {
    assert!((sky_view_factor(&HorizonMask::open(72)) - 1.0).abs() < 1e-12);
    assert!(sky_view_factor(&HorizonMask::new(vec![90.0; 72]).unwrap()).abs() < 1e-12);
    let m = HorizonMask::new(vec![30.0; 72]).unwrap();
    assert!((sky_view_factor(&m) - 0.75).abs() < 1e-12);
}

/// Cosine-weighted hemisphere Monte-Carlo integration of the unobstructed
/// sky, independent of the closed form.
pub(super) fn svf_monte_carlo(mask: &HorizonMask, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut visible = 0usize;
    for _ in 0..samples {
        let az: f64 = rng.gen_range(0.0..360.0);
        let u: f64 = rng.gen();
        let elevation = u.sqrt().asin().to_degrees();
        if elevation > mask.gamma_deg[mask.sector_of(az)] {
            visible += 1;
        }
    }
    visible as f64 / samples as f64
}

#[test]
fn direct_blocked_examples() {
    let open = HorizonMask::open(72);
    assert!(!direct_blocked(&open, 180.0, 45.0));
    assert!(direct_blocked(&open, 180.0, -3.0));
    let mut m = HorizonMask::open(72);
    m.gamma_deg[36] = 45.0;
    assert!(direct_blocked(&m, 182.0, 30.0));
    assert!(!direct_blocked(&m, 2.0, 30.0));
    assert!(!direct_blocked(&m, 182.0, 50.0));
}

#[test]
fn displacement_changes_gamma_boundedly() {
    // Ring-shaped wall: inner face about 20 m away in every sector.
    let n = 72;
    let outer: Vec<Point2> = (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            Point2::new(25.0 * a.cos(), 25.0 * a.sin())
        })
        .collect();
    let hole: Vec<Point2> = (0..n)
        .rev()
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            Point2::new(20.0 * a.cos(), 20.0 * a.sin())
        })
        .collect();
    let ring = Polygon2::new_unchecked(outer, vec![hole]);
    let index = SpatialIndex::build(vec![building("ring", ring, 13.0, 0.0)]);
    let before = building_horizon(Point2::new(0.0, 0.0), 3.0, &index, 72, 500.0).unwrap();
    let after = building_horizon(Point2::new(1.0, 0.0), 3.0, &index, 72, 500.0).unwrap();
    // Inner face sits between the 20 m apothem and the 20 m radius; moving
    // 1 m keeps every sector's hit distance within [apothem - 1, 20 + 1].
    let apothem = 20.0 * (std::f64::consts::PI / n as f64).cos();
    let bound = (10.0 / (apothem - 1.0)).atan().to_degrees()
        - (10.0f64 / 21.0).atan().to_degrees();
    for (b, a) in before.gamma_deg.iter().zip(&after.gamma_deg) {
        assert!((a - b).abs() <= bound + 1e-9, "delta {} bound {bound}", (a - b).abs());
    }
}

#[test]
fn mask_csv_round_trip() {
    let m = HorizonMask::new((0..72).map(|i| (i as f64) * 0.7).collect()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.csv");
    m.write_csv(&path).unwrap();
    let back = HorizonMask::read_csv(&path).unwrap();
    assert_eq!(m, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn svf_matches_monte_carlo(gammas in proptest::collection::vec(0.0f64..90.0, 72), seed in 0u64..1000) {
        let mask = HorizonMask::new(gammas).unwrap();
        let mc = svf_monte_carlo(&mask, 300_000, seed);
        let svf = sky_view_factor(&mask);
        prop_assert!((svf - mc).abs() < 0.01, "svf {svf} mc {mc}");
    }

    #[test]
    fn svf_monotone_in_gamma(gammas in proptest::collection::vec(0.0f64..89.0, 72), i in 0usize..72, bump in 0.1f64..1.0) {
        let base = HorizonMask::new(gammas.clone()).unwrap();
        let mut raised = gammas;
        raised[i] = (raised[i] + bump).min(90.0);
        let raised = HorizonMask::new(raised).unwrap();
        prop_assert!(sky_view_factor(&raised) < sky_view_factor(&base));
    }

    #[test]
    fn combine_commutative_associative_never_lowers(
        a in proptest::collection::vec(0.0f64..90.0, 24),
        b in proptest::collection::vec(0.0f64..90.0, 24),
        c in proptest::collection::vec(0.0f64..90.0, 24),
    ) {
        let (a, b, c) = (
            HorizonMask::new(a).unwrap(),
            HorizonMask::new(b).unwrap(),
            HorizonMask::new(c).unwrap(),
        );
        let ab = combine_masks(&[a.clone(), b.clone()]).unwrap();
        let ba = combine_masks(&[b.clone(), a.clone()]).unwrap();
        prop_assert_eq!(&ab, &ba);
        let ab_c = combine_masks(&[ab.clone(), c.clone()]).unwrap();
        let a_bc = combine_masks(&[a.clone(), combine_masks(&[b.clone(), c]).unwrap()]).unwrap();
        prop_assert_eq!(&ab_c, &a_bc);
        for (i, g) in ab.gamma_deg.iter().enumerate() {
            prop_assert!(*g >= a.gamma_deg[i] && *g >= b.gamma_deg[i]);
        }
    }
}
