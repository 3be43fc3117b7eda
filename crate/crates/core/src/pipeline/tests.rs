use serde_json::Value;

use super::*;
use crate::geom::{Point2, Polygon2};
use crate::ingest;
use crate::roofs::{Building, RoofSection};
use crate::solar::clearsky_year;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2 {
    Polygon2::new(
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ],
        vec![],
    )
    .unwrap()
}

fn section(id: &str, bid: &str, poly: Polygon2) -> RoofSection {
    RoofSection {
        id: id.into(),
        building_id: bid.into(),
        plan_polygon: poly,
        ridge_segments: vec![],
        pitch_deg: None,
        azimuth_deg: None,
        features: Default::default(),
        extra: Default::default(),
    }
}

/// Ten gable buildings on a 5x2 grid; 23 sections (three buildings carry an
/// extra flat section). Every section arrives with pitch; about half arrive
/// with azimuth, the rest lean on geometric estimation.
fn town() -> (Vec<Building>, Vec<RoofSection>) {
    let mut buildings = Vec::new();
    let mut sections = Vec::new();
    for k in 0..10usize {
        let bx = (k % 5) as f64 * 40.0;
        let by = (k / 5) as f64 * 60.0;
        let bid = format!("b{k:02}");
        buildings.push(Building {
            id: bid.clone(),
            footprint: rect(bx, by, bx + 12.0, by + 8.0),
            height_m: 6.0 + k as f64,
            ground_elev_m: 0.0,
            extra: Default::default(),
        });
        // North/south gable halves; ridge along the middle.
        let mut south = section(&format!("s{k:02}a"), &bid, rect(bx, by, bx + 12.0, by + 4.0));
        let mut north = section(&format!("s{k:02}b"), &bid, rect(bx, by + 4.0, bx + 12.0, by + 8.0));
        south.pitch_deg = Some(35.0);
        north.pitch_deg = Some(35.0);
        if k % 2 == 0 {
            south.azimuth_deg = Some(180.0);
            north.azimuth_deg = Some(0.0);
        }
        sections.push(south);
        sections.push(north);
        if k < 3 {
            let mut flat = section(
                &format!("s{k:02}c"),
                &bid,
                rect(bx + 2.0, by + 1.0, bx + 10.0, by + 7.0),
            );
            flat.pitch_deg = Some(2.0);
            sections.push(flat);
        }
    }
    (buildings, sections)
}

fn fixture_config() -> ingest::RunConfig {
    let mut cfg = ingest::RunConfig::default();
    cfg.site.latitude_deg = 43.6;
    cfg.site.longitude_deg = 3.9;
    cfg
}

fn run_town() -> Value {
    let (buildings, sections) = town();
    let cfg = fixture_config();
    let weather = clearsky_year(2019, 43.6, 3.9).unwrap();
    run_pipeline(&cfg, &buildings, sections, &[], &weather, None, None)
        .unwrap()
        .report
}

#[test]
fn town_report_has_all_rows_populated() {
    let report = run_town();
    let features = report["features"].as_array().unwrap();
    assert_eq!(features.len(), 23);
    assert_eq!(report["errors"].as_array().unwrap().len(), 0);
    let mut prev_id = String::new();
    for f in features {
        let p = &f["properties"];
        let id = p["id"].as_str().unwrap().to_owned();
        assert!(id > prev_id, "rows sorted by section id");
        prev_id = id;
        assert!(p["building_id"].as_str().is_some());
        let pitch = p["pitch_deg"].as_f64().unwrap();
        let azimuth = p["azimuth_deg"].as_f64().unwrap();
        assert!((0.0..90.0).contains(&pitch));
        assert!((0.0..360.0).contains(&azimuth));
        assert!(p["n_modules"].as_u64().is_some());
        let svf = p["svf"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&svf));
        let pvout = p["pvout_kwh_per_kwp"].as_f64().unwrap();
        assert!(pvout > 500.0 && pvout < 2500.0, "pvout {pvout}");
        let direct = p["pvout_direct_kwh_per_kwp"].as_f64().unwrap();
        let diffuse = p["pvout_diffuse_kwh_per_kwp"].as_f64().unwrap();
        assert!((direct + diffuse - pvout).abs() < 1e-6 * pvout);
    }
}

#[test]
fn potential_identity_holds_per_row() {
    let report = run_town();
    let power_wp = crate::packing::PanelSpec::default().power_wp;
    let mut total = 0.0;
    for f in report["features"].as_array().unwrap() {
        let p = &f["properties"];
        let n = p["n_modules"].as_u64().unwrap() as f64;
        let pvout = p["pvout_kwh_per_kwp"].as_f64().unwrap();
        let pot = p["potential_kwh_per_year"].as_f64().unwrap();
        let expect = n * (power_wp / 1000.0) * pvout;
        assert!((pot - expect).abs() <= 1e-9 * expect.max(1.0), "{pot} vs {expect}");
        total += pot;
    }
    let reported = report["totals"]["potential_kwh_per_year"].as_f64().unwrap();
    assert!((total - reported).abs() <= 1e-9 * reported.max(1.0));
}

#[test]
fn provided_pitch_and_azimuth_survive_untouched() {
    let report = run_town();
    for f in report["features"].as_array().unwrap() {
        let p = &f["properties"];
        let id = p["id"].as_str().unwrap();
        // Even-numbered buildings arrived with explicit azimuths.
        let k: usize = id[1..3].parse().unwrap();
        if k.is_multiple_of(2) && id.ends_with('a') {
            assert_eq!(p["azimuth_deg"].as_f64(), Some(180.0), "{id}");
        }
        if k.is_multiple_of(2) && id.ends_with('b') {
            assert_eq!(p["azimuth_deg"].as_f64(), Some(0.0), "{id}");
        }
        if id.ends_with('c') {
            assert_eq!(p["pitch_deg"].as_f64(), Some(2.0), "{id}");
            // Flat sections pick up the configured mounting azimuth.
            assert_eq!(p["azimuth_deg"].as_f64(), Some(180.0), "{id}");
        }
    }
}

#[test]
fn estimated_gable_azimuths_point_away_from_ridge() {
    let report = run_town();
    for f in report["features"].as_array().unwrap() {
        let p = &f["properties"];
        let id = p["id"].as_str().unwrap();
        let k: usize = id[1..3].parse().unwrap();
        if k % 2 == 1 && id.ends_with('a') {
            assert_eq!(p["azimuth_deg"].as_f64(), Some(180.0), "{id}");
        }
        if k % 2 == 1 && id.ends_with('b') {
            assert_eq!(p["azimuth_deg"].as_f64(), Some(0.0), "{id}");
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = serde_json::to_string(&run_town()).unwrap();
    let b = serde_json::to_string(&run_town()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn in_memory_run_matches_file_chained_stages() {
    let dir = std::env::temp_dir().join(format!("pipeline-chain-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (buildings, sections) = town();
    let cfg = fixture_config();
    let weather = clearsky_year(2019, 43.6, 3.9).unwrap();
    let direct = run_pipeline(&cfg, &buildings, sections.clone(), &[], &weather, None, None)
        .unwrap()
        .report;

    // Same stages, but round-tripping the collection through disk each time.
    let opts = crate::roofs::AzimuthOptions {
        flat_roof_azimuth_deg: cfg.shading.flat_roof_azimuth_deg,
        northern_hemisphere: true,
    };
    let mut current = sections;
    let reload = |step: &str, s: &[RoofSection]| -> Vec<RoofSection> {
        let p = dir.join(format!("{step}.geojson"));
        ingest::save_sections(&p, s).unwrap();
        ingest::load_sections(&p, None, None).unwrap().0
    };
    stage_regularize(&buildings, &mut current);
    current = reload("reg", &current);
    stage_azimuth(&mut current, &opts);
    current = reload("az", &current);
    stage_pitch(&mut current, None, cfg.site.latitude_deg);
    current = reload("pitch", &current);
    stage_pack(&mut current, &[], &cfg.panel);
    current = reload("pack", &current);
    let index = crate::shading::SpatialIndex::build(buildings.clone());
    stage_shade(&mut current, &buildings, &index, None, &cfg.shading);
    current = reload("shade", &current);
    stage_pvout(&mut current, &weather, &cfg.pv);
    current = reload("pvout", &current);
    let chained = assemble_report(&current, &cfg.panel).unwrap();

    assert_eq!(
        serde_json::to_string_pretty(&direct).unwrap(),
        serde_json::to_string_pretty(&chained).unwrap()
    );
}

#[test]
fn failed_sections_become_error_records_not_aborts() {
    let (buildings, mut sections) = town();
    // No pitch and no model: the pitch stage must fail this one section.
    sections[5].pitch_deg = None;
    let cfg = fixture_config();
    let weather = clearsky_year(2019, 43.6, 3.9).unwrap();
    let out = run_pipeline(&cfg, &buildings, sections, &[], &weather, None, None).unwrap();
    let errors = out.report["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert!(errors[0]["message"].as_str().unwrap().contains("pitch"));
    assert_eq!(out.report["features"].as_array().unwrap().len(), 22);
    assert!((out.error_fraction - 1.0 / 23.0).abs() < 1e-12);
}

#[test]
fn empty_sections_give_empty_report() {
    let cfg = fixture_config();
    let weather = clearsky_year(2019, 43.6, 3.9).unwrap();
    let out = run_pipeline(&cfg, &[], vec![], &[], &weather, None, None).unwrap();
    assert_eq!(out.report["features"].as_array().unwrap().len(), 0);
    assert_eq!(out.error_fraction, 0.0);
}

#[test]
fn potential_formula_examples() {
    assert_eq!(potential_kwh_per_year(10.0, 400.0, 1200.0).unwrap(), 4800.0);
    assert_eq!(potential_kwh_per_year(0.0, 400.0, 1200.0).unwrap(), 0.0);
    let x = 1234.5;
    assert_eq!(potential_kwh_per_year(1.0, 1000.0, x).unwrap(), x);
    assert!(potential_kwh_per_year(-1.0, 400.0, 1200.0).is_err());
    assert!(potential_kwh_per_year(1.0, -400.0, 1200.0).is_err());
}

#[test]
fn aggregate_single_section_single_cell() {
    let report = serde_json::json!({
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": {"building_id": "b1", "potential_kwh_per_year": 321.5},
            "geometry": {"type": "Polygon",
                "coordinates": [[[0.0,0.0],[10.0,0.0],[10.0,10.0],[0.0,10.0],[0.0,0.0]]]}
        }]
    });
    let agg = aggregate_report(&report, 100.0).unwrap();
    let cells = agg["features"].as_array().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0]["properties"]["potential_kwh_per_year"].as_f64(), Some(321.5));
    assert_eq!(cells[0]["properties"]["building_count"].as_u64(), Some(1));
}

#[test]
fn aggregate_conserves_totals() {
    let report = run_town();
    for cell_size in [10.0, 50.0, 1000.0] {
        let agg = aggregate_report(&report, cell_size).unwrap();
        let sum: f64 = agg["features"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["properties"]["potential_kwh_per_year"].as_f64().unwrap())
            .sum();
        let total = report["totals"]["potential_kwh_per_year"].as_f64().unwrap();
        assert!((sum - total).abs() <= 1e-6 * total, "cell {cell_size}: {sum} vs {total}");
    }
    // A cell larger than the whole extent collapses to one cell.
    let agg = aggregate_report(&report, 1e6).unwrap();
    assert_eq!(agg["features"].as_array().unwrap().len(), 1);
}

#[test]
fn taller_neighbors_reduce_svf_and_pvout() {
    let (mut buildings, sections) = town();
    let cfg = fixture_config();
    let weather = clearsky_year(2019, 43.6, 3.9).unwrap();
    let base = run_pipeline(&cfg, &buildings, sections.clone(), &[], &weather, None, None)
        .unwrap()
        .report;
    // Wall of very tall towers just south of building b00.
    for i in 0..3 {
        let x = -10.0 + i as f64 * 12.0;
        buildings.push(Building {
            id: format!("tower{i}"),
            footprint: rect(x, -20.0, x + 10.0, -12.0),
            height_m: 80.0,
            ground_elev_m: 0.0,
            extra: Default::default(),
        });
    }
    let shaded = run_pipeline(&cfg, &buildings, sections, &[], &weather, None, None)
        .unwrap()
        .report;
    let get = |rep: &Value, id: &str, key: &str| -> f64 {
        rep["features"]
            .as_array()
            .unwrap()
            .iter()
            .find(|f| f["properties"]["id"] == id)
            .unwrap()["properties"][key]
            .as_f64()
            .unwrap()
    };
    assert!(get(&shaded, "s00a", "svf") < get(&base, "s00a", "svf"));
    assert!(
        get(&shaded, "s00a", "pvout_kwh_per_kwp") < get(&base, "s00a", "pvout_kwh_per_kwp")
    );
}
