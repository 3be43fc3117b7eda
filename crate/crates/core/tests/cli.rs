//! End-to-end tests of the `solarpot` binary: exit codes, the direct
//! potential formula, and equality between `run` and the chained
//! per-stage subcommands.

use std::path::{Path, PathBuf};
use std::process::Output;

use solarpot::geom::{Point2, Polygon2};
use solarpot::ingest::{self, RunConfig};
use solarpot::roofs::{Building, RoofSection};
use solarpot::solar::clearsky_year;

const SITE: (f64, f64) = (43.6, 3.9);

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon2 {
    Polygon2::rect(Point2::new(x0, y0), Point2::new(x1, y1)).unwrap()
}

fn write_fixture(dir: &Path, n_buildings: usize) -> PathBuf {
    let mut buildings = Vec::new();
    let mut sections = Vec::new();
    for k in 0..n_buildings {
        let bx = k as f64 * 40.0;
        let bid = format!("b{k:02}");
        buildings.push(Building {
            id: bid.clone(),
            footprint: rect(bx, 0.0, bx + 12.0, 8.0),
            height_m: 6.0 + k as f64,
            ground_elev_m: 0.0,
            extra: Default::default(),
        });
        for (suffix, y0, y1, az) in [("a", 0.0, 4.0, 180.0), ("b", 4.0, 8.0, 0.0)] {
            sections.push(RoofSection {
                id: format!("s{k:02}{suffix}"),
                building_id: bid.clone(),
                plan_polygon: rect(bx, y0, bx + 12.0, y1),
                ridge_segments: vec![],
                pitch_deg: Some(35.0),
                // Half the buildings exercise the azimuth stage.
                azimuth_deg: if k % 2 == 1 { None } else { Some(az) },
                features: Default::default(),
                extra: Default::default(),
            });
        }
    }
    ingest::save_buildings(&dir.join("buildings.geojson"), &buildings).unwrap();
    ingest::save_sections(&dir.join("sections.geojson"), &sections).unwrap();
    let weather = clearsky_year(2019, SITE.0, SITE.1).unwrap();
    ingest::save_weather(&dir.join("weather.csv"), &weather).unwrap();

    let mut cfg = RunConfig::default();
    cfg.site.latitude_deg = SITE.0;
    cfg.site.longitude_deg = SITE.1;
    cfg.paths.buildings = dir.join("buildings.geojson").display().to_string();
    cfg.paths.sections = dir.join("sections.geojson").display().to_string();
    cfg.paths.weather = dir.join("weather.csv").display().to_string();
    cfg.paths.report_out = dir.join("report.geojson").display().to_string();
    cfg.paths.summary_out = dir.join("summary.json").display().to_string();
    let cfg_path = dir.join("config.json");
    cfg.save(&cfg_path).unwrap();
    cfg_path
}

fn run_cli(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_solarpot"))
        .args(args)
        .output()
        .expect("failed to launch the CLI binary")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_weather_file_exits_2_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(tmp.path(), 2);
    std::fs::remove_file(tmp.path().join("weather.csv")).unwrap();
    let out = run_cli(&["run", "--config", &cfg_path.display().to_string()]);
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("weather.csv"), "stderr: {stderr}");
}

#[test]
fn empty_sections_run_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(tmp.path(), 2);
    ingest::save_sections(&tmp.path().join("sections.geojson"), &[]).unwrap();
    let out = run_cli(&["run", "--config", &cfg_path.display().to_string()]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.geojson")).unwrap())
            .unwrap();
    assert_eq!(report["totals"]["n_sections"], 0);
    assert_eq!(report["features"].as_array().unwrap().len(), 0);
}

#[test]
fn potential_direct_formula_prints_value() {
    let out = run_cli(&[
        "potential",
        "--modules",
        "10",
        "--power-wp",
        "400",
        "--pvout",
        "1200",
    ]);
    assert_exit(&out, 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "4800");

    let out = run_cli(&["potential", "--modules", "-1", "--power-wp", "400", "--pvout", "1200"]);
    assert_exit(&out, 2);
}

#[test]
fn chained_stages_match_the_full_run_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(tmp.path(), 4);
    let cfg = cfg_path.display().to_string();

    let out = run_cli(&["run", "--config", &cfg]);
    assert_exit(&out, 0);

    // The same pipeline, one stage per invocation, files in between.
    let stage_out = |name: &str| tmp.path().join(name).display().to_string();
    let stages: [(&[&str], &str); 7] = [
        (&["regularize"], "r1.geojson"),
        (&["azimuth"], "r2.geojson"),
        (&["pitch", "predict"], "r3.geojson"),
        (&["pack"], "r4.geojson"),
        (&["shade"], "r5.geojson"),
        (&["pvout"], "r6.geojson"),
        (&["potential"], "chained_report.geojson"),
    ];
    let mut prev = tmp.path().join("sections.geojson").display().to_string();
    for (argv, out_name) in stages {
        let next = stage_out(out_name);
        let mut args: Vec<&str> = argv.to_vec();
        args.extend(["--config", &cfg, "--in", &prev, "--out", &next]);
        let out = run_cli(&args);
        assert_exit(&out, 0);
        prev = next;
    }

    let full = std::fs::read(tmp.path().join("report.geojson")).unwrap();
    let chained = std::fs::read(tmp.path().join("chained_report.geojson")).unwrap();
    assert_eq!(full, chained, "chained stage output diverged from `run`");
}

#[test]
fn aggregate_conserves_the_report_total() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_fixture(tmp.path(), 5);
    let cfg = cfg_path.display().to_string();
    assert_exit(&run_cli(&["run", "--config", &cfg]), 0);

    let agg_path = tmp.path().join("aggregate.geojson");
    let out = run_cli(&[
        "aggregate",
        "--config",
        &cfg,
        "--out",
        &agg_path.display().to_string(),
    ]);
    assert_exit(&out, 0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.geojson")).unwrap())
            .unwrap();
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&agg_path).unwrap()).unwrap();
    let total = report["totals"]["potential_kwh_per_year"].as_f64().unwrap();
    let cell_sum: f64 = agg["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["properties"]["potential_kwh_per_year"].as_f64().unwrap())
        .sum();
    assert!(total > 0.0);
    assert!((total - cell_sum).abs() <= 1e-6 * total.max(1.0));
}
