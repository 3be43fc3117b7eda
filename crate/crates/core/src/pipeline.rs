//! End-to-end orchestration: the per-stage transforms over section
//! collections, report assembly, and spatial aggregation.
//!
//! Stages communicate through the section `extra` property map (keys below),
//! so running them in memory or chaining them through saved files produces
//! byte-identical reports. A failed section is marked with an `error`
//! property instead of aborting the run; later stages skip it and report
//! assembly turns it into an error record.

use std::collections::HashMap;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::geom::Point2;
use crate::ingest::{RunConfig, ShadingConfig};
use crate::packing::{pack_panels, PanelSpec};
use crate::pitch::PitchModel;
use crate::roofs::{self, AzimuthOptions, Building, RoofObject, RoofSection};
use crate::shading::{
    combine_masks, dem_horizon, horizon_from_buildings, prefilter_buildings, sky_view_factor,
    DemRaster, HorizonMask, SpatialIndex,
};
use crate::solar::{pvout_annual, PvSystemConfig, WeatherSeries};
use crate::{Error, Result};

pub const KEY_ERROR: &str = "error";
pub const KEY_N_MODULES: &str = "n_modules";
pub const KEY_SVF: &str = "svf";
pub const KEY_HORIZON: &str = "horizon_gamma_deg";
pub const KEY_PVOUT: &str = "pvout_kwh_per_kwp";
pub const KEY_PVOUT_DIRECT: &str = "pvout_direct_kwh_per_kwp";
pub const KEY_PVOUT_DIFFUSE: &str = "pvout_diffuse_kwh_per_kwp";

fn mark_error(s: &mut RoofSection, message: impl Into<String>) {
    // First failure wins; later stages skip the section anyway.
    if !s.extra.contains_key(KEY_ERROR) {
        s.extra.insert(KEY_ERROR.into(), Value::String(message.into()));
    }
}

fn is_failed(s: &RoofSection) -> bool {
    s.extra.contains_key(KEY_ERROR)
}

fn get_num(s: &RoofSection, key: &str) -> Option<f64> {
    s.extra.get(key).and_then(Value::as_f64)
}

/// Section indices grouped by building, in first-appearance order.
fn building_groups(sections: &[RoofSection]) -> Vec<Vec<usize>> {
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in sections.iter().enumerate() {
        let slot = *by_id.entry(&s.building_id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(i);
    }
    groups
}

pub fn building_map(buildings: &[Building]) -> HashMap<&str, &Building> {
    buildings.iter().map(|b| (b.id.as_str(), b)).collect()
}

// ---------------------------------------------------------------------------
// Stages

/// Replace each section's plan polygon with its regularized rectangle.
/// Sections that vanish under regularization are marked failed.
pub fn stage_regularize(buildings: &[Building], sections: &mut [RoofSection]) {
    let map = building_map(buildings);
    for group in building_groups(sections) {
        let bid = sections[group[0]].building_id.clone();
        let Some(building) = map.get(bid.as_str()) else {
            for &i in &group {
                mark_error(&mut sections[i], format!("unknown building {bid}"));
            }
            continue;
        };
        let live: Vec<usize> = group.iter().copied().filter(|&i| !is_failed(&sections[i])).collect();
        let raw: Vec<_> = live.iter().map(|&i| sections[i].plan_polygon.clone()).collect();
        match roofs::regularize_sections(&building.footprint, &raw) {
            Ok(regular) => {
                for (&i, reg) in live.iter().zip(regular) {
                    match reg {
                        Some(poly) => sections[i].plan_polygon = poly,
                        None => mark_error(
                            &mut sections[i],
                            "section removed by regularization (disjoint from footprint)",
                        ),
                    }
                }
            }
            Err(e) => {
                for &i in &live {
                    mark_error(&mut sections[i], format!("regularization failed: {e}"));
                }
            }
        }
    }
}

/// Fill missing azimuths from section geometry; provided values are kept.
pub fn stage_azimuth(sections: &mut [RoofSection], opts: &AzimuthOptions) {
    for group in building_groups(sections) {
        let members: Vec<RoofSection> = group.iter().map(|&i| sections[i].clone()).collect();
        for (k, &i) in group.iter().enumerate() {
            if is_failed(&sections[i]) || sections[i].azimuth_deg.is_some() {
                continue;
            }
            let neighbors: Vec<RoofSection> = members
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, s)| s.clone())
                .collect();
            match roofs::estimate_azimuth(&sections[i], &neighbors, opts) {
                Ok(az) => sections[i].azimuth_deg = Some(az),
                Err(e) => mark_error(&mut sections[i], format!("azimuth estimation failed: {e}")),
            }
        }
    }
}

/// Fill missing pitches from the trained model; provided values are kept.
pub fn stage_pitch(
    sections: &mut [RoofSection],
    model: Option<&PitchModel>,
    latitude_deg: f64,
) {
    for s in sections.iter_mut() {
        if is_failed(s) || s.pitch_deg.is_some() {
            continue;
        }
        match model {
            Some(m) => s.pitch_deg = Some(m.predict(&s.features, latitude_deg)),
            None => mark_error(s, "pitch missing and no pitch model configured"),
        }
    }
}

/// Pack panels on every section; writes `n_modules`.
pub fn stage_pack(sections: &mut [RoofSection], objects: &[RoofObject], panel: &PanelSpec) {
    let mut by_section: HashMap<&str, Vec<RoofObject>> = HashMap::new();
    for o in objects {
        by_section.entry(o.section_id.as_str()).or_default().push(o.clone());
    }
    let empty: Vec<RoofObject> = Vec::new();
    let groups = building_groups(sections);
    let results: Vec<Vec<(usize, Result<usize>)>> = groups
        .par_iter()
        .map(|group| {
            group
                .iter()
                .filter(|&&i| !is_failed(&sections[i]))
                .map(|&i| {
                    let s = &sections[i];
                    let obstacles = by_section.get(s.id.as_str()).unwrap_or(&empty);
                    (i, pack_panels(s, obstacles, panel).map(|l| l.count))
                })
                .collect()
        })
        .collect();
    for (i, res) in results.into_iter().flatten() {
        match res {
            Ok(n) => {
                sections[i].extra.insert(KEY_N_MODULES.into(), json!(n));
            }
            Err(e) => mark_error(&mut sections[i], format!("packing failed: {e}")),
        }
    }
}

fn mask_for_section(
    s: &RoofSection,
    buildings: &HashMap<&str, &Building>,
    index: &SpatialIndex,
    dem: Option<&DemRaster>,
    cfg: &ShadingConfig,
) -> Result<HorizonMask> {
    let building = buildings
        .get(s.building_id.as_str())
        .ok_or_else(|| Error::Referential(format!("unknown building {}", s.building_id)))?;
    let eval = s.plan_polygon.centroid();
    let eval_h = building.top_elev_m();
    let candidates = prefilter_buildings(index, eval, eval_h, cfg.min_gamma_deg)?;
    let mask = horizon_from_buildings(
        eval,
        eval_h,
        candidates,
        cfg.n_sectors,
        cfg.building_max_dist_m,
    )?;
    match dem {
        None => Ok(mask),
        Some(dem) => {
            let step = cfg.dem_step_m.unwrap_or(dem.cell_size_m);
            let d = dem_horizon(eval, eval_h, dem, cfg.n_sectors, cfg.dem_max_dist_m, step)?;
            combine_masks(&[mask, d])
        }
    }
}

/// Compute the horizon mask per section; writes `horizon_gamma_deg` + `svf`.
pub fn stage_shade(
    sections: &mut [RoofSection],
    buildings: &[Building],
    index: &SpatialIndex,
    dem: Option<&DemRaster>,
    cfg: &ShadingConfig,
) {
    let map = building_map(buildings);
    let groups = building_groups(sections);
    let results: Vec<Vec<(usize, Result<HorizonMask>)>> = groups
        .par_iter()
        .map(|group| {
            group
                .iter()
                .filter(|&&i| !is_failed(&sections[i]))
                .map(|&i| (i, mask_for_section(&sections[i], &map, index, dem, cfg)))
                .collect()
        })
        .collect();
    for (i, res) in results.into_iter().flatten() {
        match res {
            Ok(mask) => {
                let svf = sky_view_factor(&mask);
                let gammas: Vec<Value> = mask.gamma_deg.iter().map(|&g| json!(g)).collect();
                sections[i].extra.insert(KEY_HORIZON.into(), Value::Array(gammas));
                sections[i].extra.insert(KEY_SVF.into(), json!(svf));
            }
            Err(e) => mark_error(&mut sections[i], format!("shading failed: {e}")),
        }
    }
}

fn section_mask_from_extra(s: &RoofSection) -> Result<HorizonMask> {
    let arr = s
        .extra
        .get(KEY_HORIZON)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::State(format!("section {}: no horizon mask (run shade first)", s.id)))?;
    let gammas: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
    HorizonMask::new(gammas.ok_or_else(|| {
        Error::State(format!("section {}: non-numeric horizon mask", s.id))
    })?)
}

/// Annual specific yield per section; writes the pvout breakdown keys.
pub fn stage_pvout(sections: &mut [RoofSection], weather: &WeatherSeries, pv: &PvSystemConfig) {
    let groups = building_groups(sections);
    let results: Vec<Vec<(usize, Result<crate::solar::PvoutBreakdown>)>> = groups
        .par_iter()
        .map(|group| {
            group
                .iter()
                .filter(|&&i| !is_failed(&sections[i]))
                .map(|&i| {
                    let s = &sections[i];
                    let run = || -> Result<crate::solar::PvoutBreakdown> {
                        let mask = section_mask_from_extra(s)?;
                        let pitch = s.pitch_deg.ok_or_else(|| {
                            Error::State(format!("section {}: no pitch", s.id))
                        })?;
                        let azimuth = s.azimuth_deg.ok_or_else(|| {
                            Error::State(format!("section {}: no azimuth", s.id))
                        })?;
                        pvout_annual(weather, &mask, pitch, azimuth, pv)
                    };
                    (i, run())
                })
                .collect()
        })
        .collect();
    for (i, res) in results.into_iter().flatten() {
        match res {
            Ok(b) => {
                let extra = &mut sections[i].extra;
                extra.insert(KEY_PVOUT.into(), json!(b.total));
                extra.insert(KEY_PVOUT_DIRECT.into(), json!(b.direct));
                extra.insert(KEY_PVOUT_DIFFUSE.into(), json!(b.diffuse));
            }
            Err(e) => mark_error(&mut sections[i], format!("energy model failed: {e}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Report

/// solar potential (kWh/year) = N_modules * P_max(kW) * PV_out(kWh/kWp/yr)
pub fn potential_kwh_per_year(n_modules: f64, power_wp: f64, pvout: f64) -> Result<f64> {
    if n_modules < 0.0 || power_wp < 0.0 || pvout < 0.0 {
        return Err(Error::Argument("potential inputs must be non-negative".into()));
    }
    Ok(n_modules * (power_wp / 1000.0) * pvout)
}

/// Assemble the final report from fully-staged sections. Rows are sorted by
/// section id; failed sections become error records instead of features.
pub fn assemble_report(sections: &[RoofSection], panel: &PanelSpec) -> Result<Value> {
    let mut ordered: Vec<&RoofSection> = sections.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut features = Vec::new();
    let mut errors = Vec::new();
    let mut total_potential = 0.0;
    let mut total_modules = 0u64;
    for s in ordered {
        if let Some(msg) = s.extra.get(KEY_ERROR).and_then(Value::as_str) {
            errors.push(json!({
                "section_id": s.id,
                "building_id": s.building_id,
                "message": msg,
            }));
            continue;
        }
        let n_modules = get_num(s, KEY_N_MODULES)
            .ok_or_else(|| Error::State(format!("section {}: no module count (run pack first)", s.id)))?;
        let pvout = get_num(s, KEY_PVOUT)
            .ok_or_else(|| Error::State(format!("section {}: no yield (run pvout first)", s.id)))?;
        let potential = potential_kwh_per_year(n_modules, panel.power_wp, pvout)?;
        total_potential += potential;
        total_modules += n_modules as u64;

        let mut props = Map::new();
        props.insert("id".into(), json!(s.id));
        props.insert("building_id".into(), json!(s.building_id));
        props.insert("azimuth_deg".into(), json!(s.azimuth_deg));
        props.insert("pitch_deg".into(), json!(s.pitch_deg));
        props.insert("n_modules".into(), json!(n_modules as u64));
        props.insert(KEY_PVOUT.into(), json!(pvout));
        props.insert(KEY_PVOUT_DIRECT.into(), json!(get_num(s, KEY_PVOUT_DIRECT)));
        props.insert(KEY_PVOUT_DIFFUSE.into(), json!(get_num(s, KEY_PVOUT_DIFFUSE)));
        props.insert(KEY_SVF.into(), json!(get_num(s, KEY_SVF)));
        props.insert("potential_kwh_per_year".into(), json!(potential));
        // Passthrough of untouched input properties, minus the working keys.
        for (k, v) in &s.extra {
            if !matches!(
                k.as_str(),
                KEY_ERROR
                    | KEY_N_MODULES
                    | KEY_SVF
                    | KEY_HORIZON
                    | KEY_PVOUT
                    | KEY_PVOUT_DIRECT
                    | KEY_PVOUT_DIFFUSE
            ) {
                props.insert(k.clone(), v.clone());
            }
        }
        let ring: Vec<Value> = {
            let ext = s.plan_polygon.exterior();
            let mut pts: Vec<Value> = ext.iter().map(|p| json!([p.x, p.y])).collect();
            if let Some(first) = ext.first() {
                pts.push(json!([first.x, first.y]));
            }
            pts
        };
        features.push(json!({
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        }));
    }

    Ok(json!({
        "type": "FeatureCollection",
        "crs_local": true,
        "version": env!("CARGO_PKG_VERSION"),
        "totals": {
            "n_sections": sections.len(),
            "n_ok": features.len(),
            "n_errors": errors.len(),
            "n_modules": total_modules,
            "potential_kwh_per_year": total_potential,
        },
        "errors": errors,
        "features": features,
    }))
}

/// Fraction of sections carrying an error record, used for the exit status.
pub fn report_error_fraction(report: &Value) -> f64 {
    let totals = &report["totals"];
    let n = totals["n_sections"].as_f64().unwrap_or(0.0);
    let e = totals["n_errors"].as_f64().unwrap_or(0.0);
    if n == 0.0 {
        0.0
    } else {
        e / n
    }
}

// ---------------------------------------------------------------------------
// Aggregation

/// Bin report rows by section centroid into a regular planar grid and sum
/// potentials. Totals are conserved exactly (same additions, same order).
pub fn aggregate_report(report: &Value, cell_size_m: f64) -> Result<Value> {
    if cell_size_m <= 0.0 {
        return Err(Error::Argument("cell size must be positive".into()));
    }
    let features = report["features"]
        .as_array()
        .ok_or_else(|| Error::Argument("report has no features array".into()))?;

    struct Cell {
        potential: f64,
        buildings: Vec<String>,
        n_sections: usize,
    }
    let mut cells: HashMap<(i64, i64), Cell> = HashMap::new();
    for f in features {
        let ring = f["geometry"]["coordinates"][0]
            .as_array()
            .ok_or_else(|| Error::Argument("report feature has no polygon ring".into()))?;
        let pts: Vec<Point2> = ring
            .iter()
            .filter_map(|p| Some(Point2::new(p[0].as_f64()?, p[1].as_f64()?)))
            .collect();
        // Centroid of the distinct ring vertices (ring closes on itself).
        let n = pts.len().saturating_sub(1).max(1);
        let cx = pts[..n].iter().map(|p| p.x).sum::<f64>() / n as f64;
        let cy = pts[..n].iter().map(|p| p.y).sum::<f64>() / n as f64;
        let key = ((cx / cell_size_m).floor() as i64, (cy / cell_size_m).floor() as i64);
        let potential = f["properties"]["potential_kwh_per_year"].as_f64().unwrap_or(0.0);
        let building = f["properties"]["building_id"].as_str().unwrap_or("").to_owned();
        let cell = cells.entry(key).or_insert(Cell {
            potential: 0.0,
            buildings: Vec::new(),
            n_sections: 0,
        });
        cell.potential += potential;
        cell.n_sections += 1;
        if !cell.buildings.contains(&building) {
            cell.buildings.push(building);
        }
    }

    let mut keys: Vec<(i64, i64)> = cells.keys().copied().collect();
    keys.sort();
    let features: Vec<Value> = keys
        .iter()
        .map(|&(cx, cy)| {
            let cell = &cells[&(cx, cy)];
            let (x0, y0) = (cx as f64 * cell_size_m, cy as f64 * cell_size_m);
            let (x1, y1) = (x0 + cell_size_m, y0 + cell_size_m);
            json!({
                "type": "Feature",
                "properties": {
                    "id": format!("{cx}_{cy}"),
                    "potential_kwh_per_year": cell.potential,
                    "building_count": cell.buildings.len(),
                    "section_count": cell.n_sections,
                },
                "geometry": {"type": "Polygon", "coordinates":
                    [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]},
            })
        })
        .collect();
    Ok(json!({
        "type": "FeatureCollection",
        "crs_local": true,
        "cell_size_m": cell_size_m,
        "features": features,
    }))
}

// ---------------------------------------------------------------------------
// Full run

pub struct RunOutput {
    pub report: Value,
    pub error_fraction: f64,
}

/// Execute every stage over loaded inputs. Equivalent to chaining the stage
/// subcommands through files.
pub fn run_pipeline(
    cfg: &RunConfig,
    buildings: &[Building],
    mut sections: Vec<RoofSection>,
    objects: &[RoofObject],
    weather: &WeatherSeries,
    dem: Option<&DemRaster>,
    pitch_model: Option<&PitchModel>,
) -> Result<RunOutput> {
    let opts = AzimuthOptions {
        flat_roof_azimuth_deg: cfg.shading.flat_roof_azimuth_deg,
        northern_hemisphere: cfg.site.latitude_deg >= 0.0,
    };
    stage_regularize(buildings, &mut sections);
    stage_azimuth(&mut sections, &opts);
    stage_pitch(&mut sections, pitch_model, cfg.site.latitude_deg);
    stage_pack(&mut sections, objects, &cfg.panel);
    let index = SpatialIndex::build(buildings.to_vec());
    stage_shade(&mut sections, buildings, &index, dem, &cfg.shading);
    stage_pvout(&mut sections, weather, &cfg.pv);
    let report = assemble_report(&sections, &cfg.panel)?;
    let error_fraction = report_error_fraction(&report);
    Ok(RunOutput { report, error_fraction })
}

/// Load every input referenced by the config, run the pipeline in a pool of
/// `cfg.workers` threads, and write the report and summary files. Shared by
/// the CLI and the C bindings.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput> {
    use std::path::Path;

    cfg.validate()?;
    let started = std::time::Instant::now();
    let (buildings, proj) = crate::ingest::load_buildings(Path::new(&cfg.paths.buildings), None)?;
    let ids: std::collections::HashSet<String> =
        buildings.iter().map(|b| b.id.clone()).collect();
    let (sections, _) =
        crate::ingest::load_sections(Path::new(&cfg.paths.sections), proj.as_ref(), Some(&ids))?;
    let objects = match &cfg.paths.objects {
        None => vec![],
        Some(p) => {
            let sids: std::collections::HashSet<String> =
                sections.iter().map(|s| s.id.clone()).collect();
            crate::ingest::load_objects(Path::new(p), proj.as_ref(), Some(&sids))?.0
        }
    };
    let weather = crate::ingest::load_weather(
        Path::new(&cfg.paths.weather),
        cfg.site.latitude_deg,
        cfg.site.longitude_deg,
    )?;
    let dem = match &cfg.paths.dem {
        None => None,
        Some(p) => Some(crate::ingest::load_dem(Path::new(p))?),
    };
    let model = match &cfg.paths.pitch_model {
        Some(p) if Path::new(p).exists() => Some(PitchModel::load(Path::new(p))?),
        _ => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    let out = pool.install(|| {
        run_pipeline(cfg, &buildings, sections, &objects, &weather, dem.as_ref(), model.as_ref())
    })?;

    write_json(Path::new(&cfg.paths.report_out), &out.report)?;
    let summary = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg)?,
        "totals": out.report["totals"],
        "error_fraction": out.error_fraction,
        "elapsed_s": started.elapsed().as_secs_f64(),
    });
    write_json(Path::new(&cfg.paths.summary_out), &summary)?;
    Ok(out)
}

pub fn write_json(path: &std::path::Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests;
