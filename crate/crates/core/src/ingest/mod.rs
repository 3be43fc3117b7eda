//! File ingestion and validation: GeoJSON-style feature collections for
//! buildings, roof sections and roof objects; weather CSV; ESRI ASCII DEM;
//! pitch model and run configuration JSON; plus the local planar projection.
//!
//! Collections are either pre-projected planar data (top-level
//! `"crs_local": true`) or WGS84, in which case coordinates are projected to
//! a local transverse-Mercator frame centered on the dataset centroid.
//! Savers always emit local planar collections.

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::geom::{Point2, Polygon2};
use crate::packing::PanelSpec;
use crate::pitch::FeatureVector;
use crate::roofs::{Building, RoofObject, RoofObjectKind, RoofSection};
use crate::shading::DemRaster;
use crate::solar::{PvSystemConfig, WeatherRecord, WeatherSeries};
use crate::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Spherical transverse-Mercator projection centered on (lat0, lon0).
/// Distance distortion within 50 km of the center stays below 0.01%.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Projection {
    pub lat0_deg: f64,
    pub lon0_deg: f64,
}

impl Projection {
    pub fn project(&self, lon_deg: f64, lat_deg: f64) -> Point2 {
        let phi = lat_deg.to_radians();
        let dlam = (lon_deg - self.lon0_deg).to_radians();
        let b = phi.cos() * dlam.sin();
        let x = EARTH_RADIUS_M / 2.0 * ((1.0 + b) / (1.0 - b)).ln();
        let y = EARTH_RADIUS_M
            * ((phi.tan() / dlam.cos()).atan() - self.lat0_deg.to_radians());
        Point2::new(x, y)
    }

    pub fn inverse(&self, p: Point2) -> (f64, f64) {
        let d = p.x / EARTH_RADIUS_M;
        let y = p.y / EARTH_RADIUS_M + self.lat0_deg.to_radians();
        let phi = (y.sin() / d.cosh()).asin();
        let dlam = (d.sinh() / y.cos()).atan();
        (self.lon0_deg + dlam.to_degrees(), phi.to_degrees())
    }
}

/// Great-circle distance between two WGS84 points, meters.
pub fn haversine_m(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = p2 - p1;
    let dlam = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlam / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

// ---------------------------------------------------------------------------
// GeoJSON-subset plumbing

fn fmt_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), message: message.into() }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| fmt_err(path, e.to_string()))
}

struct RawFeature {
    id: String,
    properties: Map<String, Value>,
    rings: Vec<Vec<(f64, f64)>>,
}

struct RawCollection {
    features: Vec<RawFeature>,
    crs_local: bool,
}

fn read_collection(path: &Path) -> Result<RawCollection> {
    let root = read_json(path)?;
    let obj = root.as_object().ok_or_else(|| fmt_err(path, "root is not an object"))?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(fmt_err(path, "expected a FeatureCollection"));
    }
    let crs_local = obj.get("crs_local").and_then(Value::as_bool).unwrap_or(false);
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| fmt_err(path, "missing features array"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let fobj = f.as_object().ok_or_else(|| fmt_err(path, format!("feature {i} is not an object")))?;
        let properties = fobj
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let id = properties
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{i}"));
        let geometry = fobj
            .get("geometry")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Schema { feature_id: id.clone(), message: "missing geometry".into() })?;
        if geometry.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(Error::Schema {
                feature_id: id.clone(),
                message: "geometry must be a Polygon".into(),
            });
        }
        let coords = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Schema { feature_id: id.clone(), message: "missing coordinates".into() })?;
        let mut rings = Vec::with_capacity(coords.len());
        for ring in coords {
            let ring = ring
                .as_array()
                .ok_or_else(|| Error::Schema { feature_id: id.clone(), message: "ring is not an array".into() })?;
            let mut pts = Vec::with_capacity(ring.len());
            for pos in ring {
                let pos = pos.as_array().filter(|a| a.len() >= 2).ok_or_else(|| Error::Schema {
                    feature_id: id.clone(),
                    message: "position must be [x, y]".into(),
                })?;
                let x = pos[0].as_f64();
                let y = pos[1].as_f64();
                match (x, y) {
                    (Some(x), Some(y)) => pts.push((x, y)),
                    _ => {
                        return Err(Error::Schema {
                            feature_id: id.clone(),
                            message: "non-numeric coordinate".into(),
                        })
                    }
                }
            }
            rings.push(pts);
        }
        if rings.is_empty() {
            return Err(Error::Schema { feature_id: id.clone(), message: "polygon has no rings".into() });
        }
        out.push(RawFeature { id, properties, rings });
    }
    Ok(RawCollection { features: out, crs_local })
}

/// Projection centered on the mean vertex of all features (geographic input).
fn centroid_projection(coll: &RawCollection) -> Option<Projection> {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for f in &coll.features {
        for ring in &f.rings {
            for &(x, y) in ring {
                sx += x;
                sy += y;
                n += 1;
            }
        }
    }
    (n > 0).then(|| Projection { lat0_deg: sy / n as f64, lon0_deg: sx / n as f64 })
}

fn feature_polygon(f: &RawFeature, proj: Option<&Projection>) -> Result<Polygon2> {
    let map_ring = |ring: &[(f64, f64)]| -> Vec<Point2> {
        ring.iter()
            .map(|&(x, y)| match proj {
                Some(p) => p.project(x, y),
                None => Point2::new(x, y),
            })
            .collect()
    };
    let exterior = map_ring(&f.rings[0]);
    let holes = f.rings[1..].iter().map(|r| map_ring(r)).collect();
    Polygon2::new(exterior, holes)
        .map_err(|e| Error::Geometry(format!("feature {}: {e}", f.id)))
}

fn req_str(f: &RawFeature, key: &str) -> Result<String> {
    f.properties
        .get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| Error::Schema {
            feature_id: f.id.clone(),
            message: format!("missing or non-string property '{key}'"),
        })
}

fn req_f64(f: &RawFeature, key: &str) -> Result<f64> {
    f.properties
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Schema {
            feature_id: f.id.clone(),
            message: format!("missing or non-numeric property '{key}'"),
        })
}

fn opt_f64(f: &RawFeature, key: &str) -> Result<Option<f64>> {
    match f.properties.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::Schema {
            feature_id: f.id.clone(),
            message: format!("non-numeric property '{key}'"),
        }),
    }
}

fn opt_str(f: &RawFeature, key: &str) -> Result<Option<String>> {
    match f.properties.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_str()
            .map(|s| Some(s.to_owned()))
            .ok_or_else(|| Error::Schema {
                feature_id: f.id.clone(),
                message: format!("non-string property '{key}'"),
            }),
    }
}

fn leftover(f: &RawFeature, known: &[&str]) -> Map<String, Value> {
    f.properties
        .iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Resolve the projection for one collection: local data needs none;
/// geographic data reuses `shared` when given, otherwise centers on itself.
fn resolve_projection(
    coll: &RawCollection,
    shared: Option<&Projection>,
) -> Option<Projection> {
    if coll.crs_local {
        None
    } else {
        shared.copied().or_else(|| centroid_projection(coll))
    }
}

// ---------------------------------------------------------------------------
// Buildings / sections / objects

const BUILDING_KEYS: [&str; 3] = ["id", "height_m", "ground_elev_m"];

/// Returns the buildings plus the projection used (None for planar input),
/// so sibling files can share the same frame.
pub fn load_buildings(
    path: &Path,
    shared: Option<&Projection>,
) -> Result<(Vec<Building>, Option<Projection>)> {
    let coll = read_collection(path)?;
    let proj = resolve_projection(&coll, shared);
    let mut out = Vec::with_capacity(coll.features.len());
    let mut seen = HashSet::new();
    for f in &coll.features {
        let id = req_str(f, "id")?;
        if !seen.insert(id.clone()) {
            return Err(Error::Schema { feature_id: id, message: "duplicate id".into() });
        }
        let height_m = req_f64(f, "height_m")?;
        let ground_elev_m = req_f64(f, "ground_elev_m")?;
        if height_m < 0.0 {
            return Err(Error::Range(format!("building {id}: negative height")));
        }
        out.push(Building {
            id,
            footprint: feature_polygon(f, proj.as_ref())?,
            height_m,
            ground_elev_m,
            extra: leftover(f, &BUILDING_KEYS),
        });
    }
    Ok((out, proj))
}

const SECTION_KEYS: [&str; 10] = [
    "id",
    "building_id",
    "pitch_deg",
    "azimuth_deg",
    "ridges",
    "roof_material",
    "roof_type",
    "building_height_m",
    "roof_shape",
    "footprint_area_m2",
];

fn ridges_from(f: &RawFeature, proj: Option<&Projection>) -> Result<Vec<(Point2, Point2)>> {
    let Some(v) = f.properties.get("ridges") else { return Ok(vec![]) };
    let bad = || Error::Schema {
        feature_id: f.id.clone(),
        message: "'ridges' must be [[[x,y],[x,y]], ...]".into(),
    };
    let mut out = Vec::new();
    for seg in v.as_array().ok_or_else(bad)? {
        let seg = seg.as_array().filter(|s| s.len() == 2).ok_or_else(bad)?;
        let mut pts = [Point2::new(0.0, 0.0); 2];
        for (i, pos) in seg.iter().enumerate() {
            let pos = pos.as_array().filter(|a| a.len() >= 2).ok_or_else(bad)?;
            let (x, y) = (pos[0].as_f64().ok_or_else(bad)?, pos[1].as_f64().ok_or_else(bad)?);
            pts[i] = match proj {
                Some(p) => p.project(x, y),
                None => Point2::new(x, y),
            };
        }
        out.push((pts[0], pts[1]));
    }
    Ok(out)
}

pub fn load_sections(
    path: &Path,
    shared: Option<&Projection>,
    building_ids: Option<&HashSet<String>>,
) -> Result<(Vec<RoofSection>, Option<Projection>)> {
    let coll = read_collection(path)?;
    let proj = resolve_projection(&coll, shared);
    let mut out = Vec::with_capacity(coll.features.len());
    let mut seen = HashSet::new();
    for f in &coll.features {
        let id = req_str(f, "id")?;
        if !seen.insert(id.clone()) {
            return Err(Error::Schema { feature_id: id, message: "duplicate id".into() });
        }
        let building_id = req_str(f, "building_id")?;
        if let Some(known) = building_ids {
            if !known.contains(&building_id) {
                return Err(Error::Referential(format!(
                    "section {id} references unknown building {building_id}"
                )));
            }
        }
        let pitch_deg = opt_f64(f, "pitch_deg")?;
        if let Some(p) = pitch_deg {
            if !(0.0..90.0).contains(&p) {
                return Err(Error::Range(format!("section {id}: pitch {p} outside [0, 90)")));
            }
        }
        let azimuth_deg = opt_f64(f, "azimuth_deg")?;
        if let Some(a) = azimuth_deg {
            if !(0.0..360.0).contains(&a) {
                return Err(Error::Range(format!("section {id}: azimuth {a} outside [0, 360)")));
            }
        }
        let features = FeatureVector {
            roof_material: opt_str(f, "roof_material")?,
            roof_type: opt_str(f, "roof_type")?,
            building_height_m: opt_f64(f, "building_height_m")?,
            roof_shape: opt_str(f, "roof_shape")?,
            footprint_area_m2: opt_f64(f, "footprint_area_m2")?,
        };
        out.push(RoofSection {
            id,
            building_id,
            plan_polygon: feature_polygon(f, proj.as_ref())?,
            ridge_segments: ridges_from(f, proj.as_ref())?,
            pitch_deg,
            azimuth_deg,
            features,
            extra: leftover(f, &SECTION_KEYS),
        });
    }
    Ok((out, proj))
}

const OBJECT_KEYS: [&str; 3] = ["id", "section_id", "kind"];

pub fn load_objects(
    path: &Path,
    shared: Option<&Projection>,
    section_ids: Option<&HashSet<String>>,
) -> Result<(Vec<RoofObject>, Option<Projection>)> {
    let coll = read_collection(path)?;
    let proj = resolve_projection(&coll, shared);
    let mut out = Vec::with_capacity(coll.features.len());
    for f in &coll.features {
        let id = req_str(f, "id")?;
        let section_id = req_str(f, "section_id")?;
        if let Some(known) = section_ids {
            if !known.contains(&section_id) {
                return Err(Error::Referential(format!(
                    "object {id} references unknown section {section_id}"
                )));
            }
        }
        let kind_str = req_str(f, "kind")?;
        let kind: RoofObjectKind =
            serde_json::from_value(Value::String(kind_str.clone())).map_err(|_| Error::Schema {
                feature_id: id.clone(),
                message: format!("unknown object kind '{kind_str}'"),
            })?;
        out.push(RoofObject {
            id,
            section_id,
            polygon: feature_polygon(f, proj.as_ref())?,
            kind,
            extra: leftover(f, &OBJECT_KEYS),
        });
    }
    Ok((out, proj))
}

fn polygon_coords(p: &Polygon2) -> Value {
    let ring = |r: &[Point2]| -> Value {
        let mut pts: Vec<Value> = r.iter().map(|q| json!([q.x, q.y])).collect();
        if let Some(first) = r.first() {
            pts.push(json!([first.x, first.y]));
        }
        Value::Array(pts)
    };
    let mut rings = vec![ring(p.exterior())];
    for h in p.holes() {
        rings.push(ring(h));
    }
    Value::Array(rings)
}

fn write_collection(path: &Path, features: Vec<Value>) -> Result<()> {
    let doc = json!({
        "type": "FeatureCollection",
        "crs_local": true,
        "features": features,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

fn feature(properties: Map<String, Value>, geometry: &Polygon2) -> Value {
    json!({
        "type": "Feature",
        "properties": properties,
        "geometry": { "type": "Polygon", "coordinates": polygon_coords(geometry) },
    })
}

pub fn save_buildings(path: &Path, buildings: &[Building]) -> Result<()> {
    let features = buildings
        .iter()
        .map(|b| {
            let mut props = Map::new();
            props.insert("id".into(), json!(b.id));
            props.insert("height_m".into(), json!(b.height_m));
            props.insert("ground_elev_m".into(), json!(b.ground_elev_m));
            props.extend(b.extra.clone());
            feature(props, &b.footprint)
        })
        .collect();
    write_collection(path, features)
}

pub fn save_sections(path: &Path, sections: &[RoofSection]) -> Result<()> {
    let features = sections
        .iter()
        .map(|s| {
            let mut props = Map::new();
            props.insert("id".into(), json!(s.id));
            props.insert("building_id".into(), json!(s.building_id));
            if let Some(p) = s.pitch_deg {
                props.insert("pitch_deg".into(), json!(p));
            }
            if let Some(a) = s.azimuth_deg {
                props.insert("azimuth_deg".into(), json!(a));
            }
            if !s.ridge_segments.is_empty() {
                let ridges: Vec<Value> = s
                    .ridge_segments
                    .iter()
                    .map(|(a, b)| json!([[a.x, a.y], [b.x, b.y]]))
                    .collect();
                props.insert("ridges".into(), Value::Array(ridges));
            }
            let fv = &s.features;
            if let Some(v) = &fv.roof_material {
                props.insert("roof_material".into(), json!(v));
            }
            if let Some(v) = &fv.roof_type {
                props.insert("roof_type".into(), json!(v));
            }
            if let Some(v) = fv.building_height_m {
                props.insert("building_height_m".into(), json!(v));
            }
            if let Some(v) = &fv.roof_shape {
                props.insert("roof_shape".into(), json!(v));
            }
            if let Some(v) = fv.footprint_area_m2 {
                props.insert("footprint_area_m2".into(), json!(v));
            }
            props.extend(s.extra.clone());
            feature(props, &s.plan_polygon)
        })
        .collect();
    write_collection(path, features)
}

pub fn save_objects(path: &Path, objects: &[RoofObject]) -> Result<()> {
    let features = objects
        .iter()
        .map(|o| {
            let mut props = Map::new();
            props.insert("id".into(), json!(o.id));
            props.insert("section_id".into(), json!(o.section_id));
            props.insert("kind".into(), serde_json::to_value(o.kind).unwrap());
            props.extend(o.extra.clone());
            feature(props, &o.polygon)
        })
        .collect();
    write_collection(path, features)
}

// ---------------------------------------------------------------------------
// Weather CSV

pub const WEATHER_HEADER: &str = "timestamp_utc,ghi,dni,dhi,temp_air,wind_speed";

pub fn load_weather(path: &Path, latitude_deg: f64, longitude_deg: f64) -> Result<WeatherSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    if header != WEATHER_HEADER {
        return Err(fmt_err(path, format!("expected header '{WEATHER_HEADER}', got '{header}'")));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(fmt_err(path, format!("line {}: expected 6 columns", lineno + 2)));
        }
        let timestamp: DateTime<Utc> = cols[0]
            .parse()
            .map_err(|e| fmt_err(path, format!("line {}: bad timestamp: {e}", lineno + 2)))?;
        let num = |i: usize| -> Result<f64> {
            cols[i]
                .parse()
                .map_err(|e| fmt_err(path, format!("line {}: bad number: {e}", lineno + 2)))
        };
        records.push(WeatherRecord {
            timestamp,
            ghi: num(1)?,
            dni: num(2)?,
            dhi: num(3)?,
            temp_air: num(4)?,
            wind_speed: num(5)?,
        });
    }
    records.sort_by_key(|r| r.timestamp);
    let series = WeatherSeries { records, latitude_deg, longitude_deg };
    series.validate()?;
    Ok(series)
}

pub fn save_weather(path: &Path, series: &WeatherSeries) -> Result<()> {
    let mut out = String::from(WEATHER_HEADER);
    out.push('\n');
    for r in &series.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            r.ghi,
            r.dni,
            r.dhi,
            r.temp_air,
            r.wind_speed
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// DEM (ESRI ASCII grid)

pub fn load_dem(path: &Path) -> Result<DemRaster> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cell = None;
    let mut nodata = -9999.0;
    let mut values: Vec<f64> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let first = parts.next().unwrap();
        if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let val = parts
                .next()
                .ok_or_else(|| fmt_err(path, format!("header '{first}' missing value")))?;
            let parse = |v: &str| -> Result<f64> {
                v.parse().map_err(|e| fmt_err(path, format!("bad header value '{v}': {e}")))
            };
            match first.to_ascii_lowercase().as_str() {
                "ncols" => ncols = Some(parse(val)? as usize),
                "nrows" => nrows = Some(parse(val)? as usize),
                "xllcorner" => xll = Some(parse(val)?),
                "yllcorner" => yll = Some(parse(val)?),
                "cellsize" => cell = Some(parse(val)?),
                "nodata_value" => nodata = parse(val)?,
                other => return Err(fmt_err(path, format!("unknown header '{other}'"))),
            }
        } else {
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse()
                        .map_err(|e| fmt_err(path, format!("bad cell value '{tok}': {e}")))?,
                );
            }
        }
    }
    let (Some(ncols), Some(nrows), Some(xll), Some(yll), Some(cell)) =
        (ncols, nrows, xll, yll, cell)
    else {
        return Err(fmt_err(path, "missing required header (ncols/nrows/xllcorner/yllcorner/cellsize)"));
    };
    if values.len() != ncols * nrows {
        return Err(fmt_err(
            path,
            format!("{} values for {}x{} grid", values.len(), ncols, nrows),
        ));
    }
    // File rows run north to south; store south-up.
    let mut elevation = vec![0.0; values.len()];
    for r in 0..nrows {
        let src = &values[r * ncols..(r + 1) * ncols];
        elevation[(nrows - 1 - r) * ncols..(nrows - r) * ncols].copy_from_slice(src);
    }
    DemRaster::new(Point2::new(xll, yll), cell, ncols, nrows, elevation, nodata)
}

pub fn save_dem(path: &Path, dem: &DemRaster) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("ncols {}\n", dem.n_cols));
    out.push_str(&format!("nrows {}\n", dem.n_rows));
    out.push_str(&format!("xllcorner {}\n", dem.origin.x));
    out.push_str(&format!("yllcorner {}\n", dem.origin.y));
    out.push_str(&format!("cellsize {}\n", dem.cell_size_m));
    out.push_str(&format!("NODATA_value {}\n", dem.nodata));
    for r in (0..dem.n_rows).rev() {
        let row = &dem.elevation_m[r * dem.n_cols..(r + 1) * dem.n_cols];
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadingConfig {
    pub n_sectors: usize,
    pub building_max_dist_m: f64,
    pub dem_max_dist_m: f64,
    /// Horizon-march step; defaults to the DEM cell size.
    pub dem_step_m: Option<f64>,
    pub min_gamma_deg: f64,
    pub flat_roof_azimuth_deg: f64,
}

impl Default for ShadingConfig {
    fn default() -> Self {
        ShadingConfig {
            n_sectors: 72,
            building_max_dist_m: 500.0,
            dem_max_dist_m: 20_000.0,
            dem_step_m: None,
            min_gamma_deg: 0.5,
            flat_roof_azimuth_deg: 180.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunPaths {
    pub buildings: String,
    pub sections: String,
    pub objects: Option<String>,
    pub weather: String,
    pub dem: Option<String>,
    pub pitch_model: Option<String>,
    /// Pitch-model training rows (CSV); only needed by `pitch train`.
    pub training: Option<String>,
    pub report_out: String,
    pub summary_out: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SiteConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig { latitude_deg: 43.6, longitude_deg: 3.9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: RunPaths,
    pub site: SiteConfig,
    pub panel: PanelSpec,
    pub pv: PvSystemConfig,
    pub shading: ShadingConfig,
    /// Run fails (exit 1) when more than this fraction of sections error.
    pub error_threshold: f64,
    /// 0 = use all cores.
    pub workers: usize,
    pub seed: u64,
    pub aggregate_cell_m: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: RunPaths::default(),
            site: SiteConfig::default(),
            panel: PanelSpec::default(),
            pv: PvSystemConfig::default(),
            shading: ShadingConfig::default(),
            error_threshold: 0.1,
            workers: 0,
            seed: 0,
            aggregate_cell_m: 100.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let v = read_json(path)?;
        serde_json::from_value(v).map_err(|e| fmt_err(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Check numeric ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.panel.validate()?;
        self.pv.validate()?;
        if self.shading.n_sectors < 8 {
            return Err(Error::Argument("shading.n_sectors must be at least 8".into()));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(Error::Argument("error_threshold must lie in [0, 1]".into()));
        }
        if self.aggregate_cell_m <= 0.0 {
            return Err(Error::Argument("aggregate_cell_m must be positive".into()));
        }
        let mut required = vec![
            self.paths.buildings.as_str(),
            self.paths.sections.as_str(),
            self.paths.weather.as_str(),
        ];
        for p in [&self.paths.objects, &self.paths.dem, &self.paths.pitch_model].into_iter().flatten() {
            required.push(p.as_str());
        }
        for p in required {
            if !Path::new(p).exists() {
                return Err(Error::Argument(format!("input path does not exist: {p}")));
            }
        }
        Ok(())
    }
}
