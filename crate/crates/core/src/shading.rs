//! Two-scale horizon shading: ray tracing against neighbor building
//! footprints near the evaluation point, horizon scanning over a terrain
//! raster far from it, combined into per-section masks and sky-view factors.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::Point2;
use crate::roofs::Building;
use crate::{Error, Result};

pub const DEFAULT_SECTORS: usize = 72;
pub const DEFAULT_BUILDING_MAX_DIST_M: f64 = 500.0;
pub const DEFAULT_DEM_MAX_DIST_M: f64 = 20_000.0;

/// Piecewise-constant horizon line: sector `i` covers compass azimuths
/// `[i*360/n, (i+1)*360/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMask {
    pub gamma_deg: Vec<f64>,
}

impl HorizonMask {
    pub fn open(n_sectors: usize) -> Self {
        HorizonMask { gamma_deg: vec![0.0; n_sectors] }
    }

    pub fn new(gamma_deg: Vec<f64>) -> Result<Self> {
        if gamma_deg.is_empty() {
            return Err(Error::Argument("mask needs at least one sector".into()));
        }
        if gamma_deg.iter().any(|g| !(0.0..=90.0).contains(g)) {
            return Err(Error::Range("horizon angles must lie in [0, 90] degrees".into()));
        }
        Ok(HorizonMask { gamma_deg })
    }

    pub fn n_sectors(&self) -> usize {
        self.gamma_deg.len()
    }

    pub fn sector_width_deg(&self) -> f64 {
        360.0 / self.n_sectors() as f64
    }

    pub fn sector_of(&self, azimuth_deg: f64) -> usize {
        let a = azimuth_deg.rem_euclid(360.0);
        ((a / self.sector_width_deg()) as usize).min(self.n_sectors() - 1)
    }

    /// Central compass azimuth of sector `i`.
    pub fn sector_center_deg(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.sector_width_deg()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut out = String::from("sector_start_deg,gamma_deg\n");
        for (i, g) in self.gamma_deg.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i as f64 * self.sector_width_deg(), g));
        }
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut gamma = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let g: f64 = rec
                .get(1)
                .ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    message: "missing gamma_deg column".into(),
                })?
                .parse()
                .map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    message: format!("bad gamma_deg: {e}"),
                })?;
            gamma.push(g);
        }
        HorizonMask::new(gamma)
    }
}

/// Per-sector maximum of all masks.
pub fn combine_masks(masks: &[HorizonMask]) -> Result<HorizonMask> {
    let Some(first) = masks.first() else {
        return Err(Error::Argument("combine_masks needs at least one mask".into()));
    };
    let n = first.n_sectors();
    let mut gamma = vec![0.0f64; n];
    for m in masks {
        if m.n_sectors() != n {
            return Err(Error::Argument(format!(
                "sector count mismatch: {} vs {n}",
                m.n_sectors()
            )));
        }
        for (g, &v) in gamma.iter_mut().zip(&m.gamma_deg) {
            *g = g.max(v);
        }
    }
    Ok(HorizonMask { gamma_deg: gamma })
}

/// Fraction of isotropic diffuse sky radiance reaching a horizontal plane:
/// SVF = (1/n) * sum cos^2(gamma_i).
pub fn sky_view_factor(mask: &HorizonMask) -> f64 {
    let n = mask.n_sectors() as f64;
    mask.gamma_deg.iter().map(|g| g.to_radians().cos().powi(2)).sum::<f64>() / n
}

/// True iff the sun sits below the horizon line of its sector (or below the
/// mathematical horizon).
pub fn direct_blocked(mask: &HorizonMask, sun_azimuth_deg: f64, sun_elevation_deg: f64) -> bool {
    if sun_elevation_deg <= 0.0 {
        return true;
    }
    sun_elevation_deg < mask.gamma_deg[mask.sector_of(sun_azimuth_deg)]
}

// ---------------------------------------------------------------------------
// Building-scale horizon

/// Uniform-grid acceleration structure over building footprint bboxes.
/// Queries may over-report (cell granularity) but never miss an intersecting
/// bbox.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    buildings: Vec<Building>,
    bboxes: Vec<(Point2, Point2)>,
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl SpatialIndex {
    pub fn build(buildings: Vec<Building>) -> Self {
        let bboxes: Vec<(Point2, Point2)> =
            buildings.iter().map(|b| b.footprint.aabb()).collect();
        let (mut min, mut max) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for (lo, hi) in &bboxes {
            min.x = min.x.min(lo.x);
            min.y = min.y.min(lo.y);
            max.x = max.x.max(hi.x);
            max.y = max.y.max(hi.y);
        }
        if buildings.is_empty() {
            return SpatialIndex {
                buildings,
                bboxes,
                origin: Point2::new(0.0, 0.0),
                cell: 1.0,
                nx: 1,
                ny: 1,
                cells: vec![vec![]],
            };
        }
        let extent = (max.x - min.x).max(max.y - min.y).max(1.0);
        // Aim for a grid around 64x64 over the dataset extent.
        let cell = (extent / 64.0).max(1.0);
        let nx = (((max.x - min.x) / cell).floor() as usize + 1).max(1);
        let ny = (((max.y - min.y) / cell).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, (lo, hi)) in bboxes.iter().enumerate() {
            let (c0, r0) = grid_cell(min, cell, nx, ny, *lo);
            let (c1, r1) = grid_cell(min, cell, nx, ny, *hi);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    cells[r * nx + c].push(i as u32);
                }
            }
        }
        SpatialIndex { buildings, bboxes, origin: min, cell, nx, ny, cells }
    }

    pub fn all(&self) -> &[Building] {
        &self.buildings
    }

    /// Buildings whose bbox intersects the query bbox.
    pub fn query(&self, lo: Point2, hi: Point2) -> Vec<&Building> {
        let mut out = Vec::new();
        for i in self.query_indices(lo, hi) {
            out.push(&self.buildings[i]);
        }
        out
    }

    fn query_indices(&self, lo: Point2, hi: Point2) -> Vec<usize> {
        if self.buildings.is_empty() {
            return vec![];
        }
        let (c0, r0) = grid_cell(self.origin, self.cell, self.nx, self.ny, lo);
        let (c1, r1) = grid_cell(self.origin, self.cell, self.nx, self.ny, hi);
        let mut seen = vec![false; self.buildings.len()];
        let mut out = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &i in &self.cells[r * self.nx + c] {
                    let i = i as usize;
                    if seen[i] {
                        continue;
                    }
                    seen[i] = true;
                    let (blo, bhi) = self.bboxes[i];
                    if blo.x <= hi.x && lo.x <= bhi.x && blo.y <= hi.y && lo.y <= bhi.y {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Shortest distance from `p` to the building's bbox (0 inside).
    pub fn bbox_distance(&self, building_index: usize, p: Point2) -> f64 {
        let (lo, hi) = self.bboxes[building_index];
        let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
        let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
        (dx * dx + dy * dy).sqrt()
    }
}

fn grid_cell(origin: Point2, cell: f64, nx: usize, ny: usize, p: Point2) -> (usize, usize) {
    let cx = ((p.x - origin.x) / cell).floor();
    let cy = ((p.y - origin.y) / cell).floor();
    let c = (cx.max(0.0) as usize).min(nx - 1);
    let r = (cy.max(0.0) as usize).min(ny - 1);
    (c, r)
}

/// Horizon from an explicit candidate set: per sector, cast a ray at the
/// sector's central azimuth and take the highest elevation angle over all
/// footprint-edge hits of buildings topping out above the evaluation height.
pub fn horizon_from_buildings<'a, I>(
    eval_point: Point2,
    eval_height_m: f64,
    candidates: I,
    n_sectors: usize,
    max_dist_m: f64,
) -> Result<HorizonMask>
where
    I: IntoIterator<Item = &'a Building>,
    I::IntoIter: Clone,
{
    if n_sectors < 8 {
        return Err(Error::Argument("need at least 8 sectors".into()));
    }
    if max_dist_m <= 0.0 {
        return Err(Error::Argument("max_dist must be positive".into()));
    }
    let iter = candidates.into_iter();
    let mut gamma = vec![0.0f64; n_sectors];
    for (i, g) in gamma.iter_mut().enumerate() {
        let az = ((i as f64 + 0.5) * 360.0 / n_sectors as f64).to_radians();
        let dir = Point2::new(az.sin(), az.cos());
        for b in iter.clone() {
            let rise = b.top_elev_m() - eval_height_m;
            if rise <= 0.0 {
                continue;
            }
            for (p, q) in b.footprint.all_edges() {
                if let Some(t) = ray_segment_distance(eval_point, dir, p, q) {
                    if t <= max_dist_m {
                        *g = g.max(rise.atan2(t.max(1e-6)).to_degrees());
                    }
                }
            }
        }
        *g = g.min(90.0);
    }
    Ok(HorizonMask { gamma_deg: gamma })
}

/// Horizon against every indexed building within `max_dist_m`.
pub fn building_horizon(
    eval_point: Point2,
    eval_height_m: f64,
    index: &SpatialIndex,
    n_sectors: usize,
    max_dist_m: f64,
) -> Result<HorizonMask> {
    let r = Point2::new(max_dist_m, max_dist_m);
    let candidates = index.query(eval_point.sub(r), eval_point.add(r));
    horizon_from_buildings(eval_point, eval_height_m, candidates, n_sectors, max_dist_m)
}

/// Conservative candidate reduction: drops a building only when even its
/// best case — full top elevation at the nearest bbox point — stays below
/// `min_gamma_deg`.
pub fn prefilter_buildings(
    index: &SpatialIndex,
    eval_point: Point2,
    eval_height_m: f64,
    min_gamma_deg: f64,
) -> Result<Vec<&Building>> {
    if !(0.0..90.0).contains(&min_gamma_deg) || min_gamma_deg == 0.0 {
        return Err(Error::Argument("min_gamma must lie in (0, 90) degrees".into()));
    }
    let tan_min = min_gamma_deg.to_radians().tan();
    let mut out = Vec::new();
    for (i, b) in index.all().iter().enumerate() {
        let rise = b.top_elev_m() - eval_height_m;
        if rise <= 0.0 {
            continue;
        }
        let d = index.bbox_distance(i, eval_point);
        if d <= 0.0 || rise / d >= tan_min {
            out.push(b);
        }
    }
    Ok(out)
}

/// Distance along the ray `origin + t*dir` (unit `dir`, t >= 0) to segment
/// `[p, q]`, if they meet.
fn ray_segment_distance(origin: Point2, dir: Point2, p: Point2, q: Point2) -> Option<f64> {
    let s = q.sub(p);
    let denom = dir.cross(s);
    let op = p.sub(origin);
    if denom.abs() < 1e-12 {
        // Collinear ray and segment: closest positive projection of either
        // endpoint lying on the ray.
        if op.cross(dir).abs() > 1e-9 {
            return None;
        }
        let t1 = op.dot(dir);
        let t2 = q.sub(origin).dot(dir);
        return (t1.max(t2) >= 0.0).then_some(t1.min(t2).max(0.0));
    }
    let t = op.cross(s) / denom;
    let u = op.cross(dir) / denom;
    if t >= 0.0 && (-1e-9..=1.0 + 1e-9).contains(&u) {
        Some(t)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Terrain-scale horizon

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemRaster {
    /// Lower-left corner of the grid.
    pub origin: Point2,
    pub cell_size_m: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    /// Row-major, row 0 = southernmost row; values at cell centers.
    pub elevation_m: Vec<f64>,
    pub nodata: f64,
}

impl DemRaster {
    pub fn new(
        origin: Point2,
        cell_size_m: f64,
        n_cols: usize,
        n_rows: usize,
        elevation_m: Vec<f64>,
        nodata: f64,
    ) -> Result<Self> {
        if cell_size_m <= 0.0 {
            return Err(Error::Argument("cell size must be positive".into()));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::Argument("raster must have at least one cell".into()));
        }
        if elevation_m.len() != n_cols * n_rows {
            return Err(Error::Argument(format!(
                "elevation grid has {} values, expected {}",
                elevation_m.len(),
                n_cols * n_rows
            )));
        }
        Ok(DemRaster { origin, cell_size_m, n_cols, n_rows, elevation_m, nodata })
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.origin.x
            && p.y >= self.origin.y
            && p.x <= self.origin.x + self.cell_size_m * self.n_cols as f64
            && p.y <= self.origin.y + self.cell_size_m * self.n_rows as f64
    }

    fn cell_value(&self, col: i64, row: i64, fallback: f64) -> f64 {
        if col < 0 || row < 0 || col >= self.n_cols as i64 || row >= self.n_rows as i64 {
            return fallback;
        }
        let v = self.elevation_m[row as usize * self.n_cols + col as usize];
        if v == self.nodata {
            fallback
        } else {
            v
        }
    }

    /// Bilinear elevation between cell centers; nodata and out-of-grid
    /// samples read as `fallback` (transparent terrain).
    pub fn sample(&self, p: Point2, fallback: f64) -> f64 {
        let gx = (p.x - self.origin.x) / self.cell_size_m - 0.5;
        let gy = (p.y - self.origin.y) / self.cell_size_m - 0.5;
        let c0 = gx.floor();
        let r0 = gy.floor();
        let fx = gx - c0;
        let fy = gy - r0;
        let (c0, r0) = (c0 as i64, r0 as i64);
        let v00 = self.cell_value(c0, r0, fallback);
        let v10 = self.cell_value(c0 + 1, r0, fallback);
        let v01 = self.cell_value(c0, r0 + 1, fallback);
        let v11 = self.cell_value(c0 + 1, r0 + 1, fallback);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }
}

/// Terrain horizon: march each sector's central azimuth sampling the DEM
/// every `step_m` out to `max_dist_m`.
pub fn dem_horizon(
    eval_point: Point2,
    eval_height_m: f64,
    dem: &DemRaster,
    n_sectors: usize,
    max_dist_m: f64,
    step_m: f64,
) -> Result<HorizonMask> {
    if n_sectors < 8 {
        return Err(Error::Argument("need at least 8 sectors".into()));
    }
    if step_m < dem.cell_size_m / 2.0 {
        return Err(Error::Argument(format!(
            "step {step_m} below half cell size {}",
            dem.cell_size_m / 2.0
        )));
    }
    if !dem.contains(eval_point) {
        return Err(Error::Range(format!(
            "evaluation point ({}, {}) outside raster",
            eval_point.x, eval_point.y
        )));
    }
    let mut gamma = vec![0.0f64; n_sectors];
    for (i, g) in gamma.iter_mut().enumerate() {
        let az = ((i as f64 + 0.5) * 360.0 / n_sectors as f64).to_radians();
        let dir = Point2::new(az.sin(), az.cos());
        let mut t = step_m;
        while t <= max_dist_m {
            let elev = dem.sample(eval_point.add(dir.scale(t)), eval_height_m);
            let rise = elev - eval_height_m;
            if rise > 0.0 {
                *g = g.max(rise.atan2(t).to_degrees());
            }
            t += step_m;
        }
        *g = g.min(90.0);
    }
    Ok(HorizonMask { gamma_deg: gamma })
}

/// Full two-scale mask for one evaluation point.
pub fn section_mask(
    eval_point: Point2,
    eval_height_m: f64,
    index: &SpatialIndex,
    dem: Option<&DemRaster>,
    n_sectors: usize,
) -> Result<HorizonMask> {
    let b = building_horizon(eval_point, eval_height_m, index, n_sectors, DEFAULT_BUILDING_MAX_DIST_M)?;
    match dem {
        None => Ok(b),
        Some(dem) => {
            let d = dem_horizon(
                eval_point,
                eval_height_m,
                dem,
                n_sectors,
                DEFAULT_DEM_MAX_DIST_M,
                dem.cell_size_m,
            )?;
            combine_masks(&[b, d])
        }
    }
}

#[cfg(test)]
mod tests;
