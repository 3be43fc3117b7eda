//! Pitch estimation: an ordinary-least-squares model of mean pitch versus
//! latitude, combined with a random-forest regressor for the normalized pitch
//! `(pitch - mean) / mean`. Absolute pitch is `mean(latitude) * (1 + norm)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Categorical/numeric building attributes consumed by the forest. Missing
/// categoricals map to an explicit "unknown" level; missing numerics to the
/// training-set median stored in the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub roof_material: Option<String>,
    pub roof_type: Option<String>,
    pub building_height_m: Option<f64>,
    pub roof_shape: Option<String>,
    pub footprint_area_m2: Option<f64>,
}

pub const N_FEATURES: usize = 5;
const CAT_FEATURES: [usize; 3] = [0, 1, 3]; // material, type, shape
const NUM_FEATURES: [usize; 2] = [2, 4]; // height, area

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PitchTrainingRow {
    pub features: FeatureVector,
    pub latitude_deg: f64,
    pub pitch_deg: f64,
}

/// Mean pitch as a linear function of latitude.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearPitchModel {
    /// Degrees of pitch per degree of latitude.
    pub slope: f64,
    pub intercept: f64,
}

impl LinearPitchModel {
    pub fn mean_pitch(&self, latitude_deg: f64) -> f64 {
        self.slope * latitude_deg + self.intercept
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFitReport {
    pub model: LinearPitchModel,
    /// Leave-one-out metrics, present when at least 3 points were fitted.
    pub loo_r2: Option<f64>,
    pub loo_mae: Option<f64>,
}

fn ols(points: &[(f64, f64)]) -> Result<LinearPitchModel> {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::Training("all latitudes identical, singular fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(LinearPitchModel { slope, intercept })
}

/// OLS fit of mean pitch against latitude over per-city mean values, with
/// leave-one-out R^2 and MAE when 3+ points are available.
pub fn fit_mean_pitch(city_means: &[(f64, f64)]) -> Result<LinearFitReport> {
    if city_means.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 city mean-pitch points, got {}",
            city_means.len()
        )));
    }
    let model = ols(city_means)?;
    let (mut loo_r2, mut loo_mae) = (None, None);
    if city_means.len() >= 3 {
        let mut residuals = Vec::with_capacity(city_means.len());
        for i in 0..city_means.len() {
            let rest: Vec<(f64, f64)> = city_means
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &p)| p)
                .collect();
            let m = ols(&rest)?;
            residuals.push(city_means[i].1 - m.mean_pitch(city_means[i].0));
        }
        let mean_y: f64 =
            city_means.iter().map(|p| p.1).sum::<f64>() / city_means.len() as f64;
        let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
        let ss_tot: f64 = city_means.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        loo_r2 = Some(1.0 - ss_res / ss_tot);
        loo_mae =
            Some(residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64);
    }
    Ok(LinearFitReport { model, loo_r2, loo_mae })
}

/// `(pitch - mean) / mean`.
pub fn normalized_pitch(pitch_deg: f64, mean_pitch_deg: f64) -> Result<f64> {
    if mean_pitch_deg <= 0.0 {
        return Err(Error::Argument(format!(
            "mean pitch must be positive, got {mean_pitch_deg}"
        )));
    }
    Ok((pitch_deg - mean_pitch_deg) / mean_pitch_deg)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 15, min_leaf: 5, seed: 0 }
    }
}

/// Per-categorical-feature level table; index `len()` is the implicit
/// "unknown" level.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    pub roof_material: Vec<String>,
    pub roof_type: Vec<String>,
    pub roof_shape: Vec<String>,
}

impl Vocabulary {
    fn levels(&self, feature: usize) -> &[String] {
        match feature {
            0 => &self.roof_material,
            1 => &self.roof_type,
            3 => &self.roof_shape,
            _ => unreachable!("feature {feature} is not categorical"),
        }
    }

    fn encode(&self, feature: usize, value: Option<&str>) -> f64 {
        let levels = self.levels(feature);
        match value {
            Some(v) => levels
                .iter()
                .position(|l| l == v)
                .unwrap_or(levels.len()) as f64,
            None => levels.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Split {
    /// Numeric feature <= threshold goes left.
    NumericLe { feature: usize, threshold: f64 },
    /// Categorical feature == level goes left (one-vs-rest).
    CategoricalEq { feature: usize, level: u32 },
}

impl Split {
    fn goes_left(&self, x: &[f64; N_FEATURES]) -> bool {
        match *self {
            Split::NumericLe { feature, threshold } => x[feature] <= threshold,
            Split::CategoricalEq { feature, level } => x[feature] as u32 == level,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Internal { split: Split, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Internal { split, left, right } => {
                    i = if split.goes_left(x) { *left } else { *right };
                }
            }
        }
    }
}

/// Random forest over normalized-pitch targets, with the feature encoding
/// (vocabulary + numeric medians) baked in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub vocab: Vocabulary,
    /// Training medians for [building_height_m, footprint_area_m2].
    pub numeric_medians: [f64; 2],
}

impl Forest {
    pub fn encode(&self, f: &FeatureVector) -> [f64; N_FEATURES] {
        let mut x = [0.0; N_FEATURES];
        x[0] = self.vocab.encode(0, f.roof_material.as_deref());
        x[1] = self.vocab.encode(1, f.roof_type.as_deref());
        x[2] = f.building_height_m.unwrap_or(self.numeric_medians[0]);
        x[3] = self.vocab.encode(3, f.roof_shape.as_deref());
        x[4] = f.footprint_area_m2.unwrap_or(self.numeric_medians[1]);
        x
    }

    /// Mean of per-tree predictions.
    pub fn predict(&self, f: &FeatureVector) -> f64 {
        let x = self.encode(f);
        self.trees.iter().map(|t| t.predict(&x)).sum::<f64>() / self.trees.len() as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn build_vocab(rows: &[PitchTrainingRow]) -> Vocabulary {
    let collect = |get: &dyn Fn(&FeatureVector) -> Option<&String>| {
        let mut levels: Vec<String> =
            rows.iter().filter_map(|r| get(&r.features)).cloned().collect();
        levels.sort();
        levels.dedup();
        levels
    };
    Vocabulary {
        roof_material: collect(&|f| f.roof_material.as_ref()),
        roof_type: collect(&|f| f.roof_type.as_ref()),
        roof_shape: collect(&|f| f.roof_shape.as_ref()),
    }
}

/// Train a forest on normalized-pitch targets computed against `lin`.
/// Deterministic for a fixed seed regardless of thread count: tree `t` uses
/// its own generator seeded with `seed + t`.
pub fn train_forest(
    rows: &[PitchTrainingRow],
    lin: &LinearPitchModel,
    params: &ForestParams,
) -> Result<Forest> {
    if rows.len() < 20 {
        return Err(Error::Training(format!(
            "need at least 20 training rows, got {}",
            rows.len()
        )));
    }
    let vocab = build_vocab(rows);
    let numeric_medians = [
        median(rows.iter().filter_map(|r| r.features.building_height_m).collect()),
        median(rows.iter().filter_map(|r| r.features.footprint_area_m2).collect()),
    ];
    let proto = Forest {
        trees: vec![],
        params: *params,
        vocab: vocab.clone(),
        numeric_medians,
    };
    let xs: Vec<[f64; N_FEATURES]> = rows.iter().map(|r| proto.encode(&r.features)).collect();
    let mut ys = Vec::with_capacity(rows.len());
    for r in rows {
        let mean = lin.mean_pitch(r.latitude_deg);
        ys.push(normalized_pitch(r.pitch_deg, mean)?);
    }
    let n_levels: [usize; N_FEATURES] = [
        vocab.roof_material.len() + 1,
        vocab.roof_type.len() + 1,
        0,
        vocab.roof_shape.len() + 1,
        0,
    ];

    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let indices: Vec<usize> =
                (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect();
            build_tree(&xs, &ys, indices, params, &n_levels, &mut rng)
        })
        .collect();

    Ok(Forest { trees, ..proto })
}

fn build_tree(
    xs: &[[f64; N_FEATURES]],
    ys: &[f64],
    indices: Vec<usize>,
    params: &ForestParams,
    n_levels: &[usize; N_FEATURES],
    rng: &mut ChaCha12Rng,
) -> Tree {
    let mut nodes = Vec::new();
    grow(xs, ys, indices, 0, params, n_levels, rng, &mut nodes);
    Tree { nodes }
}

fn mean_of(ys: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64
}

fn sse_of(ys: &[f64], idx: &[usize]) -> f64 {
    let m = mean_of(ys, idx);
    idx.iter().map(|&i| (ys[i] - m).powi(2)).sum()
}

#[allow(clippy::too_many_arguments)]
fn grow(
    xs: &[[f64; N_FEATURES]],
    ys: &[f64],
    indices: Vec<usize>,
    depth: usize,
    params: &ForestParams,
    n_levels: &[usize; N_FEATURES],
    rng: &mut ChaCha12Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let leaf = |nodes: &mut Vec<Node>, idx: &[usize]| {
        nodes.push(Node::Leaf { value: mean_of(ys, idx) });
        nodes.len() - 1
    };
    if depth >= params.max_depth || indices.len() < 2 * params.min_leaf {
        return leaf(nodes, &indices);
    }
    let node_sse = sse_of(ys, &indices);
    if node_sse < 1e-12 {
        return leaf(nodes, &indices);
    }

    // Random subset of ceil(sqrt(n_features)) features.
    let subset_size = (N_FEATURES as f64).sqrt().ceil() as usize;
    let mut features: Vec<usize> = (0..N_FEATURES).collect();
    for i in 0..subset_size {
        let j = rng.gen_range(i..N_FEATURES);
        features.swap(i, j);
    }
    let mut features: Vec<usize> = features[..subset_size].to_vec();
    features.sort_unstable();

    let mut best: Option<(f64, Split)> = None;
    for &f in &features {
        if CAT_FEATURES.contains(&f) {
            let mut levels: Vec<u32> =
                indices.iter().map(|&i| xs[i][f] as u32).collect();
            levels.sort_unstable();
            levels.dedup();
            let _ = n_levels; // level ids bounded by vocab size
            for level in levels {
                consider(
                    xs,
                    ys,
                    &indices,
                    Split::CategoricalEq { feature: f, level },
                    params.min_leaf,
                    &mut best,
                );
            }
        } else {
            debug_assert!(NUM_FEATURES.contains(&f));
            let mut vals: Vec<f64> = indices.iter().map(|&i| xs[i][f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let threshold = (w[0] + w[1]) / 2.0;
                consider(
                    xs,
                    ys,
                    &indices,
                    Split::NumericLe { feature: f, threshold },
                    params.min_leaf,
                    &mut best,
                );
            }
        }
    }

    match best {
        Some((split_sse, split)) if split_sse < node_sse - 1e-12 => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                indices.iter().partition(|&&i| split.goes_left(&xs[i]));
            let id = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 }); // placeholder
            let left = grow(xs, ys, left_idx, depth + 1, params, n_levels, rng, nodes);
            let right = grow(xs, ys, right_idx, depth + 1, params, n_levels, rng, nodes);
            nodes[id] = Node::Internal { split, left, right };
            id
        }
        _ => leaf(nodes, &indices),
    }
}

fn consider(
    xs: &[[f64; N_FEATURES]],
    ys: &[f64],
    indices: &[usize],
    split: Split,
    min_leaf: usize,
    best: &mut Option<(f64, Split)>,
) {
    let (l, r): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| split.goes_left(&xs[i]));
    if l.len() < min_leaf || r.len() < min_leaf {
        return;
    }
    let sse = sse_of(ys, &l) + sse_of(ys, &r);
    if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-12) {
        *best = Some((sse, split));
    }
}

/// Absolute pitch from the two models, clamped to [0, 75] degrees.
pub fn predict_pitch(
    f: &FeatureVector,
    latitude_deg: f64,
    lin: &LinearPitchModel,
    forest: &Forest,
) -> f64 {
    let mean = lin.mean_pitch(latitude_deg);
    (mean * (1.0 + forest.predict(f))).clamp(0.0, 75.0)
}

/// Self-describing persisted model: both sub-models plus encoding and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PitchModel {
    pub linear: LinearPitchModel,
    pub forest: Forest,
}

impl PitchModel {
    /// Fit both models from raw rows: city means (grouped by exact latitude)
    /// feed the linear model, normalized residual targets feed the forest.
    pub fn train(rows: &[PitchTrainingRow], params: &ForestParams) -> Result<PitchModel> {
        let report = fit_mean_pitch(&city_mean_pitches(rows))?;
        let forest = train_forest(rows, &report.model, params)?;
        Ok(PitchModel { linear: report.model, forest })
    }

    pub fn predict(&self, f: &FeatureVector, latitude_deg: f64) -> f64 {
        predict_pitch(f, latitude_deg, &self.linear, &self.forest)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<PitchModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Group rows by latitude value and average their pitch.
pub fn city_mean_pitches(rows: &[PitchTrainingRow]) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| (g.0 - r.latitude_deg).abs() < 1e-9) {
            Some(g) => {
                g.1 += r.pitch_deg;
                g.2 += 1;
            }
            None => groups.push((r.latitude_deg, r.pitch_deg, 1)),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    groups.into_iter().map(|(lat, sum, n)| (lat, sum / n as f64)).collect()
}

/// Read training rows from CSV with header
/// `latitude_deg,roof_material,roof_type,building_height_m,roof_shape,footprint_area_m2,pitch_deg`.
pub fn load_training_csv(path: &std::path::Path) -> Result<Vec<PitchTrainingRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format { path: path.display().to_string(), message: e.to_string() })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: format!("row {}: {e}", i + 2),
        })?;
        let field = |idx: usize| -> Option<String> {
            record.get(idx).map(|s| s.trim()).filter(|s| !s.is_empty()).map(String::from)
        };
        let parse_f64 = |idx: usize, name: &str| -> Result<Option<f64>> {
            match field(idx) {
                None => Ok(None),
                Some(s) => s.parse::<f64>().map(Some).map_err(|_| Error::Format {
                    path: path.display().to_string(),
                    message: format!("row {}: bad {name} value {s:?}", i + 2),
                }),
            }
        };
        let latitude_deg = parse_f64(0, "latitude_deg")?.ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            message: format!("row {}: missing latitude_deg", i + 2),
        })?;
        let pitch_deg = parse_f64(6, "pitch_deg")?.ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            message: format!("row {}: missing pitch_deg", i + 2),
        })?;
        if !(0.0..90.0).contains(&pitch_deg) {
            return Err(Error::Range(format!(
                "pitch_deg {pitch_deg} out of [0, 90) at row {}",
                i + 2
            )));
        }
        rows.push(PitchTrainingRow {
            features: FeatureVector {
                roof_material: field(1),
                roof_type: field(2),
                building_height_m: parse_f64(3, "building_height_m")?,
                roof_shape: field(4),
                footprint_area_m2: parse_f64(5, "footprint_area_m2")?,
            },
            latitude_deg,
            pitch_deg,
        });
    }
    Ok(rows)
}
