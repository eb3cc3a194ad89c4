//! The hierarchical predictor: Berlin–Kay family, then a CSS name inside that
//! family, then a LAB point regressed and projected into a ball around the
//! CSS centroid. `compare_stages` runs the four configurations side by side.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    self, majority_model, ClassifierModel, ClassifyError, FeatureSchema, FeatureVector, TrainConfig,
};
use crate::colorspace::{delta_e_2000, LabColor};
use crate::metrics::{self, MetricError};
use crate::naming::{nearest_bk, BkFamily, ColorTable, NamedColor, NamingError};

pub const DEFAULT_RADIUS: f64 = 10.0;
pub const REGRESSOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("no training data")]
    EmptyData,
    #[error("normal equations are singular; use a positive ridge term")]
    SingularSystem,
    #[error(transparent)]
    Naming(#[from] NamingError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("model file: {0}")]
    Persistence(String),
}

/// Ridge regression from features to an absolute LAB point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub format_version: u32,
    pub schema: FeatureSchema,
    /// Three rows (L, a, b) of `schema.len()` weights.
    pub weights: Vec<f64>,
    pub bias: [f64; 3],
    pub ridge: f64,
    pub training_examples: usize,
    /// Seed of the run that produced the model; the fit itself is closed-form.
    #[serde(default)]
    pub seed: u64,
}

impl RegressorModel {
    pub fn predict(&self, f: &FeatureVector) -> Result<LabColor, ClassifyError> {
        if f.schema != self.schema {
            return Err(ClassifyError::SchemaMismatch { expected: self.schema, found: f.schema });
        }
        let n = self.schema.len();
        let out: [f64; 3] = std::array::from_fn(|k| {
            self.bias[k] + self.weights[k * n..(k + 1) * n].iter().zip(&f.values).map(|(w, x)| w * x).sum::<f64>()
        });
        Ok(LabColor::from(out))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("regressor serializes") + "\n")
    }

    pub fn load(path: &Path, expected: Option<FeatureSchema>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Persistence(format!("{}: {e}", path.display())))?;
        let model: RegressorModel =
            serde_json::from_str(&text).map_err(|e| PipelineError::Persistence(e.to_string()))?;
        if model.format_version != REGRESSOR_FORMAT_VERSION || model.weights.len() != 3 * model.schema.len() {
            return Err(PipelineError::Persistence("malformed regressor".into()));
        }
        if let Some(expected) = expected {
            if expected != model.schema {
                return Err(ClassifyError::SchemaMismatch { expected, found: model.schema }.into());
            }
        }
        Ok(model)
    }
}

/// Solves `a · x = b` for symmetric positive definite `a` (n × n, row-major)
/// with several right-hand sides (n × m). Returns `None` when a pivot is not
/// meaningfully positive.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize, m: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 1e-12 * scale {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for c in 0..m {
        for i in 0..n {
            let mut sum = x[i * m + c];
            for k in 0..i {
                sum -= l[i * n + k] * x[k * m + c];
            }
            x[i * m + c] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = x[i * m + c];
            for k in i + 1..n {
                sum -= l[k * n + i] * x[k * m + c];
            }
            x[i * m + c] = sum / l[i * n + i];
        }
    }
    Some(x)
}

/// Closed-form ridge regression; the intercept is not penalized.
pub fn train_lab_regressor(
    data: &[(FeatureVector, LabColor)],
    ridge: f64,
) -> Result<RegressorModel, PipelineError> {
    let first = data.first().ok_or(PipelineError::EmptyData)?;
    let schema = first.0.schema;
    let nf = schema.len();
    if let Some((f, _)) = data.iter().find(|(f, _)| f.schema != schema || f.values.len() != nf) {
        return Err(ClassifyError::SchemaMismatch { expected: schema, found: f.schema }.into());
    }
    let n = data.len() as f64;
    let mut x_mean = vec![0.0; nf];
    let mut y_mean = [0.0; 3];
    for (f, y) in data {
        for (m, x) in x_mean.iter_mut().zip(&f.values) {
            *m += x / n;
        }
        for (m, v) in y_mean.iter_mut().zip(y.to_array()) {
            *m += v / n;
        }
    }
    let mut xtx = vec![0.0; nf * nf];
    let mut xty = vec![0.0; nf * 3];
    for (f, y) in data {
        let xc: Vec<f64> = f.values.iter().zip(&x_mean).map(|(x, m)| x - m).collect();
        let yc: Vec<f64> = y.to_array().iter().zip(&y_mean).map(|(v, m)| v - m).collect();
        for i in 0..nf {
            if xc[i] == 0.0 {
                continue;
            }
            for j in 0..nf {
                xtx[i * nf + j] += xc[i] * xc[j];
            }
            for k in 0..3 {
                xty[i * 3 + k] += xc[i] * yc[k];
            }
        }
    }
    for i in 0..nf {
        xtx[i * nf + i] += ridge;
    }
    let solution = cholesky_solve(&xtx, &xty, nf, 3).ok_or(PipelineError::SingularSystem)?;
    let mut weights = vec![0.0; 3 * nf];
    let mut bias = y_mean;
    for k in 0..3 {
        for i in 0..nf {
            let w = solution[i * 3 + k];
            weights[k * nf + i] = w;
            bias[k] -= w * x_mean[i];
        }
    }
    Ok(RegressorModel {
        format_version: REGRESSOR_FORMAT_VERSION,
        schema,
        weights,
        bias,
        ridge,
        training_examples: data.len(),
        seed: 0,
    })
}

/// Radial projection onto the Euclidean LAB ball around `center`.
/// A radius of zero collapses to the center.
pub fn project_to_ball(p: LabColor, center: LabColor, radius: f64) -> LabColor {
    let d = p.euclidean(&center);
    if d <= radius {
        return p;
    }
    if radius <= 0.0 {
        return center;
    }
    let s = radius / d;
    LabColor::new(
        center.l + s * (p.l - center.l),
        center.a + s * (p.a - center.a),
        center.b + s * (p.b - center.b),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSource {
    Predicted,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabSource {
    Regressed,
    Centroid,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub bk_source: StageSource,
    pub css_source: StageSource,
    pub lab_source: LabSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub bk: BkFamily,
    pub css: NamedColor,
    pub lab: LabColor,
    pub provenance: Provenance,
}

/// BK classifier, nine per-family CSS classifiers and the LAB regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModels {
    pub bk: ClassifierModel,
    pub css: BTreeMap<BkFamily, ClassifierModel>,
    pub regressor: RegressorModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub radius: f64,
    pub ridge: f64,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { radius: DEFAULT_RADIUS, ridge: 1e-6, train: TrainConfig::default() }
    }
}

/// One ground-truth example: features plus true BK, CSS and LAB.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub bk: BkFamily,
    pub css: String,
    pub lab: LabColor,
}

pub fn family_vocab() -> Vec<String> {
    BkFamily::ALL.iter().map(|f| f.as_str().to_string()).collect()
}

pub fn train_pipeline(
    data: &[LabeledExample],
    table: &ColorTable,
    config: &PipelineConfig,
) -> Result<PipelineModels, PipelineError> {
    let schema = data.first().ok_or(PipelineError::EmptyData)?.features.schema;
    let bk_data: Vec<(FeatureVector, String)> =
        data.iter().map(|e| (e.features.clone(), e.bk.as_str().to_string())).collect();
    let bk = classify::train_softmax(&bk_data, &family_vocab(), &config.train)?;

    let mut css = BTreeMap::new();
    for family in BkFamily::ALL {
        let family_data: Vec<(FeatureVector, String)> = data
            .iter()
            .filter(|e| e.bk == family)
            .map(|e| (e.features.clone(), e.css.clone()))
            .collect();
        let mut vocab: Vec<String> = family_data.iter().map(|(_, l)| l.clone()).collect();
        vocab.sort();
        vocab.dedup();
        for name in &vocab {
            let entry = table.get(name).ok_or_else(|| NamingError::UnknownName(name.clone()))?;
            if entry.family != family {
                return Err(NamingError::UnknownName(format!("{name} (not in family {family})")).into());
            }
        }
        let model = if family_data.is_empty() {
            // Unseen family: uniform over the family's table entries.
            let names: Vec<String> = table.family_entries(family).map(|e| e.name.clone()).collect();
            if names.is_empty() {
                continue;
            }
            majority_model(&names, &names, schema)?
        } else {
            classify::train_softmax(&family_data, &vocab, &config.train)?
        };
        css.insert(family, model);
    }

    let reg_data: Vec<(FeatureVector, LabColor)> = data.iter().map(|e| (e.features.clone(), e.lab)).collect();
    let mut regressor = train_lab_regressor(&reg_data, config.ridge)?;
    regressor.seed = config.train.seed;
    Ok(PipelineModels { bk, css, regressor })
}

fn predict_css<'t>(
    models: &PipelineModels,
    f: &FeatureVector,
    family: BkFamily,
    table: &'t ColorTable,
) -> Result<&'t NamedColor, PipelineError> {
    let model = models.css.get(&family).ok_or(NamingError::EmptyCandidateSet(family))?;
    let scores = model.scores(f)?;
    let mut best: Option<(f64, &NamedColor)> = None;
    for (label, score) in model.vocab.iter().zip(scores) {
        if let Some(entry) = table.get(label).filter(|e| e.family == family) {
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, entry));
            }
        }
    }
    Ok(best.ok_or(NamingError::EmptyCandidateSet(family))?.1)
}

/// Ground-truth upstream outputs for oracle mode.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<'a> {
    pub bk: BkFamily,
    pub css: &'a str,
}

pub fn predict_hierarchical(
    f: &FeatureVector,
    models: &PipelineModels,
    table: &ColorTable,
    radius: f64,
    oracle: Option<Oracle<'_>>,
) -> Result<PredictionRecord, PipelineError> {
    let (bk, css, source) = match oracle {
        Some(o) => {
            let css = table
                .get(o.css)
                .filter(|e| e.family == o.bk)
                .ok_or(NamingError::EmptyCandidateSet(o.bk))?;
            (o.bk, css, StageSource::Oracle)
        }
        None => {
            let bk = BkFamily::ALL[classify::predict_dist(&models.bk, f)?.top1()];
            (bk, predict_css(models, f, bk, table)?, StageSource::Predicted)
        }
    };
    let (lab, lab_source) = if radius <= 0.0 {
        (css.centroid, LabSource::Centroid)
    } else {
        let raw = models.regressor.predict(f)?;
        (project_to_ball(raw, css.centroid, radius), LabSource::Regressed)
    };
    Ok(PredictionRecord {
        bk,
        css: css.clone(),
        lab,
        provenance: Provenance { bk_source: source, css_source: source, lab_source },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Unconstrained,
    CssCentroidOnly,
    PredictedPipeline,
    OraclePipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    pub n: usize,
    pub mean_delta_e: f64,
    pub median_delta_e: f64,
    /// Stage-1 family for pipeline rows; nearest prototype of the output for
    /// the unconstrained row.
    pub bk_accuracy: f64,
    /// Nearest prototype of the output LAB point, for every row.
    pub bk_accuracy_from_lab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub radius: f64,
    pub rows: Vec<StageRow>,
}

impl StageReport {
    pub fn row(&self, stage: Stage) -> &StageRow {
        self.rows.iter().find(|r| r.stage == stage).expect("report has all four stages")
    }
}

fn stage_row(
    stage: Stage,
    outputs: &[(BkFamily, LabColor)],
    truth: &[LabeledExample],
) -> Result<StageRow, PipelineError> {
    let pred: Vec<LabColor> = outputs.iter().map(|(_, l)| *l).collect();
    let true_lab: Vec<LabColor> = truth.iter().map(|e| e.lab).collect();
    let stats = metrics::delta_e_stats(&pred, &true_lab)?;
    let true_bk: Vec<BkFamily> = truth.iter().map(|e| e.bk).collect();
    let stage_bk: Vec<BkFamily> = outputs.iter().map(|(b, _)| *b).collect();
    let lab_bk: Vec<BkFamily> = pred.iter().map(|l| nearest_bk(*l)).collect();
    Ok(StageRow {
        stage,
        n: truth.len(),
        mean_delta_e: stats.mean,
        median_delta_e: stats.median,
        bk_accuracy: metrics::top1_accuracy(&stage_bk, &true_bk)?,
        bk_accuracy_from_lab: metrics::top1_accuracy(&lab_bk, &true_bk)?,
    })
}

/// Runs the four configurations on the same examples.
pub fn compare_stages(
    eval: &[LabeledExample],
    models: &PipelineModels,
    table: &ColorTable,
    radius: f64,
) -> Result<StageReport, PipelineError> {
    if eval.is_empty() {
        return Err(PipelineError::EmptyData);
    }
    let mut unconstrained = Vec::with_capacity(eval.len());
    let mut centroid = Vec::with_capacity(eval.len());
    let mut predicted = Vec::with_capacity(eval.len());
    let mut oracle = Vec::with_capacity(eval.len());
    for e in eval {
        let raw = models.regressor.predict(&e.features)?;
        unconstrained.push((nearest_bk(raw), raw));
        let c = predict_hierarchical(&e.features, models, table, 0.0, None)?;
        centroid.push((c.bk, c.lab));
        let p = predict_hierarchical(&e.features, models, table, radius, None)?;
        predicted.push((p.bk, p.lab));
        let o = predict_hierarchical(&e.features, models, table, radius, Some(Oracle { bk: e.bk, css: &e.css }))?;
        oracle.push((o.bk, o.lab));
    }
    Ok(StageReport {
        radius,
        rows: vec![
            stage_row(Stage::Unconstrained, &unconstrained, eval)?,
            stage_row(Stage::CssCentroidOnly, &centroid, eval)?,
            stage_row(Stage::PredictedPipeline, &predicted, eval)?,
            stage_row(Stage::OraclePipeline, &oracle, eval)?,
        ],
    })
}

/// Deterministic train/eval index split.
pub fn split_indices(n: usize, eval_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_eval = ((n as f64) * eval_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut eval = idx.split_off(n - n_eval);
    idx.sort_unstable();
    eval.sort_unstable();
    (idx, eval)
}

/// Mean CIEDE2000 between each example's true LAB and a fixed point per example.
pub fn mean_delta_e(points: &[LabColor], truth: &[LabeledExample]) -> f64 {
    points.iter().zip(truth).map(|(p, e)| delta_e_2000(*p, e.lab).value()).sum::<f64>() / truth.len() as f64
}
