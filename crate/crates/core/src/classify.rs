//! Feature extraction and linear classifiers.
//!
//! Models are affine: `scores = W·x + b` with `W` stored labels × features.
//! Training is full-batch gradient descent on standardized features; the
//! standardization is folded back into `W` and `b` afterwards, so a trained
//! model is a plain affine map over raw features.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{chroma, hue_angle, srgb_to_lab, LabColor};
use crate::palette::{MaskedImage, Palette};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("no training data")]
    EmptyData,
    #[error("label `{0}` is not in the vocabulary")]
    UnknownLabel(String),
    #[error("feature schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: FeatureSchema, found: FeatureSchema },
    #[error("vocabulary is empty or has duplicates")]
    BadVocabulary,
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("model file: {0}")]
    Persistence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSchema {
    Swatch,
    Histogram { bins: usize },
    SwatchAnchor { anchors: usize },
}

impl FeatureSchema {
    pub const SWATCH_LEN: usize = 5;

    pub fn len(&self) -> usize {
        match *self {
            FeatureSchema::Swatch => Self::SWATCH_LEN,
            FeatureSchema::Histogram { bins } => bins * bins * bins,
            FeatureSchema::SwatchAnchor { anchors } => Self::SWATCH_LEN + anchors,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSchema::Swatch => write!(f, "swatch"),
            FeatureSchema::Histogram { bins } => write!(f, "histogram[{bins}]"),
            FeatureSchema::SwatchAnchor { anchors } => write!(f, "swatch+anchor[{anchors}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: FeatureSchema,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: FeatureSchema, values: Vec<f64>) -> Option<Self> {
        (values.len() == schema.len() && values.iter().all(|v| v.is_finite()))
            .then_some(Self { schema, values })
    }
}

/// `[L/100, a/128, b/128, C/128, h/2π]` of one color.
pub fn swatch_features_of(c: LabColor) -> FeatureVector {
    FeatureVector {
        schema: FeatureSchema::Swatch,
        values: vec![c.l / 100.0, c.a / 128.0, c.b / 128.0, chroma(c) / 128.0, hue_angle(c) / (2.0 * PI)],
    }
}

/// Swatch features of the dominant slot.
pub fn swatch_features(p: &Palette) -> FeatureVector {
    swatch_features_of(p.dominant())
}

/// Normalized 3-D LAB histogram over masked pixels, flattened L-major.
pub fn histogram_features(img: &MaskedImage, bins: usize) -> Result<FeatureVector, ClassifyError> {
    let bins = bins.max(1);
    let bin = |v: f64, lo: f64, hi: f64| {
        let i = ((v - lo) / (hi - lo) * bins as f64).floor();
        (i.max(0.0) as usize).min(bins - 1)
    };
    let mut counts = vec![0usize; bins * bins * bins];
    let mut total = 0usize;
    let mut cache: HashMap<crate::colorspace::SrgbColor, usize> = HashMap::new();
    for p in img.masked_pixels() {
        let idx = *cache.entry(p).or_insert_with(|| {
            let lab = srgb_to_lab(p);
            (bin(lab.l, 0.0, 100.0) * bins + bin(lab.a, -128.0, 128.0)) * bins + bin(lab.b, -128.0, 128.0)
        });
        counts[idx] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(ClassifyError::EmptyMask);
    }
    let n = total as f64;
    Ok(FeatureVector {
        schema: FeatureSchema::Histogram { bins },
        values: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Appends a one-hot encoding of the c1 anchor label.
pub fn anchor_features(
    f: &FeatureVector,
    c1_label: &str,
    vocab: &[String],
) -> Result<FeatureVector, ClassifyError> {
    if f.schema != FeatureSchema::Swatch {
        return Err(ClassifyError::SchemaMismatch { expected: FeatureSchema::Swatch, found: f.schema });
    }
    let pos = vocab
        .iter()
        .position(|v| v == c1_label)
        .ok_or_else(|| ClassifyError::UnknownLabel(c1_label.to_string()))?;
    let mut values = f.values.clone();
    values.extend((0..vocab.len()).map(|i| if i == pos { 1.0 } else { 0.0 }));
    Ok(FeatureVector { schema: FeatureSchema::SwatchAnchor { anchors: vocab.len() }, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size as a fraction of 1/curvature-bound; values below 2 descend.
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1.0, epochs: 1000, l2: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Softmax,
    Multilabel,
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub lr: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub schema: FeatureSchema,
    pub vocab: Vec<String>,
    /// Row-major, `vocab.len()` rows of `schema.len()` weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub meta: TrainingMeta,
}

impl ClassifierModel {
    pub fn n_labels(&self) -> usize {
        self.vocab.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.vocab.iter().position(|v| v == label)
    }

    /// Affine scores for each label.
    pub fn scores(&self, f: &FeatureVector) -> Result<Vec<f64>, ClassifyError> {
        if f.schema != self.schema {
            return Err(ClassifyError::SchemaMismatch { expected: self.schema, found: f.schema });
        }
        let n = self.schema.len();
        Ok(self
            .bias
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let row = &self.weights[l * n..(l + 1) * n];
                b + row.iter().zip(&f.values).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str, expected: Option<FeatureSchema>) -> Result<Self, ClassifyError> {
        let model: ClassifierModel =
            serde_json::from_str(text).map_err(|e| ClassifyError::Persistence(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::Persistence(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        if let Some(expected) = expected {
            if expected != model.schema {
                return Err(ClassifyError::SchemaMismatch { expected, found: model.schema });
            }
        }
        let n = model.schema.len();
        if model.vocab.is_empty()
            || model.bias.len() != model.vocab.len()
            || model.weights.len() != model.vocab.len() * n
        {
            return Err(ClassifyError::Persistence("weight dimensions disagree with vocabulary".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn load(path: &Path, expected: Option<FeatureSchema>) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClassifyError::Persistence(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, expected)
    }
}

/// Per-label probabilities; sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    /// Arg-max with ties going to the earlier vocabulary entry.
    pub fn top1(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn predict_dist(m: &ClassifierModel, f: &FeatureVector) -> Result<LabelDistribution, ClassifyError> {
    Ok(LabelDistribution { probs: softmax(&m.scores(f)?) })
}

/// Top-1 label of a softmax or majority model.
pub fn predict_label<'m>(m: &'m ClassifierModel, f: &FeatureVector) -> Result<&'m str, ClassifyError> {
    Ok(&m.vocab[predict_dist(m, f)?.top1()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Softmax cross-entropy over a single target label.
    CrossEntropy,
    /// Independent sigmoid per label with binary cross-entropy.
    BinaryCrossEntropy,
}

/// Mean training loss plus `l2/2 · |W|²` over standardized features.
///
/// Parameters are flattened as `W` (labels × features, standardized space)
/// followed by `b`.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    kind: LossKind,
    n_labels: usize,
    n_features: usize,
    rows: Vec<Vec<(usize, f64)>>,
    targets: Vec<Vec<usize>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    l2: f64,
}

impl LinearObjective {
    /// `targets[i]` holds one label index for cross-entropy, or the set of
    /// positive labels for binary cross-entropy.
    pub fn new(
        kind: LossKind,
        n_labels: usize,
        features: &[&[f64]],
        targets: Vec<Vec<usize>>,
        l2: f64,
    ) -> Self {
        let n_features = features.first().map_or(0, |f| f.len());
        let n = features.len().max(1) as f64;
        let mut mean = vec![0.0; n_features];
        for f in features {
            for (m, x) in mean.iter_mut().zip(f.iter()) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; n_features];
        for f in features {
            for ((v, x), m) in var.iter_mut().zip(f.iter()).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        let rows = features
            .iter()
            .map(|f| f.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect())
            .collect();
        Self { kind, n_labels, n_features, rows, targets, mean, scale, l2 }
    }

    pub fn param_len(&self) -> usize {
        self.n_labels * (self.n_features + 1)
    }

    /// Raw-space weights and per-label offsets equivalent to `params`.
    fn fold(&self, params: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nl, nf) = (self.n_labels, self.n_features);
        let mut w = vec![0.0; nl * nf];
        let mut b = params[nl * nf..].to_vec();
        for l in 0..nl {
            for f in 0..nf {
                let raw = params[l * nf + f] / self.scale[f];
                w[l * nf + f] = raw;
                b[l] -= raw * self.mean[f];
            }
        }
        (w, b)
    }

    fn raw_scores(&self, w: &[f64], b: &[f64], row: &[(usize, f64)], out: &mut [f64]) {
        let nf = self.n_features;
        out.copy_from_slice(b);
        for &(f, x) in row {
            for (l, s) in out.iter_mut().enumerate() {
                *s += w[l * nf + f] * x;
            }
        }
    }

    /// Loss and gradient at `params`.
    pub fn eval(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (nl, nf) = (self.n_labels, self.n_features);
        let (w, b) = self.fold(params);
        let n = self.rows.len() as f64;
        let mut loss = 0.0;
        let mut acc = vec![0.0; nl * nf];
        let mut col_sum = vec![0.0; nl];
        let mut scores = vec![0.0; nl];
        let mut g = vec![0.0; nl];
        for (row, target) in self.rows.iter().zip(&self.targets) {
            self.raw_scores(&w, &b, row, &mut scores);
            match self.kind {
                LossKind::CrossEntropy => {
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
                    let t = target[0];
                    loss += log_z - scores[t];
                    for l in 0..nl {
                        g[l] = (scores[l] - log_z).exp() - if l == t { 1.0 } else { 0.0 };
                    }
                }
                LossKind::BinaryCrossEntropy => {
                    for l in 0..nl {
                        let y = if target.contains(&l) { 1.0 } else { 0.0 };
                        let s = scores[l];
                        // log(1 + e^s) - y·s, computed stably.
                        loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s;
                        g[l] = sigmoid(s) - y;
                    }
                }
            }
            for l in 0..nl {
                col_sum[l] += g[l];
            }
            for &(f, x) in row {
                for l in 0..nl {
                    acc[l * nf + f] += g[l] * x;
                }
            }
        }
        let mut grad = vec![0.0; self.param_len()];
        let mut penalty = 0.0;
        for l in 0..nl {
            for f in 0..nf {
                let p = params[l * nf + f];
                penalty += p * p;
                grad[l * nf + f] =
                    (acc[l * nf + f] - col_sum[l] * self.mean[f]) / (n * self.scale[f]) + self.l2 * p;
            }
            grad[nl * nf + l] = col_sum[l] / n;
        }
        (loss / n + 0.5 * self.l2 * penalty, grad)
    }

    /// Upper bound on the Hessian's largest eigenvalue, from power iteration
    /// on the second moment of the standardized, bias-augmented features.
    fn curvature_bound(&self) -> f64 {
        let nf = self.n_features;
        let dense: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|row| {
                let mut x: Vec<f64> = (0..nf).map(|f| -self.mean[f] / self.scale[f]).collect();
                for &(f, v) in row {
                    x[f] += v / self.scale[f];
                }
                x.push(1.0);
                x
            })
            .collect();
        let n = dense.len().max(1) as f64;
        let mut v = vec![1.0 / ((nf + 1) as f64).sqrt(); nf + 1];
        let mut lambda = 1.0;
        for _ in 0..50 {
            let mut next = vec![0.0; nf + 1];
            for x in &dense {
                let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (o, a) in next.iter_mut().zip(x) {
                    *o += dot * a / n;
                }
            }
            let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            v = next.into_iter().map(|a| a / norm).collect();
        }
        // Per-example loss curvature: at most 1/2 for softmax, 1/4 for a sigmoid.
        let loss_curv = match self.kind {
            LossKind::CrossEntropy => 0.5,
            LossKind::BinaryCrossEntropy => 0.25,
        };
        1.05 * loss_curv * lambda + self.l2
    }

    /// Runs gradient descent, returning final parameters and the loss trace.
    pub fn minimize(&self, config: &TrainConfig) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init = Normal::new(0.0, 0.01).expect("valid normal");
        let nw = self.n_labels * self.n_features;
        let mut params: Vec<f64> =
            (0..self.param_len()).map(|i| if i < nw { init.sample(&mut rng) } else { 0.0 }).collect();
        let step = config.lr / self.curvature_bound();
        let mut trace = Vec::with_capacity(config.epochs + 1);
        for _ in 0..config.epochs {
            let (loss, grad) = self.eval(&params);
            trace.push(loss);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        trace.push(self.eval(&params).0);
        (params, trace)
    }

    fn into_model(
        &self,
        kind: ModelKind,
        schema: FeatureSchema,
        vocab: &[String],
        params: &[f64],
        config: &TrainConfig,
        final_loss: f64,
    ) -> ClassifierModel {
        let (weights, bias) = self.fold(params);
        ClassifierModel {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            schema,
            vocab: vocab.to_vec(),
            weights,
            bias,
            meta: TrainingMeta {
                seed: config.seed,
                epochs: config.epochs,
                final_loss,
                lr: config.lr,
                l2: config.l2,
            },
        }
    }
}

fn check_vocab(vocab: &[String]) -> Result<(), ClassifyError> {
    let unique: BTreeSet<&String> = vocab.iter().collect();
    if vocab.is_empty() || unique.len() != vocab.len() {
        return Err(ClassifyError::BadVocabulary);
    }
    Ok(())
}

fn check_schema<'a>(
    features: impl Iterator<Item = &'a FeatureVector>,
) -> Result<FeatureSchema, ClassifyError> {
    let mut schema = None;
    for f in features {
        match schema {
            None => schema = Some(f.schema),
            Some(s) if s != f.schema => {
                return Err(ClassifyError::SchemaMismatch { expected: s, found: f.schema })
            }
            _ => {}
        }
        if f.values.len() != f.schema.len() {
            return Err(ClassifyError::SchemaMismatch { expected: f.schema, found: f.schema });
        }
    }
    schema.ok_or(ClassifyError::EmptyData)
}

fn index_of(vocab: &[String], label: &str) -> Result<usize, ClassifyError> {
    vocab.iter().position(|v| v == label).ok_or_else(|| ClassifyError::UnknownLabel(label.to_string()))
}

/// Multinomial logistic regression trained with full-batch gradient descent.
pub fn train_softmax(
    data: &[(FeatureVector, String)],
    vocab: &[String],
    config: &TrainConfig,
) -> Result<ClassifierModel, ClassifyError> {
    train_softmax_traced(data, vocab, config).map(|(m, _)| m)
}

/// As [`train_softmax`], also returning the per-epoch loss trace.
pub fn train_softmax_traced(
    data: &[(FeatureVector, String)],
    vocab: &[String],
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<f64>), ClassifyError> {
    check_vocab(vocab)?;
    let schema = check_schema(data.iter().map(|(f, _)| f))?;
    let targets =
        data.iter().map(|(_, l)| index_of(vocab, l).map(|i| vec![i])).collect::<Result<Vec<_>, _>>()?;
    let features: Vec<&[f64]> = data.iter().map(|(f, _)| f.values.as_slice()).collect();
    let objective = LinearObjective::new(LossKind::CrossEntropy, vocab.len(), &features, targets, config.l2);
    let (params, trace) = objective.minimize(config);
    let final_loss = *trace.last().expect("trace is non-empty");
    Ok((objective.into_model(ModelKind::Softmax, schema, vocab, &params, config, final_loss), trace))
}

/// Independent per-label logistic outputs trained with binary cross-entropy.
pub fn train_multilabel(
    data: &[(FeatureVector, BTreeSet<String>)],
    vocab: &[String],
    config: &TrainConfig,
) -> Result<ClassifierModel, ClassifyError> {
    check_vocab(vocab)?;
    let schema = check_schema(data.iter().map(|(f, _)| f))?;
    let targets = data
        .iter()
        .map(|(_, set)| set.iter().map(|l| index_of(vocab, l)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let features: Vec<&[f64]> = data.iter().map(|(f, _)| f.values.as_slice()).collect();
    let objective =
        LinearObjective::new(LossKind::BinaryCrossEntropy, vocab.len(), &features, targets, config.l2);
    let (params, trace) = objective.minimize(config);
    let final_loss = *trace.last().expect("trace is non-empty");
    Ok(objective.into_model(ModelKind::Multilabel, schema, vocab, &params, config, final_loss))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelPrediction {
    /// Per-label probabilities in (0, 1), vocabulary order.
    pub scores: Vec<f64>,
    /// Labels scoring at least 0.5.
    pub set: BTreeSet<String>,
}

pub fn predict_multilabel(
    m: &ClassifierModel,
    f: &FeatureVector,
) -> Result<MultilabelPrediction, ClassifyError> {
    let scores: Vec<f64> = m.scores(f)?.into_iter().map(sigmoid).collect();
    let set = scores.iter().zip(&m.vocab).filter(|(s, _)| **s >= 0.5).map(|(_, l)| l.clone()).collect();
    Ok(MultilabelPrediction { scores, set })
}

/// Constant predictor of the modal label; ties go to the earlier vocabulary entry.
///
/// The bias holds log label frequencies, so the predicted distribution is the
/// empirical prior.
pub fn majority_model(
    labels: &[String],
    vocab: &[String],
    schema: FeatureSchema,
) -> Result<ClassifierModel, ClassifyError> {
    check_vocab(vocab)?;
    if labels.is_empty() {
        return Err(ClassifyError::EmptyData);
    }
    let mut counts = vec![0usize; vocab.len()];
    for l in labels {
        counts[index_of(vocab, l)?] += 1;
    }
    let n = labels.len() as f64;
    let bias = counts.iter().map(|&c| if c > 0 { (c as f64 / n).ln() } else { -30.0 }).collect();
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Majority,
        schema,
        vocab: vocab.to_vec(),
        weights: vec![0.0; vocab.len() * schema.len()],
        bias,
        meta: TrainingMeta { seed: 0, epochs: 0, final_loss: 0.0, lr: 0.0, l2: 0.0 },
    })
}
