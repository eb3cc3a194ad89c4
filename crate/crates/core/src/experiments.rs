//! Dataset assembly over truth/observed manifests and the evaluations built
//! on top of the pipeline: stage comparison, per-designer lift, per-slot
//! prediction, anchor conditioning, multilabel palettes and Monk × BK
//! association.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{
    self, anchor_features, histogram_features, predict_dist, predict_multilabel, swatch_features, ClassifierModel,
    ClassifyError, FeatureSchema, FeatureVector, TrainConfig,
};
use crate::colorspace::{delta_e_2000, LabColor};
use crate::error::{Error, Result};
use crate::io::AnnotationRecord;
use crate::metrics::{self, ContingencyTable};
use crate::naming::{monk_level, BkFamily, ColorTable};
use crate::palette::{annotate, mean_lab, name_color, AnnotateConfig, MaskedImage};
use crate::pipeline::{self, LabeledExample, PipelineModels, StageReport};
use crate::synth::SynthCorpus;

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_HISTOGRAM_BINS: usize = 4;
/// Anchors with fewer training records than this encode as unknown (all zeros).
pub const DEFAULT_MIN_ANCHOR_COUNT: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Swatch,
    Histogram { bins: usize },
}

impl FeatureKind {
    pub fn schema(self) -> FeatureSchema {
        match self {
            FeatureKind::Swatch => FeatureSchema::Swatch,
            FeatureKind::Histogram { bins } => FeatureSchema::Histogram { bins },
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Swatch => f.write_str("swatch"),
            FeatureKind::Histogram { .. } => f.write_str("histogram"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "swatch" => Ok(FeatureKind::Swatch),
            "histogram" => Ok(FeatureKind::Histogram { bins: DEFAULT_HISTOGRAM_BINS }),
            other => Err(format!("unknown feature kind `{other}` (swatch | histogram)")),
        }
    }
}

/// Features of one observed record. Histograms need the image.
pub fn features_of(kind: FeatureKind, observed: &AnnotationRecord, image: Option<&MaskedImage>) -> Result<FeatureVector> {
    match kind {
        FeatureKind::Swatch => Ok(swatch_features(&observed.palette)),
        FeatureKind::Histogram { bins } => {
            let img = image.ok_or_else(|| Error::Usage("histogram features need the garment image".into()))?;
            Ok(histogram_features(img, bins)?)
        }
    }
}

/// Annotates one garment image, carrying over the metadata of `meta` and
/// assigning a Monk level when a face crop is given.
pub fn observe(
    meta: &AnnotationRecord,
    image: &MaskedImage,
    face: Option<&MaskedImage>,
    table: &ColorTable,
    config: &AnnotateConfig,
    seed: u64,
) -> Result<AnnotationRecord> {
    let a = annotate(image, table, config, seed)?;
    let monk = match face {
        Some(f) => Some(monk_level(mean_lab(f)?)),
        None => None,
    };
    Ok(AnnotationRecord {
        palette: a.palette,
        chromatic: a.chromatic,
        bk_c1: a.bk,
        css_c1: a.css.name,
        monk,
        ..meta.clone()
    })
}

/// Annotates every image of a synthetic corpus.
pub fn observe_corpus(corpus: &SynthCorpus, config: &AnnotateConfig, seed: u64) -> Result<Vec<AnnotationRecord>> {
    let table = ColorTable::css();
    corpus.records.iter().map(|r| observe(&r.truth, &r.image, r.face.as_ref(), table, config, seed)).collect()
}

/// Pairs observed records with truth records of the same id, in truth order.
pub fn align<'a>(
    truth: &'a [AnnotationRecord],
    observed: &'a [AnnotationRecord],
) -> Result<Vec<(&'a AnnotationRecord, &'a AnnotationRecord)>> {
    let by_id: BTreeMap<&str, &AnnotationRecord> = observed.iter().map(|r| (r.id.as_str(), r)).collect();
    truth
        .iter()
        .map(|t| {
            by_id.get(t.id.as_str()).map(|o| (t, *o)).ok_or_else(|| Error::InvariantViolation {
                id: t.id.clone(),
                detail: "no observed record with this id".into(),
            })
        })
        .collect()
}

/// Pipeline examples: observed features, true BK, CSS and c1 LAB.
pub fn pipeline_examples(features: &[FeatureVector], truth: &[&AnnotationRecord]) -> Vec<LabeledExample> {
    features
        .iter()
        .zip(truth)
        .map(|(f, t)| LabeledExample {
            features: f.clone(),
            bk: t.bk_c1,
            css: t.css_c1.clone(),
            lab: t.palette.dominant(),
        })
        .collect()
}

/// CSS name and LAB of every non-empty palette slot, dominant first.
pub fn slot_labels(record: &AnnotationRecord, table: &ColorTable) -> Vec<(String, LabColor)> {
    record
        .palette
        .slots()
        .iter()
        .filter(|s| s.weight > 0.0)
        .map(|s| (name_color(s.lab, table).name.clone(), s.lab))
        .collect()
}

fn sorted_vocab<'a>(labels: impl IntoIterator<Item = &'a String>) -> Vec<String> {
    let set: BTreeSet<&String> = labels.into_iter().collect();
    set.into_iter().cloned().collect()
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub designer: String,
    pub n: usize,
    pub accuracy: f64,
    pub majority: f64,
    /// Percentage points.
    pub lift: f64,
}

/// BK accuracy against the designer's training-majority baseline, overall
/// (designer `*`, global majority) and per designer.
pub fn designer_lift(
    train: &[&AnnotationRecord],
    eval: &[&AnnotationRecord],
    predicted: &[BkFamily],
) -> Result<Vec<LiftRow>> {
    fn mode(records: &[&AnnotationRecord]) -> Option<BkFamily> {
        let mut counts = [0usize; 9];
        for r in records {
            counts[r.bk_c1.index()] += 1;
        }
        let best = (0..9).max_by(|&i, &j| counts[i].cmp(&counts[j]).then(j.cmp(&i)))?;
        (counts[best] > 0).then_some(BkFamily::ALL[best])
    }
    let row = |designer: &str, train_part: Vec<&AnnotationRecord>, eval_idx: Vec<usize>| -> Result<LiftRow> {
        let truth: Vec<BkFamily> = eval_idx.iter().map(|&i| eval[i].bk_c1).collect();
        let pred: Vec<BkFamily> = eval_idx.iter().map(|&i| predicted[i]).collect();
        let baseline = mode(&train_part).ok_or(metrics::MetricError::EmptyInput)?;
        let accuracy = metrics::top1_accuracy(&pred, &truth)?;
        let majority = metrics::top1_accuracy(&vec![baseline; truth.len()], &truth)?;
        Ok(LiftRow {
            designer: designer.to_string(),
            n: truth.len(),
            accuracy,
            majority,
            lift: metrics::lift(accuracy, majority)?,
        })
    };
    let mut rows = vec![row("*", train.to_vec(), (0..eval.len()).collect())?];
    let designers: BTreeSet<&str> = eval.iter().map(|r| r.designer.as_str()).collect();
    for d in designers {
        let train_part: Vec<&AnnotationRecord> = train.iter().copied().filter(|r| r.designer == d).collect();
        if train_part.is_empty() {
            continue;
        }
        let idx = (0..eval.len()).filter(|&i| eval[i].designer == d).collect();
        rows.push(row(d, train_part, idx)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    /// 1-based slot number.
    pub slot: usize,
    pub n: usize,
    pub top1: f64,
    pub majority: f64,
    /// CIEDE2000 from the predicted name's centroid to the true slot color.
    pub median_delta_e: f64,
}

/// Trains one softmax per slot on the same features and reports held-out
/// top-1 and median ΔE00 of the predicted centroid.
pub fn per_slot_evaluation(
    features: &[FeatureVector],
    truth: &[&AnnotationRecord],
    train_idx: &[usize],
    eval_idx: &[usize],
    table: &ColorTable,
    config: &TrainConfig,
) -> Result<Vec<SlotRow>> {
    let labels: Vec<Vec<(String, LabColor)>> = truth.iter().map(|t| slot_labels(t, table)).collect();
    let slots = labels.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows = Vec::new();
    for s in 0..slots {
        let has = |i: &&usize| labels[**i].len() > s;
        let train: Vec<(FeatureVector, String)> =
            train_idx.iter().filter(has).map(|&i| (features[i].clone(), labels[i][s].0.clone())).collect();
        let eval: Vec<usize> = eval_idx.iter().filter(has).copied().collect();
        if train.is_empty() || eval.is_empty() {
            continue;
        }
        let vocab = sorted_vocab(train.iter().map(|(_, l)| l));
        let model = classify::train_softmax(&train, &vocab, config)?;
        let train_labels: Vec<String> = train.iter().map(|(_, l)| l.clone()).collect();
        let majority = classify::majority_model(&train_labels, &vocab, features[0].schema)?;
        let mut hits = 0usize;
        let mut majority_hits = 0usize;
        let mut deltas = Vec::with_capacity(eval.len());
        for &i in &eval {
            let (true_name, true_lab) = &labels[i][s];
            let pred = &vocab[predict_dist(&model, &features[i])?.top1()];
            hits += usize::from(pred == true_name);
            majority_hits += usize::from(&vocab[predict_dist(&majority, &features[i])?.top1()] == true_name);
            let centroid = table.get(pred).expect("vocabulary comes from the table").centroid;
            deltas.push(delta_e_2000(centroid, *true_lab).value());
        }
        let n = eval.len() as f64;
        rows.push(SlotRow {
            slot: s + 1,
            n: eval.len(),
            top1: hits as f64 / n,
            majority: majority_hits as f64 / n,
            median_delta_e: metrics::lower_median(&deltas).expect("non-empty"),
        });
    }
    Ok(rows)
}

/// Slot-2 models with and without the c1 anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorModels {
    pub format_version: u32,
    pub seed: u64,
    pub anchor_vocab: Vec<String>,
    pub unanchored: ClassifierModel,
    pub anchored: ClassifierModel,
}

/// Swatch features with the anchor one-hot; an anchor outside the vocabulary
/// encodes as all zeros.
pub fn anchored(f: &FeatureVector, anchor: &str, vocab: &[String]) -> Result<FeatureVector> {
    match anchor_features(f, anchor, vocab) {
        Err(ClassifyError::UnknownLabel(_)) => {
            let mut values = f.values.clone();
            values.resize(f.values.len() + vocab.len(), 0.0);
            Ok(FeatureVector { schema: FeatureSchema::SwatchAnchor { anchors: vocab.len() }, values })
        }
        other => Ok(other?),
    }
}

/// Per record: swatch features of observed c1, the true c1 name as anchor and
/// the true slot-2 name as target. Records without a second slot are skipped.
pub struct AnchorData {
    pub rows: Vec<usize>,
    pub features: Vec<FeatureVector>,
    pub anchors: Vec<String>,
    pub targets: Vec<String>,
}

pub fn anchor_data(pairs: &[(&AnnotationRecord, &AnnotationRecord)], table: &ColorTable) -> AnchorData {
    let mut d = AnchorData { rows: vec![], features: vec![], anchors: vec![], targets: vec![] };
    for (i, (t, o)) in pairs.iter().enumerate() {
        let labels = slot_labels(t, table);
        if let Some((target, _)) = labels.get(1) {
            d.rows.push(i);
            d.features.push(swatch_features(&o.palette));
            d.anchors.push(t.css_c1.clone());
            d.targets.push(target.clone());
        }
    }
    d
}

/// Trains both slot-2 models. Anchors seen fewer than `min_anchor_count`
/// times in training stay out of the anchor vocabulary and encode as zeros.
pub fn train_anchor_models(
    data: &AnchorData,
    train_rows: &[usize],
    min_anchor_count: usize,
    config: &TrainConfig,
) -> Result<AnchorModels> {
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for &i in train_rows {
        *counts.entry(&data.anchors[i]).or_default() += 1;
    }
    let anchor_vocab: Vec<String> =
        counts.into_iter().filter(|&(_, c)| c >= min_anchor_count.max(1)).map(|(a, _)| a.clone()).collect();
    let vocab = sorted_vocab(train_rows.iter().map(|&i| &data.targets[i]));
    let plain: Vec<(FeatureVector, String)> =
        train_rows.iter().map(|&i| (data.features[i].clone(), data.targets[i].clone())).collect();
    let with_anchor = train_rows
        .iter()
        .map(|&i| Ok((anchored(&data.features[i], &data.anchors[i], &anchor_vocab)?, data.targets[i].clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorModels {
        format_version: REPORT_FORMAT_VERSION,
        seed: config.seed,
        unanchored: classify::train_softmax(&plain, &vocab, config)?,
        anchored: classify::train_softmax(&with_anchor, &vocab, config)?,
        anchor_vocab,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorReport {
    pub n: usize,
    pub unanchored_top1: f64,
    pub anchored_top1: f64,
    /// Percentage points.
    pub lift: f64,
}

pub fn evaluate_anchor(models: &AnchorModels, data: &AnchorData, eval_rows: &[usize]) -> Result<AnchorReport> {
    let mut plain = Vec::with_capacity(eval_rows.len());
    let mut with_anchor = Vec::with_capacity(eval_rows.len());
    let mut truth = Vec::with_capacity(eval_rows.len());
    for &i in eval_rows {
        let f = &data.features[i];
        plain.push(classify::predict_label(&models.unanchored, f)?.to_string());
        let a = anchored(f, &data.anchors[i], &models.anchor_vocab)?;
        with_anchor.push(classify::predict_label(&models.anchored, &a)?.to_string());
        truth.push(data.targets[i].clone());
    }
    let unanchored_top1 = metrics::top1_accuracy(&plain, &truth)?;
    let anchored_top1 = metrics::top1_accuracy(&with_anchor, &truth)?;
    Ok(AnchorReport {
        n: truth.len(),
        unanchored_top1,
        anchored_top1,
        lift: (anchored_top1 - unanchored_top1) * 100.0,
    })
}

/// Label set per record: the names of all non-empty truth slots.
pub fn palette_sets(truth: &[&AnnotationRecord], table: &ColorTable) -> Vec<BTreeSet<String>> {
    truth.iter().map(|t| slot_labels(t, table).into_iter().map(|(n, _)| n).collect()).collect()
}

pub fn train_palette_model(
    features: &[FeatureVector],
    sets: &[BTreeSet<String>],
    train_idx: &[usize],
    config: &TrainConfig,
) -> Result<ClassifierModel> {
    let vocab = sorted_vocab(train_idx.iter().flat_map(|&i| sets[i].iter()));
    let data: Vec<(FeatureVector, BTreeSet<String>)> =
        train_idx.iter().map(|&i| (features[i].clone(), sets[i].clone())).collect();
    Ok(classify::train_multilabel(&data, &vocab, config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilabelReport {
    pub n: usize,
    pub precision_at_1: f64,
    pub precision_at_3: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub fn evaluate_palette_model(
    model: &ClassifierModel,
    features: &[FeatureVector],
    sets: &[BTreeSet<String>],
    eval_idx: &[usize],
) -> Result<MultilabelReport> {
    let mut scores = Vec::with_capacity(eval_idx.len());
    let mut pred_sets = Vec::with_capacity(eval_idx.len());
    let mut truth_idx = Vec::with_capacity(eval_idx.len());
    for &i in eval_idx {
        let p = predict_multilabel(model, &features[i])?;
        scores.push(p.scores);
        pred_sets.push(p.set);
        truth_idx.push(sets[i].iter().filter_map(|l| model.label_index(l)).collect::<BTreeSet<usize>>());
    }
    // Labels seen only at evaluation time count as misses, not errors.
    let mut vocab = model.vocab.clone();
    vocab.extend(sorted_vocab(eval_idx.iter().flat_map(|&i| sets[i].iter())).into_iter().filter(|l| model.label_index(l).is_none()));
    let truth_sets = pick(sets, eval_idx);
    let f1 = metrics::f1_scores(&pred_sets, &truth_sets, &vocab)?;
    let k3 = 3.min(model.vocab.len());
    Ok(MultilabelReport {
        n: eval_idx.len(),
        precision_at_1: metrics::precision_at_k(&scores, &truth_idx, 1)?,
        precision_at_3: metrics::precision_at_k(&scores, &truth_idx, k3)?,
        macro_f1: f1.macro_f1,
        micro_f1: f1.micro_f1,
    })
}

/// Monk level (rows, 1..=10) against BK family of c1 (columns, all nine).
pub fn monk_bk_table(records: &[&AnnotationRecord]) -> Option<ContingencyTable> {
    let rows: Vec<String> = (1..=10).map(|l: u8| l.to_string()).collect();
    let cols: Vec<String> = BkFamily::ALL.iter().map(|f| f.as_str().to_string()).collect();
    let mut t = ContingencyTable::new(rows, cols);
    let mut any = false;
    for r in records {
        if let Some(m) = r.monk {
            t.counts[usize::from(m.get()) - 1][r.bk_c1.index()] += 1;
            any = true;
        }
    }
    any.then_some(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub seed: u64,
    pub features: FeatureKind,
    pub n_train: usize,
    pub n_eval: usize,
    pub stages: StageReport,
    pub bk_lift: Vec<LiftRow>,
    pub anchor: Option<AnchorReport>,
    pub multilabel: Option<MultilabelReport>,
    /// Cramér's V of Monk level × BK family; `None` without Monk levels or
    /// with a degenerate table.
    pub monk_bk_cramers_v: Option<f64>,
}

/// Stage comparison, lift and Monk association for trained pipeline models.
pub fn evaluate_pipeline(
    models: &PipelineModels,
    features: &[FeatureVector],
    truth: &[&AnnotationRecord],
    train_idx: &[usize],
    eval_idx: &[usize],
    table: &ColorTable,
    radius: f64,
) -> Result<(StageReport, Vec<LiftRow>, Option<f64>)> {
    let eval_truth = pick(truth, eval_idx);
    let eval_features = pick(features, eval_idx);
    let examples = pipeline_examples(&eval_features, &eval_truth);
    let stages = pipeline::compare_stages(&examples, models, table, radius)?;
    let predicted = eval_features
        .iter()
        .map(|f| Ok(BkFamily::ALL[predict_dist(&models.bk, f)?.top1()]))
        .collect::<Result<Vec<_>>>()?;
    let lift = designer_lift(&pick(truth, train_idx), &eval_truth, &predicted)?;
    let v = monk_bk_table(truth).and_then(|t| metrics::cramers_v(&t).ok());
    Ok((stages, lift, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::palette::{ChromaticFlag, Palette, PaletteSlot};

    fn record(id: &str, designer: &str, slots: &[(&str, f64)]) -> AnnotationRecord {
        let table = ColorTable::css();
        let mut s: Vec<PaletteSlot> =
            slots.iter().map(|&(n, w)| PaletteSlot { lab: table.get(n).unwrap().centroid, weight: w }).collect();
        let last = s.last().unwrap().lab;
        s.resize(6, PaletteSlot { lab: last, weight: 0.0 });
        let c1 = table.get(slots[0].0).unwrap();
        AnnotationRecord {
            id: id.into(),
            image_path: String::new(),
            mask_path: String::new(),
            designer: designer.into(),
            season: "fall".into(),
            year: None,
            palette: Palette::new(s).unwrap(),
            chromatic: ChromaticFlag::Chromatic,
            bk_c1: c1.family,
            css_c1: c1.name.clone(),
            monk: None,
        }
    }

    #[test]
    fn slot_labels_skip_empty_slots() {
        let r = record("a", "h", &[("navy", 0.7), ("gold", 0.3)]);
        let names: Vec<String> = slot_labels(&r, ColorTable::css()).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["navy", "gold"]);
    }

    #[test]
    fn lift_uses_training_majority_per_designer() {
        let train = [
            record("t1", "a", &[("navy", 1.0)]),
            record("t2", "a", &[("navy", 1.0)]),
            record("t3", "b", &[("gold", 1.0)]),
        ];
        let eval = [record("e1", "a", &[("navy", 1.0)]), record("e2", "b", &[("navy", 1.0)])];
        let train_refs: Vec<&AnnotationRecord> = train.iter().collect();
        let eval_refs: Vec<&AnnotationRecord> = eval.iter().collect();
        let predicted = [BkFamily::Blue, BkFamily::Blue];
        let rows = designer_lift(&train_refs, &eval_refs, &predicted).unwrap();
        assert_eq!(rows[0].designer, "*");
        assert_eq!((rows[0].accuracy, rows[0].majority), (1.0, 1.0));
        let b = rows.iter().find(|r| r.designer == "b").unwrap();
        assert_eq!((b.accuracy, b.majority, b.lift), (1.0, 0.0, 100.0));
    }

    #[test]
    fn align_requires_every_truth_id() {
        let t = [record("x", "h", &[("navy", 1.0)])];
        let o = [record("y", "h", &[("navy", 1.0)])];
        assert!(align(&t, &o).is_err());
        assert_eq!(align(&t, &t).unwrap().len(), 1);
    }

    #[test]
    fn unknown_anchor_encodes_as_zeros() {
        let f = classify::swatch_features_of(LabColor::new(50.0, 0.0, 0.0));
        let vocab = vec!["navy".to_string(), "gold".to_string()];
        assert_eq!(anchored(&f, "gold", &vocab).unwrap().values[5..], [0.0, 1.0]);
        assert_eq!(anchored(&f, "teal", &vocab).unwrap().values[5..], [0.0, 0.0]);
    }

    #[test]
    fn feature_kind_parsing() {
        assert_eq!("swatch".parse::<FeatureKind>().unwrap(), FeatureKind::Swatch);
        assert_eq!(
            "histogram".parse::<FeatureKind>().unwrap().schema(),
            FeatureSchema::Histogram { bins: DEFAULT_HISTOGRAM_BINS }
        );
        assert!("cnn".parse::<FeatureKind>().is_err());
    }
}
