//! Evaluation statistics: accuracy, lift, CIEDE2000 summaries, ranking and
//! set metrics, year error and Cramér's V.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{delta_e_2000, LabColor};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("value {0} outside [0, 1]")]
    RangeError(f64),
    #[error("k = {k} exceeds the {available} scored labels")]
    KTooLarge { k: usize, available: usize },
    #[error("label `{0}` is not in the vocabulary")]
    UnknownLabel(String),
    #[error("contingency table needs at least two non-empty rows and columns")]
    DegenerateTable,
}

fn check_pair<A, B>(a: &[A], b: &[B]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

pub fn top1_accuracy<T: PartialEq>(pred: &[T], truth: &[T]) -> Result<f64, MetricError> {
    check_pair(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Accuracy minus majority baseline, in percentage points.
pub fn lift(acc: f64, majority: f64) -> Result<f64, MetricError> {
    for v in [acc, majority] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricError::RangeError(v));
        }
    }
    Ok((acc - majority) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEStats {
    pub mean: f64,
    /// Lower-middle element for even counts.
    pub median: f64,
}

/// Median with the lower-middle convention for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}

pub fn summarize(values: &[f64]) -> Result<DeltaEStats, MetricError> {
    let median = lower_median(values).ok_or(MetricError::EmptyInput)?;
    Ok(DeltaEStats { mean: values.iter().sum::<f64>() / values.len() as f64, median })
}

pub fn delta_e_stats(pred: &[LabColor], truth: &[LabColor]) -> Result<DeltaEStats, MetricError> {
    check_pair(pred, truth)?;
    let d: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| delta_e_2000(*p, *t).value()).collect();
    summarize(&d)
}

/// Label indices ranked by score, ties going to the earlier index.
pub fn rank_labels(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

/// Mean over examples of |top-k ∩ truth| / k.
pub fn precision_at_k(
    scores: &[Vec<f64>],
    truth: &[BTreeSet<usize>],
    k: usize,
) -> Result<f64, MetricError> {
    check_pair(scores, truth)?;
    let k = k.max(1);
    let mut total = 0.0;
    for (s, t) in scores.iter().zip(truth) {
        if s.len() < k {
            return Err(MetricError::KTooLarge { k, available: s.len() });
        }
        let hits = rank_labels(s).into_iter().take(k).filter(|i| t.contains(i)).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Per-label F1 averaged (macro) and pooled (micro). A label with no true and
/// no predicted instance contributes F1 = 0 to the macro average.
pub fn f1_scores(
    pred: &[BTreeSet<String>],
    truth: &[BTreeSet<String>],
    vocab: &[String],
) -> Result<F1Scores, MetricError> {
    check_pair(pred, truth)?;
    if vocab.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut counts = vec![(0usize, 0usize, 0usize); vocab.len()];
    let index = |l: &String| {
        vocab.iter().position(|v| v == l).ok_or_else(|| MetricError::UnknownLabel(l.clone()))
    };
    for (p, t) in pred.iter().zip(truth) {
        for l in p.union(t) {
            let i = index(l)?;
            match (p.contains(l), t.contains(l)) {
                (true, true) => counts[i].0 += 1,
                (true, false) => counts[i].1 += 1,
                (false, true) => counts[i].2 += 1,
                (false, false) => unreachable!(),
            }
        }
    }
    let macro_f1 = counts.iter().map(|&(tp, fp, fn_)| f1(tp, fp, fn_)).sum::<f64>() / vocab.len() as f64;
    let (tp, fp, fn_) = counts.iter().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(F1Scores { macro_f1, micro_f1: f1(tp, fp, fn_) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearMetrics {
    pub mae: f64,
    pub within_k: f64,
}

pub fn year_metrics(pred: &[i32], truth: &[i32], k: u32) -> Result<YearMetrics, MetricError> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    let errors: Vec<u32> = pred.iter().zip(truth).map(|(p, t)| p.abs_diff(*t)).collect();
    Ok(YearMetrics {
        mae: errors.iter().map(|&e| f64::from(e)).sum::<f64>() / n,
        within_k: errors.iter().filter(|&&e| e <= k).count() as f64 / n,
    })
}

/// Rows × columns of counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        let counts = vec![vec![0; col_labels.len()]; row_labels.len()];
        Self { row_labels, col_labels, counts }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let rows = counts.len();
        let cols = counts.first().map_or(0, |r| r.len());
        Self {
            row_labels: (0..rows).map(|i| i.to_string()).collect(),
            col_labels: (0..cols).map(|i| i.to_string()).collect(),
            counts,
        }
    }

    /// Tallies label pairs, creating sorted vocabularies from what is observed.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let rows: BTreeSet<&str> = pairs.iter().map(|p| p.0).collect();
        let cols: BTreeSet<&str> = pairs.iter().map(|p| p.1).collect();
        let rows: Vec<String> = rows.into_iter().map(String::from).collect();
        let cols: Vec<String> = cols.into_iter().map(String::from).collect();
        let mut t = Self::new(rows, cols);
        for (r, c) in pairs {
            let i = t.row_labels.iter().position(|x| x == r).expect("row present");
            let j = t.col_labels.iter().position(|x| x == c).expect("col present");
            t.counts[i][j] += 1;
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// χ² statistic after dropping empty rows and columns.
pub fn chi_square(t: &ContingencyTable) -> Result<(f64, usize, usize), MetricError> {
    let row_sums: Vec<u64> = t.counts.iter().map(|r| r.iter().sum()).collect();
    let cols = t.counts.first().map_or(0, |r| r.len());
    let col_sums: Vec<u64> = (0..cols).map(|j| t.counts.iter().map(|r| r[j]).sum()).collect();
    let live_rows: Vec<usize> = (0..row_sums.len()).filter(|&i| row_sums[i] > 0).collect();
    let live_cols: Vec<usize> = (0..cols).filter(|&j| col_sums[j] > 0).collect();
    if live_rows.len() < 2 || live_cols.len() < 2 {
        return Err(MetricError::DegenerateTable);
    }
    let n = t.total() as f64;
    let mut chi2 = 0.0;
    for &i in &live_rows {
        for &j in &live_cols {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / n;
            let d = t.counts[i][j] as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    Ok((chi2, live_rows.len(), live_cols.len()))
}

/// Cramér's V without continuity correction.
pub fn cramers_v(t: &ContingencyTable) -> Result<f64, MetricError> {
    let (chi2, r, c) = chi_square(t)?;
    let n = t.total() as f64;
    Ok((chi2 / (n * (r.min(c) - 1) as f64)).sqrt().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(top1_accuracy(&[1, 2, 3], &[1, 2, 3]), Ok(1.0));
        assert_eq!(top1_accuracy(&[1, 2], &[3, 4]), Ok(0.0));
        assert_eq!(top1_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]), Ok(0.75));
        assert_eq!(top1_accuracy(&[1], &[1, 2]), Err(MetricError::LengthMismatch(1, 2)));
        assert_eq!(top1_accuracy::<u8>(&[], &[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn lift_examples() {
        assert!((lift(0.7595, 0.4684).unwrap() - 29.11).abs() < 1e-9);
        assert!((lift(0.934, 0.802).unwrap() - 13.2).abs() < 1e-9);
        assert_eq!(lift(0.5, 0.5), Ok(0.0));
        assert_eq!(lift(1.2, 0.5), Err(MetricError::RangeError(1.2)));
    }

    #[test]
    fn delta_e_stats_examples() {
        let a = LabColor::new(50.0, 2.6772, -79.7751);
        let b = LabColor::new(50.0, 0.0, -82.7485);
        let s = delta_e_stats(&[a, b], &[a, b]).unwrap();
        assert_eq!((s.mean, s.median), (0.0, 0.0));
        assert!((delta_e_stats(&[a], &[b]).unwrap().median - 2.0425).abs() < 1e-4);
        let s = summarize(&[9.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.median), (4.0, 2.0));
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
    }

    #[test]
    fn precision_examples() {
        let scores = vec![vec![0.9, 0.1, 0.5], vec![0.2, 0.8, 0.1], vec![0.3, 0.3, 0.9]];
        let all: BTreeSet<usize> = [0, 1, 2].into();
        let full = vec![all.clone(), all.clone(), all];
        for k in 1..=3 {
            assert_eq!(precision_at_k(&scores, &full, k), Ok(1.0));
        }
        let none = vec![BTreeSet::new(); 3];
        assert_eq!(precision_at_k(&scores, &none, 2), Ok(0.0));
        let truth = vec![[0].into(), [0].into(), [2].into()];
        assert!((precision_at_k(&scores, &truth, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            precision_at_k(&scores, &truth, 4),
            Err(MetricError::KTooLarge { k: 4, available: 3 })
        );
        // Ties go to the earlier label: example 3 ranks label 0 before label 1.
        assert_eq!(rank_labels(&[0.3, 0.3, 0.9]), vec![2, 0, 1]);
    }

    #[test]
    fn f1_examples() {
        let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let truth = vec![set(&["a"]), set(&["a", "b"]), set(&["c"]), set(&["b"])];
        let same = f1_scores(&truth, &truth, &vocab).unwrap();
        assert_eq!((same.macro_f1, same.micro_f1), (1.0, 1.0));
        let empty = vec![BTreeSet::new(); 4];
        assert_eq!(f1_scores(&empty, &truth, &vocab).unwrap().micro_f1, 0.0);

        // Counting oracle, per label (tp, fp, fn):
        //   a: ex1 tp, ex2 fn, ex3 fp      -> (1, 1, 1) F1 = 2/4
        //   b: ex2 tp, ex4 fn              -> (1, 0, 1) F1 = 2/3
        //   c: ex3 tp, ex4 fp              -> (1, 1, 0) F1 = 2/3
        // pooled (3, 2, 2) -> micro = 6/10
        let pred = vec![set(&["a"]), set(&["b"]), set(&["a", "c"]), set(&["c"])];
        let s = f1_scores(&pred, &truth, &vocab).unwrap();
        assert!((s.macro_f1 - (0.5 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((s.micro_f1 - 0.6).abs() < 1e-12);
        assert_eq!(
            f1_scores(&[set(&["z"])], &[set(&[])], &vocab),
            Err(MetricError::UnknownLabel("z".into()))
        );
    }

    #[test]
    fn year_examples() {
        let truth = [1991, 2000, 2024];
        assert_eq!(year_metrics(&truth, &truth, 2), Ok(YearMetrics { mae: 0.0, within_k: 1.0 }));
        let plus2: Vec<i32> = truth.iter().map(|y| y + 2).collect();
        assert_eq!(year_metrics(&plus2, &truth, 2), Ok(YearMetrics { mae: 2.0, within_k: 1.0 }));
        let plus3: Vec<i32> = truth.iter().map(|y| y + 3).collect();
        assert_eq!(year_metrics(&plus3, &truth, 2).unwrap().within_k, 0.0);
        assert_eq!(year_metrics(&[1], &[], 2), Err(MetricError::LengthMismatch(1, 0)));
    }

    #[test]
    fn cramers_v_examples() {
        let flat = ContingencyTable::from_counts(vec![vec![50, 50], vec![50, 50]]);
        assert_eq!(cramers_v(&flat), Ok(0.0));
        let diag = ContingencyTable::from_counts(vec![vec![100, 0], vec![0, 100]]);
        assert!((cramers_v(&diag).unwrap() - 1.0).abs() < 1e-9);
        let outer = ContingencyTable::from_counts(vec![vec![2, 4, 6], vec![3, 6, 9], vec![0, 0, 0]]);
        assert!(cramers_v(&outer).unwrap().abs() < 1e-9);
        let degenerate = ContingencyTable::from_counts(vec![vec![5, 0], vec![7, 0]]);
        assert_eq!(cramers_v(&degenerate), Err(MetricError::DegenerateTable));
        let t = ContingencyTable::from_pairs([("1", "red"), ("2", "blue"), ("1", "red")]);
        assert_eq!(t.counts, vec![vec![0, 2], vec![1, 0]]);
    }
}
