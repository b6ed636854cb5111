//! Confusion-matrix metrics, ROC analysis and model-vs-model deltas.
//!
//! Per-class measures use the one-vs-rest reduction: class `c` is the
//! positive class and every other class is negative. With
//! `P = TP + FN`, `N = TN + FP`:
//!
//! | measure      | definition                                   |
//! |--------------|----------------------------------------------|
//! | accuracy     | (TP + TN) / (P + N)                          |
//! | sensitivity  | TP / (TP + FN)                               |
//! | specificity  | TN / (TN + FP)                               |
//! | precision    | TP / (TP + FP)                               |
//! | npv          | TN / (TN + FN)                               |
//! | f_measure    | 2 · precision · sensitivity / (precision + sensitivity) |
//! | informedness | sensitivity + specificity − 1                |
//! | markedness   | precision + npv − 1                          |
//! | mcc          | (TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN)) |
//!
//! A ratio whose denominator is zero is defined as 0 and the class is
//! flagged `degenerate`. Macro averages are unweighted means over classes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::softmax::argmax_rows;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("label {label} at position {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cannot average an empty list of class metrics")]
    EmptyAverage,
    #[error("ROC is undefined without both positive and negative samples")]
    UndefinedRoc,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("reports are not comparable: {0}")]
    NotComparable(String),
}

/// K × K counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Option<Self> {
        (counts.len() == k * k).then_some(Self { k, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Binary counts with `class` as the positive class.
    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let tp = self.get(class, class);
        let row: u64 = (0..self.k).map(|j| self.get(class, j)).sum();
        let col: u64 = (0..self.k).map(|i| self.get(i, class)).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        BinaryCounts { tp, fp, tn: self.total() - tp - fn_ - fp, fn_ }
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![0u64; k * k];
    for (index, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        for label in [t, p] {
            if label >= k {
                return Err(MetricsError::LabelOutOfRange { index, label, classes: k });
            }
        }
        counts[t * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// The nine scalar measures reported per class and as macro averages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measures {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub npv: f64,
    pub f_measure: f64,
    pub informedness: f64,
    pub markedness: f64,
    pub mcc: f64,
}

impl Measures {
    pub const NAMES: [&'static str; 9] = [
        "accuracy",
        "sensitivity",
        "specificity",
        "precision",
        "npv",
        "f_measure",
        "informedness",
        "markedness",
        "mcc",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.accuracy,
            self.sensitivity,
            self.specificity,
            self.precision,
            self.npv,
            self.f_measure,
            self.informedness,
            self.markedness,
            self.mcc,
        ]
    }

    pub fn from_values(v: [f64; 9]) -> Self {
        Self {
            accuracy: v[0],
            sensitivity: v[1],
            specificity: v[2],
            precision: v[3],
            npv: v[4],
            f_measure: v[5],
            informedness: v[6],
            markedness: v[7],
            mcc: v[8],
        }
    }

    /// Component-wise `self - other`.
    pub fn minus(&self, other: &Measures) -> Measures {
        let (a, b) = (self.values(), other.values());
        Self::from_values(core::array::from_fn(|i| a[i] - b[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub measures: Measures,
    /// Set when any ratio hit a zero denominator and was defined as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Measures for explicit binary counts.
pub fn binary_metrics(c: BinaryCounts) -> ClassMetrics {
    let BinaryCounts { tp, fp, tn, fn_ } = c;
    let mut degenerate = false;
    let sensitivity = ratio(tp, tp + fn_, &mut degenerate);
    let specificity = ratio(tn, tn + fp, &mut degenerate);
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let npv = ratio(tn, tn + fn_, &mut degenerate);
    let accuracy = ratio(tp + tn, tp + tn + fp + fn_, &mut degenerate);
    let f_measure = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        degenerate = true;
        0.0
    };
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if factors.contains(&0) {
        degenerate = true;
        0.0
    } else {
        let num = i128::from(tp) * i128::from(tn) - i128::from(fp) * i128::from(fn_);
        let den = libm::sqrt(factors[0] as f64 * factors[1] as f64) * libm::sqrt(factors[2] as f64 * factors[3] as f64);
        (num as f64 / den).clamp(-1.0, 1.0)
    };
    ClassMetrics {
        tp,
        fp,
        tn,
        fn_,
        measures: Measures {
            accuracy,
            sensitivity,
            specificity,
            precision,
            npv,
            f_measure,
            informedness: sensitivity + specificity - 1.0,
            markedness: precision + npv - 1.0,
            mcc,
        },
        degenerate,
    }
}

/// One-vs-rest measures for `class`. Panics if `class` is out of range.
pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    assert!(class < cm.k, "class {class} out of range");
    binary_metrics(cm.one_vs_rest(class))
}

/// Unweighted mean of every measure over the given classes.
pub fn macro_average(per_class: &[ClassMetrics]) -> Result<Measures, MetricsError> {
    if per_class.is_empty() {
        return Err(MetricsError::EmptyAverage);
    }
    let mut sum = [0.0; 9];
    for m in per_class {
        for (s, v) in sum.iter_mut().zip(m.measures.values()) {
            *s += v;
        }
    }
    let n = per_class.len() as f64;
    Ok(Measures::from_values(sum.map(|s| s / n)))
}

/// ROC curve from (0,0) to (1,1) over the distinct score thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs, both non-decreasing.
    pub points: Vec<(f64, f64)>,
    /// `thresholds[i]` produced `points[i]` (predict positive iff score ≥
    /// threshold); the first is `+inf` for the (0,0) anchor.
    pub thresholds: Vec<f64>,
    pub auroc: f64,
}

/// One-vs-rest ROC curve and its trapezoidal area. Tied scores form a single
/// diagonal step, so the area equals `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn roc_auroc(scores: &[f64], positives: &[bool]) -> Result<RocCurve, MetricsError> {
    if scores.len() != positives.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), positives.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let n_pos = positives.iter().filter(|&&p| p).count() as u64;
    let n_neg = positives.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::UndefinedRoc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area, in units of one (pos, neg) pair.
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp_prev) * u128::from(tp + tp_prev);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(threshold);
    }
    let auroc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, thresholds, auroc })
}

/// Evaluation of one model on one test split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub split_fingerprint: u64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Measures,
    /// trace / N over the full confusion matrix.
    pub overall_accuracy: f64,
    /// `None` for classes absent from (or covering all of) the test split.
    pub rocs: Vec<Option<RocCurve>>,
}

impl EvaluationReport {
    pub fn aurocs(&self) -> Vec<Option<f64>> {
        self.rocs.iter().map(|r| r.as_ref().map(|r| r.auroc)).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Evaluates class probabilities (N × K) against true labels. The predicted
/// class is the row argmax; the ROC score for class `c` is column `c`.
pub fn evaluate(
    probs: &Matrix<f64>,
    y_true: &[usize],
    class_names: &[String],
    split_fingerprint: u64,
) -> Result<EvaluationReport, MetricsError> {
    let k = class_names.len();
    if probs.rows() != y_true.len() {
        return Err(MetricsError::LengthMismatch(probs.rows(), y_true.len()));
    }
    if probs.cols() != k {
        return Err(MetricsError::LengthMismatch(probs.cols(), k));
    }
    let y_pred = argmax_rows(probs);
    let cm = confusion(y_true, &y_pred, k)?;
    let per_class: Vec<ClassMetrics> = (0..k).map(|c| class_metrics(&cm, c)).collect();
    let macro_avg = macro_average(&per_class)?;
    let overall_accuracy = if cm.total() == 0 { 0.0 } else { cm.trace() as f64 / cm.total() as f64 };
    let mut rocs = Vec::with_capacity(k);
    let mut scores = vec![0.0; probs.rows()];
    let mut positives = vec![false; probs.rows()];
    for c in 0..k {
        for (i, row) in probs.iter_rows().enumerate() {
            scores[i] = row[c];
            positives[i] = y_true[i] == c;
        }
        rocs.push(match roc_auroc(&scores, &positives) {
            Ok(r) => Some(r),
            Err(MetricsError::UndefinedRoc) => None,
            Err(e) => return Err(e),
        });
    }
    Ok(EvaluationReport {
        class_names: class_names.to_vec(),
        split_fingerprint,
        confusion: cm,
        per_class,
        macro_avg,
        overall_accuracy,
        rocs,
    })
}

/// Five-number summary (quartiles by linear interpolation between order
/// statistics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self { count: v.len(), min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
    }
}

/// Differences `fused − image_only` for macro measures and per-class AUROC.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub class_names: Vec<String>,
    pub split_fingerprint: u64,
    pub macro_delta: Measures,
    /// `None` where either model's ROC is undefined for the class.
    pub auroc_deltas: Vec<Option<f64>>,
    pub auroc_summary: Option<BoxSummary>,
}

pub fn delta_report(fused: &EvaluationReport, image_only: &EvaluationReport) -> Result<DeltaReport, MetricsError> {
    delta_from_parts(
        (&fused.class_names, fused.split_fingerprint, &fused.macro_avg, &fused.aurocs()),
        (&image_only.class_names, image_only.split_fingerprint, &image_only.macro_avg, &image_only.aurocs()),
    )
}

/// Summary of one evaluation as used for deltas: class names, split
/// fingerprint, macro measures and per-class AUROC.
pub type DeltaInputs<'a> = (&'a [String], u64, &'a Measures, &'a [Option<f64>]);

/// [`delta_report`] from already-summarized evaluations.
pub fn delta_from_parts(fused: DeltaInputs<'_>, image_only: DeltaInputs<'_>) -> Result<DeltaReport, MetricsError> {
    let (names_a, fp_a, macro_a, auroc_a) = fused;
    let (names_b, fp_b, macro_b, auroc_b) = image_only;
    if names_a != names_b || auroc_a.len() != auroc_b.len() {
        return Err(MetricsError::NotComparable("class sets differ".into()));
    }
    if fp_a != fp_b {
        return Err(MetricsError::NotComparable(alloc::format!(
            "split fingerprints differ ({fp_a:016x} vs {fp_b:016x})"
        )));
    }
    let auroc_deltas: Vec<Option<f64>> = auroc_a.iter().zip(auroc_b).map(|(a, b)| Some((*a)? - (*b)?)).collect();
    let defined: Vec<f64> = auroc_deltas.iter().flatten().copied().collect();
    Ok(DeltaReport {
        class_names: names_a.to_vec(),
        split_fingerprint: fp_a,
        macro_delta: macro_a.minus(macro_b),
        auroc_deltas,
        auroc_summary: BoxSummary::from_values(&defined),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> BinaryCounts {
        BinaryCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn perfect_prediction_confusion() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.trace(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cm.get(i, j), u64::from(i == j));
            }
        }
    }

    #[test]
    fn total_misclassification() {
        let cm = confusion(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.get(0, 1), 2);
        assert_eq!(cm.total(), 2);
        assert_eq!(cm.trace(), 0);
    }

    #[test]
    fn confusion_rejects_bad_labels() {
        assert_eq!(
            confusion(&[0, 3], &[0, 0], 3),
            Err(MetricsError::LabelOutOfRange { index: 1, label: 3, classes: 3 })
        );
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(MetricsError::LengthMismatch(1, 2))));
    }

    #[test]
    fn chance_level() {
        let m = binary_metrics(counts(25, 25, 25, 25)).measures;
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.informedness, 0.0);
        assert_eq!(m.markedness, 0.0);
    }

    #[test]
    fn perfect_binary() {
        let m = binary_metrics(counts(7, 0, 5, 0));
        assert!(!m.degenerate);
        assert!(m.measures.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn worked_example() {
        let m = binary_metrics(counts(90, 20, 80, 10)).measures;
        assert!((m.sensitivity - 0.9).abs() < 1e-12);
        assert!((m.specificity - 0.8).abs() < 1e-12);
        assert!((m.precision - 0.8182).abs() < 1e-4);
        assert!((m.informedness - 0.7).abs() < 1e-12);
        // 5000 / sqrt(110 * 100 * 100 * 90)
        assert!((m.mcc - 0.7035).abs() < 1e-4);
        assert!((m.accuracy - 0.85).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = binary_metrics(counts(0, 0, 10, 0));
        assert!(m.degenerate);
        assert_eq!(m.measures.sensitivity, 0.0);
        assert_eq!(m.measures.precision, 0.0);
        assert_eq!(m.measures.mcc, 0.0);
        assert_eq!(m.measures.specificity, 1.0);
    }

    #[test]
    fn macro_means() {
        let a = binary_metrics(counts(6, 1, 10, 4));
        let b = binary_metrics(counts(8, 3, 7, 2));
        let avg = macro_average(&[a, b]).unwrap();
        assert!((avg.sensitivity - 0.7).abs() < 1e-12);
        assert!((avg.informedness - (avg.sensitivity + avg.specificity - 1.0)).abs() < 1e-12);
        assert_eq!(macro_average(&[a, a]).unwrap(), a.measures);
        assert_eq!(macro_average(&[]), Err(MetricsError::EmptyAverage));
    }

    #[test]
    fn auroc_examples() {
        let r = roc_auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(r.auroc, 0.75);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        let r = roc_auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(r.auroc, 1.0);
        let r = roc_auroc(&[0.3; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(r.auroc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn auroc_errors() {
        assert_eq!(roc_auroc(&[0.1, 0.2], &[true, true]), Err(MetricsError::UndefinedRoc));
        assert_eq!(roc_auroc(&[0.1, f64::NAN], &[true, false]), Err(MetricsError::NonFiniteScore(1)));
        assert!(matches!(roc_auroc(&[0.1], &[true, false]), Err(MetricsError::LengthMismatch(..))));
    }

    #[test]
    fn box_summary_quartiles() {
        let s = BoxSummary::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let s = BoxSummary::from_values(&[1.0, 2.0]).unwrap();
        assert_eq!(s.median, 1.5);
        assert!(BoxSummary::from_values(&[]).is_none());
    }

    fn report(probs: Vec<f64>, y: &[usize], fp: u64) -> EvaluationReport {
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let m = Matrix::from_vec(y.len(), 2, probs).unwrap();
        evaluate(&m, y, &names, fp).unwrap()
    }

    #[test]
    fn delta_of_identical_reports_is_zero() {
        let r = report(vec![0.9, 0.1, 0.3, 0.7, 0.6, 0.4], &[0, 1, 1], 7);
        let d = delta_report(&r, &r).unwrap();
        assert!(d.macro_delta.values().iter().all(|&v| v == 0.0));
        assert!(d.auroc_deltas.iter().all(|&v| v == Some(0.0)));
        assert_eq!(d.auroc_summary.unwrap().count, 2);
    }

    #[test]
    fn delta_rejects_mismatched_splits() {
        let a = report(vec![0.9, 0.1, 0.3, 0.7], &[0, 1], 1);
        let b = report(vec![0.9, 0.1, 0.3, 0.7], &[0, 1], 2);
        assert!(matches!(delta_report(&a, &b), Err(MetricsError::NotComparable(_))));
    }

    #[test]
    fn macro_delta_in_points() {
        let mut a = report(vec![0.9, 0.1, 0.3, 0.7], &[0, 1], 1);
        let mut b = a.clone();
        a.macro_avg.f_measure = 0.8;
        b.macro_avg.f_measure = 0.7;
        let d = delta_report(&a, &b).unwrap();
        assert!((d.macro_delta.f_measure - 0.10).abs() < 1e-12);
    }

    #[test]
    fn evaluate_marks_absent_class_roc_undefined() {
        let r = report(vec![0.9, 0.1, 0.6, 0.4], &[0, 0], 0);
        assert_eq!(r.rocs, vec![None, None]);
        assert_eq!(r.overall_accuracy, 1.0);
    }
}
