//! ROC/AUC, precision-recall curves, threshold metrics and squared risk.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Reporting threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A point on a ROC or PR curve together with the score threshold that
/// produced it. ROC anchors carry thresholds of `+inf` and `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `None` when the labels hold a single class.
    pub auc: Option<f64>,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
    pub roc_points: Vec<CurvePoint>,
    pub pr_points: Vec<CurvePoint>,
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::argument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Cumulative `(threshold, tp, fp)` after admitting each distinct score,
/// from the highest score down.
fn sweep(scores: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(k + 1)
            .is_none_or(|&j| scores[j].total_cmp(&scores[i]) != Ordering::Equal);
        if last_of_group {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

fn require_both_classes(labels: &[u8], what: &str) -> Result<(usize, usize)> {
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{what} needs both classes; got {pos} positives and {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve by the trapezoid rule over distinct thresholds.
/// Tied positive/negative pairs contribute one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = require_both_classes(labels, "AUC")?;
    let mut area = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for (_, tp, fp) in sweep(scores, labels) {
        area += (fp - prev_fp) as f64 * (tp + prev_tp) as f64;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area / (2.0 * pos as f64 * neg as f64))
}

/// ROC points `(fpr, tpr)`, one per distinct score in descending order,
/// bracketed by the `(0, 0)` and `(1, 1)` anchors.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<CurvePoint>> {
    check_lengths(scores, labels)?;
    let (pos, neg) = require_both_classes(labels, "ROC curve")?;
    let mut pts = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    pts.extend(sweep(scores, labels).into_iter().map(|(t, tp, fp)| CurvePoint {
        threshold: t,
        x: fp as f64 / neg as f64,
        y: tp as f64 / pos as f64,
    }));
    pts.push(CurvePoint {
        threshold: f64::NEG_INFINITY,
        x: 1.0,
        y: 1.0,
    });
    Ok(pts)
}

/// Precision-recall points `(recall, precision)` per distinct threshold,
/// ordered by recall.
pub fn pr_points(scores: &[f64], labels: &[u8]) -> Result<Vec<CurvePoint>> {
    check_lengths(scores, labels)?;
    let (pos, _) = require_both_classes(labels, "precision-recall curve")?;
    Ok(sweep(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| CurvePoint {
            threshold: t,
            x: tp as f64 / pos as f64,
            y: tp as f64 / (tp + fp) as f64,
        })
        .collect())
}

/// Trapezoid-rule area under a polyline.
pub fn trapezoid(points: &[CurvePoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0)
        .sum()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts with `score >= threshold` predicting the positive class.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Threshold metrics plus AUC and curves. Ratios with an empty denominator
/// are reported as 0; AUC and curves are omitted for single-class labels.
pub fn classification_summary(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = confusion(scores, labels, threshold)?;
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let tnr = ratio(c.tn, c.tn + c.fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let both = c.tp + c.fn_ > 0 && c.tn + c.fp > 0;
    Ok(MetricsReport {
        auc: if both { Some(auc(scores, labels)?) } else { None },
        balanced_accuracy: (recall + tnr) / 2.0,
        precision,
        recall,
        f1,
        threshold,
        confusion: c,
        roc_points: if both {
            roc_points(scores, labels)?
        } else {
            Vec::new()
        },
        pr_points: if both {
            pr_points(scores, labels)?
        } else {
            Vec::new()
        },
    })
}

/// Mean squared difference between predictions and targets.
pub fn mse_risk(predictions: &[f64], y: &[f64]) -> Result<f64> {
    if predictions.len() != y.len() {
        return Err(Error::argument(format!(
            "{} predictions for {} targets",
            predictions.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::argument("risk of an empty sample"));
    }
    let sse: f64 = predictions.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / y.len() as f64)
}
