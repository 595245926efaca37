//! Evaluation metrics: Pearson, Spearman (average ranks), RMSE, AUROC
//! (trapezoidal) and AUPRC (average precision).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{GetError, Result};

/// A metric value; degenerate inputs yield a defined value plus a warning.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub value: f64,
    pub warning: Option<String>,
}

impl Metric {
    fn ok(value: f64) -> Self {
        Self {
            value,
            warning: None,
        }
    }

    fn degenerate(value: f64, why: &str) -> Self {
        log::warn!("{why}");
        Self {
            value,
            warning: Some(why.to_string()),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GetError::Contract(format!("metric inputs differ in length ({a} vs {b})")));
    }
    if a < 2 {
        return Err(GetError::Contract("metrics need at least two samples".into()));
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Metric> {
    check_lengths(x.len(), y.len())?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Metric::degenerate(0.0, "zero variance in correlation input"));
    }
    // sqrt(a·a) rounds back to |a|, so identical inputs give exactly ±1.
    let denom = match (sxx * syy).sqrt() {
        d if d.is_finite() && d > 0.0 => d,
        _ => sxx.sqrt() * syy.sqrt(),
    };
    Ok(Metric::ok((sxy / denom).clamp(-1.0, 1.0)))
}

/// 1-based ranks; tied values share the mean of their ranks.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Metric> {
    check_lengths(x.len(), y.len())?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), target.len())?;
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Groups of tied scores in descending score order, as (positives, negatives).
fn descending_groups(scores: &[f64], labels: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut pos, mut neg) = (0, 0);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                pos += 1;
            } else {
                neg += 1;
            }
            k += 1;
        }
        groups.push((pos, neg));
    }
    groups
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| **l).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve by the trapezoidal rule over tie groups.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Metric> {
    check_lengths(scores.len(), labels.len())?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Ok(Metric::degenerate(0.5, "single class in AUROC input"));
    }
    let (mut tp, mut fp, mut area) = (0usize, 0usize, 0.0);
    for (pos, neg) in descending_groups(scores, labels) {
        // Trapezoid between (fp, tp) and (fp + neg, tp + pos), unnormalized.
        area += neg as f64 * (2 * tp + pos) as f64 / 2.0;
        tp += pos;
        fp += neg;
    }
    debug_assert_eq!((tp, fp), (n_pos, n_neg));
    Ok(Metric::ok(area / (n_pos as f64 * n_neg as f64)))
}

/// Average precision: precision at each threshold weighted by the recall
/// gained there.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<Metric> {
    check_lengths(scores.len(), labels.len())?;
    let (n_pos, _) = class_counts(labels);
    if n_pos == 0 {
        return Ok(Metric::degenerate(0.0, "no positives in AUPRC input"));
    }
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for (pos, neg) in descending_groups(scores, labels) {
        tp += pos;
        seen += pos + neg;
        ap += (pos as f64 / n_pos as f64) * (tp as f64 / seen as f64);
    }
    Ok(Metric::ok(ap))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricMap {
    pub values: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl MetricMap {
    fn push(&mut self, name: &str, m: Metric) {
        self.values.insert(name.to_string(), m.value);
        if let Some(w) = m.warning {
            self.warnings.push(format!("{name}: {w}"));
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

pub fn regression_metrics(pred: &[f64], target: &[f64]) -> Result<MetricMap> {
    let mut m = MetricMap::default();
    m.push("pearson", pearson(pred, target)?);
    m.push("spearman", spearman(pred, target)?);
    m.values.insert("rmse".into(), rmse(pred, target)?);
    Ok(m)
}

pub fn classification_metrics(scores: &[f64], labels: &[bool]) -> Result<MetricMap> {
    let mut m = MetricMap::default();
    m.push("auroc", auroc(scores, labels)?);
    m.push("auprc", auprc(scores, labels)?);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let t = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(pearson(&t, &t).unwrap().value, 1.0);
        assert_eq!(spearman(&t, &t).unwrap().value, 1.0);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        let rev = [9.0, 5.0, 3.0, 0.0];
        assert_eq!(spearman(&rev, &t).unwrap().value, -1.0);
        let labels = [false, false, true, true];
        assert_eq!(auroc(&t, &labels).unwrap().value, 1.0);
        assert_eq!(auprc(&t, &labels).unwrap().value, 1.0);
    }

    #[test]
    fn degenerate_inputs_warn() {
        let c = pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.warning.is_some());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(rmse(&[1.0, 2.0], &[1.0]).is_err());
        assert!(auroc(&[0.1, 0.2], &[true, true]).unwrap().warning.is_some());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn tied_scores_count_half() {
        let m = auroc(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!(m.value, 0.5);
        // Positives at ranks 1 and 3 of 4: precision 1 then 2/3.
        let ap = auprc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((ap.value - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }
}
