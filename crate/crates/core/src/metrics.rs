//! AUC, F1-macro and GMean for binary fraud labels (1 = fraud).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank-based (Mann-Whitney) ROC AUC. Tied scores share their average rank,
/// which credits each tied positive/negative pair with one half.
pub fn auc(scores: &[f64], y: &[u8]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::dims("auc", scores.len(), y.len()));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc scores".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum keeps every average rank integral.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i + j + 2) / 2
        let doubled_rank = (i + j + 2) as u64;
        let tied_positives = order[i..=j].iter().filter(|&&k| y[k] == 1).count() as u64;
        doubled_rank_sum += doubled_rank * tied_positives;
        i = j + 1;
    }
    let p = positives as u64;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * negatives as u64) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predicts fraud iff `score >= threshold`.
pub fn confusion_at_threshold(scores: &[f64], y: &[u8], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(y) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Mean of the fraud-class and benign-class F1 scores.
pub fn f1_macro(c: &Confusion) -> f64 {
    let fraud = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    let benign = ratio(2 * c.tn, 2 * c.tn + c.fn_ + c.fp);
    0.5 * (fraud + benign)
}

/// `sqrt(TPR · TNR)`.
pub fn gmean(c: &Confusion) -> f64 {
    let tpr = ratio(c.tp, c.tp + c.fn_);
    let tnr = ratio(c.tn, c.tn + c.fp);
    (tpr * tnr).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auc: f64,
    pub f1_macro: f64,
    pub gmean: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

pub fn evaluate(scores: &[f64], y: &[u8], threshold: f64) -> Result<EvalResult> {
    let auc = auc(scores, y)?;
    let confusion = confusion_at_threshold(scores, y, threshold);
    Ok(EvalResult {
        auc,
        f1_macro: f1_macro(&confusion),
        gmean: gmean(&confusion),
        threshold,
        confusion,
    })
}
