use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::Label;

/// Counts with anomalous (1) as the positive class. Unparseable answers are
/// kept beside the matrix, never inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    #[serde(default)]
    pub unparseable: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self {
            tp,
            fp,
            fn_,
            tn,
            unparseable: 0,
        }
    }

    /// `predicted = None` counts as unparseable.
    pub fn record(&mut self, truth: Label, predicted: Option<Label>) {
        match (truth, predicted) {
            (_, None) => self.unparseable += 1,
            (Label::Anomalous, Some(Label::Anomalous)) => self.tp += 1,
            (Label::Normal, Some(Label::Anomalous)) => self.fp += 1,
            (Label::Anomalous, Some(Label::Normal)) => self.fn_ += 1,
            (Label::Normal, Some(Label::Normal)) => self.tn += 1,
        }
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Label, Option<Label>)>,
    {
        let mut cm = Self::default();
        for (truth, pred) in pairs {
            cm.record(truth, pred);
        }
        cm
    }

    /// Samples that were scored, including unparseable ones.
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn + self.unparseable
    }

    pub fn metrics(&self) -> Metrics {
        compute_metrics(self)
    }

    /// F1 as the exact fraction `2tp / (2tp + fp + fn)`.
    pub fn f1_fraction(&self) -> (u64, u64) {
        (2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// Compares F1 exactly; a zero denominator counts as F1 = 0.
    pub fn cmp_f1(&self, other: &ConfusionMatrix) -> Ordering {
        let (a, b) = self.f1_fraction();
        let (c, d) = other.f1_fraction();
        let (a, b) = if b == 0 { (0, 1) } else { (a, b) };
        let (c, d) = if d == 0 { (0, 1) } else { (c, d) };
        (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

impl Metrics {
    /// Percentages to one decimal, e.g. `97.1/73.9/84.0`.
    pub fn percent_triplet(&self) -> String {
        format!("{:.1}/{:.1}/{:.1}", self.precision * 100.0, self.recall * 100.0, self.f1 * 100.0)
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}
