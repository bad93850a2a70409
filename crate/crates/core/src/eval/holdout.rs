use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::EvalError;
use crate::Label;

/// Score from an external detector; higher means more anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sample_id: String,
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutResult {
    /// `-inf` means "everything is anomalous".
    pub threshold: f64,
    pub validation: ConfusionMatrix,
    pub holdout: ConfusionMatrix,
    pub metrics: Metrics,
    pub validation_ids: Vec<String>,
    /// No threshold separates anything: the validation scores are all equal.
    pub degenerate: bool,
}

/// Reads `sample_id,score,label` rows.
pub fn read_score_set(path: &Path) -> Result<Vec<ScoredSample>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::io(path, e))?;
    let rows: Result<Vec<ScoredSample>, _> = reader.deserialize().collect();
    let rows = rows.map_err(|e| EvalError::io(path, e))?;
    if let Some(bad) = rows.iter().find(|r| !r.score.is_finite()) {
        return Err(EvalError::InvalidInput(format!("sample {}: score is not finite", bad.sample_id)));
    }
    Ok(rows)
}

/// Stratified split into (validation, holdout) index lists.
///
/// Each class is shuffled with ChaCha8(`seed`), normals first, and the first
/// `round(fraction * class size)` indices go to validation.
pub fn stratified_split(labels: &[Label], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validation = Vec::new();
    let mut holdout = Vec::new();
    for class in [Label::Normal, Label::Anomalous] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = ((fraction * idx.len() as f64).round() as usize).min(idx.len());
        validation.extend_from_slice(&idx[..k]);
        holdout.extend_from_slice(&idx[k..]);
    }
    validation.sort_unstable();
    holdout.sort_unstable();
    (validation, holdout)
}

fn confusion_at(samples: &[&ScoredSample], threshold: f64) -> ConfusionMatrix {
    ConfusionMatrix::from_pairs(samples.iter().map(|s| (s.label, Some(Label::from(s.score > threshold)))))
}

/// Threshold maximizing validation F1 among `-inf` and every validation
/// score; ties go to the lower threshold. Runs in O(n log n).
pub fn best_threshold(samples: &[&ScoredSample]) -> (f64, ConfusionMatrix) {
    let mut sorted: Vec<&ScoredSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let positives = sorted.iter().filter(|s| s.label.is_anomalous()).count() as u64;
    let negatives = sorted.len() as u64 - positives;

    // At -inf everything is predicted anomalous.
    let mut cm = ConfusionMatrix::new(positives, negatives, 0, 0);
    let mut best = (f64::NEG_INFINITY, cm);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].score;
        while i < sorted.len() && sorted[i].score == v {
            if sorted[i].label.is_anomalous() {
                cm.tp -= 1;
                cm.fn_ += 1;
            } else {
                cm.fp -= 1;
                cm.tn += 1;
            }
            i += 1;
        }
        if cm.cmp_f1(&best.1).is_gt() {
            best = (v, cm);
        }
    }
    best
}

pub fn holdout_threshold_eval(scores: &[ScoredSample], val_fraction: f64, seed: u64) -> Result<HoldoutResult, EvalError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(EvalError::InvalidInput(format!("validation fraction {val_fraction} is outside (0, 1)")));
    }
    if scores.is_empty() {
        return Err(EvalError::InvalidInput("score set is empty".into()));
    }
    let labels: Vec<Label> = scores.iter().map(|s| s.label).collect();
    let (val_idx, hold_idx) = stratified_split(&labels, val_fraction, seed);
    let validation: Vec<&ScoredSample> = val_idx.iter().map(|&i| &scores[i]).collect();
    let holdout: Vec<&ScoredSample> = hold_idx.iter().map(|&i| &scores[i]).collect();
    for (name, split) in [("validation", &validation), ("holdout", &holdout)] {
        for class in [Label::Normal, Label::Anomalous] {
            if !split.iter().any(|s| s.label == class) {
                return Err(EvalError::DegenerateSplit(format!("{name} split has no samples labelled {class}")));
            }
        }
    }

    let (threshold, val_cm) = best_threshold(&validation);
    let hold_cm = confusion_at(&holdout, threshold);
    let degenerate = validation.iter().all(|s| s.score == validation[0].score);
    let mut metrics = hold_cm.metrics();
    metrics.degenerate |= degenerate;
    Ok(HoldoutResult {
        threshold,
        validation: val_cm,
        holdout: hold_cm,
        metrics,
        validation_ids: validation.iter().map(|s| s.sample_id.clone()).collect(),
        degenerate,
    })
}
