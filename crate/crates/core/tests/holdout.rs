mod common;

use promptad_core::eval::holdout::{best_threshold, stratified_split};
use promptad_core::eval::{holdout_threshold_eval, read_score_set, EvalError, ScoredSample};
use promptad_core::Label;
use rand::Rng;

fn random_set(seed: u64, n: usize) -> Vec<ScoredSample> {
    let mut r = common::rng(seed);
    (0..n)
        .map(|i| {
            let label = Label::from(r.random_bool(0.4));
            // Coarse scores so ties happen.
            let base = if label.is_anomalous() { 0.6 } else { 0.4 };
            let score = ((base + r.random_range(-0.4..0.4)) * 20.0f64).round() / 20.0;
            ScoredSample {
                sample_id: format!("s{i}"),
                score,
                label,
            }
        })
        .collect()
}

#[test]
fn sweep_matches_brute_force() {
    for seed in 0..300 {
        let set = random_set(seed, 10 + (seed as usize % 60));
        let refs: Vec<&ScoredSample> = set.iter().collect();
        let (t, _) = best_threshold(&refs);
        assert_eq!(t, common::brute_best_threshold(&refs), "seed {seed}");
    }
}

#[test]
fn holdout_uses_validation_threshold() {
    for seed in 0..100 {
        let set = random_set(seed, 80);
        let r = match holdout_threshold_eval(&set, 0.2, seed) {
            Ok(r) => r,
            Err(EvalError::DegenerateSplit(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let val: Vec<&ScoredSample> = set.iter().filter(|s| r.validation_ids.contains(&s.sample_id)).collect();
        assert_eq!(r.threshold, common::brute_best_threshold(&val));
        let hold: Vec<&ScoredSample> = set.iter().filter(|s| !r.validation_ids.contains(&s.sample_id)).collect();
        let tp = hold.iter().filter(|s| s.label.is_anomalous() && s.score > r.threshold).count() as u64;
        assert_eq!(r.holdout.tp, tp);
        assert_eq!(r.holdout.total() + r.validation.total(), set.len() as u64);
    }
}

#[test]
fn separated_scores_are_perfect() {
    let set: Vec<ScoredSample> = (0..100)
        .map(|i| ScoredSample {
            sample_id: i.to_string(),
            score: if i % 4 == 0 { 0.9 + i as f64 * 1e-4 } else { 0.1 },
            label: Label::from(i % 4 == 0),
        })
        .collect();
    let r = holdout_threshold_eval(&set, 0.2, 1).unwrap();
    assert_eq!(r.metrics.f1, 1.0);
    assert!(!r.degenerate);
}

#[test]
fn equal_scores_are_flagged() {
    let set: Vec<ScoredSample> = (0..50)
        .map(|i| ScoredSample {
            sample_id: i.to_string(),
            score: 0.5,
            label: Label::from(i % 2 == 0),
        })
        .collect();
    let r = holdout_threshold_eval(&set, 0.2, 3).unwrap();
    assert!(r.degenerate && r.metrics.degenerate);
    // Flagging everything beats flagging nothing.
    assert_eq!(r.threshold, f64::NEG_INFINITY);
}

#[test]
fn stratified_split_keeps_proportions() {
    let labels: Vec<Label> = (0..100).map(|i| Label::from(i < 30)).collect();
    let (val, hold) = stratified_split(&labels, 0.2, 9);
    assert_eq!(val.len(), 20);
    assert_eq!(val.iter().filter(|&&i| labels[i].is_anomalous()).count(), 6);
    assert_eq!(val.len() + hold.len(), 100);
    assert_eq!(stratified_split(&labels, 0.2, 9), (val, hold));
}

#[test]
fn degenerate_inputs() {
    let only_normal: Vec<ScoredSample> = (0..10)
        .map(|i| ScoredSample {
            sample_id: i.to_string(),
            score: i as f64,
            label: Label::Normal,
        })
        .collect();
    assert!(matches!(holdout_threshold_eval(&only_normal, 0.2, 0), Err(EvalError::DegenerateSplit(_))));
    assert!(matches!(holdout_threshold_eval(&only_normal, 1.0, 0), Err(EvalError::InvalidInput(_))));
    assert!(matches!(holdout_threshold_eval(&[], 0.2, 0), Err(EvalError::InvalidInput(_))));
}

#[test]
fn reads_score_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("scores.csv");
    std::fs::write(&p, "sample_id,score,label\na,0.9,1\nb,0.1,0\n").unwrap();
    let s = read_score_set(&p).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].label, Label::Anomalous);
    std::fs::write(&p, "sample_id,score,label\na,0.9,2\n").unwrap();
    assert!(read_score_set(&p).is_err());
}
