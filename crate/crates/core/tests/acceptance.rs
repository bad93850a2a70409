//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{matching_matrices, report, TABLE_ROWS};
use promptad_core::client::{Client, ModelConfig, Outcome, ScriptedBackend};
use promptad_core::eval::holdout::best_threshold;
use promptad_core::eval::rampup::point_draw;
use promptad_core::eval::{
    compute_metrics, default_train_sizes, holdout_threshold_eval, ramp_up, run_ablation, AblationOptions,
    ConfusionMatrix, EvalSample, RampUpConfig, ScoredSample,
};
use promptad_core::experiment::rampup_pool;
use promptad_core::features::{auc, slope, slope_with, SlopeMode};
use promptad_core::forest::{avg_path_length, grid_search, grid_search_fitted, Forest, ForestParams, CONTAMINATION_GRID};
use promptad_core::prompt::{compose, load_preset, AblationConfig, Payload, ReferenceSample, Scenario, ShotMode};
use promptad_core::{dataset, Execution, Label};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn within(start: Instant, budget_secs: f64) -> (bool, String) {
    let took = start.elapsed();
    (
        took <= Duration::from_secs_f64(budget_secs),
        format!("{:.2}s of {budget_secs}s", took.as_secs_f64()),
    )
}

static REPORTED: AtomicBool = AtomicBool::new(false);

fn verdict(name: &str, ok: bool, start: Instant, budget: f64, detail: String) {
    REPORTED.store(true, Ordering::SeqCst);
    let (fast, timing) = within(start, budget);
    let pass = ok && fast;
    report(name, pass, &format!("{detail}; {timing}"));
    assert!(pass, "{name}: {detail}; {timing}");
}

fn metric_engine_reproduces_table_rows() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for row in &TABLE_ROWS {
        let found = matching_matrices(row, 0.05);
        let Some(&(tp, fp)) = found.first() else {
            failures.push(format!("{}: no integer matrix within 0.05 pp", row.name));
            continue;
        };
        let m = compute_metrics(&ConfusionMatrix::new(tp, fp, row.positives - tp, row.negatives - fp));
        let got = [m.precision * 100.0, m.recall * 100.0, m.f1 * 100.0];
        if got.iter().zip(row.printed).any(|(g, p)| (g - p).abs() > 0.05) {
            failures.push(format!("{}: engine gives {got:?}", row.name));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} rows reproduced", TABLE_ROWS.len())
    } else {
        format!("{}/{} rows reproduced; {}", TABLE_ROWS.len() - failures.len(), TABLE_ROWS.len(), failures.join("; "))
    };
    verdict("metric-engine fixture reproduction", failures.is_empty(), start, 1.0, detail);
}

fn prompt_composition_is_byte_exact() {
    #[derive(serde::Deserialize)]
    struct Inputs {
        references: Vec<ReferenceSample>,
        query: Payload,
    }
    let start = Instant::now();
    let dir = common::fixtures().join("compose");
    let inputs: BTreeMap<String, Inputs> =
        serde_json::from_str(&fs::read_to_string(dir.join("inputs.json")).unwrap()).unwrap();
    let (mut total, mut mismatched) = (0, Vec::new());
    for scenario in Scenario::ALL {
        let input = &inputs[scenario.key()];
        let template = load_preset(scenario).with_references(input.references.clone());
        for config in scenario.default_configs() {
            let name = format!("{}__{}.txt", scenario.key(), config.to_string().replace('+', "_"));
            let expected = fs::read_to_string(dir.join(&name)).unwrap_or_default();
            let got = compose(&template, &config, &input.query).unwrap().transcript();
            total += 1;
            if got != expected {
                mismatched.push(name);
            }
        }
    }
    let ok = mismatched.is_empty() && total == 18;
    verdict(
        "prompt composition byte-exactness",
        ok,
        start,
        1.0,
        format!("{}/{total} fixtures identical {mismatched:?}", total - mismatched.len()),
    );
}

fn replay_is_deterministic() {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = common::replay_crimp_run(a.path());
    let rb = common::replay_crimp_run(b.path());
    let identical = common::tree_bytes(&ra.dir) == common::tree_bytes(&rb.dir);
    let samples: u64 = ra.rows.iter().map(|r| r.confusion.total()).sum();
    let triplets: Vec<String> = ra.rows.iter().map(|r| r.metrics.percent_triplet()).collect();
    verdict(
        "replay determinism",
        identical && samples == 450 && ra.rows.len() == 3,
        start,
        10.0,
        format!("{samples} records over {} configs, identical={identical}, rows {triplets:?}", ra.rows.len()),
    );
}

fn oracle_detector_scores_perfectly() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut imperfect = Vec::new();
    let mut rows = 0;
    for ds in common::scenario_datasets(tmp.path()) {
        let samples = ds.eval_samples();
        let template = ds.attach_references(&load_preset(ds.scenario()));
        let run = run_ablation(
            &samples,
            &template,
            &ds.scenario().default_configs(),
            &common::truth_oracle(&samples),
            &AblationOptions::default(),
        )
        .unwrap();
        for row in run.rows {
            rows += 1;
            let m = row.metrics;
            if (m.precision, m.recall, m.f1) != (1.0, 1.0, 1.0) {
                imperfect.push(format!("{} {}", ds.scenario(), row.key));
            }
        }
    }
    verdict(
        "oracle-detector pipeline guard",
        imperfect.is_empty() && rows == 18,
        start,
        5.0,
        format!("{rows} scenario configs, imperfect {imperfect:?}"),
    );
}

fn features_match_oracles() {
    let start = Instant::now();
    let mut r = common::rng(1000);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = common::random_curve(&mut r);
        for (got, want) in [
            (slope(&v, 150, 190).unwrap(), common::ols_oracle(&v, 150, 190)),
            (auc(&v, 250, 300).unwrap(), common::trapezoid_oracle(&v, 250, 300)),
        ] {
            worst = worst.max((got - want).abs() / got.abs().max(want.abs()).max(1e-300));
        }
    }
    let flat = slope(&[2.5; 500], 150, 190).unwrap() == 0.0;
    let line: Vec<f64> = (0..500).map(|i| 0.25 * i as f64 - 7.0).collect();
    let linear = slope(&line, 150, 190).unwrap() == 0.25 && slope_with(&line, 150, 190, SlopeMode::Endpoints).unwrap() == 0.25;
    verdict(
        "feature extraction",
        worst <= 1e-9 && flat && linear,
        start,
        5.0,
        format!("worst relative error {worst:.2e} over 1000 curves, flat={flat}, linear={linear}"),
    );
}

fn isolation_forest_properties() {
    let start = Instant::now();
    let c256 = avg_path_length(256);
    let a = avg_path_length(1) == 0.0 && avg_path_length(2) == 1.0 && (c256 - 10.2448).abs() <= 1e-3;

    let mut r = common::rng(2024);
    let train: Vec<Vec<f64>> = (0..300).map(|_| vec![r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]).collect();
    let f = Forest::fit(&train, &ForestParams::default()).unwrap();
    let queries: Vec<Vec<f64>> = (0..10_000)
        .map(|_| vec![r.random_range(-1e4..1e4) * r.random::<f64>().powi(4), r.random_range(-1e4..1e4)])
        .collect();
    let scores = f.score_many(&queries, Execution::Parallel).unwrap();
    let b = scores.iter().all(|s| *s > 0.0 && *s < 1.0);

    let n = Normal::new(0.0, 1.0).unwrap();
    let mut r = common::rng(7);
    let inliers: Vec<Vec<f64>> = (0..200).map(|_| vec![n.sample(&mut r), n.sample(&mut r)]).collect();
    let outliers: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let t = i as f64 * std::f64::consts::TAU / 10.0;
            vec![50.0 * t.cos(), 50.0 * t.sin()]
        })
        .collect();
    let data: Vec<Vec<f64>> = inliers.iter().chain(&outliers).cloned().collect();
    let labeled: Vec<(Vec<f64>, Label)> = inliers
        .iter()
        .map(|x| (x.clone(), Label::Normal))
        .chain(outliers.iter().map(|x| (x.clone(), Label::Anomalous)))
        .collect();
    let params = ForestParams {
        seed: 7,
        ..ForestParams::default()
    };
    // The criterion names no grid. With 10 of 210 points anomalous, C >= 0.10
    // flags at least 21 points, capping F1 at 20/31, so the grid also covers
    // contaminations below the true rate.
    let grid_values: Vec<f64> = [0.01, 0.02, 0.05].into_iter().chain(CONTAMINATION_GRID).collect();
    let (forest, grid) = grid_search(&data, &labeled, &grid_values, &params, Execution::Parallel).unwrap();
    let coarse = grid_search_fitted(&forest, &labeled, &CONTAMINATION_GRID, Execution::Parallel).unwrap();
    let max_in = inliers.iter().map(|x| forest.score(x).unwrap()).fold(f64::MIN, f64::max);
    let min_out = outliers.iter().map(|x| forest.score(x).unwrap()).fold(f64::MAX, f64::min);
    let c = grid.metrics.f1 >= 0.95 && min_out > max_in;

    let serial = Forest::fit_with(&data, &params, Execution::Serial).unwrap();
    let parallel = Forest::fit_with(&data, &params, Execution::Parallel).unwrap();
    let bits = |f: &Forest| f.train_scores.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
    let d = serial == parallel && bits(&serial) == bits(&parallel);

    verdict(
        "isolation forest",
        a && b && c && d,
        start,
        30.0,
        format!(
            "c(256)={c256:.4} (a={a}), 10000 scores in (0,1)={b}, grid F1={:.3} at C={} (0.10-0.50 grid alone: {:.3}), min outlier {min_out:.3} > max inlier {max_in:.3} (c={c}), serial==parallel={d}",
            grid.metrics.f1, grid.best_contamination, coarse.metrics.f1
        ),
    );
}

fn ramp_up_matches_per_size_oracle() {
    let start = Instant::now();
    let pool = rampup_pool(&common::crimp_pool_csv()).unwrap();
    let eval = dataset::load_crimp_csv(&common::crimp_eval_csv()).unwrap().labeled_features();
    let config = RampUpConfig {
        seed: 42,
        ..RampUpConfig::default()
    };
    let points = ramp_up(&pool, &eval, &config, Execution::Parallel).unwrap();

    let sizes: Vec<usize> = points.iter().map(|p| p.train_size).collect();
    let monotone = sizes == default_train_sizes() && sizes.windows(2).all(|w| w[0] < w[1]);
    let mut mismatches = Vec::new();
    for p in &points {
        let (idx, seed) = point_draw(pool.len(), p.train_size, 42);
        let train: Vec<Vec<f64>> = idx.iter().map(|&i| pool[i].clone()).collect();
        let mut best: Option<(f64, ConfusionMatrix)> = None;
        for c in CONTAMINATION_GRID {
            let f = Forest::fit_with(
                &train,
                &ForestParams {
                    seed,
                    contamination: c,
                    ..ForestParams::default()
                },
                Execution::Serial,
            )
            .unwrap();
            let cm = ConfusionMatrix::from_pairs(eval.iter().map(|(x, y)| (*y, Some(f.predict(x).unwrap()))));
            if best.as_ref().is_none_or(|(_, b)| cm.cmp_f1(b).is_gt()) {
                best = Some((c, cm));
            }
        }
        let (c, cm) = best.unwrap();
        if p.chosen_contamination != Some(c) || p.confusion != cm {
            mismatches.push(p.train_size);
        }
    }
    let in_grid = points
        .iter()
        .all(|p| p.chosen_contamination.is_some_and(|c| CONTAMINATION_GRID.contains(&c)));
    let last = points.last().map(|p| p.metrics.percent_triplet()).unwrap_or_default();
    verdict(
        "ramp-up protocol",
        monotone && mismatches.is_empty() && in_grid,
        start,
        60.0,
        format!(
            "{} sizes, monotone={monotone}, oracle mismatches {mismatches:?}, C in grid={in_grid}, size 200 P/R/F1 {last}",
            points.len()
        ),
    );
}

fn holdout_matches_brute_force() {
    let start = Instant::now();
    let mut r = common::rng(500);
    let mut mismatched = 0;
    let mut checked = 0;
    for set_idx in 0..500u64 {
        let n = r.random_range(10..120);
        let set: Vec<ScoredSample> = (0..n)
            .map(|i| {
                let label = Label::from(r.random_bool(0.35));
                let shift = if label.is_anomalous() { 0.2 } else { 0.0 };
                let score = ((r.random::<f64>() + shift) * 25.0).round() / 25.0;
                ScoredSample {
                    sample_id: format!("{set_idx}-{i}"),
                    score,
                    label,
                }
            })
            .collect();
        let Ok(res) = holdout_threshold_eval(&set, 0.2, set_idx) else { continue };
        checked += 1;
        let val: Vec<&ScoredSample> = set.iter().filter(|s| res.validation_ids.contains(&s.sample_id)).collect();
        let brute = common::brute_best_threshold(&val);
        let hold = ConfusionMatrix::from_pairs(
            set.iter()
                .filter(|s| !res.validation_ids.contains(&s.sample_id))
                .map(|s| (s.label, Some(Label::from(s.score > brute)))),
        );
        if res.threshold != brute || res.holdout != hold || best_threshold(&val).0 != brute {
            mismatched += 1;
        }
    }
    let separated: Vec<ScoredSample> = (0..200)
        .map(|i| ScoredSample {
            sample_id: i.to_string(),
            score: if i % 3 == 0 { 5.0 + (i % 7) as f64 } else { -1.0 },
            label: Label::from(i % 3 == 0),
        })
        .collect();
    let f1 = holdout_threshold_eval(&separated, 0.2, 1).unwrap().metrics.f1;
    verdict(
        "holdout thresholding",
        mismatched == 0 && checked >= 450 && f1 == 1.0,
        start,
        10.0,
        format!("{checked} score sets checked, {mismatched} differ from brute force, separated holdout F1={f1}"),
    );
}

fn malformed_output_handling() {
    let start = Instant::now();
    let backend = Arc::new(ScriptedBackend::new([
        "```json\n{\"Classification\": 1, \"Reasoning\": \"strand missing\"}\n```",
        "The sample looks normal to me.",
        "{\"Classification\": 0, \"Reasoning\": \"intact\"}",
        "no json here",
        "{\"Classification\": 7}",
    ]));
    let client = Client::with_backend(
        ModelConfig {
            max_in_flight: 1,
            ..ModelConfig::default()
        },
        backend,
    )
    .unwrap();
    let samples: Vec<EvalSample> = [Label::Anomalous, Label::Normal, Label::Normal]
        .into_iter()
        .enumerate()
        .map(|(i, label)| EvalSample {
            id: format!("q{i}"),
            label,
            defect_class: None,
            payload: Payload::FeatureText(format!("SLOPE datapoint 150 to 190: {i}\n\nAUC datapoint 250 to 300: 0")),
        })
        .collect();
    let run = run_ablation(
        &samples,
        &load_preset(Scenario::CrimpFeatures),
        &[AblationConfig::new(false, false, ShotMode::ZeroShot)],
        &client,
        &AblationOptions {
            exec: Execution::Serial,
            progress: None,
        },
    )
    .unwrap();
    let recs = &run.records[0];
    let kinds: Vec<&str> = recs
        .iter()
        .map(|r| match (&r.record.outcome, r.record.retried) {
            (Outcome::Verdict(_), false) => "parsed",
            (Outcome::Verdict(_), true) => "parsed-after-retry",
            (Outcome::ParseFailure { .. }, _) => "parse-failure",
        })
        .collect();
    let cm = run.rows[0].confusion;
    let excluded = cm.tp + cm.fp + cm.fn_ + cm.tn == 2 && cm.unparseable == 1;
    verdict(
        "malformed-output handling",
        kinds == ["parsed", "parsed-after-retry", "parse-failure"] && excluded,
        start,
        1.0,
        format!("records {kinds:?}, matrix {cm:?}"),
    );
}

fn main() -> ExitCode {
    let criteria: [(&str, fn()); 9] = [
        ("metric_engine_reproduces_table_rows", metric_engine_reproduces_table_rows),
        ("prompt_composition_is_byte_exact", prompt_composition_is_byte_exact),
        ("replay_is_deterministic", replay_is_deterministic),
        ("oracle_detector_scores_perfectly", oracle_detector_scores_perfectly),
        ("features_match_oracles", features_match_oracles),
        ("isolation_forest_properties", isolation_forest_properties),
        ("ramp_up_matches_per_size_oracle", ramp_up_matches_per_size_oracle),
        ("holdout_matches_brute_force", holdout_matches_brute_force),
        ("malformed_output_handling", malformed_output_handling),
    ];
    // Verdict lines carry the details; keep panic messages off the output.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, criterion) in criteria {
        REPORTED.store(false, Ordering::SeqCst);
        if let Err(e) = std::panic::catch_unwind(criterion) {
            failed += 1;
            if !REPORTED.load(Ordering::SeqCst) {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                report(name, false, &format!("panicked: {msg}"));
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
