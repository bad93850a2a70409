mod common;

use promptad_core::eval::ConfusionMatrix;
use promptad_core::forest::{
    avg_path_length, grid_search, grid_search_fitted, quantile, Forest, ForestError, ForestParams, Node,
    CONTAMINATION_GRID,
};
use promptad_core::{Execution, Label};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn cluster_with_outliers(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = common::rng(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let inliers: Vec<Vec<f64>> = (0..200).map(|_| vec![n.sample(&mut r), n.sample(&mut r)]).collect();
    let outliers: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let angle = i as f64 * std::f64::consts::TAU / 10.0;
            vec![100.0 * angle.cos(), 100.0 * angle.sin()]
        })
        .collect();
    (inliers, outliers)
}

#[test]
fn path_length_normalizer() {
    assert_eq!(avg_path_length(0), 0.0);
    assert_eq!(avg_path_length(1), 0.0);
    assert_eq!(avg_path_length(2), 1.0);
    // Direct evaluation of 2(ln(n-1) + gamma) - 2(n-1)/n.
    let direct = 2.0 * (255f64.ln() + 0.5772156649) - 2.0 * 255.0 / 256.0;
    assert!((avg_path_length(256) - direct).abs() < 1e-12);
    assert!((avg_path_length(256) - 10.2448).abs() < 1e-3);
    for n in 2..2000 {
        assert!(avg_path_length(n + 1) > avg_path_length(n));
    }
}

#[test]
fn two_points_one_tree() {
    let data = vec![vec![0.0], vec![1.0]];
    let params = ForestParams {
        n_trees: 1,
        ..ForestParams::default()
    };
    let f = Forest::fit(&data, &params).unwrap();
    let nodes = &f.trees[0].nodes;
    match &nodes[0] {
        Node::Internal { value, left, right, .. } => {
            assert!(*value > 0.0 && *value < 1.0);
            assert_eq!(nodes[*left as usize], Node::External { size: 1 });
            assert_eq!(nodes[*right as usize], Node::External { size: 1 });
        }
        other => panic!("root should split, got {other:?}"),
    }
}

#[test]
fn identical_points_are_degenerate() {
    let data = vec![vec![3.0, 3.0]; 50];
    let f = Forest::fit(&data, &ForestParams::default()).unwrap();
    assert!(f.degenerate);
    assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    let s = f.score(&[3.0, 3.0]).unwrap();
    assert!((s - 0.5).abs() < 1e-12);
    assert_eq!(f.score(&[100.0, -4.0]).unwrap(), s);
}

#[test]
fn expected_path_at_normalizer_scores_half() {
    let data = vec![vec![1.0]; 8];
    let params = ForestParams {
        n_trees: 1,
        ..ForestParams::default()
    };
    let f = Forest::fit(&data, &params).unwrap();
    assert_eq!(f.expected_path_length(&[1.0]).unwrap(), avg_path_length(8));
    assert_eq!(f.score(&[1.0]).unwrap(), 0.5);
}

#[test]
fn seeded_fit_is_deterministic() {
    let (inliers, _) = cluster_with_outliers(3);
    let p = ForestParams {
        seed: 99,
        ..ForestParams::default()
    };
    let a = Forest::fit(&inliers, &p).unwrap();
    let b = Forest::fit(&inliers, &p).unwrap();
    assert_eq!(a, b);
    let c = Forest::fit(&inliers, &ForestParams { seed: 100, ..p }).unwrap();
    assert_ne!(a.trees, c.trees);
}

#[test]
fn serial_and_parallel_fit_identically() {
    let (inliers, _) = cluster_with_outliers(4);
    let p = ForestParams::default();
    let a = Forest::fit_with(&inliers, &p, Execution::Serial).unwrap();
    let b = Forest::fit_with(&inliers, &p, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.score_threshold.to_bits(), b.score_threshold.to_bits());
}

#[test]
fn far_outliers_outscore_every_inlier() {
    let (inliers, outliers) = cluster_with_outliers(5);
    let mut train = inliers.clone();
    train.extend(outliers.iter().cloned());
    let f = Forest::fit(&train, &ForestParams::default()).unwrap();
    let max_in = inliers.iter().map(|x| f.score(x).unwrap()).fold(f64::MIN, f64::max);
    let min_out = outliers.iter().map(|x| f.score(x).unwrap()).fold(f64::MAX, f64::min);
    assert!(min_out > max_in, "{min_out} <= {max_in}");

    let mut f = f;
    for c in CONTAMINATION_GRID {
        f.rethreshold(c).unwrap();
        for o in &outliers {
            assert_eq!(f.predict(o).unwrap(), Label::Anomalous);
        }
    }
    f.rethreshold(0.10).unwrap();
    assert_eq!(f.predict(&[0.0, 0.0]).unwrap(), Label::Normal);
}

#[test]
fn threshold_is_training_quantile_and_strict() {
    let (inliers, _) = cluster_with_outliers(6);
    let f = Forest::fit(&inliers, &ForestParams::default()).unwrap();
    let mut scores: Vec<f64> = inliers.iter().map(|x| f.score(x).unwrap()).collect();
    scores.sort_by(f64::total_cmp);
    assert_eq!(f.train_scores, scores);
    assert_eq!(f.score_threshold, quantile(&scores, 0.9));
    // A point scoring exactly the threshold is normal.
    let at = inliers
        .iter()
        .find(|x| f.score(x).unwrap() == f.score_threshold)
        .cloned();
    if let Some(x) = at {
        assert_eq!(f.predict(&x).unwrap(), Label::Normal);
    }
    let above = inliers.iter().filter(|x| f.predict(x).unwrap() == Label::Anomalous).count();
    assert!((15..=25).contains(&above), "{above}");
}

#[test]
fn quantile_interpolates() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert!((quantile(&v, 0.9) - 3.7).abs() < 1e-12);
}

#[test]
fn errors() {
    assert_eq!(
        Forest::fit(&[vec![1.0]], &ForestParams::default()).unwrap_err(),
        ForestError::TooFewPoints(1)
    );
    assert!(matches!(
        Forest::fit(&[vec![1.0], vec![1.0, 2.0]], &ForestParams::default()),
        Err(ForestError::DimensionMismatch { .. })
    ));
    let f = Forest::fit(&[vec![1.0], vec![2.0]], &ForestParams::default()).unwrap();
    assert!(matches!(f.score(&[1.0, 2.0]), Err(ForestError::DimensionMismatch { expected: 1, got: 2 })));
    let bad = ForestParams {
        contamination: 0.7,
        ..ForestParams::default()
    };
    assert!(matches!(Forest::fit(&[vec![1.0], vec![2.0]], &bad), Err(ForestError::InvalidParams(_))));
}

#[test]
fn grid_search_matches_exhaustive_per_c() {
    let mut r = common::rng(11);
    let train: Vec<Vec<f64>> = (0..150).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
    let eval: Vec<(Vec<f64>, Label)> = (0..120)
        .map(|i| {
            if i % 3 == 0 {
                (vec![r.random_range(0.8..2.0), r.random_range(0.8..2.0)], Label::Anomalous)
            } else {
                (vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)], Label::Normal)
            }
        })
        .collect();
    let params = ForestParams {
        seed: 5,
        ..ForestParams::default()
    };
    let (forest, result) = grid_search(&train, &eval, &CONTAMINATION_GRID, &params, Execution::Parallel).unwrap();

    // Oracle: a fresh fit per C, evaluated independently.
    let mut best: Option<(f64, ConfusionMatrix)> = None;
    for c in CONTAMINATION_GRID {
        let f = Forest::fit(&train, &ForestParams { contamination: c, ..params }).unwrap();
        let cm = ConfusionMatrix::from_pairs(eval.iter().map(|(x, y)| (*y, Some(f.predict(x).unwrap()))));
        let better = match &best {
            None => true,
            Some((_, b)) => cm.cmp_f1(b).is_gt(),
        };
        if better {
            best = Some((c, cm));
        }
    }
    let (c, cm) = best.unwrap();
    assert_eq!(result.best_contamination, c);
    assert_eq!(result.confusion, cm);
    assert_eq!(forest.contamination, c);
}

#[test]
fn grid_of_one_and_separable_data() {
    let (inliers, outliers) = cluster_with_outliers(8);
    let eval: Vec<(Vec<f64>, Label)> = inliers
        .iter()
        .map(|x| (x.clone(), Label::Normal))
        .chain(outliers.iter().map(|x| (x.clone(), Label::Anomalous)))
        .collect();
    let f = Forest::fit(&inliers, &ForestParams::default()).unwrap();
    let one = grid_search_fitted(&f, &eval, &[0.35], Execution::Serial).unwrap();
    assert_eq!(one.best_contamination, 0.35);
    let all = grid_search_fitted(&f, &eval, &CONTAMINATION_GRID, Execution::Serial).unwrap();
    assert_eq!(all.metrics.recall, 1.0);
    assert!(grid_search_fitted(&f, &eval, &[], Execution::Serial).is_err());
}

#[test]
fn ties_go_to_smaller_contamination() {
    // Every C flags the outliers and nothing else when inliers are identical.
    let mut train = vec![vec![0.0, 0.0]; 100];
    train.push(vec![50.0, 50.0]);
    let eval = vec![(vec![0.0, 0.0], Label::Normal), (vec![60.0, 60.0], Label::Anomalous)];
    let f = Forest::fit(&train, &ForestParams::default()).unwrap();
    let r = grid_search_fitted(&f, &eval, &[0.3, 0.2, 0.1], Execution::Serial).unwrap();
    assert!(r.per_contamination.iter().all(|(_, cm)| cm.cmp_f1(&r.confusion).is_eq()));
    assert_eq!(r.best_contamination, 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_in_open_unit_interval(
        seed in any::<u64>(),
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..60),
        q in (-1e3f64..1e3, -1e3f64..1e3),
    ) {
        let data: Vec<Vec<f64>> = pts.iter().map(|(a, b)| vec![*a, *b]).collect();
        let f = Forest::fit(&data, &ForestParams { n_trees: 20, seed, ..ForestParams::default() }).unwrap();
        let s = f.score(&[q.0, q.1]).unwrap();
        prop_assert!(s > 0.0 && s < 1.0);
        for t in &f.trees {
            prop_assert!(t.depth() <= f.height_limit);
        }
    }

    #[test]
    fn split_values_strictly_inside_node_range(seed in any::<u64>(), n in 2usize..40) {
        let mut r = common::rng(seed);
        let data: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.0..1.0)]).collect();
        let f = Forest::fit(&data, &ForestParams { n_trees: 5, seed, ..ForestParams::default() }).unwrap();
        let lo = data.iter().map(|x| x[0]).fold(f64::MAX, f64::min);
        let hi = data.iter().map(|x| x[0]).fold(f64::MIN, f64::max);
        for t in &f.trees {
            if let Node::Internal { value, .. } = &t.nodes[0] {
                prop_assert!(*value > lo && *value <= hi);
            }
        }
    }
}
