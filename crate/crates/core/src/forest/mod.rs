//! Isolation Forest.
//!
//! Every tree draws from its own ChaCha8 stream (`seed`, stream = tree index),
//! so serial and parallel fits produce the same trees bit for bit.

mod tree;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::metrics::{ConfusionMatrix, Metrics};
use crate::{par, Execution, Label};

pub use tree::{ITree, Node};

/// Contamination values searched by the ramp-up benchmark.
pub const CONTAMINATION_GRID: [f64; 9] = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];

const EULER_GAMMA: f64 = 0.577_215_664_9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("need at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `min(256, n)`.
    pub subsample_size: Option<usize>,
    pub seed: u64,
    pub contamination: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample_size: None,
            seed: 0,
            contamination: 0.1,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be at least 1".into()));
        }
        check_contamination(self.contamination)?;
        if matches!(self.subsample_size, Some(s) if s < 2) {
            return Err(ForestError::InvalidParams("subsample_size must be at least 2".into()));
        }
        Ok(())
    }
}

fn check_contamination(c: f64) -> Result<(), ForestError> {
    if c > 0.0 && c <= 0.5 {
        Ok(())
    } else {
        Err(ForestError::InvalidParams(format!("contamination {c} is outside (0, 0.5]")))
    }
}

/// `c(n)`: average path length of an unsuccessful BST search over `n` points.
pub fn avg_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

/// Linear-interpolation quantile of `sorted` (ascending), `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<ITree>,
    pub n_train: usize,
    pub dims: usize,
    pub subsample_size: usize,
    pub height_limit: usize,
    pub contamination: f64,
    pub score_threshold: f64,
    /// Training scores, ascending; kept so the threshold can be moved cheaply.
    pub train_scores: Vec<f64>,
    /// All training points identical: every tree is a single leaf.
    pub degenerate: bool,
}

impl Forest {
    pub fn fit(data: &[Vec<f64>], params: &ForestParams) -> Result<Self, ForestError> {
        Self::fit_with(data, params, Execution::default())
    }

    pub fn fit_with(data: &[Vec<f64>], params: &ForestParams, exec: Execution) -> Result<Self, ForestError> {
        params.validate()?;
        let n = data.len();
        if n < 2 {
            return Err(ForestError::TooFewPoints(n));
        }
        let dims = data[0].len();
        for (i, row) in data.iter().enumerate() {
            if row.len() != dims {
                return Err(ForestError::DimensionMismatch {
                    expected: dims,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ForestError::NonFinite(i));
            }
        }

        let psi = params.subsample_size.unwrap_or(256).min(n);
        let height_limit = (psi as f64).log2().ceil() as usize;
        let trees = par::map_range(exec, params.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let mut rows = index::sample(&mut rng, n, psi).into_vec();
            rows.sort_unstable();
            ITree::grow(data, &mut rows, height_limit, &mut rng)
        });
        let degenerate = data.iter().all(|row| row == &data[0]);

        let mut forest = Forest {
            trees,
            n_train: n,
            dims,
            subsample_size: psi,
            height_limit,
            contamination: params.contamination,
            score_threshold: f64::NAN,
            train_scores: Vec::new(),
            degenerate,
        };
        let mut scores = par::map(exec, data, |x| forest.score_unchecked(x));
        scores.sort_by(f64::total_cmp);
        forest.train_scores = scores;
        forest.score_threshold = forest.threshold_for(params.contamination);
        Ok(forest)
    }

    fn threshold_for(&self, contamination: f64) -> f64 {
        quantile(&self.train_scores, 1.0 - contamination)
    }

    /// Moves the decision threshold to the `(1 - c)` quantile of training scores.
    pub fn rethreshold(&mut self, contamination: f64) -> Result<(), ForestError> {
        check_contamination(contamination)?;
        self.contamination = contamination;
        self.score_threshold = self.threshold_for(contamination);
        Ok(())
    }

    fn check_dims(&self, x: &[f64]) -> Result<(), ForestError> {
        if x.len() == self.dims {
            Ok(())
        } else {
            Err(ForestError::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            })
        }
    }

    /// Mean path length over all trees.
    pub fn expected_path_length(&self, x: &[f64]) -> Result<f64, ForestError> {
        self.check_dims(x)?;
        Ok(self.mean_path(x))
    }

    fn mean_path(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        2f64.powf(-self.mean_path(x) / avg_path_length(self.subsample_size))
    }

    /// Anomaly score in (0, 1); higher is more anomalous.
    pub fn score(&self, x: &[f64]) -> Result<f64, ForestError> {
        self.check_dims(x)?;
        Ok(self.score_unchecked(x))
    }

    pub fn score_many(&self, xs: &[Vec<f64>], exec: Execution) -> Result<Vec<f64>, ForestError> {
        xs.iter().try_for_each(|x| self.check_dims(x))?;
        Ok(par::map(exec, xs, |x| self.score_unchecked(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, ForestError> {
        Ok(Label::from(self.score(x)? > self.score_threshold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_contamination: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// One entry per grid value, in grid order.
    pub per_contamination: Vec<(f64, ConfusionMatrix)>,
}

/// Scores `eval` once and picks the grid value with the highest F1.
/// Ties go to the smaller contamination.
pub fn grid_search_fitted(
    forest: &Forest,
    eval: &[(Vec<f64>, Label)],
    grid: &[f64],
    exec: Execution,
) -> Result<GridResult, ForestError> {
    if grid.is_empty() {
        return Err(ForestError::InvalidParams("contamination grid is empty".into()));
    }
    grid.iter().try_for_each(|c| check_contamination(*c))?;
    let xs: Vec<Vec<f64>> = eval.iter().map(|(x, _)| x.clone()).collect();
    let scores = forest.score_many(&xs, exec)?;

    let per_contamination: Vec<(f64, ConfusionMatrix)> = grid
        .iter()
        .map(|&c| {
            let threshold = forest.threshold_for(c);
            let cm = ConfusionMatrix::from_pairs(
                eval.iter()
                    .zip(&scores)
                    .map(|((_, truth), s)| (*truth, Some(Label::from(*s > threshold)))),
            );
            (c, cm)
        })
        .collect();

    let mut best = 0;
    for i in 1..per_contamination.len() {
        let (ci, cmi) = &per_contamination[i];
        let (cb, cmb) = &per_contamination[best];
        match cmi.cmp_f1(cmb) {
            std::cmp::Ordering::Greater => best = i,
            std::cmp::Ordering::Equal if ci < cb => best = i,
            _ => {}
        }
    }
    let (best_contamination, confusion) = per_contamination[best];
    Ok(GridResult {
        best_contamination,
        confusion,
        metrics: confusion.metrics(),
        per_contamination,
    })
}

/// Fits once on `train`, then grid-searches the threshold on `eval`.
pub fn grid_search(
    train: &[Vec<f64>],
    eval: &[(Vec<f64>, Label)],
    grid: &[f64],
    params: &ForestParams,
    exec: Execution,
) -> Result<(Forest, GridResult), ForestError> {
    let mut forest = Forest::fit_with(train, params, exec)?;
    let result = grid_search_fitted(&forest, eval, grid, exec)?;
    forest.rethreshold(result.best_contamination)?;
    Ok((forest, result))
}
