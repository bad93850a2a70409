use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::EvalError;
use crate::forest::{grid_search_fitted, Forest, ForestParams, CONTAMINATION_GRID};
use crate::{par, Execution, Label};

/// 5, 10, 20, 30, ..., 200.
pub fn default_train_sizes() -> Vec<usize> {
    std::iter::once(5).chain((10..=200).step_by(10)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampUpConfig {
    pub train_sizes: Vec<usize>,
    /// `seed` and `contamination` are overridden per point.
    pub params: ForestParams,
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl Default for RampUpConfig {
    fn default() -> Self {
        Self {
            train_sizes: default_train_sizes(),
            params: ForestParams::default(),
            grid: CONTAMINATION_GRID.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampUpPoint {
    pub train_size: usize,
    pub chosen_contamination: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// A constant overlay (e.g. the prompt-based detector's metrics) for plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkLine {
    pub label: String,
    pub metrics: Metrics,
}

/// Training indices and forest seed for one ramp-up point.
///
/// ChaCha8 seeded with `seed`, stream `train_size`: first the indices are
/// drawn without replacement, then the forest seed is the next `u64`.
pub fn point_draw(pool_len: usize, train_size: usize, seed: u64) -> (Vec<usize>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(train_size as u64);
    let picked = index::sample(&mut rng, pool_len, train_size).into_vec();
    (picked, rng.next_u64())
}

/// Fits one forest per training size on normal-only vectors drawn from
/// `normal_pool` and grid-searches the contamination on `eval`.
pub fn ramp_up(
    normal_pool: &[Vec<f64>],
    eval: &[(Vec<f64>, Label)],
    config: &RampUpConfig,
    exec: Execution,
) -> Result<Vec<RampUpPoint>, EvalError> {
    if eval.is_empty() {
        return Err(EvalError::InvalidInput("evaluation set is empty".into()));
    }
    let needed = config.train_sizes.iter().copied().max().unwrap_or(0);
    if needed > normal_pool.len() {
        return Err(EvalError::InsufficientNormals {
            needed,
            available: normal_pool.len(),
        });
    }
    let mut sizes = config.train_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();

    // Points run in parallel; trees inside each point are grown serially.
    let points = par::map(exec, &sizes, |&n| {
        let (picked, forest_seed) = point_draw(normal_pool.len(), n, config.seed);
        let train: Vec<Vec<f64>> = picked.iter().map(|&i| normal_pool[i].clone()).collect();
        let params = ForestParams {
            seed: forest_seed,
            ..config.params
        };
        let forest = Forest::fit_with(&train, &params, Execution::Serial)?;
        let result = grid_search_fitted(&forest, eval, &config.grid, Execution::Serial)?;
        Ok(RampUpPoint {
            train_size: n,
            chosen_contamination: Some(result.best_contamination),
            confusion: result.confusion,
            metrics: result.metrics,
        })
    });
    points.into_iter().collect()
}
