use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::avg_path_length;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        value: f64,
        left: u32,
        right: u32,
    },
    External {
        size: usize,
    },
}

/// One isolation tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITree {
    pub nodes: Vec<Node>,
}

impl ITree {
    pub(crate) fn grow(data: &[Vec<f64>], rows: &mut [usize], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = ITree { nodes: Vec::new() };
        tree.build(data, rows, 0, height_limit, rng);
        tree
    }

    fn build(
        &mut self,
        data: &[Vec<f64>],
        rows: &mut [usize],
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::External { size: rows.len() });
        if depth >= height_limit || rows.len() <= 1 {
            return id;
        }

        let dims = data[rows[0]].len();
        let spans: Vec<(usize, f64, f64)> = (0..dims)
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = data[r][f];
                    (lo.min(v), hi.max(v))
                });
                (lo < hi).then_some((f, lo, hi))
            })
            .collect();
        if spans.is_empty() {
            return id;
        }

        let (feature, lo, hi) = spans[rng.random_range(0..spans.len())];
        let value = split_value(lo, hi, rng.random::<f64>());
        let mid = partition(rows, |r| data[r][feature] < value);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.build(data, left_rows, depth + 1, height_limit, rng);
        let right = self.build(data, right_rows, depth + 1, height_limit, rng);
        self.nodes[id as usize] = Node::Internal {
            feature,
            value,
            left,
            right,
        };
        id
    }

    /// Depth of the external node reached by `x` plus `c(size)` there.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0usize;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Internal {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *value { *left } else { *right } as usize;
                    depth += 1;
                }
                Node::External { size } => return depth as f64 + avg_path_length(*size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
                Node::External { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Uniform draw in (lo, hi). When the interval is too narrow to contain a
/// float strictly inside it, `hi` is used; `x < hi` still separates the two.
fn split_value(lo: f64, hi: f64, u: f64) -> f64 {
    let v = lo + u * (hi - lo);
    if lo < v && v < hi {
        return v;
    }
    let mid = lo + (hi - lo) / 2.0;
    if lo < mid && mid < hi {
        mid
    } else {
        hi
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let mid = yes.len();
    for (slot, r) in rows.iter_mut().zip(yes.into_iter().chain(no)) {
        *slot = r;
    }
    mid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_value_is_strictly_inside() {
        assert_eq!(split_value(0.0, 1.0, 0.0), 0.5);
        assert_eq!(split_value(0.0, 1.0, 0.25), 0.25);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(split_value(lo, hi, 0.3), hi);
    }

    #[test]
    fn partition_is_stable() {
        let mut rows = vec![5, 2, 8, 1, 4];
        let mid = partition(&mut rows, |r| r % 2 == 0);
        assert_eq!(mid, 3);
        assert_eq!(rows, vec![2, 8, 4, 5, 1]);
    }
}
