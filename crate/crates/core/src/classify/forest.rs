//! CART classification trees and a bagged random forest.
//!
//! Trees split on Gini impurity, consider `floor(sqrt(d))` random features
//! per node and grow until leaves are pure. Tree `i` draws its bootstrap
//! sample and feature subsets from `seed::derive_indexed(seed, "rf-tree", i)`.
//! Rows are put in a canonical order (by class, then feature bits) before
//! sampling, so the fitted forest does not depend on input row order.

use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn majority(&self, rows: &[usize]) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        // Lowest class index wins ties.
        let mut best = 0;
        for c in 1..self.n_classes {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        best
    }

    /// Best threshold on one feature, scored by sum_c L_c^2/n_L + R_c^2/n_R
    /// (larger is purer).
    fn best_threshold(&self, rows: &[usize], feature: usize, pairs: &mut Vec<(f64, usize)>) -> Option<Split> {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (self.x[r][feature], self.y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let n = pairs.len();
        let mut right = vec![0f64; self.n_classes];
        for &(_, c) in pairs.iter() {
            right[c] += 1.0;
        }
        let mut left = vec![0f64; self.n_classes];
        let mut sum_sq_left = 0.0;
        let mut sum_sq_right: f64 = right.iter().map(|v| v * v).sum();
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            let c = pairs[i].1;
            sum_sq_left += 2.0 * left[c] + 1.0;
            left[c] += 1.0;
            sum_sq_right -= 2.0 * right[c] - 1.0;
            right[c] -= 1.0;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let n_left = (i + 1) as f64;
            let score = sum_sq_left / n_left + sum_sq_right / (n as f64 - n_left);
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                if threshold >= pairs[i + 1].0 {
                    threshold = pairs[i].0;
                }
                best = Some(Split { feature, threshold, score });
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let first = self.y[rows[0]];
        if rows.iter().all(|&r| self.y[r] == first) {
            self.nodes[id] = Node::Leaf { class: first };
            return id;
        }

        let dim = self.x[rows[0]].len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.shuffle(self.rng);
        let mut pairs = Vec::with_capacity(rows.len());
        let mut best: Option<Split> = None;
        // Look at max_features candidates; keep drawing only while none of
        // them can separate the rows.
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            if let Some(s) = self.best_threshold(&rows, f, &mut pairs) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            self.nodes[id] = Node::Leaf { class: self.majority(&rows) };
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][split.feature] <= split.threshold);
        let left = self.grow(left_rows);
        let right = self.grow(right_rows);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

pub fn fit_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[usize],
    rows: Vec<usize>,
    n_classes: usize,
    max_features: usize,
    rng: &mut R,
) -> DecisionTree {
    let mut builder = Builder { x, y, n_classes, max_features, rng, nodes: Vec::new() };
    builder.grow(rows);
    DecisionTree { nodes: builder.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

fn canonical_order(x: &[Vec<f64>], y: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            let ka = x[a].iter().map(|v| v.to_bits());
            let kb = x[b].iter().map(|v| v.to_bits());
            ka.cmp(kb)
        })
    });
    idx
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, n_trees: usize, root_seed: u64) -> Self {
        let order = canonical_order(x, y);
        let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let n = xs.len();
        let dim = xs.first().map_or(0, Vec::len);
        let max_features = ((dim as f64).sqrt().floor() as usize).max(1);
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive_indexed(root_seed, "rf-tree", t as u64));
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                fit_tree(&xs, &ys, rows, n_classes, max_features, &mut rng)
            })
            .collect();
        Self { n_classes, trees }
    }

    /// Fraction of trees voting for each class.
    pub fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1.0;
        }
        let total = self.trees.len().max(1) as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn xor_data() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 2) as f64 + 0.01 * i as f64;
            let b = ((i / 2) % 2) as f64 - 0.005 * i as f64;
            x.push(vec![a, b]);
            y.push(((i % 2) ^ ((i / 2) % 2)) as usize);
        }
        (x, y)
    }

    #[test]
    fn single_tree_fits_training_data_exactly() {
        let (x, y) = xor_data();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let tree = fit_tree(&x, &y, (0..x.len()).collect(), 2, 1, &mut rng);
        for (row, &c) in x.iter().zip(&y) {
            assert_eq!(tree.predict(row), c);
        }
    }

    #[test]
    fn identical_rows_with_different_labels_stop_at_majority() {
        let x = vec![vec![1.0], vec![1.0], vec![1.0]];
        let y = vec![1, 0, 1];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let tree = fit_tree(&x, &y, vec![0, 1, 2], 2, 1, &mut rng);
        assert_eq!(tree.nodes, vec![Node::Leaf { class: 1 }]);
    }

    #[test]
    fn forest_is_invariant_to_row_order() {
        let (x, y) = xor_data();
        let a = RandomForest::fit(&x, &y, 2, 15, 9);
        let mut idx: Vec<usize> = (0..x.len()).rev().collect();
        idx.rotate_left(7);
        let xr: Vec<_> = idx.iter().map(|&i| x[i].clone()).collect();
        let yr: Vec<_> = idx.iter().map(|&i| y[i]).collect();
        let b = RandomForest::fit(&xr, &yr, 2, 15, 9);
        assert_eq!(a, b);
    }
}
