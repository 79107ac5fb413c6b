//! Gradient-boosted regression trees with squared loss, built from scratch.
//!
//! Small and deterministic: exact greedy splits, depth-limited trees, leaf
//! values equal to the mean residual. With squared loss the per-round
//! training MSE is non-increasing for any learning rate in (0, 2).

use crate::error::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct GbmParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 5,
        }
    }
}

/// One node of a regression tree, stored flat. `left`/`right` are indices
/// into the tree's node vector.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A depth-limited regression tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Maximum number of splits on any root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// A trained boosted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    /// Constant initial prediction: the training target mean.
    pub initial_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE before any tree and after each round.
    pub training_loss: Vec<f64>,
}

impl GbmModel {
    /// Raw (unclamped) ensemble prediction.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut y = self.initial_prediction;
        for t in &self.trees {
            y += self.learning_rate * t.predict(row);
        }
        y
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Best exact split of `idx` by SSE reduction, or None when nothing valid.
/// Ties keep the first candidate found: lowest feature, then lowest
/// threshold.
fn best_split(
    rows: &[Vec<f64>],
    residuals: &[f64],
    idx: &[usize],
    min_leaf: usize,
    order_buf: &mut Vec<usize>,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total_sum: f64 = idx.iter().map(|&i| residuals[i]).sum();
    let n_features = rows[idx[0]].len();
    let mut best: Option<SplitChoice> = None;

    // Not a needless range loop: f is a column index and rows is indexed
    // per-sample inside the sort.
    #[allow(clippy::needless_range_loop)]
    for f in 0..n_features {
        order_buf.clear();
        order_buf.extend_from_slice(idx);
        order_buf.sort_by(|&a, &b| {
            rows[a][f]
                .partial_cmp(&rows[b][f])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            let i = order_buf[k];
            left_sum += residuals[i];
            let left_n = k + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let here = rows[i][f];
            let next = rows[order_buf[k + 1]][f];
            if here == next {
                continue;
            }
            let right_sum = total_sum - left_sum;
            // SSE reduction up to a constant: sum_l^2/n_l + sum_r^2/n_r.
            let gain = left_sum * left_sum / left_n as f64
                + right_sum * right_sum / right_n as f64
                - total_sum * total_sum / n as f64;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: here + (next - here) / 2.0,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-12)
}

fn grow_tree(
    rows: &[Vec<f64>],
    residuals: &[f64],
    idx: Vec<usize>,
    depth_left: usize,
    min_leaf: usize,
    nodes: &mut Vec<TreeNode>,
    order_buf: &mut Vec<usize>,
) -> usize {
    let mean = idx.iter().map(|&i| residuals[i]).sum::<f64>() / idx.len() as f64;
    if depth_left == 0 {
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    }
    let Some(split) = best_split(rows, residuals, &idx, min_leaf, order_buf) else {
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| rows[i][split.feature] <= split.threshold);

    let at = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow_tree(rows, residuals, left_idx, depth_left - 1, min_leaf, nodes, order_buf);
    let right = grow_tree(rows, residuals, right_idx, depth_left - 1, min_leaf, nodes, order_buf);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[at]
    {
        *l = left;
        *r = right;
    }
    at
}

/// Trains a boosted ensemble on dense rows.
pub fn train(rows: &[Vec<f64>], targets: &[f64], params: &GbmParams) -> Result<GbmModel> {
    if rows.is_empty() {
        return Err(Error::InvalidData("gbm training set is empty".to_string()));
    }
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: targets.len(),
        });
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(Error::InvalidData("gbm rows have no features".to_string()));
    }
    for r in rows {
        if r.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: r.len(),
            });
        }
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::Config(format!(
            "gbm learning rate {} outside (0, 1]",
            params.learning_rate
        )));
    }

    let n = rows.len();
    let initial = targets.iter().sum::<f64>() / n as f64;
    let mut predictions = vec![initial; n];
    let mut residuals = vec![0.0f64; n];
    let mut training_loss = Vec::with_capacity(params.rounds + 1);
    let mse = |preds: &[f64]| -> f64 {
        preds
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64
    };
    training_loss.push(mse(&predictions));

    let mut trees = Vec::with_capacity(params.rounds);
    let mut order_buf = Vec::with_capacity(n);
    let all_idx: Vec<usize> = (0..n).collect();
    for _ in 0..params.rounds {
        for i in 0..n {
            residuals[i] = targets[i] - predictions[i];
        }
        let mut nodes = Vec::new();
        grow_tree(
            rows,
            &residuals,
            all_idx.clone(),
            params.max_depth,
            params.min_samples_leaf.max(1),
            &mut nodes,
            &mut order_buf,
        );
        let tree = RegressionTree { nodes };
        for i in 0..n {
            predictions[i] += params.learning_rate * tree.predict(&rows[i]);
        }
        trees.push(tree);
        training_loss.push(mse(&predictions));
    }

    Ok(GbmModel {
        initial_prediction: initial,
        learning_rate: params.learning_rate,
        trees,
        training_loss,
    })
}
