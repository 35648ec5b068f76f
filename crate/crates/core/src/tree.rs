//! Axis-aligned decision trees used as view-specific weak classifiers, and
//! the per-view pools they are collected into.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarginMatrix, MultiviewDataset, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        leaf: i8,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Node::Leaf { leaf } if *leaf == 1 || *leaf == -1 => Ok(()),
            Node::Leaf { leaf } => Err(Error::input(format!("tree leaf {leaf} is not -1 or +1"))),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= dim {
                    return Err(Error::input(format!(
                        "tree splits on feature {feature} but the view has {dim} features"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(Error::input("tree threshold is not finite"));
                }
                left.check(dim)?;
                right.check(dim)
            }
        }
    }
}

/// A binary classification tree; `x[feature] <= threshold` goes left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTree {
    pub max_depth: usize,
    pub root: Node,
}

impl DecisionTree {
    pub fn from_root(max_depth: usize, root: Node) -> Self {
        DecisionTree { max_depth, root }
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { leaf } => return *leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn training_error(&self, features: &Table, labels: &[i8]) -> f64 {
        let wrong = features
            .rows()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) != y)
            .count();
        wrong as f64 / labels.len() as f64
    }
}

fn majority(pos: usize, neg: usize) -> i8 {
    if pos >= neg {
        1
    } else {
        -1
    }
}

/// Sum of squared class counts over child size; larger means purer.
/// Compared exactly as the fraction `num / den`.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(pos_l: usize, neg_l: usize, pos_r: usize, neg_r: usize) -> Self {
        let (pl, nl, pr, nr) = (pos_l as u128, neg_l as u128, pos_r as u128, neg_r as u128);
        let (sl, sr) = (pl + nl, pr + nr);
        Purity {
            num: (pl * pl + nl * nl) * sr + (pr * pr + nr * nr) * sl,
            den: sl * sr,
        }
    }

    fn better_than(&self, other: &Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

struct Builder<'a> {
    x: &'a Table,
    y: &'a [i8],
    max_depth: usize,
}

impl Builder<'_> {
    fn build(&self, idx: &mut [usize], depth: usize) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let neg = idx.len() - pos;
        let leaf = Node::Leaf {
            leaf: majority(pos, neg),
        };
        if depth >= self.max_depth || pos == 0 || neg == 0 || idx.len() <= 1 {
            return leaf;
        }
        let Some(best) = self.best_split(idx, pos) else {
            return leaf;
        };
        let split_at = partition(idx, |i| self.x.get(i, best.feature) <= best.threshold);
        let (l, r) = idx.split_at_mut(split_at);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }

    fn best_split(&self, idx: &[usize], total_pos: usize) -> Option<Best> {
        let n = idx.len();
        let total_neg = n - total_pos;
        let mut best: Option<Best> = None;
        let mut order: Vec<(f64, i8)> = Vec::with_capacity(n);
        for f in 0..self.x.n_cols() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_l = 0;
            for k in 0..n - 1 {
                if order[k].1 == 1 {
                    pos_l += 1;
                }
                let (lo, hi) = (order[k].0, order[k + 1].0);
                if lo >= hi {
                    continue;
                }
                let n_l = k + 1;
                let purity = Purity::of(
                    pos_l,
                    n_l - pos_l,
                    total_pos - pos_l,
                    total_neg - (n_l - pos_l),
                );
                if best.as_ref().is_none_or(|b| purity.better_than(&b.purity)) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        purity,
                    });
                }
            }
        }
        best
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let split = left.len();
    left.extend(right);
    idx.copy_from_slice(&left);
    split
}

/// Greedy CART induction with Gini impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct sorted
/// values. Exact impurity ties keep the lowest feature index, then the lowest
/// threshold. Growth stops at `max_depth`, at pure nodes, at single-sample
/// nodes, or when no feature varies.
pub fn train_tree(features: &Table, labels: &[i8], max_depth: usize) -> Result<DecisionTree> {
    if labels.is_empty() || features.n_rows() == 0 {
        return Err(Error::input("cannot train a tree on empty data"));
    }
    if features.n_rows() != labels.len() {
        return Err(Error::input(format!(
            "{} feature rows for {} labels",
            features.n_rows(),
            labels.len()
        )));
    }
    if max_depth == 0 {
        return Err(Error::input("max_depth must be at least 1"));
    }
    if features.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("features contain non-finite values"));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::input("labels must be -1 or +1"));
    }
    let builder = Builder {
        x: features,
        y: labels,
        max_depth,
    };
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    Ok(DecisionTree {
        max_depth,
        root: builder.build(&mut idx, 0),
    })
}

/// Default depth schedule `1..=max(1, D - 2)` with `D = ceil(log2 m) + 1`.
pub fn default_depths(m: usize) -> Vec<usize> {
    let ceil_log2 = m.max(1).next_power_of_two().trailing_zeros() as usize;
    let d = ceil_log2 + 1;
    (1..=d.saturating_sub(2).max(1)).collect()
}

/// Per-view ordered lists of trained trees.
#[derive(Clone, Debug, PartialEq)]
pub struct VoterPool {
    trees: Vec<Vec<DecisionTree>>,
    view_dims: Vec<usize>,
}

impl VoterPool {
    pub fn new(trees: Vec<Vec<DecisionTree>>, view_dims: Vec<usize>) -> Result<Self> {
        if trees.len() != view_dims.len() {
            return Err(Error::input(format!(
                "{} tree pools for {} view dimensions",
                trees.len(),
                view_dims.len()
            )));
        }
        for (v, (pool, &dim)) in trees.iter().zip(&view_dims).enumerate() {
            if pool.is_empty() {
                return Err(Error::input(format!("view {v} has an empty voter pool")));
            }
            for t in pool {
                t.root.check(dim)?;
                if t.max_depth == 0 || t.depth() > t.max_depth {
                    return Err(Error::input(format!(
                        "tree of depth {} exceeds its max_depth {}",
                        t.depth(),
                        t.max_depth
                    )));
                }
            }
        }
        Ok(VoterPool { trees, view_dims })
    }

    pub fn n_views(&self) -> usize {
        self.trees.len()
    }

    pub fn pool_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(Vec::len).collect()
    }

    pub fn view_dims(&self) -> &[usize] {
        &self.view_dims
    }

    pub fn trees(&self, v: usize) -> &[DecisionTree] {
        &self.trees[v]
    }

    pub fn all_trees(&self) -> &[Vec<DecisionTree>] {
        &self.trees
    }

    pub fn permute_views(&self, order: &[usize]) -> Self {
        VoterPool {
            trees: order.iter().map(|&v| self.trees[v].clone()).collect(),
            view_dims: order.iter().map(|&v| self.view_dims[v]).collect(),
        }
    }
}

/// Trains one tree per requested depth on every view. Views are trained in
/// parallel; the result does not depend on scheduling.
pub fn build_pool(data: &MultiviewDataset, depths: &[usize]) -> Result<VoterPool> {
    if depths.is_empty() {
        return Err(Error::input("depth list is empty"));
    }
    if let Some(&d) = depths.iter().find(|&&d| d == 0) {
        return Err(Error::input(format!("invalid tree depth {d}")));
    }
    let trees = (0..data.n_views())
        .into_par_iter()
        .map(|v| {
            depths
                .iter()
                .map(|&d| train_tree(data.view(v), data.labels(), d))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    VoterPool::new(trees, data.view_dims())
}

/// `(M_v)_{ij} = y_i h_{v,j}(x_i^v)` for every view.
pub fn margin_matrix(pool: &VoterPool, data: &MultiviewDataset) -> Result<MarginMatrix> {
    if pool.n_views() != data.n_views() {
        return Err(Error::input(format!(
            "pool has {} views, data has {}",
            pool.n_views(),
            data.n_views()
        )));
    }
    if pool.view_dims() != data.view_dims().as_slice() {
        return Err(Error::input(format!(
            "pool view dimensions {:?} differ from data {:?}",
            pool.view_dims(),
            data.view_dims()
        )));
    }
    let columns = (0..data.n_views())
        .map(|v| {
            pool.trees(v)
                .iter()
                .map(|h| {
                    data.view(v)
                        .rows()
                        .zip(data.labels())
                        .map(|(x, &y)| y * h.predict(x))
                        .collect()
                })
                .collect()
        })
        .collect();
    MarginMatrix::from_columns(columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> Table {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Table::from_rows(rows[0].len(), &rows).unwrap()
    }

    #[test]
    fn separable_pair_gives_midpoint_stump() {
        let t = train_tree(&table(&[&[0.0], &[1.0]]), &[-1, 1], 1).unwrap();
        assert_eq!(
            t.root,
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: Box::new(Node::Leaf { leaf: -1 }),
                right: Box::new(Node::Leaf { leaf: 1 }),
            }
        );
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let x = table(&[&[0.0, 3.0], &[1.0, 2.0], &[5.0, 1.0]]);
        let t = train_tree(&x, &[1, 1, 1], 4).unwrap();
        assert_eq!(t.root, Node::Leaf { leaf: 1 });
        assert_eq!(t.depth(), 0);
    }

    /// Brute-force oracle: every (feature, midpoint) stump with majority
    /// leaves, scored by weighted Gini impurity in floating point.
    fn brute_force_stumps(x: &Table, y: &[i8]) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for f in 0..x.n_cols() {
            let mut vals: Vec<f64> = (0..x.n_rows()).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let side = |left: bool| -> (usize, usize) {
                    let mut c = (0, 0);
                    for i in 0..x.n_rows() {
                        if (x.get(i, f) <= thr) == left {
                            if y[i] == 1 {
                                c.0 += 1
                            } else {
                                c.1 += 1
                            }
                        }
                    }
                    c
                };
                let (l, r) = (side(true), side(false));
                let gini = |(p, n): (usize, usize)| {
                    let s = (p + n) as f64;
                    1.0 - (p as f64 / s).powi(2) - (n as f64 / s).powi(2)
                };
                let total = x.n_rows() as f64;
                let imp = ((l.0 + l.1) as f64 * gini(l) + (r.0 + r.1) as f64 * gini(r)) / total;
                let err = ((if majority(l.0, l.1) == 1 { l.1 } else { l.0 })
                    + (if majority(r.0, r.1) == 1 { r.1 } else { r.0 }))
                    as f64
                    / total;
                out.push((f, thr, imp, err));
            }
        }
        out
    }

    #[test]
    fn xor_stump_matches_enumeration() {
        let x = table(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let y = [-1, 1, 1, -1];
        let stumps = brute_force_stumps(&x, &y);
        let best_imp = stumps.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
        // every stump on XOR leaves both children balanced
        assert!(stumps.iter().all(|s| (s.2 - best_imp).abs() < 1e-12));
        let chosen = stumps
            .iter()
            .find(|s| (s.2 - best_imp).abs() < 1e-12)
            .unwrap();
        let t = train_tree(&x, &y, 1).unwrap();
        let err = t.training_error(&x, &y);
        assert_eq!(err, chosen.3);
        assert_eq!(err, 0.5);
        assert!(matches!(t.root, Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn stump_is_gini_optimal_on_random_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(2..12);
            let d = rng.random_range(1..4);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| f64::from(rng.random_range(0..5))).collect())
                .collect();
            let y: Vec<i8> = (0..n)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            let x = Table::from_rows(d, &rows).unwrap();
            let t = train_tree(&x, &y, 1).unwrap();
            let stumps = brute_force_stumps(&x, &y);
            let pos = y.iter().filter(|&&v| v == 1).count();
            if stumps.is_empty() || pos == 0 || pos == n {
                assert!(matches!(t.root, Node::Leaf { .. }));
                continue;
            }
            let best = stumps.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
            let first = stumps.iter().find(|s| s.2 <= best + 1e-12).unwrap();
            match t.root {
                Node::Split {
                    feature, threshold, ..
                } => {
                    assert_eq!((feature, threshold), (first.0, first.1));
                    assert_eq!(t.training_error(&x, &y), first.3);
                }
                Node::Leaf { .. } => panic!("expected a split"),
            }
        }
    }

    #[test]
    fn deeper_trees_never_fit_worse() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 40;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let y: Vec<i8> = rows
                .iter()
                .map(|r| {
                    if r[0] + 0.5 * r[1] > 0.7 || rng.random_bool(0.1) {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            let x = Table::from_rows(3, &rows).unwrap();
            let stump = train_tree(&x, &y, 1).unwrap().training_error(&x, &y);
            let mut prev = stump;
            for d in 2..7 {
                let t = train_tree(&x, &y, d).unwrap();
                assert!(t.depth() <= d);
                let e = t.training_error(&x, &y);
                assert!(e <= stump && e <= prev, "depth {d}: {e} > {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn tree_errors() {
        let x = table(&[&[0.0], &[1.0]]);
        assert!(train_tree(&x, &[1, -1], 0).is_err());
        assert!(train_tree(&Table::new(0, 1, vec![]).unwrap(), &[], 1).is_err());
        let nan = table(&[&[0.0], &[f64::NAN]]);
        assert!(train_tree(&nan, &[1, -1], 1).is_err());
    }

    #[test]
    fn close_floats_keep_threshold_between_values() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = table(&[&[a], &[b]]);
        let t = train_tree(&x, &[-1, 1], 1).unwrap();
        assert_eq!(t.predict(&[a]), -1);
        assert_eq!(t.predict(&[b]), 1);
    }

    #[test]
    fn default_depth_schedule() {
        assert_eq!(default_depths(1), vec![1]);
        assert_eq!(default_depths(2), vec![1]);
        assert_eq!(default_depths(8), vec![1, 2]);
        assert_eq!(default_depths(100), (1..=6).collect::<Vec<_>>());
        assert_eq!(default_depths(400), (1..=8).collect::<Vec<_>>());
    }

    fn two_view_data() -> MultiviewDataset {
        let a = table(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0], &[3.0, 1.0]]);
        let b = table(&[&[5.0], &[4.0], &[3.0], &[1.0]]);
        MultiviewDataset::with_default_names(vec![a, b], vec![-1, -1, 1, 1]).unwrap()
    }

    #[test]
    fn pool_structure_and_order() {
        let data = two_view_data();
        let pool = build_pool(&data, &[1, 2]).unwrap();
        assert_eq!(pool.pool_sizes(), vec![2, 2]);
        for v in 0..2 {
            assert_eq!(pool.trees(v)[0].max_depth, 1);
            assert_eq!(pool.trees(v)[1].max_depth, 2);
        }
        assert!(build_pool(&data, &[]).is_err());
        assert!(build_pool(&data, &[0]).is_err());
    }

    #[test]
    fn identical_views_give_identical_trees() {
        let a = table(&[
            &[0.3, 1.0],
            &[1.0, 0.2],
            &[2.0, 2.0],
            &[3.0, 1.5],
            &[0.1, 0.1],
        ]);
        let data = MultiviewDataset::with_default_names(vec![a.clone(), a], vec![-1, 1, 1, -1, 1])
            .unwrap();
        let pool = build_pool(&data, &[1, 2, 3]).unwrap();
        assert_eq!(pool.trees(0), pool.trees(1));
        assert_eq!(pool, build_pool(&data, &[1, 2, 3]).unwrap());
    }

    #[test]
    fn margin_matrix_is_label_times_prediction() {
        let x = table(&[&[0.0], &[1.0], &[2.0]]);
        let data =
            MultiviewDataset::with_default_names(vec![x.clone(), x], vec![1, -1, 1]).unwrap();
        // predicts +1 for x <= 1.5, -1 otherwise
        let tree = DecisionTree::from_root(
            1,
            Node::Split {
                feature: 0,
                threshold: 1.5,
                left: Box::new(Node::Leaf { leaf: 1 }),
                right: Box::new(Node::Leaf { leaf: -1 }),
            },
        );
        let always = DecisionTree::from_root(1, Node::Leaf { leaf: 1 });
        let pool = VoterPool::new(vec![vec![tree], vec![always]], vec![1, 1]).unwrap();
        let mm = margin_matrix(&pool, &data).unwrap();
        assert_eq!(mm.view_columns(0)[0], vec![1, -1, -1]);
        assert_eq!(mm.view_columns(1)[0], vec![1, -1, 1]);
    }

    #[test]
    fn margin_matrix_rejects_mismatched_pool() {
        let data = two_view_data();
        let pool = build_pool(&data, &[1]).unwrap();
        let other = MultiviewDataset::with_default_names(
            vec![data.view(1).clone(), data.view(0).clone()],
            data.labels().to_vec(),
        )
        .unwrap();
        assert!(margin_matrix(&pool, &other).is_err());
    }

    #[test]
    fn tree_json_shape() {
        let t = train_tree(&table(&[&[0.0], &[1.0]]), &[-1, 1], 1).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"max_depth":1,"root":{"feature":0,"threshold":0.5,"left":{"leaf":-1},"right":{"leaf":1}}}"#
        );
        let back: DecisionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
