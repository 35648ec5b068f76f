use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runner::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::{sign_label, MultiviewDataset, MvModel, Table};
use crate::trainer::fit;
use crate::tree::{build_pool, default_depths, train_tree, DecisionTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Best single-view tree, chosen on training accuracy.
    Mono,
    /// One tree on the concatenated views.
    Concat,
    /// View trees on part of the training data, a meta tree on their
    /// predictions over the rest.
    Fusion,
    /// One tree per view, unweighted vote.
    MvUniform,
    /// Learned double-weighted vote over a pool of trees per view.
    Mwmvc2,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mono,
        Method::Concat,
        Method::Fusion,
        Method::MvUniform,
        Method::Mwmvc2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mono => "mono",
            Method::Concat => "concat",
            Method::Fusion => "fusion",
            Method::MvUniform => "mv_uniform",
            Method::Mwmvc2 => "mwmvc2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::input(format!(
                    "unknown method {s:?}; expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

/// Depth of single-tree baselines: `ceil(log2 m) + 1`.
pub fn baseline_depth(m: usize) -> usize {
    m.max(1).next_power_of_two().trailing_zeros() as usize + 1
}

#[derive(Clone, Debug)]
pub enum Fitted {
    Mono {
        view: usize,
        tree: DecisionTree,
    },
    Concat {
        tree: DecisionTree,
    },
    Fusion {
        view_trees: Vec<DecisionTree>,
        meta: DecisionTree,
    },
    MvUniform {
        trees: Vec<DecisionTree>,
    },
    Mwmvc2(Box<MvModel>),
}

fn tree_predictions(tree: &DecisionTree, t: &Table) -> Vec<i8> {
    t.rows().map(|x| tree.predict(x)).collect()
}

/// Column `v` holds view tree `v`'s ±1 predictions.
fn stacked_predictions(trees: &[DecisionTree], views: &[Table]) -> Result<Table> {
    let n = views[0].n_rows();
    let cols: Vec<Vec<i8>> = trees
        .iter()
        .zip(views)
        .map(|(t, x)| tree_predictions(t, x))
        .collect();
    let data = (0..n)
        .flat_map(|i| cols.iter().map(move |c| f64::from(c[i])))
        .collect();
    Table::new(n, trees.len(), data)
}

impl Fitted {
    pub fn predict(&self, views: &[Table]) -> Result<Vec<i8>> {
        match self {
            Fitted::Mono { view, tree } => Ok(tree_predictions(tree, &views[*view])),
            Fitted::Concat { tree } => {
                let refs: Vec<&Table> = views.iter().collect();
                Ok(tree_predictions(tree, &Table::hconcat(&refs)?))
            }
            Fitted::Fusion { view_trees, meta } => Ok(tree_predictions(
                meta,
                &stacked_predictions(view_trees, views)?,
            )),
            Fitted::MvUniform { trees } => {
                let cols: Vec<Vec<i8>> = trees
                    .iter()
                    .zip(views)
                    .map(|(t, x)| tree_predictions(t, x))
                    .collect();
                Ok((0..views[0].n_rows())
                    .map(|i| sign_label(cols.iter().map(|c| f64::from(c[i])).sum()))
                    .collect())
            }
            Fitted::Mwmvc2(model) => Ok(model.scores(views)?.into_iter().map(sign_label).collect()),
        }
    }

    /// View weights, for the learned vote only.
    pub fn rho(&self) -> Option<&[f64]> {
        match self {
            Fitted::Mwmvc2(model) => Some(&model.weights.rho),
            _ => None,
        }
    }
}

/// Label-stratified split: a `fraction` share of each class goes to the
/// first part. Both parts are non-empty.
fn stratified_split(labels: &[i8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.len() < 2 {
        return Err(Error::input("fusion needs at least 2 training examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for class in [1i8, -1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * fraction).round() as usize;
        first.extend_from_slice(&idx[..k]);
        second.extend_from_slice(&idx[k..]);
    }
    if first.is_empty() {
        first.push(second.pop().expect("at least two examples"));
    } else if second.is_empty() {
        second.push(first.pop().expect("at least two examples"));
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

pub fn fit_method(
    method: Method,
    train: &MultiviewDataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Fitted> {
    let m = train.n_samples();
    let depth = cfg.baseline_depth.unwrap_or_else(|| baseline_depth(m));
    let labels = train.labels();
    match method {
        Method::Mono => {
            let mut best: Option<(f64, usize, DecisionTree)> = None;
            for (v, x) in train.views().iter().enumerate() {
                let tree = train_tree(x, labels, depth)?;
                let err = tree.training_error(x, labels);
                if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
                    best = Some((err, v, tree));
                }
            }
            let (_, view, tree) = best.expect("datasets have at least two views");
            Ok(Fitted::Mono { view, tree })
        }
        Method::Concat => {
            let refs: Vec<&Table> = train.views().iter().collect();
            Ok(Fitted::Concat {
                tree: train_tree(&Table::hconcat(&refs)?, labels, depth)?,
            })
        }
        Method::Fusion => {
            let (base_idx, meta_idx) = stratified_split(labels, cfg.fusion_fraction, seed)?;
            let base = train.subset(&base_idx)?;
            let meta_part = train.subset(&meta_idx)?;
            let base_depth = cfg
                .baseline_depth
                .unwrap_or_else(|| baseline_depth(base.n_samples()));
            let view_trees = base
                .views()
                .iter()
                .map(|x| train_tree(x, base.labels(), base_depth))
                .collect::<Result<Vec<_>>>()?;
            let stacked = stacked_predictions(&view_trees, meta_part.views())?;
            let meta_depth = cfg
                .baseline_depth
                .unwrap_or_else(|| baseline_depth(meta_part.n_samples()));
            let meta = train_tree(&stacked, meta_part.labels(), meta_depth)?;
            Ok(Fitted::Fusion { view_trees, meta })
        }
        Method::MvUniform => Ok(Fitted::MvUniform {
            trees: train
                .views()
                .iter()
                .map(|x| train_tree(x, labels, depth))
                .collect::<Result<Vec<_>>>()?,
        }),
        Method::Mwmvc2 => {
            let depths = cfg.depths.clone().unwrap_or_else(|| default_depths(m));
            let pool = build_pool(train, &depths)?;
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            let (model, _) = fit(train, &pool, &tc)?;
            Ok(Fitted::Mwmvc2(Box::new(model)))
        }
    }
}
