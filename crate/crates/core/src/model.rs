//! Shared domain types: feature tables, multiview datasets, vote weights,
//! margin matrices and the trained double-weighted vote model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{RhoSolver, UpdateRule};
use crate::tree::{DecisionTree, VoterPool};

/// Version tag written into every model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A dense row-major table of real-valued features.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::input(format!(
                "table of {rows}x{cols} needs {} cells, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Table { rows, cols, data })
    }

    /// Builds a table from rows that must all have `cols` entries.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::input(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Table {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Table {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Table {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Horizontal concatenation; all tables must share the row count.
    pub fn hconcat(tables: &[&Table]) -> Result<Table> {
        let rows = tables.first().map_or(0, |t| t.rows);
        if tables.iter().any(|t| t.rows != rows) {
            return Err(Error::input(
                "cannot concatenate tables with different row counts",
            ));
        }
        let cols = tables.iter().map(|t| t.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for t in tables {
                data.extend_from_slice(t.row(i));
            }
        }
        Ok(Table { rows, cols, data })
    }
}

/// Maps a real score to a label; a score of exactly zero predicts +1.
pub fn sign_label(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

/// `m` labeled observations, each described by `V >= 2` views.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiviewDataset {
    views: Vec<Table>,
    labels: Vec<i8>,
    view_names: Vec<String>,
}

impl MultiviewDataset {
    pub fn new(views: Vec<Table>, labels: Vec<i8>, view_names: Vec<String>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::input(format!(
                "a multiview dataset needs at least 2 views, got {}",
                views.len()
            )));
        }
        if view_names.len() != views.len() {
            return Err(Error::input(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::input("dataset has no observations"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::input(format!("label {bad} is not in {{-1,+1}}")));
        }
        for (v, t) in views.iter().enumerate() {
            if t.n_rows() != labels.len() {
                return Err(Error::input(format!(
                    "view {v} has {} rows but there are {} labels",
                    t.n_rows(),
                    labels.len()
                )));
            }
            if t.n_cols() == 0 {
                return Err(Error::input(format!("view {v} has no features")));
            }
        }
        Ok(MultiviewDataset {
            views,
            labels,
            view_names,
        })
    }

    /// Names the views `view_0`, `view_1`, ...
    pub fn with_default_names(views: Vec<Table>, labels: Vec<i8>) -> Result<Self> {
        let names = (0..views.len()).map(|v| format!("view_{v}")).collect();
        Self::new(views, labels, names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> &Table {
        &self.views[v]
    }

    pub fn views(&self) -> &[Table] {
        &self.views
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Table::n_cols).collect()
    }

    /// The `i`-th observation as one slice per view.
    pub fn observation(&self, i: usize) -> Vec<&[f64]> {
        self.views.iter().map(|t| t.row(i)).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let views = self.views.iter().map(|t| t.select_rows(idx)).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(views, labels, self.view_names.clone())
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// Voter weights `pi[v][j]` and view weights `rho[v]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteWeights {
    pub pi: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
}

impl VoteWeights {
    /// `rho = 1/V`, `pi_v = 1/n_v` for each view.
    pub fn uniform(pool_sizes: &[usize]) -> Self {
        let v = pool_sizes.len() as f64;
        VoteWeights {
            pi: pool_sizes
                .iter()
                .map(|&n| vec![1.0 / n as f64; n])
                .collect(),
            rho: vec![1.0 / v; pool_sizes.len()],
        }
    }

    pub fn n_views(&self) -> usize {
        self.rho.len()
    }

    pub fn pool_sizes(&self) -> Vec<usize> {
        self.pi.iter().map(Vec::len).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.rho
            .iter()
            .chain(self.pi.iter().flatten())
            .all(|x| x.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.pi.len() != self.rho.len() {
            return Err(Error::input(format!(
                "{} voter-weight vectors for {} view weights",
                self.pi.len(),
                self.rho.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::numeric("vote weights contain non-finite values"));
        }
        if self.rho.iter().any(|&r| r < 0.0) {
            return Err(Error::input("view weights must be non-negative"));
        }
        let total: f64 = self.rho.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("view weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Per-view sign tables `(M_v)_{ij} = y_i h_{v,j}(x_i^v)`, stored by column.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginMatrix {
    m: usize,
    // columns[v][j][i]
    columns: Vec<Vec<Vec<i8>>>,
}

impl MarginMatrix {
    /// Builds the matrix from per-view columns of length `m` with entries in {-1,+1}.
    pub fn from_columns(columns: Vec<Vec<Vec<i8>>>) -> Result<Self> {
        let m = columns
            .first()
            .and_then(|cols| cols.first())
            .map(Vec::len)
            .ok_or_else(|| Error::input("margin matrix needs at least one view and one voter"))?;
        if m == 0 {
            return Err(Error::input("margin matrix has no rows"));
        }
        for (v, cols) in columns.iter().enumerate() {
            if cols.is_empty() {
                return Err(Error::input(format!("view {v} has no voters")));
            }
            for col in cols {
                if col.len() != m {
                    return Err(Error::input(format!(
                        "view {v} column has {} rows, expected {m}",
                        col.len()
                    )));
                }
                if col.iter().any(|&e| e != 1 && e != -1) {
                    return Err(Error::input("margin entries must be -1 or +1"));
                }
            }
        }
        Ok(MarginMatrix { m, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_views(&self) -> usize {
        self.columns.len()
    }

    pub fn pool_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(Vec::len).collect()
    }

    pub fn view_columns(&self, v: usize) -> &[Vec<i8>] {
        &self.columns[v]
    }

    pub fn entry(&self, v: usize, i: usize, j: usize) -> i8 {
        self.columns[v][j][i]
    }

    pub fn check_weights(&self, w: &VoteWeights) -> Result<()> {
        if w.pool_sizes() != self.pool_sizes() || w.rho.len() != self.n_views() {
            return Err(Error::input(format!(
                "weights shaped {:?} do not match margin matrix pools {:?}",
                w.pool_sizes(),
                self.pool_sizes()
            )));
        }
        Ok(())
    }

    /// `z_i = sum_v rho_v sum_j pi_{v,j} (M_v)_{ij}`, i.e. `y_i * B(x_i)`.
    pub fn margins(&self, w: &VoteWeights) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        let mut z = vec![0.0; self.m];
        let mut inner = vec![0.0; self.m];
        for (v, cols) in self.columns.iter().enumerate() {
            inner.iter_mut().for_each(|x| *x = 0.0);
            for (col, &pi) in cols.iter().zip(&w.pi[v]) {
                for (acc, &e) in inner.iter_mut().zip(col) {
                    *acc += pi * f64::from(e);
                }
            }
            for (zi, &s) in z.iter_mut().zip(&inner) {
                *zi += w.rho[v] * s;
            }
        }
        Ok(z)
    }

    /// Reorders the views; used for equivariance checks.
    pub fn permute_views(&self, order: &[usize]) -> Self {
        MarginMatrix {
            m: self.m,
            columns: order.iter().map(|&v| self.columns[v].clone()).collect(),
        }
    }
}

/// Training settings carried along with a model for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub iterations: usize,
    pub epsilon: f64,
    pub rho_solver: RhoSolver,
    #[serde(default)]
    pub update_rule: UpdateRule,
    pub seed: u64,
    pub depths: Vec<usize>,
}

/// The double-weighted majority vote `B(x) = sum_v rho_v sum_j pi_{v,j} h_{v,j}(x^v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MvModel {
    pub view_names: Vec<String>,
    pub pool: VoterPool,
    pub weights: VoteWeights,
    pub metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    #[serde(rename = "V")]
    n_views: usize,
    view_names: Vec<String>,
    view_dims: Vec<usize>,
    trees: Vec<Vec<DecisionTree>>,
    pi: Vec<Vec<f64>>,
    rho: Vec<f64>,
    metadata: ModelMetadata,
}

impl MvModel {
    pub fn new(
        view_names: Vec<String>,
        pool: VoterPool,
        weights: VoteWeights,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let model = MvModel {
            view_names,
            pool,
            weights,
            metadata,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let v = self.pool.n_views();
        if self.weights.n_views() != v || self.view_names.len() != v {
            return Err(Error::input(format!(
                "model has {v} tree pools, {} view weights and {} view names",
                self.weights.n_views(),
                self.view_names.len()
            )));
        }
        if self.pool.pool_sizes() != self.weights.pool_sizes() {
            return Err(Error::input(format!(
                "pool sizes {:?} do not match voter weights {:?}",
                self.pool.pool_sizes(),
                self.weights.pool_sizes()
            )));
        }
        if !self.weights.is_finite() {
            return Err(Error::numeric("model weights are not finite"));
        }
        Ok(())
    }

    pub fn n_views(&self) -> usize {
        self.pool.n_views()
    }

    /// Weighted vote for one observation given as one feature slice per view.
    pub fn vote_score(&self, x: &[&[f64]]) -> Result<f64> {
        if x.len() != self.n_views() {
            return Err(Error::input(format!(
                "observation has {} views, model expects {}",
                x.len(),
                self.n_views()
            )));
        }
        let mut score = 0.0;
        for (v, xv) in x.iter().enumerate() {
            if xv.len() != self.pool.view_dims()[v] {
                return Err(Error::input(format!(
                    "view {v} has {} features, model expects {}",
                    xv.len(),
                    self.pool.view_dims()[v]
                )));
            }
            let inner: f64 = self
                .pool
                .trees(v)
                .iter()
                .zip(&self.weights.pi[v])
                .map(|(h, &pi)| pi * f64::from(h.predict(xv)))
                .sum();
            score += self.weights.rho[v] * inner;
        }
        Ok(score)
    }

    pub fn predict(&self, x: &[&[f64]]) -> Result<i8> {
        self.vote_score(x).map(sign_label)
    }

    /// Scores for every row of per-view tables (which may be empty).
    pub fn scores(&self, views: &[Table]) -> Result<Vec<f64>> {
        if views.len() != self.n_views() {
            return Err(Error::input(format!(
                "data has {} views, model expects {}",
                views.len(),
                self.n_views()
            )));
        }
        let m = views[0].n_rows();
        if views.iter().any(|t| t.n_rows() != m) {
            return Err(Error::input("views have different row counts"));
        }
        (0..m)
            .map(|i| {
                let x: Vec<&[f64]> = views.iter().map(|t| t.row(i)).collect();
                self.vote_score(&x)
            })
            .collect()
    }

    /// Per-observation margins `y_i B(x_i)`.
    pub fn margins(&self, data: &MultiviewDataset) -> Result<Vec<f64>> {
        let scores = self.scores(data.views())?;
        Ok(scores
            .iter()
            .zip(data.labels())
            .map(|(s, &y)| f64::from(y) * s)
            .collect())
    }

    /// Fraction of observations with `y_i B(x_i) <= 0`.
    pub fn zero_one_risk(&self, data: &MultiviewDataset) -> Result<f64> {
        Ok(zero_one_from_margins(&self.margins(data)?))
    }

    /// `(a/m) sum_i ln(1 + exp(-y_i B(x_i)))` with `a = 1/ln 2`.
    pub fn logistic_risk(&self, data: &MultiviewDataset) -> Result<f64> {
        Ok(logistic_from_margins(&self.margins(data)?))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            n_views: self.n_views(),
            view_names: self.view_names.clone(),
            view_dims: self.pool.view_dims().to_vec(),
            trees: self.pool.all_trees().to_vec(),
            pi: self.weights.pi.clone(),
            rho: self.weights.rho.clone(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        if doc.n_views != doc.trees.len() {
            return Err(Error::input(format!(
                "model declares V={} but stores {} tree pools",
                doc.n_views,
                doc.trees.len()
            )));
        }
        let pool = VoterPool::new(doc.trees, doc.view_dims)?;
        Self::new(
            doc.view_names,
            pool,
            VoteWeights {
                pi: doc.pi,
                rho: doc.rho,
            },
            doc.metadata,
        )
    }
}

pub(crate) fn zero_one_from_margins(margins: &[f64]) -> f64 {
    let errors = margins.iter().filter(|&&z| z <= 0.0).count();
    errors as f64 / margins.len() as f64
}

pub(crate) fn logistic_from_margins(margins: &[f64]) -> f64 {
    let a = 1.0 / std::f64::consts::LN_2;
    let total: f64 = margins.iter().map(|&z| crate::bregman::softplus(-z)).sum();
    a * total / margins.len() as f64
}
