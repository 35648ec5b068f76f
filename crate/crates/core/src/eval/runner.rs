use std::fmt::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{fit_method, Method};
use super::{mean_std, MetricReport, Scores};
use crate::data::{
    balance_negatives, one_vs_rest, sample_indices, split_indices, MulticlassDataset,
};
use crate::error::{Error, Result};
use crate::model::MultiviewDataset;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Depth schedule of the voter pool; `None` uses the default for the
    /// training size.
    pub depths: Option<Vec<usize>>,
    /// Depth of single-tree baselines; `None` uses `ceil(log2 m) + 1`.
    pub baseline_depth: Option<usize>,
    /// Share of the data held out for testing in each repetition.
    pub test_fraction: f64,
    /// Subsample negatives of the training portion down to the number of
    /// positives.
    pub balance_train: bool,
    /// Share of the training set used for the view trees of `fusion`.
    pub fusion_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            depths: None,
            baseline_depth: None,
            test_fraction: 0.3,
            balance_train: true,
            fusion_fraction: 0.6,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for (name, f) in [
            ("test_fraction", self.test_fraction),
            ("fusion_fraction", self.fusion_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::input(format!("{name} must lie in (0,1), got {f}")));
            }
        }
        if let Some(d) = &self.depths {
            if d.is_empty() || d.contains(&0) {
                return Err(Error::input(
                    "depths must be a non-empty list of positive integers",
                ));
            }
        }
        if self.baseline_depth == Some(0) {
            return Err(Error::input("baseline_depth must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub method: Method,
    pub m: usize,
    pub rep: usize,
    pub scores: Scores,
    pub rho: Option<Vec<f64>>,
}

/// One repetition: a random train/test split, optional balancing of the
/// training part, then for each size a random training sample on which every
/// method is fit and scored against the test part.
pub fn run_repetition(
    data: &MultiviewDataset,
    sizes: &[usize],
    methods: &[Method],
    cfg: &ExperimentConfig,
    seed: u64,
    rep: usize,
) -> Result<Vec<RepOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (split_seed, balance_seed, sample_seed, method_seed) = (
        rng.next_u64(),
        rng.next_u64(),
        rng.next_u64(),
        rng.next_u64(),
    );
    let (train_idx, test_idx) = split_indices(data.n_samples(), cfg.test_fraction, split_seed)?;
    let mut pool = data.subset(&train_idx)?;
    if cfg.balance_train {
        pool = balance_negatives(&pool, 1.0, balance_seed)?;
    }
    let test = data.subset(&test_idx)?;

    let mut out = Vec::with_capacity(sizes.len() * methods.len());
    for &m in sizes {
        if m > pool.n_samples() || m == 0 {
            return Err(Error::input(format!(
                "training size {m} is not available: repetition {rep} has {} training examples",
                pool.n_samples()
            )));
        }
        let idx = sample_indices(pool.n_samples(), m, sample_seed.wrapping_add(m as u64))?;
        let train = pool.subset(&idx)?;
        for &method in methods {
            let fitted = fit_method(method, &train, cfg, method_seed)?;
            let pred = fitted.predict(test.views())?;
            out.push(RepOutcome {
                method,
                m,
                rep,
                scores: Scores::compute(&pred, test.labels())?,
                rho: fitted.rho().map(<[f64]>::to_vec),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: Method,
    pub m: usize,
    pub rep: usize,
    pub accuracy: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub m: usize,
    pub reps: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: Option<f64>,
    pub f1_mean: f64,
    pub f1_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub rows: Vec<CurveRow>,
    pub aggregate: Vec<AggregateRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Curve {
    /// Groups rows by `(method, m)` in order of first appearance.
    pub fn from_rows(rows: Vec<CurveRow>) -> Curve {
        let mut keys: Vec<(Method, usize)> = Vec::new();
        for r in &rows {
            if !keys.contains(&(r.method, r.m)) {
                keys.push((r.method, r.m));
            }
        }
        let aggregate = keys
            .into_iter()
            .map(|(method, m)| {
                let group: Vec<&CurveRow> = rows
                    .iter()
                    .filter(|r| r.method == method && r.m == m)
                    .collect();
                let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
                let f1: Vec<f64> = group.iter().map(|r| r.f1).collect();
                let (accuracy_mean, accuracy_std) = mean_std(&acc);
                let (f1_mean, f1_std) = mean_std(&f1);
                AggregateRow {
                    method,
                    m,
                    reps: group.len(),
                    accuracy_mean,
                    accuracy_std,
                    f1_mean,
                    f1_std,
                }
            })
            .collect();
        Curve { rows, aggregate }
    }

    pub fn report(&self, method: Method, m: usize) -> Result<MetricReport> {
        MetricReport::from_reps(
            self.rows
                .iter()
                .filter(|r| r.method == method && r.m == m)
                .map(|r| Scores {
                    accuracy: r.accuracy,
                    f1: r.f1,
                })
                .collect(),
        )
    }

    pub fn mean_accuracy(&self, method: Method, m: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|a| a.method == method && a.m == m)
            .map(|a| a.accuracy_mean)
    }

    pub fn raw_csv(&self) -> String {
        let mut s = String::from("method,m,rep,accuracy,f1\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.method, r.m, r.rep, r.accuracy, r.f1);
        }
        s
    }

    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("method,m,reps,accuracy_mean,accuracy_std,f1_mean,f1_std\n");
        for a in &self.aggregate {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                a.method,
                a.m,
                a.reps,
                a.accuracy_mean,
                opt(a.accuracy_std),
                a.f1_mean,
                opt(a.f1_std)
            );
        }
        s
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.aggregate)?)
    }

    /// Writes `curve_raw.csv`, `curve_aggregate.csv` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("curve_raw.csv", self.raw_csv()),
            ("curve_aggregate.csv", self.aggregate_csv()),
            ("summary.json", self.summary_json()? + "\n"),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn check_request(
    n: usize,
    sizes: &[usize],
    reps: usize,
    methods: &[Method],
    cfg: &ExperimentConfig,
) -> Result<()> {
    cfg.validate()?;
    if sizes.is_empty() || methods.is_empty() || reps == 0 {
        return Err(Error::input(
            "need at least one size, one method and one repetition",
        ));
    }
    let n_test =
        ((n as f64 * cfg.test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let limit = n.saturating_sub(n_test);
    if let Some(&bad) = sizes.iter().find(|&&m| m > limit || m == 0) {
        return Err(Error::input(format!(
            "training size {bad} is not available: at most {limit} of {n} examples remain after the test split"
        )));
    }
    Ok(())
}

/// Scores every method at every size over `reps` repetitions. Repetition
/// `r` uses seed `seed + r`, so results do not depend on scheduling.
pub fn learning_curve(
    data: &MultiviewDataset,
    sizes: &[usize],
    reps: usize,
    methods: &[Method],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Curve> {
    check_request(data.n_samples(), sizes, reps, methods, cfg)?;
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| run_repetition(data, sizes, methods, cfg, seed.wrapping_add(r as u64), r))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(reps * sizes.len() * methods.len());
    for &method in methods {
        for &m in sizes {
            for outcomes in &per_rep {
                let o = outcomes
                    .iter()
                    .find(|o| o.method == method && o.m == m)
                    .expect("every repetition covers every method and size");
                rows.push(CurveRow {
                    method,
                    m,
                    rep: o.rep,
                    accuracy: o.scores.accuracy,
                    f1: o.scores.f1,
                    rho: o.rho.clone(),
                });
            }
        }
    }
    Ok(Curve::from_rows(rows))
}

/// One-vs-rest curves for each class, macro-averaged: each row holds the
/// mean over classes for one `(method, m, rep)`.
pub fn class_curve(
    data: &MulticlassDataset,
    classes: &[String],
    sizes: &[usize],
    reps: usize,
    methods: &[Method],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Curve> {
    if classes.is_empty() {
        return Err(Error::input("no classes selected"));
    }
    let curves = classes
        .iter()
        .map(|c| learning_curve(&one_vs_rest(data, c)?, sizes, reps, methods, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let k = curves.len() as f64;
    let rows = (0..curves[0].rows.len())
        .map(|i| {
            let first = &curves[0].rows[i];
            CurveRow {
                method: first.method,
                m: first.m,
                rep: first.rep,
                accuracy: curves.iter().map(|c| c.rows[i].accuracy).sum::<f64>() / k,
                f1: curves.iter().map(|c| c.rows[i].f1).sum::<f64>() / k,
                rho: None,
            }
        })
        .collect();
    Ok(Curve::from_rows(rows))
}
