//! Metrics, baselines and experiment runners.

mod baselines;
mod runner;

pub use baselines::{baseline_depth, fit_method, Fitted, Method};
pub use runner::{
    class_curve, learning_curve, run_repetition, AggregateRow, Curve, CurveRow, ExperimentConfig,
    RepOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(pred: &[i8], labels: &[i8]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::input(format!(
            "{} predictions for {} labels",
            pred.len(),
            labels.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::input("cannot score an empty evaluation set"));
    }
    Ok(())
}

pub fn accuracy(pred: &[i8], labels: &[i8]) -> Result<f64> {
    check_lengths(pred, labels)?;
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// F1 on the +1 class; 0 when there are no true positives.
pub fn f1_score(pred: &[i8], labels: &[i8]) -> Result<f64> {
    check_lengths(pred, labels)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &y) in pred.iter().zip(labels) {
        match (p == 1, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1: f64,
}

impl Scores {
    pub fn compute(pred: &[i8], labels: &[i8]) -> Result<Self> {
        Ok(Scores {
            accuracy: accuracy(pred, labels)?,
            f1: f1_score(pred, labels)?,
        })
    }
}

/// Sample mean and standard deviation (denominator `n - 1`; `None` for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Per-repetition scores with their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub reps: Vec<Scores>,
    pub accuracy_mean: f64,
    pub accuracy_std: Option<f64>,
    pub f1_mean: f64,
    pub f1_std: Option<f64>,
}

impl MetricReport {
    pub fn from_reps(reps: Vec<Scores>) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::input("no repetitions to summarise"));
        }
        let acc: Vec<f64> = reps.iter().map(|s| s.accuracy).collect();
        let f1: Vec<f64> = reps.iter().map(|s| s.f1).collect();
        let (accuracy_mean, accuracy_std) = mean_std(&acc);
        let (f1_mean, f1_std) = mean_std(&f1);
        Ok(MetricReport {
            reps,
            accuracy_mean,
            accuracy_std,
            f1_mean,
            f1_std,
        })
    }
}
