use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::MulticlassDataset;
use crate::error::{Error, Result};
use crate::model::MultiviewDataset;

/// Binary task with `positive` as +1 and every other class as -1.
pub fn one_vs_rest(data: &MulticlassDataset, positive: &str) -> Result<MultiviewDataset> {
    if !data.classes.iter().any(|c| c == positive) {
        return Err(Error::input(format!(
            "class {positive:?} does not occur in the labels"
        )));
    }
    let labels = data
        .classes
        .iter()
        .map(|c| if c == positive { 1 } else { -1 })
        .collect();
    MultiviewDataset::new(data.views.clone(), labels, data.view_names.clone())
}

/// `k` distinct indices from `0..n`, uniformly at random, in ascending order.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::input(format!("cannot sample {k} of {n} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Random train/test split of `0..n`; both parts are non-empty and sorted.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::input(format!(
            "test fraction {test_fraction} is outside (0,1)"
        )));
    }
    if n < 2 {
        return Err(Error::input("need at least 2 observations to split"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let test = sample_indices(n, n_test, seed)?;
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

/// Keeps every positive and at most `ratio * positives` negatives, drawn
/// uniformly without replacement. Original order is preserved.
pub fn balance_negatives(
    data: &MultiviewDataset,
    ratio: f64,
    seed: u64,
) -> Result<MultiviewDataset> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::input(format!(
            "negative:positive ratio {ratio} must be > 0"
        )));
    }
    let pos: Vec<usize> = (0..data.n_samples())
        .filter(|&i| data.labels()[i] == 1)
        .collect();
    let neg: Vec<usize> = (0..data.n_samples())
        .filter(|&i| data.labels()[i] == -1)
        .collect();
    if pos.is_empty() {
        return Err(Error::input("task has no positive examples"));
    }
    let keep = ((pos.len() as f64 * ratio).round() as usize).max(1);
    if neg.len() <= keep {
        return Ok(data.clone());
    }
    let chosen = sample_indices(neg.len(), keep, seed)?;
    let mut idx: Vec<usize> = pos
        .iter()
        .copied()
        .chain(chosen.iter().map(|&k| neg[k]))
        .collect();
    idx.sort_unstable();
    data.subset(&idx)
}

/// One-vs-rest task on training data with negatives subsampled 1:1.
pub fn make_task(data: &MulticlassDataset, positive: &str, seed: u64) -> Result<MultiviewDataset> {
    balance_negatives(&one_vs_rest(data, positive)?, 1.0, seed)
}
