use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MultiviewDataset, Table};

/// Parameters of the synthetic multiview generator.
///
/// The first `views - noise_views` views are informative: each feature is
/// `y * separation + sqrt(r) * s + sqrt(1 - r) * e` where `s` is a latent
/// vector shared by all informative views of an observation, `e` is private
/// to the view and `r` is the redundancy. The remaining views are pure
/// label-independent Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub m: usize,
    pub views: usize,
    pub dim: usize,
    pub redundancy: f64,
    pub noise_views: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            m: 200,
            views: 3,
            dim: 5,
            redundancy: 0.3,
            noise_views: 1,
            separation: 0.5,
            seed: 0,
        }
    }
}

pub fn synth_multiview(p: &SynthParams) -> Result<MultiviewDataset> {
    if p.m == 0 {
        return Err(Error::input("synthetic dataset needs m >= 1"));
    }
    if p.views < 2 || p.dim == 0 {
        return Err(Error::input(
            "synthetic dataset needs at least 2 views of dimension >= 1",
        ));
    }
    if p.noise_views >= p.views {
        return Err(Error::input(format!(
            "noise_views ({}) must be smaller than views ({})",
            p.noise_views, p.views
        )));
    }
    if !(0.0..=1.0).contains(&p.redundancy) || !p.separation.is_finite() {
        return Err(Error::input(
            "redundancy must lie in [0,1] and separation be finite",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut labels: Vec<i8> = (0..p.m)
        .map(|i| if i < p.m.div_ceil(2) { 1 } else { -1 })
        .collect();
    labels.shuffle(&mut rng);

    let informative = p.views - p.noise_views;
    let (a, b) = (p.redundancy.sqrt(), (1.0 - p.redundancy).sqrt());
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(p.m * p.dim); p.views];
    for &y in &labels {
        let shared: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
        for (v, out) in data.iter_mut().enumerate() {
            for s in &shared {
                let e: f64 = rng.sample(StandardNormal);
                if v < informative {
                    out.push(f64::from(y) * p.separation + a * s + b * e);
                } else {
                    out.push(e);
                }
            }
        }
    }
    let views = data
        .into_iter()
        .map(|d| Table::new(p.m, p.dim, d))
        .collect::<Result<Vec<_>>>()?;
    let names = (0..p.views)
        .map(|v| {
            if v < informative {
                format!("informative_{v}")
            } else {
                format!("noise_{v}")
            }
        })
        .collect();
    MultiviewDataset::new(views, labels, names)
}
