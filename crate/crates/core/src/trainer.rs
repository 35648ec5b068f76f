//! Parallel-update training of the voter weights `pi` and view weights `rho`
//! by minimising `D_F(0 || q)`.
//!
//! Each iteration computes `q` from the current weights, the per-voter
//! statistics `W+`/`W-`, the additive voter update `delta`, and the new view
//! weights from the per-view scores `sum_j (sqrt(W+) - sqrt(W-))^2`.
//! Weak classifiers are fixed before the first iteration.
//!
//! The loop body produces `rho^(t+1), pi^(t+1)`; after `T` iterations the
//! weights from the last completed body are returned.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bregman::{objective_from_margins, QVector};
use crate::error::{Error, Result};
use crate::model::{MarginMatrix, ModelMetadata, MultiviewDataset, MvModel, VoteWeights};
use crate::tree::{margin_matrix, VoterPool};

/// Slack allowed when checking that the objective does not increase.
pub const DESCENT_TOLERANCE: f64 = 1e-9;

/// How the view weights are chosen from the per-view scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoSolver {
    /// Exact minimiser of the linear objective: a simplex vertex on the best
    /// view, uniform over exact ties.
    ExactVertex,
    /// `rho_v ∝ exp(score_v / lambda)`. `None` uses `lambda = mean(scores) + 1e-12`.
    Entropic { lambda: Option<f64> },
}

impl Default for RhoSolver {
    fn default() -> Self {
        RhoSolver::Entropic { lambda: None }
    }
}

/// How an iteration turns `delta` and the view weights into new weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Each view's margin columns are scaled by `1/n_v` (so every row of the
    /// stacked, `rho`-weighted matrix has unit l1 norm) and the step is
    /// composed onto the current point: the coefficient of `h_{v,j}` grows by
    /// `rho_step_v * delta_{v,j} / n_v`. Under this rule
    /// `D_F(0||q^(t+1)) - D_F(0||q^(t)) <= A^(t) <= 0` holds for every
    /// iteration, so the objective never increases.
    #[default]
    Bounded,
    /// `pi_v <- pi_v + delta_v` on unscaled statistics and `rho` replaced by
    /// the solver output. No descent guarantee: correlated voters overshoot
    /// and re-weighting the old votes by the new `rho` can raise the loss.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Number of iterations `T`.
    pub iterations: usize,
    /// Smoothing added to both `W+` and `W-` before taking the log ratio.
    /// `None` means `1 / (2m)`.
    pub epsilon: Option<f64>,
    pub rho_solver: RhoSolver,
    pub seed: u64,
    /// Stop early once an iteration lowers the objective by less than this.
    /// Zero disables early stopping.
    pub tolerance: f64,
    pub update_rule: UpdateRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2,
            epsilon: None,
            rho_solver: RhoSolver::default(),
            seed: 0,
            tolerance: 0.0,
            update_rule: UpdateRule::Bounded,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::input("iterations must be at least 1"));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::input(format!(
                    "epsilon must be finite and >= 0, got {eps}"
                )));
            }
        }
        if let RhoSolver::Entropic { lambda: Some(l) } = self.rho_solver {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::input(format!(
                    "entropic lambda must be > 0, got {l}"
                )));
            }
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::input("tolerance must be >= 0"));
        }
        Ok(())
    }

    pub fn epsilon_for(&self, m: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / (2.0 * m as f64))
    }
}

/// One pass of the loop body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `q^(t)`, computed from the weights entering this iteration.
    pub q: Vec<f64>,
    /// `D_F(0 || q^(t))`.
    pub objective_before: f64,
    /// `D_F(0 || q^(t+1))` after both `pi` and `rho` are updated.
    pub objective_after: f64,
    /// `W+` / `W-` as used by the update (scaled by `1/n_v` under
    /// [`UpdateRule::Bounded`]).
    pub w_plus: Vec<Vec<f64>>,
    pub w_minus: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    /// `sum_j (sqrt(W+) - sqrt(W-))^2` per view on the unscaled statistics.
    pub raw_view_scores: Vec<f64>,
    /// The same aggregate on the statistics used by the update; these are
    /// the scores handed to the view-weight solver.
    pub view_scores: Vec<f64>,
    /// `A^(t) = -sum_v rho_step_v view_scores_v`.
    pub bound: f64,
    /// Solution of the view-weight problem for this iteration.
    pub rho_step: Vec<f64>,
    /// Model weights after the iteration.
    pub pi: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    /// Wall time of the iteration in microseconds; not serialised so that
    /// traces stay byte-reproducible.
    #[serde(skip)]
    pub elapsed_us: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<IterationRecord>,
}

impl TrainTrace {
    /// `D_F(0||q^(1)), D_F(0||q^(2)), ...` including the final point.
    pub fn objectives(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.objective_before).collect();
        if let Some(last) = self.records.last() {
            out.push(last.objective_after);
        }
        out
    }

    /// Largest single-iteration increase of the objective (negative when
    /// every iteration decreased it).
    pub fn max_increase(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.objective_after - r.objective_before)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records
            .iter()
            .all(|r| r.objective_after <= r.objective_before + tol)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective_after)
    }

    /// One JSON object per line, one line per iteration.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TrainTrace { records })
    }
}

/// `W+_j` and `W-_j`: sums of `q_i` over rows where column `j` is +1 / -1.
/// Rows are accumulated in ascending order.
pub fn weight_stats(columns: &[Vec<i8>], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut plus = Vec::with_capacity(columns.len());
    let mut minus = Vec::with_capacity(columns.len());
    for col in columns {
        if col.len() != q.len() {
            return Err(Error::input(format!(
                "margin column of length {} against q of length {}",
                col.len(),
                q.len()
            )));
        }
        let (mut wp, mut wm) = (0.0, 0.0);
        for (&e, &qi) in col.iter().zip(q) {
            if e > 0 {
                wp += qi;
            } else {
                wm += qi;
            }
        }
        plus.push(wp);
        minus.push(wm);
    }
    Ok((plus, minus))
}

/// `delta = 1/2 ln((W+ + eps) / (W- + eps))`.
pub fn delta_update(w_plus: f64, w_minus: f64, epsilon: f64) -> Result<f64> {
    if !(w_plus >= 0.0 && w_minus >= 0.0) {
        return Err(Error::numeric(format!(
            "weight statistics must be non-negative, got W+={w_plus}, W-={w_minus}"
        )));
    }
    let (num, den) = (w_plus + epsilon, w_minus + epsilon);
    if num == 0.0 || den == 0.0 {
        return Err(Error::numeric(format!(
            "cannot take ln({num}/{den}); enable smoothing with epsilon > 0"
        )));
    }
    Ok(0.5 * (num / den).ln())
}

/// Per-view score `sum_j (sqrt(W+_j) - sqrt(W-_j))^2`.
pub fn view_score(w_plus: &[f64], w_minus: &[f64]) -> f64 {
    w_plus
        .iter()
        .zip(w_minus)
        .map(|(p, m)| (p.sqrt() - m.sqrt()).powi(2))
        .sum()
}

/// New view weights minimising `-sum_v rho_v scores_v` over the simplex
/// (exactly, or with an entropy regulariser).
pub fn solve_rho(scores: &[f64], solver: RhoSolver) -> Result<Vec<f64>> {
    let v = scores.len();
    if v == 0 {
        return Err(Error::input("no view scores"));
    }
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::numeric(format!("invalid view scores {scores:?}")));
    }
    if scores.iter().all(|&s| s == 0.0) {
        return Ok(vec![1.0 / v as f64; v]);
    }
    match solver {
        RhoSolver::ExactVertex => {
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties = scores.iter().filter(|&&s| s == best).count() as f64;
            Ok(scores
                .iter()
                .map(|&s| if s == best { 1.0 / ties } else { 0.0 })
                .collect())
        }
        RhoSolver::Entropic { lambda } => {
            let lambda = lambda.unwrap_or_else(|| scores.iter().sum::<f64>() / v as f64 + 1e-12);
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores
                .iter()
                .map(|&s| ((s - best) / lambda).exp())
                .collect();
            let total: f64 = e.iter().sum();
            Ok(e.into_iter().map(|x| x / total).collect())
        }
    }
}

/// `A = -sum_v rho_v scores_v`, the guaranteed-decrease bound of an iteration.
pub fn compute_bound(rho_next: &[f64], scores: &[f64]) -> f64 {
    -rho_next.iter().zip(scores).map(|(r, s)| r * s).sum::<f64>()
}

struct ViewUpdate {
    w_plus: Vec<f64>,
    w_minus: Vec<f64>,
    delta: Vec<f64>,
    raw_score: f64,
    score: f64,
}

fn abort(reason: String, records: Vec<IterationRecord>) -> Error {
    Error::TrainingAborted {
        reason,
        trace: Box::new(TrainTrace { records }),
    }
}

/// Writes per-voter vote coefficients `c_{v,j}` (the weight of `h_{v,j}` in
/// the final vote) as `rho_v * pi_{v,j}`, with `rho_v` the view's share of
/// the total absolute coefficient mass.
pub fn canonical_weights(coef: &[Vec<f64>]) -> VoteWeights {
    let mass: Vec<f64> = coef
        .iter()
        .map(|c| c.iter().map(|x| x.abs()).sum())
        .collect();
    let total: f64 = mass.iter().sum();
    if total == 0.0 {
        return VoteWeights {
            pi: coef.iter().map(|c| vec![0.0; c.len()]).collect(),
            rho: vec![1.0 / coef.len() as f64; coef.len()],
        };
    }
    let rho: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let pi = coef
        .iter()
        .zip(&rho)
        .map(|(c, &r)| {
            c.iter()
                .map(|&x| if r > 0.0 { x / r } else { 0.0 })
                .collect()
        })
        .collect();
    VoteWeights { pi, rho }
}

/// Runs the parallel-update iterations on a fixed margin matrix, starting
/// from uniform weights.
pub fn fit_margins(mm: &MarginMatrix, cfg: &TrainConfig) -> Result<(VoteWeights, TrainTrace)> {
    cfg.validate()?;
    let eps = cfg.epsilon_for(mm.n_rows());
    let sizes = mm.pool_sizes();
    let mut w = VoteWeights::uniform(&sizes);
    let mut coef: Vec<Vec<f64>> =
        w.pi.iter()
            .zip(&w.rho)
            .map(|(pi, r)| pi.iter().map(|p| r * p).collect())
            .collect();
    let mut records: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);

    let mut z = mm.margins(&w)?;
    let mut current = objective_from_margins(&z)?;
    for t in 1..=cfg.iterations {
        let start = Instant::now();
        let q = QVector::from_margins(&z);

        let updates = (0..mm.n_views())
            .into_par_iter()
            .map(|v| -> Result<ViewUpdate> {
                let (mut w_plus, mut w_minus) = weight_stats(mm.view_columns(v), q.values())?;
                let raw_score = view_score(&w_plus, &w_minus);
                if cfg.update_rule == UpdateRule::Bounded {
                    // rows of M_v / n_v have unit l1 norm
                    let scale = 1.0 / sizes[v] as f64;
                    w_plus.iter_mut().for_each(|x| *x *= scale);
                    w_minus.iter_mut().for_each(|x| *x *= scale);
                }
                let delta = w_plus
                    .iter()
                    .zip(&w_minus)
                    .map(|(&p, &m)| delta_update(p, m, eps))
                    .collect::<Result<Vec<_>>>()?;
                let score = view_score(&w_plus, &w_minus);
                Ok(ViewUpdate {
                    w_plus,
                    w_minus,
                    delta,
                    raw_score,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>();
        let updates = match updates {
            Ok(u) => u,
            Err(e) => return Err(abort(format!("iteration {t}: {e}"), records)),
        };

        let scores: Vec<f64> = updates.iter().map(|u| u.score).collect();
        let rho_step = match solve_rho(&scores, cfg.rho_solver) {
            Ok(r) => r,
            Err(e) => return Err(abort(format!("iteration {t}: {e}"), records)),
        };
        let bound = compute_bound(&rho_step, &scores);

        match cfg.update_rule {
            UpdateRule::Bounded => {
                for (v, u) in updates.iter().enumerate() {
                    let step = rho_step[v] / sizes[v] as f64;
                    for (c, d) in coef[v].iter_mut().zip(&u.delta) {
                        *c += step * d;
                    }
                }
                w = canonical_weights(&coef);
            }
            UpdateRule::Literal => {
                for (pi_v, u) in w.pi.iter_mut().zip(&updates) {
                    for (p, d) in pi_v.iter_mut().zip(&u.delta) {
                        *p += d;
                    }
                }
                w.rho = rho_step.clone();
            }
        }

        if !w.is_finite() {
            return Err(abort(
                format!("iteration {t}: weights became non-finite"),
                records,
            ));
        }
        z = mm.margins(&w)?;
        let next = match objective_from_margins(&z) {
            Ok(o) => o,
            Err(e) => return Err(abort(format!("iteration {t}: {e}"), records)),
        };

        records.push(IterationRecord {
            t,
            q: q.values().to_vec(),
            objective_before: current,
            objective_after: next,
            w_plus: updates.iter().map(|u| u.w_plus.clone()).collect(),
            w_minus: updates.iter().map(|u| u.w_minus.clone()).collect(),
            delta: updates.iter().map(|u| u.delta.clone()).collect(),
            raw_view_scores: updates.iter().map(|u| u.raw_score).collect(),
            view_scores: scores,
            bound,
            rho_step,
            pi: w.pi.clone(),
            rho: w.rho.clone(),
            elapsed_us: start.elapsed().as_micros(),
        });

        let decrease = current - next;
        current = next;
        if cfg.tolerance > 0.0 && decrease < cfg.tolerance {
            break;
        }
    }
    Ok((w, TrainTrace { records }))
}

/// Builds the margin matrix from a trained pool and fits the vote weights.
pub fn fit(
    data: &MultiviewDataset,
    pool: &VoterPool,
    cfg: &TrainConfig,
) -> Result<(MvModel, TrainTrace)> {
    let mm = margin_matrix(pool, data)?;
    let (weights, trace) = fit_margins(&mm, cfg)?;
    let depths = pool.trees(0).iter().map(|t| t.max_depth).collect();
    let model = MvModel::new(
        data.view_names().to_vec(),
        pool.clone(),
        weights,
        ModelMetadata {
            iterations: cfg.iterations,
            epsilon: cfg.epsilon_for(data.n_samples()),
            rho_solver: cfg.rho_solver,
            update_rule: cfg.update_rule,
            seed: cfg.seed,
            depths,
        },
    )?;
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(z: f64) -> f64 {
        1.0 / (1.0 + z.exp())
    }

    fn loss(z: &[f64]) -> f64 {
        z.iter().map(|zi| (1.0 + (-zi).exp()).ln()).sum()
    }

    #[test]
    fn weight_stats_examples() {
        let (p, m) = weight_stats(&[vec![1, 1, 1, 1]], &[0.5; 4]).unwrap();
        assert_eq!((p[0], m[0]), (2.0, 0.0));
        let (p, m) = weight_stats(&[vec![1, -1]], &[0.25, 0.75]).unwrap();
        assert_eq!((p[0], m[0]), (0.25, 0.75));
        assert!(weight_stats(&[vec![1, -1]], &[0.5]).is_err());
    }

    #[test]
    fn delta_examples() {
        let d = delta_update(sig(1.0), sig(-1.0), 0.0).unwrap();
        assert!((d + 0.5).abs() < 1e-12);
        let d = delta_update(1.0, 0.0, 0.1).unwrap();
        assert!((d - 0.5 * 11f64.ln()).abs() < 1e-12);
        assert!((d - 1.19895).abs() < 1e-5);
        let e = delta_update(1.0, 0.0, 0.0).unwrap_err();
        assert!(e.is_numeric());
        assert!(delta_update(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn solve_rho_examples() {
        let r = solve_rho(&[2.0, 2.0, 2.0], RhoSolver::default()).unwrap();
        assert!(r.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(
            solve_rho(&[2.0, 1.0, 0.0], RhoSolver::ExactVertex).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            solve_rho(&[3.0, 3.0, 2.0], RhoSolver::ExactVertex).unwrap(),
            vec![0.5, 0.5, 0.0]
        );
        assert_eq!(
            solve_rho(&[0.0, 0.0], RhoSolver::ExactVertex).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(solve_rho(&[1.0, f64::NAN], RhoSolver::ExactVertex).is_err());
        assert!(solve_rho(&[], RhoSolver::ExactVertex).is_err());
    }

    #[test]
    fn entropic_rho_minimises_regularised_objective() {
        let scores = [2.0, 1.0];
        let r = solve_rho(&scores, RhoSolver::Entropic { lambda: Some(1.0) }).unwrap();
        let e = std::f64::consts::E;
        assert!((r[0] - e * e / (e * e + e)).abs() < 1e-15);
        // grid search over the simplex of -rho.s + lambda * sum rho ln rho
        let f = |a: f64| {
            let ent = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
            -(a * scores[0] + (1.0 - a) * scores[1]) + ent(a) + ent(1.0 - a)
        };
        let best = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        assert!((best - r[0]).abs() <= 1e-3);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(compute_bound(&[1.0], &[0.0]), 0.0);
        assert_eq!(compute_bound(&[1.0], &[view_score(&[1.0], &[0.0])]), -1.0);
        assert_eq!(compute_bound(&[0.5, 0.5], &[2.0, 4.0]), -3.0);
    }

    #[test]
    fn canonical_weights_preserve_coefficients() {
        let coef = vec![vec![0.5, -0.25], vec![0.25], vec![0.0, 0.0]];
        let w = canonical_weights(&coef);
        assert_eq!(w.rho, vec![0.75, 0.25, 0.0]);
        for (v, c) in coef.iter().enumerate() {
            for (j, x) in c.iter().enumerate() {
                assert!((w.rho[v] * w.pi[v][j] - x).abs() < 1e-15);
            }
        }
        let z = canonical_weights(&[vec![0.0], vec![0.0]]);
        assert_eq!(z.rho, vec![0.5, 0.5]);
        assert_eq!(z.pi, vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn single_voter_hand_trace() {
        let mm = MarginMatrix::from_columns(vec![vec![vec![1, 1]]]).unwrap();
        for rule in [UpdateRule::Bounded, UpdateRule::Literal] {
            let cfg = TrainConfig {
                iterations: 1,
                update_rule: rule,
                ..TrainConfig::default()
            };
            let (w, trace) = fit_margins(&mm, &cfg).unwrap();
            let r = &trace.records[0];
            let q = sig(1.0);
            assert!(r.q.iter().all(|x| (x - q).abs() < 1e-15));
            assert!((r.w_plus[0][0] - 2.0 * q).abs() < 1e-15);
            assert_eq!(r.w_minus[0][0], 0.0);
            let delta = 0.5 * ((2.0 * q + 0.25) / 0.25).ln();
            assert!((r.delta[0][0] - delta).abs() < 1e-14);
            assert!((delta - 0.5739).abs() < 1e-4);
            assert_eq!(w.rho, vec![1.0]);
            assert!((w.pi[0][0] - (1.0 + delta)).abs() < 1e-14);
            assert!((r.objective_before - 2.0 * (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);
            let z = 1.0 + delta;
            assert!((r.objective_after - loss(&[z, z])).abs() < 1e-12);
        }
    }

    #[test]
    fn opposed_constant_voters_stay_put() {
        // always-positive and always-negative voters on labels [+1, -1]; they
        // cancel, so q starts uniform
        let mm = MarginMatrix::from_columns(vec![
            vec![vec![1, -1], vec![-1, 1]],
            vec![vec![1, -1], vec![-1, 1]],
        ])
        .unwrap();
        let (w, trace) = fit_margins(
            &mm,
            &TrainConfig {
                iterations: 3,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        for r in &trace.records {
            assert!(r.delta.iter().flatten().all(|&d| d == 0.0));
            assert_eq!(r.bound, 0.0);
            assert!((r.objective_after - 2.0 * 2f64.ln()).abs() < 1e-12);
        }
        assert_eq!(w.rho, vec![0.5, 0.5]);
    }

    #[test]
    fn constant_voter_on_balanced_labels_shrinks() {
        let mm = MarginMatrix::from_columns(vec![vec![vec![1, -1]]]).unwrap();
        let cfg = TrainConfig {
            iterations: 1,
            epsilon: Some(0.0),
            ..TrainConfig::default()
        };
        let (w, trace) = fit_margins(&mm, &cfg).unwrap();
        assert!((trace.records[0].delta[0][0] + 0.5).abs() < 1e-12);
        assert!((w.pi[0][0] - 0.5).abs() < 1e-12);
        assert!(trace.is_monotone(0.0));
    }

    #[test]
    fn identical_views_keep_uniform_rho() {
        let view = vec![vec![1, -1, 1, 1], vec![1, 1, -1, 1]];
        let mm = MarginMatrix::from_columns(vec![view.clone(), view]).unwrap();
        let (w, trace) = fit_margins(
            &mm,
            &TrainConfig {
                iterations: 4,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(w.rho[0], w.rho[1]);
        for r in &trace.records {
            assert_eq!(r.rho_step[0], r.rho_step[1]);
        }
    }

    #[test]
    fn literal_rule_adds_delta_and_takes_solver_rho() {
        let mm = MarginMatrix::from_columns(vec![
            vec![vec![1, -1, 1], vec![1, 1, 1]],
            vec![vec![-1, 1, 1]],
        ])
        .unwrap();
        let cfg = TrainConfig {
            iterations: 2,
            update_rule: UpdateRule::Literal,
            ..TrainConfig::default()
        };
        let (_, trace) = fit_margins(&mm, &cfg).unwrap();
        let mut pi = VoteWeights::uniform(&[2, 1]).pi;
        for r in &trace.records {
            for (v, pv) in pi.iter_mut().enumerate() {
                for (j, p) in pv.iter_mut().enumerate() {
                    *p += r.delta[v][j];
                }
            }
            assert_eq!(r.pi, pi);
            assert_eq!(r.rho, r.rho_step);
            // unscaled statistics
            assert_eq!(r.raw_view_scores, r.view_scores);
        }
    }

    #[test]
    fn aborts_with_partial_trace() {
        // second voter is perfect, so W- = 0 and epsilon = 0 cannot be used
        let mm = MarginMatrix::from_columns(vec![vec![vec![1, -1], vec![1, 1]], vec![vec![1, 1]]])
            .unwrap();
        let cfg = TrainConfig {
            epsilon: Some(0.0),
            ..TrainConfig::default()
        };
        match fit_margins(&mm, &cfg) {
            Err(Error::TrainingAborted { reason, trace }) => {
                assert!(reason.contains("iteration 1"));
                assert!(trace.records.is_empty());
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mm = MarginMatrix::from_columns(vec![vec![vec![1, -1]]]).unwrap();
        for cfg in [
            TrainConfig {
                iterations: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epsilon: Some(-1.0),
                ..TrainConfig::default()
            },
            TrainConfig {
                rho_solver: RhoSolver::Entropic { lambda: Some(0.0) },
                ..TrainConfig::default()
            },
        ] {
            assert!(fit_margins(&mm, &cfg).is_err());
        }
    }

    #[test]
    fn early_stop_on_small_decrease() {
        let mm =
            MarginMatrix::from_columns(vec![vec![vec![1, 1], vec![-1, -1]], vec![vec![1, -1]]])
                .unwrap();
        let cfg = TrainConfig {
            iterations: 50,
            tolerance: 1e-3,
            ..TrainConfig::default()
        };
        let (_, trace) = fit_margins(&mm, &cfg).unwrap();
        assert!(trace.records.len() < 50);
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let mm =
            MarginMatrix::from_columns(vec![vec![vec![1, -1, 1]], vec![vec![-1, -1, 1]]]).unwrap();
        let (_, trace) = fit_margins(
            &mm,
            &TrainConfig {
                iterations: 3,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let text = trace.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = TrainTrace::from_jsonl(&text).unwrap();
        assert_eq!(back.to_jsonl().unwrap(), text);
        assert_eq!(back.objectives(), trace.objectives());
    }

    fn matrix() -> impl Strategy<Value = MarginMatrix> {
        (2usize..12, 1usize..4, 1usize..4).prop_flat_map(|(m, v, n)| {
            prop::collection::vec(
                prop::collection::vec(prop::collection::vec(prop::bool::ANY, m), n),
                v,
            )
            .prop_map(|cols| {
                let cols = cols
                    .into_iter()
                    .map(|view| {
                        view.into_iter()
                            .map(|c| c.into_iter().map(|b| if b { 1 } else { -1 }).collect())
                            .collect()
                    })
                    .collect();
                MarginMatrix::from_columns(cols).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn bounded_rule_never_increases_objective(mm in matrix(), vertex in prop::bool::ANY) {
            let cfg = TrainConfig {
                iterations: 4,
                rho_solver: if vertex { RhoSolver::ExactVertex } else { RhoSolver::default() },
                ..TrainConfig::default()
            };
            let (w, trace) = fit_margins(&mm, &cfg).unwrap();
            prop_assert!(trace.is_monotone(DESCENT_TOLERANCE));
            prop_assert!((w.rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.rho.iter().all(|&r| r >= 0.0));
        }

        #[test]
        fn unsmoothed_step_respects_bound(mm in matrix(), vertex in prop::bool::ANY) {
            let cfg = TrainConfig {
                iterations: 3,
                epsilon: Some(0.0),
                rho_solver: if vertex { RhoSolver::ExactVertex } else { RhoSolver::default() },
                ..TrainConfig::default()
            };
            let trace = match fit_margins(&mm, &cfg) {
                Ok((_, t)) => t,
                Err(Error::TrainingAborted { trace, .. }) => *trace,
                Err(e) => panic!("{e}"),
            };
            for r in &trace.records {
                prop_assert!(r.bound <= 0.0);
                let gap = r.objective_after - r.objective_before - r.bound;
                prop_assert!(gap <= DESCENT_TOLERANCE * r.objective_before.max(1.0), "gap {}", gap);
            }
        }

        #[test]
        fn view_order_does_not_matter(mm in matrix()) {
            let v = mm.n_views();
            let order: Vec<usize> = (0..v).rev().collect();
            let cfg = TrainConfig { iterations: 3, ..TrainConfig::default() };
            let (a, ta) = fit_margins(&mm, &cfg).unwrap();
            let (b, tb) = fit_margins(&mm.permute_views(&order), &cfg).unwrap();
            for (k, &src) in order.iter().enumerate() {
                prop_assert!((a.rho[src] - b.rho[k]).abs() < 1e-12);
                for (x, y) in a.pi[src].iter().zip(&b.pi[k]) {
                    prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
                }
            }
            for (x, y) in ta.objectives().iter().zip(tb.objectives()) {
                prop_assert!((x - y).abs() < 1e-9 * x.max(1.0));
            }
        }
    }
}
