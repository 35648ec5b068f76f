//! Run configuration: defaults, overridden by an optional JSON file,
//! overridden by flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mvvote::eval::{ExperimentConfig, Method};
use mvvote::{Error, RhoSolver, UpdateRule};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub experiment: ExperimentConfig,
    pub methods: Option<Vec<Method>>,
    pub sizes: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub classes: Option<Vec<String>>,
    pub positive_class: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("config {}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolverArg {
    Entropic,
    ExactVertex,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RuleArg {
    Bounded,
    Literal,
}

/// Training flags shared by every subcommand that fits a model.
#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    /// JSON config file; flags take precedence over its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of iterations T
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Smoothing added to W+ and W- (default 1/(2m))
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub rho_solver: Option<SolverArg>,
    /// Temperature of the entropic view-weight solver (default: mean score)
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub update_rule: Option<RuleArg>,
    /// Comma-separated tree depths of each view's voter pool
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Stop once an iteration lowers the objective by less than this
    #[arg(long)]
    pub tolerance: Option<f64>,
}

impl TrainFlags {
    pub fn apply(&self, cfg: &mut ExperimentConfig, seed: u64) -> Result<(), Error> {
        let t = &mut cfg.train;
        t.seed = seed;
        if let Some(v) = self.iterations {
            t.iterations = v;
        }
        if let Some(v) = self.epsilon {
            t.epsilon = Some(v);
        }
        if let Some(v) = self.tolerance {
            t.tolerance = v;
        }
        if let Some(r) = self.update_rule {
            t.update_rule = match r {
                RuleArg::Bounded => UpdateRule::Bounded,
                RuleArg::Literal => UpdateRule::Literal,
            };
        }
        match (self.rho_solver, self.lambda) {
            (Some(SolverArg::ExactVertex), Some(_)) => {
                return Err(Error::Input(
                    "--lambda only applies to the entropic solver".into(),
                ))
            }
            (Some(SolverArg::ExactVertex), None) => t.rho_solver = RhoSolver::ExactVertex,
            (Some(SolverArg::Entropic), lambda) => t.rho_solver = RhoSolver::Entropic { lambda },
            (None, Some(l)) => t.rho_solver = RhoSolver::Entropic { lambda: Some(l) },
            (None, None) => {}
        }
        if let Some(d) = &self.depths {
            cfg.depths = Some(d.clone());
        }
        cfg.validate()
    }
}

/// Flags of the repeated-split experiments.
#[derive(Args, Debug, Default)]
pub struct ExperimentFlags {
    /// Comma-separated methods: mono, concat, fusion, mv_uniform, mwmvc2
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Number of repetitions
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated classes for one-vs-rest tasks (default: all, unless
    /// a positive class is given)
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Share of the data held out for testing
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Depth of single-tree baselines (default ceil(log2 m) + 1)
    #[arg(long)]
    pub baseline_depth: Option<usize>,
    /// Subsample training negatives to the number of positives
    #[arg(long)]
    pub balance_train: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub experiment: ExperimentConfig,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub classes: Option<Vec<String>>,
}

impl ExperimentFlags {
    pub fn resolve(&self, file: &FileConfig, default_reps: usize) -> Result<Experiment, Error> {
        let mut experiment = file.experiment.clone();
        if let Some(v) = self.test_fraction {
            experiment.test_fraction = v;
        }
        if let Some(v) = self.baseline_depth {
            experiment.baseline_depth = Some(v);
        }
        if let Some(v) = self.balance_train {
            experiment.balance_train = v;
        }
        let methods = match &self.methods {
            Some(names) => names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<Method>, _>>()?,
            None => file.methods.clone().unwrap_or_else(|| Method::ALL.to_vec()),
        };
        if methods.is_empty() {
            return Err(Error::Input("no methods selected".into()));
        }
        Ok(Experiment {
            experiment,
            methods,
            reps: self.reps.or(file.reps).unwrap_or(default_reps),
            classes: self.classes.clone().or_else(|| file.classes.clone()),
        })
    }
}
