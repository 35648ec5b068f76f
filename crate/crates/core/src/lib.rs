//! Multiview double-weighted majority vote classifier.
//!
//! Each view `v` has a pool of decision trees `h_{v,j}`. The classifier
//! scores an observation with
//!
//! ```text
//! B(x) = sum_v rho_v sum_j pi_{v,j} h_{v,j}(x^v)
//! ```
//!
//! where `pi` weights voters inside a view and `rho` (on the simplex)
//! weights the views. Both are learned by minimising the logistic loss,
//! expressed as the binary-entropy Bregman divergence `D_F(0 || q)`, with a
//! parallel-update scheme (see [`trainer`]).

pub mod bregman;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
pub use model::{MarginMatrix, MultiviewDataset, MvModel, Table, VoteWeights};
pub use trainer::{fit, fit_margins, RhoSolver, TrainConfig, TrainTrace, UpdateRule};
pub use tree::{build_pool, default_depths, margin_matrix, train_tree, DecisionTree, VoterPool};
