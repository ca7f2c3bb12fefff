//! Bayesian model averaging over classification trees sampled by
//! reversible-jump MCMC, with posterior variable importance, ensemble
//! selection against a weak variable and noise-randomization experiments.

pub mod analysis;
pub mod bma;
pub mod cli;
pub mod dataset;
pub mod sampler;
pub mod tree;

pub use analysis::{filter_ensemble, run_comparison, variable_importance, ImportanceMode, ImportanceVector};
pub use bma::{Ensemble, EvalReport, Prediction};
pub use dataset::{make_folds, synth_trauma, Dataset, FoldPlan, Schema};
pub use sampler::{chain_diagnostics, run_chain, ChainConfig};
pub use tree::{DecisionTree, SplitRule, TreePrior};
