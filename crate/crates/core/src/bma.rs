//! Bayesian model averaging over a sampled tree ensemble.
//!
//! Trees are posterior draws, so the predictive distribution is the plain
//! mean of the per-tree leaf predictives. Evaluation reports accuracy, the
//! summed Shannon entropy (bits) of the averaged predictions and the largest
//! training log marginal likelihood among the sampled trees.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::sampler::{ChainConfig, MoveStats};
use crate::tree::{leaf_predictive, DecisionTree, TreeError};

/// How the per-fold log-likelihood column is defined; printed with reports.
pub const LOGLIK_SEMANTICS: &str =
    "max_train_loglik = largest training-set log marginal likelihood among the sampled trees";

#[derive(Debug, Error)]
pub enum BmaError {
    #[error("feature vector has {found} values, ensemble expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: TreeError,
    },
    #[error("{path}: invalid ensemble metadata: {msg}")]
    Meta { path: String, msg: String },
}

/// Sampling metadata stored next to an ensemble file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub config: ChainConfig,
    pub s_max: usize,
    pub n_features: usize,
    pub variable_names: Vec<String>,
    pub n_train: usize,
    pub stats: MoveStats,
    pub post_burn_in_stats: MoveStats,
    /// Not persisted, so saved artifacts stay byte-identical across reruns.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Post-burn-in trees with their training log marginal likelihoods.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    trees: Vec<DecisionTree>,
    logliks: Vec<f64>,
    meta: EnsembleMeta,
}

/// Averaged class probabilities, indexed by label value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p: [f64; 2],
}

impl Prediction {
    /// Most probable label; an exact tie goes to label 0.
    pub fn label(&self) -> u8 {
        u8::from(self.p[1] > self.p[0])
    }

    /// Shannon entropy in bits, with `0 log 0 = 0`.
    pub fn entropy_bits(&self) -> f64 {
        self.p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub performance_pct: f64,
    /// Sum over test rows of the predictive entropy in bits.
    pub entropy_bits: f64,
    pub entropy_per_row: f64,
    pub max_train_loglik: f64,
    pub per_point: Vec<(u8, Prediction)>,
}

impl Ensemble {
    pub fn new(trees: Vec<DecisionTree>, logliks: Vec<f64>, meta: EnsembleMeta) -> Self {
        assert_eq!(trees.len(), logliks.len());
        Ensemble { trees, logliks, meta }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn logliks(&self) -> &[f64] {
        &self.logliks
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.meta.n_features
    }

    /// Keeps the trees for which `keep` holds, in order.
    pub fn retain(&self, mut keep: impl FnMut(&DecisionTree) -> bool) -> Ensemble {
        let (trees, logliks) = self
            .trees
            .iter()
            .zip(&self.logliks)
            .filter(|(t, _)| keep(t))
            .map(|(t, &l)| (t.clone(), l))
            .unzip();
        Ensemble { trees, logliks, meta: self.meta.clone() }
    }

    /// Appends the trees of `other`; metadata of `self` is kept.
    pub fn concat(&self, other: &Ensemble) -> Ensemble {
        let mut out = self.clone();
        out.trees.extend(other.trees.iter().cloned());
        out.logliks.extend_from_slice(&other.logliks);
        out
    }

    /// `p(y | x, D) ≈ (1/N) Σ_i p(y | x, θ_i, D)`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, BmaError> {
        if self.trees.is_empty() {
            return Err(BmaError::EmptyEnsemble);
        }
        if x.len() != self.meta.n_features {
            return Err(BmaError::Arity { expected: self.meta.n_features, found: x.len() });
        }
        let alpha = self.meta.config.dirichlet_alpha;
        let mut sum = 0.0;
        for t in &self.trees {
            let counts = t.leaf_for(x).map_err(|_| BmaError::Arity {
                expected: self.meta.n_features,
                found: x.len(),
            })?;
            sum += leaf_predictive(counts, alpha)[1];
        }
        let p1 = sum / self.trees.len() as f64;
        Ok(Prediction { p: [1.0 - p1, p1] })
    }

    pub fn max_loglikelihood(&self) -> Result<f64, BmaError> {
        self.logliks
            .iter()
            .copied()
            .reduce(f64::max)
            .ok_or(BmaError::EmptyEnsemble)
    }

    /// Predicts every test row (in parallel, collected in row order).
    pub fn evaluate(&self, test: &Dataset) -> Result<EvalReport, BmaError> {
        if test.n_rows() == 0 {
            return Err(BmaError::EmptyTestSet);
        }
        let per_point = (0..test.n_rows())
            .into_par_iter()
            .map(|i| self.predict(test.row(i)).map(|p| (test.label(i), p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(evaluate_predictions(per_point, self.max_loglikelihood()?))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (t, &ll) in self.trees.iter().zip(&self.logliks) {
            out.push_str(&t.to_record(ll));
            out.push('\n');
        }
        out
    }

    /// Writes the JSON-lines ensemble to `path` and its metadata to
    /// [`meta_path`]`(path)`.
    pub fn save(&self, path: &Path) -> Result<(), BmaError> {
        write_file(path, self.to_jsonl().as_bytes())?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        write_file(&meta_path(path), meta.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Ensemble, BmaError> {
        let io = |p: &Path, e| BmaError::Io { path: p.display().to_string(), source: e };
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        let mpath = meta_path(path);
        let meta_text = fs::read_to_string(&mpath).map_err(|e| io(&mpath, e))?;
        let meta: EnsembleMeta = serde_json::from_str(&meta_text)
            .map_err(|e| BmaError::Meta { path: mpath.display().to_string(), msg: e.to_string() })?;
        let mut trees = Vec::new();
        let mut logliks = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (t, ll) = DecisionTree::from_record(line).map_err(|source| BmaError::Record {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
            trees.push(t);
            logliks.push(ll);
        }
        Ok(Ensemble { trees, logliks, meta })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BmaError> {
    let io = |e| BmaError::Io { path: path.display().to_string(), source: e };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Sidecar metadata path: `ensemble.jsonl` -> `ensemble.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Scores already computed predictions against their true labels.
pub fn evaluate_predictions(per_point: Vec<(u8, Prediction)>, max_train_loglik: f64) -> EvalReport {
    let n = per_point.len();
    let correct = per_point.iter().filter(|(y, p)| p.label() == *y).count();
    let entropy_bits: f64 = per_point.iter().map(|(_, p)| p.entropy_bits()).sum();
    EvalReport {
        n_test: n,
        performance_pct: 100.0 * correct as f64 / n.max(1) as f64,
        entropy_bits,
        entropy_per_row: entropy_bits / n.max(1) as f64,
        max_train_loglik,
        per_point,
    }
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
