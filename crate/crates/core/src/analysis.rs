//! Posterior variable importance, ensemble selection and the cross-validated
//! comparison of four experimental arms:
//!
//! * (a) all variables;
//! * (b) the weakest variable dropped before sampling;
//! * (c) all variables sampled, then trees using the weakest one removed;
//! * (d) the weakest variable dropped and uniform noise added to the rest.
//!
//! Noise for arm (d) is added to the full dataset before it is split into
//! folds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bma::{mean_std, Ensemble, EvalReport};
use crate::dataset::{make_folds, DataError, Dataset, FoldPlan};
use crate::sampler::{derive_seed, run_chain, ChainConfig};

pub const NOISE_TIMING: &str = "noise is added to the full dataset before the fold split";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("no tree in the ensemble has a split node")]
    NoSplits,
    #[error("every tree uses variable {0}; the selection would be empty")]
    EmptySelection(usize),
    #[error("variable index {index} out of range for {len} variables")]
    InvalidVariable { index: usize, len: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("sampler: {0}")]
    Sampler(String),
    #[error(transparent)]
    Bma(#[from] crate::bma::BmaError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMode {
    /// Share of all split nodes that test the variable.
    #[default]
    SplitNodes,
    /// Share of trees containing the variable, renormalized to sum to one.
    Trees,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub Vec<f64>);

impl ImportanceVector {
    /// Index of the least used variable (first one on ties).
    pub fn argmin(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
            .0
    }

    /// Variable indices ordered from least to most used (stable on ties).
    pub fn ascending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[a].total_cmp(&self.0[b]));
        idx
    }

    /// Elementwise mean of several vectors of equal length.
    pub fn mean(vs: &[ImportanceVector]) -> ImportanceVector {
        let m = vs[0].0.len();
        let mut out = vec![0.0; m];
        for v in vs {
            for (o, x) in out.iter_mut().zip(&v.0) {
                *o += x / vs.len() as f64;
            }
        }
        ImportanceVector(out)
    }

    /// Text bar chart, one line per variable.
    pub fn bar_chart(&self, names: &[String]) -> String {
        let width = names.iter().map(String::len).max().unwrap_or(0);
        let top = self.0.iter().copied().fold(0.0, f64::max);
        let mut out = String::new();
        for (i, (name, &p)) in names.iter().zip(&self.0).enumerate() {
            let bar = if top > 0.0 { (40.0 * p / top).round() as usize } else { 0 };
            out.push_str(&format!("{:>2} {:<width$} {:.4} {}\n", i + 1, name, p, "#".repeat(bar)));
        }
        out
    }
}

pub fn variable_importance(ensemble: &Ensemble, mode: ImportanceMode) -> Result<ImportanceVector, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let mut counts = vec![0u64; ensemble.n_features()];
    for t in ensemble.trees() {
        match mode {
            ImportanceMode::SplitNodes => {
                for r in t.rules() {
                    counts[r.var()] += 1;
                }
            }
            ImportanceMode::Trees => {
                let mut used = vec![false; counts.len()];
                for r in t.rules() {
                    used[r.var()] = true;
                }
                for (c, u) in counts.iter_mut().zip(used) {
                    *c += u as u64;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AnalysisError::NoSplits);
    }
    Ok(ImportanceVector(counts.iter().map(|&c| c as f64 / total as f64).collect()))
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    pub kept: Ensemble,
    pub omitted_count: usize,
    pub excluded_variable: usize,
}

/// Keeps only the trees with no split on `variable`, preserving order.
pub fn filter_ensemble(ensemble: &Ensemble, variable: usize) -> Result<SelectionResult, AnalysisError> {
    if ensemble.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    if variable >= ensemble.n_features() {
        return Err(AnalysisError::InvalidVariable { index: variable, len: ensemble.n_features() });
    }
    let kept = ensemble.retain(|t| !t.uses_variable(variable));
    if kept.is_empty() {
        return Err(AnalysisError::EmptySelection(variable));
    }
    Ok(SelectionResult { omitted_count: ensemble.len() - kept.len(), kept, excluded_variable: variable })
}

/// Trains one chain per fold on the training rows and evaluates it on the
/// held-out rows. Chain seeds are `derive_seed(config.seed, [stream, fold])`.
pub fn cross_validate(
    data: &Dataset,
    plan: &FoldPlan,
    config: &ChainConfig,
    stream: u64,
) -> Result<Vec<(Ensemble, EvalReport)>, AnalysisError> {
    (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let (train_idx, test_idx) = plan.split(fold);
            let train = data.subset(&train_idx);
            let test = data.subset(&test_idx);
            let cfg = ChainConfig { seed: derive_seed(config.seed, &[stream, fold as u64]), ..config.clone() };
            let ens = run_chain(&train, &cfg).map_err(AnalysisError::Sampler)?;
            let report = ens.evaluate(&test)?;
            Ok((ens, report))
        })
        .collect()
}

/// Per-fold summary row of an arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub n_test: usize,
    pub performance_pct: f64,
    pub entropy_bits: f64,
    pub entropy_per_row: f64,
    pub max_train_loglik: f64,
    pub ensemble_size: usize,
    /// Trees removed by selection (arm c only).
    pub omitted: Option<usize>,
}

impl FoldRow {
    pub fn new(fold: usize, r: &EvalReport, ensemble_size: usize, omitted: Option<usize>) -> Self {
        FoldRow {
            fold,
            n_test: r.n_test,
            performance_pct: r.performance_pct,
            entropy_bits: r.entropy_bits,
            entropy_per_row: r.entropy_per_row,
            max_train_loglik: r.max_train_loglik,
            ensemble_size,
            omitted,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    All,
    Dropped,
    Selected,
    DroppedNoise,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::All, Arm::Dropped, Arm::Selected, Arm::DroppedNoise];

    pub fn letter(self) -> char {
        match self {
            Arm::All => 'a',
            Arm::Dropped => 'b',
            Arm::Selected => 'c',
            Arm::DroppedNoise => 'd',
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Arm::All => "all variables",
            Arm::Dropped => "weakest dropped",
            Arm::Selected => "all variables, trees using weakest omitted",
            Arm::DroppedNoise => "weakest dropped + noise",
        }
    }

    /// Seed stream of the arm's per-fold chains.
    pub fn stream(self) -> u64 {
        match self {
            Arm::All => 1,
            Arm::Dropped => 2,
            Arm::Selected => 3,
            Arm::DroppedNoise => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub folds: Vec<FoldRow>,
}

impl ArmReport {
    pub fn performance(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.performance_pct).collect()
    }

    pub fn entropy(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.entropy_bits).collect()
    }

    pub fn loglik(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.max_train_loglik).collect()
    }
}

/// Paired per-fold differences `arm - (a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub arm: Arm,
    pub performance_mean: f64,
    pub performance_std: f64,
    pub entropy_mean: f64,
    pub entropy_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonSettings {
    pub folds: usize,
    pub chain: ChainConfig,
    /// Variable to drop / select against; argmin of arm (a) importance when `None`.
    pub weakest: Option<usize>,
    pub noise_intensity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub settings: ComparisonSettings,
    pub plan: FoldPlan,
    pub weakest: usize,
    pub weakest_name: String,
    pub weakest_from_importance: bool,
    /// Arm (a) importance averaged over folds.
    pub importance: ImportanceVector,
    pub arms: Vec<ArmReport>,
    pub deltas: Vec<Delta>,
    pub noise_timing: String,
    pub loglik_semantics: String,
}

impl ComparisonReport {
    pub fn arm(&self, arm: Arm) -> &ArmReport {
        self.arms.iter().find(|a| a.arm == arm).expect("all arms present")
    }
}

/// Seed of the fold plan for a master seed.
pub fn fold_seed(master: u64) -> u64 {
    derive_seed(master, &[0])
}

pub fn run_comparison(data: &Dataset, settings: &ComparisonSettings) -> Result<ComparisonReport, AnalysisError> {
    let master = settings.chain.seed;
    if let Some(w) = settings.weakest {
        if w >= data.n_features() {
            return Err(AnalysisError::InvalidVariable { index: w, len: data.n_features() });
        }
    }
    let plan = make_folds(data, settings.folds, fold_seed(master))?;

    let full = cross_validate(data, &plan, &settings.chain, Arm::All.stream())?;
    // a fold whose trees are all single leaves contributes zero importance
    let importances = full
        .iter()
        .map(|(e, _)| match variable_importance(e, ImportanceMode::SplitNodes) {
            Err(AnalysisError::NoSplits) => Ok(ImportanceVector(vec![0.0; e.n_features()])),
            other => other,
        })
        .collect::<Result<Vec<_>, _>>()?;
    let importance = ImportanceVector::mean(&importances);
    let weakest = settings.weakest.unwrap_or_else(|| importance.argmin());

    let mut selected = Vec::with_capacity(plan.k);
    for (fold, (ens, _)) in full.iter().enumerate() {
        let (_, test_idx) = plan.split(fold);
        let row = match filter_ensemble(ens, weakest) {
            Ok(sel) => {
                let report = sel.kept.evaluate(&data.subset(&test_idx))?;
                FoldRow::new(fold, &report, sel.kept.len(), Some(sel.omitted_count))
            }
            // nothing left to average: metrics are undefined for this fold
            Err(AnalysisError::EmptySelection(_)) => FoldRow {
                fold,
                n_test: test_idx.len(),
                performance_pct: f64::NAN,
                entropy_bits: f64::NAN,
                entropy_per_row: f64::NAN,
                max_train_loglik: f64::NAN,
                ensemble_size: 0,
                omitted: Some(ens.len()),
            },
            Err(e) => return Err(e),
        };
        selected.push(row);
    }

    let dropped = data.drop_variable(weakest)?;
    let noised = dropped.add_noise(settings.noise_intensity, derive_seed(master, &[Arm::DroppedNoise.stream(), 99]))?;
    let (dropped_runs, noised_runs) = rayon::join(
        || cross_validate(&dropped, &plan, &settings.chain, Arm::Dropped.stream()),
        || cross_validate(&noised, &plan, &settings.chain, Arm::DroppedNoise.stream()),
    );
    let rows = |runs: &[(Ensemble, EvalReport)]| -> Vec<FoldRow> {
        runs.iter().enumerate().map(|(f, (e, r))| FoldRow::new(f, r, e.len(), None)).collect()
    };
    let arms = vec![
        ArmReport { arm: Arm::All, folds: rows(&full) },
        ArmReport { arm: Arm::Dropped, folds: rows(&dropped_runs?) },
        ArmReport { arm: Arm::Selected, folds: selected },
        ArmReport { arm: Arm::DroppedNoise, folds: rows(&noised_runs?) },
    ];
    let base = &arms[0];
    let deltas = arms[1..]
        .iter()
        .map(|a| {
            let dp: Vec<f64> = a.folds.iter().zip(&base.folds).map(|(x, y)| x.performance_pct - y.performance_pct).collect();
            let de: Vec<f64> = a.folds.iter().zip(&base.folds).map(|(x, y)| x.entropy_bits - y.entropy_bits).collect();
            let (pm, ps) = mean_std(&dp);
            let (em, es) = mean_std(&de);
            Delta { arm: a.arm, performance_mean: pm, performance_std: ps, entropy_mean: em, entropy_std: es }
        })
        .collect();
    Ok(ComparisonReport {
        settings: settings.clone(),
        plan,
        weakest,
        weakest_name: data.schema().variable(weakest).name.clone(),
        weakest_from_importance: settings.weakest.is_none(),
        importance,
        arms,
        deltas,
        noise_timing: NOISE_TIMING.to_string(),
        loglik_semantics: crate::bma::LOGLIK_SEMANTICS.to_string(),
    })
}
