use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MoveKind;
use crate::bma::{mean_std, Ensemble};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRate {
    pub kind: MoveKind,
    pub proposed: u64,
    pub accepted: u64,
    pub rate: f64,
}

/// First-half vs second-half comparison of the post-burn-in trace. The
/// standard error uses batch means so autocorrelation is accounted for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSplitDrift {
    pub first_mean: f64,
    pub second_mean: f64,
    pub std_error: f64,
    /// |second - first| / std_error.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub moves: Vec<MoveRate>,
    pub overall_rate: f64,
    pub post_burn_in_rate: f64,
    pub trace_mean: f64,
    pub trace_max: f64,
    /// Mean of the last tenth of the trace minus mean of the first tenth.
    pub window_drift: f64,
    pub half_split: HalfSplitDrift,
    /// Leaf count -> number of collected trees.
    pub leaf_histogram: BTreeMap<usize, usize>,
}

const BATCHES: usize = 20;

fn batch_means_se(xs: &[f64]) -> f64 {
    let b = BATCHES.min(xs.len());
    if b < 2 {
        return 0.0;
    }
    let size = xs.len() / b;
    let means: Vec<f64> = xs.chunks_exact(size).take(b).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    mean_std(&means).1 / (b as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn half_split_drift(trace: &[f64]) -> HalfSplitDrift {
    let (first, second) = trace.split_at(trace.len() / 2);
    let first_mean = mean(first);
    let second_mean = mean(second);
    let std_error = batch_means_se(first).hypot(batch_means_se(second));
    let diff = (second_mean - first_mean).abs();
    let z = if std_error > 0.0 {
        diff / std_error
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    HalfSplitDrift { first_mean, second_mean, std_error, z }
}

pub fn chain_diagnostics(ensemble: &Ensemble) -> ChainDiagnostics {
    let meta = ensemble.meta();
    let moves = MoveKind::ALL
        .iter()
        .map(|&kind| MoveRate {
            kind,
            proposed: meta.stats.proposed[kind.index()],
            accepted: meta.stats.accepted[kind.index()],
            rate: meta.stats.acceptance_rate(kind),
        })
        .collect();
    let trace = ensemble.logliks();
    let window = (trace.len() / 10).max(1);
    let mut leaf_histogram = BTreeMap::new();
    for t in ensemble.trees() {
        *leaf_histogram.entry(t.n_leaves()).or_insert(0) += 1;
    }
    ChainDiagnostics {
        moves,
        overall_rate: meta.stats.overall_rate(),
        post_burn_in_rate: meta.post_burn_in_stats.overall_rate(),
        trace_mean: mean(trace),
        trace_max: trace.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        window_drift: mean(&trace[trace.len() - window..]) - mean(&trace[..window]),
        half_split: half_split_drift(trace),
        leaf_histogram,
    }
}

impl std::fmt::Display for ChainDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "acceptance: overall {:.3}, post burn-in {:.3}", self.overall_rate, self.post_burn_in_rate)?;
        for m in &self.moves {
            writeln!(f, "  {:<13} {:>9} proposed {:>9} accepted  rate {:.3}", m.kind.name(), m.proposed, m.accepted, m.rate)?;
        }
        writeln!(
            f,
            "loglik trace: mean {:.3}, max {:.3}, window drift {:+.3}",
            self.trace_mean, self.trace_max, self.window_drift
        )?;
        writeln!(
            f,
            "half-split: first {:.3}, second {:.3}, se {:.3}, z {:.2}",
            self.half_split.first_mean, self.half_split.second_mean, self.half_split.std_error, self.half_split.z
        )?;
        let hist: Vec<String> = self.leaf_histogram.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        write!(f, "leaf counts: {}", hist.join(" "))
    }
}
