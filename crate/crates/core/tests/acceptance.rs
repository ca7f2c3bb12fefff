//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs without the libtest harness so the lines print in
//! order and long checks can report what they measured.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bdt::analysis::{run_comparison, Arm, ComparisonSettings, ImportanceVector};
use bdt::bma::{evaluate_predictions, mean_std, Prediction};
use bdt::dataset::VariableSpec;
use bdt::sampler::derive_seed;
use bdt::tree::{candidate_rules, leaf_log_marginal};
use bdt::{
    chain_diagnostics, filter_ensemble, run_chain, synth_trauma, variable_importance, ChainConfig, Dataset,
    DecisionTree, ImportanceMode, Schema, TreePrior,
};

/// Planted-irrelevant variable: number 9 in the schema, index 8.
const IRRELEVANT: usize = 8;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk(seed: u64) -> ChainConfig {
    ChainConfig { seed, ..ChainConfig::desk_scale() }
}

/// 12 rows, one continuous and one three-level categorical variable.
fn oracle_dataset() -> Dataset {
    let schema = Schema::new(
        vec![VariableSpec::continuous("x"), VariableSpec::categorical("c", vec![0, 1, 2])],
        "y",
    )
    .unwrap();
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
    let c = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 2.0, 2.0];
    let y = [0, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1, 0];
    let rows = x.iter().zip(&c).map(|(&a, &b)| vec![a, b]).collect();
    Dataset::new(schema, rows, y.to_vec(), "stump oracle").unwrap()
}

fn tree_key(t: &DecisionTree) -> String {
    match t.rules().next() {
        None => "leaf".to_string(),
        Some(r) => format!("{r:?}"),
    }
}

fn criterion_1_stump_oracle() -> Outcome {
    let started = Instant::now();
    let data = oracle_dataset();
    let prior = TreePrior { s_max: 1, min_leaf: 1, dirichlet_alpha: 1.0 };

    // exact posterior over {leaf} ∪ {all stumps}; the prior is uniform over
    // the two sizes and, within stumps, uniform over variable then rule
    let rules: Vec<_> = (0..data.n_features()).map(|v| candidate_rules(&data, v)).collect();
    let splittable = rules.iter().filter(|r| !r.is_empty()).count() as f64;
    let mut log_post: Vec<(String, f64)> = Vec::new();
    let leaf = DecisionTree::leaf().annotated(&data).unwrap();
    log_post.push((tree_key(&leaf), leaf.log_marginal_likelihood(&prior).unwrap() + 0.5f64.ln()));
    for rs in &rules {
        for &rule in rs {
            let t = DecisionTree::stump(rule).annotated(&data).unwrap();
            let lp = 0.5f64.ln() - (splittable * rs.len() as f64).ln();
            log_post.push((tree_key(&t), t.log_marginal_likelihood(&prior).unwrap() + lp));
        }
    }
    let top = log_post.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_post.iter().map(|(_, l)| (l - top).exp()).sum();
    let exact: HashMap<String, f64> = log_post.iter().map(|(k, l)| (k.clone(), (l - top).exp() / z)).collect();

    let config = ChainConfig {
        burn_in_steps: 5_000,
        collect_count: 200_000,
        thin: 1,
        min_leaf: 1,
        s_max: Some(1),
        seed: 11,
        ..ChainConfig::default()
    };
    let ens = run_chain(&data, &config).map_err(|e| e.to_string())?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in ens.trees() {
        *counts.entry(tree_key(t)).or_default() += 1;
    }
    let unknown: Vec<&String> = counts.keys().filter(|k| !exact.contains_key(*k)).collect();
    if !unknown.is_empty() {
        return Err(format!("sampled trees outside the enumeration: {unknown:?}"));
    }
    let n = ens.len() as f64;
    let tv = 0.5
        * exact
            .iter()
            .map(|(k, p)| (counts.get(k).copied().unwrap_or(0) as f64 / n - p).abs())
            .sum::<f64>();
    let secs = started.elapsed().as_secs_f64();
    check(
        tv < 0.05 && secs < 60.0 && ens.len() == 200_000,
        format!("{} states, {} samples, TV {tv:.4} (< 0.05), {secs:.1}s (< 60s)", exact.len(), ens.len()),
    )
}

fn run_bdt(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bdt")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("bdt {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn digest(path: &Path) -> Result<String, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(bdt::cli::sha256_hex(&bytes))
}

fn criterion_2_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).display().to_string();
    run_bdt(&["synth", "--rows", "316", "--seed", "7", "--irrelevant", "9", "--out-dir", &p("synth")])?;
    let csv = p("synth/synthetic.csv");
    let train = |out: &str| {
        run_bdt(&["train", "--data", &csv, "--burn-in", "20000", "--collect", "1000", "--seed", "1", "--out-dir", &p(out)])
    };
    train("run1")?;
    train("run2")?;
    let mut same = true;
    let mut first = String::new();
    for f in ["ensemble.jsonl", "ensemble.meta.json", "diagnostics.json"] {
        let a = digest(&dir.path().join("run1").join(f))?;
        let b = digest(&dir.path().join("run2").join(f))?;
        same &= a == b;
        if f == "ensemble.jsonl" {
            first = a;
        }
    }
    check(same, format!("two `bdt train` runs, ensemble sha256 {}…; ensemble, metadata, diagnostics identical: {same}", &first[..16]))
}

fn criterion_3_importance_ranking() -> Outcome {
    let started = Instant::now();
    let mut hits = 0;
    let mut ranks = Vec::new();
    for rep in 0..5u64 {
        let data = synth_trauma(316, 7 + rep, &[IRRELEVANT]).map_err(|e| e.to_string())?;
        let per_chain = (0..5u64)
            .map(|c| {
                let ens = run_chain(&data, &desk(derive_seed(rep, &[c])))?;
                variable_importance(&ens, ImportanceMode::SplitNodes).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, String>>()?;
        let mean = ImportanceVector::mean(&per_chain);
        let rank = mean.ascending().iter().position(|&v| v == IRRELEVANT).unwrap();
        hits += usize::from(rank < 3);
        ranks.push(rank + 1);
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        hits >= 4 && secs < 600.0,
        format!("variable 9 ascending rank per repetition {ranks:?}; bottom 3 in {hits}/5 (>= 4), {secs:.0}s"),
    )
}

fn comparison() -> Result<bdt::analysis::ComparisonReport, String> {
    let data = synth_trauma(316, 7, &[IRRELEVANT]).map_err(|e| e.to_string())?;
    let settings = ComparisonSettings { folds: 5, chain: desk(1), weakest: Some(IRRELEVANT), noise_intensity: 0.01 };
    run_comparison(&data, &settings).map_err(|e| e.to_string())
}

fn criterion_4_selection_equality(report: &bdt::analysis::ComparisonReport) -> Outcome {
    let a = &report.arm(Arm::All).folds;
    let c = &report.arm(Arm::Selected).folds;
    let mut applicable = 0;
    let mut ok = true;
    let mut notes = Vec::new();
    for (x, y) in a.iter().zip(c) {
        let omitted = y.omitted.unwrap_or(0);
        let share = omitted as f64 / (omitted + y.ensemble_size) as f64;
        let dp = (y.performance_pct - x.performance_pct).abs();
        let de = (y.entropy_bits - x.entropy_bits).abs() / x.entropy_bits;
        if share < 0.10 {
            applicable += 1;
            ok &= dp <= 0.5 && de <= 0.05;
        }
        notes.push(format!(
            "fold {}: omitted {:.1}%, Δperf {dp:.2}pp (one row = {:.2}pp), Δentropy {:.2}%",
            x.fold + 1,
            100.0 * share,
            100.0 / x.n_test as f64,
            100.0 * de
        ));
    }
    check(ok && applicable > 0, format!("{applicable} applicable folds; {}", notes.join("; ")))
}

fn criterion_5_filter_invariance() -> Outcome {
    let data = synth_trauma(316, 7, &[IRRELEVANT]).map_err(|e| e.to_string())?;
    let ens = run_chain(&data, &desk(5))?;
    let sel = filter_ensemble(&ens, IRRELEVANT).map_err(|e| e.to_string())?;
    let test = synth_trauma(316, 8, &[IRRELEVANT]).map_err(|e| e.to_string())?;
    let mut col: Vec<f64> = test.column(IRRELEVANT).collect();
    col.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let shuffled = test.with_column(IRRELEVANT, &col);
    let mut changed = 0;
    for i in 0..test.n_rows() {
        let p = sel.kept.predict(test.row(i)).map_err(|e| e.to_string())?;
        let q = sel.kept.predict(shuffled.row(i)).map_err(|e| e.to_string())?;
        changed += usize::from(p.p != q.p);
    }
    check(
        changed == 0 && !sel.kept.trees().iter().any(|t| t.uses_variable(IRRELEVANT)),
        format!(
            "{} of {} trees kept; {changed} of {} predictions changed after shuffling variable 9",
            sel.kept.len(),
            ens.len(),
            test.n_rows()
        ),
    )
}

fn criterion_6_chain_health() -> Outcome {
    let data = synth_trauma(316, 7, &[IRRELEVANT]).map_err(|e| e.to_string())?;
    let ens = run_chain(&data, &ChainConfig { min_leaf: 3, ..desk(1) })?;
    let d = chain_diagnostics(&ens);
    check(
        (0.05..=0.60).contains(&d.overall_rate) && d.half_split.z < 2.0,
        format!(
            "acceptance {:.3} in [0.05, 0.60]; half-split means {:.2} vs {:.2}, batch-means se {:.2}, z {:.2} (< 2)",
            d.overall_rate, d.half_split.first_mean, d.half_split.second_mean, d.half_split.std_error, d.half_split.z
        ),
    )
}

fn ln_fact(n: u32) -> f64 {
    (1..=n).map(f64::from).product::<f64>().ln()
}

fn criterion_7_metrics() -> Outcome {
    // predictive normalization over random queries
    let data = synth_trauma(316, 7, &[IRRELEVANT]).map_err(|e| e.to_string())?;
    let ens = run_chain(&data, &ChainConfig { collect_count: 200, ..desk(2) })?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ranges: Vec<(f64, f64)> = (0..data.n_features())
        .map(|j| data.column(j).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))))
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.random_range(lo - 1.0..=hi + 1.0)).collect();
        let p = ens.predict(&x).map_err(|e| e.to_string())?;
        if p.p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(format!("probability outside [0, 1]: {:?}", p.p));
        }
        worst = worst.max((p.p[0] + p.p[1] - 1.0).abs());
    }

    let certain = evaluate_predictions(vec![(1, Prediction { p: [0.0, 1.0] }), (0, Prediction { p: [1.0, 0.0] })], 0.0);
    let uniform = evaluate_predictions((0..63).map(|i| ((i % 2) as u8, Prediction { p: [0.5, 0.5] })).collect(), 0.0);

    // Dirichlet-multinomial leaf marginal = B(n0 + a, n1 + a) / B(a, a)
    let mut beta_err: f64 = 0.0;
    for (n0, n1) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (3, 2), (5, 5), (10, 3), (7, 0), (12, 9)] {
        let exact = ln_fact(n0) + ln_fact(n1) - ln_fact(n0 + n1 + 1);
        beta_err = beta_err.max((leaf_log_marginal([n0, n1], 1.0) - exact).abs());
    }
    // half-integer alpha: B(1.5, 0.5) / B(0.5, 0.5) = 1/2 and B(1.5, 1.5) / B(0.5, 0.5) = 1/8
    beta_err = beta_err.max((leaf_log_marginal([1, 0], 0.5) - 0.5f64.ln()).abs());
    beta_err = beta_err.max((leaf_log_marginal([1, 1], 0.5) - 0.125f64.ln()).abs());

    check(
        worst < 1e-12 && certain.entropy_bits == 0.0 && uniform.entropy_bits == 63.0 && beta_err < 1e-12,
        format!(
            "max |Σp - 1| {worst:.1e} over 10000 queries; certain entropy {}; 63-row uniform entropy {}; max Beta error {beta_err:.1e}",
            certain.entropy_bits.abs(),
            uniform.entropy_bits
        ),
    )
}

fn criterion_8_noise_arm(report: &bdt::analysis::ComparisonReport) -> Outcome {
    let (a, _) = mean_std(&report.arm(Arm::All).performance());
    let (d, _) = mean_std(&report.arm(Arm::DroppedNoise).performance());
    let delta = d - a;
    let direction = if delta > 0.0 {
        "higher"
    } else if delta < 0.0 {
        "lower"
    } else {
        "equal"
    };
    check(
        delta.abs() <= 5.0,
        format!("arm (a) {a:.2}%, arm (d) {d:.2}%: (d) is {direction} by {:.2}pp (|Δ| <= 5)", delta.abs()),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS [{n}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{n}] {name}: {detail}");
            }
        }
    };
    report(1, "stump posterior oracle", criterion_1_stump_oracle());
    report(2, "train determinism", criterion_2_determinism());
    report(3, "importance ranking", criterion_3_importance_ranking());
    match comparison() {
        Ok(cmp) => {
            report(4, "selection equality", criterion_4_selection_equality(&cmp));
            report(5, "filtered-ensemble invariance", criterion_5_filter_invariance());
            report(6, "chain health", criterion_6_chain_health());
            report(7, "metric unit checks", criterion_7_metrics());
            report(8, "noise arm", criterion_8_noise_arm(&cmp));
        }
        Err(e) => {
            report(4, "selection equality", Err(format!("comparison failed: {e}")));
            report(5, "filtered-ensemble invariance", criterion_5_filter_invariance());
            report(6, "chain health", criterion_6_chain_health());
            report(7, "metric unit checks", criterion_7_metrics());
            report(8, "noise arm", Err(format!("comparison failed: {e}")));
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
