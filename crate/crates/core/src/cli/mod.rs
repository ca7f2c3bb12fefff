//! `bdt` command-line surface: synthetic data, training, cross-validated
//! evaluation, importance, ensemble selection and the four-arm comparison.
//!
//! Every command writes its artifacts plus a `manifest.json` into
//! `--out-dir`. Exit codes: 0 success, 1 validation error, 2 I/O error.

mod report;

/// Writes a line to stdout, ignoring failures such as a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    cross_validate, filter_ensemble, fold_seed, run_comparison, variable_importance, AnalysisError, Arm,
    ComparisonSettings, FoldRow, ImportanceMode, ImportanceVector,
};
use crate::bma::{meta_path, BmaError, Ensemble};
use crate::dataset::{make_folds, synth_trauma_with_flips, DataError, Dataset, Schema, TRAUMA_SCHEMA_JSON};
use crate::sampler::{chain_diagnostics, run_chain, ChainConfig};

pub use report::{comparison_tables, eval_table, mean_pm_std, selection_table};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match &e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            DataError::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BmaError> for CliError {
    fn from(e: BmaError) -> Self {
        match &e {
            BmaError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Data(d) => d.into(),
            AnalysisError::Bma(b) => b.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot access {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "bdt", version, about = "Bayesian averaging over MCMC-sampled classification trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset on the bundled trauma schema.
    Synth(SynthArgs),
    /// Sample an ensemble on a whole dataset.
    Train(TrainArgs),
    /// k-fold cross-validation of the averaged ensemble.
    Eval(EvalArgs),
    /// Posterior variable importance.
    Importance(ImportanceArgs),
    /// Drop the trees that split on one variable and compare before/after.
    Filter(FilterArgs),
    /// Four-arm comparison: all variables, dropped, selected, dropped + noise.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON; the bundled trauma schema when omitted.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChainArgs {
    /// Master seed; every fold, arm and noise seed is derived from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Burn-in length in MCMC steps.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Number of trees collected after burn-in.
    #[arg(long)]
    pub collect: Option<usize>,
    /// Steps between collected trees.
    #[arg(long)]
    pub thin: Option<u64>,
    /// Minimum number of training rows per leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Maximum number of splits; defaults to floor(n / min_leaf) - 1.
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Use the full-scale defaults (200000 burn-in steps, 10000 trees).
    #[arg(long)]
    pub paper_scale: bool,
}

impl ChainArgs {
    /// Resolves the chain settings. Unset flags take the full-scale values
    /// when `full_scale` or `--paper-scale` is set, desk-scale values otherwise.
    pub fn config(&self, full_scale: bool) -> Result<ChainConfig, CliError> {
        let base = if full_scale || self.paper_scale { ChainConfig::default() } else { ChainConfig::desk_scale() };
        let cfg = ChainConfig {
            burn_in_steps: self.burn_in.unwrap_or(base.burn_in_steps),
            collect_count: self.collect.unwrap_or(base.collect_count),
            thin: self.thin.unwrap_or(base.thin),
            min_leaf: self.min_leaf.unwrap_or(base.min_leaf),
            s_max: self.s_max.or(base.s_max),
            seed: self.seed,
            ..base
        };
        cfg.validate().map_err(CliError::Validation)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 316)]
    pub rows: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Variables (1-based numbers or names, comma separated) the label ignores.
    #[arg(long, value_delimiter = ',')]
    pub irrelevant: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum ImportanceModeArg {
    /// Share of split nodes testing the variable.
    SplitNodes,
    /// Share of trees containing the variable, renormalized.
    Trees,
}

impl From<ImportanceModeArg> for ImportanceMode {
    fn from(m: ImportanceModeArg) -> Self {
        match m {
            ImportanceModeArg::SplitNodes => ImportanceMode::SplitNodes,
            ImportanceModeArg::Trees => ImportanceMode::Trees,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    /// Previously trained ensemble; otherwise one is sampled from --data.
    #[arg(long, conflicts_with = "data")]
    pub ensemble: Option<PathBuf>,
    #[arg(long, required_unless_present = "ensemble")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = ImportanceModeArg::SplitNodes)]
    pub mode: ImportanceModeArg,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    /// Variable to exclude: 1-based number or name.
    #[arg(long)]
    pub variable: String,
    /// Filter this ensemble (and evaluate on --data if given) instead of
    /// running cross-validation on --data.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long, required_unless_present = "ensemble")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Variable to drop (1-based number or name); least important when omitted.
    #[arg(long)]
    pub variable: Option<String>,
    /// Noise intensity for arm (d).
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command and check its inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub args: serde_json::Value,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects inputs and outputs of one command invocation.
struct Run {
    out_dir: PathBuf,
    inputs: Vec<InputDigest>,
    artifacts: Vec<String>,
}

impl Run {
    fn new(out_dir: &Path) -> Result<Run, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e).context("--out-dir"))?;
        Ok(Run { out_dir: out_dir.to_path_buf(), inputs: Vec::new(), artifacts: Vec::new() })
    }

    fn input(&mut self, path: &Path, flag: &str) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e).context(flag))?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.artifacts.push(p.display().to_string());
        p
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| io_err(&p, e))?;
        Ok(p)
    }

    fn load_schema(&mut self, path: Option<&Path>) -> Result<Schema, CliError> {
        match path {
            Some(p) => {
                self.input(p, "--schema")?;
                Schema::load(p).map_err(|e| CliError::from(e).context("--schema"))
            }
            None => {
                self.inputs.push(InputDigest {
                    path: "<bundled trauma schema>".into(),
                    sha256: sha256_hex(TRAUMA_SCHEMA_JSON.as_bytes()),
                });
                Ok(Schema::trauma())
            }
        }
    }

    fn load_data(&mut self, data: &Path, schema: Option<&Path>) -> Result<Dataset, CliError> {
        let schema = self.load_schema(schema)?;
        self.input(data, "--data")?;
        Dataset::load_csv(data, &schema).map_err(|e| CliError::from(e).context("--data"))
    }

    fn finish<A: Serialize>(
        self,
        command: &str,
        argv: &[String],
        args: &A,
        config: serde_json::Value,
        seed: u64,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            tool: "bdt".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            argv: argv.to_vec(),
            args: serde_json::to_value(args).expect("arguments serialize"),
            config,
            seed,
            inputs: self.inputs,
            artifacts: self.artifacts,
        };
        let p = self.out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        say!("wrote {}", p.display());
        Ok(())
    }
}

/// Resolves a 1-based variable number or a variable name to a 0-based index.
pub fn resolve_variable(spec: &str, names: &[String]) -> Result<usize, CliError> {
    let spec = spec.trim();
    if let Ok(n) = spec.parse::<usize>() {
        return if (1..=names.len()).contains(&n) {
            Ok(n - 1)
        } else {
            Err(CliError::Validation(format!("variable number {n} is outside 1..={}", names.len())))
        };
    }
    names
        .iter()
        .position(|n| n == spec)
        .ok_or_else(|| CliError::Validation(format!("unknown variable `{spec}`")))
}

fn variable_names(schema: &Schema) -> Vec<String> {
    schema.variables().iter().map(|v| v.name.clone()).collect()
}

fn fold_rows_csv(rows: &[(String, &FoldRow)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "arm",
        "fold",
        "n_test",
        "performance_pct",
        "entropy_bits",
        "entropy_per_row",
        "max_train_loglik",
        "ensemble_size",
        "omitted",
    ])
    .expect("in-memory write");
    for (arm, r) in rows {
        w.write_record([
            arm.clone(),
            (r.fold + 1).to_string(),
            r.n_test.to_string(),
            r.performance_pct.to_string(),
            r.entropy_bits.to_string(),
            r.entropy_per_row.to_string(),
            r.max_train_loglik.to_string(),
            r.ensemble_size.to_string(),
            r.omitted.map(|o| o.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn importance_csv(imp: &ImportanceVector, names: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "variable_number", "variable", "importance"]).expect("in-memory write");
    let mut order = imp.ascending();
    order.reverse();
    for (rank, i) in order.into_iter().enumerate() {
        w.write_record([(rank + 1).to_string(), (i + 1).to_string(), names[i].clone(), imp.0[i].to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

pub fn cmd_synth(a: &SynthArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    let schema = Schema::trauma();
    let names = variable_names(&schema);
    let irrelevant = a
        .irrelevant
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| resolve_variable(s, &names).map_err(|e| e.context("--irrelevant")))
        .collect::<Result<Vec<_>, _>>()?;
    let out = synth_trauma_with_flips(a.rows, a.seed, &irrelevant).map_err(|e| CliError::from(e).context("--rows"))?;
    let csv_path = run.path("synthetic.csv");
    out.data.save_csv(&csv_path)?;
    run.write("schema.json", &(schema.to_json() + "\n"))?;
    let rule = out.rule.describe(&schema);
    run.write("rule.txt", &(rule.clone() + "\n"))?;
    let [n0, n1] = out.data.class_counts();
    say!("{} rows: {n1} died, {n0} survived ({} labels flipped)", a.rows, out.flipped.iter().filter(|&&f| f).count());
    say!("{rule}");
    let config = serde_json::json!({ "rows": a.rows, "irrelevant": irrelevant });
    run.finish("synth", argv, a, config, a.seed)
}

pub fn cmd_train(a: &TrainArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    let data = run.load_data(&a.data.data, a.data.schema.as_deref())?;
    let cfg = a.chain.config(true)?;
    let ens = run_chain(&data, &cfg).map_err(CliError::Validation)?;
    let path = run.path("ensemble.jsonl");
    ens.save(&path)?;
    run.artifacts.push(meta_path(&path).display().to_string());
    let diag = chain_diagnostics(&ens);
    run.write("diagnostics.json", &to_json(&diag))?;
    say!(
        "sampled {} trees (burn-in {}, thin {}, min_leaf {}, s_max {}) in {:.1}s",
        ens.len(),
        cfg.burn_in_steps,
        cfg.thin,
        cfg.min_leaf,
        ens.meta().s_max,
        ens.meta().wall_clock_secs
    );
    say!("{diag}");
    run.finish("train", argv, a, serde_json::to_value(&cfg).expect("config serializes"), cfg.seed)
}

pub fn cmd_eval(a: &EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    let data = run.load_data(&a.data.data, a.data.schema.as_deref())?;
    let cfg = a.chain.config(false)?;
    let plan = make_folds(&data, a.folds, fold_seed(cfg.seed)).map_err(|e| CliError::from(e).context("--folds"))?;
    let runs = cross_validate(&data, &plan, &cfg, Arm::All.stream())?;
    let rows: Vec<FoldRow> = runs.iter().enumerate().map(|(f, (e, r))| FoldRow::new(f, r, e.len(), None)).collect();
    let labelled: Vec<(String, &FoldRow)> = rows.iter().map(|r| ("a".to_string(), r)).collect();
    run.write("eval.csv", &fold_rows_csv(&labelled))?;
    let table = eval_table(&format!("{}-fold cross-validation, {} variables", a.folds, data.n_features()), &rows);
    run.write("eval.txt", &table)?;
    say!("{}", table.trim_end());
    run.finish("eval", argv, a, serde_json::to_value(&cfg).expect("config serializes"), cfg.seed)
}

pub fn cmd_importance(a: &ImportanceArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    let (ens, cfg) = match (&a.ensemble, &a.data) {
        (Some(p), _) => {
            run.input(p, "--ensemble")?;
            run.input(&meta_path(p), "--ensemble")?;
            let ens = Ensemble::load(p).map_err(|e| CliError::from(e).context("--ensemble"))?;
            let cfg = ens.meta().config.clone();
            (ens, cfg)
        }
        (None, Some(d)) => {
            let data = run.load_data(d, a.schema.as_deref())?;
            let cfg = a.chain.config(false)?;
            (run_chain(&data, &cfg).map_err(CliError::Validation)?, cfg)
        }
        (None, None) => return Err(CliError::Validation("either --ensemble or --data is required".into())),
    };
    let imp = variable_importance(&ens, a.mode.into())?;
    let names = &ens.meta().variable_names;
    run.write("importance.csv", &importance_csv(&imp, names))?;
    let chart = imp.bar_chart(names);
    run.write("importance.txt", &chart)?;
    say!("{}", chart.trim_end());
    let weakest = imp.argmin();
    say!("least used: {} ({})", weakest + 1, names[weakest]);
    run.finish("importance", argv, a, serde_json::to_value(&cfg).expect("config serializes"), cfg.seed)
}

#[derive(Debug, Serialize)]
struct SelectionSummary {
    excluded_variable: usize,
    excluded_name: String,
    original_size: usize,
    omitted_count: usize,
    kept_count: usize,
}

pub fn cmd_filter(a: &FilterArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    if let Some(p) = &a.ensemble {
        run.input(p, "--ensemble")?;
        run.input(&meta_path(p), "--ensemble")?;
        let ens = Ensemble::load(p).map_err(|e| CliError::from(e).context("--ensemble"))?;
        let names = ens.meta().variable_names.clone();
        let var = resolve_variable(&a.variable, &names).map_err(|e| e.context("--variable"))?;
        let sel = filter_ensemble(&ens, var)?;
        let summary = SelectionSummary {
            excluded_variable: var + 1,
            excluded_name: names[var].clone(),
            original_size: ens.len(),
            omitted_count: sel.omitted_count,
            kept_count: sel.kept.len(),
        };
        let out = run.path("filtered.jsonl");
        sel.kept.save(&out)?;
        run.artifacts.push(meta_path(&out).display().to_string());
        run.write("selection.json", &to_json(&summary))?;
        say!("omitted {} of {} trees using `{}`", sel.omitted_count, ens.len(), names[var]);
        if let Some(d) = &a.data {
            let data = run.load_data(d, a.schema.as_deref())?;
            let before = FoldRow::new(0, &ens.evaluate(&data)?, ens.len(), None);
            let after = FoldRow::new(0, &sel.kept.evaluate(&data)?, sel.kept.len(), Some(sel.omitted_count));
            run.write("filter.csv", &fold_rows_csv(&[("original".into(), &before), ("selected".into(), &after)]))?;
            let table = selection_table(&[before], &[after], &names[var]);
            run.write("filter.txt", &table)?;
            say!("{}", table.trim_end());
        }
        let cfg = ens.meta().config.clone();
        return run.finish("filter", argv, a, serde_json::to_value(&cfg).expect("config serializes"), cfg.seed);
    }

    let d = a.data.as_ref().ok_or_else(|| CliError::Validation("either --ensemble or --data is required".into()))?;
    let data = run.load_data(d, a.schema.as_deref())?;
    let names = variable_names(data.schema());
    let var = resolve_variable(&a.variable, &names).map_err(|e| e.context("--variable"))?;
    let cfg = a.chain.config(false)?;
    let plan = make_folds(&data, a.folds, fold_seed(cfg.seed)).map_err(|e| CliError::from(e).context("--folds"))?;
    let runs = cross_validate(&data, &plan, &cfg, Arm::All.stream())?;
    let mut original = Vec::new();
    let mut selected = Vec::new();
    for (fold, (ens, report)) in runs.iter().enumerate() {
        original.push(FoldRow::new(fold, report, ens.len(), None));
        let (_, test_idx) = plan.split(fold);
        let sel = filter_ensemble(ens, var).map_err(|e| CliError::from(e).context(&format!("fold {}", fold + 1)))?;
        let r = sel.kept.evaluate(&data.subset(&test_idx))?;
        selected.push(FoldRow::new(fold, &r, sel.kept.len(), Some(sel.omitted_count)));
    }
    let mut rows: Vec<(String, &FoldRow)> = original.iter().map(|r| ("original".to_string(), r)).collect();
    rows.extend(selected.iter().map(|r| ("selected".to_string(), r)));
    run.write("filter.csv", &fold_rows_csv(&rows))?;
    let table = selection_table(&original, &selected, &names[var]);
    run.write("filter.txt", &table)?;
    say!("{}", table.trim_end());
    run.finish("filter", argv, a, serde_json::to_value(&cfg).expect("config serializes"), cfg.seed)
}

pub fn cmd_compare(a: &CompareArgs, argv: &[String]) -> Result<(), CliError> {
    let mut run = Run::new(&a.out_dir)?;
    let data = run.load_data(&a.data.data, a.data.schema.as_deref())?;
    let names = variable_names(data.schema());
    let weakest = a
        .variable
        .as_deref()
        .map(|v| resolve_variable(v, &names).map_err(|e| e.context("--variable")))
        .transpose()?;
    if !(a.noise >= 0.0) {
        return Err(CliError::Validation(format!("--noise: intensity must be nonnegative, got {}", a.noise)));
    }
    let settings = ComparisonSettings { folds: a.folds, chain: a.chain.config(false)?, weakest, noise_intensity: a.noise };
    let report = run_comparison(&data, &settings)?;
    let mut rows = Vec::new();
    for arm in &report.arms {
        rows.extend(arm.folds.iter().map(|r| (arm.arm.letter().to_string(), r)));
    }
    run.write("compare.csv", &fold_rows_csv(&rows))?;
    run.write("importance.csv", &importance_csv(&report.importance, &names))?;
    let tables = comparison_tables(&report, &names);
    run.write("compare.txt", &tables)?;
    run.write("compare.json", &to_json(&report))?;
    say!("{}", tables.trim_end());
    run.finish(
        "compare",
        argv,
        a,
        serde_json::to_value(&settings).expect("settings serialize"),
        settings.chain.seed,
    )
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, argv),
        Command::Train(a) => cmd_train(a, argv),
        Command::Eval(a) => cmd_eval(a, argv),
        Command::Importance(a) => cmd_importance(a, argv),
        Command::Filter(a) => cmd_filter(a, argv),
        Command::Compare(a) => cmd_compare(a, argv),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(&cli, &argv[1..]) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
