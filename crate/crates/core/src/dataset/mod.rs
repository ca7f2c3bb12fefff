//! Tabular data under a declared variable schema: CSV ingestion, stratified
//! folds, column removal, uniform noise injection and a synthetic generator
//! laid out like the trauma screening data.

mod schema;
mod synth;

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use schema::{Schema, VariableKind, VariableSpec, TRAUMA_SCHEMA_JSON};
pub use synth::{synth_trauma, synth_trauma_with_flips, PlantedRule, SynthOutput, DEATH_THRESHOLD, LABEL_FLIP_PROB, MIN_SYNTH_ROWS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("header mismatch: expected [{expected}], found [{found}]")]
    HeaderMismatch { expected: String, found: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column} (`{name}`): missing value")]
    Missing { row: usize, column: usize, name: String },
    #[error("row {row}, column {column} (`{name}`): `{value}` is not numeric")]
    NotNumeric { row: usize, column: usize, name: String, value: String },
    #[error("row {row}, column {column} (`{name}`): {value} is not one of the declared levels")]
    BadLevel { row: usize, column: usize, name: String, value: f64 },
    #[error("row {row}, column {column} (`{name}`): label {value} is not 0 or 1")]
    BadLabel { row: usize, column: usize, name: String, value: String },
    #[error("dataset has no rows")]
    Empty,
    #[error("variable index {index} out of range for {len} variables")]
    InvalidIndex { index: usize, len: usize },
    #[error("cannot drop the only remaining variable")]
    NoFeaturesLeft,
    #[error("noise intensity must be nonnegative, got {0}")]
    NegativeIntensity(f64),
    #[error("fold count {k} must be at least 2")]
    TooFewFolds { k: usize },
    #[error("fold count {k} exceeds the size {smallest} of the smallest class")]
    ClassTooSmall { k: usize, smallest: usize },
    #[error("synthetic data needs at least {min} rows, got {n}")]
    TooFewRows { n: usize, min: usize },
    #[error("irrelevant set leaves no variable to carry the label signal")]
    NoSignalVariables,
}

/// Binary-labelled rows validated against a [`Schema`].
///
/// Feature values are stored row-major as `f64`; categorical codes are whole
/// numbers drawn from the column's declared levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    values: Vec<f64>,
    labels: Vec<u8>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        provenance: impl Into<String>,
    ) -> Result<Self, DataError> {
        let m = schema.len();
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(DataError::RowLength { row: 0, expected: rows.len(), found: labels.len() });
        }
        let mut values = Vec::with_capacity(rows.len() * m);
        for (r, (row, &label)) in rows.iter().zip(&labels).enumerate() {
            if row.len() != m {
                return Err(DataError::RowLength { row: r + 1, expected: m, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                let spec = schema.variable(j);
                if !spec.admits(v) {
                    return Err(DataError::BadLevel {
                        row: r + 1,
                        column: j + 1,
                        name: spec.name.clone(),
                        value: v,
                    });
                }
            }
            if label > 1 {
                return Err(DataError::BadLabel {
                    row: r + 1,
                    column: m + 1,
                    name: schema.outcome().to_string(),
                    value: label.to_string(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Dataset { schema, values, labels, provenance: provenance.into() })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    #[inline]
    pub fn value(&self, row: usize, var: usize) -> f64 {
        self.values[row * self.n_features() + var]
    }

    pub fn column(&self, var: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[var])
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Counts of label 0 and label 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let m = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * m);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels,
            provenance: self.provenance.clone(),
        }
    }

    /// Returns a copy with column `var` replaced by `column`. Values are not
    /// checked against the schema; callers use this for perturbation studies.
    pub fn with_column(&self, var: usize, column: &[f64]) -> Dataset {
        assert_eq!(column.len(), self.n_rows());
        let mut out = self.clone();
        let m = self.n_features();
        for (i, &v) in column.iter().enumerate() {
            out.values[i * m + var] = v;
        }
        out
    }

    /// Reads a CSV file whose header matches `schema`.
    pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
        let file = File::open(path)
            .map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
        let mut ds = Self::read_csv(file, schema)?;
        ds.provenance = path.display().to_string();
        Ok(ds)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected = schema.header();
        if header.iter().ne(expected.iter().copied()) {
            return Err(DataError::HeaderMismatch {
                expected: expected.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let m = schema.len();
        let label_col = schema.outcome_column();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            if record.len() != m + 1 {
                return Err(DataError::RowLength { row, expected: m + 1, found: record.len() });
            }
            let mut var = 0;
            for (c, cell) in record.iter().enumerate() {
                let column = c + 1;
                if c == label_col {
                    let label = match cell {
                        "0" => 0,
                        "1" => 1,
                        other => {
                            return Err(DataError::BadLabel {
                                row,
                                column,
                                name: schema.outcome().to_string(),
                                value: other.to_string(),
                            })
                        }
                    };
                    labels.push(label);
                    continue;
                }
                let spec = schema.variable(var);
                if cell.is_empty() {
                    return Err(DataError::Missing { row, column, name: spec.name.clone() });
                }
                let v: f64 = cell.parse().map_err(|_| DataError::NotNumeric {
                    row,
                    column,
                    name: spec.name.clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NotNumeric {
                        row,
                        column,
                        name: spec.name.clone(),
                        value: cell.to_string(),
                    });
                }
                if !spec.admits(v) {
                    return Err(DataError::BadLevel { row, column, name: spec.name.clone(), value: v });
                }
                values.push(v);
                var += 1;
            }
        }
        if labels.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Dataset { schema: schema.clone(), values, labels, provenance: String::from("csv") })
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DataError> {
        let io_err = |e| DataError::Io { path: path.display().to_string(), source: e };
        let mut file = File::create(path).map_err(io_err)?;
        self.write_csv(&mut file)?;
        file.flush().map_err(io_err)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.header())?;
        let label_col = self.schema.outcome_column();
        for (i, row) in self.rows().enumerate() {
            let mut cells: Vec<String> = row
                .iter()
                .zip(self.schema.variables())
                .map(|(&v, spec)| match spec.kind {
                    VariableKind::Categorical => format!("{}", v as i64),
                    VariableKind::Continuous => format!("{v}"),
                })
                .collect();
            cells.insert(label_col, self.labels[i].to_string());
            wtr.write_record(&cells)?;
        }
        wtr.flush().map_err(|e| DataError::Io { path: "<csv writer>".into(), source: e })?;
        Ok(())
    }

    /// Removes feature column `var`; every other column is copied unchanged.
    pub fn drop_variable(&self, var: usize) -> Result<Dataset, DataError> {
        let schema = self.schema.without(var)?;
        let m = self.n_features();
        let values = self
            .values
            .chunks_exact(m)
            .flat_map(|row| row[..var].iter().chain(&row[var + 1..]).copied())
            .collect();
        Ok(Dataset {
            schema,
            values,
            labels: self.labels.clone(),
            provenance: format!("{} \\ {}", self.provenance, self.schema.variable(var).name),
        })
    }

    /// Adds zero-centred uniform noise to every feature: a value `v` in column
    /// `j` becomes `v + range_j * u` with `u ~ U(-intensity/2, intensity/2)`
    /// and `range_j` the observed max - min of the column (1 when constant).
    /// All columns are re-typed continuous. Labels are untouched.
    pub fn add_noise(&self, intensity: f64, seed: u64) -> Result<Dataset, DataError> {
        if !(intensity >= 0.0) {
            return Err(DataError::NegativeIntensity(intensity));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.n_features();
        let n = self.n_rows();
        let mut values = self.values.clone();
        for j in 0..m {
            let (lo, hi) = self
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let range = if hi > lo { hi - lo } else { 1.0 };
            for i in 0..n {
                let u = (rng.random::<f64>() - 0.5) * intensity;
                values[i * m + j] += range * u;
            }
        }
        Ok(Dataset {
            schema: self.schema.all_continuous(),
            values,
            labels: self.labels.clone(),
            provenance: format!("{} + noise({intensity}, seed {seed})", self.provenance),
        })
    }
}

/// Assignment of every row to one of `k` cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Stratified fold assignment. Rows of each class are shuffled and dealt
    /// round-robin, the dealing counter running on from class 0 into class 1,
    /// so total fold sizes and per-class fold sizes each differ by at most one.
    /// Depends only on the labels, `k` and `seed`.
    pub fn stratified(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan, DataError> {
        if k < 2 {
            return Err(DataError::TooFewFolds { k });
        }
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        let smallest = by_class[0].len().min(by_class[1].len());
        if smallest < k {
            return Err(DataError::ClassTooSmall { k, smallest });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignments = vec![0; labels.len()];
        let mut dealt = 0;
        for class in by_class.iter_mut() {
            class.shuffle(&mut rng);
            for &i in class.iter() {
                assignments[i] = dealt % k;
                dealt += 1;
            }
        }
        Ok(FoldPlan { k, assignments })
    }

    /// Returns `(train, test)` row indices for `fold`, each in ascending order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == fold);
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn make_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    FoldPlan::stratified(data.labels(), k, seed)
}
