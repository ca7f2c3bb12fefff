use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// The layout of the trauma screening data: 16 variables and a
/// binary outcome.
pub const TRAUMA_SCHEMA_JSON: &str = include_str!("../../data/trauma_schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

/// One input column. Categorical columns carry their admissible integer codes
/// in ascending order; continuous columns carry none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<i64>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous, levels: Vec::new() }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<i64>) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Categorical, levels }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == VariableKind::Categorical
    }

    /// Whether `value` is an admissible cell value for this column.
    pub fn admits(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self.kind {
            VariableKind::Continuous => true,
            VariableKind::Categorical => {
                value.fract() == 0.0 && self.levels.binary_search(&(value as i64)).is_ok()
            }
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        match self.kind {
            VariableKind::Continuous if !self.levels.is_empty() => Err(DataError::Schema(format!(
                "continuous variable `{}` must not declare levels",
                self.name
            ))),
            VariableKind::Categorical if self.levels.is_empty() => Err(DataError::Schema(format!(
                "categorical variable `{}` declares no levels",
                self.name
            ))),
            VariableKind::Categorical if self.levels.windows(2).any(|w| w[0] >= w[1]) => {
                Err(DataError::Schema(format!(
                    "levels of `{}` must be distinct and ascending",
                    self.name
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered feature columns plus the name of the binary label column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    variables: Vec<VariableSpec>,
    outcome: String,
    outcome_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    variables: Vec<VariableSpec>,
    outcome: String,
    /// Position of the label column in CSV files; last when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome_index: Option<usize>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = DataError;

    fn try_from(raw: RawSchema) -> Result<Self, DataError> {
        let mut schema = Schema::new(raw.variables, raw.outcome)?;
        if let Some(idx) = raw.outcome_index {
            schema = schema.with_outcome_index(idx)?;
        }
        Ok(schema)
    }
}

impl From<Schema> for RawSchema {
    fn from(s: Schema) -> Self {
        RawSchema { variables: s.variables, outcome: s.outcome, outcome_index: s.outcome_index }
    }
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>, outcome: impl Into<String>) -> Result<Self, DataError> {
        let outcome = outcome.into();
        if variables.is_empty() {
            return Err(DataError::Schema("schema needs at least one variable".into()));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate variable name `{}`", v.name)));
            }
        }
        if seen.contains(outcome.as_str()) {
            return Err(DataError::Schema(format!(
                "outcome `{outcome}` is also listed as a feature"
            )));
        }
        Ok(Schema { variables, outcome, outcome_index: None })
    }

    /// Places the label column at `idx` (0-based, among m + 1 CSV columns).
    pub fn with_outcome_index(mut self, idx: usize) -> Result<Self, DataError> {
        if idx > self.variables.len() {
            return Err(DataError::Schema(format!(
                "outcome_index {idx} is beyond the {} CSV columns",
                self.variables.len() + 1
            )));
        }
        self.outcome_index = Some(idx);
        Ok(self)
    }

    /// The bundled 16-variable trauma schema.
    pub fn trauma() -> Self {
        Self::from_json(TRAUMA_SCHEMA_JSON).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, idx: usize) -> &VariableSpec {
        &self.variables[idx]
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    /// Number of feature columns (m).
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn outcome_column(&self) -> usize {
        self.outcome_index.unwrap_or(self.variables.len())
    }

    /// Expected CSV header, label column included.
    pub fn header(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        cols.insert(self.outcome_column(), &self.outcome);
        cols
    }

    pub(crate) fn without(&self, idx: usize) -> Result<Self, DataError> {
        if idx >= self.variables.len() {
            return Err(DataError::InvalidIndex { index: idx, len: self.variables.len() });
        }
        if self.variables.len() == 1 {
            return Err(DataError::NoFeaturesLeft);
        }
        let mut variables = self.variables.clone();
        variables.remove(idx);
        let outcome_index = self.outcome_index.map(|o| if o > idx { o - 1 } else { o });
        Ok(Schema { variables, outcome: self.outcome.clone(), outcome_index })
    }

    pub(crate) fn all_continuous(&self) -> Self {
        let variables = self
            .variables
            .iter()
            .map(|v| VariableSpec::continuous(v.name.clone()))
            .collect();
        Schema { variables, outcome: self.outcome.clone(), outcome_index: self.outcome_index }
    }
}
