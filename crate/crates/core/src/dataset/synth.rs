use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset, Schema};

pub const MIN_SYNTH_ROWS: usize = 20;

/// Probability that a generated label is flipped after the rule is applied.
pub const LABEL_FLIP_PROB: f64 = 0.05;

/// Points threshold: a patient dies under the rule when the score reaches it.
pub const DEATH_THRESHOLD: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cond {
    AtLeast(f64),
    AtMost(f64),
    Below(f64),
    Above(f64),
    Equals(f64),
}

impl Cond {
    fn holds(self, v: f64) -> bool {
        match self {
            Cond::AtLeast(t) => v >= t,
            Cond::AtMost(t) => v <= t,
            Cond::Below(t) => v < t,
            Cond::Above(t) => v > t,
            Cond::Equals(t) => v == t,
        }
    }

    fn describe(self, name: &str) -> String {
        match self {
            Cond::AtLeast(t) => format!("{name} >= {t}"),
            Cond::AtMost(t) => format!("{name} <= {t}"),
            Cond::Below(t) => format!("{name} < {t}"),
            Cond::Above(t) => format!("{name} > {t}"),
            Cond::Equals(t) => format!("{name} == {t}"),
        }
    }
}

/// Risk condition and points per variable, in schema order.
const TERMS: [(Cond, u32); 16] = [
    (Cond::AtLeast(50.0), 2),       // age
    (Cond::Equals(1.0), 2),         // gender (male)
    (Cond::Equals(0.0), 2),         // injury type (penetrating)
    (Cond::AtLeast(2.0), 2),        // head
    (Cond::AtLeast(1.0), 2),        // facial
    (Cond::AtLeast(3.0), 2),        // chest
    (Cond::AtLeast(2.0), 2),        // abdominal / pelvic contents
    (Cond::AtLeast(2.0), 2),        // limbs / bony pelvis
    (Cond::AtLeast(2.0), 2),        // external
    (Cond::Above(22.0), 2),         // respiration rate
    (Cond::Below(110.0), 2),        // systolic blood pressure
    (Cond::AtMost(3.0), 2),         // GCS eye
    (Cond::AtMost(5.0), 2),         // GCS motor
    (Cond::AtMost(3.0), 2),         // GCS verbal
    (Cond::Below(93.0), 2),         // oximetry
    (Cond::Above(100.0), 2),        // heart rate
];

/// The point-score rule that generates synthetic labels.
///
/// Each relevant variable contributes its points when its condition holds;
/// the label is 1 (died) iff the total reaches [`DEATH_THRESHOLD`]. Variables
/// in the irrelevant set contribute nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedRule {
    irrelevant: BTreeSet<usize>,
}

impl PlantedRule {
    pub fn new(irrelevant: &[usize]) -> Result<Self, DataError> {
        let irrelevant: BTreeSet<usize> = irrelevant.iter().copied().collect();
        if let Some(&bad) = irrelevant.iter().find(|&&i| i >= TERMS.len()) {
            return Err(DataError::InvalidIndex { index: bad, len: TERMS.len() });
        }
        if irrelevant.len() == TERMS.len() {
            return Err(DataError::NoSignalVariables);
        }
        Ok(PlantedRule { irrelevant })
    }

    pub fn score(&self, row: &[f64]) -> u32 {
        TERMS
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.irrelevant.contains(j))
            .filter(|(j, (cond, _))| cond.holds(row[*j]))
            .map(|(_, (_, w))| *w)
            .sum()
    }

    pub fn label(&self, row: &[f64]) -> u8 {
        u8::from(self.score(row) >= DEATH_THRESHOLD)
    }

    pub fn describe(&self, schema: &Schema) -> String {
        let terms: Vec<String> = TERMS
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.irrelevant.contains(j))
            .map(|(j, (cond, w))| format!("{w}*[{}]", cond.describe(&schema.variable(j).name)))
            .collect();
        format!(
            "died iff {} >= {DEATH_THRESHOLD}; label flipped with probability {LABEL_FLIP_PROB}",
            terms.join(" + ")
        )
    }
}

/// Loading of each relevant variable on the latent severity factor.
pub const SEVERITY_LOADING: f64 = 0.6;

/// Marginal distribution of one column, drawn through a Gaussian copula: a
/// standard-normal score `z` is mapped onto the marginal, with `sign` giving
/// the direction in which higher severity moves the value.
enum Gen {
    Normal { mean: f64, sd: f64, lo: f64, hi: f64, sign: f64 },
    Levels { cumulative: Vec<f64>, sign: f64 },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2))
}

impl Gen {
    fn levels(weights: &[f64], sign: f64) -> Gen {
        let total: f64 = weights.iter().sum();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w / total;
                Some(*acc)
            })
            .collect();
        Gen::Levels { cumulative, sign }
    }

    fn from_score(&self, z: f64) -> f64 {
        match self {
            Gen::Normal { mean, sd, lo, hi, sign } => (mean + sign * sd * z).clamp(*lo, *hi).round(),
            Gen::Levels { cumulative, sign } => {
                let u = std_normal_cdf(sign * z);
                cumulative.iter().position(|&c| u <= c).unwrap_or(cumulative.len() - 1) as f64
            }
        }
    }
}

fn generators() -> Vec<Gen> {
    vec![
        Gen::Normal { mean: 42.0, sd: 19.0, lo: 16.0, hi: 95.0, sign: 1.0 },
        Gen::levels(&[0.3, 0.7], 1.0),
        Gen::levels(&[0.35, 0.65], -1.0),
        Gen::levels(&[0.45, 0.15, 0.12, 0.1, 0.08, 0.06, 0.04], 1.0),
        Gen::levels(&[0.6, 0.18, 0.12, 0.06, 0.04], 1.0),
        Gen::levels(&[0.4, 0.12, 0.12, 0.12, 0.1, 0.08, 0.06], 1.0),
        Gen::levels(&[0.55, 0.12, 0.12, 0.1, 0.07, 0.04], 1.0),
        Gen::levels(&[0.35, 0.15, 0.2, 0.15, 0.1, 0.05], 1.0),
        Gen::levels(&[0.4, 0.3, 0.2, 0.1], 1.0),
        Gen::Normal { mean: 18.0, sd: 6.0, lo: 4.0, hi: 45.0, sign: 1.0 },
        Gen::Normal { mean: 125.0, sd: 30.0, lo: 40.0, hi: 220.0, sign: -1.0 },
        Gen::levels(&[0.05, 0.1, 0.1, 0.15, 0.6], -1.0),
        Gen::levels(&[0.05, 0.05, 0.05, 0.05, 0.1, 0.15, 0.55], -1.0),
        Gen::levels(&[0.05, 0.1, 0.1, 0.1, 0.15, 0.5], -1.0),
        Gen::Normal { mean: 95.0, sd: 4.0, lo: 70.0, hi: 100.0, sign: -1.0 },
        Gen::Normal { mean: 90.0, sd: 22.0, lo: 30.0, hi: 200.0, sign: 1.0 },
    ]
}

/// A generated dataset plus which rows had their rule label flipped.
#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub data: Dataset,
    pub rule: PlantedRule,
    pub flipped: Vec<bool>,
}

/// Draws `n` rows under the trauma schema. Relevant features share a latent
/// severity factor (loading [`SEVERITY_LOADING`], Gaussian copula over each
/// column's fixed marginal), so they are correlated with one another the way
/// injury scores and vital signs are. Features in `irrelevant` (0-based
/// indices) use independent noise only and so are independent of every other
/// column and of the label. The label comes from [`PlantedRule`] over the
/// relevant variables, followed by a [`LABEL_FLIP_PROB`] label flip.
pub fn synth_trauma_with_flips(n: usize, seed: u64, irrelevant: &[usize]) -> Result<SynthOutput, DataError> {
    if n < MIN_SYNTH_ROWS {
        return Err(DataError::TooFewRows { n, min: MIN_SYNTH_ROWS });
    }
    let rule = PlantedRule::new(irrelevant)?;
    let schema = Schema::trauma();
    let gens = generators();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut flipped = Vec::with_capacity(n);
    for _ in 0..n {
        let severity: f64 = rng.sample(StandardNormal);
        let load = SEVERITY_LOADING;
        let row: Vec<f64> = gens
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let noise: f64 = rng.sample(StandardNormal);
                if rule.irrelevant.contains(&j) {
                    return g.from_score(noise);
                }
                g.from_score(load * severity + (1.0 - load * load).sqrt() * noise)
            })
            .collect();
        let flip = rng.random::<f64>() < LABEL_FLIP_PROB;
        labels.push(rule.label(&row) ^ u8::from(flip));
        flipped.push(flip);
        rows.push(row);
    }
    let irrelevant_names: Vec<&str> =
        rule.irrelevant.iter().map(|&j| schema.variable(j).name.as_str()).collect();
    let provenance = format!(
        "synth_trauma(n={n}, seed={seed}, irrelevant=[{}]); {}",
        irrelevant_names.join(","),
        rule.describe(&schema)
    );
    let data = Dataset::new(schema, rows, labels, provenance)?;
    Ok(SynthOutput { data, rule, flipped })
}

pub fn synth_trauma(n: usize, seed: u64, irrelevant: &[usize]) -> Result<Dataset, DataError> {
    synth_trauma_with_flips(n, seed, irrelevant).map(|s| s.data)
}
