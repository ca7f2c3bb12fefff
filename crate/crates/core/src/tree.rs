//! Binary classification trees: split rules, routing, leaf statistics, the
//! Dirichlet-multinomial marginal likelihood and the JSON-lines record format.
//!
//! Node positions are preorder indices (root = 0). They are the node ids used
//! by routing results and by the serialized format.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dataset::{Dataset, VariableKind};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("feature vector has {found} values but the tree splits on variable index {needed}")]
    Arity { needed: usize, found: usize },
    #[error("tree has not been annotated with training counts")]
    NotAnnotated,
    #[error("no node at position {0}")]
    NoSuchNode(usize),
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("node {0} is not a split with two leaf children")]
    NotPrunable(usize),
    #[error("node {0} is not a split")]
    NotASplit(usize),
    #[error("malformed tree record at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("invalid tree record: {0}")]
    Structure(String),
}

/// Test applied at a split node. Rows go left iff `x[var] <= thr`
/// (threshold rules) or `x[var] == level` (level rules).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitRule {
    Threshold { var: usize, thr: f64 },
    Level { var: usize, level: i64 },
}

impl SplitRule {
    pub fn var(&self) -> usize {
        match *self {
            SplitRule::Threshold { var, .. } | SplitRule::Level { var, .. } => var,
        }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        match *self {
            SplitRule::Threshold { var, thr } => x[var] <= thr,
            SplitRule::Level { var, level } => x[var] == level as f64,
        }
    }
}

/// Hyperparameters of the tree model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePrior {
    /// Largest admissible number of split nodes.
    pub s_max: usize,
    /// Fewest training rows a leaf may hold.
    pub min_leaf: usize,
    /// Symmetric Dirichlet pseudo-count per class.
    pub dirichlet_alpha: f64,
}

impl Default for TreePrior {
    fn default() -> Self {
        TreePrior { s_max: 1, min_leaf: 3, dirichlet_alpha: 1.0 }
    }
}

impl TreePrior {
    pub fn validate(&self) -> Result<(), String> {
        if self.s_max < 1 {
            return Err("s_max must be at least 1".into());
        }
        if self.min_leaf < 1 {
            return Err("min_leaf must be at least 1".into());
        }
        if !(self.dirichlet_alpha > 0.0) || !self.dirichlet_alpha.is_finite() {
            return Err("dirichlet_alpha must be positive".into());
        }
        Ok(())
    }

    /// Log prior of a tree shape and its rules: uniform over split counts
    /// `0..=s_max`, uniform over the Catalan(k) shapes with `k` splits, and for
    /// each split uniform over the splittable variables then over that
    /// variable's candidate rules. `rule_counts[v]` is the number of candidate
    /// rules of variable `v`; variables with none are not splittable.
    ///
    /// Returns `-inf` for trees exceeding `s_max`.
    pub fn log_prior(&self, tree: &DecisionTree, rule_counts: &[usize]) -> f64 {
        let k = tree.n_splits();
        if k > self.s_max {
            return f64::NEG_INFINITY;
        }
        let splittable = rule_counts.iter().filter(|&&c| c > 0).count() as f64;
        let mut lp = -((self.s_max + 1) as f64).ln() - ln_catalan(k);
        for rule in tree.rules() {
            lp -= (splittable * rule_counts[rule.var()] as f64).ln();
        }
        lp
    }
}

/// Natural log of the k-th Catalan number, the count of binary tree shapes
/// with `k` internal nodes.
pub fn ln_catalan(k: usize) -> f64 {
    let k = k as f64;
    ln_gamma(2.0 * k + 1.0) - ln_gamma(k + 1.0) - ln_gamma(k + 2.0)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log Dirichlet-multinomial marginal of one leaf's class counts:
/// `ln B(n0 + a, n1 + a) - ln B(a, a)`.
pub fn leaf_log_marginal(counts: [u32; 2], alpha: f64) -> f64 {
    ln_beta(counts[0] as f64 + alpha, counts[1] as f64 + alpha) - ln_beta(alpha, alpha)
}

/// Posterior mean class probabilities of a leaf, indexed by label.
pub fn leaf_predictive(counts: [u32; 2], alpha: f64) -> [f64; 2] {
    let total = counts[0] as f64 + counts[1] as f64 + 2.0 * alpha;
    let p1 = (counts[1] as f64 + alpha) / total;
    [1.0 - p1, p1]
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf { counts: [u32; 2] },
    Split { rule: SplitRule, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn empty_leaf() -> Node {
        Node::Leaf { counts: [0, 0] }
    }

    fn size(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    fn nth(&self, pos: usize) -> Option<&Node> {
        if pos == 0 {
            return Some(self);
        }
        match self {
            Node::Leaf { .. } => None,
            Node::Split { left, right, .. } => {
                let ls = left.size();
                if pos <= ls {
                    left.nth(pos - 1)
                } else {
                    right.nth(pos - 1 - ls)
                }
            }
        }
    }

    fn nth_mut(&mut self, pos: usize) -> Option<&mut Node> {
        if pos == 0 {
            return Some(self);
        }
        match self {
            Node::Leaf { .. } => None,
            Node::Split { left, right, .. } => {
                let ls = left.size();
                if pos <= ls {
                    left.nth_mut(pos - 1)
                } else {
                    right.nth_mut(pos - 1 - ls)
                }
            }
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    fn preorder<'a>(&'a self, pos: &mut usize, f: &mut impl FnMut(usize, &'a Node)) {
        f(*pos, self);
        *pos += 1;
        if let Node::Split { left, right, .. } = self {
            left.preorder(pos, f);
            right.preorder(pos, f);
        }
    }

    fn annotate(&mut self, data: &Dataset, rows: &mut [usize]) {
        match self {
            Node::Leaf { counts } => {
                let ones = rows.iter().filter(|&&r| data.label(r) == 1).count() as u32;
                *counts = [rows.len() as u32 - ones, ones];
            }
            Node::Split { rule, left, right } => {
                let mut mid = 0;
                for i in 0..rows.len() {
                    if rule.goes_left(data.row(rows[i])) {
                        rows.swap(i, mid);
                        mid += 1;
                    }
                }
                let (l, r) = rows.split_at_mut(mid);
                left.annotate(data, l);
                right.annotate(data, r);
            }
        }
    }
}

/// A binary decision tree over numeric feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    root: Node,
    annotated: bool,
}

impl Default for DecisionTree {
    fn default() -> Self {
        Self::leaf()
    }
}

impl DecisionTree {
    /// A tree made of one leaf.
    pub fn leaf() -> Self {
        DecisionTree { root: Node::empty_leaf(), annotated: false }
    }

    pub fn stump(rule: SplitRule) -> Self {
        let mut t = Self::leaf();
        t.grow(0, rule).expect("root is a leaf");
        t
    }

    pub fn from_root(root: Node) -> Self {
        DecisionTree { root, annotated: false }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn is_annotated(&self) -> bool {
        self.annotated
    }

    pub fn n_nodes(&self) -> usize {
        self.root.size()
    }

    pub fn n_leaves(&self) -> usize {
        self.n_splits() + 1
    }

    pub fn n_splits(&self) -> usize {
        self.rules().count()
    }

    pub fn node(&self, pos: usize) -> Option<&Node> {
        self.root.nth(pos)
    }

    fn visit<'a>(&'a self, mut f: impl FnMut(usize, &'a Node)) {
        let mut pos = 0;
        self.root.preorder(&mut pos, &mut f);
    }

    /// Split rules in preorder.
    pub fn rules(&self) -> impl Iterator<Item = SplitRule> + '_ {
        let mut out = Vec::new();
        self.visit(|_, n| {
            if let Node::Split { rule, .. } = n {
                out.push(*rule);
            }
        });
        out.into_iter()
    }

    pub fn uses_variable(&self, var: usize) -> bool {
        self.rules().any(|r| r.var() == var)
    }

    pub fn leaf_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(|p, n| {
            if n.is_leaf() {
                out.push(p)
            }
        });
        out
    }

    pub fn split_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(|p, n| {
            if !n.is_leaf() {
                out.push(p)
            }
        });
        out
    }

    /// Split nodes whose children are both leaves.
    pub fn prunable_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(|p, n| {
            if let Node::Split { left, right, .. } = n {
                if left.is_leaf() && right.is_leaf() {
                    out.push(p);
                }
            }
        });
        out
    }

    /// Leaf class counts in preorder.
    pub fn leaf_counts(&self) -> Vec<[u32; 2]> {
        let mut out = Vec::new();
        self.visit(|_, n| {
            if let Node::Leaf { counts } = n {
                out.push(*counts);
            }
        });
        out
    }

    /// Replaces the leaf at `pos` by a split with two empty leaves.
    pub fn grow(&mut self, pos: usize, rule: SplitRule) -> Result<(), TreeError> {
        let node = self.root.nth_mut(pos).ok_or(TreeError::NoSuchNode(pos))?;
        if !node.is_leaf() {
            return Err(TreeError::NotALeaf(pos));
        }
        *node = Node::Split {
            rule,
            left: Box::new(Node::empty_leaf()),
            right: Box::new(Node::empty_leaf()),
        };
        self.annotated = false;
        Ok(())
    }

    /// Collapses the split at `pos`, whose children must be leaves, into one
    /// leaf. Returns the removed rule.
    pub fn prune(&mut self, pos: usize) -> Result<SplitRule, TreeError> {
        let node = self.root.nth_mut(pos).ok_or(TreeError::NoSuchNode(pos))?;
        let rule = match node {
            Node::Split { rule, left, right } if left.is_leaf() && right.is_leaf() => *rule,
            _ => return Err(TreeError::NotPrunable(pos)),
        };
        *node = Node::empty_leaf();
        self.annotated = false;
        Ok(rule)
    }

    /// Replaces the rule of the split at `pos`, returning the old one.
    pub fn set_rule(&mut self, pos: usize, new_rule: SplitRule) -> Result<SplitRule, TreeError> {
        match self.root.nth_mut(pos) {
            Some(Node::Split { rule, .. }) => {
                let old = std::mem::replace(rule, new_rule);
                self.annotated = false;
                Ok(old)
            }
            Some(_) => Err(TreeError::NotASplit(pos)),
            None => Err(TreeError::NoSuchNode(pos)),
        }
    }

    fn max_var(&self) -> Option<usize> {
        self.rules().map(|r| r.var()).max()
    }

    /// Position of the leaf that `x` falls into.
    pub fn route(&self, x: &[f64]) -> Result<usize, TreeError> {
        let mut node = &self.root;
        let mut pos = 0;
        loop {
            match node {
                Node::Leaf { .. } => return Ok(pos),
                Node::Split { rule, left, right } => {
                    if rule.var() >= x.len() {
                        return Err(TreeError::Arity { needed: rule.var(), found: x.len() });
                    }
                    if rule.goes_left(x) {
                        pos += 1;
                        node = left;
                    } else {
                        pos += 1 + left.size();
                        node = right;
                    }
                }
            }
        }
    }

    /// Class counts of the leaf that `x` falls into.
    pub fn leaf_for(&self, x: &[f64]) -> Result<[u32; 2], TreeError> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { counts } => return Ok(*counts),
                Node::Split { rule, left, right } => {
                    if rule.var() >= x.len() {
                        return Err(TreeError::Arity { needed: rule.var(), found: x.len() });
                    }
                    node = if rule.goes_left(x) { left } else { right };
                }
            }
        }
    }

    /// Recomputes every leaf's class counts from `data`.
    pub fn annotate(&mut self, data: &Dataset) -> Result<(), TreeError> {
        if let Some(v) = self.max_var() {
            if v >= data.n_features() {
                return Err(TreeError::Arity { needed: v, found: data.n_features() });
            }
        }
        let mut rows: Vec<usize> = (0..data.n_rows()).collect();
        self.root.annotate(data, &mut rows);
        self.annotated = true;
        Ok(())
    }

    pub fn annotated(mut self, data: &Dataset) -> Result<Self, TreeError> {
        self.annotate(data)?;
        Ok(self)
    }

    /// Smallest leaf size; requires annotation.
    pub fn min_leaf_size(&self) -> u32 {
        self.leaf_counts().iter().map(|c| c[0] + c[1]).min().unwrap_or(0)
    }

    /// Sum over leaves of the Dirichlet-multinomial log marginal likelihood.
    pub fn log_marginal_likelihood(&self, prior: &TreePrior) -> Result<f64, TreeError> {
        if !self.annotated {
            return Err(TreeError::NotAnnotated);
        }
        Ok(self
            .leaf_counts()
            .into_iter()
            .map(|c| leaf_log_marginal(c, prior.dirichlet_alpha))
            .sum())
    }

    /// Serializes as one JSON line with preorder node ids.
    pub fn to_record(&self, loglik: f64) -> String {
        let mut nodes = Vec::with_capacity(self.n_nodes());
        self.visit(|pos, n| {
            nodes.push(match n {
                Node::Leaf { counts } => NodeRecord { id: pos, leaf: Some(*counts), ..Default::default() },
                Node::Split { rule, left, .. } => NodeRecord {
                    id: pos,
                    split: Some(RuleRecord::from(*rule)),
                    left: Some(pos + 1),
                    right: Some(pos + 1 + left.size()),
                    leaf: None,
                },
            })
        });
        let rec = TreeRecord { nodes, root: 0, loglik };
        serde_json::to_string(&rec).expect("tree record serializes")
    }

    /// Parses a line written by [`DecisionTree::to_record`]. Node ids may be
    /// any distinct integers; the parsed tree is marked annotated because
    /// leaves carry their counts.
    pub fn from_record(line: &str) -> Result<(DecisionTree, f64), TreeError> {
        let rec: TreeRecord = serde_json::from_str(line).map_err(|e| TreeError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        let mut by_id: HashMap<usize, &NodeRecord> = HashMap::new();
        for n in &rec.nodes {
            if by_id.insert(n.id, n).is_some() {
                return Err(TreeError::Structure(format!("duplicate node id {}", n.id)));
            }
        }
        let mut visited = HashSet::new();
        let root = build_node(rec.root, &by_id, &mut visited)?;
        if visited.len() != by_id.len() {
            return Err(TreeError::Structure(format!(
                "{} node(s) unreachable from root {}",
                by_id.len() - visited.len(),
                rec.root
            )));
        }
        Ok((DecisionTree { root, annotated: true }, rec.loglik))
    }
}

fn build_node(
    id: usize,
    by_id: &HashMap<usize, &NodeRecord>,
    visited: &mut HashSet<usize>,
) -> Result<Node, TreeError> {
    let rec = by_id
        .get(&id)
        .ok_or_else(|| TreeError::Structure(format!("dangling reference to node id {id}")))?;
    if !visited.insert(id) {
        return Err(TreeError::Structure(format!("node id {id} is reachable twice (cycle or shared child)")));
    }
    match (rec.split, rec.left, rec.right, rec.leaf) {
        (None, None, None, Some(counts)) => Ok(Node::Leaf { counts }),
        (Some(rule), Some(l), Some(r), None) => Ok(Node::Split {
            rule: rule.into(),
            left: Box::new(build_node(l, by_id, visited)?),
            right: Box::new(build_node(r, by_id, visited)?),
        }),
        _ => Err(TreeError::Structure(format!(
            "node id {id} must be either a leaf or a split with two children"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    nodes: Vec<NodeRecord>,
    root: usize,
    loglik: f64,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<RuleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf: Option<[u32; 2]>,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum RuleRecord {
    Threshold { var: usize, thr: f64 },
    Level { var: usize, level: i64 },
}

impl From<SplitRule> for RuleRecord {
    fn from(r: SplitRule) -> Self {
        match r {
            SplitRule::Threshold { var, thr } => RuleRecord::Threshold { var, thr },
            SplitRule::Level { var, level } => RuleRecord::Level { var, level },
        }
    }
}

impl From<RuleRecord> for SplitRule {
    fn from(r: RuleRecord) -> Self {
        match r {
            RuleRecord::Threshold { var, thr } => SplitRule::Threshold { var, thr },
            RuleRecord::Level { var, level } => SplitRule::Level { var, level },
        }
    }
}

/// Candidate split rules for `var` on `data`.
///
/// Continuous columns: a threshold at every distinct observed value except
/// the maximum, so both sides are nonempty. Categorical columns: an equality
/// test per level present in the data; with exactly two levels present only
/// the lower one is kept since both tests induce the same partition. A
/// constant column yields no rules.
pub fn candidate_rules(data: &Dataset, var: usize) -> Vec<SplitRule> {
    let mut vals: Vec<f64> = data.column(var).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.dedup();
    if vals.len() <= 1 {
        return Vec::new();
    }
    match data.schema().variable(var).kind {
        VariableKind::Continuous => {
            vals.pop();
            vals.into_iter().map(|thr| SplitRule::Threshold { var, thr }).collect()
        }
        VariableKind::Categorical => {
            if vals.len() == 2 {
                vals.pop();
            }
            vals.into_iter().map(|v| SplitRule::Level { var, level: v as i64 }).collect()
        }
    }
}
