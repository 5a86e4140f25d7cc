//! Probability models over rules.
//!
//! Rules with a common left-hand side form a choice group, and a model
//! assigns each group a distribution. The parser only ever asks one
//! question, through [`ProbProvider`]: how probable is this rule, given
//! the rules applied above it? A plain [`ProbTable`] ignores the
//! conditioning; the context-tree estimator in [`crate::ctw`] uses it.

use std::collections::HashMap;
use std::fmt;

use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::rules::{CatId, Rhs, RuleId, RuleSet};

/// Tolerance for checking that a choice group sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Edges at least this probable count as certain in loop detection.
const UNIT_EDGE_TOLERANCE: f64 = 1e-12;

/// Conditional rule probabilities, queried in log space.
///
/// `context` lists the rule ids applied on the path from the root to
/// the node being rewritten, innermost (most recent) first. Providers
/// are free to ignore it.
pub trait ProbProvider {
    /// Natural log of the probability of `rule` in this context.
    fn log_prob(&self, rule: RuleId, context: &[RuleId]) -> f64;
}

/// A context-free probability assignment: one number per rule.
#[derive(Clone, Debug)]
pub struct ProbTable {
    probs: Vec<f64>,
    logs: Vec<f64>,
}

/// Errors from reading a probability assignment file.
#[derive(Debug, Error)]
pub enum ProbError {
    #[error("line {line}: expected `<rule> <probability>`")]
    BadLine { line: usize },
    #[error("line {line}: unknown rule `{token}`")]
    UnknownRule { line: usize, token: String },
    #[error("line {line}: rule `{token}` listed twice")]
    DuplicateRule { line: usize, token: String },
    #[error("line {line}: probability `{token}` is not a number in [0, 1]")]
    BadValue { line: usize, token: String },
    #[error("rules for {group} have listed probabilities summing to {sum}, over 1")]
    GroupOverflow { group: String, sum: f64 },
    #[error("rules for {group} are all listed but sum to {sum}, not 1")]
    GroupSum { group: String, sum: f64 },
}

impl ProbTable {
    /// Uniform distribution over each choice group.
    pub fn uniform(rules: &RuleSet) -> Self {
        let mut probs = vec![0.0; rules.rule_count()];
        for cat in 0..rules.category_count() as CatId {
            let group = rules.rules_for(cat);
            if group.is_empty() {
                continue;
            }
            let p = 1.0 / group.len() as f64;
            for &id in group {
                probs[(id - 1) as usize] = p;
            }
        }
        Self::from_probs(probs)
    }

    fn from_probs(probs: Vec<f64>) -> Self {
        let logs = probs.iter().map(|&p| p.ln()).collect();
        ProbTable { probs, logs }
    }

    /// Reads `<rule> <probability>` lines; `#` starts a comment and the
    /// rule may be named `R<id>` or by alias. Rules missing from a group
    /// share the group's leftover mass uniformly.
    pub fn from_text(rules: &RuleSet, text: &str) -> Result<Self, ProbError> {
        let mut listed: HashMap<RuleId, f64> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            };
            let mut fields = content.split_whitespace();
            let Some(name) = fields.next() else { continue };
            let (Some(value), None) = (fields.next(), fields.next()) else {
                return Err(ProbError::BadLine { line });
            };
            let id = rules.resolve(name).ok_or_else(|| ProbError::UnknownRule {
                line,
                token: name.to_string(),
            })?;
            if listed.contains_key(&id) {
                return Err(ProbError::DuplicateRule {
                    line,
                    token: name.to_string(),
                });
            }
            let p: f64 = value.parse().map_err(|_| ProbError::BadValue {
                line,
                token: value.to_string(),
            })?;
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ProbError::BadValue {
                    line,
                    token: value.to_string(),
                });
            }
            listed.insert(id, p);
        }

        let mut probs = vec![0.0; rules.rule_count()];
        for cat in 0..rules.category_count() as CatId {
            let group = rules.rules_for(cat);
            if group.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            let mut missing = Vec::new();
            for &id in group {
                match listed.get(&id) {
                    Some(&p) => {
                        sum += p;
                        probs[(id - 1) as usize] = p;
                    }
                    None => missing.push(id),
                }
            }
            let group_name = || rules.category(cat).to_string();
            if sum > 1.0 + SUM_TOLERANCE {
                return Err(ProbError::GroupOverflow {
                    group: group_name(),
                    sum,
                });
            }
            if missing.is_empty() {
                if (sum - 1.0).abs() > SUM_TOLERANCE {
                    return Err(ProbError::GroupSum {
                        group: group_name(),
                        sum,
                    });
                }
            } else {
                let share = ((1.0 - sum) / missing.len() as f64).max(0.0);
                for id in missing {
                    probs[(id - 1) as usize] = share;
                }
            }
        }
        Ok(Self::from_probs(probs))
    }

    /// Renders the table as `R<id> <probability>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("R{} {}\n", i + 1, p));
        }
        out
    }

    pub fn prob(&self, rule: RuleId) -> f64 {
        self.probs[(rule - 1) as usize]
    }

    pub fn log(&self, rule: RuleId) -> f64 {
        self.logs[(rule - 1) as usize]
    }

    /// Checks every choice group sums to one within [`SUM_TOLERANCE`].
    pub fn validate(&self, rules: &RuleSet) -> Result<(), ProbError> {
        for cat in 0..rules.category_count() as CatId {
            let group = rules.rules_for(cat);
            if group.is_empty() {
                continue;
            }
            let sum: f64 = group.iter().map(|&id| self.prob(id)).sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(ProbError::GroupSum {
                    group: rules.category(cat).to_string(),
                    sum,
                });
            }
        }
        Ok(())
    }
}

impl ProbProvider for ProbTable {
    fn log_prob(&self, rule: RuleId, _context: &[RuleId]) -> f64 {
        self.log(rule)
    }
}

/// A cycle of certain rewrites: following `rules` around `cats` comes
/// back to the start with probability one, so best-first search would
/// grind on it forever.
#[derive(Clone, Debug)]
pub struct UnitLoop {
    pub cats: Vec<CatId>,
    pub rules: Vec<RuleId>,
}

impl UnitLoop {
    /// Human-readable description against a rule set.
    pub fn describe(&self, rules: &RuleSet) -> String {
        let mut out = String::new();
        for (cat, rule) in self.cats.iter().zip(&self.rules) {
            out.push_str(&format!("{} -R{}-> ", rules.category(*cat), rule));
        }
        out.push_str(&rules.category(self.cats[0]).to_string());
        out
    }
}

/// Finds cycles whose rewrite probabilities multiply to one.
///
/// Since probabilities never exceed one, a product-one cycle is exactly
/// a cycle of edges that each have probability one; those are found by
/// strongly-connected-component analysis of the certain-edge graph.
pub fn unit_loops(rules: &RuleSet, table: &ProbTable) -> Vec<UnitLoop> {
    let mut graph: DiGraph<CatId, RuleId> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..rules.category_count())
        .map(|cat| graph.add_node(cat as CatId))
        .collect();
    for rule in rules.rules() {
        if table.prob(rule.id) < 1.0 - UNIT_EDGE_TOLERANCE {
            continue;
        }
        if let Rhs::Children(children) = &rule.rhs {
            for child in children {
                graph.add_edge(
                    nodes[rule.lhs as usize],
                    nodes[child.cat as usize],
                    rule.id,
                );
            }
        }
    }

    let mut found = Vec::new();
    for scc in petgraph::algo::tarjan_scc(&graph) {
        let in_scc = |n: NodeIndex| scc.contains(&n);
        let has_internal_edge = scc.iter().any(|&n| {
            graph
                .edges(n)
                .any(|e| in_scc(petgraph::visit::EdgeRef::target(&e)))
        });
        if !has_internal_edge {
            continue;
        }
        // walk certain edges inside the component until a node repeats
        let mut path: Vec<(NodeIndex, RuleId)> = Vec::new();
        let mut seen: Vec<NodeIndex> = Vec::new();
        let mut node = scc[0];
        let cycle = loop {
            if let Some(at) = seen.iter().position(|&n| n == node) {
                break at;
            }
            seen.push(node);
            let edge = graph
                .edges(node)
                .filter(|e| in_scc(petgraph::visit::EdgeRef::target(e)))
                .min_by_key(|e| *petgraph::visit::EdgeRef::weight(e))
                .expect("strongly connected node keeps an internal out-edge");
            path.push((node, *petgraph::visit::EdgeRef::weight(&edge)));
            node = petgraph::visit::EdgeRef::target(&edge);
        };
        found.push(UnitLoop {
            cats: path[cycle..].iter().map(|&(n, _)| graph[n]).collect(),
            rules: path[cycle..].iter().map(|&(_, r)| r).collect(),
        });
    }
    found
}

impl fmt::Display for UnitLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit loop through {} categories", self.cats.len())
    }
}
