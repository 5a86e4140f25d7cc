//! Context-tree conditional probabilities for rule choices.
//!
//! Each choice group (rules sharing a left-hand side) gets its own
//! model predicting which of the group's rules fires, conditioned on
//! the rules applied above the node, innermost first. Rather than fix
//! one context length, a model keeps a tree of context suffixes up to a
//! maximum depth and Bayes-mixes every way of truncating it, so short
//! and long context orders compete purely on how well they predict.
//!
//! Every tree node holds additive-smoothing counts. A node at maximum
//! depth scores its symbols directly; an interior node mixes "stop
//! here" (its own counts) against "split further" (its children's
//! scores, with symbols whose context ran out early landing in a
//! per-node boundary bucket). All scores are sequence probabilities
//! maintained incrementally in log space, so a prediction is just the
//! change in the root score if the symbol were counted now.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{replay, ReplayEvent};
use crate::prob::{ProbProvider, ProbTable};
use crate::rules::{CatId, RuleId, RuleSet};

/// Snapshot format version; bumped on incompatible layout changes.
const SNAPSHOT_VERSION: u32 = 1;

/// Errors from building, training, or loading models.
#[derive(Debug, Error)]
pub enum CtwError {
    #[error("a model needs at least two symbols to choose between")]
    EmptyAlphabet,
    #[error("the zero-redundancy estimator is binary; group {group} has {size} rules")]
    ZrNeedsBinary { group: String, size: usize },
    #[error("snapshot version {found} is not the supported {expected}")]
    SnapshotVersion { found: u32, expected: u32 },
    #[error("snapshot does not match the rule set: {reason}")]
    SnapshotMismatch { reason: String },
    #[error("snapshot is not valid JSON: {0}")]
    SnapshotSyntax(#[from] serde_json::Error),
}

/// Per-symbol counts plus the running log sequence probability of the
/// count updates under the additive-smoothing estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Counts {
    counts: Vec<u32>,
    total: u32,
    log_seq: f64,
}

impl Counts {
    fn new(k: usize) -> Self {
        Counts {
            counts: vec![0; k],
            total: 0,
            log_seq: 0.0,
        }
    }

    /// Log probability the estimator gives `sym` next: c + 1/2 over
    /// total + k/2.
    fn predictive_log(&self, sym: usize) -> f64 {
        let k = self.counts.len() as f64;
        ((self.counts[sym] as f64 + 0.5) / (self.total as f64 + k / 2.0)).ln()
    }

    fn update(&mut self, sym: usize) {
        self.log_seq += self.predictive_log(sym);
        self.counts[sym] += 1;
        self.total += 1;
    }
}

/// Which per-node estimator scores count sequences.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Estimator {
    /// Additive 1/2 smoothing over any alphabet.
    Kt,
    /// The binary variant that stays within a constant of the best
    /// deterministic predictor on one-sided sequences.
    Zr,
}

const LN_HALF: f64 = -std::f64::consts::LN_2;

fn log_sum_exp2(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Zero-redundancy score for binary counts with the given smoothing
/// score: halve it, and while one side is still unseen, hedge with 1/4
/// on the all-one-side predictor.
fn zr_log(zeros: u32, ones: u32, log_seq: f64) -> f64 {
    match (zeros > 0, ones > 0) {
        (false, false) => 0.0,
        (true, true) => LN_HALF + log_seq,
        _ => log_sum_exp2(LN_HALF + log_seq, 2.0 * LN_HALF),
    }
}

/// Current score of a count set under the chosen estimator.
fn score(counts: &Counts, estimator: Estimator) -> f64 {
    match estimator {
        Estimator::Kt => counts.log_seq,
        Estimator::Zr => zr_log(counts.counts[0], counts.counts[1], counts.log_seq),
    }
}

/// Score of a count set if `sym` were counted now.
fn score_with(counts: &Counts, sym: usize, estimator: Estimator) -> f64 {
    let next = counts.log_seq + counts.predictive_log(sym);
    match estimator {
        Estimator::Kt => next,
        Estimator::Zr => zr_log(
            counts.counts[0] + u32::from(sym == 0),
            counts.counts[1] + u32::from(sym == 1),
            next,
        ),
    }
}

/// One context-tree node; children are keyed by the next (deeper)
/// context symbol, which may be any rule id in the grammar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Node {
    own: Counts,
    boundary: Counts,
    children: BTreeMap<u32, Node>,
    log_pw: f64,
}

impl Node {
    fn new(k: usize) -> Self {
        Node {
            own: Counts::new(k),
            boundary: Counts::new(k),
            children: BTreeMap::new(),
            log_pw: 0.0,
        }
    }
}

/// Immutable parameters threaded through the recursive walks.
#[derive(Clone, Copy)]
struct Params {
    k: usize,
    max_depth: usize,
    estimator: Estimator,
    ln_alpha: f64,
    ln_keep: f64,
}

/// The new score of `node` if `sym` were counted with context `ctx`.
fn walk_ro(node: &Node, depth: usize, ctx: &[u32], sym: usize, p: Params) -> f64 {
    if depth == p.max_depth {
        return score_with(&node.own, sym, p.estimator);
    }
    let new_own = score_with(&node.own, sym, p.estimator);
    let (new_boundary, new_children) = match ctx.split_first() {
        None => {
            let sum: f64 = node.children.values().map(|c| c.log_pw).sum();
            (score_with(&node.boundary, sym, p.estimator), sum)
        }
        Some((&next, rest)) => {
            let others: f64 = node
                .children
                .iter()
                .filter(|(key, _)| **key != next)
                .map(|(_, c)| c.log_pw)
                .sum();
            let child_new = match node.children.get(&next) {
                Some(child) => walk_ro(child, depth + 1, rest, sym, p),
                None => walk_ro(&Node::new(p.k), depth + 1, rest, sym, p),
            };
            (score(&node.boundary, p.estimator), others + child_new)
        }
    };
    log_sum_exp2(p.ln_keep + new_own, p.ln_alpha + new_boundary + new_children)
}

/// Same computation as [`walk_ro`], committing the counts and caching
/// the new scores. Keep the arithmetic identical: predictions must
/// match what an update then records.
fn walk_mut(node: &mut Node, depth: usize, ctx: &[u32], sym: usize, p: Params) -> f64 {
    if depth == p.max_depth {
        let new = score_with(&node.own, sym, p.estimator);
        node.own.update(sym);
        node.log_pw = new;
        return new;
    }
    let new_own = score_with(&node.own, sym, p.estimator);
    let (new_boundary, new_children) = match ctx.split_first() {
        None => {
            let sum: f64 = node.children.values().map(|c| c.log_pw).sum();
            let nb = score_with(&node.boundary, sym, p.estimator);
            node.boundary.update(sym);
            (nb, sum)
        }
        Some((&next, rest)) => {
            let others: f64 = node
                .children
                .iter()
                .filter(|(key, _)| **key != next)
                .map(|(_, c)| c.log_pw)
                .sum();
            let child = node
                .children
                .entry(next)
                .or_insert_with(|| Node::new(p.k));
            let child_new = walk_mut(child, depth + 1, rest, sym, p);
            (score(&node.boundary, p.estimator), others + child_new)
        }
    };
    let new = log_sum_exp2(p.ln_keep + new_own, p.ln_alpha + new_boundary + new_children);
    node.own.update(sym);
    node.log_pw = new;
    new
}

/// A context-tree model over one symbol alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtwModel {
    alphabet: Vec<u32>,
    max_depth: usize,
    estimator: Estimator,
    root: Node,
}

impl CtwModel {
    /// A fresh model predicting symbols from `alphabet` with contexts
    /// up to `max_depth` symbols deep.
    pub fn new(alphabet: Vec<u32>, max_depth: usize, estimator: Estimator) -> Result<Self, CtwError> {
        if alphabet.len() < 2 {
            return Err(CtwError::EmptyAlphabet);
        }
        if estimator == Estimator::Zr && alphabet.len() != 2 {
            return Err(CtwError::ZrNeedsBinary {
                group: format!("alphabet {alphabet:?}"),
                size: alphabet.len(),
            });
        }
        let k = alphabet.len();
        Ok(CtwModel {
            alphabet,
            max_depth,
            estimator,
            root: Node::new(k),
        })
    }

    fn params(&self) -> Params {
        let k = self.alphabet.len();
        let alpha = 1.0 / k as f64;
        Params {
            k,
            max_depth: self.max_depth,
            estimator: self.estimator,
            ln_alpha: alpha.ln(),
            ln_keep: (1.0 - alpha).ln(),
        }
    }

    fn index_of(&self, sym: u32) -> usize {
        self.alphabet
            .iter()
            .position(|&s| s == sym)
            .expect("symbol outside the model's alphabet")
    }

    /// Log conditional probability of `sym` after `context`.
    pub fn predict_log(&self, context: &[u32], sym: u32) -> f64 {
        let sym = self.index_of(sym);
        walk_ro(&self.root, 0, context, sym, self.params()) - self.root.log_pw
    }

    /// Records `sym` in context, updating every truncation at once.
    pub fn update(&mut self, context: &[u32], sym: u32) {
        let sym = self.index_of(sym);
        let params = self.params();
        walk_mut(&mut self.root, 0, context, sym, params);
    }

    /// Log probability of everything recorded so far.
    pub fn log_sequence(&self) -> f64 {
        self.root.log_pw
    }

    /// Number of symbols recorded.
    pub fn observations(&self) -> u32 {
        self.root.own.total
    }

    pub fn alphabet(&self) -> &[u32] {
        &self.alphabet
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }
}

/// One model per choice group of a rule set, plus snapshot plumbing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtwBank {
    version: u32,
    max_depth: usize,
    estimator: Estimator,
    models: BTreeMap<CatId, CtwModel>,
}

/// How training on a corpus went, per choice group.
#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Derivations admitted.
    pub trained: usize,
    /// Rejected derivations: corpus index and why.
    pub skipped: Vec<(usize, String)>,
    /// Per-group losses over the admitted events.
    pub per_group: Vec<GroupLoss>,
}

/// Log losses for one choice group: uniform guessing versus the
/// trained models re-scoring the same events with learning frozen.
#[derive(Clone, Debug)]
pub struct GroupLoss {
    pub cat: CatId,
    pub events: usize,
    pub uniform_log_loss: f64,
    pub trained_log_loss: f64,
}

impl CtwBank {
    /// A bank with a fresh model for every group with a real choice.
    pub fn new(rules: &RuleSet, max_depth: usize, estimator: Estimator) -> Result<Self, CtwError> {
        let mut models = BTreeMap::new();
        for cat in 0..rules.category_count() as CatId {
            let group = rules.rules_for(cat);
            if group.len() < 2 {
                continue;
            }
            if estimator == Estimator::Zr && group.len() != 2 {
                return Err(CtwError::ZrNeedsBinary {
                    group: rules.category(cat).to_string(),
                    size: group.len(),
                });
            }
            models.insert(cat, CtwModel::new(group.to_vec(), max_depth, estimator)?);
        }
        Ok(CtwBank {
            version: SNAPSHOT_VERSION,
            max_depth,
            estimator,
            models,
        })
    }

    pub fn model(&self, cat: CatId) -> Option<&CtwModel> {
        self.models.get(&cat)
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    /// Replays each derivation and records every real rule choice in
    /// order. Derivations that do not replay are skipped and reported.
    pub fn train(&mut self, rules: &RuleSet, corpus: &[Vec<RuleId>]) -> TrainReport {
        let mut report = TrainReport::default();
        let mut event_log: Vec<ReplayEvent> = Vec::new();
        for (i, derivation) in corpus.iter().enumerate() {
            match replay(rules, derivation) {
                Ok(replayed) => {
                    report.trained += 1;
                    for event in replayed.events {
                        if self.models.contains_key(&event.lhs) {
                            event_log.push(event);
                        }
                    }
                }
                Err(err) => report.skipped.push((i, err.to_string())),
            }
        }
        for event in &event_log {
            let model = self.models.get_mut(&event.lhs).expect("event from a modeled group");
            model.update(&event.context, event.rule);
        }
        // re-score with learning frozen, against the uniform baseline
        let mut per_group: BTreeMap<CatId, GroupLoss> = BTreeMap::new();
        for event in &event_log {
            let model = &self.models[&event.lhs];
            let entry = per_group.entry(event.lhs).or_insert_with(|| GroupLoss {
                cat: event.lhs,
                events: 0,
                uniform_log_loss: 0.0,
                trained_log_loss: 0.0,
            });
            entry.events += 1;
            entry.uniform_log_loss += (model.alphabet().len() as f64).ln();
            entry.trained_log_loss -= model.predict_log(&event.context, event.rule);
        }
        report.per_group = per_group.into_values().collect();
        report
    }

    /// Serializes the bank, counts and cached scores included, so a
    /// reloaded bank predicts bit-for-bit identically.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bank serializes")
    }

    /// Reads a snapshot written by [`to_json`](CtwBank::to_json).
    pub fn from_json(text: &str) -> Result<Self, CtwError> {
        let bank: CtwBank = serde_json::from_str(text)?;
        if bank.version != SNAPSHOT_VERSION {
            return Err(CtwError::SnapshotVersion {
                found: bank.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        Ok(bank)
    }

    /// Checks the bank's groups line up with a rule set's.
    pub fn validate_against(&self, rules: &RuleSet) -> Result<(), CtwError> {
        for cat in 0..rules.category_count() as CatId {
            let group = rules.rules_for(cat);
            if group.len() < 2 {
                continue;
            }
            match self.models.get(&cat) {
                None => {
                    return Err(CtwError::SnapshotMismatch {
                        reason: format!("no model for {}", rules.category(cat)),
                    })
                }
                Some(model) if model.alphabet() != group => {
                    return Err(CtwError::SnapshotMismatch {
                        reason: format!("model for {} predicts different rules", rules.category(cat)),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Context-sensitive probabilities backed by a bank, with an optional
/// table to fall back on for groups that have seen no training data.
pub struct CtwProvider<'a> {
    rules: &'a RuleSet,
    bank: &'a CtwBank,
    fallback: Option<&'a ProbTable>,
}

impl<'a> CtwProvider<'a> {
    pub fn new(
        rules: &'a RuleSet,
        bank: &'a CtwBank,
        fallback: Option<&'a ProbTable>,
    ) -> Result<Self, CtwError> {
        bank.validate_against(rules)?;
        Ok(CtwProvider {
            rules,
            bank,
            fallback,
        })
    }
}

impl ProbProvider for CtwProvider<'_> {
    fn log_prob(&self, rule: RuleId, context: &[RuleId]) -> f64 {
        let lhs = self.rules.rule(rule).lhs;
        if self.rules.rules_for(lhs).len() < 2 {
            return 0.0; // forced choice
        }
        let model = &self.bank.models[&lhs];
        if model.observations() == 0 {
            if let Some(table) = self.fallback {
                return table.log_prob(rule, context);
            }
        }
        model.predict_log(context, rule)
    }
}
