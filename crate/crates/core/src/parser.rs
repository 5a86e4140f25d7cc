//! Left-to-right best-first parsing, sampling, and derivation replay.
//!
//! A hypothesis is a partially rewritten tree: a frontier of unexpanded
//! leaves (each a category with one tree address per entry), a pointer
//! to the lexicographically least address not yet scanned past, the
//! probability accumulated so far, and the count of input words
//! consumed. The parser keeps hypotheses in a priority queue, always
//! rewriting the node the pointer sits on, so words are consumed
//! strictly left to right no matter how far apart the tree puts them.
//!
//! The same single-step machinery drives three entry points: [`parse`]
//! searches the queue against an input sentence, [`sample`] runs one
//! hypothesis forward making random choices, and [`replay`] follows a
//! given rule sequence, validating it and reporting what each step did.

use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::position::{Pointer, Position};
use crate::prob::ProbProvider;
use crate::rules::{CatId, ItemId, PosSource, Rhs, Rule, RuleId, RuleSet};

/// Persistent list of the rules applied from the root down to a leaf.
struct PathNode {
    rule: RuleId,
    parent: Option<Arc<PathNode>>,
}

/// Rules above a leaf, innermost first.
fn context_of(path: &Option<Arc<PathNode>>) -> Vec<RuleId> {
    let mut out = Vec::new();
    let mut cursor = path;
    while let Some(node) = cursor {
        out.push(node.rule);
        cursor = &node.parent;
    }
    out
}

/// An unexpanded node: a category and the tree address of each entry.
#[derive(Clone)]
struct Leaf {
    cat: CatId,
    /// Parallel to the category's entries; the start leaf has a single
    /// address and no entries.
    positions: Vec<Position>,
    path: Option<Arc<PathNode>>,
}

#[derive(Clone)]
struct Hypothesis {
    leaves: Vec<Leaf>,
    pointer: Pointer,
    log_prob: f64,
    consumed: usize,
    history: Option<Arc<PathNode>>,
    /// Addresses already scanned past, tracked only when checking
    /// invariants.
    scanned: Option<Vec<Position>>,
}

impl Hypothesis {
    fn axiom(track_scanned: bool) -> Self {
        Hypothesis {
            leaves: vec![Leaf {
                cat: RuleSet::START,
                positions: vec![Position::root()],
                path: None,
            }],
            pointer: Pointer::root(),
            log_prob: 0.0,
            consumed: 0,
            history: None,
            scanned: track_scanned.then(Vec::new),
        }
    }

    fn derivation(&self) -> Vec<RuleId> {
        let mut rules = context_of(&self.history);
        rules.reverse();
        rules
    }
}

/// Beam settings; the default prunes nothing.
#[derive(Clone, Copy, Debug)]
pub struct BeamConfig {
    /// Drop queue entries whose probability falls below this fraction
    /// of the current best. Zero disables the relative beam.
    pub rel_factor: f64,
    /// Keep at most this many queue entries, best first.
    pub max_queue: Option<usize>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            rel_factor: 0.0,
            max_queue: None,
        }
    }
}

/// Parser settings.
#[derive(Clone, Debug)]
pub struct ParseConfig {
    pub beam: BeamConfig,
    /// Collect up to this many results, best first.
    pub k_best: usize,
    /// Abort after this many queue pops.
    pub step_budget: u64,
    /// Check structural invariants on every popped hypothesis.
    pub debug_invariants: bool,
    /// Record a trace line per queue pop.
    pub trace: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            beam: BeamConfig::default(),
            k_best: 1,
            step_budget: 1_000_000,
            debug_invariants: false,
            trace: false,
        }
    }
}

/// One complete parse: the rule sequence and its log probability.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseResult {
    pub derivation: Vec<RuleId>,
    pub log_prob: f64,
}

impl ParseResult {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// One trace line: the state of a hypothesis as it was popped, and what
/// the parser did with it.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub step: u64,
    pub action: String,
    pub pointer: String,
    pub log_prob: f64,
    pub frontier: String,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {:.6} {}",
            self.step, self.action, self.pointer, self.log_prob, self.frontier
        )
    }
}

/// Outcome of a parser run.
#[derive(Debug, Default)]
pub struct ParseRun {
    /// Completed parses, best first; empty means ungrammatical (or, if
    /// `aborted`, undetermined).
    pub results: Vec<ParseResult>,
    /// Queue pops performed.
    pub steps: u64,
    /// True when the step budget ran out before the search finished.
    pub aborted: bool,
    pub trace: Vec<TraceStep>,
}

/// A search-internal contradiction; any occurrence is a bug.
#[derive(Debug, Error)]
#[error("parser invariant violated: {0}")]
pub struct ParserBug(String);

struct QueueEntry {
    seq: u64,
    hyp: Hypothesis,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap: higher probability first, then first-in first-out
        self.hyp
            .log_prob
            .total_cmp(&other.hyp.log_prob)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Splits a sentence on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Which frontier entry the pointer selects: leaf index and the entry's
/// address. Exactly one frontier address corresponds to a live pointer;
/// anything else is a broken hypothesis.
fn find_leaf(hyp: &Hypothesis) -> Result<(usize, Position), ParserBug> {
    let pointer = hyp
        .pointer
        .position()
        .ok_or_else(|| ParserBug("find_leaf on exhausted pointer".to_string()))?;
    let mut found: Option<(usize, Position)> = None;
    for (i, leaf) in hyp.leaves.iter().enumerate() {
        for pos in &leaf.positions {
            if pos.corresponds_to(pointer) {
                if found.is_some() {
                    return Err(ParserBug(format!(
                        "pointer {pointer} corresponds to several frontier addresses"
                    )));
                }
                found = Some((i, pos.clone()));
            }
        }
    }
    found.ok_or_else(|| ParserBug(format!("pointer {pointer} corresponds to no frontier address")))
}

/// Applies an expanding rule to `hyp.leaves[leaf_idx]`.
///
/// Children take their entry addresses from the parent per the rule's
/// layout. The pointer descends into the left branch exactly when the
/// rule split the head's address in two and the pointer sat on the
/// head; otherwise it stays put.
fn expand(hyp: &Hypothesis, leaf_idx: usize, rule: &Rule, log_p: f64) -> Hypothesis {
    let leaf = &hyp.leaves[leaf_idx];
    let head_pos = &leaf.positions[0];
    let children = match &rule.rhs {
        Rhs::Children(children) => children,
        Rhs::Item(_) => unreachable!("expand called with a lexical rule"),
    };
    let path = Some(Arc::new(PathNode {
        rule: rule.id,
        parent: leaf.path.clone(),
    }));
    let mut leaves = Vec::with_capacity(hyp.leaves.len() - 1 + children.len());
    leaves.extend_from_slice(&hyp.leaves[..leaf_idx]);
    for child in children {
        let positions = child
            .layout
            .iter()
            .map(|src| match src {
                PosSource::HeadZero => head_pos.child(0),
                PosSource::HeadOne => head_pos.child(1),
                PosSource::FromEntry(i) => leaf.positions[*i].clone(),
            })
            .collect();
        leaves.push(Leaf {
            cat: child.cat,
            positions,
            path: path.clone(),
        });
    }
    leaves.extend_from_slice(&hyp.leaves[leaf_idx + 1..]);
    let splits_head = children
        .iter()
        .flat_map(|c| c.layout.iter())
        .any(|src| matches!(src, PosSource::HeadZero | PosSource::HeadOne));
    let pointer = if splits_head && hyp.pointer == Pointer::At(head_pos.clone()) {
        Pointer::At(head_pos.child(0))
    } else {
        hyp.pointer.clone()
    };
    Hypothesis {
        leaves,
        pointer,
        log_prob: hyp.log_prob + log_p,
        consumed: hyp.consumed,
        history: Some(Arc::new(PathNode {
            rule: rule.id,
            parent: hyp.history.clone(),
        })),
        scanned: hyp.scanned.clone(),
    }
}

/// Applies a lexical rule: the leaf is done, the pointer moves on, and
/// the word (if audible) counts as consumed.
fn scan(hyp: &Hypothesis, leaf_idx: usize, rule: &Rule, log_p: f64, audible: bool) -> Hypothesis {
    let leaf = &hyp.leaves[leaf_idx];
    let alpha = leaf.positions[0].clone();
    let mut leaves = Vec::with_capacity(hyp.leaves.len() - 1);
    leaves.extend_from_slice(&hyp.leaves[..leaf_idx]);
    leaves.extend_from_slice(&hyp.leaves[leaf_idx + 1..]);
    let scanned = hyp.scanned.clone().map(|mut done| {
        done.push(alpha.clone());
        done
    });
    Hypothesis {
        leaves,
        pointer: alpha.successor(),
        log_prob: hyp.log_prob + log_p,
        consumed: hyp.consumed + usize::from(audible),
        history: Some(Arc::new(PathNode {
            rule: rule.id,
            parent: hyp.history.clone(),
        })),
        scanned,
    }
}

/// Renders the frontier for traces, e.g. `[1/=a . +m c, 0/=b a . -m]`.
fn format_frontier(rs: &RuleSet, hyp: &Hypothesis) -> String {
    let mut parts = Vec::with_capacity(hyp.leaves.len());
    for leaf in &hyp.leaves {
        let cat = rs.category(leaf.cat);
        if cat.is_start() {
            parts.push(format!("[{}/start]", leaf.positions[0]));
            continue;
        }
        let entries: Vec<String> = cat
            .entries()
            .iter()
            .zip(&leaf.positions)
            .map(|(entry, pos)| format!("{pos}/{entry}"))
            .collect();
        parts.push(format!("[{}]", entries.join(", ")));
    }
    parts.join(" ")
}

/// Checks the structural invariants of a live hypothesis: frontier and
/// scanned addresses tile the tree (they form a cut), scanned addresses
/// are exactly the least ones, and the pointer marks the least address
/// still open.
fn check_invariants(hyp: &Hypothesis) -> Result<(), ParserBug> {
    let scanned = hyp
        .scanned
        .as_ref()
        .ok_or_else(|| ParserBug("invariant check without scan bookkeeping".to_string()))?;
    let frontier: Vec<&Position> = hyp.leaves.iter().flat_map(|l| l.positions.iter()).collect();
    let mut cut: Vec<&[u8]> = scanned
        .iter()
        .chain(frontier.iter().copied())
        .map(|p| p.digits())
        .collect();
    cut.sort();
    fn tiles(paths: &[&[u8]]) -> bool {
        if paths.len() == 1 {
            return paths[0].is_empty();
        }
        // sorted: all 0-branch paths precede all 1-branch paths
        let split = paths.partition_point(|p| p.first() == Some(&0));
        if split == 0 || split == paths.len() || paths.iter().any(|p| p.is_empty()) {
            return false;
        }
        let zeros: Vec<&[u8]> = paths[..split].iter().map(|p| &p[1..]).collect();
        let ones: Vec<&[u8]> = paths[split..].iter().map(|p| &p[1..]).collect();
        tiles(&zeros) && tiles(&ones)
    }
    if cut.is_empty() || !tiles(&cut) {
        return Err(ParserBug(format!(
            "addresses do not tile the tree: {cut:?}"
        )));
    }
    let min_open = frontier.iter().min();
    if let Some(max_scanned) = scanned.iter().max() {
        if let Some(&min_open) = min_open {
            if max_scanned >= min_open {
                return Err(ParserBug(format!(
                    "scanned address {max_scanned} follows open address {min_open}"
                )));
            }
        }
    }
    match (&hyp.pointer, min_open) {
        (Pointer::Exhausted, None) => {}
        (Pointer::Exhausted, Some(open)) => {
            return Err(ParserBug(format!(
                "pointer exhausted but address {open} is open"
            )))
        }
        (Pointer::At(p), Some(open)) => {
            if !open.corresponds_to(p) {
                return Err(ParserBug(format!(
                    "pointer {p} does not reach least open address {open}"
                )));
            }
        }
        (Pointer::At(p), None) => {
            return Err(ParserBug(format!("pointer {p} but no address is open")))
        }
    }
    Ok(())
}

fn prune(queue: &mut BinaryHeap<QueueEntry>, beam: &BeamConfig) {
    let over_cap = beam.max_queue.is_some_and(|cap| queue.len() > cap);
    if (beam.rel_factor <= 0.0 && !over_cap) || queue.is_empty() {
        return;
    }
    let best = queue.peek().expect("nonempty queue").hyp.log_prob;
    let mut entries = std::mem::take(queue).into_vec();
    if beam.rel_factor > 0.0 {
        let threshold = best + beam.rel_factor.ln();
        entries.retain(|e| e.hyp.log_prob >= threshold);
    }
    if let Some(cap) = beam.max_queue {
        if entries.len() > cap {
            entries.sort_by(|a, b| b.cmp(a));
            entries.truncate(cap);
        }
    }
    *queue = BinaryHeap::from(entries);
}

/// Parses `input` against `rules`, best-first.
///
/// Returns every complete parse found (up to `config.k_best`), best
/// first. An empty result set with `aborted == false` means the input
/// is not in the language (or was pruned away by the beam).
pub fn parse(
    rules: &RuleSet,
    provider: &dyn ProbProvider,
    input: &[String],
    config: &ParseConfig,
) -> Result<ParseRun, ParserBug> {
    let mut run = ParseRun::default();
    let mut queue: BinaryHeap<QueueEntry> = BinaryHeap::new();
    let mut seq: u64 = 0;
    queue.push(QueueEntry {
        seq,
        hyp: Hypothesis::axiom(config.debug_invariants),
    });

    while let Some(entry) = queue.pop() {
        if run.steps >= config.step_budget {
            run.aborted = true;
            break;
        }
        run.steps += 1;
        let mut hyp = entry.hyp;
        if config.debug_invariants {
            check_invariants(&hyp)?;
        }
        let mut trace_action: Option<String> = None;
        let trace_state = config
            .trace
            .then(|| (hyp.pointer.to_string(), hyp.log_prob, format_frontier(rules, &hyp)));

        if hyp.pointer.is_exhausted() {
            if hyp.consumed == input.len() {
                run.results.push(ParseResult {
                    derivation: hyp.derivation(),
                    log_prob: hyp.log_prob,
                });
                trace_action = Some("accept".to_string());
            } else {
                trace_action = Some("discard".to_string());
            }
        } else {
            let (leaf_idx, alpha) = find_leaf(&hyp)?;
            hyp.pointer = Pointer::At(alpha);
            let leaf_cat = hyp.leaves[leaf_idx].cat;
            let context = context_of(&hyp.leaves[leaf_idx].path);
            let simple = rules.category(leaf_cat).is_simple();
            let mut used: Vec<RuleId> = Vec::new();
            for &rid in rules.rules_for(leaf_cat) {
                let rule = rules.rule(rid);
                let log_p = provider.log_prob(rid, &context);
                if log_p == f64::NEG_INFINITY {
                    continue;
                }
                let successor = match &rule.rhs {
                    Rhs::Children(_) => expand(&hyp, leaf_idx, rule, log_p),
                    Rhs::Item(item) => match &rules.item(*item).phon {
                        None => scan(&hyp, leaf_idx, rule, log_p, false),
                        Some(word) => {
                            if input.get(hyp.consumed) != Some(word) {
                                continue;
                            }
                            scan(&hyp, leaf_idx, rule, log_p, true)
                        }
                    },
                };
                used.push(rid);
                seq += 1;
                queue.push(QueueEntry {
                    seq,
                    hyp: successor,
                });
            }
            if config.trace {
                let verb = if simple { "scan" } else { "expand" };
                trace_action = Some(if used.is_empty() {
                    "deadend".to_string()
                } else {
                    let names: Vec<String> = used.iter().map(|id| format!("R{id}")).collect();
                    format!("{verb}[{}]", names.join(","))
                });
            }
            prune(&mut queue, &config.beam);
        }

        if let (Some((pointer, log_prob, frontier)), Some(action)) = (trace_state, trace_action) {
            run.trace.push(TraceStep {
                step: run.steps,
                action,
                pointer,
                log_prob,
                frontier,
            });
        }
        if run.results.len() >= config.k_best {
            break;
        }
    }
    Ok(run)
}

/// Errors from generating a random derivation.
#[derive(Debug, Error)]
pub enum SampleError {
    #[error("derivation exceeded {max_steps} steps")]
    Overflow { max_steps: u64 },
    #[error("reached {category} which no rule rewrites")]
    DeadEnd { category: String },
    #[error(transparent)]
    Bug(#[from] ParserBug),
}

/// A sampled derivation: its rules, surface words in order, and log
/// probability under the provider that drove it.
#[derive(Clone, Debug)]
pub struct Sample {
    pub derivation: Vec<RuleId>,
    pub words: Vec<String>,
    pub log_prob: f64,
}

/// Generates one derivation at random, choosing each rewrite with the
/// provider's probabilities. Deterministic for a fixed seed.
pub fn sample(
    rules: &RuleSet,
    provider: &dyn ProbProvider,
    seed: u64,
    max_steps: u64,
) -> Result<Sample, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hyp = Hypothesis::axiom(false);
    let mut words = Vec::new();
    let mut steps: u64 = 0;
    while !hyp.pointer.is_exhausted() {
        if steps >= max_steps {
            return Err(SampleError::Overflow { max_steps });
        }
        steps += 1;
        let (leaf_idx, alpha) = find_leaf(&hyp)?;
        hyp.pointer = Pointer::At(alpha);
        let leaf_cat = hyp.leaves[leaf_idx].cat;
        let context = context_of(&hyp.leaves[leaf_idx].path);
        let choices = rules.rules_for(leaf_cat);
        let weights: Vec<f64> = choices
            .iter()
            .map(|&rid| provider.log_prob(rid, &context).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        if choices.is_empty() || total <= 0.0 {
            return Err(SampleError::DeadEnd {
                category: rules.category(leaf_cat).to_string(),
            });
        }
        let mut draw = rng.random::<f64>() * total;
        let mut chosen = choices.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            draw -= w;
            if draw <= 0.0 {
                chosen = i;
                break;
            }
        }
        let rule = rules.rule(choices[chosen]);
        let log_p = weights[chosen].ln();
        hyp = match &rule.rhs {
            Rhs::Children(_) => expand(&hyp, leaf_idx, rule, log_p),
            Rhs::Item(item) => {
                let phon = &rules.item(*item).phon;
                if let Some(word) = phon {
                    words.push(word.clone());
                }
                scan(&hyp, leaf_idx, rule, log_p, phon.is_some())
            }
        };
    }
    Ok(Sample {
        derivation: hyp.derivation(),
        words,
        log_prob: hyp.log_prob,
    })
}

/// Errors from replaying a rule sequence.
#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("step {step}: rule id {rule} is not in the rule set")]
    BadRuleId { step: usize, rule: RuleId },
    #[error("step {step}: R{rule} rewrites {expected} but the tree needs {found}")]
    RuleMismatch {
        step: usize,
        rule: RuleId,
        expected: String,
        found: String,
    },
    #[error("step {step}: derivation continues past a finished tree")]
    TrailingRules { step: usize },
    #[error(transparent)]
    Bug(#[from] ParserBug),
}

/// What one replayed step rewrote: the chosen rule, its left-hand side,
/// and the rules above it, innermost first.
#[derive(Clone, Debug)]
pub struct ReplayEvent {
    pub lhs: CatId,
    pub rule: RuleId,
    pub context: Vec<RuleId>,
}

/// The full account of a replayed derivation.
#[derive(Clone, Debug)]
pub struct Replay {
    pub events: Vec<ReplayEvent>,
    /// Lexical ground-outs with their tree addresses, in replay order.
    pub scanned: Vec<(Position, ItemId)>,
    /// Whether the derivation rewrote the whole tree.
    pub complete: bool,
}

/// Replays `derivation` from the start symbol, validating every step.
pub fn replay(rules: &RuleSet, derivation: &[RuleId]) -> Result<Replay, ReplayError> {
    let mut hyp = Hypothesis::axiom(false);
    let mut events = Vec::with_capacity(derivation.len());
    let mut scanned = Vec::new();
    for (step, &rid) in derivation.iter().enumerate() {
        if hyp.pointer.is_exhausted() {
            return Err(ReplayError::TrailingRules { step });
        }
        if rid == 0 || rid as usize > rules.rule_count() {
            return Err(ReplayError::BadRuleId { step, rule: rid });
        }
        let (leaf_idx, alpha) = find_leaf(&hyp)?;
        hyp.pointer = Pointer::At(alpha.clone());
        let rule = rules.rule(rid);
        let leaf_cat = hyp.leaves[leaf_idx].cat;
        if rule.lhs != leaf_cat {
            return Err(ReplayError::RuleMismatch {
                step,
                rule: rid,
                expected: rules.category(rule.lhs).to_string(),
                found: rules.category(leaf_cat).to_string(),
            });
        }
        events.push(ReplayEvent {
            lhs: leaf_cat,
            rule: rid,
            context: context_of(&hyp.leaves[leaf_idx].path),
        });
        hyp = match &rule.rhs {
            Rhs::Children(_) => expand(&hyp, leaf_idx, rule, 0.0),
            Rhs::Item(item) => {
                scanned.push((alpha, *item));
                let audible = rules.item(*item).phon.is_some();
                scan(&hyp, leaf_idx, rule, 0.0, audible)
            }
        };
    }
    Ok(Replay {
        events,
        scanned,
        complete: hyp.pointer.is_exhausted(),
    })
}

/// The sentence a derivation spells out: scanned words in address order.
pub fn derivation_yield(rules: &RuleSet, derivation: &[RuleId]) -> Result<Vec<String>, ReplayError> {
    let mut scanned = replay(rules, derivation)?.scanned;
    scanned.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(scanned
        .into_iter()
        .filter_map(|(_, item)| rules.item(item).phon.clone())
        .collect())
}

/// Log probability of a derivation under a provider, accumulated in
/// replay order exactly as the parser accumulates it.
pub fn derivation_log_prob(
    rules: &RuleSet,
    provider: &dyn ProbProvider,
    derivation: &[RuleId],
) -> Result<f64, ReplayError> {
    let events = replay(rules, derivation)?.events;
    let mut log_prob = 0.0;
    for event in &events {
        log_prob += provider.log_prob(event.rule, &event.context);
    }
    Ok(log_prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::compile;
    use crate::grammar::Lexicon;
    use crate::prob::ProbTable;

    const ANBN: &str = "\
:: c
:: =a +m c
a :: =b a -m
b :: b
b :: =a +m b
";

    fn setup() -> (RuleSet, ProbTable) {
        let rs = compile(&Lexicon::parse(ANBN).unwrap()).unwrap();
        let table = ProbTable::from_text(&rs, "R1 0.7\nMg2 0.4\n").unwrap();
        (rs, table)
    }

    fn parse_str(rs: &RuleSet, table: &ProbTable, text: &str, config: &ParseConfig) -> ParseRun {
        parse(rs, table, &tokenize(text), config).unwrap()
    }

    #[test]
    fn empty_input_takes_the_direct_start() {
        let (rs, table) = setup();
        let run = parse_str(&rs, &table, "", &ParseConfig::default());
        assert_eq!(run.results.len(), 1);
        let best = &run.results[0];
        assert_eq!(rs.format_derivation(&best.derivation, true), "S1 L1");
        assert!((best.prob() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn balanced_pairs_parse_with_expected_probability() {
        let (rs, table) = setup();
        let run = parse_str(&rs, &table, "a a b b", &ParseConfig::default());
        assert_eq!(run.results.len(), 1);
        let best = &run.results[0];
        assert_eq!(
            rs.format_derivation(&best.derivation, true),
            "S2 Mv1 Mg1 Mg3 L3 Mv2 Mg4 Mg2 L3 L4 L5 L2"
        );
        assert!((best.prob() - 0.072).abs() < 1e-12);
        assert_eq!(
            derivation_yield(&rs, &best.derivation).unwrap(),
            tokenize("a a b b")
        );
    }

    #[test]
    fn unbalanced_input_is_ungrammatical() {
        let (rs, table) = setup();
        for bad in ["a a b", "b a", "a", "b b a a"] {
            let run = parse_str(&rs, &table, bad, &ParseConfig::default());
            assert!(run.results.is_empty(), "{bad} should not parse");
            assert!(!run.aborted);
        }
    }

    #[test]
    fn debug_invariants_hold_throughout() {
        let (rs, table) = setup();
        let config = ParseConfig {
            debug_invariants: true,
            ..ParseConfig::default()
        };
        for text in ["", "a b", "a a b b", "a a a b b b"] {
            let run = parse_str(&rs, &table, text, &config);
            assert_eq!(run.results.len(), 1, "{text}");
        }
    }

    #[test]
    fn traces_cover_every_pop() {
        let (rs, table) = setup();
        let config = ParseConfig {
            trace: true,
            ..ParseConfig::default()
        };
        let run = parse_str(&rs, &table, "a b", &config);
        assert_eq!(run.trace.len() as u64, run.steps);
        assert!(run.trace.iter().any(|t| t.action == "accept"));
        let first = &run.trace[0];
        assert_eq!(first.frontier, "[e/start]");
        assert!(first.action.starts_with("expand[R1,R2]"), "{}", first.action);
    }

    #[test]
    fn replay_validates_and_yields() {
        let (rs, table) = setup();
        let derivation = rs
            .parse_derivation("S2 Mv1 Mg1 Mg3 L3 Mv2 Mg4 Mg2 L3 L4 L5 L2")
            .unwrap();
        let replayed = replay(&rs, &derivation).unwrap();
        assert!(replayed.complete);
        assert_eq!(replayed.events.len(), 12);
        let log = derivation_log_prob(&rs, &table, &derivation).unwrap();
        assert!((log.exp() - 0.072).abs() < 1e-12);
        // first expansion happens at the root with no context
        assert!(replayed.events[0].context.is_empty());
        // the yield orders words by tree address, not replay order
        assert_eq!(derivation_yield(&rs, &derivation).unwrap(), tokenize("a a b b"));
    }

    #[test]
    fn replay_rejects_wrong_rules() {
        let (rs, _) = setup();
        // L1 grounds [. c], but after S2 the tree needs something else
        let derivation = rs.parse_derivation("S2 L1").unwrap();
        assert!(matches!(
            replay(&rs, &derivation),
            Err(ReplayError::RuleMismatch { step: 1, .. })
        ));
        let derivation = rs.parse_derivation("S1 L1 L1").unwrap();
        assert!(matches!(
            replay(&rs, &derivation),
            Err(ReplayError::TrailingRules { step: 2 })
        ));
    }

    #[test]
    fn sampling_is_seeded_and_replayable() {
        let (rs, table) = setup();
        for seed in 0..20 {
            let s1 = sample(&rs, &table, seed, 10_000).unwrap();
            let s2 = sample(&rs, &table, seed, 10_000).unwrap();
            assert_eq!(s1.derivation, s2.derivation);
            let replayed = replay(&rs, &s1.derivation).unwrap();
            assert!(replayed.complete);
            assert_eq!(derivation_yield(&rs, &s1.derivation).unwrap(), s1.words);
        }
    }

    #[test]
    fn beam_keeps_the_winner_here() {
        let (rs, table) = setup();
        let beamed = ParseConfig {
            beam: BeamConfig {
                rel_factor: 0.1,
                max_queue: Some(64),
            },
            ..ParseConfig::default()
        };
        let free = ParseConfig::default();
        for text in ["", "a b", "a a b b"] {
            let a = parse_str(&rs, &table, text, &beamed);
            let b = parse_str(&rs, &table, text, &free);
            assert_eq!(a.results, b.results, "{text}");
            assert!(a.steps <= b.steps);
        }
    }

    #[test]
    fn budget_abort_is_reported() {
        let (rs, rules_table) = setup();
        let config = ParseConfig {
            step_budget: 3,
            ..ParseConfig::default()
        };
        let run = parse(&rs, &rules_table, &tokenize("a a b b"), &config).unwrap();
        assert!(run.aborted);
        assert!(run.results.is_empty());
        assert_eq!(run.steps, 3);
    }
}
