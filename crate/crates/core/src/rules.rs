//! Top-down rewrite rules over categories, and the compiled rule set.
//!
//! Rules rewrite one category into child categories (or into a lexical
//! item), each tagged with the operation that produced it. Rule ids are
//! 1-based and double as the symbols a probability model conditions on.
//! Each rule also gets a short alias like `Mg2` (second merge-style rule)
//! for readable derivation listings.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::category::Category;
use crate::grammar::{LexicalItem, Lexicon};

/// Index of a category in a [`RuleSet`]; 0 is the start symbol.
pub type CatId = u32;
/// 1-based rule number.
pub type RuleId = u32;
/// Index of an item in the lexicon.
pub type ItemId = u32;

/// The operation a rule undoes, read top-down.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RuleKind {
    /// Rewrites the start symbol to a completed head.
    Start,
    /// Splits off the complement of a head that has selected nothing yet.
    Unmerge1,
    /// Splits off a specifier of a head that has already selected.
    Unmerge2,
    /// Recognizes a mover as the complement of an unselecting head.
    Unmerge3Simple,
    /// Recognizes a mover as a specifier of a head that has selected.
    Unmerge3Complex,
    /// Introduces a mover for a licensor with no matching mover yet.
    Unmove1,
    /// Matches a licensor against a mover already present.
    Unmove2,
    /// Rewrites a simple category to a lexical item.
    Lexicalize,
}

impl RuleKind {
    /// Human-readable label used in rule tables.
    pub fn label(self) -> &'static str {
        match self {
            RuleKind::Start => "Start",
            RuleKind::Unmerge1 => "Unmerge-1",
            RuleKind::Unmerge2 => "Unmerge-2",
            RuleKind::Unmerge3Simple => "Unmerge-3-simple",
            RuleKind::Unmerge3Complex => "Unmerge-3-complex",
            RuleKind::Unmove1 => "Unmove-1",
            RuleKind::Unmove2 => "Unmove-2",
            RuleKind::Lexicalize => "Lexicalize",
        }
    }

    pub fn parse_label(text: &str) -> Option<Self> {
        Some(match text {
            "Start" => RuleKind::Start,
            "Unmerge-1" => RuleKind::Unmerge1,
            "Unmerge-2" => RuleKind::Unmerge2,
            "Unmerge-3-simple" => RuleKind::Unmerge3Simple,
            "Unmerge-3-complex" => RuleKind::Unmerge3Complex,
            "Unmove-1" => RuleKind::Unmove1,
            "Unmove-2" => RuleKind::Unmove2,
            "Lexicalize" => RuleKind::Lexicalize,
            _ => return None,
        })
    }

    /// Prefix of the per-kind alias family.
    pub fn alias_prefix(self) -> &'static str {
        match self {
            RuleKind::Start => "S",
            RuleKind::Unmerge1
            | RuleKind::Unmerge2
            | RuleKind::Unmerge3Simple
            | RuleKind::Unmerge3Complex => "Mg",
            RuleKind::Unmove1 | RuleKind::Unmove2 => "Mv",
            RuleKind::Lexicalize => "L",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a child entry's tree address comes from when a rule fires on a
/// node at head address `h` with parent entry addresses `p[..]`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PosSource {
    /// `h · 0`
    HeadZero,
    /// `h · 1`
    HeadOne,
    /// `p[i]` copied from parent entry `i` (0 is the head).
    FromEntry(usize),
}

/// One child category plus the address recipe for each of its entries.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RhsChild {
    pub cat: CatId,
    /// Parallel to the child category's entries.
    pub layout: Vec<PosSource>,
}

/// Right-hand side of a rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Rhs {
    Children(Vec<RhsChild>),
    Item(ItemId),
}

/// A single rewrite rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub id: RuleId,
    pub kind: RuleKind,
    pub lhs: CatId,
    pub rhs: Rhs,
}

/// A compiled grammar: interned categories, rules, and lookup tables.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub(crate) lexicon: Lexicon,
    pub(crate) cats: Vec<Category>,
    pub(crate) cat_ids: HashMap<Category, CatId>,
    pub(crate) rules: Vec<Rule>,
    pub(crate) by_lhs: Vec<Vec<RuleId>>,
    pub(crate) aliases: Vec<String>,
    pub(crate) alias_ids: HashMap<String, RuleId>,
}

impl RuleSet {
    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn item(&self, id: ItemId) -> &LexicalItem {
        &self.lexicon.items()[id as usize]
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[(id - 1) as usize]
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// All categories; index 0 is the start symbol.
    pub fn categories(&self) -> &[Category] {
        &self.cats
    }

    pub fn category_count(&self) -> usize {
        self.cats.len()
    }

    pub fn category(&self, id: CatId) -> &Category {
        &self.cats[id as usize]
    }

    pub fn category_id(&self, cat: &Category) -> Option<CatId> {
        self.cat_ids.get(cat).copied()
    }

    pub const START: CatId = 0;

    /// Rule ids whose left-hand side is `cat`, in rule order.
    pub fn rules_for(&self, cat: CatId) -> &[RuleId] {
        &self.by_lhs[cat as usize]
    }

    /// Short alias like `Mg2` for a rule.
    pub fn alias(&self, id: RuleId) -> &str {
        &self.aliases[(id - 1) as usize]
    }

    /// Resolves `R<id>` or an alias to a rule id.
    pub fn resolve(&self, token: &str) -> Option<RuleId> {
        if let Some(digits) = token.strip_prefix('R') {
            if let Ok(id) = digits.parse::<RuleId>() {
                if id >= 1 && (id as usize) <= self.rules.len() {
                    return Some(id);
                }
            }
        }
        self.alias_ids.get(token).copied()
    }

    /// Renders one rule as a table line: `R<id>\t<lhs> -> <rhs>\t<kind>`.
    pub fn format_rule(&self, rule: &Rule) -> String {
        let rhs = match &rule.rhs {
            Rhs::Children(children) => children
                .iter()
                .map(|child| self.cats[child.cat as usize].to_string())
                .collect::<Vec<_>>()
                .join(" "),
            Rhs::Item(item) => self.item(*item).to_string(),
        };
        format!(
            "R{}\t{} -> {}\t{}",
            rule.id, self.cats[rule.lhs as usize], rhs, rule.kind
        )
    }

    /// Renders the whole rule table, one line per rule in id order.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&self.format_rule(rule));
            out.push('\n');
        }
        out
    }

    /// Renders a derivation as space-separated rule names.
    pub fn format_derivation(&self, derivation: &[RuleId], use_aliases: bool) -> String {
        derivation
            .iter()
            .map(|&id| {
                if use_aliases {
                    self.alias(id).to_string()
                } else {
                    format!("R{id}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parses a whitespace-separated list of rule names (`R<id>` or alias).
    pub fn parse_derivation(&self, text: &str) -> Result<Vec<RuleId>, TableError> {
        text.split_whitespace()
            .map(|token| {
                self.resolve(token).ok_or_else(|| TableError::UnknownRule {
                    token: token.to_string(),
                })
            })
            .collect()
    }
}

/// Errors from reading rule tables or derivation listings.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: expected `R<id>\\t<lhs> -> <rhs>\\t<kind>`")]
    BadLine { line: usize },
    #[error("line {line}: bad rule id `{token}`")]
    BadId { line: usize, token: String },
    #[error("line {line}: {reason}")]
    BadField { line: usize, reason: String },
    #[error("unknown rule name `{token}`")]
    UnknownRule { token: String },
}

/// A rule table line in structural form, as read back from text.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TableRow {
    pub id: RuleId,
    pub lhs: Category,
    pub rhs: TableRhs,
    pub kind: RuleKind,
}

/// Right-hand side of a parsed table line.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TableRhs {
    Categories(Vec<Category>),
    Item { phon: Option<String>, features: String },
}

/// Parses the text produced by [`RuleSet::to_table`].
///
/// The result is structural: it describes each line but carries no
/// tree-address recipes, so it serves display and comparison, not
/// parsing. Lines must appear in id order starting at 1.
pub fn parse_table(text: &str) -> Result<Vec<TableRow>, TableError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(TableError::BadLine { line });
        }
        let id: RuleId = fields[0]
            .strip_prefix('R')
            .and_then(|digits| digits.parse().ok())
            .ok_or_else(|| TableError::BadId {
                line,
                token: fields[0].to_string(),
            })?;
        if id as usize != rows.len() + 1 {
            return Err(TableError::BadField {
                line,
                reason: format!("rule ids must be consecutive from 1, got {id}"),
            });
        }
        let (lhs_text, rhs_text) =
            fields[1]
                .split_once(" -> ")
                .ok_or_else(|| TableError::BadField {
                    line,
                    reason: "missing ` -> `".to_string(),
                })?;
        let lhs = Category::parse(lhs_text).map_err(|err| TableError::BadField {
            line,
            reason: err.to_string(),
        })?;
        let kind = RuleKind::parse_label(fields[2]).ok_or_else(|| TableError::BadField {
            line,
            reason: format!("unknown rule kind `{}`", fields[2]),
        })?;
        let rhs = if kind == RuleKind::Lexicalize {
            let (phon_part, feat_part) =
                rhs_text
                    .split_once("::")
                    .ok_or_else(|| TableError::BadField {
                        line,
                        reason: "lexical rule without `::`".to_string(),
                    })?;
            let phon = match phon_part.trim() {
                "" => None,
                word => Some(word.to_string()),
            };
            TableRhs::Item {
                phon,
                features: feat_part.trim().to_string(),
            }
        } else {
            let mut cats = Vec::new();
            for chunk in split_bracketed(rhs_text, line)? {
                let cat = Category::parse(&chunk).map_err(|err| TableError::BadField {
                    line,
                    reason: err.to_string(),
                })?;
                cats.push(cat);
            }
            if cats.is_empty() {
                return Err(TableError::BadField {
                    line,
                    reason: "rule has no right-hand side".to_string(),
                });
            }
            TableRhs::Categories(cats)
        };
        rows.push(TableRow { id, lhs, rhs, kind });
    }
    Ok(rows)
}

/// Splits `[..] [..]` into bracketed chunks.
fn split_bracketed(text: &str, line: usize) -> Result<Vec<String>, TableError> {
    let mut chunks = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '[' => {
                depth += 1;
                current.push(ch);
            }
            ']' => {
                if depth == 0 {
                    return Err(TableError::BadField {
                        line,
                        reason: "unbalanced `]`".to_string(),
                    });
                }
                depth -= 1;
                current.push(ch);
                if depth == 0 {
                    chunks.push(std::mem::take(&mut current));
                }
            }
            _ => {
                if depth > 0 {
                    current.push(ch);
                } else if !ch.is_whitespace() {
                    return Err(TableError::BadField {
                        line,
                        reason: format!("unexpected `{ch}` outside brackets"),
                    });
                }
            }
        }
    }
    if depth != 0 {
        return Err(TableError::BadField {
            line,
            reason: "unbalanced `[`".to_string(),
        });
    }
    Ok(chunks)
}
