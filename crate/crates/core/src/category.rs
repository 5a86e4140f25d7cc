//! Dotted feature strings and the categories built from them.
//!
//! Working top-down, the dot in a feature string separates the prefix a
//! subtree has still to justify (left of the dot) from the suffix already
//! accounted for above it. A category bundles one dotted string for the
//! head with any number of dotted strings for material that will move
//! out of the subtree, each pending a licensee.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grammar::{Feature, FeatureKind, FeatureString, GrammarError};

/// A feature string with a dot between positions `0..=len`.
///
/// Features at indices `< dot` are "consumed": everything to their right
/// is explained higher in the tree. Features at `>= dot` are "pending".
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DottedString {
    base: Arc<FeatureString>,
    dot: usize,
}

impl DottedString {
    pub fn new(base: Arc<FeatureString>, dot: usize) -> Self {
        assert!(dot <= base.len(), "dot out of range");
        DottedString { base, dot }
    }

    pub fn base(&self) -> &Arc<FeatureString> {
        &self.base
    }

    pub fn dot(&self) -> usize {
        self.dot
    }

    pub fn consumed(&self) -> &[Feature] {
        &self.base.features()[..self.dot]
    }

    pub fn pending(&self) -> &[Feature] {
        &self.base.features()[self.dot..]
    }

    /// The feature immediately left of the dot, if the dot is not leftmost.
    pub fn at_left(&self) -> Option<&Feature> {
        self.dot.checked_sub(1).map(|i| &self.base.features()[i])
    }

    /// First pending feature, if the dot is not rightmost.
    pub fn first_pending(&self) -> Option<&Feature> {
        self.base.features().get(self.dot)
    }

    /// Same string with the dot moved one step left.
    ///
    /// Panics if the dot is already leftmost.
    pub fn rewound(&self) -> Self {
        DottedString::new(self.base.clone(), self.dot - 1)
    }
}

impl fmt::Display for DottedString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut put = |f: &mut fmt::Formatter<'_>, text: &str| -> fmt::Result {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            f.write_str(text)
        };
        for (i, feat) in self.base.features().iter().enumerate() {
            if i == self.dot {
                put(f, ".")?;
            }
            put(f, &feat.to_string())?;
        }
        if self.dot == self.base.len() {
            put(f, ".")?;
        }
        Ok(())
    }
}

/// Why a set of movers is inadmissible.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("two movers pend the licensee `-{name}`")]
pub struct MoverClash {
    pub name: String,
}

/// A rewrite symbol: the start symbol or a head with movers.
///
/// The head is entry 0; the remaining entries are movers kept in a
/// canonical sort so equal categories compare equal regardless of the
/// order in which their movers arose. Movers are admissible only if no
/// two of them pend the same licensee name.
///
/// The start symbol is represented by an empty entry list.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Category {
    entries: Vec<DottedString>,
}

impl Category {
    /// The start symbol.
    pub fn start() -> Self {
        Category { entries: Vec::new() }
    }

    /// Builds a category from a head and movers, sorting the movers.
    ///
    /// Fails if two movers pend the same licensee name.
    pub fn new(head: DottedString, movers: Vec<DottedString>) -> Result<Self, MoverClash> {
        let mut movers = movers;
        movers.sort();
        let mut entries = Vec::with_capacity(movers.len() + 1);
        entries.push(head);
        entries.extend(movers);
        let cat = Category { entries };
        cat.check_movers()?;
        Ok(cat)
    }

    fn check_movers(&self) -> Result<(), MoverClash> {
        let mut seen: Vec<&str> = Vec::new();
        for mover in self.movers() {
            if let Some(feat) = mover.first_pending() {
                if feat.kind == FeatureKind::Licensee {
                    if seen.contains(&feat.name.as_str()) {
                        return Err(MoverClash {
                            name: feat.name.clone(),
                        });
                    }
                    seen.push(&feat.name);
                }
            }
        }
        Ok(())
    }

    pub fn is_start(&self) -> bool {
        self.entries.is_empty()
    }

    /// Head and movers in canonical order; empty for the start symbol.
    pub fn entries(&self) -> &[DottedString] {
        &self.entries
    }

    pub fn head(&self) -> Option<&DottedString> {
        self.entries.first()
    }

    pub fn movers(&self) -> &[DottedString] {
        if self.entries.is_empty() {
            &[]
        } else {
            &self.entries[1..]
        }
    }

    /// A category is simple when it is just a head with a leftmost dot:
    /// the whole pending string must be justified by one lexical item.
    pub fn is_simple(&self) -> bool {
        self.entries.len() == 1 && self.entries[0].dot() == 0
    }

    /// Parses the display form: `start`, or entries in brackets like
    /// `[=a . +m c, =b a . -m]`. Tokens are whitespace-separated inside
    /// each comma-separated entry, with `.` marking the dot.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let text = text.trim();
        if text == "start" {
            return Ok(Category::start());
        }
        let inner = text
            .strip_prefix('[')
            .and_then(|rest| rest.strip_suffix(']'))
            .ok_or_else(|| GrammarError::BadToken {
                line: 0,
                token: text.to_string(),
                reason: "expected `start` or a bracketed category".to_string(),
            })?;
        let mut entries = Vec::new();
        for part in inner.split(',') {
            entries.push(parse_entry(part)?);
        }
        if entries.is_empty() {
            return Err(GrammarError::BadToken {
                line: 0,
                token: text.to_string(),
                reason: "category has no entries".to_string(),
            });
        }
        let head = entries.remove(0);
        Category::new(head, entries).map_err(|clash| GrammarError::BadToken {
            line: 0,
            token: text.to_string(),
            reason: clash.to_string(),
        })
    }
}

fn parse_entry(part: &str) -> Result<DottedString, GrammarError> {
    let bad = |reason: String| GrammarError::BadToken {
        line: 0,
        token: part.trim().to_string(),
        reason,
    };
    let mut features = Vec::new();
    let mut dot = None;
    for token in part.split_whitespace() {
        if token == "." {
            if dot.is_some() {
                return Err(bad("entry has two dots".to_string()));
            }
            dot = Some(features.len());
            continue;
        }
        let (kind, name) = match token.chars().next() {
            Some('=') => (FeatureKind::Selector, &token[1..]),
            Some('+') => (FeatureKind::Licensor, &token[1..]),
            Some('-') => (FeatureKind::Licensee, &token[1..]),
            _ => (FeatureKind::Category, token),
        };
        if name.is_empty() {
            return Err(bad(format!("bad feature `{token}`")));
        }
        features.push(Feature::new(kind, name));
    }
    let dot = dot.ok_or_else(|| bad("entry has no dot".to_string()))?;
    let base = FeatureString::new(features)
        .map_err(|err| bad(format!("invalid feature string: {err}")))?;
    Ok(DottedString::new(Arc::new(base), dot))
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_start() {
            return f.write_str("start");
        }
        f.write_str("[")?;
        for (i, entry) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{entry}")?;
        }
        f.write_str("]")
    }
}
