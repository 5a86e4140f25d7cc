//! Lexicons: words paired with feature strings.
//!
//! A lexical item is written `phon :: features`. The feature string
//! drives derivations: selectors `=x` take arguments, licensors `+f`
//! attract moving material, the single bare name is the item's category,
//! and trailing licensees `-f` mark the item as one that will move.
//! Every feature string has the shape
//!
//! ```text
//! (selector (selector | licensor)*)? category licensee*
//! ```
//!
//! so an item first collects its arguments, optionally interleaving
//! attractions, then names itself, then lists the ways it moves.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters that may not appear in feature names or words.
///
/// They are reserved by the text formats: feature markers, the dot and
/// brackets of category display, comment and directive markers, and the
/// `::` separator.
pub const RESERVED_CHARS: &[char] = &['=', '+', '-', '.', ',', '[', ']', '#', '!', ':'];

/// The four roles a feature can play.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Bare name: what the item is.
    Category,
    /// `=x`: selects an argument of category `x`.
    Selector,
    /// `+f`: attracts a `-f` mover.
    Licensor,
    /// `-f`: marks the item as moving to a `+f` position.
    Licensee,
}

/// One feature: a role and a name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Feature {
    pub kind: FeatureKind,
    pub name: String,
}

impl Feature {
    pub fn new(kind: FeatureKind, name: impl Into<String>) -> Self {
        Feature { kind, name: name.into() }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let marker = match self.kind {
            FeatureKind::Category => "",
            FeatureKind::Selector => "=",
            FeatureKind::Licensor => "+",
            FeatureKind::Licensee => "-",
        };
        write!(f, "{marker}{}", self.name)
    }
}

/// Why a sequence of features is not a valid feature string.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynError {
    #[error("feature string is empty")]
    Empty,
    #[error("feature string has no category feature")]
    MissingCategory,
    #[error("feature string has more than one category feature")]
    MultipleCategories,
    #[error("feature `{0}` is not allowed at its position")]
    MisplacedFeature(Feature),
    #[error("feature string starts with licensor `{0}`; only a selector may come first")]
    LeadingLicensor(Feature),
}

/// A validated feature string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct FeatureString {
    features: Vec<Feature>,
    category: usize,
}

impl FeatureString {
    /// Validates the shape described in the module docs.
    pub fn new(features: Vec<Feature>) -> Result<Self, SynError> {
        if features.is_empty() {
            return Err(SynError::Empty);
        }
        let mut category = None;
        for (i, feat) in features.iter().enumerate() {
            if feat.kind == FeatureKind::Category {
                if category.is_some() {
                    return Err(SynError::MultipleCategories);
                }
                category = Some(i);
            }
        }
        let category = category.ok_or(SynError::MissingCategory)?;
        for feat in &features[..category] {
            if feat.kind == FeatureKind::Licensee {
                return Err(SynError::MisplacedFeature(feat.clone()));
            }
        }
        if let Some(first) = features.first() {
            if first.kind == FeatureKind::Licensor {
                return Err(SynError::LeadingLicensor(first.clone()));
            }
        }
        for feat in &features[category + 1..] {
            if feat.kind != FeatureKind::Licensee {
                return Err(SynError::MisplacedFeature(feat.clone()));
            }
        }
        Ok(FeatureString { features, category })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        false // validated strings always hold a category
    }

    /// Index of the category feature.
    pub fn category_index(&self) -> usize {
        self.category
    }

    /// Name of the category feature.
    pub fn category_name(&self) -> &str {
        &self.features[self.category].name
    }
}

impl fmt::Display for FeatureString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, feat) in self.features.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{feat}")?;
        }
        Ok(())
    }
}

/// A word (or nothing) paired with its features.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LexicalItem {
    /// `None` is the silent word, written with a leading `::` or as `eps`.
    pub phon: Option<String>,
    pub features: Arc<FeatureString>,
}

impl fmt::Display for LexicalItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.phon {
            Some(word) => write!(f, "{word} :: {}", self.features),
            None => write!(f, ":: {}", self.features),
        }
    }
}

/// Errors from reading a lexicon file.
#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: expected `phon :: features`")]
    MissingSeparator { line: usize },
    #[error("line {line}: bad token `{token}`: {reason}")]
    BadToken { line: usize, token: String, reason: String },
    #[error("line {line}: invalid feature string `{item}`: {source}")]
    InvalidItem {
        line: usize,
        item: String,
        source: SynError,
    },
    #[error("line {line}: duplicate of item `{item}` on line {first_line}")]
    DuplicateItem {
        line: usize,
        first_line: usize,
        item: String,
    },
    #[error("line {line}: bad directive: {reason}")]
    BadDirective { line: usize, reason: String },
}

/// A parsed lexicon: items in file order plus the start category.
#[derive(Clone, Debug)]
pub struct Lexicon {
    items: Vec<LexicalItem>,
    start: String,
}

fn check_name(line: usize, token: &str, name: &str) -> Result<(), GrammarError> {
    let bad = |reason: &str| GrammarError::BadToken {
        line,
        token: token.to_string(),
        reason: reason.to_string(),
    };
    if name.is_empty() {
        return Err(bad("empty name"));
    }
    for ch in name.chars() {
        if ch.is_whitespace() || RESERVED_CHARS.contains(&ch) {
            return Err(bad(&format!("reserved character `{ch}`")));
        }
    }
    Ok(())
}

fn parse_feature(line: usize, token: &str) -> Result<Feature, GrammarError> {
    let (kind, name) = match token.chars().next() {
        Some('=') => (FeatureKind::Selector, &token[1..]),
        Some('+') => (FeatureKind::Licensor, &token[1..]),
        Some('-') => (FeatureKind::Licensee, &token[1..]),
        _ => (FeatureKind::Category, token),
    };
    check_name(line, token, name)?;
    Ok(Feature::new(kind, name))
}

impl Lexicon {
    /// Reads a lexicon from text.
    ///
    /// One item per line as `phon :: features`; `#` starts a comment;
    /// a `!start name` line before the first item overrides the default
    /// start category `c`. The silent word is a leading `::` or the
    /// word `eps`.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut items: Vec<LexicalItem> = Vec::new();
        let mut item_lines: Vec<usize> = Vec::new();
        let mut start: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('!') {
                let mut parts = rest.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some("start"), Some(name), None) => {
                        if !items.is_empty() {
                            return Err(GrammarError::BadDirective {
                                line,
                                reason: "!start must come before the first item".to_string(),
                            });
                        }
                        if start.is_some() {
                            return Err(GrammarError::BadDirective {
                                line,
                                reason: "duplicate !start".to_string(),
                            });
                        }
                        check_name(line, content, name)?;
                        start = Some(name.to_string());
                    }
                    (Some("start"), _, _) => {
                        return Err(GrammarError::BadDirective {
                            line,
                            reason: "!start takes exactly one name".to_string(),
                        })
                    }
                    _ => {
                        return Err(GrammarError::BadDirective {
                            line,
                            reason: format!("unknown directive `{content}`"),
                        })
                    }
                }
                continue;
            }
            let sep = content
                .find("::")
                .ok_or(GrammarError::MissingSeparator { line })?;
            let phon_part = content[..sep].trim();
            let feat_part = content[sep + 2..].trim();
            let phon = match phon_part {
                "" | "eps" => None,
                word => {
                    check_name(line, word, word)?;
                    Some(word.to_string())
                }
            };
            let mut features = Vec::new();
            for token in feat_part.split_whitespace() {
                features.push(parse_feature(line, token)?);
            }
            let features =
                FeatureString::new(features).map_err(|source| GrammarError::InvalidItem {
                    line,
                    item: content.to_string(),
                    source,
                })?;
            let item = LexicalItem {
                phon,
                features: Arc::new(features),
            };
            if let Some(at) = items.iter().position(|other| *other == item) {
                return Err(GrammarError::DuplicateItem {
                    line,
                    first_line: item_lines[at],
                    item: item.to_string(),
                });
            }
            items.push(item);
            item_lines.push(line);
        }
        Ok(Lexicon {
            items,
            start: start.unwrap_or_else(|| "c".to_string()),
        })
    }

    /// Renders the lexicon back to text in the format [`parse`] reads.
    ///
    /// [`parse`]: Lexicon::parse
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.start != "c" {
            out.push_str("!start ");
            out.push_str(&self.start);
            out.push('\n');
        }
        for item in &self.items {
            out.push_str(&item.to_string());
            out.push('\n');
        }
        out
    }

    pub fn items(&self) -> &[LexicalItem] {
        &self.items
    }

    pub fn start_category(&self) -> &str {
        &self.start
    }

    /// Non-fatal oddities worth surfacing to the user.
    pub fn warnings(&self) -> Vec<String> {
        let mut notes = Vec::new();
        let has_start_item = self.items.iter().any(|item| {
            let feats = item.features.features();
            feats.last().map(|f| f.kind) == Some(FeatureKind::Category)
                && item.features.category_name() == self.start
        });
        if !has_start_item {
            notes.push(format!(
                "no item ends in the start category `{}`; nothing can be derived",
                self.start
            ));
        }
        notes
    }
}
