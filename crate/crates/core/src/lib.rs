//! Minimalist-grammar parsing by compilation to top-down rewrite rules.
//!
//! The pipeline: a lexicon ([`grammar::Lexicon`]) is compiled
//! ([`compile::compile`]) into a finite set of rewrite rules over
//! categories that pair dotted feature strings with tree addresses.
//! A probability model over rules ([`prob`]) then drives a best-first,
//! beam-pruned, strictly left-to-right parser ([`parser`]), and rule
//! choices can be conditioned on their derivational context with a
//! context-tree-weighting estimator ([`ctw`]).
//!
//! ```
//! use mgtd::{compile::compile, grammar::Lexicon, parser, prob::ProbTable};
//!
//! let lex = Lexicon::parse(":: c\n:: =a +m c\na :: =b a -m\nb :: b\nb :: =a +m b\n")?;
//! let rules = compile(&lex)?;
//! let table = ProbTable::uniform(&rules);
//! let words = parser::tokenize("a a b b");
//! let run = parser::parse(&rules, &table, &words, &parser::ParseConfig::default())?;
//! assert!(!run.results.is_empty());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod category;
pub mod compile;
pub mod ctw;
pub mod grammar;
pub mod position;
pub mod parser;
pub mod prob;
pub mod rules;
