//! The parser and the bottom-up reference engine must agree on which
//! word sequences are sentences.

mod common;

use common::{reference_accepts, reference_language, ANBN, CATS_MICE, TOY_MOVER};
use mgtd::compile::compile;
use mgtd::grammar::Lexicon;
use mgtd::parser::{parse, tokenize, ParseConfig};
use mgtd::prob::ProbTable;
use mgtd::rules::RuleSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn build(text: &str) -> (RuleSet, ProbTable) {
    let lexicon = Lexicon::parse(text).unwrap();
    let rules = compile(&lexicon).unwrap();
    let table = ProbTable::uniform(&rules);
    (rules, table)
}

fn accepts(rules: &RuleSet, table: &ProbTable, words: &[String]) -> bool {
    let run = parse(rules, table, words, &ParseConfig::default()).unwrap();
    assert!(!run.aborted, "budget must not decide membership");
    !run.results.is_empty()
}

#[test]
fn reference_engine_counts_the_counting_language() {
    let lexicon = Lexicon::parse(ANBN).unwrap();
    let language = reference_language(&lexicon, 16);
    let expected: std::collections::BTreeSet<Vec<String>> = (0..=8)
        .map(|n| {
            let mut s = vec!["a".to_string(); n];
            s.extend(vec!["b".to_string(); n]);
            s
        })
        .collect();
    assert_eq!(language, expected);
}

#[test]
fn reference_engine_moves_the_toy_licensee() {
    let lexicon = Lexicon::parse(TOY_MOVER).unwrap();
    let language = reference_language(&lexicon, 8);
    assert_eq!(
        language.into_iter().collect::<Vec<_>>(),
        vec![tokenize("c a b")]
    );
}

#[test]
fn reference_engine_derives_exactly_the_expected_clauses() {
    let lexicon = Lexicon::parse(CATS_MICE).unwrap();
    let language = reference_language(&lexicon, 6);
    assert_eq!(language.len(), 16);
    for sentence in [
        "the cat ate the mouse",
        "the mouse ate the cat",
        "which mouse did the cat eat",
        "which cat did the mouse eat",
        "did the cat eat the mouse",
    ] {
        assert!(language.contains(&tokenize(sentence)), "missing: {sentence}");
    }
    for non_sentence in [
        "the cat ate",
        "which mouse the cat did eat",
        "mouse the ate cat the",
        "did the cat ate the mouse",
        "which mouse did the cat eat the mouse",
    ] {
        assert!(!language.contains(&tokenize(non_sentence)), "admitted: {non_sentence}");
    }
}

#[test]
fn parser_matches_reference_on_all_sorted_count_strings() {
    let (rules, table) = build(ANBN);
    let lexicon = Lexicon::parse(ANBN).unwrap();
    for n in 0..=8usize {
        for m in 0..=8usize {
            let mut words = vec!["a".to_string(); n];
            words.extend(vec!["b".to_string(); m]);
            let ours = accepts(&rules, &table, &words);
            let reference = reference_accepts(&lexicon, &words);
            assert_eq!(ours, reference, "disagree on a^{n} b^{m}");
            assert_eq!(ours, n == m, "a^{n} b^{m} should parse iff n = m");
        }
    }
}

#[test]
fn parser_matches_reference_on_unsorted_count_strings() {
    let (rules, table) = build(ANBN);
    let lexicon = Lexicon::parse(ANBN).unwrap();
    for text in ["a b a b", "b a", "a b b a", "b b a a", "a a b a b b"] {
        let words = tokenize(text);
        assert!(!accepts(&rules, &table, &words), "accepted: {text}");
        assert!(!reference_accepts(&lexicon, &words), "reference accepted: {text}");
    }
}

#[test]
fn parser_and_reference_agree_on_scrambled_clauses() {
    let (rules, table) = build(CATS_MICE);
    let lexicon = Lexicon::parse(CATS_MICE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let originals = [
        tokenize("which mouse did the cat eat"),
        tokenize("the cat ate the mouse"),
    ];
    let mut rejected = 0usize;
    let mut tried: Vec<Vec<String>> = Vec::new();
    while rejected < 20 {
        let mut words = originals[rejected % 2].clone();
        words.shuffle(&mut rng);
        if tried.contains(&words) || !reference_accepts(&lexicon, &words) {
            if !tried.contains(&words) && !reference_accepts(&lexicon, &words) {
                assert!(
                    !accepts(&rules, &table, &words),
                    "parser accepted a scramble: {}",
                    words.join(" ")
                );
                rejected += 1;
            }
            tried.push(words);
            continue;
        }
        // a shuffle may land on a real sentence; both sides must agree
        assert!(accepts(&rules, &table, &words));
        tried.push(words);
    }
}
