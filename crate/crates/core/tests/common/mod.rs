//! Shared fixtures and a bottom-up reference derivation engine.
//!
//! The engine here builds expressions upward by merge and move,
//! independently of the compiled rule system, so the parser's notion
//! of grammaticality can be checked against a second route.

#![allow(dead_code)]

pub mod ctw_oracle;

use std::collections::{BTreeSet, VecDeque};

use mgtd::grammar::{Feature, FeatureKind, Lexicon};

/// Counting grammar: strings of n `a`s followed by n `b`s.
pub const ANBN: &str = "\
:: c
:: =a +m c
a :: =b a -m
b :: b
b :: =a +m b
";

/// Small clause grammar with determiners and one moving wh-word.
pub const CATS_MICE: &str = "\
mouse :: n
cat :: n
the :: =n d
which :: =n d -wh
ate :: =d =d c
eat :: =d =d v
did :: =v +wh c
did :: =v c
";

/// The exact rule table the counting grammar must compile to.
pub const ANBN_TABLE: &str = "\
R1\tstart -> [. c]\tStart
R2\tstart -> [=a +m . c]\tStart
R3\t[. c] -> :: c\tLexicalize
R4\t[=a +m . c] -> [=a . +m c, =b a . -m]\tUnmove-1
R5\t[=a . +m c, =b a . -m] -> [. =a +m c] [=b . a -m]\tUnmerge-3-simple
R6\t[. =a +m c] -> :: =a +m c\tLexicalize
R7\t[=b . a -m] -> [. =b a -m] [. b]\tUnmerge-1
R8\t[=b . a -m] -> [. =b a -m] [=a +m . b]\tUnmerge-1
R9\t[. =b a -m] -> a :: =b a -m\tLexicalize
R10\t[. b] -> b :: b\tLexicalize
R11\t[=a +m . b] -> [=a . +m b, =b a . -m]\tUnmove-1
R12\t[=a . +m b, =b a . -m] -> [. =a +m b] [=b . a -m]\tUnmerge-3-simple
R13\t[. =a +m b] -> b :: =a +m b\tLexicalize
";

/// The exact rule table the clause grammar must compile to.
pub const CATS_MICE_TABLE: &str = "\
R1\tstart -> [=d =d . c]\tStart
R2\tstart -> [=v +wh . c]\tStart
R3\tstart -> [=v . c]\tStart
R4\t[=d =d . c] -> [=d . =d c] [=n . d]\tUnmerge-2
R5\t[=d . =d c] -> [. =d =d c] [=n . d]\tUnmerge-1
R6\t[. =d =d c] -> ate :: =d =d c\tLexicalize
R7\t[=n . d] -> [. =n d] [. n]\tUnmerge-1
R8\t[. =n d] -> the :: =n d\tLexicalize
R9\t[. n] -> mouse :: n\tLexicalize
R10\t[. n] -> cat :: n\tLexicalize
R11\t[=v +wh . c] -> [=v . +wh c, =n d . -wh]\tUnmove-1
R12\t[=v . +wh c, =n d . -wh] -> [. =v +wh c] [=d =d . v, =n d . -wh]\tUnmerge-1
R13\t[. =v +wh c] -> did :: =v +wh c\tLexicalize
R14\t[=d =d . v, =n d . -wh] -> [=d . =d v, =n d . -wh] [=n . d]\tUnmerge-2
R15\t[=d =d . v, =n d . -wh] -> [=d . =d v] [=n . d -wh]\tUnmerge-3-complex
R16\t[=d . =d v, =n d . -wh] -> [. =d =d v] [=n . d -wh]\tUnmerge-3-simple
R17\t[. =d =d v] -> eat :: =d =d v\tLexicalize
R18\t[=n . d -wh] -> [. =n d -wh] [. n]\tUnmerge-1
R19\t[. =n d -wh] -> which :: =n d -wh\tLexicalize
R20\t[=d . =d v] -> [. =d =d v] [=n . d]\tUnmerge-1
R21\t[=v . c] -> [. =v c] [=d =d . v]\tUnmerge-1
R22\t[. =v c] -> did :: =v c\tLexicalize
R23\t[=d =d . v] -> [=d . =d v] [=n . d]\tUnmerge-2
";

/// Three items whose only sentence surfaces as `c a b`.
pub const TOY_MOVER: &str = "\
a :: =x +f c
b :: =y x
c :: y -f
";

/// Two start choices of very different weight; only the unlikely one
/// derives `x`.
pub const LOPSIDED: &str = "\
y :: c
:: =d c
x :: d
";

/// One chain of a reference expression: surfaced words plus the
/// features not yet consumed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Chain {
    pub words: Vec<String>,
    pub feats: Vec<Feature>,
}

impl Chain {
    fn first(&self) -> Option<&Feature> {
        self.feats.first()
    }
}

/// A reference expression: head chain, whether the head is still a
/// bare lexical item, and the chains waiting to move.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Expr {
    pub head: Chain,
    pub lexical: bool,
    pub movers: Vec<Chain>,
}

impl Expr {
    fn words(&self) -> usize {
        self.head.words.len() + self.movers.iter().map(|m| m.words.len()).sum::<usize>()
    }

    fn complete(&self, start: &str) -> bool {
        self.movers.is_empty()
            && self.head.feats.len() == 1
            && self.head.feats[0] == Feature::new(FeatureKind::Category, start)
    }
}

/// No two waiting chains may be after the same licensor next.
fn movers_ok(movers: &[Chain]) -> bool {
    let mut names: Vec<&str> = Vec::new();
    for m in movers {
        match m.first() {
            Some(f) if f.kind == FeatureKind::Licensee => {
                if names.contains(&f.name.as_str()) {
                    return false;
                }
                names.push(&f.name);
            }
            _ => return false,
        }
    }
    true
}

fn sorted(mut movers: Vec<Chain>) -> Vec<Chain> {
    movers.sort();
    movers
}

/// Combines a selector-headed expression with one whose head is down
/// to its category. Returns None when the categories disagree or the
/// resulting mover set is ill-formed.
fn merge(fun: &Expr, arg: &Expr) -> Option<Expr> {
    let sel = fun.head.first()?;
    if sel.kind != FeatureKind::Selector {
        return None;
    }
    let cat = arg.head.first()?;
    if cat.kind != FeatureKind::Category || cat.name != sel.name {
        return None;
    }
    let rest: Vec<Feature> = fun.head.feats[1..].to_vec();
    let leftover: Vec<Feature> = arg.head.feats[1..].to_vec();
    let mut movers: Vec<Chain> = fun.movers.iter().chain(&arg.movers).cloned().collect();
    let words = if leftover.is_empty() {
        // the argument's words join the head, complements to the
        // right of a lexical head, specifiers to the left
        if fun.lexical {
            let mut w = fun.head.words.clone();
            w.extend(arg.head.words.iter().cloned());
            w
        } else {
            let mut w = arg.head.words.clone();
            w.extend(fun.head.words.iter().cloned());
            w
        }
    } else {
        // the argument still carries licensees: it waits to move
        movers.push(Chain {
            words: arg.head.words.clone(),
            feats: leftover,
        });
        fun.head.words.clone()
    };
    let movers = sorted(movers);
    if !movers_ok(&movers) {
        return None;
    }
    Some(Expr {
        head: Chain { words, feats: rest },
        lexical: false,
        movers,
    })
}

/// Discharges a licensor by advancing the matching waiting chain,
/// landing its words to the left once its licensees run out.
fn movements(expr: &Expr) -> Vec<Expr> {
    let lic = match expr.head.first() {
        Some(f) if f.kind == FeatureKind::Licensor => f,
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    for (i, mover) in expr.movers.iter().enumerate() {
        match mover.first() {
            Some(f) if f.kind == FeatureKind::Licensee && f.name == lic.name => {}
            _ => continue,
        }
        let rest: Vec<Feature> = expr.head.feats[1..].to_vec();
        let mut movers: Vec<Chain> = expr.movers.clone();
        let mut chain = movers.remove(i);
        chain.feats.remove(0);
        let words = if chain.feats.is_empty() {
            let mut w = chain.words;
            w.extend(expr.head.words.iter().cloned());
            w
        } else {
            movers.push(chain);
            expr.head.words.clone()
        };
        let movers = sorted(movers);
        if !movers_ok(&movers) {
            continue;
        }
        out.push(Expr {
            head: Chain { words, feats: rest },
            lexical: false,
            movers,
        });
    }
    out
}

/// Every sentence the lexicon derives with at most `max_words` words,
/// built bottom-up with no reference to the compiled rules.
pub fn reference_language(lexicon: &Lexicon, max_words: usize) -> BTreeSet<Vec<String>> {
    let exprs = reference_closure(lexicon, max_words);
    exprs
        .iter()
        .filter(|e| e.complete(lexicon.start_category()))
        .map(|e| e.head.words.clone())
        .collect()
}

/// The full set of derivable expressions within the word bound.
pub fn reference_closure(lexicon: &Lexicon, max_words: usize) -> BTreeSet<Expr> {
    let mut seen: BTreeSet<Expr> = BTreeSet::new();
    let mut agenda: VecDeque<Expr> = VecDeque::new();
    for item in lexicon.items() {
        let words: Vec<String> = item.phon.iter().cloned().collect();
        let expr = Expr {
            head: Chain {
                words,
                feats: item.features.features().to_vec(),
            },
            lexical: true,
            movers: Vec::new(),
        };
        if expr.words() <= max_words && seen.insert(expr.clone()) {
            agenda.push_back(expr);
        }
    }
    while let Some(expr) = agenda.pop_front() {
        let mut fresh: Vec<Expr> = movements(&expr);
        let snapshot: Vec<Expr> = seen.iter().cloned().collect();
        for other in &snapshot {
            fresh.extend(merge(&expr, other));
            fresh.extend(merge(other, &expr));
        }
        for e in fresh {
            if e.words() <= max_words && seen.insert(e.clone()) {
                agenda.push_back(e);
            }
        }
    }
    seen
}

/// True when the reference engine derives exactly this word sequence.
pub fn reference_accepts(lexicon: &Lexicon, words: &[String]) -> bool {
    reference_language(lexicon, words.len()).contains(words)
}
