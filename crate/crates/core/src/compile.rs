//! Compiles a lexicon into a top-down rule set.
//!
//! Starting from the start symbol, every category that can appear in a
//! derivation is expanded by case analysis on the feature left of the
//! head's dot: a selector splits the node in two (undoing merge), a
//! licensor rewinds a movement step (undoing move), and a leftmost dot
//! grounds out in the lexicon. Closure visits categories depth-first,
//! expanding each category's selector-side child first, and numbers
//! rules in the order they are emitted.
//!
//! After closure, rules that can never terminate (some right-hand
//! category derives nothing) are dropped, the reachable remainder is
//! renumbered densely, and each rule gets a per-kind alias.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::category::{Category, DottedString};
use crate::grammar::{Feature, FeatureKind, FeatureString, Lexicon};
use crate::rules::{CatId, ItemId, PosSource, RhsChild, Rhs, Rule, RuleId, RuleKind, RuleSet};

/// Hard cap on interned categories; a guard against runaway closure.
const CATEGORY_LIMIT: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("closure exceeded {limit} categories; lexicon looks pathological")]
    TooManyCategories { limit: usize },
}

/// A rule before ids are assigned: child categories still by value.
struct Proto {
    kind: RuleKind,
    rhs: ProtoRhs,
}

enum ProtoRhs {
    Children(Vec<(Category, Vec<PosSource>)>),
    Item(ItemId),
}

/// Builds a child category from a head and movers, each tagged with the
/// recipe for its tree address, keeping layout aligned with the child's
/// canonical entry order. `None` when two movers would pend the same
/// licensee; such an instance is discarded.
fn child(
    head: (DottedString, PosSource),
    movers: Vec<(DottedString, PosSource)>,
) -> Option<(Category, Vec<PosSource>)> {
    let mut movers = movers;
    movers.sort_by(|a, b| a.0.cmp(&b.0));
    let mut layout = Vec::with_capacity(movers.len() + 1);
    layout.push(head.1);
    let mut mover_strings = Vec::with_capacity(movers.len());
    for (ds, src) in movers {
        mover_strings.push(ds);
        layout.push(src);
    }
    let cat = Category::new(head.0, mover_strings).ok()?;
    Some((cat, layout))
}

/// Distinct feature strings whose last feature is `feat`, in order of
/// first occurrence in the lexicon.
fn strings_ending_in(lex: &Lexicon, feat: &Feature) -> Vec<Arc<FeatureString>> {
    let mut found: Vec<Arc<FeatureString>> = Vec::new();
    for item in lex.items() {
        if item.features.features().last() == Some(feat)
            && !found.iter().any(|fs| **fs == *item.features)
        {
            found.push(item.features.clone());
        }
    }
    found
}

/// A dotted string over `base` with the dot just before the last feature.
fn before_last(base: Arc<FeatureString>) -> DottedString {
    let dot = base.len() - 1;
    DottedString::new(base, dot)
}

/// All rules rewriting `cat`, in canonical emission order.
fn category_rules(lex: &Lexicon, cat: &Category) -> Vec<Proto> {
    if cat.is_start() {
        let target = Feature::new(FeatureKind::Category, lex.start_category());
        return strings_ending_in(lex, &target)
            .into_iter()
            .filter_map(|base| {
                let completed = (before_last(base), PosSource::FromEntry(0));
                let rhs = vec![child(completed, Vec::new())?];
                Some(Proto {
                    kind: RuleKind::Start,
                    rhs: ProtoRhs::Children(rhs),
                })
            })
            .collect();
    }

    let head = cat.head().expect("non-start category has a head");
    let movers = cat.movers();
    let Some(trigger) = head.at_left() else {
        // leftmost dot: lexical ground-out, impossible with movers
        if !movers.is_empty() {
            return Vec::new();
        }
        return lex
            .items()
            .iter()
            .enumerate()
            .filter(|(_, item)| *item.features == **head.base())
            .map(|(i, _)| Proto {
                kind: RuleKind::Lexicalize,
                rhs: ProtoRhs::Item(i as ItemId),
            })
            .collect();
    };

    let mut rules = Vec::new();
    match trigger.kind {
        FeatureKind::Selector => {
            let arg_cat = Feature::new(FeatureKind::Category, &trigger.name);
            let arg_heads: Vec<DottedString> = strings_ending_in(lex, &arg_cat)
                .into_iter()
                .map(before_last)
                .collect();
            if head.dot() == 1 {
                // nothing selected yet: the argument is the complement,
                // below and to the right, and takes every mover with it
                for arg in &arg_heads {
                    let head_child = child(
                        (head.rewound(), PosSource::HeadZero),
                        Vec::new(),
                    );
                    let arg_child = child(
                        (arg.clone(), PosSource::HeadOne),
                        movers
                            .iter()
                            .enumerate()
                            .map(|(j, m)| (m.clone(), PosSource::FromEntry(j + 1)))
                            .collect(),
                    );
                    if let (Some(hc), Some(ac)) = (head_child, arg_child) {
                        rules.push(Proto {
                            kind: RuleKind::Unmerge1,
                            rhs: ProtoRhs::Children(vec![hc, ac]),
                        });
                    }
                }
                // or the complement is one of the movers, caught mid-move
                for (j, mover) in movers.iter().enumerate() {
                    if mover.at_left().map(|f| (f.kind, f.name.as_str()))
                        != Some((FeatureKind::Category, trigger.name.as_str()))
                    {
                        continue;
                    }
                    let rest: Vec<(DottedString, PosSource)> = movers
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .map(|(i, m)| (m.clone(), PosSource::FromEntry(i + 1)))
                        .collect();
                    let head_child = child((head.rewound(), PosSource::FromEntry(0)), Vec::new());
                    let arg_child =
                        child((mover.rewound(), PosSource::FromEntry(j + 1)), rest);
                    if let (Some(hc), Some(ac)) = (head_child, arg_child) {
                        rules.push(Proto {
                            kind: RuleKind::Unmerge3Simple,
                            rhs: ProtoRhs::Children(vec![hc, ac]),
                        });
                    }
                }
            } else {
                // already selected once: the argument is a specifier,
                // below and to the left; movers split both ways
                for arg in &arg_heads {
                    for mask in 0u32..(1 << movers.len()) {
                        let mut stay = Vec::new();
                        let mut go = Vec::new();
                        for (j, m) in movers.iter().enumerate() {
                            let tagged = (m.clone(), PosSource::FromEntry(j + 1));
                            if mask >> j & 1 == 1 {
                                go.push(tagged);
                            } else {
                                stay.push(tagged);
                            }
                        }
                        let head_child = child((head.rewound(), PosSource::HeadOne), stay);
                        let arg_child = child((arg.clone(), PosSource::HeadZero), go);
                        if let (Some(hc), Some(ac)) = (head_child, arg_child) {
                            rules.push(Proto {
                                kind: RuleKind::Unmerge2,
                                rhs: ProtoRhs::Children(vec![hc, ac]),
                            });
                        }
                    }
                }
                for (j, mover) in movers.iter().enumerate() {
                    if mover.at_left().map(|f| (f.kind, f.name.as_str()))
                        != Some((FeatureKind::Category, trigger.name.as_str()))
                    {
                        continue;
                    }
                    let rest: Vec<(usize, &DottedString)> = movers
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .collect();
                    for mask in 0u32..(1 << rest.len()) {
                        let mut stay = Vec::new();
                        let mut go = Vec::new();
                        for (bit, (i, m)) in rest.iter().enumerate() {
                            let tagged = ((*m).clone(), PosSource::FromEntry(i + 1));
                            if mask >> bit & 1 == 1 {
                                go.push(tagged);
                            } else {
                                stay.push(tagged);
                            }
                        }
                        let head_child = child((head.rewound(), PosSource::FromEntry(0)), stay);
                        let arg_child =
                            child((mover.rewound(), PosSource::FromEntry(j + 1)), go);
                        if let (Some(hc), Some(ac)) = (head_child, arg_child) {
                            rules.push(Proto {
                                kind: RuleKind::Unmerge3Complex,
                                rhs: ProtoRhs::Children(vec![hc, ac]),
                            });
                        }
                    }
                }
            }
        }
        FeatureKind::Licensor => {
            let matching: Vec<usize> = movers
                .iter()
                .enumerate()
                .filter(|(_, m)| {
                    m.at_left().map(|f| (f.kind, f.name.as_str()))
                        == Some((FeatureKind::Licensee, trigger.name.as_str()))
                })
                .map(|(j, _)| j)
                .collect();
            if matching.is_empty() {
                // introduce the mover this licensor will have attracted
                let lic = Feature::new(FeatureKind::Licensee, &trigger.name);
                for base in strings_ending_in(lex, &lic) {
                    let mut tagged: Vec<(DottedString, PosSource)> = movers
                        .iter()
                        .enumerate()
                        .map(|(j, m)| (m.clone(), PosSource::FromEntry(j + 1)))
                        .collect();
                    tagged.push((before_last(base), PosSource::HeadZero));
                    if let Some(c) = child((head.rewound(), PosSource::HeadOne), tagged) {
                        rules.push(Proto {
                            kind: RuleKind::Unmove1,
                            rhs: ProtoRhs::Children(vec![c]),
                        });
                    }
                }
            } else {
                // the attracted mover is already present; several movers
                // may have consumed this licensee, so try each
                for j in matching {
                    let tagged: Vec<(DottedString, PosSource)> = movers
                        .iter()
                        .enumerate()
                        .map(|(i, m)| {
                            let ds = if i == j { m.rewound() } else { m.clone() };
                            (ds, PosSource::FromEntry(i + 1))
                        })
                        .collect();
                    if let Some(c) = child((head.rewound(), PosSource::FromEntry(0)), tagged) {
                        rules.push(Proto {
                            kind: RuleKind::Unmove2,
                            rhs: ProtoRhs::Children(vec![c]),
                        });
                    }
                }
            }
        }
        // a category or licensee left of the head's dot never arises on
        // heads of reachable categories; nothing rewrites such a node
        FeatureKind::Category | FeatureKind::Licensee => {}
    }
    rules
}

/// A rule during closure: children interned, ids not yet final.
struct NaiveRule {
    kind: RuleKind,
    lhs: CatId,
    rhs: Rhs,
}

/// Compiles `lexicon` into a pruned, densely numbered rule set.
pub fn compile(lexicon: &Lexicon) -> Result<RuleSet, CompileError> {
    let mut cats: Vec<Category> = vec![Category::start()];
    let mut cat_ids: HashMap<Category, CatId> = HashMap::new();
    cat_ids.insert(Category::start(), 0);
    let mut naive: Vec<NaiveRule> = Vec::new();
    let mut treated: Vec<bool> = vec![false];
    let mut stack: Vec<CatId> = vec![0];

    while let Some(current) = stack.pop() {
        if treated[current as usize] {
            continue;
        }
        treated[current as usize] = true;
        let cat = cats[current as usize].clone();
        let mut encountered: Vec<CatId> = Vec::new();
        for proto in category_rules(lexicon, &cat) {
            let rhs = match proto.rhs {
                ProtoRhs::Item(item) => Rhs::Item(item),
                ProtoRhs::Children(children) => {
                    let mut out = Vec::with_capacity(children.len());
                    for (child_cat, layout) in children {
                        let id = match cat_ids.get(&child_cat) {
                            Some(&id) => id,
                            None => {
                                if cats.len() >= CATEGORY_LIMIT {
                                    return Err(CompileError::TooManyCategories {
                                        limit: CATEGORY_LIMIT,
                                    });
                                }
                                let id = cats.len() as CatId;
                                cats.push(child_cat.clone());
                                cat_ids.insert(child_cat, id);
                                treated.push(false);
                                id
                            }
                        };
                        if !encountered.contains(&id) {
                            encountered.push(id);
                        }
                        out.push(RhsChild { cat: id, layout });
                    }
                    Rhs::Children(out)
                }
            };
            naive.push(NaiveRule {
                kind: proto.kind,
                lhs: current,
                rhs,
            });
        }
        // depth-first: the first child encountered is expanded next
        for &id in encountered.iter().rev() {
            if !treated[id as usize] {
                stack.push(id);
            }
        }
    }

    // drop rules that mention a category deriving no tree
    let mut productive = vec![false; cats.len()];
    loop {
        let mut changed = false;
        for rule in &naive {
            if productive[rule.lhs as usize] {
                continue;
            }
            let ok = match &rule.rhs {
                Rhs::Item(_) => true,
                Rhs::Children(children) => children
                    .iter()
                    .all(|c| productive[c.cat as usize]),
            };
            if ok {
                productive[rule.lhs as usize] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<bool> = naive
        .iter()
        .map(|rule| match &rule.rhs {
            Rhs::Item(_) => true,
            Rhs::Children(children) => {
                children.iter().all(|c| productive[c.cat as usize])
            }
        })
        .collect();

    // restrict to what the start symbol still reaches
    let mut reachable = vec![false; cats.len()];
    reachable[0] = true;
    let mut agenda = vec![0 as CatId];
    while let Some(cat) = agenda.pop() {
        for (rule, ok) in naive.iter().zip(&kept) {
            if !ok || rule.lhs != cat {
                continue;
            }
            if let Rhs::Children(children) = &rule.rhs {
                for c in children {
                    if !reachable[c.cat as usize] {
                        reachable[c.cat as usize] = true;
                        agenda.push(c.cat);
                    }
                }
            }
        }
    }

    // renumber surviving categories and rules densely, preserving order
    let mut cat_map: Vec<Option<CatId>> = vec![None; cats.len()];
    let mut final_cats = Vec::new();
    for (old, cat) in cats.into_iter().enumerate() {
        if reachable[old] {
            cat_map[old] = Some(final_cats.len() as CatId);
            final_cats.push(cat);
        }
    }
    let mut final_rules: Vec<Rule> = Vec::new();
    for (rule, ok) in naive.into_iter().zip(kept) {
        if !ok || !reachable[rule.lhs as usize] {
            continue;
        }
        let lhs = cat_map[rule.lhs as usize].expect("kept lhs is reachable");
        let rhs = match rule.rhs {
            Rhs::Item(item) => Rhs::Item(item),
            Rhs::Children(children) => Rhs::Children(
                children
                    .into_iter()
                    .map(|c| RhsChild {
                        cat: cat_map[c.cat as usize].expect("kept rhs is reachable"),
                        layout: c.layout,
                    })
                    .collect(),
            ),
        };
        final_rules.push(Rule {
            id: final_rules.len() as RuleId + 1,
            kind: rule.kind,
            lhs,
            rhs,
        });
    }

    let mut by_lhs: Vec<Vec<RuleId>> = vec![Vec::new(); final_cats.len()];
    for rule in &final_rules {
        by_lhs[rule.lhs as usize].push(rule.id);
    }

    let mut counters: HashMap<&'static str, usize> = HashMap::new();
    let mut aliases = Vec::with_capacity(final_rules.len());
    let mut alias_ids = HashMap::new();
    for rule in &final_rules {
        let prefix = rule.kind.alias_prefix();
        let n = counters.entry(prefix).or_insert(0);
        *n += 1;
        let alias = format!("{prefix}{n}");
        alias_ids.insert(alias.clone(), rule.id);
        aliases.push(alias);
    }

    let mut cat_ids = HashMap::new();
    for (id, cat) in final_cats.iter().enumerate() {
        cat_ids.insert(cat.clone(), id as CatId);
    }

    Ok(RuleSet {
        lexicon: lexicon.clone(),
        cats: final_cats,
        cat_ids,
        rules: final_rules,
        by_lhs,
        aliases,
        alias_ids,
    })
}
