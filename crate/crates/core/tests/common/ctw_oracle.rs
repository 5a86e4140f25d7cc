//! Brute-force reference for the context-tree mixture: enumerate
//! every stopping shape, bucket the data per shape, score buckets in
//! closed form, and mix by the shape prior. No sharing, no recursion
//! tricks, so it cross-checks the incremental implementation.

#![allow(dead_code)]

use mgtd::ctw::Estimator;
use statrs::function::gamma::ln_gamma;

/// Closed form for the additive-smoothing sequence probability of a
/// count vector, via log-gamma.
pub fn kt_closed_form(counts: &[u32]) -> f64 {
    let k = counts.len() as f64;
    let total: u32 = counts.iter().sum();
    let mut log = ln_gamma(k / 2.0) - k * ln_gamma(0.5) - ln_gamma(total as f64 + k / 2.0);
    for &c in counts {
        log += ln_gamma(c as f64 + 0.5);
    }
    log
}

/// Closed form for the binary zero-redundancy sequence probability.
pub fn zr_closed_form(zeros: u32, ones: u32) -> f64 {
    let pe = kt_closed_form(&[zeros, ones]).exp();
    match (zeros > 0, ones > 0) {
        (false, false) => 1.0,
        (true, true) => 0.5 * pe,
        _ => 0.5 * pe + 0.25,
    }
    .ln()
}

/// A fully explicit context tree over a binary context alphabet:
/// each node either stops or splits on the next context symbol.
#[derive(Clone, Debug)]
pub enum Shape {
    Leaf,
    Split(Box<Shape>, Box<Shape>),
}

pub fn all_shapes(depth: usize, max_depth: usize) -> Vec<Shape> {
    if depth == max_depth {
        return vec![Shape::Leaf];
    }
    let mut shapes = vec![Shape::Leaf];
    let subs = all_shapes(depth + 1, max_depth);
    for left in &subs {
        for right in &subs {
            shapes.push(Shape::Split(Box::new(left.clone()), Box::new(right.clone())));
        }
    }
    shapes
}

/// Prior weight of a shape: alpha per split, 1 - alpha per leaf that
/// stopped early (leaves at maximum depth are forced).
pub fn log_weight(shape: &Shape, depth: usize, max_depth: usize, alpha: f64) -> f64 {
    match shape {
        Shape::Leaf => {
            if depth == max_depth {
                0.0
            } else {
                (1.0 - alpha).ln()
            }
        }
        Shape::Split(left, right) => {
            alpha.ln()
                + log_weight(left, depth + 1, max_depth, alpha)
                + log_weight(right, depth + 1, max_depth, alpha)
        }
    }
}

/// Buckets a stream by where each symbol's context stops in the
/// shape: at a leaf, or at a split whose context ran out (the split's
/// boundary bucket). Returns the total score over all buckets.
pub fn shape_score(
    shape: &Shape,
    data: &[(Vec<u32>, u32)],
    estimator: Estimator,
    k: usize,
) -> f64 {
    // paths are encoded as context prefixes; a trailing marker
    // distinguishes a split's boundary bucket from a leaf bucket
    use std::collections::BTreeMap;
    let mut buckets: BTreeMap<Vec<u32>, Vec<u32>> = BTreeMap::new();
    for (ctx, sym) in data {
        let mut node = shape;
        let mut path: Vec<u32> = Vec::new();
        let mut rest = &ctx[..];
        let key = loop {
            match node {
                Shape::Leaf => break path,
                Shape::Split(left, right) => match rest.split_first() {
                    None => {
                        path.push(u32::MAX); // boundary marker
                        break path;
                    }
                    Some((&next, tail)) => {
                        node = if next == 0 { left } else { right };
                        path.push(next);
                        rest = tail;
                    }
                },
            }
        };
        buckets.entry(key).or_default().push(*sym);
    }
    let mut total = 0.0;
    for symbols in buckets.values() {
        let mut counts = vec![0u32; k];
        for &s in symbols {
            counts[s as usize] += 1;
        }
        total += match estimator {
            Estimator::Kt => kt_closed_form(&counts),
            Estimator::Zr => zr_closed_form(counts[0], counts[1]),
        };
    }
    total
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi + values.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
}

/// The mixture over every shape, computed with no sharing at all.
/// Contexts and symbols must both be binary.
pub fn brute_force_log(data: &[(Vec<u32>, u32)], max_depth: usize, estimator: Estimator) -> f64 {
    let k = 2usize;
    let alpha = 1.0 / k as f64;
    let terms: Vec<f64> = all_shapes(0, max_depth)
        .iter()
        .map(|shape| {
            log_weight(shape, 0, max_depth, alpha) + shape_score(shape, data, estimator, k)
        })
        .collect();
    log_sum_exp(&terms)
}
