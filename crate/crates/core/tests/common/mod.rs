//! Reference implementations shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cegmix::sampler::GradientTarget;
use cegmix::tree::{Edge, EventTree, Staging};
use rand::Rng;

/// Pair-enumeration Rand index.
pub fn brute_rand(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut agree, mut total) = (0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// NMI from an explicit dense contingency table, geometric-mean normalized.
pub fn brute_nmi(a: &[usize], b: &[usize]) -> f64 {
    let relabel = |x: &[usize]| {
        let mut map = BTreeMap::new();
        x.iter()
            .map(|v| {
                let next = map.len();
                *map.entry(*v).or_insert(next)
            })
            .collect::<Vec<_>>()
    };
    let (a, b) = (relabel(a), relabel(b));
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let n = a.len() as f64;
    let mut table = vec![vec![0.0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    if ka == 1 || kb == 1 {
        let identical = (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])));
        return if identical { 1.0 } else { 0.0 };
    }
    let h = |m: &[f64]| -m.iter().map(|&c| (c / n) * (c / n).ln()).sum::<f64>();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let c = table[i][j];
            if c > 0.0 {
                mi += (c / n) * ((c / n) / ((rows[i] / n) * (cols[j] / n))).ln();
            }
        }
    }
    (mi / (h(&rows) * h(&cols)).sqrt()).clamp(0.0, 1.0)
}

pub fn random_labels(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Largest relative discrepancy between the analytic gradient and five-point
/// central differences, measured as |g - fd| / max(|fd|, 1).
pub fn max_gradient_error<T: GradientTarget>(target: &T, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    target.log_density_grad(x, &mut g);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = 1e-4 * x[i].abs().max(1.0);
        let at = |step: f64| {
            let mut y = x.to_vec();
            y[i] += step;
            target.log_density(&y)
        };
        let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        worst = worst.max((g[i] - fd).abs() / fd.abs().max(1.0));
    }
    worst
}

/// Random staged tree: labels come from a small alphabet, and situations with
/// matching label multisets are randomly grouped into stages.
pub fn random_staged_tree(rng: &mut impl Rng, max_nodes: usize) -> (EventTree, Staging) {
    let labels = ["a", "b", "c"];
    let mut edges = Vec::new();
    let mut frontier = vec![("n0".to_string(), 0usize)];
    let mut count = 1;
    while let Some((node, depth)) = frontier.pop() {
        if depth >= 4 || count >= max_nodes || (depth > 0 && rng.random_bool(0.35)) {
            continue;
        }
        let arity = rng.random_range(2..=3);
        for j in 0..arity {
            let child = format!("n{count}");
            count += 1;
            let label = if rng.random_bool(0.8) { labels[j] } else { labels[rng.random_range(0..3)] };
            edges.push(Edge::new(node.clone(), child.clone(), label));
            frontier.push((child, depth + 1));
        }
    }
    if edges.is_empty() {
        edges.push(Edge::new("n0", "n1", "a"));
        edges.push(Edge::new("n0", "n2", "b"));
    }
    let tree = EventTree::new("n0", edges).unwrap();
    let mut by_labels: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
    for s in tree.situations() {
        by_labels
            .entry(tree.label_multiset(s).into_iter().map(String::from).collect())
            .or_default()
            .push(s.to_string());
    }
    let mut blocks = Vec::new();
    for group in by_labels.into_values() {
        let parts = rng.random_range(1..=group.len().min(2));
        let mut split: Vec<Vec<String>> = vec![Vec::new(); parts];
        for s in group {
            split[rng.random_range(0..parts)].push(s);
        }
        blocks.extend(split.into_iter().filter(|b| !b.is_empty()));
    }
    (tree, Staging::new(blocks))
}

/// Backtracking isomorphism test for coloured, edge-labelled rooted subtrees.
pub fn subtrees_isomorphic(tree: &EventTree, staging: &Staging, u: &str, v: &str) -> bool {
    let colours = staging.colours();
    fn iso(tree: &EventTree, colours: &std::collections::HashMap<&str, usize>, u: &str, v: &str) -> bool {
        let (lu, lv) = (tree.is_leaf(u), tree.is_leaf(v));
        if lu || lv {
            return lu && lv;
        }
        if colours[u] != colours[v] {
            return false;
        }
        let a: Vec<&Edge> = tree.out_edges(u).collect();
        let b: Vec<&Edge> = tree.out_edges(v).collect();
        if a.len() != b.len() {
            return false;
        }
        let mut used = vec![false; b.len()];
        fn assign(
            i: usize,
            a: &[&Edge],
            b: &[&Edge],
            used: &mut [bool],
            tree: &EventTree,
            colours: &std::collections::HashMap<&str, usize>,
        ) -> bool {
            if i == a.len() {
                return true;
            }
            for j in 0..b.len() {
                if !used[j] && a[i].label == b[j].label && iso(tree, colours, &a[i].to, &b[j].to) {
                    used[j] = true;
                    if assign(i + 1, a, b, used, tree, colours) {
                        return true;
                    }
                    used[j] = false;
                }
            }
            false
        }
        assign(0, &a, &b, &mut used, tree, colours)
    }
    iso(tree, &colours, u, v)
}
