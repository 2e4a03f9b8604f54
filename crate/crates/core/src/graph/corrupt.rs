//! Random removal of leaf segments for robustness experiments.

use std::collections::BTreeMap;

use rand::Rng;

use super::IndividualGraph;
use crate::skeleton::Pixel;

/// Removes each leaf segment (one that ends in an endpoint) independently
/// with probability `removal_prob`. One draw is made per leaf in id order.
/// At least one node always survives. Key points that lose a segment are
/// re-linked as a star around their previous parent when it survives, or
/// around the thickest remaining segment otherwise. Surviving nodes keep
/// their features; terminal degrees are updated.
pub fn corrupt<R: Rng + ?Sized>(g: &IndividualGraph, removal_prob: f64, rng: &mut R) -> IndividualGraph {
    let p = removal_prob.clamp(0.0, 1.0);
    let n = g.nodes.len();
    let mut removed = vec![false; n];
    for (i, node) in g.nodes.iter().enumerate() {
        if node.is_leaf() {
            let draw: f64 = rng.random();
            removed[i] = draw < p;
        }
    }
    if removed.iter().all(|&r| r) {
        removed[0] = false;
    }
    if !removed.iter().any(|&r| r) {
        return g.clone();
    }

    // segments meeting at each key point
    let mut at: BTreeMap<Pixel, Vec<usize>> = BTreeMap::new();
    for (i, node) in g.nodes.iter().enumerate() {
        for t in &node.terminals {
            at.entry(t.position).or_default().push(i);
        }
    }
    let adj = g.adjacency();
    let mut edges = Vec::new();
    for members in at.values() {
        if members.len() < 2 {
            continue;
        }
        let linked = |u: usize| members.iter().filter(|&&v| v != u).all(|v| adj[u].binary_search(v).is_ok());
        let old_parent = members.iter().copied().find(|&u| linked(u));
        let alive: Vec<usize> = members.iter().copied().filter(|&u| !removed[u]).collect();
        if alive.len() < 2 {
            continue;
        }
        let parent = match old_parent {
            Some(u) if !removed[u] => u,
            _ => *alive
                .iter()
                .max_by(|&&a, &&b| g.nodes[a].mean_diameter().total_cmp(&g.nodes[b].mean_diameter()).then(b.cmp(&a)))
                .unwrap(),
        };
        for &c in &alive {
            if c != parent {
                edges.push((parent.min(c), parent.max(c)));
            }
        }
    }

    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        if !removed[i] {
            remap[i] = nodes.len();
            let mut node = node.clone();
            node.id = nodes.len();
            for t in node.terminals.iter_mut() {
                t.degree = at[&t.position].iter().filter(|&&u| !removed[u]).count();
            }
            nodes.push(node);
        }
    }
    let mut edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (remap[a], remap[b])).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut out = g.clone();
    out.nodes = nodes;
    out.edges = edges;
    out
}
