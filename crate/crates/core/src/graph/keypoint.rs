//! Key-point graph and the cleanup rules that turn a raw centerline into a
//! tree of arterial segments.

use std::collections::VecDeque;

use super::{IndividualGraph, PipelineConfig, SegmentNode, Terminal, ViewTag};
use crate::error::{Error, Result};
use crate::skeleton::{CenterlineSegment, KeyPointSet, Pixel, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct KpNode {
    pub position: Pixel,
    pub radius: f64,
}

/// A segment between two key points. `pixels` runs from `ends[0]` to
/// `ends[1]`, key points excluded, and `ends[0] <= ends[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KpEdge {
    pub pixels: Vec<Pixel>,
    pub radii: Vec<f64>,
    pub ends: [usize; 2],
}

impl KpEdge {
    fn reversed(mut self) -> Self {
        self.pixels.reverse();
        self.radii.reverse();
        self.ends.swap(0, 1);
        self
    }

    fn normalized(self) -> Self {
        if self.ends[0] > self.ends[1] {
            self.reversed()
        } else {
            self
        }
    }
}

/// Key points as nodes, centerline segments as edges. Node degrees are
/// always derived from the edge list; a self-loop counts twice.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPointGraph {
    pub width: usize,
    pub height: usize,
    pub nodes: Vec<KpNode>,
    pub edges: Vec<KpEdge>,
}

impl KeyPointGraph {
    pub fn from_segments(skeleton: &Skeleton, keypoints: &KeyPointSet, segments: &[CenterlineSegment]) -> Self {
        let nodes = keypoints
            .all()
            .iter()
            .map(|k| KpNode { position: k.position, radius: skeleton.radius_at(k.position).unwrap_or(0.0) })
            .collect();
        let edges = segments
            .iter()
            .map(|s| KpEdge { pixels: s.pixels.clone(), radii: s.radii.clone(), ends: s.terminals }.normalized())
            .collect();
        let mut g = Self { width: skeleton.width(), height: skeleton.height(), nodes, edges };
        g.compact();
        g
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.ends[0]] += 1;
            d[e.ends[1]] += 1;
        }
        d
    }

    pub fn degree(&self, k: usize) -> usize {
        self.edges.iter().map(|e| (e.ends[0] == k) as usize + (e.ends[1] == k) as usize).sum()
    }

    pub fn incident(&self, k: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].ends.contains(&k)).collect()
    }

    /// Mean diameter in pixels; a segment with no interior pixels uses its
    /// two key points.
    pub fn mean_diameter(&self, e: usize) -> f64 {
        let edge = &self.edges[e];
        if edge.radii.is_empty() {
            self.nodes[edge.ends[0]].radius + self.nodes[edge.ends[1]].radius
        } else {
            2.0 * edge.radii.iter().sum::<f64>() / edge.radii.len() as f64
        }
    }

    /// Drops isolated key points and restores the row-major node order.
    fn compact(&mut self) {
        let deg = self.degrees();
        let mut keep: Vec<usize> = (0..self.nodes.len()).filter(|&k| deg[k] > 0).collect();
        keep.sort_by_key(|&k| (self.nodes[k].position, k));
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        self.nodes = keep.iter().map(|&k| self.nodes[k].clone()).collect();
        for e in self.edges.iter_mut() {
            e.ends = [remap[e.ends[0]], remap[e.ends[1]]];
        }
        self.edges = std::mem::take(&mut self.edges).into_iter().map(KpEdge::normalized).collect();
    }

    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.nodes.len());
        for e in &self.edges {
            uf.union(e.ends[0], e.ends[1]);
        }
        (0..self.nodes.len()).filter(|&k| uf.find(k) == k).count()
    }

    pub fn is_acyclic(&self) -> bool {
        let mut uf = UnionFind::new(self.nodes.len());
        self.edges.iter().all(|e| uf.union(e.ends[0], e.ends[1]))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Removes capillaries (maximum diameter below `T_d`) and short segments
/// (fewer than `T_c` centerline pixels). Only segments that end in an
/// endpoint are candidates, so internal pieces never split the tree.
pub fn prune_small(segments: &[CenterlineSegment], cfg: &PipelineConfig, pixel_spacing: f64) -> Result<Vec<CenterlineSegment>> {
    let n_kp = segments.iter().flat_map(|s| s.terminals).max().map_or(0, |m| m + 1);
    let mut deg = vec![0usize; n_kp];
    for s in segments {
        deg[s.terminals[0]] += 1;
        deg[s.terminals[1]] += 1;
    }
    let min_diameter_px = cfg.t_d_mm / pixel_spacing;
    let out: Vec<CenterlineSegment> = segments
        .iter()
        .filter(|s| {
            let leaf = s.terminals.iter().any(|&t| deg[t] == 1);
            let thin = 2.0 * s.max_radius() < min_diameter_px;
            let short = s.pixels.len() < cfg.t_c_px;
            !(leaf && (thin || short))
        })
        .cloned()
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(out)
}

/// Repeatedly merges the first pair of bifurcations (degree >= 3) closer
/// than `T_sp`. The merged node keeps the first point's position, segments
/// joining the two are absorbed and the rest are re-attached.
pub fn merge_splitting_points(kpg: &KeyPointGraph, cfg: &PipelineConfig) -> KeyPointGraph {
    let mut g = kpg.clone();
    loop {
        let deg = g.degrees();
        let bif: Vec<usize> = (0..g.nodes.len()).filter(|&k| deg[k] >= 3).collect();
        let pair = bif.iter().enumerate().find_map(|(ai, &a)| {
            bif[ai + 1..]
                .iter()
                .find(|&&b| g.nodes[a].position.dist(g.nodes[b].position) < cfg.t_sp_px)
                .map(|&b| (a, b))
        });
        let Some((a, b)) = pair else { break };
        g.edges.retain(|e| !(e.ends.contains(&a) && e.ends.contains(&b) && e.ends[0] != e.ends[1]));
        for e in g.edges.iter_mut() {
            for end in e.ends.iter_mut() {
                if *end == b {
                    *end = a;
                }
            }
        }
        g.compact();
    }
    g
}

/// Breaks cycles one at a time: the first edge (in index order) that closes
/// a cycle defines it, and the cycle member with the smallest mean diameter
/// is removed (lowest index on ties).
pub fn delete_cycles(kpg: &KeyPointGraph) -> KeyPointGraph {
    let mut g = kpg.clone();
    while let Some(cycle) = first_cycle(&g) {
        let victim = *cycle
            .iter()
            .min_by(|&&x, &&y| g.mean_diameter(x).total_cmp(&g.mean_diameter(y)).then(x.cmp(&y)))
            .unwrap();
        g.edges.remove(victim);
    }
    g.compact();
    g
}

fn first_cycle(g: &KeyPointGraph) -> Option<Vec<usize>> {
    let mut uf = UnionFind::new(g.nodes.len());
    let mut forest: Vec<Vec<(usize, usize)>> = vec![vec![]; g.nodes.len()];
    for (i, e) in g.edges.iter().enumerate() {
        let [a, b] = e.ends;
        if !uf.union(a, b) {
            // path a -> b through the forest built so far
            let mut prev = vec![None; g.nodes.len()];
            let mut seen = vec![false; g.nodes.len()];
            seen[a] = true;
            let mut q = VecDeque::from([a]);
            while let Some(u) = q.pop_front() {
                for &(v, ei) in &forest[u] {
                    if !seen[v] {
                        seen[v] = true;
                        prev[v] = Some((u, ei));
                        q.push_back(v);
                    }
                }
            }
            let mut cycle = vec![i];
            let mut cur = b;
            while let Some((u, ei)) = prev[cur] {
                cycle.push(ei);
                cur = u;
            }
            cycle.sort_unstable();
            return Some(cycle);
        }
        forest[a].push((b, i));
        forest[b].push((a, i));
    }
    None
}

/// Dissolves degree-2 key points, concatenating their two segments with the
/// key point itself in between.
pub fn merge_degree_two(kpg: &KeyPointGraph) -> KeyPointGraph {
    let mut g = kpg.clone();
    loop {
        let deg = g.degrees();
        let candidate = (0..g.nodes.len()).find(|&k| {
            deg[k] == 2 && {
                let inc = g.incident(k);
                inc.len() == 2
            }
        });
        let Some(m) = candidate else { break };
        let inc = g.incident(m);
        let (i1, i2) = (inc[0], inc[1]);
        let e1 = g.edges[i1].clone();
        let e2 = g.edges[i2].clone();
        let e1 = if e1.ends[1] == m { e1 } else { e1.reversed() };
        let e2 = if e2.ends[0] == m { e2 } else { e2.reversed() };
        let mut pixels = e1.pixels;
        pixels.push(g.nodes[m].position);
        pixels.extend(e2.pixels);
        let mut radii = e1.radii;
        radii.push(g.nodes[m].radius);
        radii.extend(e2.radii);
        let merged = KpEdge { pixels, radii, ends: [e1.ends[0], e2.ends[1]] }.normalized();
        g.edges[i1] = merged;
        g.edges.remove(i2);
        g.compact();
    }
    g
}

/// Turns segments into nodes. At every key point shared by two or more
/// segments, one parent segment is linked to each of the others (star
/// expansion), which keeps the result a tree. The parent is the segment
/// nearest `root` when given, otherwise the one with the largest mean
/// diameter.
pub fn to_line_graph(kpg: &KeyPointGraph, root: Option<usize>, view: ViewTag, pixel_spacing: f64) -> Result<IndividualGraph> {
    if kpg.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let components = kpg.component_count();
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    if !kpg.is_acyclic() {
        return Err(Error::Structure("key-point graph still contains a cycle".into()));
    }
    let m = kpg.edges.len();
    // canonical segment order: terminal positions, then geometry
    let mut order: Vec<usize> = (0..m).collect();
    let key = |e: usize| {
        let ed = &kpg.edges[e];
        let mut t = [kpg.nodes[ed.ends[0]].position, kpg.nodes[ed.ends[1]].position];
        t.sort();
        (t, ed.pixels.first().copied(), ed.pixels.len())
    };
    order.sort_by_key(|&e| key(e));
    let mut new_id = vec![0; m];
    for (i, &e) in order.iter().enumerate() {
        new_id[e] = i;
    }

    let hops = root.map(|r| {
        let mut d = vec![usize::MAX; m];
        d[r] = 0;
        let mut q = VecDeque::from([r]);
        while let Some(e) = q.pop_front() {
            for k in kpg.edges[e].ends {
                for f in kpg.incident(k) {
                    if d[f] == usize::MAX {
                        d[f] = d[e] + 1;
                        q.push_back(f);
                    }
                }
            }
        }
        d
    });

    let deg = kpg.degrees();
    let mut edges = Vec::new();
    for k in 0..kpg.nodes.len() {
        let inc = kpg.incident(k);
        if inc.len() < 2 {
            continue;
        }
        let parent = match &hops {
            Some(d) => *inc.iter().min_by_key(|&&e| (d[e], e)).unwrap(),
            None => *inc
                .iter()
                .max_by(|&&x, &&y| kpg.mean_diameter(x).total_cmp(&kpg.mean_diameter(y)).then(y.cmp(&x)))
                .unwrap(),
        };
        for &c in &inc {
            if c != parent {
                let (a, b) = (new_id[parent], new_id[c]);
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();

    let nodes = order
        .iter()
        .enumerate()
        .map(|(id, &e)| {
            let ed = &kpg.edges[e];
            let term = |k: usize| Terminal { position: kpg.nodes[k].position, degree: deg[k], radius: kpg.nodes[k].radius };
            let mut terminals = [term(ed.ends[0]), term(ed.ends[1])];
            let mut pixels = ed.pixels.clone();
            let mut radii = ed.radii.clone();
            if terminals[0].position > terminals[1].position {
                terminals.swap(0, 1);
                pixels.reverse();
                radii.reverse();
            }
            SegmentNode { id, pixels, radii, terminals, label: None, features: None }
        })
        .collect();

    Ok(IndividualGraph::new(kpg.width, kpg.height, pixel_spacing, view, nodes, edges))
}
