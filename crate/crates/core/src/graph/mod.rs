//! Arterial graphs: segment nodes joined at shared bifurcations.

pub mod corrupt;
pub mod keypoint;
pub mod labels;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::image::{BinaryMask, GrayImage};
use crate::skeleton::{compute_radii, detect_keypoints, skeletonize, split_segments, Pixel};

pub use corrupt::corrupt;
pub use keypoint::{delete_cycles, merge_degree_two, merge_splitting_points, prune_small, to_line_graph, KeyPointGraph};
pub use labels::{group_subclasses, relabel_subclasses, ArteryLabel, BaseClass};

/// Version of the graph JSON document.
pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Thresholds of the graph-cleanup rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Capillary diameter threshold in millimetres.
    pub t_d_mm: f64,
    /// Minimum centerline length in pixels.
    pub t_c_px: usize,
    /// Bifurcations closer than this (pixels) are merged.
    pub t_sp_px: f64,
    /// Overrides the image's own pixel spacing (mm/pixel).
    pub pixel_spacing: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { t_d_mm: 1.8, t_c_px: 15, t_sp_px: 8.0, pixel_spacing: None }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let spacing_ok = self.pixel_spacing.is_none_or(|s| s > 0.0 && s.is_finite());
        if !(self.t_d_mm > 0.0 && self.t_c_px > 0 && self.t_sp_px > 0.0 && spacing_ok) {
            return Err(Error::InvalidInput(format!("thresholds must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewTag {
    #[serde(rename = "LAO")]
    Lao,
    #[serde(rename = "RAO")]
    Rao,
}

impl std::str::FromStr for ViewTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LAO" => Ok(ViewTag::Lao),
            "RAO" => Ok(ViewTag::Rao),
            _ => Err(Error::InvalidInput(format!("unknown view {s:?}, expected LAO or RAO"))),
        }
    }
}

impl std::fmt::Display for ViewTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViewTag::Lao => "LAO",
            ViewTag::Rao => "RAO",
        })
    }
}

/// A key point at one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub position: Pixel,
    /// Number of segments meeting at this key point.
    pub degree: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentNode {
    pub id: usize,
    /// Centerline from `terminals[0]` to `terminals[1]`, key points excluded.
    pub pixels: Vec<Pixel>,
    pub radii: Vec<f64>,
    /// Ordered row-major by position.
    pub terminals: [Terminal; 2],
    #[serde(default)]
    pub label: Option<ArteryLabel>,
    #[serde(default)]
    pub features: Option<FeatureVector>,
}

impl SegmentNode {
    /// Mean diameter in pixels (terminal radii when the interior is empty).
    pub fn mean_diameter(&self) -> f64 {
        if self.radii.is_empty() {
            self.terminals[0].radius + self.terminals[1].radius
        } else {
            2.0 * self.radii.iter().sum::<f64>() / self.radii.len() as f64
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.terminals.iter().any(|t| t.degree == 1)
    }

    /// Interior pixels plus both terminals, in walking order.
    pub fn centerline(&self) -> Vec<Pixel> {
        let mut v = Vec::with_capacity(self.pixels.len() + 2);
        v.push(self.terminals[0].position);
        v.extend_from_slice(&self.pixels);
        v.push(self.terminals[1].position);
        v
    }

    pub fn feature_values(&self) -> Result<&[f64]> {
        self.features
            .as_ref()
            .map(|f| f.values.as_slice())
            .ok_or_else(|| Error::InvalidInput(format!("node {} has no features", self.id)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub config: Option<PipelineConfig>,
}

/// Undirected tree of arterial segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualGraph {
    pub schema_version: u32,
    pub width: usize,
    pub height: usize,
    pub pixel_spacing: f64,
    pub view: ViewTag,
    pub nodes: Vec<SegmentNode>,
    /// `(lo, hi)` node-id pairs, sorted.
    pub edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl IndividualGraph {
    pub fn new(
        width: usize,
        height: usize,
        pixel_spacing: f64,
        view: ViewTag,
        nodes: Vec<SegmentNode>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        Self {
            schema_version: GRAPH_SCHEMA_VERSION,
            width,
            height,
            pixel_spacing,
            view,
            nodes,
            edges,
            provenance: Provenance::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![vec![]; self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        adj
    }

    /// Position of the key point two segments share, if any.
    pub fn shared_keypoint(&self, u: usize, v: usize) -> Option<Pixel> {
        let tu = &self.nodes[u].terminals;
        let tv = &self.nodes[v].terminals;
        tu.iter().map(|t| t.position).find(|p| tv.iter().any(|s| s.position == *p))
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.nodes.first().and_then(|n| n.features.as_ref()).map(|f| f.values.len())
    }

    pub fn labels(&self) -> Vec<Option<ArteryLabel>> {
        self.nodes.iter().map(|n| n.label).collect()
    }

    /// Checks the tree invariants: ids match positions, edges are simple and
    /// in range, and the graph is connected and acyclic.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported graph schema version {} (expected {GRAPH_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.nodes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::Structure(format!("node at position {i} has id {}", n.id)));
            }
            if n.pixels.len() != n.radii.len() {
                return Err(Error::Structure(format!("node {i} has {} pixels but {} radii", n.pixels.len(), n.radii.len())));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &self.edges {
            if a >= b || b >= self.nodes.len() {
                return Err(Error::Structure(format!("bad edge ({a}, {b})")));
            }
            if !seen.insert((a, b)) {
                return Err(Error::Structure(format!("duplicate edge ({a}, {b})")));
            }
        }
        if self.edges.len() + 1 != self.nodes.len() {
            return Err(Error::Structure(format!(
                "{} nodes and {} edges cannot form a tree",
                self.nodes.len(),
                self.edges.len()
            )));
        }
        let components = self.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }

    pub fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut count = 0;
        for s in 0..self.nodes.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("schema_version").and_then(|x| x.as_u64()) {
            Some(ver) if ver == GRAPH_SCHEMA_VERSION as u64 => {}
            Some(ver) => return Err(Error::InvalidInput(format!("unsupported graph schema version {ver}"))),
            None => return Err(Error::InvalidInput("graph document has no schema_version".into())),
        }
        let g: Self = serde_json::from_value(v)?;
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Runs the full cleanup pipeline on a vessel mask: thinning, radii, key
/// points, segment split, pruning, splitting-point merge, cycle deletion,
/// degree-two merge and the switch to a segment graph. Features are not
/// computed here.
pub fn build_individual_graph(mask: &BinaryMask, gray: &GrayImage, cfg: &PipelineConfig, view: ViewTag) -> Result<IndividualGraph> {
    cfg.validate()?;
    if mask.width() != gray.width() || mask.height() != gray.height() {
        return Err(Error::Dimension(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width(),
            mask.height(),
            gray.width(),
            gray.height()
        )));
    }
    let spacing = cfg.pixel_spacing.unwrap_or(gray.pixel_spacing());
    let kpg = keypoint_graph(mask, cfg, spacing)?;
    let mut g = to_line_graph(&kpg, None, view, spacing)?;
    g.provenance.config = Some(cfg.clone());
    Ok(g)
}

/// Everything up to (not including) the segment-graph switch.
pub fn keypoint_graph(mask: &BinaryMask, cfg: &PipelineConfig, pixel_spacing: f64) -> Result<KeyPointGraph> {
    let skel = skeletonize(mask);
    if skel.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let skel = compute_radii(mask, &skel)?;
    let kps = detect_keypoints(&skel);
    let split = split_segments(&skel, &kps);
    if split.segments.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let kept = prune_small(&split.segments, cfg, pixel_spacing)?;
    let kpg = KeyPointGraph::from_segments(&skel, &kps, &kept);
    let kpg = merge_splitting_points(&kpg, cfg);
    let kpg = delete_cycles(&kpg);
    Ok(merge_degree_two(&kpg))
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// A labeled tree built by hand: `parents[i]` is the parent of node i
    /// (the root has `None`); key points are laid out on a grid.
    pub fn tree(labels: &[&str], parents: &[Option<usize>], view: ViewTag) -> IndividualGraph {
        let n = labels.len();
        // node i runs from start[i] to end[i]; children start at the parent's end
        let mut start = vec![Pixel::new(0, 0); n];
        let mut end = vec![Pixel::new(0, 0); n];
        for i in 0..n {
            start[i] = match parents[i] {
                None => Pixel::new(10, 10),
                Some(p) => end[p],
            };
            end[i] = Pixel::new(10 + 20 * i, 30 + 20 * i);
        }
        let degree_at = |p: Pixel| {
            (0..n).filter(|&j| start[j] == p).count() + (0..n).filter(|&j| end[j] == p).count()
        };
        let nodes = (0..n)
            .map(|i| {
                let mut terminals = [start[i], end[i]].map(|p| Terminal { position: p, degree: degree_at(p), radius: 3.0 });
                terminals.sort_by_key(|t| t.position);
                SegmentNode {
                    id: i,
                    pixels: vec![Pixel::new(start[i].x + 1, start[i].y + 1)],
                    radii: vec![3.0 - 0.1 * i as f64],
                    terminals,
                    label: Some(labels[i].parse().unwrap()),
                    features: None,
                }
            })
            .collect();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            if let Some(p) = parents[i] {
                edges.push((p.min(i), p.max(i)));
            }
        }
        edges.sort_unstable();
        IndividualGraph::new(512, 512, 0.3, view, nodes, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::tree;
    use super::*;

    #[test]
    fn json_round_trip() {
        let g = tree(&["LMA", "LAD", "LCX"], &[None, Some(0), Some(0)], ViewTag::Lao);
        let s = g.to_json().unwrap();
        let back = IndividualGraph::from_json(&s).unwrap();
        assert_eq!(back, g);
        let bad = s.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(IndividualGraph::from_json(&bad).is_err());
    }

    #[test]
    fn validate_catches_cycles_and_splits() {
        let mut g = tree(&["LMA", "LAD", "LCX"], &[None, Some(0), Some(0)], ViewTag::Lao);
        g.validate().unwrap();
        g.edges.push((1, 2));
        assert!(g.validate().is_err());
        g.edges = vec![(0, 1)];
        assert!(g.validate().is_err());
    }

    #[test]
    fn relabel_lad_split() {
        // LMA -> LAD(a) -> {D, LAD(b)}, LMA -> LCX
        let g = tree(&["LMA", "LAD", "LCX", "D", "LAD"], &[None, Some(0), Some(0), Some(1), Some(1)], ViewTag::Lao);
        let r = relabel_subclasses(&g).unwrap();
        let names: Vec<String> = r.labels().iter().map(|l| l.unwrap().to_string()).collect();
        assert_eq!(names, ["LMA1", "LAD1", "LCX1", "D1", "LAD2"]);
    }

    #[test]
    fn relabel_lcx_chain() {
        // LMA -> LCX -> {OM, LCX -> {OM, LCX}}
        let g = tree(
            &["LMA", "LCX", "OM", "LCX", "OM", "LCX"],
            &[None, Some(0), Some(1), Some(1), Some(3), Some(3)],
            ViewTag::Rao,
        );
        let r = relabel_subclasses(&g).unwrap();
        let names: Vec<String> = r.labels().iter().map(|l| l.unwrap().to_string()).collect();
        assert_eq!(names, ["LMA1", "LCX1", "OM1", "LCX2", "OM2", "LCX3"]);
        let mut uniq = names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), names.len());
    }

    #[test]
    fn relabel_requires_one_lma() {
        let g = tree(&["LAD", "LCX"], &[None, Some(0)], ViewTag::Lao);
        assert!(matches!(relabel_subclasses(&g), Err(Error::Labeling(_))));
        let g = tree(&["LMA", "LMA"], &[None, Some(0)], ViewTag::Lao);
        assert!(matches!(relabel_subclasses(&g), Err(Error::Labeling(_))));
    }

    #[test]
    fn single_class_each() {
        let g = tree(&["LMA", "LAD", "LCX"], &[None, Some(0), Some(0)], ViewTag::Lao);
        let r = relabel_subclasses(&g).unwrap();
        assert!(r.labels().iter().all(|l| l.unwrap().sub_index == Some(1)));
    }

    #[test]
    fn pipeline_on_empty_and_tiny_masks() {
        let gray = GrayImage::filled(64, 64, 200, 0.3).unwrap();
        let cfg = PipelineConfig::default();
        let empty = BinaryMask::new(64, 64);
        assert!(matches!(build_individual_graph(&empty, &gray, &cfg, ViewTag::Lao), Err(Error::EmptyGraph)));
        let speck = BinaryMask::from_fn(64, 64, |x, y| (30..33).contains(&x) && (30..34).contains(&y));
        assert!(matches!(build_individual_graph(&speck, &gray, &cfg, ViewTag::Lao), Err(Error::EmptyGraph)));
    }

    #[test]
    fn pipeline_on_thick_y() {
        // a thick Y: stem going down from the junction, two arms going up
        let gray = GrayImage::filled(200, 200, 200, 0.3).unwrap();
        let near = |x: f64, y: f64, ax: f64, ay: f64, bx: f64, by: f64| {
            let (dx, dy) = (bx - ax, by - ay);
            let t = (((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            ((x - ax - t * dx).powi(2) + (y - ay - t * dy).powi(2)).sqrt()
        };
        let mask = BinaryMask::from_fn(200, 200, |x, y| {
            let (x, y) = (x as f64, y as f64);
            near(x, y, 100.0, 100.0, 100.0, 180.0) < 5.0
                || near(x, y, 100.0, 100.0, 40.0, 30.0) < 4.0
                || near(x, y, 100.0, 100.0, 160.0, 30.0) < 4.0
        });
        let g = build_individual_graph(&mask, &gray, &PipelineConfig::default(), ViewTag::Lao).unwrap();
        g.validate().unwrap();
        assert_eq!((g.n(), g.n_edges()), (3, 2));
    }
}
