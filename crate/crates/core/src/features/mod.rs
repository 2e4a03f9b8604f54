//! Per-segment feature vectors.
//!
//! Default layout `seg70-v1` (zero-based slots):
//!
//! | slots  | family      | contents                                         |
//! |--------|-------------|--------------------------------------------------|
//! | 0-5    | basic       | region pixels, centerline length, radius std/mean/min/max |
//! | 6-23   | first_order | see [`first_order::NAMES`]                       |
//! | 24-47  | glcm        | see [`glcm::NAMES`]                              |
//! | 48-67  | position    | see [`position::position_features`]              |
//! | 68-69  | topology    | degrees of the two terminal key points           |
//!
//! Disabled families are zero-filled so the length never changes.

pub mod first_order;
pub mod glcm;
pub mod position;

use serde::{Deserialize, Serialize};

use crate::distance::nearest_sites;
use crate::error::{Error, Result};
use crate::graph::IndividualGraph;
use crate::image::{BinaryMask, GrayImage};
use crate::skeleton::Pixel;

pub const LAYOUT_VERSION: &str = "seg70-v1";
pub const FEATURE_DIM: usize = 70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Basic,
    FirstOrder,
    Glcm,
    Position,
    Topology,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Basic, Family::FirstOrder, Family::Glcm, Family::Position, Family::Topology];

    /// Slot range inside the 70-value layout.
    pub fn range(self) -> std::ops::Range<usize> {
        match self {
            Family::Basic => 0..6,
            Family::FirstOrder => 6..24,
            Family::Glcm => 24..48,
            Family::Position => 48..68,
            Family::Topology => 68..70,
        }
    }
}

/// Names of all 70 slots, in layout order.
pub fn feature_names() -> Vec<String> {
    let mut v: Vec<String> = ["pixel_count", "centerline_length", "radius_std", "radius_mean", "radius_min", "radius_max"]
        .iter()
        .map(|s| format!("basic_{s}"))
        .collect();
    v.extend(first_order::NAMES.iter().map(|s| format!("firstorder_{s}")));
    v.extend(glcm::NAMES.iter().map(|s| format!("glcm_{s}")));
    for part in ["centroid", "kp0_tree", "kp1_tree", "kp0_seg", "kp1_seg"] {
        v.extend(["w_dx", "w_dy", "dx", "dy"].iter().map(|s| format!("position_{part}_{s}")));
    }
    v.extend(["topology_degree0".to_string(), "topology_degree1".to_string()]);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSpec {
    pub gray_levels: usize,
    pub glcm_offsets: Vec<(i64, i64)>,
    pub enabled_families: Vec<Family>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            gray_levels: 32,
            // 0, 45, 90 and 135 degrees (y grows downwards)
            glcm_offsets: vec![(1, 0), (1, -1), (0, 1), (1, 1)],
            enabled_families: Family::ALL.to_vec(),
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gray_levels < 2 {
            return Err(Error::InvalidInput("gray_levels must be at least 2".into()));
        }
        if self.glcm_offsets.is_empty() || self.glcm_offsets.contains(&(0, 0)) {
            return Err(Error::InvalidInput("glcm_offsets must be nonempty and nonzero".into()));
        }
        Ok(())
    }

    fn enabled(&self, f: Family) -> bool {
        self.enabled_families.contains(&f)
    }
}

/// Region pixel count, centerline length (1 per orthogonal step, sqrt 2 per
/// diagonal step) and radius std/mean/min/max (population std).
pub fn basic_pixel_features(region_pixels: usize, centerline: &[Pixel], radii: &[f64]) -> [f64; 6] {
    let length: f64 = centerline.windows(2).map(|w| w[0].dist(w[1])).sum();
    let (std, mean, min, max) = if radii.is_empty() {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let n = radii.len() as f64;
        let mean = radii.iter().sum::<f64>() / n;
        let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let max = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (var.sqrt(), mean, min, max)
    };
    [region_pixels as f64, length, std, mean, min, max]
}

/// Degrees of the two terminal key points, lower row-major position first.
pub fn topology_features(degrees: [usize; 2]) -> [f64; 2] {
    [degrees[0] as f64, degrees[1] as f64]
}

/// Splits the mask among segments: each foreground pixel goes to the segment
/// owning its nearest centerline pixel. Returns one pixel list per node.
pub fn artery_regions(g: &IndividualGraph, mask: &BinaryMask) -> Vec<Vec<Pixel>> {
    let (w, h) = (mask.width(), mask.height());
    let mut owner = vec![usize::MAX; w * h];
    let claim = |p: Pixel, id: usize, owner: &mut Vec<usize>| {
        if p.x < w && p.y < h && owner[p.y * w + p.x] == usize::MAX {
            owner[p.y * w + p.x] = id;
        }
    };
    for n in &g.nodes {
        for &p in &n.pixels {
            claim(p, n.id, &mut owner);
        }
    }
    for n in &g.nodes {
        if n.pixels.is_empty() {
            for t in &n.terminals {
                claim(t.position, n.id, &mut owner);
            }
        }
    }
    let sites = nearest_sites(w, h, |x, y| owner[y * w + x] != usize::MAX);
    let mut regions = vec![vec![]; g.nodes.len()];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as i64, y as i64) {
                continue;
            }
            if let Some(s) = sites[y * w + x] {
                regions[owner[s.y * w + s.x]].push(Pixel::new(x, y));
            }
        }
    }
    regions
}

/// Computes and attaches the feature vector of every node.
pub fn extract_features(g: &mut IndividualGraph, mask: &BinaryMask, gray: &GrayImage, spec: &FeatureSpec) -> Result<()> {
    spec.validate()?;
    if (mask.width(), mask.height()) != (g.width, g.height) || (gray.width(), gray.height()) != (g.width, g.height) {
        return Err(Error::Dimension(format!(
            "graph is {}x{}, mask {}x{}, image {}x{}",
            g.width,
            g.height,
            mask.width(),
            mask.height(),
            gray.width(),
            gray.height()
        )));
    }
    let regions = artery_regions(g, mask);

    // tree centre: centroid of every centerline point, shared key points once
    let mut all: Vec<Pixel> = g.nodes.iter().flat_map(|n| n.centerline()).collect();
    all.sort();
    all.dedup();
    let center = (
        all.iter().map(|p| p.x as f64).sum::<f64>() / all.len() as f64,
        all.iter().map(|p| p.y as f64).sum::<f64>() / all.len() as f64,
    );
    let max_r = g
        .nodes
        .iter()
        .flat_map(|n| n.radii.iter().copied().chain(n.terminals.iter().map(|t| t.radius)))
        .fold(0.0, f64::max);

    for (node, region) in g.nodes.iter_mut().zip(regions) {
        // fall back to the centerline when the mask gave the node nothing
        let region = if region.is_empty() {
            node.centerline().into_iter().filter(|p| p.x < gray.width() && p.y < gray.height()).collect()
        } else {
            region
        };
        let intensities: Vec<f64> = region.iter().map(|p| gray.get(p.x, p.y) as f64).collect();
        let mut v = vec![0.0; FEATURE_DIM];
        if spec.enabled(Family::Basic) {
            let radii: Vec<f64> = if node.radii.is_empty() {
                node.terminals.iter().map(|t| t.radius).collect()
            } else {
                node.radii.clone()
            };
            v[Family::Basic.range()].copy_from_slice(&basic_pixel_features(region.len(), &node.centerline(), &radii));
        }
        if spec.enabled(Family::FirstOrder) {
            v[Family::FirstOrder.range()].copy_from_slice(&first_order::first_order_features(&intensities, g.pixel_spacing)?);
        }
        if spec.enabled(Family::Glcm) {
            v[Family::Glcm.range()].copy_from_slice(&glcm::glcm_features(&region, &intensities, spec.gray_levels, &spec.glcm_offsets));
        }
        if spec.enabled(Family::Position) {
            let geom = position::SegmentGeometry {
                pixels: &node.pixels,
                radii: &node.radii,
                terminals: node.terminals.map(|t| (t.position, t.radius)),
            };
            v[Family::Position.range()].copy_from_slice(&position::position_features(&geom, center, max_r, g.width, g.height));
        }
        if spec.enabled(Family::Topology) {
            v[Family::Topology.range()].copy_from_slice(&topology_features(node.terminals.map(|t| t.degree)));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("feature {i} of node {} is not finite", node.id)));
        }
        node.features = Some(FeatureVector { layout: LAYOUT_VERSION.to_string(), values: v });
    }
    Ok(())
}

/// Per-feature z-score parameters fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub layout: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    /// Population mean and std over all rows; zero std becomes 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Result<Self> {
        let mut layout: Option<String> = None;
        let mut sum: Vec<f64> = vec![];
        let mut sq: Vec<f64> = vec![];
        let mut n = 0usize;
        let rows: Vec<&FeatureVector> = rows.into_iter().collect();
        for r in &rows {
            match &layout {
                None => {
                    layout = Some(r.layout.clone());
                    sum = vec![0.0; r.values.len()];
                    sq = vec![0.0; r.values.len()];
                }
                Some(l) if *l != r.layout || r.values.len() != sum.len() => {
                    return Err(Error::LayoutMismatch { expected: l.clone(), found: r.layout.clone() });
                }
                _ => {}
            }
            for (s, v) in sum.iter_mut().zip(&r.values) {
                *s += v;
            }
            n += 1;
        }
        let layout = layout.ok_or_else(|| Error::InvalidInput("cannot fit normalization on no data".into()))?;
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for r in &rows {
            for ((q, v), m) in sq.iter_mut().zip(&r.values).zip(&mean) {
                *q += (v - m).powi(2);
            }
        }
        let std = sq.iter().map(|q| (q / n as f64).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Ok(Self { layout, mean, std })
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        normalize(fv, self)
    }
}

pub fn normalize(fv: &FeatureVector, stats: &NormalizationStats) -> Result<FeatureVector> {
    if fv.layout != stats.layout || fv.values.len() != stats.mean.len() {
        return Err(Error::LayoutMismatch { expected: stats.layout.clone(), found: fv.layout.clone() });
    }
    let values = fv.values.iter().zip(&stats.mean).zip(&stats.std).map(|((v, m), s)| (v - m) / s).collect();
    Ok(FeatureVector { layout: fv.layout.clone(), values })
}
