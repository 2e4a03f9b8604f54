//! Synthetic left-coronary trees rendered as angiogram-like images.
//!
//! A tree has one LMA stem that splits into LAD and LCX; 1-3 diagonals hang
//! off the LAD and 1-3 obtuse marginals off the LCX. Branches are quadratic
//! curves with linearly tapering radii, drawn as dark tubes with a parabolic
//! cross-section over a smooth, noisy background.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureSpec};
use crate::graph::{build_individual_graph, relabel_subclasses, ArteryLabel, BaseClass, IndividualGraph, PipelineConfig, ViewTag};
use crate::image::{BinaryMask, GrayImage, CANONICAL_SIZE};
use crate::runtime::Dataset;

/// Ranges the generator samples from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub size: usize,
    /// Millimetres per pixel.
    pub pixel_spacing: f64,
    /// Inclusive range of diagonal branch counts.
    pub diagonals: (usize, usize),
    /// Inclusive range of obtuse-marginal branch counts.
    pub marginals: (usize, usize),
    /// Share of samples with an OM deliberately drawn across the LAD.
    pub overlap_fraction: f64,
    /// Share of LAO-style samples in a benchmark.
    pub lao_fraction: f64,
    pub noise_sigma: (f64, f64),
    /// Attempts per sample before giving up.
    pub max_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: CANONICAL_SIZE,
            pixel_spacing: 0.3,
            diagonals: (1, 3),
            marginals: (1, 3),
            overlap_fraction: 0.02,
            lao_fraction: 0.3,
            noise_sigma: (3.0, 7.0),
            max_retries: 64,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.size >= 128
            && self.pixel_spacing > 0.0
            && 1 <= self.diagonals.0
            && self.diagonals.0 <= self.diagonals.1
            && self.diagonals.1 <= 3
            && 1 <= self.marginals.0
            && self.marginals.0 <= self.marginals.1
            && self.marginals.1 <= 3
            && (0.0..=1.0).contains(&self.overlap_fraction)
            && (0.0..=1.0).contains(&self.lao_fraction)
            && 0.0 <= self.noise_sigma.0
            && self.noise_sigma.0 <= self.noise_sigma.1
            && self.max_retries > 0;
        if !ok {
            return Err(Error::InvalidInput(format!("bad synthesis ranges {self:?}")));
        }
        Ok(())
    }
}

/// One drawn vessel: a sampled centerline with a radius per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: BaseClass,
    /// Index of the branch this one leaves from.
    pub parent: Option<usize>,
    /// Index into the parent's points where this branch starts.
    pub attach: usize,
    pub points: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
}

/// Everything needed to redraw a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub view: ViewTag,
    pub branches: Vec<Branch>,
    pub background: f64,
    /// Background slope in gray levels per pixel along x and y.
    pub gradient: (f64, f64),
    /// Darkening at the center of the widest vessel.
    pub contrast: f64,
    pub noise_sigma: f64,
    pub overlap: bool,
}

impl TreeSpec {
    fn count(&self, c: BaseClass) -> usize {
        self.branches.iter().filter(|b| b.label == c).count()
    }

    /// Segments the cleanup rules should recover: the stem, every side
    /// branch, and the LAD/LCX cut into one more piece than they carry
    /// side branches.
    pub fn expected_nodes(&self) -> usize {
        let (d, om) = (self.count(BaseClass::D), self.count(BaseClass::OM));
        1 + (d + 1) + (om + 1) + d + om
    }

    /// Expected segment-graph edges as sub-label pairs.
    pub fn expected_edges(&self) -> BTreeSet<(ArteryLabel, ArteryLabel)> {
        let l = ArteryLabel::new;
        let mut out = BTreeSet::new();
        let mut add = |a: ArteryLabel, b: ArteryLabel| {
            out.insert((a.min(b), a.max(b)));
        };
        add(l(BaseClass::LMA, 1), l(BaseClass::LAD, 1));
        add(l(BaseClass::LMA, 1), l(BaseClass::LCX, 1));
        for (main, side) in [(BaseClass::LAD, BaseClass::D), (BaseClass::LCX, BaseClass::OM)] {
            for k in 1..=self.count(side) as u32 {
                add(l(main, k), l(main, k + 1));
                add(l(main, k), l(side, k));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub seed: u64,
    pub spec: TreeSpec,
    pub gray: GrayImage,
    pub mask: BinaryMask,
    /// Branch index owning each mask pixel (`usize::MAX` for background).
    pub owner: Vec<usize>,
}

fn deg(a: f64) -> f64 {
    a.to_radians()
}

/// Quadratic curve from `p0` heading `angle` for `length` pixels, bowed
/// sideways by `bow` (fraction of the length). Sampled every half pixel.
fn curve(p0: (f64, f64), angle: f64, length: f64, bow: f64) -> Vec<(f64, f64)> {
    let dir = (angle.cos(), angle.sin());
    let p2 = (p0.0 + length * dir.0, p0.1 + length * dir.1);
    let mid = ((p0.0 + p2.0) / 2.0, (p0.1 + p2.1) / 2.0);
    let p1 = (mid.0 - dir.1 * bow * length, mid.1 + dir.0 * bow * length);
    let n = (2.0 * length).ceil() as usize + 1;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let u = 1.0 - t;
            (u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0, u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1)
        })
        .collect()
}

fn taper(n: usize, r0: f64, r1: f64) -> Vec<f64> {
    (0..n).map(|i| r0 + (r1 - r0) * i as f64 / (n - 1).max(1) as f64).collect()
}

fn heading(points: &[(f64, f64)], i: usize) -> f64 {
    let a = points[i.saturating_sub(4)];
    let b = points[(i + 4).min(points.len() - 1)];
    (b.1 - a.1).atan2(b.0 - a.0)
}

fn arc_positions(points: &[(f64, f64)]) -> Vec<f64> {
    let mut s = vec![0.0; points.len()];
    for i in 1..points.len() {
        s[i] = s[i - 1] + ((points[i].0 - points[i - 1].0).powi(2) + (points[i].1 - points[i - 1].1).powi(2)).sqrt();
    }
    s
}

/// Attachment indices along a parent, at least `gap` pixels apart.
fn attachments<R: Rng + ?Sized>(parent: &[(f64, f64)], count: usize, gap: f64, rng: &mut R) -> Option<Vec<usize>> {
    let s = arc_positions(parent);
    let total = *s.last()?;
    for _ in 0..200 {
        let mut at: Vec<f64> = (0..count).map(|_| rng.random_range(0.22..0.85) * total).collect();
        at.sort_by(f64::total_cmp);
        let spaced = at.windows(2).all(|w| w[1] - w[0] >= gap);
        if spaced {
            return Some(at.iter().map(|&a| s.partition_point(|&x| x < a).min(parent.len() - 1)).collect());
        }
    }
    None
}

/// Samples a tree that fits the image and keeps unrelated branches apart.
/// With `overlap`, the first OM is aimed across the LAD.
pub fn sample_spec<R: Rng + ?Sized>(cfg: &SynthConfig, view: ViewTag, overlap: bool, rng: &mut R) -> Option<TreeSpec> {
    let (lma_dir, lad_dir, lcx_dir) = match view {
        ViewTag::Lao => (rng.random_range(30.0..50.0), rng.random_range(70.0..90.0), rng.random_range(140.0..165.0)),
        ViewTag::Rao => (rng.random_range(-10.0..15.0), rng.random_range(30.0..50.0), rng.random_range(90.0..115.0)),
    };
    let mut branches = Vec::new();
    let lma_len = rng.random_range(50.0..80.0);
    let lma = curve((0.0, 0.0), deg(lma_dir), lma_len, rng.random_range(-0.08..0.08));
    let r_lma = rng.random_range(6.5..7.5);
    let tip = *lma.last().unwrap();
    branches.push(Branch { label: BaseClass::LMA, parent: None, attach: 0, radii: vec![r_lma; lma.len()], points: lma });

    let mains = [
        (BaseClass::LAD, lad_dir, rng.random_range(300.0..370.0), rng.random_range(5.2..6.0), rng.random_range(3.7..4.2)),
        (BaseClass::LCX, lcx_dir, rng.random_range(200.0..260.0), rng.random_range(4.8..5.6), rng.random_range(3.7..4.0)),
    ];
    for (label, dir, len, r0, r1) in mains {
        let pts = curve(tip, deg(dir), len, rng.random_range(-0.12..0.12));
        let parent_end = branches[0].points.len() - 1;
        branches.push(Branch { label, parent: Some(0), attach: parent_end, radii: taper(pts.len(), r0, r1), points: pts });
    }

    // side branches turn away from the other main branch
    let away = if lcx_dir > lad_dir { 1.0 } else { -1.0 };
    let sides = [
        (1, BaseClass::D, cfg.diagonals, -away, 80.0..130.0),
        (2, BaseClass::OM, cfg.marginals, away, 70.0..120.0),
    ];
    let mut crossing_at = None;
    for (parent, label, (lo, hi), side, lens) in sides {
        let count = rng.random_range(lo..=hi);
        let at = attachments(&branches[parent].points, count, 60.0, rng)?;
        for (k, &a) in at.iter().enumerate() {
            let p = &branches[parent];
            let start = p.points[a];
            let r_parent = p.radii[a];
            let pts = if overlap && label == BaseClass::OM && k == 0 {
                // aim at a point on the LAD and run past it
                let lad = &branches[1].points;
                let target = lad[(rng.random_range(0.45..0.8) * lad.len() as f64) as usize];
                let (dx, dy) = (target.0 - start.0, target.1 - start.1);
                crossing_at = Some(branches.len());
                curve(start, dy.atan2(dx), dx.hypot(dy) + rng.random_range(35.0..60.0), 0.0)
            } else {
                let turn = side * rng.random_range(30.0..55.0);
                curve(start, heading(&p.points, a) + deg(turn), rng.random_range(lens.clone()), rng.random_range(-0.1..0.1))
            };
            let r0 = rng.random_range(4.0..4.8f64).min(0.92 * r_parent);
            let r1 = rng.random_range(3.4..3.7f64).min(r0);
            branches.push(Branch { label, parent: Some(parent), attach: a, radii: taper(pts.len(), r0, r1), points: pts });
        }
    }

    // the crossing branch is exempt from the separation check
    let checked: Vec<Branch> =
        branches.iter().enumerate().filter(|&(i, _)| Some(i) != crossing_at).map(|(_, b)| b.clone()).collect();
    if !well_separated(&checked) {
        return None;
    }
    let margin = 14.0;
    let lo = branches.iter().flat_map(|b| b.points.iter().zip(&b.radii)).fold((f64::MAX, f64::MAX), |m, (p, r)| {
        (m.0.min(p.0 - r), m.1.min(p.1 - r))
    });
    let hi = branches.iter().flat_map(|b| b.points.iter().zip(&b.radii)).fold((f64::MIN, f64::MIN), |m, (p, r)| {
        (m.0.max(p.0 + r), m.1.max(p.1 + r))
    });
    let size = cfg.size as f64;
    let slack = (size - 2.0 * margin - (hi.0 - lo.0), size - 2.0 * margin - (hi.1 - lo.1));
    if slack.0 < 0.0 || slack.1 < 0.0 {
        return None;
    }
    let shift = (
        margin - lo.0 + rng.random_range(0.0..=slack.0),
        margin - lo.1 + rng.random_range(0.0..=slack.1),
    );
    for b in branches.iter_mut() {
        for p in b.points.iter_mut() {
            *p = (p.0 + shift.0, p.1 + shift.1);
        }
    }
    Some(TreeSpec {
        view,
        branches,
        background: rng.random_range(160.0..205.0),
        gradient: (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)),
        contrast: rng.random_range(70.0..110.0),
        noise_sigma: rng.random_range(cfg.noise_sigma.0..=cfg.noise_sigma.1),
        overlap,
    })
}

/// Branches must keep a clear gap except near where either one starts.
fn well_separated(branches: &[Branch]) -> bool {
    let start = |b: &Branch| b.points[0];
    for (ia, a) in branches.iter().enumerate() {
        for b in &branches[ia + 1..] {
            let junctions = [start(a), start(b)];
            let near = |p: (f64, f64)| junctions.iter().any(|j| (p.0 - j.0).hypot(p.1 - j.1) < 30.0);
            for (p, ra) in a.points.iter().zip(&a.radii).step_by(2) {
                if near(*p) {
                    continue;
                }
                for (q, rb) in b.points.iter().zip(&b.radii).step_by(2) {
                    if near(*q) {
                        continue;
                    }
                    if (p.0 - q.0).hypot(p.1 - q.1) < ra + rb + 6.0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Rasterizes the tubes: returns the mask, a per-pixel darkening depth and
/// the branch owning each vessel pixel.
fn rasterize(spec: &TreeSpec, w: usize, h: usize) -> (Vec<bool>, Vec<f64>, Vec<usize>) {
    let mut depth = vec![0.0f64; w * h];
    let mut owner = vec![usize::MAX; w * h];
    let mut inside = vec![false; w * h];
    let r_max = spec.branches.iter().flat_map(|b| b.radii.iter().copied()).fold(0.0, f64::max);
    for (bi, b) in spec.branches.iter().enumerate() {
        for (&(cx, cy), &r) in b.points.iter().zip(&b.radii) {
            let x0 = (cx - r).floor().max(0.0) as usize;
            let y0 = (cy - r).floor().max(0.0) as usize;
            let x1 = ((cx + r).ceil() as usize).min(w - 1);
            let y1 = ((cy + r).ceil() as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    if d2 > r * r {
                        continue;
                    }
                    let k = y * w + x;
                    inside[k] = true;
                    let v = (1.0 - d2 / (r * r)) * (r / r_max);
                    if v > depth[k] || owner[k] == usize::MAX {
                        depth[k] = depth[k].max(v);
                        owner[k] = bi;
                    }
                }
            }
        }
    }
    (inside, depth, owner)
}

/// Draws a sample for a given tree.
pub fn render<R: Rng + ?Sized>(spec: &TreeSpec, cfg: &SynthConfig, seed: u64, rng: &mut R) -> Result<SynthSample> {
    let (w, h) = (cfg.size, cfg.size);
    let (inside, depth, owner) = rasterize(spec, w, h);
    let noise = Normal::new(0.0, spec.noise_sigma.max(1e-9)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let bg = spec.background + spec.gradient.0 * (x as f64 - w as f64 / 2.0) + spec.gradient.1 * (y as f64 - h as f64 / 2.0);
            let v = bg - spec.contrast * depth[k] + noise.sample(rng);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(SynthSample {
        seed,
        spec: spec.clone(),
        gray: GrayImage::new(w, h, data, cfg.pixel_spacing)?,
        mask: BinaryMask::from_vec(w, h, inside)?,
        owner,
    })
}

/// Labels every segment with the branch owning most of its centerline and
/// assigns sub-indices.
pub fn label_graph_from_truth(g: &IndividualGraph, sample: &SynthSample) -> Result<IndividualGraph> {
    let w = sample.mask.width();
    let mut out = g.clone();
    for node in out.nodes.iter_mut() {
        let mut votes = vec![0usize; sample.spec.branches.len()];
        for p in node.centerline() {
            let o = sample.owner[p.y * w + p.x];
            if o != usize::MAX {
                votes[o] += 1;
            }
        }
        let best = (0..votes.len()).max_by_key(|&i| (votes[i], std::cmp::Reverse(i))).unwrap();
        if votes[best] == 0 {
            return Err(Error::Labeling(format!("segment {} lies outside every branch", node.id)));
        }
        node.label = Some(ArteryLabel::base_only(sample.spec.branches[best].label));
    }
    relabel_subclasses(&out)
}

/// Whether the extracted graph has exactly the intended segments and joins.
pub fn topology_matches(g: &IndividualGraph, spec: &TreeSpec) -> bool {
    if g.n() != spec.expected_nodes() {
        return false;
    }
    let labels = g.labels();
    let mut edges = BTreeSet::new();
    for &(a, b) in &g.edges {
        match (labels[a], labels[b]) {
            (Some(x), Some(y)) => {
                edges.insert((x.min(y), x.max(y)));
            }
            _ => return false,
        }
    }
    edges == spec.expected_edges()
}

/// Runs the cleanup pipeline on a sample and labels the result from the
/// generator's ground truth. Features are extracted with `features`.
pub fn sample_graph(sample: &SynthSample, pipeline: &PipelineConfig, features: &FeatureSpec) -> Result<IndividualGraph> {
    let g = build_individual_graph(&sample.mask, &sample.gray, pipeline, sample.spec.view)?;
    let mut g = label_graph_from_truth(&g, sample)?;
    extract_features(&mut g, &sample.mask, &sample.gray, features)?;
    g.provenance.source = Some(format!("synthetic seed {}", sample.seed));
    Ok(g)
}

/// Deterministic sample for a seed and view. Trees whose geometry is
/// degenerate, or whose graph loses a branch, are redrawn.
pub fn generate(cfg: &SynthConfig, view: ViewTag, seed: u64) -> Result<SynthSample> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pipeline = PipelineConfig::default();
    // drawn once so that retries do not favour either kind of tree
    let overlap = rng.random::<f64>() < cfg.overlap_fraction;
    for _ in 0..cfg.max_retries {
        let Some(spec) = sample_spec(cfg, view, overlap, &mut rng) else { continue };
        let sample = render(&spec, cfg, seed, &mut rng)?;
        let Ok(g) = build_individual_graph(&sample.mask, &sample.gray, &pipeline, view) else { continue };
        let Ok(g) = label_graph_from_truth(&g, &sample) else { continue };
        let present: BTreeSet<BaseClass> = g.nodes.iter().filter_map(|n| n.label.map(|l| l.base)).collect();
        let wanted: BTreeSet<BaseClass> = spec.branches.iter().map(|b| b.label).collect();
        if present == wanted {
            return Ok(sample);
        }
    }
    Err(Error::InvalidInput(format!("no valid tree after {} attempts (seed {seed})", cfg.max_retries)))
}

/// Views for a benchmark of `count` samples: `round(lao_fraction * count)`
/// LAO-style positions chosen at random, the rest RAO-style.
pub fn benchmark_views<R: Rng + ?Sized>(count: usize, lao_fraction: f64, rng: &mut R) -> Vec<ViewTag> {
    let n_lao = (lao_fraction * count as f64).round() as usize;
    let mut views = vec![ViewTag::Rao; count];
    for i in rand::seq::index::sample(rng, count, n_lao.min(count)) {
        views[i] = ViewTag::Lao;
    }
    views
}

/// One benchmark entry: the drawn sample and its labeled graph.
#[derive(Debug, Clone)]
pub struct BenchmarkItem {
    pub sample: SynthSample,
    pub graph: IndividualGraph,
    /// Extracted topology equals the intended one.
    pub faithful: bool,
}

/// Samples with per-item seeds drawn from `rng`, generated in parallel.
pub fn make_benchmark_items<R: Rng + ?Sized>(
    count: usize,
    cfg: &SynthConfig,
    features: &FeatureSpec,
    rng: &mut R,
) -> Result<Vec<BenchmarkItem>> {
    if count < 20 {
        return Err(Error::InvalidInput(format!("a benchmark needs at least 20 samples, got {count}")));
    }
    cfg.validate()?;
    let views = benchmark_views(count, cfg.lao_fraction, rng);
    let seeds: Vec<u64> = (0..count).map(|_| rng.random()).collect();
    let pipeline = PipelineConfig::default();
    let items: Vec<Result<BenchmarkItem>> = seeds
        .par_iter()
        .zip(views.par_iter())
        .map(|(&seed, &view)| {
            let sample = generate(cfg, view, seed)?;
            let graph = sample_graph(&sample, &pipeline, features)?;
            let faithful = topology_matches(&graph, &sample.spec);
            if !faithful {
                log::warn!("seed {seed}: extracted topology differs from the drawn tree");
            }
            Ok(BenchmarkItem { sample, graph, faithful })
        })
        .collect();
    items.into_iter().collect()
}

/// Labeled dataset of `count` synthetic trees with default ranges.
pub fn make_benchmark<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Dataset> {
    let items = make_benchmark_items(count, &SynthConfig::default(), &FeatureSpec::default(), rng)?;
    Dataset::new(items.into_iter().map(|i| i.graph).collect())
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    pub view: ViewTag,
    /// Paths relative to the benchmark directory.
    pub gray: PathBuf,
    pub mask: PathBuf,
    pub truth: PathBuf,
    pub graph: PathBuf,
    pub faithful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub config: SynthConfig,
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.as_ref().join("manifest.json"))?)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!("unsupported manifest version {}", m.schema_version)));
        }
        Ok(m)
    }
}

#[derive(Serialize)]
struct TruthFile<'a> {
    seed: u64,
    spec: &'a TreeSpec,
}

/// Writes images, ground truth and graphs under `dir/samples/` plus
/// `dir/manifest.json`.
pub fn write_benchmark(dir: impl AsRef<Path>, items: &[BenchmarkItem], seed: u64, cfg: &SynthConfig) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("samples"))?;
    let mut samples = Vec::with_capacity(items.len());
    for (i, it) in items.iter().enumerate() {
        let stem = format!("samples/{i:04}");
        let e = ManifestEntry {
            index: i,
            seed: it.sample.seed,
            view: it.sample.spec.view,
            gray: PathBuf::from(format!("{stem}_gray.pgm")),
            mask: PathBuf::from(format!("{stem}_mask.pgm")),
            truth: PathBuf::from(format!("{stem}_truth.json")),
            graph: PathBuf::from(format!("{stem}_graph.json")),
            faithful: it.faithful,
        };
        it.sample.gray.write_pgm(dir.join(&e.gray))?;
        it.sample.mask.write_pgm(dir.join(&e.mask))?;
        let truth = TruthFile { seed: it.sample.seed, spec: &it.sample.spec };
        std::fs::write(dir.join(&e.truth), serde_json::to_string_pretty(&truth)?)?;
        it.graph.save(dir.join(&e.graph))?;
        samples.push(e);
    }
    let m = Manifest { schema_version: MANIFEST_SCHEMA_VERSION, seed, config: cfg.clone(), samples };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(m)
}

/// Graphs of a benchmark directory in manifest order.
pub fn load_benchmark(dir: impl AsRef<Path>) -> Result<Vec<IndividualGraph>> {
    let dir = dir.as_ref();
    let m = Manifest::load(dir)?;
    m.samples.iter().map(|e| IndividualGraph::load(dir.join(&e.graph))).collect()
}
