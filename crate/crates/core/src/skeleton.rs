//! Centerline extraction from binary vessel masks.
//!
//! The mask is thinned to a one-pixel-wide, 8-connected skeleton, every
//! skeleton pixel gets the Euclidean distance to the nearest background
//! pixel as its radius, and the skeleton is cut at key points (endpoints and
//! bifurcations) into centerline segments.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distance::distance_to_background;
use crate::error::{Error, Result};
use crate::image::BinaryMask;

/// Integer pixel coordinate. Ordering is row-major: `y` first, then `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Pixel) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(self, other: Pixel) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx * dx + dy * dy
    }

    pub fn is_adjacent(self, other: Pixel) -> bool {
        self != other && self.x.abs_diff(other.x) <= 1 && self.y.abs_diff(other.y) <= 1
    }
}

impl Ord for Pixel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Pixel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl From<[usize; 2]> for Pixel {
    fn from(v: [usize; 2]) -> Self {
        Pixel::new(v[0], v[1])
    }
}

impl From<Pixel> for [usize; 2] {
    fn from(p: Pixel) -> Self {
        [p.x, p.y]
    }
}

/// Neighbour offsets in ring order: N, NE, E, SE, S, SW, W, NW (y grows downwards).
const RING: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// One-pixel-wide centerline with a radius per point.
#[derive(Debug, Clone)]
pub struct Skeleton {
    width: usize,
    height: usize,
    points: Vec<Pixel>,
    radius: Vec<f64>,
    index: Vec<u32>,
}

const NO_POINT: u32 = u32::MAX;

impl Skeleton {
    /// Builds a skeleton from raw points; radii start at zero until
    /// [`compute_radii`] fills them.
    pub fn from_points(width: usize, height: usize, points: impl IntoIterator<Item = Pixel>) -> Self {
        let mut points: Vec<Pixel> = points.into_iter().filter(|p| p.x < width && p.y < height).collect();
        points.sort();
        points.dedup();
        let mut index = vec![NO_POINT; width * height];
        for (i, p) in points.iter().enumerate() {
            index[p.y * width + p.x] = i as u32;
        }
        let radius = vec![0.0; points.len()];
        Self { width, height, points, radius, index }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[Pixel] {
        &self.points
    }

    pub fn radii(&self) -> &[f64] {
        &self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: i64, y: i64) -> Option<usize> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        match self.index[y as usize * self.width + x as usize] {
            NO_POINT => None,
            i => Some(i as usize),
        }
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.index_of(p.x as i64, p.y as i64).is_some()
    }

    pub fn radius_at(&self, p: Pixel) -> Option<f64> {
        self.index_of(p.x as i64, p.y as i64).map(|i| self.radius[i])
    }

    /// 8-connected skeleton neighbours of `p`.
    pub fn neighbors(&self, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
        RING.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
            self.index_of(x, y).map(|i| self.points[i])
        })
    }

    pub fn neighbor_count(&self, p: Pixel) -> usize {
        self.neighbors(p).count()
    }

    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::new(self.width, self.height);
        for p in &self.points {
            m.set(p.x, p.y, true);
        }
        m
    }

    /// Number of 8-connected components.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.points.len()];
        let mut count = 0;
        for start in 0..self.points.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for n in self.neighbors(self.points[i]) {
                    let j = self.index_of(n.x as i64, n.y as i64).unwrap();
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    /// Debug dump: one `x y radius` line per point.
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        for (p, r) in self.points.iter().zip(&self.radius) {
            writeln!(w, "{} {} {:.6}", p.x, p.y, r)?;
        }
        Ok(())
    }
}

/// Working raster used by the thinning passes.
struct Raster {
    width: usize,
    height: usize,
    px: Vec<bool>,
}

impl Raster {
    #[inline]
    fn get(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.px[y as usize * self.width + x as usize]
    }

    #[inline]
    fn ring(&self, x: usize, y: usize) -> [bool; 8] {
        let mut r = [false; 8];
        for (k, &(dx, dy)) in RING.iter().enumerate() {
            r[k] = self.get(x as i64 + dx, y as i64 + dy);
        }
        r
    }

    /// One Zhang-Suen sub-iteration; returns whether anything was deleted.
    fn zhang_suen_pass(&mut self, second: bool) -> bool {
        let mut doomed = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.px[y * self.width + x] {
                    continue;
                }
                let r = self.ring(x, y);
                let b = r.iter().filter(|&&v| v).count();
                if !(2..=6).contains(&b) {
                    continue;
                }
                let a = (0..8).filter(|&k| !r[k] && r[(k + 1) % 8]).count();
                if a != 1 {
                    continue;
                }
                let (n, e, s, w) = (r[0], r[2], r[4], r[6]);
                let ok = if second {
                    !(n && e && w) && !(n && s && w)
                } else {
                    !(n && e && s) && !(e && s && w)
                };
                if ok {
                    doomed.push(y * self.width + x);
                }
            }
        }
        for &i in &doomed {
            self.px[i] = false;
        }
        !doomed.is_empty()
    }

    /// Removes redundant corner pixels of 4-connected staircases so that
    /// every non-junction pixel has at most two neighbours. Sequential scan.
    fn remove_staircases(&mut self) -> bool {
        let mut changed = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.px[y * self.width + x] {
                    continue;
                }
                let r = self.ring(x, y);
                if r.iter().filter(|&&v| v).count() < 2 {
                    continue;
                }
                // orthogonal pair (k, k+2) with the diagonal between them empty
                let corner = [0usize, 2, 4, 6].iter().any(|&k| r[k] && r[(k + 2) % 8] && !r[k + 1]);
                if corner && is_simple(&r) {
                    self.px[y * self.width + x] = false;
                    changed = true;
                }
            }
        }
        changed
    }
}

/// A pixel is 8-simple when its foreground neighbours form one 8-component
/// and exactly one 4-component of background touches it orthogonally.
fn is_simple(r: &[bool; 8]) -> bool {
    let mut parent = [0usize, 1, 2, 3, 4, 5, 6, 7];
    fn find(p: &mut [usize; 8], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..8 {
        for j in (i + 1)..8 {
            if !(r[i] && r[j]) {
                continue;
            }
            let (a, b) = (RING[i], RING[j]);
            if (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut fg_roots: Vec<usize> = (0..8).filter(|&i| r[i]).map(|i| find(&mut parent, i)).collect();
    fg_roots.sort_unstable();
    fg_roots.dedup();
    if fg_roots.len() != 1 {
        return false;
    }
    // background components along the ring, consecutive ring cells are 4-adjacent
    let mut bg_parent = [0usize, 1, 2, 3, 4, 5, 6, 7];
    for i in 0..8 {
        let j = (i + 1) % 8;
        if !r[i] && !r[j] {
            let (ri, rj) = (find(&mut bg_parent, i), find(&mut bg_parent, j));
            bg_parent[ri] = rj;
        }
    }
    let mut bg_roots: Vec<usize> = [0usize, 2, 4, 6].iter().filter(|&&i| !r[i]).map(|&i| find(&mut bg_parent, i)).collect();
    bg_roots.sort_unstable();
    bg_roots.dedup();
    bg_roots.len() == 1
}

/// Connectivity-preserving thinning: Zhang-Suen two-subcycle iterations
/// alternated with staircase removal until neither changes the raster.
pub fn skeletonize(mask: &BinaryMask) -> Skeleton {
    let mut r = Raster { width: mask.width(), height: mask.height(), px: mask.data().to_vec() };
    loop {
        let mut changed = false;
        loop {
            let a = r.zhang_suen_pass(false);
            let b = r.zhang_suen_pass(true);
            if !(a || b) {
                break;
            }
            changed = true;
        }
        changed |= r.remove_staircases();
        if !changed {
            break;
        }
    }
    let (w, h) = (r.width, r.height);
    let pts = (0..w * h).filter(|&i| r.px[i]).map(|i| Pixel::new(i % w, i / w));
    Skeleton::from_points(w, h, pts)
}

/// Fills per-point radii: Euclidean distance to the nearest background
/// pixel centre (outside the image counts as background).
pub fn compute_radii(mask: &BinaryMask, skeleton: &Skeleton) -> Result<Skeleton> {
    if mask.width() != skeleton.width || mask.height() != skeleton.height {
        return Err(Error::Structure(format!(
            "mask is {}x{} but skeleton is {}x{}",
            mask.width(),
            mask.height(),
            skeleton.width,
            skeleton.height
        )));
    }
    if let Some(p) = skeleton.points.iter().find(|p| !mask.get(p.x as i64, p.y as i64)) {
        return Err(Error::Structure(format!("skeleton point ({}, {}) is background in the mask", p.x, p.y)));
    }
    let dist = distance_to_background(mask.width(), mask.height(), |x, y| mask.get(x as i64, y as i64));
    let mut out = skeleton.clone();
    for (i, p) in skeleton.points.iter().enumerate() {
        out.radius[i] = dist[p.y * mask.width() + p.x];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPointKind {
    Endpoint,
    Bifurcation,
}

/// An endpoint (single pixel) or a bifurcation. Adjacent pixels with three
/// or more neighbours form one bifurcation; `position` is its representative.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPoint {
    pub kind: KeyPointKind,
    pub position: Pixel,
    pub members: Vec<Pixel>,
}

#[derive(Debug, Clone, Default)]
pub struct KeyPointSet {
    points: Vec<KeyPoint>,
    owner: HashMap<Pixel, usize>,
}

impl KeyPointSet {
    pub fn from_points(mut points: Vec<KeyPoint>) -> Self {
        points.sort_by_key(|k| k.position);
        let mut owner = HashMap::new();
        for (i, k) in points.iter().enumerate() {
            for &m in &k.members {
                owner.insert(m, i);
            }
        }
        Self { points, owner }
    }

    pub fn all(&self) -> &[KeyPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &KeyPoint {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bifurcations(&self) -> impl Iterator<Item = &KeyPoint> {
        self.points.iter().filter(|k| k.kind == KeyPointKind::Bifurcation)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &KeyPoint> {
        self.points.iter().filter(|k| k.kind == KeyPointKind::Endpoint)
    }

    /// Index of the key point owning skeleton pixel `p`, if any.
    pub fn owner_of(&self, p: Pixel) -> Option<usize> {
        self.owner.get(&p).copied()
    }
}

/// Endpoints have exactly one skeleton neighbour; pixels with three or more
/// neighbours are bifurcation pixels, clustered by 8-adjacency.
pub fn detect_keypoints(skeleton: &Skeleton) -> KeyPointSet {
    let mut points = Vec::new();
    let mut junction = vec![false; skeleton.len()];
    let counts: Vec<usize> = skeleton.points.iter().map(|&p| skeleton.neighbor_count(p)).collect();
    for (i, &p) in skeleton.points.iter().enumerate() {
        match counts[i] {
            1 => points.push(KeyPoint { kind: KeyPointKind::Endpoint, position: p, members: vec![p] }),
            c if c >= 3 => junction[i] = true,
            _ => {}
        }
    }
    let mut seen = vec![false; skeleton.len()];
    for start in 0..skeleton.len() {
        if !junction[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            members.push(i);
            for n in skeleton.neighbors(skeleton.points[i]) {
                let j = skeleton.index_of(n.x as i64, n.y as i64).unwrap();
                if junction[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        let cx = members.iter().map(|&i| skeleton.points[i].x as f64).sum::<f64>() / members.len() as f64;
        let cy = members.iter().map(|&i| skeleton.points[i].y as f64).sum::<f64>() / members.len() as f64;
        let rep = *members
            .iter()
            .min_by(|&&a, &&b| {
                let (pa, pb) = (skeleton.points[a], skeleton.points[b]);
                let da = (pa.x as f64 - cx).powi(2) + (pa.y as f64 - cy).powi(2);
                let db = (pb.x as f64 - cx).powi(2) + (pb.y as f64 - cy).powi(2);
                counts[b].cmp(&counts[a]).then(da.total_cmp(&db)).then(pa.cmp(&pb))
            })
            .unwrap();
        let mut member_px: Vec<Pixel> = members.iter().map(|&i| skeleton.points[i]).collect();
        member_px.sort();
        points.push(KeyPoint { kind: KeyPointKind::Bifurcation, position: skeleton.points[rep], members: member_px });
    }
    KeyPointSet::from_points(points)
}

/// A run of skeleton pixels between two key points. `pixels` excludes the
/// key points themselves and is ordered starting next to `terminals[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineSegment {
    pub pixels: Vec<Pixel>,
    pub radii: Vec<f64>,
    /// Indices into the [`KeyPointSet`]; `terminals[0] <= terminals[1]`.
    pub terminals: [usize; 2],
}

impl CenterlineSegment {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_self_loop(&self) -> bool {
        self.terminals[0] == self.terminals[1]
    }
}

/// Output of [`split_segments`]: proper segments plus closed loops that touch
/// no key point at all.
#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub segments: Vec<CenterlineSegment>,
    pub unattached: Vec<Vec<Pixel>>,
}

/// Removes every key-point pixel and turns each remaining connected run into
/// a segment attached to the key points at its two ends. A run whose both
/// ends touch the same key point becomes a self-loop segment; closed rings
/// with no key point are returned separately.
pub fn split_segments(skeleton: &Skeleton, keypoints: &KeyPointSet) -> Segmentation {
    let n = skeleton.len();
    let is_key: Vec<bool> = skeleton.points.iter().map(|&p| keypoints.owner_of(p).is_some()).collect();
    let idx = |p: Pixel| skeleton.index_of(p.x as i64, p.y as i64).unwrap();
    let mut comp = vec![usize::MAX; n];
    let mut out = Segmentation::default();

    for start in 0..n {
        if is_key[start] || comp[start] != usize::MAX {
            continue;
        }
        let cid = start;
        comp[start] = cid;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for nb in skeleton.neighbors(skeleton.points[i]) {
                let j = idx(nb);
                if !is_key[j] && comp[j] == usize::MAX {
                    comp[j] = cid;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        let inner = |i: usize| skeleton.neighbors(skeleton.points[i]).filter(|&q| comp[idx(q)] == cid).count();
        let mut ends: Vec<usize> = members.iter().copied().filter(|&i| inner(i) < 2).collect();
        ends.sort_by_key(|&i| skeleton.points[i]);
        if ends.is_empty() {
            let mut ring: Vec<Pixel> = members.iter().map(|&i| skeleton.points[i]).collect();
            ring.sort();
            out.unattached.push(ring);
            continue;
        }
        let outside = |i: usize| -> Vec<usize> {
            let mut ks: Vec<usize> = skeleton
                .neighbors(skeleton.points[i])
                .filter_map(|q| keypoints.owner_of(q))
                .collect();
            ks.sort_unstable();
            ks.dedup();
            ks
        };
        let (first_end, last_end) = (ends[0], *ends.last().unwrap());
        let (ka, kb) = if first_end == last_end {
            let ks = outside(first_end);
            match ks.len() {
                0 => continue,
                1 => (ks[0], ks[0]),
                _ => (ks[0], ks[1]),
            }
        } else {
            let a = outside(first_end);
            let b = outside(last_end);
            match (a.first(), b.first()) {
                (Some(&a0), Some(&b0)) => (a0, b0),
                _ => continue,
            }
        };
        // walk starting next to the lower-indexed terminal
        let start_px = if first_end == last_end || ka <= kb { first_end } else { last_end };
        let mut order = Vec::with_capacity(members.len());
        let mut visited = HashMap::new();
        let mut cur = start_px;
        loop {
            order.push(cur);
            visited.insert(cur, ());
            let next = skeleton
                .neighbors(skeleton.points[cur])
                .map(idx)
                .filter(|&j| comp[j] == cid && !visited.contains_key(&j))
                .min_by_key(|&j| skeleton.points[j]);
            match next {
                Some(j) => cur = j,
                None => break,
            }
        }
        let terminals = [ka.min(kb), ka.max(kb)];
        out.segments.push(CenterlineSegment {
            pixels: order.iter().map(|&i| skeleton.points[i]).collect(),
            radii: order.iter().map(|&i| skeleton.radius[i]).collect(),
            terminals,
        });
    }

    // key points touching each other directly give empty segments
    for (ei, kp) in keypoints.all().iter().enumerate() {
        if kp.kind != KeyPointKind::Endpoint {
            continue;
        }
        for nb in skeleton.neighbors(kp.position) {
            if let Some(k) = keypoints.owner_of(nb) {
                let other_is_endpoint = keypoints.get(k).kind == KeyPointKind::Endpoint;
                if k != ei && (!other_is_endpoint || ei < k) {
                    out.segments.push(CenterlineSegment {
                        pixels: vec![],
                        radii: vec![],
                        terminals: [ei.min(k), ei.max(k)],
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skel_of(rows: &[&str]) -> Skeleton {
        let m = BinaryMask::from_ascii(rows);
        Skeleton::from_points(m.width(), m.height(), (0..m.width() * m.height()).filter(|&i| m.data()[i]).map(|i| Pixel::new(i % m.width(), i / m.width())))
    }

    #[test]
    fn thin_line_is_unchanged() {
        let m = BinaryMask::from_fn(14, 5, |x, y| y == 2 && (2..12).contains(&x));
        let s = skeletonize(&m);
        assert_eq!(s.len(), 10);
        assert!(s.points().iter().all(|p| p.y == 2));
    }

    #[test]
    fn empty_mask_gives_empty_skeleton() {
        assert!(skeletonize(&BinaryMask::new(8, 8)).is_empty());
    }

    #[test]
    fn staircase_corners_removed() {
        let s = skeletonize(&BinaryMask::from_ascii(&[
            "..........",
            ".##.......",
            "..##......",
            "...##.....",
            "....##....",
            "..........",
        ]));
        let kp = detect_keypoints(&s);
        assert_eq!(kp.bifurcations().count(), 0);
        assert_eq!(kp.endpoints().count(), 2);
    }

    #[test]
    fn keypoints_line_y_plus() {
        let line = skel_of(&["#####"]);
        let k = detect_keypoints(&line);
        assert_eq!((k.endpoints().count(), k.bifurcations().count()), (2, 0));

        let y = skel_of(&[
            "#.....#",
            ".#...#.",
            "..#.#..",
            "...#...",
            "...#...",
            "...#...",
        ]);
        let k = detect_keypoints(&y);
        assert_eq!((k.endpoints().count(), k.bifurcations().count()), (3, 1));

        let plus = skel_of(&["...#...", "...#...", "...#...", "#######", "...#...", "...#...", "...#..."]);
        let k = detect_keypoints(&plus);
        assert_eq!((k.endpoints().count(), k.bifurcations().count()), (4, 1));
        assert_eq!(k.bifurcations().next().unwrap().position, Pixel::new(3, 3));
    }

    #[test]
    fn split_line_and_y() {
        let line = skel_of(&["......", ".####.", "......"]);
        let k = detect_keypoints(&line);
        let seg = split_segments(&line, &k).segments;
        assert_eq!(seg.len(), 1);
        assert_eq!(seg[0].pixels, vec![Pixel::new(2, 1), Pixel::new(3, 1)]);
        assert!(seg[0].terminals.iter().all(|&t| k.get(t).kind == KeyPointKind::Endpoint));

        let y = skel_of(&[
            "#.....#",
            ".#...#.",
            "..#.#..",
            "...#...",
            "...#...",
            "...#...",
        ]);
        let k = detect_keypoints(&y);
        let seg = split_segments(&y, &k).segments;
        assert_eq!(seg.len(), 3);
        for s in &seg {
            let kinds: Vec<_> = s.terminals.iter().map(|&t| k.get(t).kind).collect();
            assert!(kinds.contains(&KeyPointKind::Bifurcation) && kinds.contains(&KeyPointKind::Endpoint));
        }
    }

    #[test]
    fn split_h_shape() {
        // two bifurcations joined by a bridge: 4 legs + 1 bridge
        let h = skel_of(&[
            "#.......#",
            "#.......#",
            "#.......#",
            "#########",
            "#.......#",
            "#.......#",
            "#.......#",
        ]);
        let k = detect_keypoints(&h);
        assert_eq!(k.bifurcations().count(), 2);
        let seg = split_segments(&h, &k).segments;
        assert_eq!(seg.len(), 5);
        let bridges: Vec<_> = seg
            .iter()
            .filter(|s| s.terminals.iter().all(|&t| k.get(t).kind == KeyPointKind::Bifurcation))
            .collect();
        assert_eq!(bridges.len(), 1);
        // corner pixels next to each junction also have three neighbours
        assert_eq!(bridges[0].len(), 5);
    }

    #[test]
    fn pure_ring_is_unattached() {
        let ring = skel_of(&[".##.", "#..#", "#..#", ".##."]);
        let k = detect_keypoints(&ring);
        assert!(k.is_empty());
        let s = split_segments(&ring, &k);
        assert!(s.segments.is_empty());
        assert_eq!(s.unattached.len(), 1);
    }

    #[test]
    fn radii_need_foreground_points() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]);
        let s = Skeleton::from_points(3, 3, [Pixel::new(1, 1)]);
        let r = compute_radii(&m, &s).unwrap();
        assert_eq!(r.radii(), &[1.0]);
        let bad = Skeleton::from_points(3, 3, [Pixel::new(0, 0)]);
        assert!(matches!(compute_radii(&m, &bad), Err(Error::Structure(_))));
    }

    #[test]
    fn table_dump() {
        let m = BinaryMask::from_ascii(&["...", ".#.", "..."]);
        let s = compute_radii(&m, &skeletonize(&m)).unwrap();
        let mut buf = Vec::new();
        s.write_table(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 1 1.000000\n");
    }

    #[test]
    fn simple_point_rules() {
        // staircase corner: W, S, SE set
        let mut r = [false; 8];
        r[6] = true;
        r[4] = true;
        r[3] = true;
        assert!(is_simple(&r));
        // plus centre: all four orthogonal neighbours
        let plus = [true, false, true, false, true, false, true, false];
        assert!(!is_simple(&plus));
        // bridge pixel between two separate pieces
        let bridge = [true, false, false, false, true, false, false, false];
        assert!(!is_simple(&bridge));
    }
}
