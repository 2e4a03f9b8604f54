//! Positional features of a segment relative to its tree.

use crate::skeleton::Pixel;

/// Geometry needed for the positional block.
pub struct SegmentGeometry<'a> {
    pub pixels: &'a [Pixel],
    pub radii: &'a [f64],
    /// Terminal key points with their radii, in stored order.
    pub terminals: [(Pixel, f64); 2],
}

impl SegmentGeometry<'_> {
    /// Plain and radius-weighted centroids. A segment with no interior
    /// pixels uses its terminals.
    pub fn centroids(&self) -> ((f64, f64), (f64, f64)) {
        let pts: Vec<(f64, f64, f64)> = if self.pixels.is_empty() {
            self.terminals.iter().map(|(p, r)| (p.x as f64, p.y as f64, *r)).collect()
        } else {
            self.pixels.iter().zip(self.radii).map(|(p, r)| (p.x as f64, p.y as f64, *r)).collect()
        };
        let n = pts.len() as f64;
        let plain = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let wsum: f64 = pts.iter().map(|p| p.2).sum();
        let weighted = if wsum > 0.0 {
            (pts.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum, pts.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum)
        } else {
            plain
        };
        (plain, weighted)
    }
}

/// Twenty values:
/// `[wcx, wcy, cx, cy]` centroid offsets from the tree centre, then for each
/// terminal `[wx, wy, x, y]` relative to the tree centre, then the same for
/// each terminal relative to the segment centroid. Offsets are divided by
/// the image width (x) and height (y); weighted terminal offsets are also
/// scaled by the terminal radius over the largest radius in the tree.
pub fn position_features(
    seg: &SegmentGeometry<'_>,
    tree_center: (f64, f64),
    max_tree_radius: f64,
    width: usize,
    height: usize,
) -> [f64; 20] {
    let (w, h) = (width as f64, height as f64);
    let ((cx, cy), (wcx, wcy)) = seg.centroids();
    let mut out = [0.0; 20];
    out[0] = (wcx - tree_center.0) / w;
    out[1] = (wcy - tree_center.1) / h;
    out[2] = (cx - tree_center.0) / w;
    out[3] = (cy - tree_center.1) / h;
    let scale = |r: f64| if max_tree_radius > 0.0 { r / max_tree_radius } else { 0.0 };
    for (k, (p, r)) in seg.terminals.iter().enumerate() {
        let (px, py) = (p.x as f64, p.y as f64);
        for (block, origin) in [(4, tree_center), (12, (cx, cy))] {
            let dx = (px - origin.0) / w;
            let dy = (py - origin.1) / h;
            let base = block + 4 * k;
            out[base] = dx * scale(*r);
            out[base + 1] = dy * scale(*r);
            out[base + 2] = dx;
            out[base + 3] = dy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_segment_centered() {
        let pixels: Vec<Pixel> = (40..61).map(|x| Pixel::new(x, 50)).collect();
        let radii = vec![2.0; pixels.len()];
        let seg = SegmentGeometry { pixels: &pixels, radii: &radii, terminals: [(Pixel::new(39, 50), 2.0), (Pixel::new(61, 50), 2.0)] };
        let f = position_features(&seg, (50.0, 50.0), 2.0, 100, 100);
        assert_eq!(&f[..4], &[0.0; 4]);
        assert_eq!(f[6], -0.11);
        assert_eq!(f[4], -0.11);
    }

    #[test]
    fn single_pixel_segment() {
        let p = Pixel::new(10, 20);
        let seg = SegmentGeometry { pixels: &[p], radii: &[1.0], terminals: [(p, 1.0), (p, 1.0)] };
        let f = position_features(&seg, (50.0, 50.0), 3.0, 100, 100);
        assert!(f[12..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_centroid_follows_radius() {
        let pixels: Vec<Pixel> = (0..10).map(|x| Pixel::new(x, 5)).collect();
        let radii: Vec<f64> = (1..=10).map(|r| r as f64).collect();
        let seg = SegmentGeometry { pixels: &pixels, radii: &radii, terminals: [(pixels[0], 1.0), (pixels[9], 10.0)] };
        let f = position_features(&seg, (0.0, 0.0), 10.0, 20, 10);
        // sum r*x / sum r = 330 / 55
        assert!((f[0] - 6.0 / 20.0).abs() < 1e-12);
        assert!((f[2] - 4.5 / 20.0).abs() < 1e-12);
    }
}
