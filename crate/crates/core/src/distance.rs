//! Exact Euclidean distance transform with nearest-site tracking.
//!
//! Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher): a
//! vertical scan gives, per column, the nearest site row; a horizontal pass
//! then takes the lower envelope of the parabolas `(x - q)^2 + g(q)^2`.
//! Distances are integers squared, so results are exact.

/// Result of a nearest-site query for one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NearestSite {
    pub sq_dist: u64,
    pub x: usize,
    pub y: usize,
}

/// For every pixel of a `width x height` grid, the nearest pixel for which
/// `is_site` holds. `None` everywhere when the grid holds no site.
pub fn nearest_sites(
    width: usize,
    height: usize,
    is_site: impl Fn(usize, usize) -> bool,
) -> Vec<Option<NearestSite>> {
    const NONE: i64 = -1;
    // column pass: nearest site row per (x, y)
    let mut col_row = vec![NONE; width * height];
    for x in 0..width {
        let mut last = NONE;
        for y in 0..height {
            if is_site(x, y) {
                last = y as i64;
            }
            col_row[y * width + x] = last;
        }
        let mut next = NONE;
        for y in (0..height).rev() {
            if is_site(x, y) {
                next = y as i64;
            }
            let cur = col_row[y * width + x];
            let yi = y as i64;
            if next != NONE && (cur == NONE || next - yi < yi - cur) {
                col_row[y * width + x] = next;
            }
        }
    }

    let mut out = vec![None; width * height];
    let mut env: Vec<usize> = Vec::with_capacity(width);
    let mut bounds: Vec<f64> = Vec::with_capacity(width + 1);
    let mut f = vec![0i64; width];
    for y in 0..height {
        env.clear();
        bounds.clear();
        for q in 0..width {
            let r = col_row[y * width + q];
            if r == NONE {
                continue;
            }
            let dy = r - y as i64;
            f[q] = dy * dy;
            loop {
                match env.last() {
                    None => {
                        env.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        bounds.push(f64::INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let (qi, pi) = (q as i64, p as i64);
                        let s = ((f[q] + qi * qi) - (f[p] + pi * pi)) as f64 / (2 * (qi - pi)) as f64;
                        let k = env.len() - 1;
                        if s <= bounds[k] {
                            env.pop();
                            bounds.pop();
                            if env.is_empty() {
                                bounds.clear();
                            } else {
                                *bounds.last_mut().unwrap() = f64::INFINITY;
                            }
                            continue;
                        }
                        *bounds.last_mut().unwrap() = s;
                        env.push(q);
                        bounds.push(f64::INFINITY);
                        break;
                    }
                }
            }
        }
        if env.is_empty() {
            continue;
        }
        let mut k = 0;
        for x in 0..width {
            while bounds[k + 1] < x as f64 {
                k += 1;
            }
            let q = env[k];
            let dx = x as i64 - q as i64;
            out[y * width + x] = Some(NearestSite {
                sq_dist: (dx * dx + f[q]) as u64,
                x: q,
                y: col_row[y * width + q] as usize,
            });
        }
    }
    out
}

/// Distance from every foreground pixel to the nearest background pixel
/// centre; pixels outside the grid count as background. Background pixels
/// get 0.
pub fn distance_to_background(width: usize, height: usize, fg: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let (pw, ph) = (width + 2, height + 2);
    let sites = nearest_sites(pw, ph, |x, y| {
        x == 0 || y == 0 || x == pw - 1 || y == ph - 1 || !fg(x - 1, y - 1)
    });
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let s = sites[(y + 1) * pw + x + 1].expect("padded grid always has sites");
            out.push((s.sq_dist as f64).sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(width: usize, height: usize, sites: &[(usize, usize)], x: usize, y: usize) -> Option<u64> {
        sites
            .iter()
            .map(|&(sx, sy)| {
                let dx = sx as i64 - x as i64;
                let dy = sy as i64 - y as i64;
                (dx * dx + dy * dy) as u64
            })
            .min()
            .filter(|_| width > 0 && height > 0)
    }

    #[test]
    fn isolated_pixel_has_radius_one() {
        let d = distance_to_background(3, 3, |x, y| x == 1 && y == 1);
        assert_eq!(d[4], 1.0);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn diagonal_background_only() {
        // centre pixel whose orthogonal neighbours are foreground but a diagonal is not
        let d = distance_to_background(5, 5, |x, y| {
            (1..4).contains(&x) && (1..4).contains(&y) && !(x == 1 && y == 1)
        });
        assert!((d[2 * 5 + 2] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bar_center_row() {
        // 5-row bar inside a 9-row image: centre row is 3 away from background
        let d = distance_to_background(20, 9, |x, y| (2..18).contains(&x) && (2..7).contains(&y));
        for x in 6..14 {
            assert_eq!(d[4 * 20 + x], 3.0);
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let density: f64 = rng.random_range(0.0..0.5);
            let grid: Vec<bool> = (0..w * h).map(|_| rng.random::<f64>() < density).collect();
            let sites: Vec<(usize, usize)> = (0..w * h).filter(|&i| grid[i]).map(|i| (i % w, i / w)).collect();
            let got = nearest_sites(w, h, |x, y| grid[y * w + x]);
            for y in 0..h {
                for x in 0..w {
                    let expect = brute(w, h, &sites, x, y);
                    let g = got[y * w + x];
                    prop_assert_eq!(g.map(|s| s.sq_dist), expect);
                    if let Some(s) = g {
                        prop_assert!(grid[s.y * w + s.x]);
                        let dx = s.x as i64 - x as i64;
                        let dy = s.y as i64 - y as i64;
                        prop_assert_eq!((dx * dx + dy * dy) as u64, s.sq_dist);
                    }
                }
            }
        }
    }
}
