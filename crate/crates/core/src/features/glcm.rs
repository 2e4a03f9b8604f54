//! Gray-level co-occurrence texture statistics.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::skeleton::Pixel;

/// `v * log2(v)`, taken as 0 at 0.
fn xlog2(v: f64) -> f64 {
    if v > 0.0 {
        v * v.log2()
    } else {
        0.0
    }
}

pub const NAMES: [&str; 24] = [
    "autocorrelation",
    "joint_average",
    "cluster_prominence",
    "cluster_shade",
    "cluster_tendency",
    "contrast",
    "correlation",
    "difference_average",
    "difference_entropy",
    "difference_variance",
    "joint_energy",
    "joint_entropy",
    "imc1",
    "imc2",
    "idm",
    "mcc",
    "idmn",
    "id",
    "idn",
    "inverse_variance",
    "maximum_probability",
    "sum_average",
    "sum_entropy",
    "sum_squares",
];

/// Quantizes to levels `1..=levels` over the region's own min-max range.
pub fn quantize(values: &[f64], levels: usize) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|&v| super::first_order::bin(v, min, max, levels) + 1).collect()
}

/// Symmetric co-occurrence counts (row-major `levels x levels`, zero-based
/// level indices) for one offset, only pairs with both pixels in the region.
pub fn cooccurrence(pixels: &[Pixel], levels_of: &[usize], levels: usize, offset: (i64, i64)) -> Vec<f64> {
    let lookup: HashMap<Pixel, usize> = pixels.iter().copied().zip(levels_of.iter().copied()).collect();
    let mut m = vec![0.0; levels * levels];
    for (p, &a) in pixels.iter().zip(levels_of) {
        let (x, y) = (p.x as i64 + offset.0, p.y as i64 + offset.1);
        if x < 0 || y < 0 {
            continue;
        }
        if let Some(&b) = lookup.get(&Pixel::new(x as usize, y as usize)) {
            m[(a - 1) * levels + (b - 1)] += 1.0;
            m[(b - 1) * levels + (a - 1)] += 1.0;
        }
    }
    m
}

/// Statistics of one normalized matrix `p` (sums to 1), in [`NAMES`] order.
pub fn matrix_features(p: &[f64], ng: usize) -> [f64; 24] {
    let at = |i: usize, j: usize| p[i * ng + j];
    let lvl = |i: usize| (i + 1) as f64;
    let mut px = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            px[i] += at(i, j);
        }
    }
    // symmetric matrix: the column marginal equals the row marginal
    let py = px.clone();
    let mux: f64 = (0..ng).map(|i| lvl(i) * px[i]).sum();
    let muy = mux;
    let sigx = (0..ng).map(|i| (lvl(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sigy = sigx;

    let mut psum = vec![0.0; 2 * ng + 1];
    let mut pdiff = vec![0.0; ng];
    let (mut auto, mut prom, mut shade, mut tend, mut contrast) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut energy, mut hxy, mut hxy1, mut hxy2) = (0.0, 0.0, 0.0, 0.0);
    let (mut idm, mut idmn, mut id, mut idn, mut maxp, mut sumsq) = (0.0, 0.0, 0.0, 0.0, 0.0f64, 0.0);
    let ngf = ng as f64;
    for i in 0..ng {
        for j in 0..ng {
            let v = at(i, j);
            let (a, b) = (lvl(i), lvl(j));
            let s = a + b - mux - muy;
            let d = (a - b).abs();
            auto += v * a * b;
            prom += s.powi(4) * v;
            shade += s.powi(3) * v;
            tend += s.powi(2) * v;
            contrast += d * d * v;
            energy += v * v;
            hxy -= xlog2(v);
            let pp = px[i] * py[j];
            if v > 0.0 {
                hxy1 -= v * pp.log2();
            }
            hxy2 -= xlog2(pp);
            idm += v / (1.0 + d * d);
            idmn += v / (1.0 + d * d / (ngf * ngf));
            id += v / (1.0 + d);
            idn += v / (1.0 + d / ngf);
            maxp = maxp.max(v);
            sumsq += (a - mux).powi(2) * v;
            psum[i + j + 2] += v;
            pdiff[i.abs_diff(j)] += v;
        }
    }
    let correlation = if sigx * sigy > 0.0 { (auto - mux * muy) / (sigx * sigy) } else { 1.0 };
    let diff_avg: f64 = (0..ng).map(|k| k as f64 * pdiff[k]).sum();
    let diff_ent: f64 = -(0..ng).map(|k| xlog2(pdiff[k])).sum::<f64>();
    let diff_var: f64 = (0..ng).map(|k| (k as f64 - diff_avg).powi(2) * pdiff[k]).sum();
    let inv_var: f64 = (1..ng).map(|k| pdiff[k] / (k * k) as f64).sum();
    let sum_avg: f64 = (2..=2 * ng).map(|k| k as f64 * psum[k]).sum();
    let sum_ent: f64 = -(2..=2 * ng).map(|k| xlog2(psum[k])).sum::<f64>();
    let hx: f64 = -px.iter().map(|&v| xlog2(v)).sum::<f64>();
    let hy = hx;
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 };
    let imc2 = if hxy > hxy2 { 0.0 } else { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt() };

    [
        auto,
        mux,
        prom,
        shade,
        tend,
        contrast,
        correlation,
        diff_avg,
        diff_ent,
        diff_var,
        energy,
        hxy,
        imc1,
        imc2,
        idm,
        mcc(p, &px, ng),
        idmn,
        id,
        idn,
        inv_var,
        maxp,
        sum_avg,
        sum_ent,
        sumsq,
    ]
}

/// Maximal correlation coefficient of a symmetric matrix: the second largest
/// eigenvalue magnitude of `D^-1/2 P D^-1/2` over occupied levels. Equals 1
/// for a single occupied level.
fn mcc(p: &[f64], px: &[f64], ng: usize) -> f64 {
    let occ: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    if occ.len() < 2 {
        return 1.0;
    }
    let k = occ.len();
    let s = DMatrix::from_fn(k, k, |a, b| {
        let (i, j) = (occ[a], occ[b]);
        p[i * ng + j] / (px[i] * px[j]).sqrt()
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().map(|e| e * e).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1].max(0.0).sqrt().min(1.0)
}

/// Texture features of a region averaged over the offsets that produce at
/// least one pair; all zeros when none does.
pub fn glcm_features(pixels: &[Pixel], values: &[f64], levels: usize, offsets: &[(i64, i64)]) -> [f64; 24] {
    let q = quantize(values, levels);
    let mut acc = [0.0; 24];
    let mut used = 0;
    for &off in offsets {
        let mut m = cooccurrence(pixels, &q, levels, off);
        let total: f64 = m.iter().sum();
        if total == 0.0 {
            continue;
        }
        m.iter_mut().for_each(|v| *v /= total);
        let f = matrix_features(&m, levels);
        for (a, b) in acc.iter_mut().zip(f) {
            *a += b;
        }
        used += 1;
    }
    if used > 0 {
        acc.iter_mut().for_each(|v| *v /= used as f64);
    }
    acc
}
