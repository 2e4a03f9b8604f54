//! AVX-512 single-precision product for the shapes the network uses:
//! `B` and `C` with contiguous rows and a multiple of 16 columns. `A` may
//! have any strides since it is only read one scalar at a time.

#[cfg(target_arch = "x86_64")]
mod imp {
    use std::arch::x86_64::*;
    use std::cell::RefCell;

    pub fn available() -> bool {
        is_x86_feature_detected!("avx512f")
    }

    /// Largest transposed `B` copied into a row-major scratch buffer.
    const MAX_SCRATCH: usize = 1 << 16;

    thread_local! {
        static SCRATCH: RefCell<Vec<f32>> = const { RefCell::new(Vec::new()) };
    }

    /// Returns false when the layout is not handled.
    ///
    /// # Safety
    /// Same contract as `matrixmultiply::sgemm`.
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn try_sgemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) -> bool {
        if !n.is_multiple_of(16) || csc != 1 || !available() {
            return false;
        }
        if csb == 1 {
            unsafe { sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, beta, c, rsc) };
            return true;
        }
        if k * n > MAX_SCRATCH {
            return false;
        }
        SCRATCH.with(|s| {
            let mut s = s.borrow_mut();
            s.clear();
            for kk in 0..k {
                for j in 0..n {
                    s.push(unsafe { *b.offset(kk as isize * rsb + j as isize * csb) });
                }
            }
            unsafe { sgemm(m, k, n, alpha, a, rsa, csa, s.as_ptr(), n as isize, beta, c, rsc) };
        });
        true
    }

    #[target_feature(enable = "avx512f")]
    #[inline]
    #[allow(clippy::too_many_arguments)]
    unsafe fn block<const MR: usize, const NV: usize>(
        k: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
    ) {
        unsafe {
            let mut acc = [[_mm512_setzero_ps(); NV]; MR];
            let (mut ap, mut bp) = (a, b);
            for _ in 0..k {
                let mut bv = [_mm512_setzero_ps(); NV];
                for (v, slot) in bv.iter_mut().enumerate() {
                    *slot = _mm512_loadu_ps(bp.add(16 * v));
                }
                for (r, row) in acc.iter_mut().enumerate() {
                    let av = _mm512_set1_ps(*ap.offset(r as isize * rsa));
                    for (v, x) in row.iter_mut().enumerate() {
                        *x = _mm512_fmadd_ps(av, bv[v], *x);
                    }
                }
                ap = ap.offset(csa);
                bp = bp.offset(rsb);
            }
            let (al, be) = (_mm512_set1_ps(alpha), _mm512_set1_ps(beta));
            for (r, row) in acc.iter().enumerate() {
                for (v, x) in row.iter().enumerate() {
                    let p = c.offset(r as isize * rsc).add(16 * v);
                    let y = if beta == 0.0 {
                        _mm512_mul_ps(al, *x)
                    } else {
                        _mm512_fmadd_ps(be, _mm512_loadu_ps(p), _mm512_mul_ps(al, *x))
                    };
                    _mm512_storeu_ps(p, y);
                }
            }
        }
    }

    macro_rules! widths {
        ($mr:literal, $nv:expr, $($arg:expr),*) => {
            match $nv {
                1 => block::<$mr, 1>($($arg),*),
                2 => block::<$mr, 2>($($arg),*),
                3 => block::<$mr, 3>($($arg),*),
                _ => block::<$mr, 4>($($arg),*),
            }
        };
    }

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn sgemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
    ) {
        let mut j = 0;
        while j < n {
            let nv = ((n - j) / 16).min(4);
            let mut i = 0;
            while i < m {
                let mr = (m - i).min(6);
                unsafe {
                    let ap = a.offset(i as isize * rsa);
                    let bp = b.add(j);
                    let cp = c.offset(i as isize * rsc).add(j);
                    match mr {
                        1 => widths!(1, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                        2 => widths!(2, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                        3 => widths!(3, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                        4 => widths!(4, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                        5 => widths!(5, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                        _ => widths!(6, nv, k, alpha, ap, rsa, csa, bp, rsb, beta, cp, rsc),
                    }
                }
                i += mr;
            }
            j += nv * 16;
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod imp {
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn try_sgemm(
        _: usize,
        _: usize,
        _: usize,
        _: f32,
        _: *const f32,
        _: isize,
        _: isize,
        _: *const f32,
        _: isize,
        _: isize,
        _: f32,
        _: *mut f32,
        _: isize,
        _: isize,
    ) -> bool {
        false
    }
}

pub(crate) use imp::try_sgemm;

#[cfg(test)]
mod tests {
    use crate::nn::{gemm, Matrix};

    fn naive(a: &Matrix<f32>, b: &Matrix<f32>) -> Vec<f64> {
        let mut out = vec![0.0; a.rows() * b.cols()];
        for r in 0..a.rows() {
            for c in 0..b.cols() {
                out[r * b.cols() + c] = (0..a.cols()).map(|k| a.get(r, k) as f64 * b.get(k, c) as f64).sum();
            }
        }
        out
    }

    #[test]
    fn matches_reference_over_shapes() {
        for &(m, k, n) in &[(1, 1, 16), (7, 3, 32), (13, 70, 64), (6, 64, 80), (25, 9, 128), (3, 5, 7)] {
            let a = Matrix::from_fn(m, k, |r, c| ((r * 31 + c * 7) as f32 * 0.173).sin());
            let b = Matrix::from_fn(k, n, |r, c| ((r * 13 + c * 3) as f32 * 0.291).cos());
            let expect = naive(&a, &b);
            // plain, transposed-A and transposed-B routes
            let mut c1 = Matrix::zeros(m, n);
            gemm(1.0, a.view(), b.view(), 0.0, c1.view_mut());
            let at = Matrix::from_fn(k, m, |r, c| a.get(c, r));
            let bt = Matrix::from_fn(n, k, |r, c| b.get(c, r));
            let mut c2 = Matrix::from_fn(m, n, |_, _| 1.0);
            gemm(1.0, at.view().t(), bt.view().t(), 1.0, c2.view_mut());
            for q in 0..m * n {
                let tol = 1e-4 * (1.0 + expect[q].abs());
                assert!((c1.as_slice()[q] as f64 - expect[q]).abs() < tol, "{m}x{k}x{n}");
                assert!((c2.as_slice()[q] as f64 - 1.0 - expect[q]).abs() < tol, "{m}x{k}x{n} accumulate");
            }
        }
    }
}
