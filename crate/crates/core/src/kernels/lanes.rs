//! Inner loops over a feature tile, scalar and 4-wide.
//!
//! Both flavours accumulate in `f64`. The 4-wide `axpy` performs the same
//! per-feature operations in the same order as the scalar one, so SpMM
//! results are bitwise identical across the two paths; the 4-wide dot keeps
//! four partial sums and only matches the scalar dot to rounding.

#[inline]
pub(crate) fn axpy_scalar(acc: &mut [f64], v: f64, row: &[f32]) {
    for (a, &b) in acc.iter_mut().zip(row) {
        *a += v * b as f64;
    }
}

#[inline]
pub(crate) fn dot_scalar(mut acc: f64, x: &[f32], y: &[f32]) -> f64 {
    for (&a, &b) in x.iter().zip(y) {
        acc += a as f64 * b as f64;
    }
    acc
}

/// `acc += v * row`, four features per step.
///
/// # Safety
/// `row` must start on a 16-byte boundary and have a length that is a
/// multiple of 4 and equal to `acc.len()`.
#[inline]
pub(crate) unsafe fn axpy_vec4(acc: &mut [f64], v: f64, row: &[f32]) {
    debug_assert_eq!(row.as_ptr() as usize % 16, 0);
    debug_assert_eq!(row.len() % 4, 0);
    debug_assert_eq!(row.len(), acc.len());
    imp::axpy(acc, v, row)
}

/// `acc + dot(x, y)`, four lanes.
///
/// # Safety
/// `x` and `y` must start on 16-byte boundaries and have equal lengths that
/// are multiples of 4.
#[inline]
pub(crate) unsafe fn dot_vec4(acc: f64, x: &[f32], y: &[f32]) -> f64 {
    debug_assert_eq!(x.as_ptr() as usize % 16, 0);
    debug_assert_eq!(y.as_ptr() as usize % 16, 0);
    debug_assert_eq!(x.len() % 4, 0);
    debug_assert_eq!(x.len(), y.len());
    acc + imp::dot(x, y)
}

#[cfg(target_arch = "x86_64")]
mod imp {
    use std::arch::x86_64::*;

    // SSE2 is part of the x86_64 baseline, no runtime detection needed.
    #[inline]
    pub(super) unsafe fn axpy(acc: &mut [f64], v: f64, row: &[f32]) {
        let vv = _mm_set1_pd(v);
        let a = acc.as_mut_ptr();
        let r = row.as_ptr();
        let mut t = 0;
        while t < row.len() {
            let p = _mm_load_ps(r.add(t));
            let lo = _mm_cvtps_pd(p);
            let hi = _mm_cvtps_pd(_mm_movehl_ps(p, p));
            let a0 = _mm_loadu_pd(a.add(t));
            let a1 = _mm_loadu_pd(a.add(t + 2));
            _mm_storeu_pd(a.add(t), _mm_add_pd(a0, _mm_mul_pd(vv, lo)));
            _mm_storeu_pd(a.add(t + 2), _mm_add_pd(a1, _mm_mul_pd(vv, hi)));
            t += 4;
        }
    }

    #[inline]
    pub(super) unsafe fn dot(x: &[f32], y: &[f32]) -> f64 {
        let xp = x.as_ptr();
        let yp = y.as_ptr();
        let mut s0 = _mm_setzero_pd();
        let mut s1 = _mm_setzero_pd();
        let mut t = 0;
        while t < x.len() {
            let a = _mm_load_ps(xp.add(t));
            let b = _mm_load_ps(yp.add(t));
            s0 = _mm_add_pd(s0, _mm_mul_pd(_mm_cvtps_pd(a), _mm_cvtps_pd(b)));
            s1 = _mm_add_pd(
                s1,
                _mm_mul_pd(
                    _mm_cvtps_pd(_mm_movehl_ps(a, a)),
                    _mm_cvtps_pd(_mm_movehl_ps(b, b)),
                ),
            );
            t += 4;
        }
        let s = _mm_add_pd(s0, s1);
        let mut out = [0.0f64; 2];
        _mm_storeu_pd(out.as_mut_ptr(), s);
        out[0] + out[1]
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod imp {
    #[inline]
    pub(super) unsafe fn axpy(acc: &mut [f64], v: f64, row: &[f32]) {
        for (a, r) in acc.chunks_exact_mut(4).zip(row.chunks_exact(4)) {
            let lane = [r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64];
            for k in 0..4 {
                a[k] += v * lane[k];
            }
        }
    }

    #[inline]
    pub(super) unsafe fn dot(x: &[f32], y: &[f32]) -> f64 {
        let mut s = [0.0f64; 4];
        for (a, b) in x.chunks_exact(4).zip(y.chunks_exact(4)) {
            for k in 0..4 {
                s[k] += a[k] as f64 * b[k] as f64;
            }
        }
        (s[0] + s[2]) + (s[1] + s[3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csr::DenseMatrix;

    #[test]
    fn vec4_axpy_is_bitwise_scalar() {
        let b = DenseMatrix::random(1, 64, 5);
        let row = b.row(0);
        let mut a1 = vec![0.25f64; 64];
        let mut a2 = a1.clone();
        axpy_scalar(&mut a1, 0.3, row);
        unsafe { axpy_vec4(&mut a2, 0.3, row) };
        assert_eq!(a1, a2);
    }

    #[test]
    fn vec4_dot_matches_scalar() {
        let x = DenseMatrix::random(1, 128, 1);
        let y = DenseMatrix::random(1, 128, 2);
        let s = dot_scalar(1.0, x.row(0), y.row(0));
        let v = unsafe { dot_vec4(1.0, x.row(0), y.row(0)) };
        assert!((s - v).abs() < 1e-12, "{s} vs {v}");
    }
}
