//! Dense reference implementations, written independently of the kernels.
#![allow(dead_code)]

use autosage::csr::{CsrMatrix, DenseMatrix};

/// Row-major dense copy of `m` (pattern-only entries read as 1).
pub fn to_dense(m: &CsrMatrix) -> Vec<f64> {
    let mut d = vec![0.0; m.n_rows() * m.n_cols()];
    for i in 0..m.n_rows() {
        for e in m.rowptr()[i]..m.rowptr()[i + 1] {
            let v = m.values().map_or(1.0, |v| v[e] as f64);
            d[i * m.n_cols() + m.colind()[e] as usize] = v;
        }
    }
    d
}

/// `C = A * B` by the textbook triple loop over the dense copy of `A`.
pub fn spmm_oracle(a: &CsrMatrix, b: &DenseMatrix) -> Vec<f64> {
    let (n, k, f) = (a.n_rows(), a.n_cols(), b.n_cols());
    let ad = to_dense(a);
    let mut c = vec![0.0; n * f];
    for i in 0..n {
        for j in 0..k {
            let aij = ad[i * k + j];
            for t in 0..f {
                c[i * f + t] += aij * b.get(j, t) as f64;
            }
        }
    }
    c
}

/// Dense `X * Y^T`, then read off at the pattern's entries in CSR order.
pub fn sddmm_oracle(p: &CsrMatrix, x: &DenseMatrix, y: &DenseMatrix) -> Vec<f64> {
    let (n, m, f) = (p.n_rows(), p.n_cols(), x.n_cols());
    let mut full = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..f {
                s += x.get(i, t) as f64 * y.get(j, t) as f64;
            }
            full[i * m + j] = s;
        }
    }
    let mut out = Vec::with_capacity(p.nnz());
    for i in 0..n {
        for e in p.rowptr()[i]..p.rowptr()[i + 1] {
            out.push(full[i * m + p.colind()[e] as usize]);
        }
    }
    out
}

/// `softmax(Q K^T masked by S) V` with `-inf` outside the mask; rows with an
/// empty mask are defined as zero.
pub fn attention_oracle(
    s: &CsrMatrix,
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
) -> Vec<f64> {
    let (n, m, fo) = (s.n_rows(), s.n_cols(), v.n_cols());
    let mask = to_dense(&s.pattern());
    let mut out = vec![0.0; n * fo];
    for i in 0..n {
        let mut logits = vec![f64::NEG_INFINITY; m];
        for j in 0..m {
            if mask[i * m + j] != 0.0 {
                logits[j] = (0..q.n_cols())
                    .map(|t| q.get(i, t) as f64 * k.get(j, t) as f64)
                    .sum();
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let w: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for (j, wj) in w.iter().enumerate() {
            for t in 0..fo {
                out[i * fo + t] += wj / z * v.get(j, t) as f64;
            }
        }
    }
    out
}

/// Largest `|got - want| / (rel * |want| + abs)`; at most 1 means within tolerance.
pub fn worst(got: &[f32], want: &[f64], rel: f64, abs: f64) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w).abs() / (rel * w.abs() + abs))
        .fold(0.0, f64::max)
}
