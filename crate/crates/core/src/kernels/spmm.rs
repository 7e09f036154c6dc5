use rayon::prelude::*;

use super::lanes::{axpy_scalar, axpy_vec4};
use super::{
    effective_path, hub_pieces, tree_reduce, ExecPath, KernelError, KernelVariant, Mapping, Op,
};
use crate::csr::{CsrMatrix, DenseMatrix};

pub(crate) fn check_spmm(a: &CsrMatrix, b: &DenseMatrix) -> Result<(), KernelError> {
    if a.n_cols() != b.n_rows() {
        return Err(KernelError::Dimension(format!(
            "spmm: A is {}x{} but B has {} rows",
            a.n_rows(),
            a.n_cols(),
            b.n_rows()
        )));
    }
    Ok(())
}

/// Reference `C = A * B`: one thread, no tiling, `f64` accumulation.
pub fn spmm_baseline(a: &CsrMatrix, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
    check_spmm(a, b)?;
    let f = b.n_cols();
    let mut c = DenseMatrix::zeros(a.n_rows(), f);
    let mut acc = vec![0.0f64; f];
    for i in 0..a.n_rows() {
        acc.fill(0.0);
        for e in a.row_range(i) {
            let v = a.value(e) as f64;
            let brow = b.row(a.colind()[e] as usize);
            for (s, &x) in acc.iter_mut().zip(brow) {
                *s += v * x as f64;
            }
        }
        for (o, &s) in c.row_mut(i).iter_mut().zip(&acc) {
            *o = s as f32;
        }
    }
    Ok(c)
}

/// Row-chunked data-parallel SpMM with feature tiling.
pub fn spmm_rowparallel(
    a: &CsrMatrix,
    b: &DenseMatrix,
    v: &KernelVariant,
) -> Result<DenseMatrix, KernelError> {
    expect_mapping(v, Mapping::RowParallel)?;
    check_spmm(a, b)?;
    Ok(spmm_tuned(
        a,
        b,
        v,
        effective_path(v, b.n_cols(), &[b.base_alignment()]),
    ))
}

/// SpMM with intra-row parallelism for rows of degree >= `hub_threshold`.
pub fn spmm_hubsplit(
    a: &CsrMatrix,
    b: &DenseMatrix,
    v: &KernelVariant,
) -> Result<DenseMatrix, KernelError> {
    expect_mapping(v, Mapping::HubSplit)?;
    check_spmm(a, b)?;
    Ok(spmm_tuned(
        a,
        b,
        v,
        effective_path(v, b.n_cols(), &[b.base_alignment()]),
    ))
}

pub(crate) fn expect_mapping(v: &KernelVariant, mapping: Mapping) -> Result<(), KernelError> {
    v.check().map_err(KernelError::Variant)?;
    if v.mapping != mapping {
        return Err(KernelError::Variant(format!(
            "expected {} variant, got {v}",
            mapping.as_str()
        )));
    }
    Ok(())
}

/// Add the contributions of nonzeros `range` to one feature tile.
#[inline]
fn accumulate_tile(
    a: &CsrMatrix,
    b: &DenseMatrix,
    range: std::ops::Range<usize>,
    f0: usize,
    acc: &mut [f64],
    vec4: bool,
) {
    let f1 = f0 + acc.len();
    for e in range {
        let v = a.value(e) as f64;
        let brow = &b.row(a.colind()[e] as usize)[f0..f1];
        if vec4 {
            // SAFETY: the vec4 path is only selected when B is 16-byte
            // aligned, F % 4 == 0 and the tile width is a multiple of 4,
            // so every tile start is 16-byte aligned.
            unsafe { axpy_vec4(acc, v, brow) }
        } else {
            axpy_scalar(acc, v, brow)
        }
    }
}

fn light_row(
    a: &CsrMatrix,
    b: &DenseMatrix,
    row: usize,
    tile: usize,
    vec4: bool,
    acc: &mut [f64],
    out: &mut [f32],
) {
    let f = out.len();
    let mut f0 = 0;
    while f0 < f {
        let w = tile.min(f - f0);
        let acc = &mut acc[..w];
        acc.fill(0.0);
        accumulate_tile(a, b, a.row_range(row), f0, acc, vec4);
        for (o, &s) in out[f0..f0 + w].iter_mut().zip(acc.iter()) {
            *o = s as f32;
        }
        f0 += w;
    }
}

fn hub_row(a: &CsrMatrix, b: &DenseMatrix, row: usize, tile: usize, vec4: bool, out: &mut [f32]) {
    let f = out.len();
    let partials: Vec<Vec<f64>> = hub_pieces(a.row_range(row))
        .into_par_iter()
        .map(|piece| {
            let mut p = vec![0.0f64; f];
            let mut f0 = 0;
            while f0 < f {
                let w = tile.min(f - f0);
                accumulate_tile(a, b, piece.clone(), f0, &mut p[f0..f0 + w], vec4);
                f0 += w;
            }
            p
        })
        .collect();
    for (o, s) in out.iter_mut().zip(tree_reduce(partials)) {
        *o = s as f32;
    }
}

pub(crate) fn spmm_tuned(
    a: &CsrMatrix,
    b: &DenseMatrix,
    v: &KernelVariant,
    path: ExecPath,
) -> DenseMatrix {
    debug_assert_eq!(v.op, Op::SpMM);
    let f = b.n_cols();
    let mut c = DenseMatrix::zeros(a.n_rows(), f);
    if f == 0 || a.n_rows() == 0 {
        return c;
    }
    let tile = v.f_tile.min(f);
    let vec4 = path == ExecPath::Vectorized;
    let split = v.mapping == Mapping::HubSplit;
    let is_heavy = |i: usize| split && a.degree(i) >= v.hub_threshold;
    let rpc = v.rows_per_chunk;

    c.as_mut_slice()
        .par_chunks_mut(rpc * f)
        .enumerate()
        .for_each_init(
            || vec![0.0f64; tile],
            |acc, (chunk, rows)| {
                for (k, out) in rows.chunks_mut(f).enumerate() {
                    let i = chunk * rpc + k;
                    if !is_heavy(i) {
                        light_row(a, b, i, tile, vec4, acc, out);
                    }
                }
            },
        );
    if split {
        for i in (0..a.n_rows()).filter(|&i| is_heavy(i)) {
            hub_row(a, b, i, tile, vec4, c.row_mut(i));
        }
    }
    c
}
