use rayon::prelude::*;

use super::lanes::{dot_scalar, dot_vec4};
use super::spmm::expect_mapping;
use super::{effective_path, hub_pieces, ExecPath, KernelError, KernelVariant, Mapping, Op};
use crate::csr::{CsrMatrix, DenseMatrix};

pub(crate) fn check_sddmm(
    pattern: &CsrMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(), KernelError> {
    if x.n_cols() != y.n_cols() {
        return Err(KernelError::Dimension(format!(
            "sddmm: X has width {} but Y has width {}",
            x.n_cols(),
            y.n_cols()
        )));
    }
    if x.n_rows() != pattern.n_rows() || y.n_rows() != pattern.n_cols() {
        return Err(KernelError::Dimension(format!(
            "sddmm: pattern is {}x{} but X has {} rows and Y has {} rows",
            pattern.n_rows(),
            pattern.n_cols(),
            x.n_rows(),
            y.n_rows()
        )));
    }
    Ok(())
}

/// Reference gather-dot: `out[e] = <X[i], Y[j]>` for every stored `(i, j)`.
/// Stored values of `pattern` are ignored.
pub fn sddmm_baseline(
    pattern: &CsrMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<Vec<f32>, KernelError> {
    check_sddmm(pattern, x, y)?;
    let mut out = vec![0.0f32; pattern.nnz()];
    for i in 0..pattern.n_rows() {
        let xi = x.row(i);
        for e in pattern.row_range(i) {
            let yj = y.row(pattern.colind()[e] as usize);
            let mut s = 0.0f64;
            for (&a, &b) in xi.iter().zip(yj) {
                s += a as f64 * b as f64;
            }
            out[e] = s as f32;
        }
    }
    Ok(out)
}

/// Tuned SDDMM for `RowParallel` and `HubSplit` variants.
pub fn sddmm_rowparallel(
    pattern: &CsrMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
    v: &KernelVariant,
) -> Result<Vec<f32>, KernelError> {
    if v.mapping != Mapping::HubSplit {
        expect_mapping(v, Mapping::RowParallel)?;
    }
    v.check().map_err(KernelError::Variant)?;
    check_sddmm(pattern, x, y)?;
    let path = effective_path(v, x.n_cols(), &[x.base_alignment(), y.base_alignment()]);
    Ok(sddmm_tuned(pattern, x, y, v, path))
}

/// Dot products for the stored entries in `range` of row `row`, written to
/// `out` (one slot per entry), tile by tile.
#[allow(clippy::too_many_arguments)]
fn entries(
    pattern: &CsrMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
    row: usize,
    range: std::ops::Range<usize>,
    tile: usize,
    vec4: bool,
    acc: &mut Vec<f64>,
    out: &mut [f32],
) {
    let f = x.n_cols();
    let xi = x.row(row);
    let cols = &pattern.colind()[range];
    acc.clear();
    acc.resize(cols.len(), 0.0);
    let mut f0 = 0;
    while f0 < f {
        let f1 = (f0 + tile).min(f);
        let xt = &xi[f0..f1];
        for (s, &j) in acc.iter_mut().zip(cols) {
            let yt = &y.row(j as usize)[f0..f1];
            *s = if vec4 {
                // SAFETY: vec4 is only selected when X and Y are 16-byte
                // aligned, F % 4 == 0 and the tile width is a multiple of 4.
                unsafe { dot_vec4(*s, xt, yt) }
            } else {
                dot_scalar(*s, xt, yt)
            };
        }
        f0 = f1;
    }
    for (o, &s) in out.iter_mut().zip(acc.iter()) {
        *o = s as f32;
    }
}

/// Split `out` into per-chunk slices of `rpc` rows each.
pub(crate) fn row_chunks_mut<'a, T>(
    out: &'a mut [T],
    rowptr: &[usize],
    rpc: usize,
) -> Vec<(usize, &'a mut [T])> {
    let n = rowptr.len() - 1;
    let mut chunks = Vec::with_capacity(n.div_ceil(rpc.max(1)));
    let mut rest = out;
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + rpc).min(n);
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(rowptr[r1] - rowptr[r0]);
        chunks.push((r0, head));
        rest = tail;
        r0 = r1;
    }
    chunks
}

pub(crate) fn sddmm_tuned(
    pattern: &CsrMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
    v: &KernelVariant,
    path: ExecPath,
) -> Vec<f32> {
    debug_assert_eq!(v.op, Op::SDDMM);
    let f = x.n_cols();
    let mut out = vec![0.0f32; pattern.nnz()];
    if f == 0 || pattern.nnz() == 0 {
        return out;
    }
    let tile = v.f_tile.min(f);
    let vec4 = path == ExecPath::Vectorized;
    let split = v.mapping == Mapping::HubSplit;
    let is_heavy = |i: usize| split && pattern.degree(i) >= v.hub_threshold;
    let rowptr = pattern.rowptr();

    row_chunks_mut(&mut out, rowptr, v.rows_per_chunk)
        .into_par_iter()
        .for_each_init(Vec::new, |acc, (r0, chunk)| {
            let r1 = (r0 + v.rows_per_chunk).min(pattern.n_rows());
            for i in r0..r1 {
                if is_heavy(i) {
                    continue;
                }
                let local = rowptr[i] - rowptr[r0]..rowptr[i + 1] - rowptr[r0];
                entries(
                    pattern,
                    x,
                    y,
                    i,
                    pattern.row_range(i),
                    tile,
                    vec4,
                    acc,
                    &mut chunk[local],
                );
            }
        });

    if split {
        for i in (0..pattern.n_rows()).filter(|&i| is_heavy(i)) {
            let start = rowptr[i];
            let pieces = hub_pieces(pattern.row_range(i));
            let mut slices = Vec::with_capacity(pieces.len());
            let mut rest = &mut out[pattern.row_range(i)];
            for p in &pieces {
                let (head, tail) = std::mem::take(&mut rest).split_at_mut(p.len());
                slices.push((p.clone(), head));
                rest = tail;
            }
            slices
                .into_par_iter()
                .for_each_init(Vec::new, |acc, (range, dst)| {
                    debug_assert!(range.start >= start);
                    entries(pattern, x, y, i, range, tile, vec4, acc, dst);
                });
        }
    }
    out
}
