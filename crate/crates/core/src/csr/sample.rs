use super::CsrMatrix;

/// Row slice of a larger matrix. Column indices keep their original
/// numbering, so the dense operand indexed by columns is reused as is.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSample {
    pub matrix: CsrMatrix,
    /// Original index of each sampled row, ascending.
    pub rows: Vec<usize>,
}

/// Degree-stratified systematic row sample.
///
/// Takes `s = min(n_rows, max(min_rows, ceil(frac * n_rows)))` rows: rows are
/// ranked by degree (descending, ties by index) and every `floor(n_rows / s)`-th
/// rank is kept starting from the heaviest row.
pub fn induced_row_sample(m: &CsrMatrix, frac: f64, min_rows: usize) -> RowSample {
    let n = m.n_rows();
    let wanted = (frac * n as f64).ceil().max(0.0) as usize;
    let s = wanted.max(min_rows).min(n);
    if s == 0 {
        return RowSample {
            matrix: CsrMatrix::empty(0, m.n_cols()),
            rows: Vec::new(),
        };
    }

    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| m.degree(b).cmp(&m.degree(a)).then(a.cmp(&b)));
    let step = n / s;
    let mut rows: Vec<usize> = ranked.iter().step_by(step).take(s).copied().collect();
    rows.sort_unstable();

    let nnz: usize = rows.iter().map(|&r| m.degree(r)).sum();
    let mut rowptr = Vec::with_capacity(s + 1);
    let mut colind = Vec::with_capacity(nnz);
    let mut val = m.values().map(|_| Vec::with_capacity(nnz));
    rowptr.push(0);
    for &r in &rows {
        let span = m.row_range(r);
        colind.extend_from_slice(&m.colind()[span.clone()]);
        if let (Some(dst), Some(src)) = (val.as_mut(), m.values()) {
            dst.extend_from_slice(&src[span]);
        }
        rowptr.push(colind.len());
    }
    RowSample {
        matrix: CsrMatrix::from_parts_unchecked(s, m.n_cols(), rowptr, colind, val),
        rows,
    }
}
