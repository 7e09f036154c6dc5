use rayon::prelude::*;

use super::sddmm::row_chunks_mut;
use super::KernelError;
use crate::csr::CsrMatrix;

const ROWS_PER_TASK: usize = 64;

/// Max-shifted softmax over the stored entries of each row.
///
/// The output has the same pattern as the input. Empty rows stay empty.
/// NaN inputs are not trapped: a NaN anywhere in a row makes the whole row NaN.
pub fn row_softmax(m: &CsrMatrix) -> Result<CsrMatrix, KernelError> {
    let vals = m.values().ok_or(KernelError::MissingValues)?;
    let mut out = vec![0.0f32; m.nnz()];
    let rowptr = m.rowptr();
    row_chunks_mut(&mut out, rowptr, ROWS_PER_TASK)
        .into_par_iter()
        .for_each_init(Vec::new, |buf, (r0, chunk)| {
            let r1 = (r0 + ROWS_PER_TASK).min(m.n_rows());
            let base = rowptr[r0];
            for i in r0..r1 {
                let row = &vals[m.row_range(i)];
                if row.is_empty() {
                    continue;
                }
                let max = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v as f64));
                buf.clear();
                buf.extend(row.iter().map(|&v| (v as f64 - max).exp()));
                let sum: f64 = buf.iter().sum();
                let dst = &mut chunk[rowptr[i] - base..rowptr[i + 1] - base];
                for (o, &e) in dst.iter_mut().zip(buf.iter()) {
                    *o = (e / sum) as f32;
                }
            }
        });
    Ok(m.with_values(out).expect("output length equals nnz"))
}
