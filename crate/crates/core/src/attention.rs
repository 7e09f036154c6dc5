//! CSR attention: `out = softmax_rows(SDDMM(S, Q, K)) · V` over a sparsity
//! pattern `S`, with the SDDMM and SpMM steps scheduled independently.
//!
//! No `1/sqrt(F)` scale is applied; pre-scale `q` if needed. Rows of `S`
//! without entries produce zero output rows.

use crate::csr::{CsrMatrix, DenseMatrix};
use crate::kernels::{row_softmax, KernelError, Operands};
use crate::scheduler::{ScheduleDecision, ScheduleError, Scheduler};

#[derive(Debug, Clone, Copy)]
pub struct AttentionInputs<'a> {
    /// Attention mask; stored values are ignored.
    pub pattern: &'a CsrMatrix,
    /// One query row per pattern row.
    pub q: &'a DenseMatrix,
    /// One key row per pattern column.
    pub k: &'a DenseMatrix,
    /// One value row per pattern column; its width may differ from `q`.
    pub v: &'a DenseMatrix,
}

impl AttentionInputs<'_> {
    pub fn check(&self) -> Result<(), KernelError> {
        let (n, m) = (self.pattern.n_rows(), self.pattern.n_cols());
        let bad = |what: String| Err(KernelError::Dimension(what));
        if self.q.n_rows() != n {
            return bad(format!("q has {} rows, pattern has {n}", self.q.n_rows()));
        }
        if self.k.n_rows() != m || self.v.n_rows() != m {
            return bad(format!(
                "k/v have {}/{} rows, pattern has {m} columns",
                self.k.n_rows(),
                self.v.n_rows()
            ));
        }
        if self.q.n_cols() != self.k.n_cols() {
            return bad(format!(
                "q width {} differs from k width {}",
                self.q.n_cols(),
                self.k.n_cols()
            ));
        }
        Ok(())
    }
}

/// Output together with both per-op decisions.
#[derive(Debug, Clone)]
pub struct AttentionRun {
    pub output: DenseMatrix,
    /// Row-softmax probabilities on the pattern.
    pub probabilities: CsrMatrix,
    pub sddmm: ScheduleDecision,
    pub spmm: ScheduleDecision,
}

impl AttentionRun {
    /// Kernel calls made by probes in this run.
    pub fn probe_launches(&self) -> u64 {
        [&self.sddmm, &self.spmm]
            .iter()
            .filter_map(|d| d.report.as_ref())
            .map(|r| r.launches)
            .sum()
    }
}

pub fn csr_attention_forward(
    inputs: &AttentionInputs<'_>,
    sched: &Scheduler,
) -> Result<DenseMatrix, ScheduleError> {
    attention_probe_breakdown(inputs, sched).map(|r| r.output)
}

/// Run the pipeline and keep both decisions. A cold run carries a probe
/// report per op; cached and replayed decisions carry none.
pub fn attention_probe_breakdown(
    inputs: &AttentionInputs<'_>,
    sched: &Scheduler,
) -> Result<AttentionRun, ScheduleError> {
    inputs.check()?;
    let (sddmm, scores) = sched.run(Operands::SDDMM {
        pattern: inputs.pattern,
        x: inputs.q,
        y: inputs.k,
    })?;
    let scores = scores.output.into_values().expect("sddmm yields values");
    let logits = inputs
        .pattern
        .with_values(scores)
        .expect("one score per stored entry");
    let probabilities = row_softmax(&logits)?;
    let (spmm, out) = sched.run(Operands::SpMM {
        a: &probabilities,
        b: inputs.v,
    })?;
    let output = out.output.into_dense().expect("spmm yields a dense matrix");
    Ok(AttentionRun {
        output,
        probabilities,
        sddmm,
        spmm,
    })
}
