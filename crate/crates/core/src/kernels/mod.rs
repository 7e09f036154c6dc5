//! The schedule space: a reference baseline plus row-parallel and hub-split
//! variants of SpMM and SDDMM, and the CSR row softmax.
//!
//! Every tuned variant computes the same mathematical result as its
//! baseline; variants differ only in how rows and nonzeros are mapped onto
//! workers, the feature tile width, and whether 4-wide lanes are used.

mod lanes;
mod sddmm;
mod softmax;
mod spmm;
mod variant;

use std::ops::Range;
use std::time::Instant;

pub use sddmm::{sddmm_baseline, sddmm_rowparallel};
pub use softmax::row_softmax;
pub use spmm::{spmm_baseline, spmm_hubsplit, spmm_rowparallel};
pub use variant::{
    vec4_eligible, KernelVariant, Mapping, Op, VariantParseError, DEFAULT_HUB_THRESHOLD,
};

use crate::csr::{CsrMatrix, DenseMatrix};
use crate::env::{self, EnvError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variant is for {variant} but operands are for {operands}")]
    OpMismatch { variant: Op, operands: Op },
    #[error("invalid variant: {0}")]
    Variant(String),
    #[error("row softmax needs a matrix with values")]
    MissingValues,
}

/// Which inner loop actually ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecPath {
    Scalar,
    Vectorized,
}

/// The inner-loop flavour a variant runs with on operands of width `f` and
/// the given base alignments. Vectorization silently degrades to scalar
/// when the operands (or the tile width) do not permit it.
pub fn effective_path(v: &KernelVariant, f: usize, alignments: &[usize]) -> ExecPath {
    let tile = v.f_tile.min(f);
    if !v.is_baseline() && v.vectorized && vec4_eligible(f, alignments) && tile.is_multiple_of(4) {
        ExecPath::Vectorized
    } else {
        ExecPath::Scalar
    }
}

/// Minimum number of nonzeros in one piece of a split heavy row.
const MIN_PIECE: usize = 64;

/// Fixed partition of a heavy row's nonzeros. Depends only on the row
/// length and the worker count, so reductions over pieces are reproducible.
pub(crate) fn hub_pieces(range: Range<usize>) -> Vec<Range<usize>> {
    let len = range.len();
    if len == 0 {
        return Vec::new();
    }
    let workers = rayon::current_num_threads().max(1);
    let pieces = (workers * 4).min(len.div_ceil(MIN_PIECE)).max(1);
    let size = len.div_ceil(pieces);
    (range.start..range.end)
        .step_by(size)
        .map(|s| s..(s + size).min(range.end))
        .collect()
}

/// Pairwise reduction in fixed order.
pub(crate) fn tree_reduce(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Borrowed inputs of one kernel call.
#[derive(Debug, Clone, Copy)]
pub enum Operands<'a> {
    SpMM {
        a: &'a CsrMatrix,
        b: &'a DenseMatrix,
    },
    SDDMM {
        pattern: &'a CsrMatrix,
        x: &'a DenseMatrix,
        y: &'a DenseMatrix,
    },
}

impl Operands<'_> {
    pub fn op(&self) -> Op {
        match self {
            Operands::SpMM { .. } => Op::SpMM,
            Operands::SDDMM { .. } => Op::SDDMM,
        }
    }

    /// Feature width F of the dense operands.
    pub fn width(&self) -> usize {
        match self {
            Operands::SpMM { b, .. } => b.n_cols(),
            Operands::SDDMM { x, .. } => x.n_cols(),
        }
    }

    pub fn sparse(&self) -> &CsrMatrix {
        match self {
            Operands::SpMM { a, .. } => a,
            Operands::SDDMM { pattern, .. } => pattern,
        }
    }

    pub fn alignments(&self) -> Vec<usize> {
        match self {
            Operands::SpMM { b, .. } => vec![b.base_alignment()],
            Operands::SDDMM { x, y, .. } => vec![x.base_alignment(), y.base_alignment()],
        }
    }

    pub fn check(&self) -> Result<(), KernelError> {
        match *self {
            Operands::SpMM { a, b } => spmm::check_spmm(a, b),
            Operands::SDDMM { pattern, x, y } => sddmm::check_sddmm(pattern, x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelOutput {
    Dense(DenseMatrix),
    /// One value per stored entry of the pattern, in CSR order.
    Values(Vec<f32>),
}

impl KernelOutput {
    pub fn as_f32(&self) -> &[f32] {
        match self {
            KernelOutput::Dense(d) => d.as_slice(),
            KernelOutput::Values(v) => v,
        }
    }

    pub fn into_dense(self) -> Option<DenseMatrix> {
        match self {
            KernelOutput::Dense(d) => Some(d),
            KernelOutput::Values(_) => None,
        }
    }

    pub fn into_values(self) -> Option<Vec<f32>> {
        match self {
            KernelOutput::Values(v) => Some(v),
            KernelOutput::Dense(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelResult {
    pub output: KernelOutput,
    pub variant: KernelVariant,
    pub path: ExecPath,
    pub elapsed_ms: f64,
}

/// Run `variant` on `operands`, timing the call with a monotonic clock.
pub fn dispatch(
    variant: &KernelVariant,
    operands: Operands<'_>,
) -> Result<KernelResult, KernelError> {
    if variant.op != operands.op() {
        return Err(KernelError::OpMismatch {
            variant: variant.op,
            operands: operands.op(),
        });
    }
    variant.check().map_err(KernelError::Variant)?;
    operands.check()?;
    let path = effective_path(variant, operands.width(), &operands.alignments());
    let start = Instant::now();
    let output = match operands {
        Operands::SpMM { a, b } if variant.is_baseline() => {
            KernelOutput::Dense(spmm_baseline(a, b)?)
        }
        Operands::SpMM { a, b } => KernelOutput::Dense(spmm::spmm_tuned(a, b, variant, path)),
        Operands::SDDMM { pattern, x, y } if variant.is_baseline() => {
            KernelOutput::Values(sddmm_baseline(pattern, x, y)?)
        }
        Operands::SDDMM { pattern, x, y } => {
            KernelOutput::Values(sddmm::sddmm_tuned(pattern, x, y, variant, path))
        }
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(KernelResult {
        output,
        variant: *variant,
        path,
        elapsed_ms,
    })
}

/// Knob overrides taken from `AUTOSAGE_FTILE`, `AUTOSAGE_WPB`,
/// `AUTOSAGE_HUB_T` and `AUTOSAGE_VEC`. They replace the corresponding field
/// of every tuned variant; the baseline is never touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelOverrides {
    pub f_tile: Option<usize>,
    pub rows_per_chunk: Option<usize>,
    pub hub_threshold: Option<usize>,
    pub vectorized: Option<bool>,
}

impl KernelOverrides {
    pub fn from_env() -> Result<Self, EnvError> {
        Ok(Self {
            f_tile: env::positive(env::FTILE)?,
            rows_per_chunk: env::positive(env::WPB)?,
            hub_threshold: env::positive(env::HUB_T)?,
            vectorized: env::flag(env::VEC)?,
        })
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, mut v: KernelVariant) -> KernelVariant {
        if v.is_baseline() {
            return v;
        }
        if let Some(t) = self.f_tile {
            v.f_tile = t;
        }
        if let Some(r) = self.rows_per_chunk {
            v.rows_per_chunk = r;
        }
        if let Some(vec) = self.vectorized {
            v.vectorized = vec;
        }
        if v.mapping == Mapping::HubSplit {
            if let Some(h) = self.hub_threshold {
                v.hub_threshold = h;
            }
        }
        v
    }
}
