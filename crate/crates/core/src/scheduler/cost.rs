//! Roofline-style latency estimate used only to order candidates.
//!
//! `estimate = max(bytes / bw_eff, flops / flops_eff) * penalty`, with
//!
//! * SpMM: `bytes = 8 nnz + 4 nnz F + 4 N F + 8 (N + 1)`, `flops = 2 nnz F`
//! * SDDMM: `bytes = 8 nnz + 8 nnz F + 4 nnz`, `flops = 2 nnz F`
//! * `penalty = 1 + imbalance` unless the variant actively splits heavy rows
//!   (a hub-split variant whose threshold some row reaches), where
//!   `imbalance = clamp(max_degree / (mean_degree * cores), 0, 4)`.

use std::cmp::Ordering;

use super::DeviceProfile;
use crate::csr::GraphFeatures;
use crate::kernels::{KernelVariant, Mapping, Op};

pub const F_TILES: [usize; 3] = [32, 64, 128];
pub const ROWS_PER_CHUNK: [usize; 3] = [1, 4, 16];

pub fn traffic(op: Op, gf: &GraphFeatures, f: usize) -> (f64, f64) {
    let nnz = gf.nnz as f64;
    let n = gf.n_rows as f64;
    let f = f as f64;
    let bytes = match op {
        Op::SpMM => 8.0 * nnz + 4.0 * nnz * f + 4.0 * n * f + 8.0 * (n + 1.0),
        Op::SDDMM => 8.0 * nnz + 4.0 * nnz * f * 2.0 + 4.0 * nnz,
    };
    (bytes, 2.0 * nnz * f)
}

pub fn imbalance(gf: &GraphFeatures, cores: usize) -> f64 {
    if gf.nnz == 0 || gf.mean_degree <= 0.0 {
        return 0.0;
    }
    (gf.max_degree as f64 / (gf.mean_degree * cores.max(1) as f64)).clamp(0.0, 4.0)
}

/// Whether `v` splits at least one row of a graph with features `gf`.
fn splits_hubs(v: &KernelVariant, gf: &GraphFeatures) -> bool {
    v.mapping == Mapping::HubSplit && gf.max_degree >= v.hub_threshold
}

/// Estimated milliseconds for `v` at feature width `f`.
pub fn estimate_cost(v: &KernelVariant, gf: &GraphFeatures, f: usize, dp: &DeviceProfile) -> f64 {
    if gf.nnz == 0 {
        return 0.0;
    }
    let (bytes, flops) = traffic(v.op, gf, f);
    let roof = (bytes / dp.bw_eff).max(flops / dp.flops_eff) * 1e3;
    let penalty = if splits_hubs(v, gf) {
        1.0
    } else {
        1.0 + imbalance(gf, dp.cores)
    };
    roof * penalty
}

/// Every tuned variant the scheduler considers for `op`.
pub fn variant_grid(op: Op, vec_eligible: bool, hub_threshold: usize) -> Vec<KernelVariant> {
    let vec_options: &[bool] = if vec_eligible {
        &[true, false]
    } else {
        &[false]
    };
    let mut grid = Vec::new();
    for mapping in [Mapping::RowParallel, Mapping::HubSplit] {
        for &f_tile in &F_TILES {
            for &vectorized in vec_options {
                for &rows_per_chunk in &ROWS_PER_CHUNK {
                    grid.push(KernelVariant {
                        op,
                        mapping,
                        f_tile,
                        rows_per_chunk,
                        vectorized,
                        hub_threshold: if mapping == Mapping::HubSplit {
                            hub_threshold
                        } else {
                            0
                        },
                    });
                }
            }
        }
    }
    grid
}

fn tie_break(a: &KernelVariant, b: &KernelVariant) -> Ordering {
    a.mapping
        .cmp(&b.mapping)
        .then(a.f_tile.cmp(&b.f_tile))
        .then(b.vectorized.cmp(&a.vectorized))
        .then(a.rows_per_chunk.cmp(&b.rows_per_chunk))
}

/// Candidates ordered by ascending estimate. Ties go to row-parallel before
/// hub-split, then smaller tiles, vectorized before scalar, fewer rows per chunk.
pub fn shortlist(
    gf: &GraphFeatures,
    f: usize,
    op: Op,
    dp: &DeviceProfile,
    vec_eligible: bool,
    hub_threshold: usize,
) -> Vec<(KernelVariant, f64)> {
    let mut scored: Vec<(KernelVariant, f64)> = variant_grid(op, vec_eligible, hub_threshold)
        .into_iter()
        .map(|v| {
            let c = estimate_cost(&v, gf, f, dp);
            (v, c)
        })
        .collect();
    scored.sort_by(|(va, ca), (vb, cb)| ca.total_cmp(cb).then_with(|| tie_break(va, vb)));
    scored
}
