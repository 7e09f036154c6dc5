//! Seeded synthetic graph families used as benchmark stressors.
//!
//! All generators draw from `ChaCha8Rng` so the output for a given seed is
//! stable across platforms and releases of the standard RNG.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::CsrMatrix;

/// Hub degree multiplier for [`gen_hubskew`].
pub const DEFAULT_HUB_FACTOR: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("hub fraction must lie in [0, 1], got {0}")]
    HubFraction(f64),
    #[error("{what} degree {degree} exceeds n = {n}")]
    DegreeTooLarge {
        what: &'static str,
        degree: usize,
        n: usize,
    },
    #[error("n = {0} exceeds the 32-bit column index range")]
    TooLarge(usize),
}

fn check_n(n: usize) -> Result<(), GenError> {
    if n > u32::MAX as usize {
        return Err(GenError::TooLarge(n));
    }
    Ok(())
}

/// Assemble a matrix row by row from sampled column sets.
fn build(
    n: usize,
    rng: &mut ChaCha8Rng,
    mut row_cols: impl FnMut(usize, &mut ChaCha8Rng) -> Vec<u32>,
) -> CsrMatrix {
    let mut rowptr = Vec::with_capacity(n + 1);
    let mut colind = Vec::new();
    rowptr.push(0);
    for i in 0..n {
        let mut cols = row_cols(i, rng);
        cols.sort_unstable();
        colind.extend_from_slice(&cols);
        rowptr.push(colind.len());
    }
    let val = (0..colind.len()).map(|_| rng.random::<f32>()).collect();
    CsrMatrix::from_parts_unchecked(n, n, rowptr, colind, Some(val))
}

fn distinct_cols(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> Vec<u32> {
    index::sample(rng, n, degree)
        .into_iter()
        .map(|c| c as u32)
        .collect()
}

/// Erdős–Rényi G(n, p) without self loops: each row draws its degree from
/// Binomial(n - 1, p), then that many distinct off-diagonal columns.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<CsrMatrix, GenError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GenError::Probability(p));
    }
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others = n.saturating_sub(1);
    let binom = Binomial::new(others as u64, p).map_err(|_| GenError::Probability(p))?;
    Ok(build(n, &mut rng, |i, rng| {
        let degree = binom.sample(rng) as usize;
        index::sample(rng, others, degree)
            .into_iter()
            .map(|c| if c >= i { c + 1 } else { c } as u32)
            .collect()
    }))
}

/// Number of hub rows for fraction `h`: `ceil(h * n)`, treating products
/// that are integral up to rounding noise as exact.
pub fn hub_count(h: f64, n: usize) -> usize {
    let x = h * n as f64;
    let r = x.round();
    let c = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (c as usize).min(n)
}

/// `ceil(h * n)` uniformly chosen hub rows of degree `k * hub_factor`, the
/// rest of degree `k`. Degrees are clamped to `n`.
pub fn gen_hubskew(
    n: usize,
    k: usize,
    h: f64,
    hub_factor: usize,
    seed: u64,
) -> Result<CsrMatrix, GenError> {
    if !(0.0..=1.0).contains(&h) {
        return Err(GenError::HubFraction(h));
    }
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_hub = vec![false; n];
    for r in index::sample(&mut rng, n, hub_count(h, n)) {
        is_hub[r] = true;
    }
    let hub_deg = k.saturating_mul(hub_factor).min(n);
    let base_deg = k.min(n);
    Ok(build(n, &mut rng, |i, rng| {
        distinct_cols(rng, n, if is_hub[i] { hub_deg } else { base_deg })
    }))
}

/// The first `num_hubs` rows get exactly `hub_deg` entries, the others `other_deg`.
pub fn gen_hub_fixed(
    n: usize,
    num_hubs: usize,
    hub_deg: usize,
    other_deg: usize,
    seed: u64,
) -> Result<CsrMatrix, GenError> {
    check_n(n)?;
    if hub_deg > n {
        return Err(GenError::DegreeTooLarge {
            what: "hub",
            degree: hub_deg,
            n,
        });
    }
    if other_deg > n {
        return Err(GenError::DegreeTooLarge {
            what: "other",
            degree: other_deg,
            n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(build(n, &mut rng, |i, rng| {
        distinct_cols(rng, n, if i < num_hubs { hub_deg } else { other_deg })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csr::extract_features;

    #[test]
    fn er_zero_probability_is_empty() {
        let m = gen_er(500, 0.0, 1).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.n_rows(), 500);
    }

    #[test]
    fn er_zero_nodes_is_empty() {
        let m = gen_er(0, 0.5, 1).unwrap();
        assert_eq!((m.n_rows(), m.nnz()), (0, 0));
    }

    #[test]
    fn er_is_deterministic_and_loop_free() {
        let a = gen_er(1000, 1e-3, 42).unwrap();
        let b = gen_er(1000, 1e-3, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_er(1000, 1e-3, 43).unwrap());
        for i in 0..a.n_rows() {
            assert!(a.colind()[a.row_range(i)].iter().all(|&c| c as usize != i));
        }
    }

    #[test]
    fn er_full_probability_is_complete_off_diagonal() {
        let m = gen_er(20, 1.0, 5).unwrap();
        assert_eq!(m.nnz(), 20 * 19);
    }

    #[test]
    fn er_rejects_bad_probability() {
        assert_eq!(gen_er(10, 1.5, 0), Err(GenError::Probability(1.5)));
        assert!(gen_er(10, -0.1, 0).is_err());
    }

    #[test]
    fn hub_count_is_exact_on_large_inputs() {
        assert_eq!(hub_count(0.15, 200_000), 30_000);
        assert_eq!(hub_count(0.15, 7), 2);
        assert_eq!(hub_count(0.0, 7), 0);
        assert_eq!(hub_count(1.0, 7), 7);
    }

    #[test]
    fn hubskew_closed_form_nnz() {
        let m = gen_hubskew(200_000, 4, 0.15, 64, 7).unwrap();
        assert_eq!(m.nnz(), 30_000 * 256 + 170_000 * 4);
        assert_eq!(m.max_degree(), 256);
    }

    #[test]
    fn hubskew_extremes() {
        let m = gen_hubskew(1000, 4, 0.0, 64, 1).unwrap();
        assert_eq!(m.nnz(), 4000);
        assert_eq!(extract_features(&m, 32).heavy_row_fraction, 0.0);
        let m = gen_hubskew(1000, 4, 1.0, 64, 1).unwrap();
        assert!(m.degrees().all(|d| d == 256));
    }

    #[test]
    fn hubskew_clamps_degree() {
        let m = gen_hubskew(100, 4, 0.5, 64, 1).unwrap();
        assert_eq!(m.max_degree(), 100);
    }

    #[test]
    fn hub_fixed_closed_form() {
        let m = gen_hub_fixed(20_000, 1, 5000, 64, 3).unwrap();
        assert_eq!(m.nnz(), 5000 + 19_999 * 64);
        assert_eq!(m.degree(0), 5000);
        let m = gen_hub_fixed(20_000, 1, 12_000, 32, 3).unwrap();
        assert_eq!(m.max_degree(), 12_000);
        assert!(gen_hub_fixed(10, 1, 11, 2, 0).is_err());
    }

    #[test]
    fn hub_fixed_uniform_has_no_heavy_rows() {
        let m = gen_hub_fixed(2000, 3, 64, 64, 3).unwrap();
        let gf = extract_features(&m, 256);
        assert_eq!(gf.heavy_row_fraction, 0.0);
        assert_eq!(gf.max_degree, 64);
    }
}
