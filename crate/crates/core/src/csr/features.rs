use super::CsrMatrix;

/// Structural summary of a CSR matrix used by the cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures {
    pub n_rows: usize,
    pub n_cols: usize,
    pub nnz: usize,
    pub p25: usize,
    pub p50: usize,
    pub p75: usize,
    pub p90: usize,
    pub p99: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    /// Threshold at which `heavy_row_fraction` was measured.
    pub hub_threshold: usize,
    pub heavy_row_fraction: f64,
    pub empty_row_fraction: f64,
}

/// Nearest-rank percentile of an ascending slice, `0` when empty.
fn nearest_rank(sorted: &[usize], percent: usize) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Degree statistics of `m`; a row is heavy when its degree is at least
/// `hub_threshold`.
pub fn extract_features(m: &CsrMatrix, hub_threshold: usize) -> GraphFeatures {
    let mut degrees: Vec<usize> = m.degrees().collect();
    degrees.sort_unstable();
    let n = degrees.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let heavy = degrees.iter().filter(|&&d| d >= hub_threshold).count();
    let empty = degrees.iter().take_while(|&&d| d == 0).count();
    GraphFeatures {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        nnz: m.nnz(),
        p25: nearest_rank(&degrees, 25),
        p50: nearest_rank(&degrees, 50),
        p75: nearest_rank(&degrees, 75),
        p90: nearest_rank(&degrees, 90),
        p99: nearest_rank(&degrees, 99),
        max_degree: degrees.last().copied().unwrap_or(0),
        mean_degree: frac(m.nnz()),
        hub_threshold,
        heavy_row_fraction: frac(heavy),
        empty_row_fraction: frac(empty),
    }
}

impl GraphFeatures {
    pub fn quantiles(&self) -> [usize; 6] {
        [
            self.p25,
            self.p50,
            self.p75,
            self.p90,
            self.p99,
            self.max_degree,
        ]
    }
}
