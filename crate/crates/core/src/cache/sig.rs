use crate::csr::CsrMatrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv1a(u64);

impl Fnv1a {
    #[inline]
    fn bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }
}

/// Structural hash of a CSR matrix: 64-bit FNV-1a over the little-endian
/// encoding of `n_rows`, `n_cols`, `nnz` (as u64), `rowptr` (u64 each) and
/// `colind` (u32 each). Values do not participate.
pub fn graph_sig(m: &CsrMatrix) -> u64 {
    let mut h = Fnv1a(FNV_OFFSET);
    for x in [m.n_rows(), m.n_cols(), m.nnz()] {
        h.bytes(&(x as u64).to_le_bytes());
    }
    for &p in m.rowptr() {
        h.bytes(&(p as u64).to_le_bytes());
    }
    for &c in m.colind() {
        h.bytes(&c.to_le_bytes());
    }
    h.0
}
