use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Alignment every freshly allocated matrix gets, in bytes.
const BASE_ALIGN: usize = 64;
const PAD: usize = BASE_ALIGN / std::mem::size_of::<f32>();

/// Row-major `n_rows x n_cols` block of `f32`, rows packed with no padding.
///
/// The first element sits at a 64-byte boundary unless the matrix was built
/// with [`DenseMatrix::from_vec_offset`], which exists so that the 16-byte
/// alignment gate of the vectorized kernels can be exercised.
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    storage: Vec<f32>,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dense data length {found} does not match {n_rows} x {n_cols}")]
pub struct ShapeError {
    pub n_rows: usize,
    pub n_cols: usize,
    pub found: usize,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::alloc(n_rows, n_cols, 0, |_| {})
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f32>) -> Result<Self, ShapeError> {
        Self::from_vec_offset(n_rows, n_cols, data, 0)
    }

    /// Place the data `elem_offset` floats past a 64-byte boundary, so that
    /// the base alignment becomes `4 << elem_offset.trailing_zeros()` bytes.
    pub fn from_vec_offset(
        n_rows: usize,
        n_cols: usize,
        data: Vec<f32>,
        elem_offset: usize,
    ) -> Result<Self, ShapeError> {
        if data.len() != n_rows * n_cols {
            return Err(ShapeError {
                n_rows,
                n_cols,
                found: data.len(),
            });
        }
        Ok(Self::alloc(n_rows, n_cols, elem_offset % PAD, |dst| {
            dst.copy_from_slice(&data)
        }))
    }

    /// Uniform entries in `[-1, 1)` from a seeded ChaCha stream.
    pub fn random(n_rows: usize, n_cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::alloc(n_rows, n_cols, 0, |dst| {
            for x in dst {
                *x = rng.random_range(-1.0f32..1.0);
            }
        })
    }

    fn alloc(
        n_rows: usize,
        n_cols: usize,
        elem_offset: usize,
        fill: impl FnOnce(&mut [f32]),
    ) -> Self {
        let len = n_rows * n_cols;
        let storage = vec![0.0f32; len + 2 * PAD];
        let addr = storage.as_ptr() as usize;
        let to_boundary = (BASE_ALIGN - addr % BASE_ALIGN) % BASE_ALIGN;
        debug_assert_eq!(to_boundary % std::mem::size_of::<f32>(), 0);
        let offset = to_boundary / std::mem::size_of::<f32>() + elem_offset;
        let mut m = Self {
            n_rows,
            n_cols,
            storage,
            offset,
        };
        fill(m.as_mut_slice());
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Feature width F.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.storage[self.offset..self.offset + self.n_rows * self.n_cols]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        let len = self.n_rows * self.n_cols;
        &mut self.storage[self.offset..self.offset + len]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.as_slice()[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        let f = self.n_cols;
        &mut self.as_mut_slice()[i * f..(i + 1) * f]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.as_slice()[i * self.n_cols + j]
    }

    /// Largest power of two (up to 64) dividing the address of the first element.
    pub fn base_alignment(&self) -> usize {
        let addr = self.as_slice().as_ptr() as usize;
        if addr == 0 {
            return BASE_ALIGN;
        }
        (1usize << addr.trailing_zeros()).min(BASE_ALIGN)
    }

    /// Rows `rows[k]` of `self`, in that order.
    pub fn gather_rows(&self, rows: &[usize]) -> Self {
        let f = self.n_cols;
        Self::alloc(rows.len(), f, 0, |dst| {
            for (k, &r) in rows.iter().enumerate() {
                dst[k * f..(k + 1) * f].copy_from_slice(self.row(r));
            }
        })
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.as_slice().to_vec()
    }

    pub(crate) fn elem_offset(&self) -> usize {
        let addr = self.as_slice().as_ptr() as usize;
        (addr % BASE_ALIGN) / std::mem::size_of::<f32>()
    }
}

impl Clone for DenseMatrix {
    fn clone(&self) -> Self {
        let src = self.as_slice();
        Self::alloc(self.n_rows, self.n_cols, self.elem_offset(), |dst| {
            dst.copy_from_slice(src)
        })
    }
}

impl PartialEq for DenseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("n_rows", &self.n_rows)
            .field("n_cols", &self.n_cols)
            .field("base_alignment", &self.base_alignment())
            .finish_non_exhaustive()
    }
}
