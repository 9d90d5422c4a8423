//! Small self-contained generator for unit tests, independent of `genrand`.

use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::semiring::{Element, Semiring};

pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Random element: booleans uniform, naturals in 0..=3.
pub fn rand_elem<S: Semiring>(sr: S, rng: &mut SplitMix) -> S::Elem {
    let raw = if sr.add_idempotent() { rng.below(2) } else { rng.below(4) };
    S::Elem::from_u64(raw).unwrap()
}

pub fn rand_nonzero<S: Semiring>(sr: S, rng: &mut SplitMix) -> S::Elem {
    let raw = if sr.add_idempotent() { 1 } else { 1 + rng.below(3) };
    S::Elem::from_u64(raw).unwrap()
}

pub fn rand_dense<S: Semiring>(sr: S, rng: &mut SplitMix, rows: usize, cols: usize) -> DenseMatrix<S::Elem> {
    DenseMatrix::from_fn(rows, cols, |_, _| rand_elem(sr, rng))
}

/// Sparse matrix with `nnz` (clamped) distinct random positions.
pub fn rand_sparse<S: Semiring>(
    sr: S,
    rng: &mut SplitMix,
    rows: usize,
    cols: usize,
    nnz: usize,
) -> SparseMatrix<S::Elem> {
    let mut cells: Vec<usize> = (0..rows * cols).collect();
    let nnz = nnz.min(cells.len());
    for t in 0..nnz {
        let j = t + rng.below((cells.len() - t) as u64) as usize;
        cells.swap(t, j);
    }
    let entries = cells[..nnz].iter().map(|&x| (x / cols, x % cols, rand_nonzero(sr, rng))).collect();
    SparseMatrix::new(sr, rows, cols, entries).unwrap()
}
