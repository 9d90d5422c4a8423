//! Dense and sparse storage plus the product kernels the oracles are built
//! from. Storage is 0-based; the 1-based boundary lives in [`column`] and in
//! the oracle/file APIs.
//!
//! Every kernel performs a fixed, data-independent number of semiring
//! multiplications (zeros are not skipped), so counted totals are closed
//! forms of the input shapes and supports.

use crate::error::{Error, Result};
use crate::semiring::Semiring;

pub type DenseVector<E> = Vec<E>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy> DenseMatrix<E> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: E) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros<S: Semiring<Elem = E>>(sr: S, rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, sr.zero())
    }

    pub fn identity<S: Semiring<Elem = E>>(sr: S, n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { sr.one() } else { sr.zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> E {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: E) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[E] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<E> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Coordinate-format sparse matrix, entries kept sorted by `(col, row)` so
/// that applying `Pᵀ` streams one output row at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix<E> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, E)>,
}

impl<E: Copy> SparseMatrix<E> {
    /// Builds from 0-based `(row, col, value)` triples in any order.
    /// Rejects out-of-range coordinates, duplicates and stored zeros.
    pub fn new<S: Semiring<Elem = E>>(
        sr: S,
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, E)>,
    ) -> Result<Self> {
        for &(r, c, v) in &entries {
            if r >= rows {
                return Err(Error::IndexOutOfRange {
                    what: "sparse row",
                    index: r + 1,
                    bound: rows,
                });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange {
                    what: "sparse column",
                    index: c + 1,
                    bound: cols,
                });
            }
            if sr.is_zero(v) {
                return Err(Error::ZeroEntry { row: r + 1, col: c + 1 });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (c, r));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::DuplicateEntry {
                row: w[0].0 + 1,
                col: w[0].1 + 1,
            });
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// 0-based `(row, col, value)` sorted by `(col, row)`.
    pub fn entries(&self) -> &[(usize, usize, E)] {
        &self.entries
    }

    /// Sorted distinct columns holding at least one entry.
    pub fn nonzero_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.entries.iter().map(|e| e.1).collect();
        cols.dedup();
        cols
    }

    pub fn check_budget(&self, budget: usize) -> Result<()> {
        if self.nnz() > budget {
            return Err(Error::BudgetExceeded {
                nnz: self.nnz(),
                budget,
            });
        }
        Ok(())
    }

    pub fn to_dense<S: Semiring<Elem = E>>(&self, sr: S) -> DenseMatrix<E> {
        let mut out = DenseMatrix::zeros(sr, self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            out.set(r, c, v);
        }
        out
    }
}

/// `⌈n^τ⌉`, snapping to the nearest integer when `n^τ` is within rounding
/// error of one (so `16^0.5` is 4, not 5).
pub fn nnz_budget(n: usize, tau: f64) -> usize {
    let x = (n as f64).powf(tau);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Whether sparse hints are held to the `⌈n^τ⌉` budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BudgetMode {
    #[default]
    Strict,
    Permissive,
}

/// A matrix whose rows outside `support` are all zero. Support rows are
/// stored densely and may themselves contain zeros: the support is an upper
/// bound and is never re-tightened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSparseMatrix<E> {
    rows: usize,
    cols: usize,
    support: Vec<usize>,
    rowdata: Vec<E>,
}

impl<E: Copy> RowSparseMatrix<E> {
    pub fn new(rows: usize, cols: usize, support: Vec<usize>, rowdata: Vec<E>) -> Result<Self> {
        if rowdata.len() != support.len() * cols {
            return Err(Error::dims("RowSparseMatrix::new", "row data length"));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.last().is_some_and(|&s| s >= rows) {
            return Err(Error::dims("RowSparseMatrix::new", "support must be sorted, unique, in range"));
        }
        Ok(Self {
            rows,
            cols,
            support,
            rowdata,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Dense data of the `t`-th support row.
    pub fn support_row(&self, t: usize) -> &[E] {
        &self.rowdata[t * self.cols..(t + 1) * self.cols]
    }

    pub fn to_dense<S: Semiring<Elem = E>>(&self, sr: S) -> DenseMatrix<E> {
        let mut out = DenseMatrix::zeros(sr, self.rows, self.cols);
        for (t, &r) in self.support.iter().enumerate() {
            for (c, &v) in self.support_row(t).iter().enumerate() {
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Sparse vector with sorted unique indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVector<E> {
    len: usize,
    entries: Vec<(usize, E)>,
}

impl<E: Copy> SparseVector<E> {
    pub fn new<S: Semiring<Elem = E>>(sr: S, len: usize, mut entries: Vec<(usize, E)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateEntry { row: w[0].0 + 1, col: 1 });
            }
        }
        for &(i, v) in &entries {
            if i >= len {
                return Err(Error::IndexOutOfRange {
                    what: "sparse vector",
                    index: i + 1,
                    bound: len,
                });
            }
            if sr.is_zero(v) {
                return Err(Error::ZeroEntry { row: i + 1, col: 1 });
            }
        }
        Ok(Self { len, entries })
    }

    pub fn empty(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, E)] {
        &self.entries
    }

    pub fn to_dense<S: Semiring<Elem = E>>(&self, sr: S) -> DenseVector<E> {
        let mut out = vec![sr.zero(); self.len];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Column `i` (1-based) of `v`.
pub fn column<E: Copy>(v: &DenseMatrix<E>, i: usize) -> Result<DenseVector<E>> {
    if i == 0 || i > v.cols {
        return Err(Error::IndexOutOfRange {
            what: "column",
            index: i,
            bound: v.cols,
        });
    }
    Ok((0..v.rows).map(|r| v.get(r, i - 1)).collect())
}

/// `Pᵀ V`, touching only the columns of `P` that hold entries.
/// Costs exactly `nnz(P) * cols(V)` multiplications.
pub fn transpose_times_dense<S: Semiring>(
    sr: S,
    p: &SparseMatrix<S::Elem>,
    v: &DenseMatrix<S::Elem>,
) -> Result<RowSparseMatrix<S::Elem>> {
    if p.rows != v.rows {
        return Err(Error::dims(
            "transpose_times_dense",
            format!("P is {}x{}, V is {}x{}", p.rows, p.cols, v.rows, v.cols),
        ));
    }
    let width = v.cols;
    let mut support = Vec::new();
    let mut rowdata = Vec::new();
    let mut current: Option<usize> = None;
    for &(i, r, val) in &p.entries {
        if current != Some(r) {
            current = Some(r);
            support.push(r);
            rowdata.extend(std::iter::repeat_n(sr.zero(), width));
        }
        let base = rowdata.len() - width;
        for (slot, &x) in rowdata[base..].iter_mut().zip(v.row(i)) {
            *slot = sr.add(*slot, sr.mul(val, x)?)?;
        }
    }
    RowSparseMatrix::new(p.cols, width, support, rowdata)
}

/// `Pᵀ v`. Costs exactly `nnz(P)` multiplications; zero sums are dropped.
pub fn transpose_times_vector<S: Semiring>(
    sr: S,
    p: &SparseMatrix<S::Elem>,
    v: &[S::Elem],
) -> Result<SparseVector<S::Elem>> {
    if p.rows != v.len() {
        return Err(Error::dims(
            "transpose_times_vector",
            format!("P has {} rows, v has length {}", p.rows, v.len()),
        ));
    }
    let mut out = Vec::new();
    let mut iter = p.entries.iter().peekable();
    while let Some(&(i, r, val)) = iter.next() {
        let mut acc = sr.mul(val, v[i])?;
        while let Some(&&(i2, r2, val2)) = iter.peek() {
            if r2 != r {
                break;
            }
            acc = sr.add(acc, sr.mul(val2, v[i2])?)?;
            iter.next();
        }
        if !sr.is_zero(acc) {
            out.push((r, acc));
        }
    }
    Ok(SparseVector {
        len: p.cols,
        entries: out,
    })
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[x]);
                x += 1;
                y += 1;
            }
        }
    }
    out
}

/// Entrywise product of row-sparse matrices. The result's support is the
/// intersection of the term supports; each kept row costs
/// `(terms - 1) * cols` multiplications.
pub fn hadamard_rowsparse<S: Semiring>(
    sr: S,
    terms: &[RowSparseMatrix<S::Elem>],
) -> Result<RowSparseMatrix<S::Elem>> {
    let first = terms.first().ok_or(Error::EmptyTerms("hadamard_rowsparse"))?;
    if let Some(t) = terms.iter().find(|t| (t.rows, t.cols) != (first.rows, first.cols)) {
        return Err(Error::dims(
            "hadamard_rowsparse",
            format!("{}x{} vs {}x{}", first.rows, first.cols, t.rows, t.cols),
        ));
    }
    let mut support = first.support.clone();
    for t in &terms[1..] {
        support = intersect_sorted(&support, &t.support);
    }
    // Position of each kept row inside every term's support list.
    let mut cursors = vec![0usize; terms.len()];
    let mut rowdata = Vec::with_capacity(support.len() * first.cols);
    for &r in &support {
        for (term, cur) in terms.iter().zip(cursors.iter_mut()) {
            while term.support[*cur] != r {
                *cur += 1;
            }
        }
        let base = rowdata.len();
        rowdata.extend_from_slice(first.support_row(cursors[0]));
        for (term, &cur) in terms.iter().zip(&cursors).skip(1) {
            for (slot, &x) in rowdata[base..].iter_mut().zip(term.support_row(cur)) {
                *slot = sr.mul(*slot, x)?;
            }
        }
    }
    RowSparseMatrix::new(first.rows, first.cols, support, rowdata)
}

/// Entrywise product of sparse vectors over the intersection of their index
/// sets; costs `(terms - 1) * |intersection|` multiplications.
pub fn hadamard_sparsevec<S: Semiring>(
    sr: S,
    terms: &[SparseVector<S::Elem>],
) -> Result<SparseVector<S::Elem>> {
    let first = terms.first().ok_or(Error::EmptyTerms("hadamard_sparsevec"))?;
    if let Some(t) = terms.iter().find(|t| t.len != first.len) {
        return Err(Error::dims(
            "hadamard_sparsevec",
            format!("lengths {} and {}", first.len, t.len),
        ));
    }
    let mut idx: Vec<usize> = first.entries.iter().map(|e| e.0).collect();
    for t in &terms[1..] {
        let other: Vec<usize> = t.entries.iter().map(|e| e.0).collect();
        idx = intersect_sorted(&idx, &other);
    }
    let mut cursors = vec![0usize; terms.len()];
    let mut out = Vec::with_capacity(idx.len());
    for &i in &idx {
        let mut acc = None;
        for (term, cur) in terms.iter().zip(cursors.iter_mut()) {
            while term.entries[*cur].0 != i {
                *cur += 1;
            }
            let v = term.entries[*cur].1;
            acc = Some(match acc {
                None => v,
                Some(a) => sr.mul(a, v)?,
            });
        }
        let acc = acc.expect("at least one term");
        if !sr.is_zero(acc) {
            out.push((i, acc));
        }
    }
    Ok(SparseVector {
        len: first.len,
        entries: out,
    })
}

/// `M H` reading only the support rows of `H`:
/// `rows(M) * |support(H)| * cols(H)` multiplications.
pub fn dense_times_rowsparse<S: Semiring>(
    sr: S,
    m: &DenseMatrix<S::Elem>,
    h: &RowSparseMatrix<S::Elem>,
) -> Result<DenseMatrix<S::Elem>> {
    if m.cols != h.rows {
        return Err(Error::dims(
            "dense_times_rowsparse",
            format!("M is {}x{}, H is {}x{}", m.rows, m.cols, h.rows, h.cols),
        ));
    }
    let mut out = DenseMatrix::zeros(sr, m.rows, h.cols);
    for r in 0..m.rows {
        let out_row = &mut out.data[r * h.cols..(r + 1) * h.cols];
        for (t, &s) in h.support.iter().enumerate() {
            let coef = m.get(r, s);
            for (slot, &x) in out_row.iter_mut().zip(h.support_row(t)) {
                *slot = sr.add(*slot, sr.mul(coef, x)?)?;
            }
        }
    }
    Ok(out)
}

/// `M u` reading only the indices of `u`: `rows(M) * nnz(u)` multiplications.
pub fn dense_times_sparsevec<S: Semiring>(
    sr: S,
    m: &DenseMatrix<S::Elem>,
    u: &SparseVector<S::Elem>,
) -> Result<DenseVector<S::Elem>> {
    if m.cols != u.len {
        return Err(Error::dims(
            "dense_times_sparsevec",
            format!("M is {}x{}, u has length {}", m.rows, m.cols, u.len),
        ));
    }
    (0..m.rows)
        .map(|r| {
            u.entries.iter().try_fold(sr.zero(), |acc, &(s, v)| sr.add(acc, sr.mul(m.get(r, s), v)?))
        })
        .collect()
}

/// Schoolbook `A B`: `rows(A) * cols(A) * cols(B)` multiplications.
pub fn matmul_dense<S: Semiring>(
    sr: S,
    a: &DenseMatrix<S::Elem>,
    b: &DenseMatrix<S::Elem>,
) -> Result<DenseMatrix<S::Elem>> {
    if a.cols != b.rows {
        return Err(Error::dims(
            "matmul_dense",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = DenseMatrix::zeros(sr, a.rows, b.cols);
    for r in 0..a.rows {
        let out_row = &mut out.data[r * b.cols..(r + 1) * b.cols];
        for s in 0..a.cols {
            let coef = a.get(r, s);
            for (slot, &x) in out_row.iter_mut().zip(b.row(s)) {
                *slot = sr.add(*slot, sr.mul(coef, x)?)?;
            }
        }
    }
    Ok(out)
}

/// Entrywise product of equally shaped dense matrices.
pub fn hadamard_dense<S: Semiring>(
    sr: S,
    a: &DenseMatrix<S::Elem>,
    b: &DenseMatrix<S::Elem>,
) -> Result<DenseMatrix<S::Elem>> {
    if a.shape() != b.shape() {
        return Err(Error::dims("hadamard_dense", "shape mismatch"));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| sr.mul(x, y))
        .collect::<Result<Vec<_>>>()?;
    DenseMatrix::from_vec(a.rows, a.cols, data)
}
