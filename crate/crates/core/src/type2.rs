//! Type-II oracle: slices of `P(V_1, …, V_k)` for a diagonal tensor `P`.
//!
//! With `P` diagonal, entry `(i_1, …, i_k)` of `P(V_1, …, V_k)` is
//! `Σ_{j ∈ diag} P_j ∏_ℓ (V_ℓ)_{i_ℓ, j}`. Restricting every `V_ℓ` to the
//! diagonal's columns gives factors `U_ℓ`; folding the weights `P_j` (and,
//! for a slice, the fixed rows `(V_ℓt)_{i_t, *}`) into the first free factor
//! turns the tensor into the matrix view `W_1 W_2ᵀ`, with `W_1`, `W_2` the
//! Khatri-Rao products of the first `⌈m/2⌉` and remaining free factors.
//!
//! Method 1 builds the full view in phase 2 and slices it per query.
//! Method 2 keeps `P` and assembles each slice's view in phase 3.

use crate::error::{Error, Result};
use crate::khatri_rao::{flat_index, kr_materialize, unflatten, FactorList, DEFAULT_CAP};
use crate::matrix::{matmul_dense, nnz_budget, BudgetMode, DenseMatrix};
use crate::semiring::{Counted, OpCounter, Semiring};
use crate::type1::PhaseCosts;
use crate::{Phase, Strategy};

/// Order-`k`, dimension-`d` tensor nonzero only on `(j, …, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalTensor<E> {
    order: usize,
    dim: usize,
    diag: Vec<(usize, E)>,
}

impl<E: Copy> DiagonalTensor<E> {
    /// `diag` holds 0-based `(j, value)` pairs in any order.
    pub fn new<S: Semiring<Elem = E>>(sr: S, order: usize, dim: usize, mut diag: Vec<(usize, E)>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("tensor order must be positive".into()));
        }
        diag.sort_by_key(|e| e.0);
        for w in diag.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateEntry {
                    row: w[0].0 + 1,
                    col: w[0].0 + 1,
                });
            }
        }
        for &(j, v) in &diag {
            if j >= dim {
                return Err(Error::IndexOutOfRange {
                    what: "diagonal",
                    index: j + 1,
                    bound: dim,
                });
            }
            if sr.is_zero(v) {
                return Err(Error::ZeroEntry { row: j + 1, col: j + 1 });
            }
        }
        Ok(Self { order, dim, diag })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.diag.len()
    }

    /// Sorted 0-based `(j, value)` pairs.
    pub fn diag(&self) -> &[(usize, E)] {
        &self.diag
    }
}

/// Fixed `(direction, index)` pairs, both 1-based. Directions must be
/// distinct; indices may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SliceQuery {
    pairs: Vec<(usize, usize)>,
}

impl SliceQuery {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn full() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn s(&self) -> usize {
        self.pairs.len()
    }

    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        let mut seen = vec![false; k + 1];
        for &(dir, i) in &self.pairs {
            if dir == 0 || dir > k {
                return Err(Error::InvalidQuery(format!("direction {dir} outside 1..={k}")));
            }
            if seen[dir] {
                return Err(Error::InvalidQuery(format!("direction {dir} fixed twice")));
            }
            seen[dir] = true;
            if i == 0 || i > n {
                return Err(Error::InvalidQuery(format!("index {i} outside 1..={n}")));
            }
        }
        Ok(())
    }

    /// Index fixed on `dir`, if any.
    pub fn fixed(&self, dir: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == dir).map(|p| p.1)
    }

    /// Unfixed directions of an order-`k` tensor, ascending.
    pub fn free_dirs(&self, k: usize) -> Vec<usize> {
        (1..=k).filter(|&d| self.fixed(d).is_none()).collect()
    }
}

/// An order-`m` tensor flattened to `n^{|row_dirs|} × n^{|col_dirs|}`.
///
/// `row_dirs` are the first `⌈m/2⌉` free directions (ascending), `col_dirs`
/// the rest; rows and columns are addressed by [`flat_index`] over the
/// respective coordinate tuples. With no free directions the view is `1 × 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorMatrixView<E> {
    n: usize,
    row_dirs: Vec<usize>,
    col_dirs: Vec<usize>,
    data: DenseMatrix<E>,
}

/// Splits ascending free directions into row and column groups.
pub fn split_dirs(free: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let rows = free.len().div_ceil(2);
    (free[..rows].to_vec(), free[rows..].to_vec())
}

pub(crate) fn checked_pow(n: usize, e: usize) -> Option<usize> {
    (0..e).try_fold(1usize, |acc, _| acc.checked_mul(n))
}

impl<E: Copy> TensorMatrixView<E> {
    pub fn new(n: usize, row_dirs: Vec<usize>, col_dirs: Vec<usize>, data: DenseMatrix<E>) -> Result<Self> {
        let rows = checked_pow(n, row_dirs.len());
        let cols = checked_pow(n, col_dirs.len());
        if rows != Some(data.rows()) || cols != Some(data.cols()) {
            return Err(Error::dims(
                "TensorMatrixView::new",
                format!(
                    "{}x{} data for {} row and {} column directions of size {n}",
                    data.rows(),
                    data.cols(),
                    row_dirs.len(),
                    col_dirs.len()
                ),
            ));
        }
        Ok(Self {
            n,
            row_dirs,
            col_dirs,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_dirs(&self) -> &[usize] {
        &self.row_dirs
    }

    pub fn col_dirs(&self) -> &[usize] {
        &self.col_dirs
    }

    pub fn data(&self) -> &DenseMatrix<E> {
        &self.data
    }

    /// Free directions covered by the view, ascending.
    pub fn dirs(&self) -> Vec<usize> {
        self.row_dirs.iter().chain(&self.col_dirs).copied().collect()
    }

    /// Entry at 1-based coordinates listed in [`Self::dirs`] order.
    pub fn get(&self, coords: &[usize]) -> Result<E> {
        if coords.len() != self.row_dirs.len() + self.col_dirs.len() {
            return Err(Error::dims("TensorMatrixView::get", "coordinate count"));
        }
        let (rc, cc) = coords.split_at(self.row_dirs.len());
        Ok(self.data.get(self.flat_of(rc)? - 1, self.flat_of(cc)? - 1))
    }

    fn flat_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.is_empty() {
            Ok(1)
        } else {
            flat_index(coords, &vec![self.n; coords.len()])
        }
    }
}

/// Diagonal-column factors for the free directions of a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedFactors<E> {
    /// Free directions, ascending.
    pub free_dirs: Vec<usize>,
    /// One `n × |diag|` factor per free direction; the first carries the
    /// folded weights.
    pub factors: Vec<DenseMatrix<E>>,
    /// `q_j = P_j ∏_t (V_ℓt)_{i_t, j}` for each diagonal position.
    pub weights: Vec<E>,
}

/// Restricts each `V_ℓ` to the diagonal's columns and folds the diagonal
/// values plus every fixed-direction row into the first free factor.
///
/// Costs `s·|diag|` multiplications for the weights and `n·|diag|` for the
/// rescaling (none when every direction is fixed).
pub fn select_factors<S: Semiring>(
    sr: S,
    vs: &[DenseMatrix<S::Elem>],
    p: &DiagonalTensor<S::Elem>,
    fixed: &SliceQuery,
) -> Result<SelectedFactors<S::Elem>> {
    let k = vs.len();
    let n = vs.first().map_or(0, DenseMatrix::rows);
    if p.order != k {
        return Err(Error::dims("select_factors", format!("order-{} tensor for k = {k}", p.order)));
    }
    if let Some(v) = vs.iter().find(|v| v.shape() != (n, p.dim)) {
        return Err(Error::dims(
            "select_factors",
            format!("V is {}x{}, expected {n}x{}", v.rows(), v.cols(), p.dim),
        ));
    }
    fixed.validate(k, n)?;

    let mut weights = Vec::with_capacity(p.diag.len());
    for &(j, value) in &p.diag {
        let mut q = value;
        for &(dir, i) in &fixed.pairs {
            q = sr.mul(q, vs[dir - 1].get(i - 1, j))?;
        }
        weights.push(q);
    }

    let free_dirs = fixed.free_dirs(k);
    let mut factors = Vec::with_capacity(free_dirs.len());
    for (t, &dir) in free_dirs.iter().enumerate() {
        let v = &vs[dir - 1];
        let u = if t == 0 {
            let mut data = Vec::with_capacity(n * p.diag.len());
            for r in 0..n {
                for (&(j, _), &q) in p.diag.iter().zip(&weights) {
                    data.push(sr.mul(v.get(r, j), q)?);
                }
            }
            DenseMatrix::from_vec(n, p.diag.len(), data)?
        } else {
            DenseMatrix::from_fn(n, p.diag.len(), |r, c| v.get(r, p.diag[c].0))
        };
        factors.push(u);
    }
    Ok(SelectedFactors {
        free_dirs,
        factors,
        weights,
    })
}

/// Builds `W_1 W_2ᵀ` from selected factors.
pub fn assemble_view<S: Semiring>(
    sr: S,
    n: usize,
    sel: &SelectedFactors<S::Elem>,
    cap: usize,
) -> Result<TensorMatrixView<S::Elem>> {
    let (row_dirs, col_dirs) = split_dirs(&sel.free_dirs);
    if sel.free_dirs.is_empty() {
        let total = sel.weights.iter().try_fold(sr.zero(), |acc, &q| sr.add(acc, q))?;
        return TensorMatrixView::new(n, row_dirs, col_dirs, DenseMatrix::filled(1, 1, total));
    }
    let rows = checked_pow(n, row_dirs.len()).filter(|&r| r <= cap);
    let cols = checked_pow(n, col_dirs.len()).filter(|&c| c <= cap);
    let (Some(rows), Some(cols)) = (rows, cols) else {
        let worst = checked_pow(n, row_dirs.len()).unwrap_or(usize::MAX);
        return Err(Error::CapExceeded { rows: worst, cap });
    };
    if sel.weights.is_empty() {
        return TensorMatrixView::new(n, row_dirs, col_dirs, DenseMatrix::zeros(sr, rows, cols));
    }
    let (left, right) = sel.factors.split_at(row_dirs.len());
    let w1 = kr_materialize(sr, &FactorList::new(left.to_vec())?, cap)?;
    let w2 = if right.is_empty() {
        DenseMatrix::filled(1, sel.weights.len(), sr.one())
    } else {
        kr_materialize(sr, &FactorList::new(right.to_vec())?, cap)?
    };
    let data = matmul_dense(sr, &w1, &w2.transpose())?;
    TensorMatrixView::new(n, row_dirs, col_dirs, data)
}

/// Reads the slice `fixed` out of a full (`s = 0`) view. No semiring work.
pub fn slice_view<E: Copy>(full: &TensorMatrixView<E>, fixed: &SliceQuery) -> Result<TensorMatrixView<E>> {
    let k = full.row_dirs.len() + full.col_dirs.len();
    let n = full.n;
    fixed.validate(k, n)?;
    let free = fixed.free_dirs(k);
    let (row_dirs, col_dirs) = split_dirs(&free);
    let rows = checked_pow(n, row_dirs.len()).ok_or(Error::CapExceeded { rows: usize::MAX, cap: usize::MAX })?;
    let cols = checked_pow(n, col_dirs.len()).ok_or(Error::CapExceeded { rows: usize::MAX, cap: usize::MAX })?;
    let mut coords = vec![0usize; k];
    for &(dir, i) in &fixed.pairs {
        coords[dir - 1] = i;
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in 1..=rows {
        if !row_dirs.is_empty() {
            for (&dir, i) in row_dirs.iter().zip(unflatten(r, &vec![n; row_dirs.len()])?) {
                coords[dir - 1] = i;
            }
        }
        for c in 1..=cols {
            if !col_dirs.is_empty() {
                for (&dir, i) in col_dirs.iter().zip(unflatten(c, &vec![n; col_dirs.len()])?) {
                    coords[dir - 1] = i;
                }
            }
            data.push(full.get(&coords)?);
        }
    }
    TensorMatrixView::new(n, row_dirs, col_dirs, DenseMatrix::from_vec(rows, cols, data)?)
}

/// A complete Type-II input: phase-1 matrices and the phase-2 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Type2Instance<E> {
    pub tau: f64,
    pub vs: Vec<DenseMatrix<E>>,
    pub p: DiagonalTensor<E>,
}

impl<E: Copy> Type2Instance<E> {
    pub fn n(&self) -> usize {
        self.vs[0].rows()
    }

    pub fn d(&self) -> usize {
        self.p.dim()
    }

    pub fn k(&self) -> usize {
        self.vs.len()
    }

    /// Runs phases 1 and 2 with the given strategy.
    pub fn oracle<S: Semiring<Elem = E>>(&self, sr: S, strategy: Strategy, mode: BudgetMode) -> Result<Type2Oracle<S>> {
        let mut o = Type2Oracle::preprocess(sr, self.vs.clone(), self.tau, strategy)?.with_budget_mode(mode);
        o.hint(self.p.clone())?;
        Ok(o)
    }
}

#[derive(Debug, Clone)]
enum HintState<E> {
    None,
    View(TensorMatrixView<E>),
    Stored(DiagonalTensor<E>),
}

#[derive(Debug, Clone)]
pub struct Type2Oracle<S: Semiring> {
    sr: S,
    n: usize,
    d: usize,
    tau: f64,
    strategy: Strategy,
    budget_mode: BudgetMode,
    cap: usize,
    vs: Vec<DenseMatrix<S::Elem>>,
    state: HintState<S::Elem>,
    costs: PhaseCosts,
}

impl<S: Semiring> Type2Oracle<S> {
    /// Phase 1: validates `k ≥ 1` matrices of a common `n × d` shape.
    pub fn preprocess(sr: S, vs: Vec<DenseMatrix<S::Elem>>, tau: f64, strategy: Strategy) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let first = vs
            .first()
            .ok_or_else(|| Error::InvalidParameter("k must be a positive integer".into()))?;
        let (n, d) = first.shape();
        if n == 0 || d == 0 {
            return Err(Error::dims("t2_preprocess", "V matrices must be nonempty"));
        }
        if let Some((j, v)) = vs.iter().enumerate().find(|(_, v)| v.shape() != (n, d)) {
            return Err(Error::dims(
                "t2_preprocess",
                format!("V_{} is {}x{}, expected {n}x{d}", j + 1, v.rows(), v.cols()),
            ));
        }
        Ok(Self {
            sr,
            n,
            d,
            tau,
            strategy,
            budget_mode: BudgetMode::Strict,
            cap: DEFAULT_CAP,
            vs,
            state: HintState::None,
            costs: PhaseCosts::default(),
        })
    }

    pub fn with_budget_mode(mut self, mode: BudgetMode) -> Self {
        self.budget_mode = mode;
        self
    }

    /// Overrides the materialization cap (rows of `W_1`/`W_2`).
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.vs.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Strict-mode bound on `|diag|`: `min(⌈n^τ⌉, d)`.
    pub fn budget(&self) -> usize {
        nnz_budget(self.n, self.tau).min(self.d)
    }

    pub fn phase(&self) -> Phase {
        match self.state {
            HintState::None => Phase::Preprocessed,
            _ => Phase::Hinted,
        }
    }

    pub fn costs(&self) -> PhaseCosts {
        self.costs
    }

    /// Method 1's full view, once hinted.
    pub fn stored_view(&self) -> Option<&TensorMatrixView<S::Elem>> {
        match &self.state {
            HintState::View(v) => Some(v),
            _ => None,
        }
    }

    pub fn hint(&mut self, p: DiagonalTensor<S::Elem>) -> Result<()> {
        self.hint_counted(p, &OpCounter::new())
    }

    pub fn hint_counted(&mut self, p: DiagonalTensor<S::Elem>, counter: &OpCounter) -> Result<()> {
        if self.phase() != Phase::Preprocessed {
            return Err(Error::WrongPhase {
                op: "t2_hint",
                phase: self.phase().as_str(),
            });
        }
        if p.order != self.k() || p.dim != self.d {
            return Err(Error::dims(
                "t2_hint",
                format!(
                    "order-{} dimension-{} tensor for k = {}, d = {}",
                    p.order,
                    p.dim,
                    self.k(),
                    self.d
                ),
            ));
        }
        if self.budget_mode == BudgetMode::Strict && p.nnz() > self.budget() {
            return Err(Error::BudgetExceeded {
                nnz: p.nnz(),
                budget: self.budget(),
            });
        }
        let before = counter.snapshot();
        self.state = match self.strategy {
            Strategy::Method1 => {
                let sr = Counted::new(self.sr, counter);
                let sel = select_factors(sr, &self.vs, &p, &SliceQuery::full())?;
                HintState::View(assemble_view(sr, self.n, &sel, self.cap)?)
            }
            Strategy::Method2 => HintState::Stored(p),
        };
        self.costs.hint = counter.snapshot().since(before);
        Ok(())
    }

    pub fn query(&self, q: &SliceQuery) -> Result<TensorMatrixView<S::Elem>> {
        self.query_counted(q, &OpCounter::new())
    }

    /// Phase 3, tallying work on `counter`.
    pub fn query_counted(&self, q: &SliceQuery, counter: &OpCounter) -> Result<TensorMatrixView<S::Elem>> {
        q.validate(self.k(), self.n)?;
        match &self.state {
            HintState::None => Err(Error::WrongPhase {
                op: "t2_query",
                phase: Phase::Preprocessed.as_str(),
            }),
            HintState::View(full) => slice_view(full, q),
            HintState::Stored(p) => {
                let sr = Counted::new(self.sr, counter);
                let sel = select_factors(sr, &self.vs, p, q)?;
                assemble_view(sr, self.n, &sel, self.cap)
            }
        }
    }

}
