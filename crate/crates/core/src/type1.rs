//! Type-I oracle: answer `M (⊘_j P_j)ᵀ (⊘_j V_j)_{*,i}`.
//!
//! Both strategies rely on `(⊘P_j)ᵀ(⊘V_j) = ⊙_j (P_jᵀ V_j)`, so nothing of
//! size `n^k` is ever built:
//!
//! * Method 1 computes `R = M (⊙_j P_jᵀ V_j)` in phase 2 and answers a query
//!   by copying column `i` of `R`.
//! * Method 2 only keeps the `P_j` in phase 2; a query computes
//!   `M (⊙_j P_jᵀ v_j)` with `v_j` the `i`-th column of `V_j`.
//!
//! Queries are repeatable: after the hint, any number of columns may be
//! asked for.

use crate::error::{Error, Result};
use crate::matrix::{
    column, dense_times_rowsparse, dense_times_sparsevec, hadamard_rowsparse, hadamard_sparsevec, nnz_budget,
    transpose_times_dense, transpose_times_vector, BudgetMode, DenseMatrix, DenseVector, SparseMatrix,
};
use crate::semiring::{Counted, OpCounter, OpTally, Semiring};
use crate::{Phase, Strategy};

/// Phase-1 and phase-2 costs recorded by an oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseCosts {
    pub preprocess: OpTally,
    pub hint: OpTally,
}

/// A query answer plus the size of the sparse intermediate it went through:
/// `|support(⊙_j P_jᵀV_j)|` for Method 1, `|⊙_j P_jᵀv_j|` for Method 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type1Answer<E> {
    pub values: DenseVector<E>,
    pub support_len: usize,
}

/// A complete Type-I input: phase-1 matrices and the phase-2 hint.
#[derive(Debug, Clone, PartialEq)]
pub struct Type1Instance<E> {
    pub tau: f64,
    pub m: DenseMatrix<E>,
    pub vs: Vec<DenseMatrix<E>>,
    pub ps: Vec<SparseMatrix<E>>,
}

impl<E: Copy> Type1Instance<E> {
    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn k(&self) -> usize {
        self.vs.len()
    }

    /// Runs phases 1 and 2 with the given strategy.
    pub fn oracle<S: Semiring<Elem = E>>(&self, sr: S, strategy: Strategy, mode: BudgetMode) -> Result<Type1Oracle<S>> {
        let mut o = Type1Oracle::preprocess(sr, self.m.clone(), self.vs.clone(), self.tau, strategy)?.with_budget_mode(mode);
        o.hint(self.ps.clone())?;
        Ok(o)
    }
}

#[derive(Debug, Clone)]
enum HintState<E> {
    None,
    Answer {
        product: DenseMatrix<E>,
        support_len: usize,
    },
    Stored(Vec<SparseMatrix<E>>),
}

#[derive(Debug, Clone)]
pub struct Type1Oracle<S: Semiring> {
    sr: S,
    n: usize,
    tau: f64,
    strategy: Strategy,
    budget_mode: BudgetMode,
    m: DenseMatrix<S::Elem>,
    vs: Vec<DenseMatrix<S::Elem>>,
    state: HintState<S::Elem>,
    costs: PhaseCosts,
}

pub(crate) fn check_tau_unit(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {tau}")));
    }
    Ok(())
}

impl<S: Semiring> Type1Oracle<S> {
    /// Phase 1. Validates shapes and stores the inputs; no semiring work.
    pub fn preprocess(
        sr: S,
        m: DenseMatrix<S::Elem>,
        vs: Vec<DenseMatrix<S::Elem>>,
        tau: f64,
        strategy: Strategy,
    ) -> Result<Self> {
        check_tau_unit(tau)?;
        if vs.is_empty() {
            return Err(Error::InvalidParameter("k must be a positive integer".into()));
        }
        let n = m.rows();
        if n == 0 || m.cols() != n {
            return Err(Error::dims("t1_preprocess", format!("M is {}x{}, expected square n >= 1", m.rows(), m.cols())));
        }
        if let Some((j, v)) = vs.iter().enumerate().find(|(_, v)| v.shape() != (n, n)) {
            return Err(Error::dims(
                "t1_preprocess",
                format!("V_{} is {}x{}, expected {n}x{n}", j + 1, v.rows(), v.cols()),
            ));
        }
        Ok(Self {
            sr,
            n,
            tau,
            strategy,
            budget_mode: BudgetMode::Strict,
            m,
            vs,
            state: HintState::None,
            costs: PhaseCosts::default(),
        })
    }

    pub fn with_budget_mode(mut self, mode: BudgetMode) -> Self {
        self.budget_mode = mode;
        self
    }

    pub fn n(&self) -> usize {
        self.n
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

    pub fn budget(&self) -> usize {
        nnz_budget(self.n, self.tau)
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

    /// Method 1's stored `n × n` product, once hinted.
    pub fn stored_product(&self) -> Option<&DenseMatrix<S::Elem>> {
        match &self.state {
            HintState::Answer { product, .. } => Some(product),
            _ => None,
        }
    }

    /// Method 1's `|support(⊙_j P_jᵀ V_j)|`, once hinted.
    pub fn hadamard_support_len(&self) -> Option<usize> {
        match &self.state {
            HintState::Answer { support_len, .. } => Some(*support_len),
            _ => None,
        }
    }

    pub fn hint(&mut self, ps: Vec<SparseMatrix<S::Elem>>) -> Result<()> {
        self.hint_counted(ps, &OpCounter::new())
    }

    /// Phase 2, tallying work on `counter`.
    pub fn hint_counted(&mut self, ps: Vec<SparseMatrix<S::Elem>>, counter: &OpCounter) -> Result<()> {
        if self.phase() != Phase::Preprocessed {
            return Err(Error::WrongPhase {
                op: "t1_hint",
                phase: self.phase().as_str(),
            });
        }
        if ps.len() != self.k() {
            return Err(Error::dims("t1_hint", format!("{} hint matrices for k = {}", ps.len(), self.k())));
        }
        let n = self.n;
        if let Some((j, p)) = ps.iter().enumerate().find(|(_, p)| (p.rows(), p.cols()) != (n, n)) {
            return Err(Error::dims(
                "t1_hint",
                format!("P_{} is {}x{}, expected {n}x{n}", j + 1, p.rows(), p.cols()),
            ));
        }
        if self.budget_mode == BudgetMode::Strict {
            let budget = self.budget();
            for p in &ps {
                p.check_budget(budget)?;
            }
        }

        let before = counter.snapshot();
        let sr = Counted::new(self.sr, counter);
        self.state = match self.strategy {
            Strategy::Method1 => {
                let terms = ps
                    .iter()
                    .zip(&self.vs)
                    .map(|(p, v)| transpose_times_dense(sr, p, v))
                    .collect::<Result<Vec<_>>>()?;
                let h = hadamard_rowsparse(sr, &terms)?;
                let product = dense_times_rowsparse(sr, &self.m, &h)?;
                HintState::Answer {
                    product,
                    support_len: h.support().len(),
                }
            }
            Strategy::Method2 => HintState::Stored(ps),
        };
        self.costs.hint = counter.snapshot().since(before);
        Ok(())
    }

    pub fn query(&self, i: usize) -> Result<DenseVector<S::Elem>> {
        self.query_counted(i, &OpCounter::new())
    }

    pub fn query_counted(&self, i: usize, counter: &OpCounter) -> Result<DenseVector<S::Elem>> {
        self.query_traced(i, counter).map(|a| a.values)
    }

    /// Phase 3 for column `i` (1-based), tallying work on `counter`.
    pub fn query_traced(&self, i: usize, counter: &OpCounter) -> Result<Type1Answer<S::Elem>> {
        if i == 0 || i > self.n {
            return Err(Error::IndexOutOfRange {
                what: "query column",
                index: i,
                bound: self.n,
            });
        }
        match &self.state {
            HintState::None => Err(Error::WrongPhase {
                op: "t1_query",
                phase: Phase::Preprocessed.as_str(),
            }),
            HintState::Answer { product, support_len } => Ok(Type1Answer {
                values: column(product, i)?,
                support_len: *support_len,
            }),
            HintState::Stored(ps) => {
                let sr = Counted::new(self.sr, counter);
                let terms = ps
                    .iter()
                    .zip(&self.vs)
                    .map(|(p, v)| transpose_times_vector(sr, p, &column(v, i)?))
                    .collect::<Result<Vec<_>>>()?;
                let u = hadamard_sparsevec(sr, &terms)?;
                Ok(Type1Answer {
                    values: dense_times_sparsevec(sr, &self.m, &u)?,
                    support_len: u.nnz(),
                })
            }
        }
    }
}
