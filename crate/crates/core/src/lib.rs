//! Tensor Hinted Mv: three-phase query oracles over commutative semirings.
//!
//! Two problem variants are provided:
//!
//! * [`type1`]: given `M, V_1..V_k` (phase 1), sparse hints `P_1..P_k`
//!   (phase 2) and a column index `i` (phase 3), answer
//!   `M (⊘P_j)ᵀ (⊘V_j)_{*,i}`.
//! * [`type2`]: given `V_1..V_k` (phase 1), a diagonal order-`k` tensor `P`
//!   (phase 2) and a set of fixed `(direction, index)` pairs (phase 3),
//!   answer the corresponding slice of `P(V_1, …, V_k)`.
//!
//! Each variant comes with an eager strategy (all work in phase 2) and a lazy
//! one (all work in phase 3). [`reference`] holds brute-force oracles and
//! [`costmodel`] turns counted semiring operations into empirical exponents.

pub mod cli;
pub mod costmodel;
pub mod error;
pub mod format;
pub mod genrand;
pub mod khatri_rao;
pub mod matrix;
pub mod reference;
pub mod semiring;
pub mod type1;
pub mod type2;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use semiring::{Boolean, Counted, Element, Natural, OpCounter, OpTally, Semiring, SemiringKind};

/// Which phase-2/phase-3 split an oracle uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Compute the full answer object in phase 2; phase 3 only reads it.
    Method1,
    /// Store the hint in phase 2; compute each answer in phase 3.
    Method2,
}

impl Strategy {
    pub fn number(self) -> u8 {
        match self {
            Strategy::Method1 => 1,
            Strategy::Method2 => 2,
        }
    }

    pub fn from_number(m: u8) -> Option<Self> {
        match m {
            1 => Some(Strategy::Method1),
            2 => Some(Strategy::Method2),
            _ => None,
        }
    }
}

/// Oracle lifecycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Preprocessed,
    Hinted,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Preprocessed => "Preprocessed",
            Phase::Hinted => "Hinted",
        }
    }
}
