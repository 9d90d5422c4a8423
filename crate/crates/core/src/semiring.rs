//! Commutative semirings and the operation-counting wrapper.
//!
//! Every kernel in this crate is generic over [`Semiring`]. Costs are
//! measured by running the same kernel with a [`Counted`] semiring, which
//! forwards each operation to the inner semiring and bumps an [`OpCounter`].

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};

/// A value that can live in a semiring carrier and cross the text/C boundary
/// as an unsigned integer.
pub trait Element: Copy + PartialEq + Eq + fmt::Debug + Send + Sync + 'static {
    fn to_u64(self) -> u64;
    /// `None` when `v` is outside the carrier.
    fn from_u64(v: u64) -> Option<Self>;
}

impl Element for bool {
    fn to_u64(self) -> u64 {
        u64::from(self)
    }

    fn from_u64(v: u64) -> Option<Self> {
        match v {
            0 => Some(false),
            1 => Some(true),
            _ => None,
        }
    }
}

impl Element for u64 {
    fn to_u64(self) -> u64 {
        self
    }

    fn from_u64(v: u64) -> Option<Self> {
        Some(v)
    }
}

/// A commutative semiring `(E, +, *, 0, 1)`.
///
/// `add` and `mul` are fallible so that the natural-number instance can
/// report overflow instead of wrapping.
pub trait Semiring: Copy {
    type Elem: Element;

    fn name(&self) -> &'static str;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: Self::Elem, b: Self::Elem) -> Result<Self::Elem>;
    fn mul(&self, a: Self::Elem, b: Self::Elem) -> Result<Self::Elem>;
    /// True when `a + a = a` for every `a`.
    fn add_idempotent(&self) -> bool;

    fn is_zero(&self, a: Self::Elem) -> bool {
        a == self.zero()
    }
}

/// `{0, 1}` with OR and AND.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Boolean;

impl Semiring for Boolean {
    type Elem = bool;

    fn name(&self) -> &'static str {
        "bool"
    }

    fn zero(&self) -> bool {
        false
    }

    fn one(&self) -> bool {
        true
    }

    #[inline]
    fn add(&self, a: bool, b: bool) -> Result<bool> {
        Ok(a | b)
    }

    #[inline]
    fn mul(&self, a: bool, b: bool) -> Result<bool> {
        Ok(a & b)
    }

    fn add_idempotent(&self) -> bool {
        true
    }
}

/// Nonnegative integers in `u64` with checked `+` and `*`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Natural;

impl Semiring for Natural {
    type Elem = u64;

    fn name(&self) -> &'static str {
        "nat"
    }

    fn zero(&self) -> u64 {
        0
    }

    fn one(&self) -> u64 {
        1
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> Result<u64> {
        a.checked_add(b).ok_or(Error::Overflow { op: "add" })
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> Result<u64> {
        a.checked_mul(b).ok_or(Error::Overflow { op: "mul" })
    }

    fn add_idempotent(&self) -> bool {
        false
    }
}

/// Runtime tag for the two registered semirings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemiringKind {
    Boolean,
    Natural,
}

impl SemiringKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SemiringKind::Boolean => "bool",
            SemiringKind::Natural => "nat",
        }
    }
}

impl fmt::Display for SemiringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SemiringKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bool" | "boolean" => Ok(SemiringKind::Boolean),
            "nat" | "natural" => Ok(SemiringKind::Natural),
            other => Err(Error::InvalidParameter(format!("unknown semiring `{other}`"))),
        }
    }
}

/// Semiring operation tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpTally {
    pub adds: u64,
    pub muls: u64,
}

impl OpTally {
    pub fn since(self, earlier: OpTally) -> OpTally {
        OpTally {
            adds: self.adds - earlier.adds,
            muls: self.muls - earlier.muls,
        }
    }
}

impl std::ops::Add for OpTally {
    type Output = OpTally;

    fn add(self, rhs: OpTally) -> OpTally {
        OpTally {
            adds: self.adds + rhs.adds,
            muls: self.muls + rhs.muls,
        }
    }
}

/// Per-context add/mul counter. Not `Sync`: one counter per oracle run.
#[derive(Debug, Default)]
pub struct OpCounter {
    adds: Cell<u64>,
    muls: Cell<u64>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> OpTally {
        OpTally {
            adds: self.adds.get(),
            muls: self.muls.get(),
        }
    }

    pub fn reset(&self) {
        self.adds.set(0);
        self.muls.set(0);
    }

    #[inline]
    fn bump_add(&self) {
        self.adds.set(self.adds.get() + 1);
    }

    #[inline]
    fn bump_mul(&self) {
        self.muls.set(self.muls.get() + 1);
    }
}

/// Wraps a semiring so that every `add`/`mul` is tallied on `counter`.
#[derive(Clone, Copy)]
pub struct Counted<'c, S> {
    inner: S,
    counter: &'c OpCounter,
}

impl<'c, S: Semiring> Counted<'c, S> {
    pub fn new(inner: S, counter: &'c OpCounter) -> Self {
        Self { inner, counter }
    }

    pub fn inner(&self) -> S {
        self.inner
    }
}

impl<S: fmt::Debug> fmt::Debug for Counted<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Counted").field("inner", &self.inner).finish()
    }
}

impl<S: Semiring> Semiring for Counted<'_, S> {
    type Elem = S::Elem;

    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn zero(&self) -> S::Elem {
        self.inner.zero()
    }

    fn one(&self) -> S::Elem {
        self.inner.one()
    }

    #[inline]
    fn add(&self, a: S::Elem, b: S::Elem) -> Result<S::Elem> {
        self.counter.bump_add();
        self.inner.add(a, b)
    }

    #[inline]
    fn mul(&self, a: S::Elem, b: S::Elem) -> Result<S::Elem> {
        self.counter.bump_mul();
        self.inner.mul(a, b)
    }

    fn add_idempotent(&self) -> bool {
        self.inner.add_idempotent()
    }
}
