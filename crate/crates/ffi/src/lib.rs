//! C ABI over `thmv-core`.
//!
//! Oracles live behind opaque handles created by `thmv_type1_new` /
//! `thmv_type2_new` (phase 1) and released with the matching `_free`.
//! Every fallible call returns a [`ThmvStatus`]; on failure a message is
//! available from [`thmv_last_error_message`] on the same thread.
//!
//! Elements cross the boundary as `uint64_t`; the boolean semiring accepts
//! only 0 and 1. Matrices are row-major and all indices are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use thmv_core::costmodel::fit_exponent;
use thmv_core::matrix::{DenseMatrix, SparseMatrix};
use thmv_core::type1::Type1Oracle;
use thmv_core::type2::{DiagonalTensor, SliceQuery, TensorMatrixView, Type2Oracle};
use thmv_core::{Boolean, Element, Error, Natural, OpCounter, OpTally, Semiring, Strategy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThmvStatus {
    Ok = 0,
    NullPointer = 1,
    Overflow = 2,
    DimensionMismatch = 3,
    IndexOutOfRange = 4,
    DuplicateEntry = 5,
    ZeroEntry = 6,
    BudgetExceeded = 7,
    CapExceeded = 8,
    WrongPhase = 9,
    InvalidQuery = 10,
    InvalidParameter = 11,
    Fit = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThmvSemiring {
    Boolean = 0,
    Natural = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThmvMethod {
    Method1 = 1,
    Method2 = 2,
}

/// Operation tallies for one phase.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThmvOps {
    pub adds: u64,
    pub muls: u64,
}

impl From<OpTally> for ThmvOps {
    fn from(t: OpTally) -> Self {
        ThmvOps { adds: t.adds, muls: t.muls }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ThmvStatus {
    match e {
        Error::Overflow { .. } => ThmvStatus::Overflow,
        Error::DimensionMismatch { .. } => ThmvStatus::DimensionMismatch,
        Error::IndexOutOfRange { .. } => ThmvStatus::IndexOutOfRange,
        Error::DuplicateEntry { .. } => ThmvStatus::DuplicateEntry,
        Error::ZeroEntry { .. } => ThmvStatus::ZeroEntry,
        Error::BudgetExceeded { .. } => ThmvStatus::BudgetExceeded,
        Error::CapExceeded { .. } => ThmvStatus::CapExceeded,
        Error::WrongPhase { .. } => ThmvStatus::WrongPhase,
        Error::InvalidQuery(_) => ThmvStatus::InvalidQuery,
        Error::EmptyTerms(_) | Error::InvalidParameter(_) | Error::Parse { .. } => ThmvStatus::InvalidParameter,
        Error::Fit(_) => ThmvStatus::Fit,
    }
}

struct Fail(ThmvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ThmvStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ThmvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThmvStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            ThmvStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn elems<E: Element>(raw: &[u64]) -> Result<Vec<E>, Fail> {
    raw.iter()
        .map(|&v| {
            E::from_u64(v).ok_or_else(|| Fail(ThmvStatus::InvalidParameter, format!("value {v} outside the semiring")))
        })
        .collect()
}

fn strategy(m: u32) -> Result<Strategy, Fail> {
    match m {
        x if x == ThmvMethod::Method1 as u32 => Ok(Strategy::Method1),
        x if x == ThmvMethod::Method2 as u32 => Ok(Strategy::Method2),
        _ => Err(Fail(ThmvStatus::InvalidParameter, format!("unknown method {m}"))),
    }
}

fn semiring_kind(s: u32) -> Result<ThmvSemiring, Fail> {
    match s {
        x if x == ThmvSemiring::Boolean as u32 => Ok(ThmvSemiring::Boolean),
        x if x == ThmvSemiring::Natural as u32 => Ok(ThmvSemiring::Natural),
        _ => Err(Fail(ThmvStatus::InvalidParameter, format!("unknown semiring {s}"))),
    }
}

fn checked_len(a: usize, b: usize) -> Result<usize, Fail> {
    a.checked_mul(b)
        .ok_or_else(|| Fail(ThmvStatus::InvalidParameter, "size overflows usize".into()))
}

fn write_tally(t: OpTally, out: *mut ThmvOps) {
    if !out.is_null() {
        // SAFETY: caller passes null or a valid ThmvOps pointer.
        unsafe { *out = t.into() };
    }
}

fn dense_blocks<E: Element>(raw: &[u64], count: usize, rows: usize, cols: usize) -> Result<Vec<DenseMatrix<E>>, Fail> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch {
            op: "ffi_new",
            detail: format!("{rows}x{cols} blocks"),
        }
        .into());
    }
    raw.chunks(rows * cols)
        .take(count)
        .map(|c| Ok(DenseMatrix::from_vec(rows, cols, elems(c)?)?))
        .collect()
}

// ---------------------------------------------------------------- Type I

enum AnyType1 {
    Bool(Type1Oracle<Boolean>),
    Nat(Type1Oracle<Natural>),
}

/// Opaque Type-I oracle.
pub struct ThmvType1 {
    inner: AnyType1,
}

macro_rules! dispatch {
    ($h:expr, $o:ident, $sr:ident => $body:expr) => {
        match $h {
            AnyType1Ref::Bool($o) => {
                #[allow(unused)]
                let $sr = Boolean;
                $body
            }
            AnyType1Ref::Nat($o) => {
                #[allow(unused)]
                let $sr = Natural;
                $body
            }
        }
    };
}

enum AnyType1Ref<'a> {
    Bool(&'a mut Type1Oracle<Boolean>),
    Nat(&'a mut Type1Oracle<Natural>),
}

fn t1<'a>(h: *mut ThmvType1) -> Result<AnyType1Ref<'a>, Fail> {
    // SAFETY: handles come from thmv_type1_new and are used single-threaded.
    let h = unsafe { h.as_mut() }.ok_or_else(|| null("handle"))?;
    Ok(match &mut h.inner {
        AnyType1::Bool(o) => AnyType1Ref::Bool(o),
        AnyType1::Nat(o) => AnyType1Ref::Nat(o),
    })
}

/// Phase 1. `semiring` is a [`ThmvSemiring`] and `method` a [`ThmvMethod`].
/// `m` holds `n*n` values and `vs` holds `k` consecutive `n*n`
/// blocks. On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thmv_type1_new(
    semiring: u32,
    method: u32,
    n: usize,
    k: usize,
    tau: f64,
    m: *const u64,
    vs: *const u64,
    out: *mut *mut ThmvType1,
) -> ThmvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let nn = checked_len(n, n)?;
        let m = input(m, nn, "m")?;
        let vs = input(vs, checked_len(nn, k)?, "vs")?;
        let inner = match semiring_kind(semiring)? {
            ThmvSemiring::Boolean => AnyType1::Bool(Type1Oracle::preprocess(
                Boolean,
                DenseMatrix::from_vec(n, n, elems(m)?)?,
                dense_blocks(vs, k, n, n)?,
                tau,
                strategy(method)?,
            )?),
            ThmvSemiring::Natural => AnyType1::Nat(Type1Oracle::preprocess(
                Natural,
                DenseMatrix::from_vec(n, n, elems(m)?)?,
                dense_blocks(vs, k, n, n)?,
                tau,
                strategy(method)?,
            )?),
        };
        *out = Box::into_raw(Box::new(ThmvType1 { inner }));
        Ok(())
    })
}

/// Phase 2. Hint matrix `j` owns `nnz[j]` consecutive triples of
/// `rows`/`cols`/`vals`. `ops` (nullable) receives the phase-2 tallies.
///
/// # Safety
/// `nnz` must hold `k` counts and the triple arrays their sum.
#[no_mangle]
pub unsafe extern "C" fn thmv_type1_hint(
    h: *mut ThmvType1,
    nnz: *const usize,
    rows: *const usize,
    cols: *const usize,
    vals: *const u64,
    ops: *mut ThmvOps,
) -> ThmvStatus {
    guard(|| {
        let o = t1(h)?;
        let (n, k) = dispatch!(&o, o, _sr => (o.n(), o.k()));
        let counts = input(nnz, k, "nnz")?;
        let total = counts
            .iter()
            .try_fold(0usize, |a, &c| a.checked_add(c))
            .ok_or_else(|| Fail(ThmvStatus::InvalidParameter, "nnz total overflows".into()))?;
        let (rows, cols, vals) = (input(rows, total, "rows")?, input(cols, total, "cols")?, input(vals, total, "vals")?);
        let mut triples = Vec::with_capacity(total);
        for t in 0..total {
            let (r, c) = (rows[t], cols[t]);
            for (what, i) in [("hint row", r), ("hint column", c)] {
                if i == 0 || i > n {
                    return Err(Error::IndexOutOfRange { what, index: i, bound: n }.into());
                }
            }
            triples.push((r - 1, c - 1, vals[t]));
        }
        dispatch!(o, o, sr => {
            let mut ps = Vec::with_capacity(k);
            let mut it = triples.into_iter();
            for &c in counts {
                let entries = it
                    .by_ref()
                    .take(c)
                    .map(|(r, col, v)| Ok((r, col, elems(&[v])?[0])))
                    .collect::<Result<Vec<_>, Fail>>()?;
                ps.push(SparseMatrix::new(sr, n, n, entries)?);
            }
            let counter = OpCounter::new();
            o.hint_counted(ps, &counter)?;
            write_tally(o.costs().hint, ops);
            Ok(())
        })
    })
}

/// Phase 3 for column `i`. Writes `n` values to `out`; `ops` (nullable)
/// receives this query's tallies.
///
/// # Safety
/// `out` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn thmv_type1_query(h: *mut ThmvType1, i: usize, out: *mut u64, ops: *mut ThmvOps) -> ThmvStatus {
    guard(|| {
        let o = t1(h)?;
        dispatch!(o, o, _sr => {
            let counter = OpCounter::new();
            let ans = o.query_counted(i, &counter)?;
            let dst = output(out, o.n(), "out")?;
            for (d, v) in dst.iter_mut().zip(ans) {
                *d = v.to_u64();
            }
            write_tally(counter.snapshot(), ops);
            Ok(())
        })
    })
}

/// Dimensions of a Type-I handle.
///
/// # Safety
/// `h` must be a live handle; `n` and `k` nullable.
#[no_mangle]
pub unsafe extern "C" fn thmv_type1_dims(h: *mut ThmvType1, n: *mut usize, k: *mut usize) -> ThmvStatus {
    guard(|| {
        let o = t1(h)?;
        let (nv, kv) = dispatch!(o, o, _sr => (o.n(), o.k()));
        if !n.is_null() {
            *n = nv;
        }
        if !k.is_null() {
            *k = kv;
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thmv_type1_free(h: *mut ThmvType1) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------- Type II

enum AnyType2 {
    Bool(Type2Oracle<Boolean>),
    Nat(Type2Oracle<Natural>),
}

/// Opaque Type-II oracle.
pub struct ThmvType2 {
    inner: AnyType2,
}

/// Phase 1 (see [`thmv_type1_new`] for `semiring` and `method`). `vs` holds `k` consecutive row-major `n*d` blocks.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn thmv_type2_new(
    semiring: u32,
    method: u32,
    n: usize,
    d: usize,
    k: usize,
    tau: f64,
    vs: *const u64,
    out: *mut *mut ThmvType2,
) -> ThmvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let vs = input(vs, checked_len(checked_len(n, d)?, k)?, "vs")?;
        let inner = match semiring_kind(semiring)? {
            ThmvSemiring::Boolean => {
                AnyType2::Bool(Type2Oracle::preprocess(Boolean, dense_blocks(vs, k, n, d)?, tau, strategy(method)?)?)
            }
            ThmvSemiring::Natural => {
                AnyType2::Nat(Type2Oracle::preprocess(Natural, dense_blocks(vs, k, n, d)?, tau, strategy(method)?)?)
            }
        };
        *out = Box::into_raw(Box::new(ThmvType2 { inner }));
        Ok(())
    })
}

fn t2<'a>(h: *mut ThmvType2) -> Result<&'a mut AnyType2, Fail> {
    // SAFETY: handles come from thmv_type2_new and are used single-threaded.
    unsafe { h.as_mut() }.map(|h| &mut h.inner).ok_or_else(|| null("handle"))
}

fn diag<S: Semiring>(sr: S, k: usize, d: usize, idx: &[usize], vals: &[u64]) -> Result<DiagonalTensor<S::Elem>, Fail> {
    let mut entries = Vec::with_capacity(idx.len());
    for (&j, &v) in idx.iter().zip(vals) {
        if j == 0 || j > d {
            return Err(Error::IndexOutOfRange {
                what: "diagonal",
                index: j,
                bound: d,
            }
            .into());
        }
        entries.push((j - 1, elems::<S::Elem>(&[v])?[0]));
    }
    Ok(DiagonalTensor::new(sr, k, d, entries)?)
}

/// Phase 2: the diagonal entries `P_{idx[t]} = vals[t]` (1-based).
///
/// # Safety
/// `idx` and `vals` must be valid for `nnz` reads.
#[no_mangle]
pub unsafe extern "C" fn thmv_type2_hint(
    h: *mut ThmvType2,
    nnz: usize,
    idx: *const usize,
    vals: *const u64,
    ops: *mut ThmvOps,
) -> ThmvStatus {
    guard(|| {
        let (idx, vals) = (input(idx, nnz, "idx")?, input(vals, nnz, "vals")?);
        let counter = OpCounter::new();
        let tally = match t2(h)? {
            AnyType2::Bool(o) => {
                o.hint_counted(diag(Boolean, o.k(), o.d(), idx, vals)?, &counter)?;
                o.costs().hint
            }
            AnyType2::Nat(o) => {
                o.hint_counted(diag(Natural, o.k(), o.d(), idx, vals)?, &counter)?;
                o.costs().hint
            }
        };
        write_tally(tally, ops);
        Ok(())
    })
}

fn emit_view<E: Element>(
    view: &TensorMatrixView<E>,
    out: *mut u64,
    cap: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> Result<(), Fail> {
    let (r, c) = view.data().shape();
    // SAFETY: caller passes null or valid pointers.
    unsafe {
        if !rows.is_null() {
            *rows = r;
        }
        if !cols.is_null() {
            *cols = c;
        }
    }
    let data = view.data().as_slice();
    if data.len() > cap {
        return Err(Fail(
            ThmvStatus::BufferTooSmall,
            format!("answer has {} values, buffer holds {cap}", data.len()),
        ));
    }
    // SAFETY: `out` is valid for `cap >= data.len()` writes.
    let dst = unsafe { output(out, data.len(), "out") }?;
    for (d, v) in dst.iter_mut().zip(data) {
        *d = v.to_u64();
    }
    Ok(())
}

/// Phase 3. Fixes `dirs[t]` to `idx[t]` for `t < s` and writes the
/// `rows x cols` row-major view to `out` (capacity `cap` values). Rows
/// range over the first `ceil(m/2)` free directions, columns over the
/// rest, last direction fastest. `rows`/`cols` are set even when the
/// buffer is too small.
///
/// # Safety
/// `dirs`/`idx` valid for `s` reads, `out` for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn thmv_type2_query(
    h: *mut ThmvType2,
    s: usize,
    dirs: *const usize,
    idx: *const usize,
    out: *mut u64,
    cap: usize,
    rows: *mut usize,
    cols: *mut usize,
    ops: *mut ThmvOps,
) -> ThmvStatus {
    guard(|| {
        let q = SliceQuery::new(
            input(dirs, s, "dirs")?
                .iter()
                .copied()
                .zip(input(idx, s, "idx")?.iter().copied())
                .collect(),
        );
        let counter = OpCounter::new();
        match t2(h)? {
            AnyType2::Bool(o) => emit_view(&o.query_counted(&q, &counter)?, out, cap, rows, cols)?,
            AnyType2::Nat(o) => emit_view(&o.query_counted(&q, &counter)?, out, cap, rows, cols)?,
        }
        write_tally(counter.snapshot(), ops);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thmv_type2_free(h: *mut ThmvType2) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------- misc

/// Least-squares slope of `log2(counts)` against `log2(ns)`.
///
/// # Safety
/// `ns` and `counts` valid for `len` reads; outputs nullable.
#[no_mangle]
pub unsafe extern "C" fn thmv_fit_exponent(
    ns: *const f64,
    counts: *const f64,
    len: usize,
    slope: *mut f64,
    intercept: *mut f64,
    r2: *mut f64,
) -> ThmvStatus {
    guard(|| {
        let samples: Vec<(f64, f64)> = input(ns, len, "ns")?
            .iter()
            .copied()
            .zip(input(counts, len, "counts")?.iter().copied())
            .collect();
        let fit = fit_exponent(&samples)?;
        for (p, v) in [(slope, fit.slope), (intercept, fit.intercept), (r2, fit.r2)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn thmv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn thmv_status_name(status: ThmvStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ThmvStatus::Ok => b"ok\0",
        ThmvStatus::NullPointer => b"null pointer\0",
        ThmvStatus::Overflow => b"overflow\0",
        ThmvStatus::DimensionMismatch => b"dimension mismatch\0",
        ThmvStatus::IndexOutOfRange => b"index out of range\0",
        ThmvStatus::DuplicateEntry => b"duplicate entry\0",
        ThmvStatus::ZeroEntry => b"zero entry\0",
        ThmvStatus::BudgetExceeded => b"budget exceeded\0",
        ThmvStatus::CapExceeded => b"cap exceeded\0",
        ThmvStatus::WrongPhase => b"wrong phase\0",
        ThmvStatus::InvalidQuery => b"invalid query\0",
        ThmvStatus::InvalidParameter => b"invalid parameter\0",
        ThmvStatus::Fit => b"fit failed\0",
        ThmvStatus::BufferTooSmall => b"buffer too small\0",
        ThmvStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}
