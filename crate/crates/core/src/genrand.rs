//! Seeded instance generation.
//!
//! Generator: ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`, with one stream per generated object selected by
//! `set_stream`. Streams are `(tag << 32) | index` with tags
//! `1 = M`, `2 = V_j`, `3 = P_j`, `4 = shared hint columns`, `5 = diagonal`,
//! `6 = factor-pair draws`.
//! Range reduction and Bernoulli draws are done here from raw `next_u64`
//! output, so the byte stream of an instance depends only on the ChaCha8
//! keystream. Do not change any of this without bumping the documented
//! generator version.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::khatri_rao::FactorList;
use crate::matrix::{nnz_budget, DenseMatrix, SparseMatrix};
use crate::semiring::{Element, Semiring};
use crate::type1::Type1Instance;
use crate::type2::{DiagonalTensor, Type2Instance};

pub const GENERATOR_VERSION: u32 = 1;

const TAG_M: u64 = 1;
const TAG_V: u64 = 2;
const TAG_P: u64 = 3;
const TAG_COLUMNS: u64 = 4;
const TAG_DIAG: u64 = 5;
const TAG_GRAM: u64 = 6;

/// How the nonzero positions of the `P_j` are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SupportLayout {
    /// Every `P_j` draws its `⌈n^τ⌉` cells uniformly without replacement
    /// from all `n²` cells, independently of the others.
    Independent,
    /// One set of `⌈n^τ⌉` columns is drawn uniformly without replacement and
    /// shared by all `P_j`; each `P_j` puts one entry at a uniform row of
    /// every shared column. Keeps `⊙_j P_jᵀV_j` at full support.
    #[default]
    SharedColumns,
}

impl std::str::FromStr for SupportLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(SupportLayout::Independent),
            "shared" | "shared-columns" => Ok(SupportLayout::SharedColumns),
            other => Err(Error::InvalidParameter(format!("unknown layout `{other}`"))),
        }
    }
}

impl SupportLayout {
    pub fn as_str(self) -> &'static str {
        match self {
            SupportLayout::Independent => "independent",
            SupportLayout::SharedColumns => "shared",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    /// Column count of the Type-II `V_ℓ` (ignored for Type I).
    pub d: usize,
    pub tau: f64,
    pub seed: u64,
    /// Probability that a dense cell is nonzero.
    pub density: f64,
    /// Inclusive range of nonzero natural-number values.
    pub value_range: (u64, u64),
    pub layout: SupportLayout,
}

impl GenConfig {
    pub fn new(n: usize, k: usize, tau: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            d: n,
            tau,
            seed,
            density: 0.5,
            value_range: (1, 3),
            layout: SupportLayout::default(),
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn with_layout(mut self, layout: SupportLayout) -> Self {
        self.layout = layout;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.d == 0 {
            return Err(Error::InvalidParameter("n, k and d must be positive".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidParameter(format!("density {} outside [0, 1]", self.density)));
        }
        let (lo, hi) = self.value_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameter(format!("value range [{lo}, {hi}] must be nonempty and exclude 0")));
        }
        Ok(())
    }

    fn rng(&self, tag: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((tag << 32) | index);
        rng
    }
}

/// Uniform integer in `0..bound` by rejection.
fn below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let r = rng.next_u64();
        if r <= zone {
            return r % bound;
        }
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p
}

/// `m` distinct values from `0..n` (Floyd's algorithm), ascending.
fn sample_distinct(rng: &mut ChaCha8Rng, n: u64, m: u64) -> Vec<u64> {
    let mut chosen = BTreeSet::new();
    for j in (n - m)..n {
        let t = below(rng, j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

fn nonzero<S: Semiring>(sr: S, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> S::Elem {
    if sr.add_idempotent() {
        return sr.one();
    }
    let (lo, hi) = cfg.value_range;
    S::Elem::from_u64(lo + below(rng, hi - lo + 1)).unwrap_or_else(|| sr.one())
}

fn dense<S: Semiring>(sr: S, cfg: &GenConfig, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<S::Elem> {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        if bernoulli(rng, cfg.density) {
            nonzero(sr, cfg, rng)
        } else {
            sr.zero()
        }
    })
}

/// Type-I instance with every `P_j` holding exactly `⌈n^τ⌉` entries.
pub fn gen_type1<S: Semiring>(sr: S, cfg: &GenConfig) -> Result<Type1Instance<S::Elem>> {
    cfg.validate()?;
    if cfg.tau > 1.0 {
        return Err(Error::InvalidParameter(format!("Type I needs tau <= 1, got {}", cfg.tau)));
    }
    let n = cfg.n;
    let budget = nnz_budget(n, cfg.tau);
    let cells = n.checked_mul(n).ok_or_else(|| Error::InvalidParameter("n too large".into()))?;
    if budget > cells {
        return Err(Error::InvalidParameter(format!("budget {budget} exceeds {cells} cells")));
    }
    let m = dense(sr, cfg, n, n, &mut cfg.rng(TAG_M, 0));
    let vs = (0..cfg.k)
        .map(|j| dense(sr, cfg, n, n, &mut cfg.rng(TAG_V, j as u64)))
        .collect();
    let shared_cols = match cfg.layout {
        SupportLayout::SharedColumns => {
            if budget > n {
                return Err(Error::InvalidParameter(format!("budget {budget} exceeds {n} columns")));
            }
            Some(sample_distinct(&mut cfg.rng(TAG_COLUMNS, 0), n as u64, budget as u64))
        }
        SupportLayout::Independent => None,
    };
    let ps = (0..cfg.k)
        .map(|j| {
            let mut rng = cfg.rng(TAG_P, j as u64);
            let positions: Vec<(usize, usize)> = match &shared_cols {
                Some(cols) => cols.iter().map(|&c| (below(&mut rng, n as u64) as usize, c as usize)).collect(),
                None => sample_distinct(&mut rng, cells as u64, budget as u64)
                    .into_iter()
                    .map(|x| (x as usize / n, x as usize % n))
                    .collect(),
            };
            let entries = positions.into_iter().map(|(r, c)| (r, c, nonzero(sr, cfg, &mut rng))).collect();
            SparseMatrix::new(sr, n, n, entries)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Type1Instance {
        tau: cfg.tau,
        m,
        vs,
        ps,
    })
}

/// Type-II instance whose diagonal holds exactly `min(⌈n^τ⌉, d)` entries.
pub fn gen_type2<S: Semiring>(sr: S, cfg: &GenConfig) -> Result<Type2Instance<S::Elem>> {
    cfg.validate()?;
    let budget = nnz_budget(cfg.n, cfg.tau).min(cfg.d);
    let vs = (0..cfg.k)
        .map(|j| dense(sr, cfg, cfg.n, cfg.d, &mut cfg.rng(TAG_V, j as u64)))
        .collect();
    let mut rng = cfg.rng(TAG_DIAG, 0);
    let positions = sample_distinct(&mut rng, cfg.d as u64, budget as u64);
    let diag = positions.into_iter().map(|j| (j as usize, nonzero(sr, cfg, &mut rng))).collect();
    Ok(Type2Instance {
        tau: cfg.tau,
        vs,
        p: DiagonalTensor::new(sr, cfg.k, cfg.d, diag)?,
    })
}

/// A random pair of factor lists `(A_1..A_k; B_1..B_k)` with
/// `k ∈ {1,2,3}`, shared row counts `n_ℓ ∈ 1..=4` and widths `d_a, d_b ∈ 1..=4`.
/// Dense cells follow `density` and `value_range` of a default config.
pub fn gen_gram_pair<S: Semiring>(sr: S, seed: u64) -> Result<(FactorList<S::Elem>, FactorList<S::Elem>)> {
    let cfg = GenConfig::new(1, 1, 1.0, seed);
    let mut rng = cfg.rng(TAG_GRAM, 0);
    let k = 1 + below(&mut rng, 3) as usize;
    let dims: Vec<usize> = (0..k).map(|_| 1 + below(&mut rng, 4) as usize).collect();
    let da = 1 + below(&mut rng, 4) as usize;
    let db = 1 + below(&mut rng, 4) as usize;
    let a = dims.iter().map(|&r| dense(sr, &cfg, r, da, &mut rng)).collect();
    let b = dims.iter().map(|&r| dense(sr, &cfg, r, db, &mut rng)).collect();
    Ok((FactorList::new(a)?, FactorList::new(b)?))
}
