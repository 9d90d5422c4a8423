//! Column-wise Kronecker (Khatri-Rao) products kept as a list of factors.
//!
//! Row `i` of `K_1 ⊘ ⋯ ⊘ K_k` is the entrywise product of row `i_ℓ` of each
//! factor, where `(i_1, …, i_k)` is the mixed-radix decomposition of `i`
//! with the last factor varying fastest. Only reference code and the Type-II
//! matrix view ever materialize the product.

use crate::error::{Error, Result};
use crate::matrix::{hadamard_dense, matmul_dense, DenseMatrix, DenseVector};
use crate::semiring::Semiring;

/// Materialization guard: at most this many rows by default.
pub const DEFAULT_CAP: usize = 1 << 20;

/// `K_1 ⊘ ⋯ ⊘ K_k` represented by its factors (each `n_ℓ × d`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorList<E> {
    factors: Vec<DenseMatrix<E>>,
    dims: Vec<usize>,
    width: usize,
}

impl<E: Copy> FactorList<E> {
    pub fn new(factors: Vec<DenseMatrix<E>>) -> Result<Self> {
        let first = factors.first().ok_or(Error::EmptyTerms("FactorList"))?;
        let width = first.cols();
        if let Some(f) = factors.iter().find(|f| f.cols() != width) {
            return Err(Error::dims(
                "FactorList::new",
                format!("factor widths {width} and {}", f.cols()),
            ));
        }
        let dims = factors.iter().map(DenseMatrix::rows).collect();
        Ok(Self { factors, dims, width })
    }

    pub fn factors(&self) -> &[DenseMatrix<E>] {
        &self.factors
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Shared column count `d`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// `∏ n_ℓ`, or `None` if it does not fit in `usize`.
    pub fn total_rows(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
    }
}

/// Mixed-radix flat row index (all 1-based):
/// `Σ_{ℓ<k} (i_ℓ − 1) ∏_{ℓ'>ℓ} n_ℓ' + i_k`.
pub fn flat_index(multi: &[usize], dims: &[usize]) -> Result<usize> {
    if multi.len() != dims.len() || dims.is_empty() {
        return Err(Error::dims(
            "flat_index",
            format!("{} indices for {} dimensions", multi.len(), dims.len()),
        ));
    }
    let mut flat = 0usize;
    for (&i, &n) in multi.iter().zip(dims) {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange {
                what: "multi-index component",
                index: i,
                bound: n,
            });
        }
        flat = flat * n + (i - 1);
    }
    Ok(flat + 1)
}

/// Inverse of [`flat_index`].
pub fn unflatten(flat: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    if dims.is_empty() || flat == 0 || flat > total {
        return Err(Error::IndexOutOfRange {
            what: "flat row",
            index: flat,
            bound: total,
        });
    }
    let mut rest = flat - 1;
    let mut multi = vec![0; dims.len()];
    for (slot, &n) in multi.iter_mut().zip(dims).rev() {
        *slot = rest % n + 1;
        rest /= n;
    }
    Ok(multi)
}

/// Row `flat` (1-based) of the product, computed from the factor rows.
pub fn kr_row<S: Semiring>(sr: S, f: &FactorList<S::Elem>, flat: usize) -> Result<DenseVector<S::Elem>> {
    let multi = unflatten(flat, &f.dims)?;
    let mut row = f.factors[0].row(multi[0] - 1).to_vec();
    for (factor, &i) in f.factors.iter().zip(&multi).skip(1) {
        for (slot, &x) in row.iter_mut().zip(factor.row(i - 1)) {
            *slot = sr.mul(*slot, x)?;
        }
    }
    Ok(row)
}

/// Dense `∏ n_ℓ × d` product, refused when it would exceed `cap` rows.
///
/// Built one factor at a time, so the cost is
/// `d · Σ_{ℓ≥2} ∏_{ℓ'≤ℓ} n_ℓ'` multiplications.
pub fn kr_materialize<S: Semiring>(sr: S, f: &FactorList<S::Elem>, cap: usize) -> Result<DenseMatrix<S::Elem>> {
    let rows = match f.total_rows() {
        Some(r) if r <= cap => r,
        Some(r) => return Err(Error::CapExceeded { rows: r, cap }),
        None => return Err(Error::CapExceeded { rows: usize::MAX, cap }),
    };
    let d = f.width;
    let mut acc = f.factors[0].clone();
    for factor in &f.factors[1..] {
        let mut data = Vec::with_capacity(acc.rows() * factor.rows() * d);
        for a in 0..acc.rows() {
            for b in 0..factor.rows() {
                for (&x, &y) in acc.row(a).iter().zip(factor.row(b)) {
                    data.push(sr.mul(x, y)?);
                }
            }
        }
        acc = DenseMatrix::from_vec(acc.rows() * factor.rows(), d, data)?;
    }
    debug_assert_eq!(acc.rows(), rows);
    Ok(acc)
}

/// `(⊘ A_ℓ)ᵀ (⊘ B_ℓ)` as `⊙_ℓ (A_ℓᵀ B_ℓ)`, never forming the `∏ n_ℓ` rows.
pub fn tensor_trick_gram<S: Semiring>(
    sr: S,
    a: &FactorList<S::Elem>,
    b: &FactorList<S::Elem>,
) -> Result<DenseMatrix<S::Elem>> {
    if a.dims != b.dims {
        return Err(Error::dims(
            "tensor_trick_gram",
            format!("factor row counts {:?} vs {:?}", a.dims, b.dims),
        ));
    }
    let mut grams = a
        .factors
        .iter()
        .zip(&b.factors)
        .map(|(fa, fb)| matmul_dense(sr, &fa.transpose(), fb));
    let mut acc = grams.next().expect("FactorList is nonempty")?;
    for g in grams {
        acc = hadamard_dense(sr, &acc, &g?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::{Boolean, Counted, Element, Natural, OpCounter};
    use crate::testutil::{rand_dense, SplitMix};
    use proptest::prelude::*;

    fn bools(rows: usize, cols: usize, v: &[u64]) -> DenseMatrix<bool> {
        DenseMatrix::from_vec(rows, cols, v.iter().map(|&x| x == 1).collect()).unwrap()
    }

    #[test]
    fn flat_index_examples() {
        assert_eq!(flat_index(&[2, 1], &[2, 3]).unwrap(), 4);
        assert_eq!(flat_index(&[1, 1, 1], &[3, 4, 5]).unwrap(), 1);
        assert_eq!(flat_index(&[3, 4, 5], &[3, 4, 5]).unwrap(), 60);
        assert!(matches!(flat_index(&[0, 1], &[2, 3]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(flat_index(&[1, 4], &[2, 3]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(flat_index(&[1], &[2, 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unflatten_examples() {
        assert_eq!(unflatten(4, &[2, 3]).unwrap(), vec![2, 1]);
        assert_eq!(unflatten(1, &[2, 3, 2]).unwrap(), vec![1, 1, 1]);
        assert!(unflatten(0, &[2, 3]).is_err());
        assert!(unflatten(7, &[2, 3]).is_err());
        let dims = [2, 3, 2];
        for f in 1..=12 {
            assert_eq!(flat_index(&unflatten(f, &dims).unwrap(), &dims).unwrap(), f);
        }
    }

    fn all_multi(dims: &[usize]) -> Vec<Vec<usize>> {
        match dims.split_first() {
            None => vec![vec![]],
            Some((&n, rest)) => (1..=n)
                .flat_map(|i| {
                    all_multi(rest).into_iter().map(move |mut tail| {
                        tail.insert(0, i);
                        tail
                    })
                })
                .collect(),
        }
    }

    #[test]
    fn flat_index_bijection_small_dims() {
        let mut dim_sets: Vec<Vec<usize>> = Vec::new();
        for a in 1..=8 {
            dim_sets.push(vec![a]);
            for b in 1..=8 {
                dim_sets.push(vec![a, b]);
                for c in 1..=8 {
                    dim_sets.push(vec![a, b, c]);
                }
            }
        }
        for dims in dim_sets.into_iter().filter(|d| d.iter().product::<usize>() <= 64) {
            let total: usize = dims.iter().product();
            let mut seen = vec![false; total];
            for multi in all_multi(&dims) {
                let f = flat_index(&multi, &dims).unwrap();
                assert!(!seen[f - 1], "{dims:?} {multi:?}");
                seen[f - 1] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn materialize_examples() {
        let sr = Boolean;
        let k1 = bools(2, 1, &[1, 0]);
        let k2 = bools(2, 1, &[1, 1]);
        let f = FactorList::new(vec![k1.clone(), k2]).unwrap();
        let m = kr_materialize(sr, &f, DEFAULT_CAP).unwrap();
        assert_eq!(m, bools(4, 1, &[1, 1, 0, 0]));

        let single = FactorList::new(vec![k1.clone()]).unwrap();
        assert_eq!(kr_materialize(sr, &single, DEFAULT_CAP).unwrap(), k1);
        assert_eq!(kr_row(sr, &single, 2).unwrap(), vec![false]);

        let mut rng = SplitMix(3);
        let f = FactorList::new(vec![
            rand_dense(sr, &mut rng, 2, 4),
            rand_dense(sr, &mut rng, 3, 4),
            rand_dense(sr, &mut rng, 2, 4),
        ])
        .unwrap();
        assert_eq!(kr_materialize(sr, &f, DEFAULT_CAP).unwrap().shape(), (12, 4));
        assert!(matches!(kr_materialize(sr, &f, 11), Err(Error::CapExceeded { rows: 12, cap: 11 })));

        let ones = FactorList::new(vec![DenseMatrix::filled(2, 3, true), DenseMatrix::filled(3, 3, true)]).unwrap();
        assert_eq!(kr_row(sr, &ones, 5).unwrap(), vec![true; 3]);
    }

    #[test]
    fn factor_list_rejects_mixed_widths() {
        let a = DenseMatrix::filled(2, 2, 1u64);
        let b = DenseMatrix::filled(2, 3, 1u64);
        assert!(matches!(FactorList::new(vec![a, b]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(FactorList::<u64>::new(vec![]), Err(Error::EmptyTerms(_))));
    }

    #[test]
    fn gram_hand_example() {
        let sr = Boolean;
        let a = FactorList::new(vec![bools(2, 1, &[1, 0]), bools(2, 1, &[1, 1])]).unwrap();
        let b = FactorList::new(vec![bools(2, 1, &[0, 1]), bools(2, 1, &[1, 0])]).unwrap();
        // C_1 = 0, C_2 = 1; ⊘A = [1,1,0,0], ⊘B = [0,0,1,0]
        assert_eq!(tensor_trick_gram(sr, &a, &b).unwrap(), bools(1, 1, &[0]));
        let ma = kr_materialize(sr, &a, DEFAULT_CAP).unwrap();
        let mb = kr_materialize(sr, &b, DEFAULT_CAP).unwrap();
        assert_eq!(ma, bools(4, 1, &[1, 1, 0, 0]));
        assert_eq!(mb, bools(4, 1, &[0, 0, 1, 0]));
    }

    #[test]
    fn gram_degenerate_and_errors() {
        let sr = Natural;
        let mut rng = SplitMix(11);
        let a = rand_dense(sr, &mut rng, 3, 2);
        let b = rand_dense(sr, &mut rng, 3, 4);
        let fa = FactorList::new(vec![a.clone()]).unwrap();
        let fb = FactorList::new(vec![b.clone()]).unwrap();
        assert_eq!(tensor_trick_gram(sr, &fa, &fb).unwrap(), matmul_dense(sr, &a.transpose(), &b).unwrap());
        let fb2 = FactorList::new(vec![b.clone(), b]).unwrap();
        assert!(matches!(tensor_trick_gram(sr, &fa, &fb2), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gram_cost_is_independent_of_total_rows() {
        // 4 factors of 8 rows: 4096 product rows, but the Gram path only pays
        // k·(d_a·d_b·n) + (k−1)·d_a·d_b multiplications.
        let sr = Natural;
        let mut rng = SplitMix(5);
        let fa = FactorList::new((0..4).map(|_| rand_dense(sr, &mut rng, 8, 2)).collect()).unwrap();
        let fb = FactorList::new((0..4).map(|_| rand_dense(sr, &mut rng, 8, 3)).collect()).unwrap();
        let counter = OpCounter::new();
        tensor_trick_gram(Counted::new(sr, &counter), &fa, &fb).unwrap();
        assert_eq!(counter.snapshot().muls, (4 * 2 * 3 * 8 + 3 * 2 * 3) as u64);
    }

    fn check_gram<S: Semiring>(sr: S, seed: u64) -> std::result::Result<(), TestCaseError> {
        let mut rng = SplitMix(seed);
        let k = 1 + rng.below(3) as usize;
        let dims: Vec<usize> = (0..k).map(|_| 1 + rng.below(4) as usize).collect();
        let da = 1 + rng.below(4) as usize;
        let db = 1 + rng.below(4) as usize;
        let fa = FactorList::new(dims.iter().map(|&n| rand_dense(sr, &mut rng, n, da)).collect()).unwrap();
        let fb = FactorList::new(dims.iter().map(|&n| rand_dense(sr, &mut rng, n, db)).collect()).unwrap();
        let fast = tensor_trick_gram(sr, &fa, &fb).unwrap();
        let ma = kr_materialize(sr, &fa, DEFAULT_CAP).unwrap();
        let mb = kr_materialize(sr, &fb, DEFAULT_CAP).unwrap();
        prop_assert_eq!(&fast, &matmul_dense(sr, &ma.transpose(), &mb).unwrap());
        for f in 1..=ma.rows() {
            prop_assert_eq!(kr_row(sr, &fa, f).unwrap(), ma.row(f - 1).to_vec());
        }
        // entry formula K_{i,j} = ∏ (K_ℓ)_{i_ℓ,j}, checked through unflatten
        for f in 1..=ma.rows() {
            let multi = unflatten(f, &dims).unwrap();
            for j in 0..da {
                let mut v = sr.one();
                for (factor, &i) in fa.factors().iter().zip(&multi) {
                    v = sr.mul(v, factor.get(i - 1, j)).unwrap();
                }
                prop_assert_eq!(ma.get(f - 1, j).to_u64(), v.to_u64());
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gram_matches_materialized(seed in any::<u64>()) {
            check_gram(Boolean, seed)?;
            check_gram(Natural, seed)?;
        }
    }
}
