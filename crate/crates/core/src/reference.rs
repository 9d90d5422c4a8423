//! Brute-force oracles. They materialize every exponential object and share
//! no code with the Method 1 / Method 2 paths beyond dense loops and
//! [`kr_materialize`]. Pass an uncounted semiring: reference work is never
//! charged to a phase.

use crate::error::{Error, Result};
use crate::khatri_rao::{kr_materialize, unflatten, FactorList};
use crate::matrix::{column, matmul_dense, DenseMatrix, DenseVector, SparseMatrix};
use crate::semiring::Semiring;
use crate::type2::{split_dirs, DiagonalTensor, SliceQuery, TensorMatrixView};

/// `M (⊘P_j)ᵀ (⊘V_j)` with both Khatri-Rao products materialized.
pub fn ref_type1_full<S: Semiring>(
    sr: S,
    m: &DenseMatrix<S::Elem>,
    vs: &[DenseMatrix<S::Elem>],
    ps: &[SparseMatrix<S::Elem>],
    cap: usize,
) -> Result<DenseMatrix<S::Elem>> {
    if vs.len() != ps.len() || vs.is_empty() {
        return Err(Error::dims("ref_type1", format!("{} V and {} P matrices", vs.len(), ps.len())));
    }
    let kp = kr_materialize(sr, &FactorList::new(ps.iter().map(|p| p.to_dense(sr)).collect())?, cap)?;
    let kv = kr_materialize(sr, &FactorList::new(vs.to_vec())?, cap)?;
    let gram = matmul_dense(sr, &kp.transpose(), &kv)?;
    matmul_dense(sr, m, &gram)
}

/// Column `i` (1-based) of [`ref_type1_full`].
pub fn ref_type1<S: Semiring>(
    sr: S,
    m: &DenseMatrix<S::Elem>,
    vs: &[DenseMatrix<S::Elem>],
    ps: &[SparseMatrix<S::Elem>],
    i: usize,
    cap: usize,
) -> Result<DenseVector<S::Elem>> {
    column(&ref_type1_full(sr, m, vs, ps, cap)?, i)
}

/// The slice `q` of `P(V_1, …, V_k)`, summing
/// `P_j ∏_ℓ (V_ℓ)_{i_ℓ, j}` over the diagonal for every free coordinate.
pub fn ref_type2<S: Semiring>(
    sr: S,
    vs: &[DenseMatrix<S::Elem>],
    p: &DiagonalTensor<S::Elem>,
    q: &SliceQuery,
    cap: usize,
) -> Result<TensorMatrixView<S::Elem>> {
    let k = vs.len();
    let n = vs.first().map_or(0, DenseMatrix::rows);
    if p.order() != k || vs.iter().any(|v| v.shape() != (n, p.dim())) {
        return Err(Error::dims("ref_type2", "V shapes do not match the tensor"));
    }
    q.validate(k, n)?;
    let free = q.free_dirs(k);
    let cells = n.checked_pow(free.len() as u32).unwrap_or(usize::MAX);
    if cells > cap {
        return Err(Error::CapExceeded { rows: cells, cap });
    }
    let (row_dirs, col_dirs) = split_dirs(&free);
    let rows = n.pow(row_dirs.len() as u32);
    let cols = n.pow(col_dirs.len() as u32);

    let mut coords = vec![0usize; k];
    for &(dir, i) in q.pairs() {
        coords[dir - 1] = i;
    }
    let mut out = DenseMatrix::zeros(sr, rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if !row_dirs.is_empty() {
                let multi = unflatten(r + 1, &vec![n; row_dirs.len()])?;
                for (&dir, i) in row_dirs.iter().zip(multi) {
                    coords[dir - 1] = i;
                }
            }
            if !col_dirs.is_empty() {
                let multi = unflatten(c + 1, &vec![n; col_dirs.len()])?;
                for (&dir, i) in col_dirs.iter().zip(multi) {
                    coords[dir - 1] = i;
                }
            }
            let mut acc = sr.zero();
            for &(j, value) in p.diag() {
                let mut term = value;
                for (v, &i) in vs.iter().zip(&coords) {
                    term = sr.mul(term, v.get(i - 1, j))?;
                }
                acc = sr.add(acc, term)?;
            }
            out.set(r, c, acc);
        }
    }
    TensorMatrixView::new(n, row_dirs, col_dirs, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::khatri_rao::DEFAULT_CAP;
    use crate::semiring::{Boolean, Element, Natural};
    use crate::testutil::{rand_dense, rand_sparse, SplitMix};

    #[test]
    fn identity_chain_and_zero_hints() {
        let sr = Boolean;
        let id = DenseMatrix::identity(sr, 3);
        let p = SparseMatrix::new(sr, 3, 3, vec![(0, 0, true)]).unwrap();
        assert_eq!(
            ref_type1(sr, &id, std::slice::from_ref(&id), &[p], 1, DEFAULT_CAP).unwrap(),
            vec![true, false, false]
        );
        let z = SparseMatrix::zero(3, 3);
        assert_eq!(
            ref_type1(sr, &id, &[id.clone(), id.clone()], &[z.clone(), z], 2, DEFAULT_CAP).unwrap(),
            vec![false; 3]
        );
    }

    #[test]
    fn cap_is_enforced() {
        let sr = Boolean;
        let id = DenseMatrix::identity(sr, 4);
        let z = SparseMatrix::zero(4, 4);
        assert!(matches!(
            ref_type1(sr, &id, &vec![id.clone(); 3], &vec![z; 3], 1, 63),
            Err(Error::CapExceeded { rows: 64, cap: 63 })
        ));
        let p = DiagonalTensor::new(sr, 3, 4, vec![(0, true)]).unwrap();
        assert!(matches!(
            ref_type2(sr, &vec![id; 3], &p, &SliceQuery::full(), 63),
            Err(Error::CapExceeded { rows: 64, cap: 63 })
        ));
    }

    /// Second, independent evaluation: explicit loops over `(i_1, i_2)` and
    /// the entry formula, no Khatri-Rao materialization.
    fn triple_loop_k2(m: &DenseMatrix<u64>, vs: &[DenseMatrix<u64>], ps: &[DenseMatrix<u64>], i: usize) -> Vec<u64> {
        let n = m.rows();
        let mut g = vec![0u64; n];
        for c in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    g[c] += ps[0].get(i1, c) * ps[1].get(i2, c) * vs[0].get(i1, i) * vs[1].get(i2, i);
                }
            }
        }
        (0..n).map(|r| (0..n).map(|c| m.get(r, c) * g[c]).sum()).collect()
    }

    #[test]
    fn agrees_with_independent_loop_nest() {
        let sr = Natural;
        let mut rng = SplitMix(77);
        for _ in 0..20 {
            let n = 3;
            let m = rand_dense(sr, &mut rng, n, n);
            let vs = vec![rand_dense(sr, &mut rng, n, n), rand_dense(sr, &mut rng, n, n)];
            let ps = vec![rand_sparse(sr, &mut rng, n, n, 3), rand_sparse(sr, &mut rng, n, n, 3)];
            let pd: Vec<_> = ps.iter().map(|p| p.to_dense(sr)).collect();
            for i in 1..=n {
                let got = ref_type1(sr, &m, &vs, &ps, i, DEFAULT_CAP).unwrap();
                assert_eq!(got, triple_loop_k2(&m, &vs, &pd, i - 1));
            }
        }
    }

    #[test]
    fn hand_expanded_2x2x2() {
        // k = 3, n = d = 2, diag {1: 2, 2: 1}
        let sr = Natural;
        let v1 = DenseMatrix::from_vec(2, 2, vec![1u64, 2, 3, 0]).unwrap();
        let v2 = DenseMatrix::from_vec(2, 2, vec![1u64, 1, 0, 2]).unwrap();
        let v3 = DenseMatrix::from_vec(2, 2, vec![2u64, 1, 1, 3]).unwrap();
        let p = DiagonalTensor::new(sr, 3, 2, vec![(0, 2), (1, 1)]).unwrap();
        let view = ref_type2(sr, &[v1, v2, v3], &p, &SliceQuery::full(), DEFAULT_CAP).unwrap();
        // T[a][b][c] = 2·V1[a][0]V2[b][0]V3[c][0] + V1[a][1]V2[b][1]V3[c][1]
        // a=1: V1 row (1,2); a=2: (3,0); V2 rows (1,1),(0,2); V3 rows (2,1),(1,3)
        let expect = [
            [[2 * 2 + 2, 2 + 2 * 3], [(2 * 2), (2 * 2 * 3)]],
            [[(2 * 3) * 2, (2 * 3)], [0, 0]],
        ];
        assert_eq!(view.row_dirs(), &[1, 2]);
        assert_eq!(view.col_dirs(), &[3]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert_eq!(view.get(&[a + 1, b + 1, c + 1]).unwrap().to_u64(), expect[a][b][c]);
                }
            }
        }
    }

    #[test]
    fn type2_rank_one_and_empty() {
        let sr = Boolean;
        let id = DenseMatrix::identity(sr, 2);
        let p = DiagonalTensor::new(sr, 2, 2, vec![(0, true)]).unwrap();
        let view = ref_type2(sr, &[id.clone(), id.clone()], &p, &SliceQuery::full(), DEFAULT_CAP).unwrap();
        assert_eq!(view.data().as_slice(), &[true, false, false, false]);
        let empty = DiagonalTensor::new(sr, 2, 2, vec![]).unwrap();
        let view = ref_type2(sr, &[id.clone(), id], &empty, &SliceQuery::full(), DEFAULT_CAP).unwrap();
        assert!(view.data().as_slice().iter().all(|&x| !x));
    }
}
