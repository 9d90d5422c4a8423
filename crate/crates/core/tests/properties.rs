//! Cross-module invariants, driven through the public API.

use proptest::prelude::*;
use thmv_core::format::{Instance, InstanceFile};
use thmv_core::genrand::{gen_type1, gen_type2, GenConfig, SupportLayout};
use thmv_core::khatri_rao::{tensor_trick_gram, FactorList, DEFAULT_CAP};
use thmv_core::matrix::{nnz_budget, BudgetMode, DenseMatrix};
use thmv_core::reference::{ref_type1, ref_type2};
use thmv_core::type1::{Type1Instance, Type1Oracle};
use thmv_core::type2::{split_dirs, SliceQuery, Type2Oracle};
use thmv_core::{Boolean, Element, Natural, OpCounter, Semiring, Strategy};

fn layout(b: bool) -> SupportLayout {
    if b {
        SupportLayout::SharedColumns
    } else {
        SupportLayout::Independent
    }
}

fn tau_of(ix: usize) -> f64 {
    [0.25, 0.5, 0.75, 1.0][ix]
}

/// Random query: each direction fixed with probability 1/2.
fn slice_query(k: usize, n: usize, bits: u64) -> SliceQuery {
    let pairs = (1..=k)
        .filter(|d| bits >> (2 * d) & 1 == 1)
        .map(|d| (d, 1 + (bits >> (2 * d + 16)) as usize % n))
        .collect();
    SliceQuery::new(pairs)
}

fn type1_all_agree<S: Semiring>(sr: S, inst: &Type1Instance<S::Elem>) {
    let o1 = inst.oracle(sr, Strategy::Method1, BudgetMode::Strict).unwrap();
    let o2 = inst.oracle(sr, Strategy::Method2, BudgetMode::Strict).unwrap();
    for i in 1..=inst.n() {
        let r = ref_type1(sr, &inst.m, &inst.vs, &inst.ps, i, DEFAULT_CAP).unwrap();
        assert_eq!(o1.query(i).unwrap(), r, "M1 column {i}");
        assert_eq!(o2.query(i).unwrap(), r, "M2 column {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn type1_strategies_match_reference(n in 1usize..=8, k in 1usize..=3, t in 0usize..4, seed: u64, shared: bool) {
        let cfg = GenConfig::new(n, k, tau_of(t), seed).with_layout(layout(shared));
        type1_all_agree(Boolean, &gen_type1(Boolean, &cfg).unwrap());
        type1_all_agree(Natural, &gen_type1(Natural, &cfg).unwrap());
    }

    #[test]
    fn type1_k1_is_plain_hinted_mv(n in 1usize..=10, t in 0usize..4, seed: u64) {
        let sr = Natural;
        let inst = gen_type1(sr, &GenConfig::new(n, 1, tau_of(t), seed).with_layout(SupportLayout::Independent)).unwrap();
        let o = inst.oracle(sr, Strategy::Method2, BudgetMode::Strict).unwrap();
        let p = inst.ps[0].to_dense(sr);
        for i in 0..n {
            // M · Pᵀ · V_{*,i} by explicit sums
            let ptv: Vec<u64> = (0..n).map(|c| (0..n).map(|r| p.get(r, c) * inst.vs[0].get(r, i)).sum()).collect();
            let expect: Vec<u64> = (0..n).map(|r| (0..n).map(|c| inst.m.get(r, c) * ptv[c]).sum()).collect();
            prop_assert_eq!(o.query(i + 1).unwrap(), expect);
        }
    }

    #[test]
    fn type1_support_and_cost_ceiling(n in 1usize..=32, k in 1usize..=4, t in 0usize..4, seed: u64, shared: bool) {
        let tau = tau_of(t);
        let inst = gen_type1(Boolean, &GenConfig::new(n, k, tau, seed).with_layout(layout(shared))).unwrap();
        let budget = nnz_budget(n, tau) as u64;
        let o1 = inst.oracle(Boolean, Strategy::Method1, BudgetMode::Strict).unwrap();
        let min_cols = inst.ps.iter().map(|p| p.nonzero_columns().len()).min().unwrap();
        let support = o1.hadamard_support_len().unwrap();
        prop_assert!(support <= min_cols && min_cols as u64 <= budget);

        let o2 = inst.oracle(Boolean, Strategy::Method2, BudgetMode::Strict).unwrap();
        let k = k as u64;
        for i in 1..=n {
            let c = OpCounter::new();
            let ans = o2.query_traced(i, &c).unwrap();
            let muls = c.snapshot().muls;
            let nnz: u64 = inst.ps.iter().map(|p| p.nnz() as u64).sum();
            let u = ans.support_len as u64;
            prop_assert_eq!(muls, nnz + (k - 1) * u + n as u64 * u);
            prop_assert!(muls <= 2 * k * budget + n as u64 * budget);
        }
    }

    #[test]
    fn phase_deltas_sum_to_total(n in 1usize..=12, k in 1usize..=3, seed: u64, m1: bool) {
        let sr = Natural;
        let inst = gen_type1(sr, &GenConfig::new(n, k, 0.5, seed)).unwrap();
        let strategy = if m1 { Strategy::Method1 } else { Strategy::Method2 };
        let total = OpCounter::new();
        let mut o = Type1Oracle::preprocess(sr, inst.m.clone(), inst.vs.clone(), 0.5, strategy).unwrap();
        o.hint_counted(inst.ps.clone(), &total).unwrap();
        let mut p3 = thmv_core::OpTally::default();
        for i in 1..=n {
            let c = OpCounter::new();
            o.query_counted(i, &c).unwrap();
            o.query_counted(i, &total).unwrap();
            p3 = p3 + c.snapshot();
        }
        prop_assert_eq!(o.costs().preprocess + o.costs().hint + p3, total.snapshot());
    }

    #[test]
    fn type2_strategies_match_reference(n in 1usize..=4, d in 1usize..=4, k in 1usize..=3, t in 0usize..4, seed: u64, bits: u64) {
        let cfg = GenConfig::new(n, k, tau_of(t), seed).with_d(d);
        let q = slice_query(k, n, bits);
        for nat in [false, true] {
            if nat {
                let inst = gen_type2(Natural, &cfg).unwrap();
                let r = ref_type2(Natural, &inst.vs, &inst.p, &q, DEFAULT_CAP).unwrap();
                for s in [Strategy::Method1, Strategy::Method2] {
                    prop_assert_eq!(&inst.oracle(Natural, s, BudgetMode::Strict).unwrap().query(&q).unwrap(), &r);
                }
            } else {
                let inst = gen_type2(Boolean, &cfg).unwrap();
                let r = ref_type2(Boolean, &inst.vs, &inst.p, &q, DEFAULT_CAP).unwrap();
                for s in [Strategy::Method1, Strategy::Method2] {
                    prop_assert_eq!(&inst.oracle(Boolean, s, BudgetMode::Strict).unwrap().query(&q).unwrap(), &r);
                }
            }
        }
    }

    #[test]
    fn type2_slice_consistency(n in 1usize..=4, k in 1usize..=4, seed: u64, bits: u64) {
        let sr = Natural;
        let inst = gen_type2(sr, &GenConfig::new(n, k, 1.0, seed)).unwrap();
        let o = inst.oracle(sr, Strategy::Method2, BudgetMode::Strict).unwrap();
        let full = o.query(&SliceQuery::full()).unwrap();
        let q = slice_query(k, n, bits);
        let slice = o.query(&q).unwrap();
        let free = q.free_dirs(k);
        let (rd, cd) = split_dirs(&free);
        prop_assert_eq!(slice.row_dirs(), &rd[..]);
        prop_assert_eq!(slice.col_dirs(), &cd[..]);
        // walk every free coordinate tuple
        let cells = n.pow(free.len() as u32);
        for mut x in 0..cells {
            let mut coords = vec![0; k];
            for &(dir, i) in q.pairs() {
                coords[dir - 1] = i;
            }
            let mut sub = Vec::new();
            for &dir in &free {
                coords[dir - 1] = 1 + x % n;
                sub.push(coords[dir - 1]);
                x /= n;
            }
            prop_assert_eq!(slice.get(&sub).unwrap(), full.get(&coords).unwrap());
        }
    }

    #[test]
    fn type2_method2_cost_ceiling(n in 1usize..=6, d in 1usize..=6, k in 1usize..=4, t in 0usize..4, seed: u64, bits: u64) {
        // c pinned at 5
        let sr = Boolean;
        let inst = gen_type2(sr, &GenConfig::new(n, k, tau_of(t), seed).with_d(d)).unwrap();
        let o = Type2Oracle::preprocess(sr, inst.vs.clone(), inst.tau, Strategy::Method2).unwrap();
        let mut o = o;
        o.hint(inst.p.clone()).unwrap();
        let q = slice_query(k, n, bits);
        let c = OpCounter::new();
        o.query_counted(&q, &c).unwrap();
        let (s, m, nd) = (q.s() as u64, (k - q.s()) as u32, inst.p.nnz() as u64);
        let n = n as u64;
        let bound = 5 * (s * nd + n.pow(m.div_ceil(2)) * nd + n.pow(m) * nd);
        prop_assert!(c.snapshot().muls <= bound, "{} > {}", c.snapshot().muls, bound);
    }

    #[test]
    fn instance_files_round_trip(n in 1usize..=6, k in 1usize..=3, t in 0usize..4, seed: u64, ty2: bool, nat: bool) {
        let cfg = GenConfig::new(n, k, tau_of(t), seed).with_d(1 + seed as usize % 5);
        let file = match (ty2, nat) {
            (false, false) => InstanceFile::Bool(Instance::Type1 { inst: gen_type1(Boolean, &cfg).unwrap(), queries: vec![n] }),
            (false, true) => InstanceFile::Nat(Instance::Type1 { inst: gen_type1(Natural, &cfg).unwrap(), queries: vec![1] }),
            (true, false) => InstanceFile::Bool(Instance::Type2 { inst: gen_type2(Boolean, &cfg).unwrap(), queries: vec![slice_query(k, n, seed)] }),
            (true, true) => InstanceFile::Nat(Instance::Type2 { inst: gen_type2(Natural, &cfg).unwrap(), queries: vec![] }),
        };
        let text = file.serialize();
        prop_assert_eq!(InstanceFile::parse(&text).unwrap(), file);
    }

    #[test]
    fn generator_budgets_are_exact(n in 1usize..=40, k in 1usize..=3, t in 0usize..4, seed: u64, shared: bool) {
        let tau = tau_of(t);
        let cfg = GenConfig::new(n, k, tau, seed).with_layout(layout(shared));
        let a = gen_type1(Boolean, &cfg).unwrap();
        prop_assert!(a.ps.iter().all(|p| p.nnz() == nnz_budget(n, tau)));
        prop_assert_eq!(&a, &gen_type1(Boolean, &cfg).unwrap());
        let b = gen_type2(Natural, &cfg.clone().with_d(3)).unwrap();
        prop_assert_eq!(b.p.nnz(), nnz_budget(n, tau).min(3));
    }
}

#[test]
fn gram_never_touches_the_product_rows() {
    // 400^3 = 6.4e7 rows would far exceed any cap; the trick only needs k small grams.
    let sr = Natural;
    let f = |c: u64| DenseMatrix::from_fn(400, 2, |r, j| (r as u64 + j as u64 + c) % 3);
    let a = FactorList::new(vec![f(0), f(1), f(2)]).unwrap();
    let b = FactorList::new(vec![f(2), f(0), f(1)]).unwrap();
    assert!(a.total_rows().unwrap() > 1 << 25);
    let g = tensor_trick_gram(sr, &a, &b).unwrap();
    // entry (0,0): ∏_ℓ Σ_r A_ℓ[r][0]·B_ℓ[r][0], computed per factor
    let expect: u64 = (0..3)
        .map(|l| {
            let (ca, cb) = ([0, 1, 2][l], [2, 0, 1][l]);
            (0..400u64).map(|r| ((r + ca) % 3) * ((r + cb) % 3)).sum::<u64>()
        })
        .product();
    assert_eq!(g.get(0, 0).to_u64(), expect);
}
