//! The `thmv` command line: `gen`, `verify`, `bench` and `fit`.
//!
//! Exit codes are `0` on success, `1` when a check or threshold fails and
//! `2` on usage errors. When `--seed` is omitted the seed is read from
//! `THMV_SEED`, falling back to `0`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::costmodel::{fit_exponent, mean_by_n, PhaseLabel};
use crate::error::Error;
use crate::format::{Instance, InstanceFile};
use crate::genrand::{gen_gram_pair, gen_type1, gen_type2, GenConfig, SupportLayout};
use crate::khatri_rao::{kr_materialize, tensor_trick_gram, DEFAULT_CAP};
use crate::matrix::{column, matmul_dense, nnz_budget, BudgetMode};
use crate::reference::{ref_type1_full, ref_type2};
use crate::semiring::{Boolean, Element, Natural, OpCounter, OpTally, Semiring, SemiringKind};
use crate::type1::{Type1Instance, Type1Oracle};
use crate::type2::{SliceQuery, Type2Instance, Type2Oracle};
use crate::Strategy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CSV_HEADER: &str = "type,method,phase,n,k,d,tau,semiring,seed,nnz,adds,muls,wall_ns";

pub const SEED_ENV: &str = "THMV_SEED";

#[derive(Parser, Debug)]
#[command(name = "thmv", version, about = "Tensor Hinted Mv oracles: generation, verification, benchmarks and exponent fits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a random instance file.
    Gen(GenArgs),
    /// Compare both methods against the reference oracles.
    Verify(VerifyArgs),
    /// Emit per-phase operation counts as CSV.
    Bench(BenchArgs),
    /// Fit a log-log exponent to bench output.
    Fit(FitArgs),
}

fn problem_type(s: &str) -> Result<u8, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        _ => Err(format!("type must be 1 or 2, got `{s}`")),
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long = "type", value_parser = problem_type)]
    ty: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Column count of the V matrices (type 2 only; defaults to n).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value = "bool")]
    semiring: SemiringKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "shared")]
    layout: SupportLayout,
    /// Number of query lines to append.
    #[arg(long, default_value_t = 0)]
    queries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Instances per configuration.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Check a single instance file instead of running the sweep.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Flip one bit of one answer to exercise the failure path.
    #[arg(long)]
    self_test_negative: bool,
    /// Where to write the first counterexample (default: standard error).
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodSel {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

impl MethodSel {
    fn strategies(self) -> &'static [Strategy] {
        match self {
            MethodSel::One => &[Strategy::Method1],
            MethodSel::Two => &[Strategy::Method2],
            MethodSel::Both => &[Strategy::Method1, Strategy::Method2],
        }
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long = "type", value_parser = problem_type, default_value = "1")]
    ty: u8,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodSel,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Type 2 only; defaults to n.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 64)]
    nmin: usize,
    #[arg(long, default_value_t = 1024)]
    nmax: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "bool")]
    semiring: SemiringKind,
    /// Phase-3 queries per trial; the P3 row sums their counts.
    #[arg(long, default_value_t = 16)]
    queries: usize,
    /// Type 2 only: fixed directions per query (default k - 1).
    #[arg(long)]
    fixed: Option<usize>,
    #[arg(long, default_value = "shared")]
    layout: SupportLayout,
    /// Type 2 only: materialization cap in rows.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Muls,
    Adds,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "P3")]
    phase: PhaseLabel,
    #[arg(long, value_parser = problem_type, default_value = "2")]
    method: u8,
    #[arg(long = "type", value_parser = problem_type, default_value = "1")]
    ty: u8,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    semiring: Option<SemiringKind>,
    #[arg(long, value_enum, default_value = "muls")]
    metric: Metric,
    /// Leave the smallest n out of the fit.
    #[arg(long)]
    drop_smallest: bool,
    #[arg(long, requires = "tol")]
    expect: Option<f64>,
    #[arg(long, requires = "expect")]
    tol: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let res = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(&a, out),
        Cmd::Verify(a) => cmd_verify(&a, out, err),
        Cmd::Bench(a) => cmd_bench(&a, out, err),
        Cmd::Fit(a) => cmd_fit(&a, out),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

enum Failure {
    Usage(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<i32, Failure>;

fn resolve_seed(seed: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}=`{v}` is not a 64-bit unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => out.write_all(text.as_bytes()),
    }
}

/// `count` column indices in `1..=n`, evenly spaced from 1.
fn spaced(n: usize, count: usize) -> Vec<usize> {
    let count = count.min(n);
    (0..count).map(|q| 1 + q * n / count).collect()
}

/// Queries fixing the last `s` directions, all at the same spaced index.
fn spaced_slices(n: usize, k: usize, s: usize, count: usize) -> Vec<SliceQuery> {
    spaced(n, count)
        .into_iter()
        .map(|i| SliceQuery::new((k - s + 1..=k).map(|dir| (dir, i)).collect()))
        .collect()
}

// ---------------------------------------------------------------- gen

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> CmdResult {
    let seed = resolve_seed(a.seed)?;
    if a.ty == 1 && a.d.is_some() {
        return Err(Failure::Usage("--d only applies to --type 2".into()));
    }
    let cfg = GenConfig::new(a.n, a.k, a.tau, seed)
        .with_d(a.d.unwrap_or(a.n))
        .with_layout(a.layout);
    let file = match a.semiring {
        SemiringKind::Boolean => gen_file(Boolean, a, &cfg)?,
        SemiringKind::Natural => gen_file(Natural, a, &cfg)?,
    };
    write_output(a.out.as_deref(), &file.serialize(), out)?;
    Ok(EXIT_OK)
}

fn gen_file<S: Semiring>(sr: S, a: &GenArgs, cfg: &GenConfig) -> Result<InstanceFile, Failure>
where
    InstanceFile: From<Instance<S::Elem>>,
{
    let inst = if a.ty == 1 {
        Instance::Type1 {
            inst: gen_type1(sr, cfg)?,
            queries: spaced(a.n, a.queries),
        }
    } else {
        Instance::Type2 {
            inst: gen_type2(sr, cfg)?,
            queries: spaced_slices(a.n, a.k, a.k - 1, a.queries),
        }
    };
    Ok(inst.into())
}

// ---------------------------------------------------------------- verify

#[derive(Default)]
struct Verifier {
    checks: BTreeMap<String, (u64, u64)>,
    first_failure: Option<(String, Option<InstanceFile>)>,
    inject_fault: bool,
}

impl Verifier {
    fn record(&mut self, check: &str, ok: bool) -> bool {
        let e = self.checks.entry(check.to_owned()).or_default();
        if ok {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
        ok
    }

    fn fail(&mut self, what: String, dump: impl FnOnce() -> Option<InstanceFile>) {
        if self.first_failure.is_none() {
            self.first_failure = Some((what, dump()));
        }
    }

    /// Corrupts `v` once if a fault is pending.
    fn maybe_flip<E: Element>(&mut self, v: &mut [E]) {
        if self.inject_fault && !v.is_empty() {
            self.inject_fault = false;
            v[0] = E::from_u64(v[0].to_u64() ^ 1).expect("0 and 1 are in every carrier");
        }
    }

    fn mismatches(&self) -> u64 {
        self.checks.values().map(|c| c.1).sum()
    }
}

fn eq_or_err<T: PartialEq>(a: &Result<T, Error>, b: &Result<T, Error>) -> bool {
    matches!((a, b), (Ok(x), Ok(y)) if x == y)
}

fn verify_type1<S: Semiring>(v: &mut Verifier, sr: S, inst: &Type1Instance<S::Elem>, queries: &[usize])
where
    InstanceFile: From<Instance<S::Elem>>,
{
    let name = sr.name();
    let dump = |i: usize| {
        Some(InstanceFile::from(Instance::Type1 {
            inst: inst.clone(),
            queries: vec![i],
        }))
    };
    let setup = (|| {
        let o1 = inst.oracle(sr, Strategy::Method1, BudgetMode::Strict)?;
        let o2 = inst.oracle(sr, Strategy::Method2, BudgetMode::Strict)?;
        let full = ref_type1_full(sr, &inst.m, &inst.vs, &inst.ps, DEFAULT_CAP)?;
        Ok::<_, Error>((o1, o2, full))
    })();
    let (o1, o2, full) = match setup {
        Ok(x) => x,
        Err(e) => {
            v.record(&format!("type1 setup {name}"), false);
            v.fail(format!("type1 setup failed: {e}"), || dump(1));
            return;
        }
    };
    let budget = nnz_budget(inst.n(), inst.tau);
    let support_ok = o1.hadamard_support_len().is_some_and(|s| s <= budget);
    if !v.record(&format!("type1 support<=budget {name}"), support_ok) {
        v.fail(format!("type1 support {:?} exceeds budget {budget}", o1.hadamard_support_len()), || dump(1));
    }
    for &i in queries {
        let r = column(&full, i);
        let a1 = o1.query(i);
        let mut a2 = o2.query(i);
        if let Ok(x) = a2.as_mut() {
            v.maybe_flip(x);
        }
        for (label, got) in [("m1=ref", &a1), ("m2=ref", &a2)] {
            if !v.record(&format!("type1 {label} {name}"), eq_or_err(got, &r)) {
                v.fail(format!("type1 {label} mismatch at query {i}: got {got:?}, reference {r:?}"), || dump(i));
            }
        }
    }
}

/// Every slice query of an order-`k`, side-`n` tensor: all subsets of
/// directions times all index assignments.
pub fn all_slice_queries(k: usize, n: usize) -> Vec<SliceQuery> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        let dirs: Vec<usize> = (1..=k).filter(|d| mask & (1 << (d - 1)) != 0).collect();
        let total = n.pow(dirs.len() as u32);
        for mut x in 0..total {
            let mut pairs = Vec::with_capacity(dirs.len());
            for &dir in &dirs {
                pairs.push((dir, 1 + x % n));
                x /= n;
            }
            out.push(SliceQuery::new(pairs));
        }
    }
    out
}

fn verify_type2<S: Semiring>(v: &mut Verifier, sr: S, inst: &Type2Instance<S::Elem>, queries: &[SliceQuery])
where
    InstanceFile: From<Instance<S::Elem>>,
{
    let name = sr.name();
    let dump = |q: &SliceQuery| {
        Some(InstanceFile::from(Instance::Type2 {
            inst: inst.clone(),
            queries: vec![q.clone()],
        }))
    };
    let setup = (|| {
        let o1 = inst.oracle(sr, Strategy::Method1, BudgetMode::Strict)?;
        let o2 = inst.oracle(sr, Strategy::Method2, BudgetMode::Strict)?;
        Ok::<_, Error>((o1, o2))
    })();
    let (o1, o2) = match setup {
        Ok(x) => x,
        Err(e) => {
            v.record(&format!("type2 setup {name}"), false);
            v.fail(format!("type2 setup failed: {e}"), || dump(&SliceQuery::full()));
            return;
        }
    };
    for q in queries {
        let r = ref_type2(sr, &inst.vs, &inst.p, q, DEFAULT_CAP);
        let a1 = o1.query(q);
        let mut a2 = o2.query(q);
        if v.inject_fault {
            if let Ok(view) = a2.as_mut() {
                let mut data = view.data().as_slice().to_vec();
                v.maybe_flip(&mut data);
                let rebuilt = crate::matrix::DenseMatrix::from_vec(view.data().rows(), view.data().cols(), data)
                    .and_then(|m| crate::type2::TensorMatrixView::new(view.n(), view.row_dirs().to_vec(), view.col_dirs().to_vec(), m));
                if let Ok(x) = rebuilt {
                    *view = x;
                }
            }
        }
        for (label, got) in [("m1=ref", &a1), ("m2=ref", &a2)] {
            if !v.record(&format!("type2 {label} {name}"), eq_or_err(got, &r)) {
                v.fail(format!("type2 {label} mismatch at query {:?}", q.pairs()), || dump(q));
            }
        }
        // k = 2 with one fixed direction is the matrix case V_a diag(P) V_bᵀ.
        if inst.k() == 2 && q.s() == 1 {
            let (dir, i) = q.pairs()[0];
            let (free_v, fixed_v) = if dir == 2 { (&inst.vs[0], &inst.vs[1]) } else { (&inst.vs[1], &inst.vs[0]) };
            let expect: Result<Vec<S::Elem>, Error> = (0..inst.n())
                .map(|a| {
                    inst.p.diag().iter().try_fold(sr.zero(), |acc, &(j, pj)| {
                        let t = sr.mul(sr.mul(free_v.get(a, j), pj)?, fixed_v.get(i - 1, j))?;
                        sr.add(acc, t)
                    })
                })
                .collect();
            let got = a2.as_ref().map(|view| view.data().as_slice().to_vec()).map_err(Clone::clone);
            if !v.record(&format!("type2 matrix-case {name}"), eq_or_err(&got, &expect)) {
                v.fail(format!("type2 matrix-case mismatch at query {:?}", q.pairs()), || dump(q));
            }
        }
    }
}

fn verify_gram<S: Semiring>(v: &mut Verifier, sr: S, seed: u64) {
    let name = sr.name();
    let res = (|| {
        let (a, b) = gen_gram_pair(sr, seed)?;
        let fast = tensor_trick_gram(sr, &a, &b)?;
        let slow = matmul_dense(sr, &kr_materialize(sr, &a, DEFAULT_CAP)?.transpose(), &kr_materialize(sr, &b, DEFAULT_CAP)?)?;
        Ok::<_, Error>(fast == slow)
    })();
    if !v.record(&format!("gram {name}"), res == Ok(true)) {
        v.fail(format!("gram mismatch for pair seed {seed}: {res:?}"), || None);
    }
}

pub const TYPE1_SWEEP: ([usize; 3], [usize; 3], [f64; 3]) = ([4, 8, 16], [1, 2, 3], [0.25, 0.5, 1.0]);
pub const TYPE2_SWEEP: ([usize; 2], [usize; 3], [f64; 2]) = ([2, 3], [2, 3, 4], [0.5, 1.0]);

fn sweep<S: Semiring>(v: &mut Verifier, sr: S, trials: usize, seed: u64) -> Result<(), Error>
where
    InstanceFile: From<Instance<S::Elem>>,
{
    for t in 0..trials as u64 * 10 {
        verify_gram(v, sr, seed.wrapping_add(t));
    }
    let (ns, ks, taus) = TYPE1_SWEEP;
    for n in ns {
        for k in ks {
            for tau in taus {
                for t in 0..trials as u64 {
                    let layout = if t % 2 == 0 { SupportLayout::SharedColumns } else { SupportLayout::Independent };
                    let cfg = GenConfig::new(n, k, tau, seed.wrapping_add(t)).with_layout(layout);
                    let inst = gen_type1(sr, &cfg)?;
                    verify_type1(v, sr, &inst, &(1..=n).collect::<Vec<_>>());
                }
            }
        }
    }
    let (ks, ns, taus) = TYPE2_SWEEP;
    for k in ks {
        for n in ns {
            let queries = all_slice_queries(k, n);
            for tau in taus {
                for t in 0..trials as u64 {
                    let inst = gen_type2(sr, &GenConfig::new(n, k, tau, seed.wrapping_add(t)))?;
                    verify_type2(v, sr, &inst, &queries);
                }
            }
        }
    }
    Ok(())
}

fn verify_file<S: Semiring>(v: &mut Verifier, sr: S, inst: Instance<S::Elem>)
where
    InstanceFile: From<Instance<S::Elem>>,
{
    match inst {
        Instance::Type1 { inst, queries } => {
            let qs = if queries.is_empty() { (1..=inst.n()).collect() } else { queries };
            verify_type1(v, sr, &inst, &qs);
        }
        Instance::Type2 { inst, queries } => {
            let qs = if queries.is_empty() { all_slice_queries(inst.k(), inst.n()) } else { queries };
            verify_type2(v, sr, &inst, &qs);
        }
    }
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let seed = resolve_seed(a.seed)?;
    let mut v = Verifier {
        inject_fault: a.self_test_negative,
        ..Verifier::default()
    };
    if let Some(path) = &a.instance {
        let text = std::fs::read_to_string(path)?;
        match InstanceFile::parse(&text)? {
            InstanceFile::Bool(i) => verify_file(&mut v, Boolean, i),
            InstanceFile::Nat(i) => verify_file(&mut v, Natural, i),
        }
    } else {
        if a.trials == 0 {
            return Err(Failure::Usage("--trials must be positive".into()));
        }
        sweep(&mut v, Boolean, a.trials, seed)?;
        sweep(&mut v, Natural, a.trials, seed)?;
    }
    for (check, (pass, fail)) in &v.checks {
        writeln!(out, "{check}: {pass} passed, {fail} failed")?;
    }
    let mismatches = v.mismatches();
    let total: u64 = v.checks.values().map(|c| c.0 + c.1).sum();
    if let Some((what, file)) = &v.first_failure {
        writeln!(err, "first counterexample: {what}")?;
        if let Some(f) = file {
            match &a.dump {
                Some(p) => {
                    std::fs::write(p, f.serialize())?;
                    writeln!(err, "counterexample written to {}", p.display())?;
                }
                None => err.write_all(f.serialize().as_bytes())?,
            }
        }
    }
    writeln!(out, "verify: {} ({total} comparisons, {mismatches} mismatches)", if mismatches == 0 { "ok" } else { "FAILED" })?;
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_FAIL })
}

// ---------------------------------------------------------------- bench

/// One CSV row. Counts are `None` when the phase could not run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub ty: u8,
    pub method: Strategy,
    pub phase: PhaseLabel,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub tau: f64,
    pub semiring: SemiringKind,
    pub seed: u64,
    pub nnz: usize,
    pub ops: Option<OpTally>,
    pub wall_ns: Option<u128>,
}

impl BenchRow {
    /// The 13 CSV fields in header order; counts are empty when absent.
    pub fn record(&self) -> [String; 13] {
        let (adds, muls) = match self.ops {
            Some(o) => (o.adds.to_string(), o.muls.to_string()),
            None => (String::new(), String::new()),
        };
        [
            self.ty.to_string(),
            format!("M{}", self.method.number()),
            self.phase.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.d.to_string(),
            self.tau.to_string(),
            self.semiring.to_string(),
            self.seed.to_string(),
            self.nnz.to_string(),
            adds,
            muls,
            self.wall_ns.map(|ns| ns.to_string()).unwrap_or_default(),
        ]
    }

    pub fn from_record(f: &csv::StringRecord) -> Result<Self, String> {
        if f.len() != 13 {
            return Err(format!("expected 13 fields, found {}", f.len()));
        }
        fn p<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {what} `{s}`"))
        }
        fn opt<T: std::str::FromStr>(s: &str, what: &str) -> Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                p(s, what).map(Some)
            }
        }
        let method = f[1]
            .strip_prefix('M')
            .and_then(|m| m.parse().ok())
            .and_then(Strategy::from_number)
            .ok_or_else(|| format!("bad method `{}`", &f[1]))?;
        let adds: Option<u64> = opt(&f[10], "adds")?;
        let muls: Option<u64> = opt(&f[11], "muls")?;
        let ops = match (adds, muls) {
            (Some(adds), Some(muls)) => Some(OpTally { adds, muls }),
            (None, None) => None,
            _ => return Err("adds and muls must both be present or both empty".into()),
        };
        Ok(BenchRow {
            ty: problem_type(&f[0])?,
            method,
            phase: f[2].parse().map_err(|e: Error| e.to_string())?,
            n: p(&f[3], "n")?,
            k: p(&f[4], "k")?,
            d: p(&f[5], "d")?,
            tau: p(&f[6], "tau")?,
            semiring: f[7].parse().map_err(|e: Error| e.to_string())?,
            seed: p(&f[8], "seed")?,
            nnz: p(&f[9], "nnz")?,
            ops,
            wall_ns: opt(&f[12], "wall_ns")?,
        })
    }
}

/// Parses a whole bench CSV, checking the header.
pub fn parse_bench_csv(text: &str) -> Result<Vec<BenchRow>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let line = rec.position().map_or(0, |p| p.line());
            BenchRow::from_record(&rec).map_err(|e| format!("line {line}: {e}"))
        })
        .collect()
}

struct Timed<T> {
    value: Result<T, Error>,
    ops: OpTally,
    wall_ns: u128,
}

fn timed<T>(counter: &OpCounter, f: impl FnOnce() -> Result<T, Error>) -> Timed<T> {
    let before = counter.snapshot();
    let start = Instant::now();
    let value = f();
    Timed {
        value,
        wall_ns: start.elapsed().as_nanos(),
        ops: counter.snapshot().since(before),
    }
}

fn bench_sweep<S: Semiring>(sr: S, a: &BenchArgs, seed: u64, emit: &mut dyn FnMut(BenchRow) -> io::Result<()>, err: &mut dyn Write) -> io::Result<()> {
    let mut n = a.nmin;
    while n <= a.nmax {
        for t in 0..a.trials as u64 {
            let trial_seed = seed.wrapping_add(t);
            let d = if a.ty == 1 { n } else { a.d.unwrap_or(n) };
            let cfg = GenConfig::new(n, a.k, a.tau, trial_seed).with_d(d).with_layout(a.layout);
            for &strategy in a.method.strategies() {
                let row = |phase, nnz, timed: Option<(OpTally, u128)>| BenchRow {
                    ty: a.ty,
                    method: strategy,
                    phase,
                    n,
                    k: a.k,
                    d,
                    tau: a.tau,
                    semiring: if sr.add_idempotent() { SemiringKind::Boolean } else { SemiringKind::Natural },
                    seed: trial_seed,
                    nnz,
                    ops: timed.map(|x| x.0),
                    wall_ns: timed.map(|x| x.1),
                };
                let rows = if a.ty == 1 {
                    bench_type1(sr, &cfg, strategy, a.queries)
                } else {
                    bench_type2(sr, &cfg, strategy, a.queries, a.fixed.unwrap_or(a.k - 1), a.cap)
                };
                match rows {
                    Ok((nnz, phases)) => {
                        for (label, res) in PhaseLabel::ALL.into_iter().zip(phases) {
                            let ok = match res {
                                Ok(x) => Some(x),
                                Err(e) => {
                                    writeln!(err, "n={n} seed={trial_seed} M{} {label}: {e}", strategy.number())?;
                                    None
                                }
                            };
                            emit(row(label, nnz, ok))?;
                        }
                    }
                    Err(e) => writeln!(err, "n={n} seed={trial_seed}: generation failed: {e}")?,
                }
            }
        }
        n *= 2;
    }
    Ok(())
}

type PhaseResults = Vec<Result<(OpTally, u128), Error>>;

/// Runs all three phases; later phases are skipped with the earlier error.
fn bench_type1<S: Semiring>(sr: S, cfg: &GenConfig, strategy: Strategy, queries: usize) -> Result<(usize, PhaseResults), Error> {
    let inst = gen_type1(sr, cfg)?;
    let nnz = inst.ps.iter().map(|p| p.nnz()).max().unwrap_or(0);
    let counter = OpCounter::new();
    let p1 = timed(&counter, || Type1Oracle::preprocess(sr, inst.m, inst.vs, inst.tau, strategy));
    let mut oracle = match p1.value {
        Ok(o) => o,
        Err(e) => return Ok((nnz, vec![Err(e.clone()), Err(e.clone()), Err(e)])),
    };
    let mut out = vec![Ok((p1.ops, p1.wall_ns))];
    let p2 = timed(&counter, || oracle.hint_counted(inst.ps, &counter));
    if let Err(e) = p2.value {
        out.extend([Err(e.clone()), Err(e)]);
        return Ok((nnz, out));
    }
    out.push(Ok((p2.ops, p2.wall_ns)));
    let idx = spaced(cfg.n, queries);
    let p3 = timed(&counter, || idx.iter().try_for_each(|&i| oracle.query_counted(i, &counter).map(drop)));
    out.push(p3.value.map(|_| (p3.ops, p3.wall_ns)));
    Ok((nnz, out))
}

fn bench_type2<S: Semiring>(
    sr: S,
    cfg: &GenConfig,
    strategy: Strategy,
    queries: usize,
    s: usize,
    cap: usize,
) -> Result<(usize, PhaseResults), Error> {
    if s > cfg.k {
        return Err(Error::InvalidParameter(format!("--fixed {s} exceeds k = {}", cfg.k)));
    }
    let inst = gen_type2(sr, cfg)?;
    let nnz = inst.p.nnz();
    let counter = OpCounter::new();
    let p1 = timed(&counter, || Type2Oracle::preprocess(sr, inst.vs, inst.tau, strategy).map(|o| o.with_cap(cap)));
    let mut oracle = match p1.value {
        Ok(o) => o,
        Err(e) => return Ok((nnz, vec![Err(e.clone()), Err(e.clone()), Err(e)])),
    };
    let mut out = vec![Ok((p1.ops, p1.wall_ns))];
    let p2 = timed(&counter, || oracle.hint_counted(inst.p, &counter));
    if let Err(e) = p2.value {
        out.extend([Err(e.clone()), Err(e)]);
        return Ok((nnz, out));
    }
    out.push(Ok((p2.ops, p2.wall_ns)));
    let qs = spaced_slices(cfg.n, cfg.k, s, queries);
    let p3 = timed(&counter, || qs.iter().try_for_each(|q| oracle.query_counted(q, &counter).map(drop)));
    out.push(p3.value.map(|_| (p3.ops, p3.wall_ns)));
    Ok((nnz, out))
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let seed = resolve_seed(a.seed)?;
    for (name, v) in [("--nmin", a.nmin), ("--nmax", a.nmax)] {
        if !v.is_power_of_two() {
            return Err(Failure::Usage(format!("{name} must be a power of two, got {v}")));
        }
    }
    if a.nmin > a.nmax {
        return Err(Failure::Usage("--nmin exceeds --nmax".into()));
    }
    if a.trials == 0 || a.k == 0 || a.queries == 0 {
        return Err(Failure::Usage("--trials, --k and --queries must be positive".into()));
    }
    if a.ty == 1 && (a.d.is_some() || a.fixed.is_some()) {
        return Err(Failure::Usage("--d and --fixed only apply to --type 2".into()));
    }
    if a.ty == 1 && !(a.tau > 0.0 && a.tau <= 1.0) {
        return Err(Failure::Usage(format!("type 1 needs tau in (0, 1], got {}", a.tau)));
    }
    if a.fixed.is_some_and(|s| s > a.k) {
        return Err(Failure::Usage(format!("--fixed exceeds k = {}", a.k)));
    }
    if a.ty == 1 && a.method != MethodSel::Two {
        writeln!(
            err,
            "note: the n^omega(1,1,tau) phase-2 bound is not measured (fast matrix multiplication is out of scope); \
             Method 1 phase 2 uses the naive n^(2+tau) product"
        )?;
    }

    let mut file;
    let sink: &mut dyn Write = match &a.out {
        Some(p) => {
            file = io::BufWriter::new(std::fs::File::create(p)?);
            &mut file
        }
        None => out,
    };
    let mut csv_out = csv::Writer::from_writer(sink);
    csv_out.write_record(CSV_HEADER.split(','))?;
    let mut emit = |row: BenchRow| {
        csv_out.write_record(row.record())?;
        // keep partial output useful if a long sweep is interrupted
        csv_out.flush()
    };
    match a.semiring {
        SemiringKind::Boolean => bench_sweep(Boolean, a, seed, &mut emit, err)?,
        SemiringKind::Natural => bench_sweep(Natural, a, seed, &mut emit, err)?,
    }
    csv_out.flush()?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- fit

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(&a.csv)?;
    let rows = parse_bench_csv(&text).map_err(|e| Failure::Usage(format!("{}: {e}", a.csv.display())))?;
    let samples: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| {
            r.ty == a.ty
                && r.method.number() == a.method
                && r.phase == a.phase
                && a.k.is_none_or(|k| r.k == k)
                && a.tau.is_none_or(|t| r.tau == t)
                && a.semiring.is_none_or(|s| r.semiring == s)
        })
        .filter_map(|r| {
            let ops = r.ops?;
            let c = match a.metric {
                Metric::Muls => ops.muls,
                Metric::Adds => ops.adds,
            };
            Some((r.n as f64, c as f64))
        })
        .collect();
    let points = mean_by_n(&samples, a.drop_smallest);
    writeln!(
        out,
        "selection: type={} method=M{} phase={} metric={} rows={} points={}",
        a.ty,
        a.method,
        a.phase,
        match a.metric {
            Metric::Muls => "muls",
            Metric::Adds => "adds",
        },
        samples.len(),
        points.len()
    )?;
    for (n, c) in &points {
        writeln!(out, "  n={n} mean={c}")?;
    }
    let fit = fit_exponent(&points).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out, "{fit}")?;
    if let (Some(expect), Some(tol)) = (a.expect, a.tol) {
        let ok = (fit.slope - expect).abs() <= tol;
        writeln!(out, "expect {expect} +/- {tol}: {}", if ok { "PASS" } else { "FAIL" })?;
        if !ok {
            return Ok(EXIT_FAIL);
        }
    }
    Ok(EXIT_OK)
}
