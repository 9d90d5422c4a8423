//! The line-oriented instance file.
//!
//! ```text
//! type1 semiring=nat n=2 k=1 tau=1
//! M
//! 1 0
//! 2 3
//! V 1
//! 0 1
//! 1 1
//! P 1 nnz=2
//! 1 1 2
//! 2 2 1
//! query 1
//! ```
//!
//! Type-II files carry `d=<d>` in the header, no `M` block, and a single
//! `P diag nnz=<m>` block of `j v` lines; their queries are
//! `query <dir>:<index> ...` (a bare `query` asks for the whole tensor).
//! Every index is 1-based, booleans are written as `0`/`1`, and blank lines
//! and `#` comments are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::semiring::{Boolean, Element, Natural, Semiring, SemiringKind};
use crate::type1::Type1Instance;
use crate::type2::{DiagonalTensor, SliceQuery, Type2Instance};

#[derive(Debug, Clone, PartialEq)]
pub enum Instance<E> {
    Type1 {
        inst: Type1Instance<E>,
        queries: Vec<usize>,
    },
    Type2 {
        inst: Type2Instance<E>,
        queries: Vec<SliceQuery>,
    },
}

impl<E: Element> Instance<E> {
    pub fn type_number(&self) -> u8 {
        match self {
            Instance::Type1 { .. } => 1,
            Instance::Type2 { .. } => 2,
        }
    }
}

/// An instance file over either semiring.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceFile {
    Bool(Instance<bool>),
    Nat(Instance<u64>),
}

impl InstanceFile {
    pub fn semiring(&self) -> SemiringKind {
        match self {
            InstanceFile::Bool(_) => SemiringKind::Boolean,
            InstanceFile::Nat(_) => SemiringKind::Natural,
        }
    }

    pub fn serialize(&self) -> String {
        match self {
            InstanceFile::Bool(i) => write_instance(SemiringKind::Boolean, i),
            InstanceFile::Nat(i) => write_instance(SemiringKind::Natural, i),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header = Header::parse(no, header)?;
        match header.semiring {
            SemiringKind::Boolean => Ok(InstanceFile::Bool(read_body(Boolean, &header, &mut lines)?)),
            SemiringKind::Natural => Ok(InstanceFile::Nat(read_body(Natural, &header, &mut lines)?)),
        }
    }
}

impl From<Instance<bool>> for InstanceFile {
    fn from(i: Instance<bool>) -> Self {
        InstanceFile::Bool(i)
    }
}

impl From<Instance<u64>> for InstanceFile {
    fn from(i: Instance<u64>) -> Self {
        InstanceFile::Nat(i)
    }
}

fn write_row<E: Element>(out: &mut String, row: &[E]) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{}", v.to_u64());
    }
    out.push('\n');
}

fn write_dense<E: Element>(out: &mut String, m: &DenseMatrix<E>) {
    for r in 0..m.rows() {
        write_row(out, m.row(r));
    }
}

fn write_instance<E: Element>(kind: SemiringKind, inst: &Instance<E>) -> String {
    let mut out = String::new();
    match inst {
        Instance::Type1 { inst, queries } => {
            let _ = writeln!(out, "type1 semiring={kind} n={} k={} tau={}", inst.n(), inst.k(), inst.tau);
            out.push_str("M\n");
            write_dense(&mut out, &inst.m);
            for (j, v) in inst.vs.iter().enumerate() {
                let _ = writeln!(out, "V {}", j + 1);
                write_dense(&mut out, v);
            }
            for (j, p) in inst.ps.iter().enumerate() {
                let _ = writeln!(out, "P {} nnz={}", j + 1, p.nnz());
                for &(r, c, v) in p.entries() {
                    let _ = writeln!(out, "{} {} {}", r + 1, c + 1, v.to_u64());
                }
            }
            for i in queries {
                let _ = writeln!(out, "query {i}");
            }
        }
        Instance::Type2 { inst, queries } => {
            let _ = writeln!(
                out,
                "type2 semiring={kind} n={} k={} d={} tau={}",
                inst.n(),
                inst.k(),
                inst.d(),
                inst.tau
            );
            for (j, v) in inst.vs.iter().enumerate() {
                let _ = writeln!(out, "V {}", j + 1);
                write_dense(&mut out, v);
            }
            let _ = writeln!(out, "P diag nnz={}", inst.p.nnz());
            for &(j, v) in inst.p.diag() {
                let _ = writeln!(out, "{} {}", j + 1, v.to_u64());
            }
            for q in queries {
                out.push_str("query");
                for &(dir, i) in q.pairs() {
                    let _ = write!(out, " {dir}:{i}");
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Non-blank, non-comment lines with their 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.inner.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.inner.next();
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.skip_blank();
        self.inner.next().map(|(i, l)| (i + 1, l.trim()))
    }

    fn expect(&mut self, what: &str, last: usize) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::Parse {
            line: last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("bad {what} `{tok}`")))
}

fn keyed<'a>(line: usize, tok: &'a str, key: &str) -> Result<&'a str> {
    tok.strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| perr(line, format!("expected `{key}=...`, found `{tok}`")))
}

fn elem<E: Element>(line: usize, tok: &str) -> Result<E> {
    let v: u64 = num(line, tok, "value")?;
    E::from_u64(v).ok_or_else(|| perr(line, format!("value {v} outside the semiring")))
}

struct Header {
    ty: u8,
    semiring: SemiringKind,
    n: usize,
    k: usize,
    d: usize,
    tau: f64,
}

impl Header {
    fn parse(line: usize, text: &str) -> Result<Self> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let ty = match toks.first() {
            Some(&"type1") => 1,
            Some(&"type2") => 2,
            _ => return Err(perr(line, "header must start with `type1` or `type2`")),
        };
        let want = if ty == 1 { 5 } else { 6 };
        if toks.len() != want {
            return Err(perr(line, format!("header has {} fields, expected {want}", toks.len())));
        }
        let semiring = keyed(line, toks[1], "semiring")?
            .parse()
            .map_err(|e: Error| perr(line, e.to_string()))?;
        let n: usize = num(line, keyed(line, toks[2], "n")?, "n")?;
        let k: usize = num(line, keyed(line, toks[3], "k")?, "k")?;
        let d: usize = if ty == 2 { num(line, keyed(line, toks[4], "d")?, "d")? } else { n };
        let tau: f64 = num(line, keyed(line, toks[want - 1], "tau")?, "tau")?;
        if n == 0 || k == 0 || d == 0 {
            return Err(perr(line, "n, k and d must be positive"));
        }
        Ok(Header {
            ty,
            semiring,
            n,
            k,
            d,
            tau,
        })
    }
}

fn read_tag(lines: &mut Lines<'_>, last: usize, tag: &str) -> Result<(usize, Vec<String>)> {
    let (no, l) = lines.expect(&format!("`{tag}` block"), last)?;
    let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
    if toks.first().map(String::as_str) != Some(tag) {
        return Err(perr(no, format!("expected `{tag}` block, found `{l}`")));
    }
    Ok((no, toks[1..].to_vec()))
}

fn read_dense<E: Element>(lines: &mut Lines<'_>, mut last: usize, rows: usize, cols: usize) -> Result<(usize, DenseMatrix<E>)> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (no, l) = lines.expect("matrix row", last)?;
        last = no;
        let before = data.len();
        for tok in l.split_whitespace() {
            data.push(elem(no, tok)?);
        }
        if data.len() - before != cols {
            return Err(perr(no, format!("row has {} values, expected {cols}", data.len() - before)));
        }
    }
    Ok((last, DenseMatrix::from_vec(rows, cols, data)?))
}

fn read_index_tag(no: usize, toks: &[String], expect: &str) -> Result<()> {
    if toks.first().map(String::as_str) != Some(expect) {
        return Err(perr(no, format!("expected block index {expect}")));
    }
    Ok(())
}

fn read_nnz(no: usize, toks: &[String]) -> Result<usize> {
    match toks.get(1) {
        Some(t) if toks.len() == 2 => num(no, keyed(no, t, "nnz")?, "nnz"),
        _ => Err(perr(no, "expected `nnz=<m>`")),
    }
}

fn fields<const N: usize>(no: usize, l: &str) -> Result<[&str; N]> {
    let toks: Vec<&str> = l.split_whitespace().collect();
    toks.try_into().map_err(|t: Vec<&str>| perr(no, format!("expected {N} fields, found {}", t.len())))
}

fn one_based(no: usize, tok: &str, bound: usize, what: &str) -> Result<usize> {
    let i: usize = num(no, tok, what)?;
    if i == 0 || i > bound {
        return Err(perr(no, format!("{what} {i} outside 1..={bound}")));
    }
    Ok(i - 1)
}

fn read_body<S: Semiring>(sr: S, h: &Header, lines: &mut Lines<'_>) -> Result<Instance<S::Elem>> {
    let (n, k) = (h.n, h.k);
    let mut last = 1;
    let m = if h.ty == 1 {
        let (no, toks) = read_tag(lines, last, "M")?;
        if !toks.is_empty() {
            return Err(perr(no, "`M` takes no arguments"));
        }
        let (l, m) = read_dense(lines, no, n, n)?;
        last = l;
        Some(m)
    } else {
        None
    };
    let mut vs = Vec::with_capacity(k);
    for j in 1..=k {
        let (no, toks) = read_tag(lines, last, "V")?;
        read_index_tag(no, &toks, &j.to_string())?;
        if toks.len() != 1 {
            return Err(perr(no, "`V <j>` takes one argument"));
        }
        let (l, v) = read_dense(lines, no, n, h.d)?;
        last = l;
        vs.push(v);
    }

    let wrap = |no: usize| move |e: Error| perr(no, e.to_string());
    if let Some(m) = m {
        let mut ps = Vec::with_capacity(k);
        for j in 1..=k {
            let (no, toks) = read_tag(lines, last, "P")?;
            read_index_tag(no, &toks, &j.to_string())?;
            let nnz = read_nnz(no, &toks)?;
            last = no;
            let mut entries = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let (no, l) = lines.expect("sparse entry", last)?;
                last = no;
                let [r, c, v] = fields::<3>(no, l)?;
                entries.push((one_based(no, r, n, "row")?, one_based(no, c, n, "column")?, elem(no, v)?));
            }
            ps.push(SparseMatrix::new(sr, n, n, entries).map_err(wrap(no))?);
        }
        let mut queries = Vec::new();
        while let Some((no, l)) = lines.next() {
            let [kw, i] = fields::<2>(no, l)?;
            if kw != "query" {
                return Err(perr(no, format!("unexpected line `{l}`")));
            }
            queries.push(one_based(no, i, n, "query index")? + 1);
        }
        Ok(Instance::Type1 {
            inst: Type1Instance { tau: h.tau, m, vs, ps },
            queries,
        })
    } else {
        let (no, toks) = read_tag(lines, last, "P")?;
        read_index_tag(no, &toks, "diag")?;
        let nnz = read_nnz(no, &toks)?;
        last = no;
        let mut diag = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let (no, l) = lines.expect("diagonal entry", last)?;
            last = no;
            let [j, v] = fields::<2>(no, l)?;
            diag.push((one_based(no, j, h.d, "diagonal index")?, elem(no, v)?));
        }
        let p = DiagonalTensor::new(sr, k, h.d, diag).map_err(wrap(no))?;
        let mut queries = Vec::new();
        while let Some((no, l)) = lines.next() {
            let mut toks = l.split_whitespace();
            if toks.next() != Some("query") {
                return Err(perr(no, format!("unexpected line `{l}`")));
            }
            let pairs = toks
                .map(|t| {
                    let (a, b) = t.split_once(':').ok_or_else(|| perr(no, format!("bad pair `{t}`")))?;
                    Ok((num(no, a, "direction")?, num(no, b, "index")?))
                })
                .collect::<Result<Vec<(usize, usize)>>>()?;
            let q = SliceQuery::new(pairs);
            q.validate(k, n).map_err(wrap(no))?;
            queries.push(q);
        }
        Ok(Instance::Type2 {
            inst: Type2Instance { tau: h.tau, vs, p },
            queries,
        })
    }
}

/// Convenience for callers that hold the semiring only as a kind.
pub fn peek_header(text: &str) -> Result<(u8, SemiringKind)> {
    let mut lines = Lines::new(text);
    let (no, l) = lines.next().ok_or(perr(1, "empty file"))?;
    let h = Header::parse(no, l)?;
    Ok((h.ty, h.semiring))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genrand::{gen_type1, gen_type2, GenConfig};

    const SAMPLE: &str = "\
type1 semiring=nat n=2 k=1 tau=1
# a comment
M
1 0
2 3

V 1
0 1
1 1
P 1 nnz=2
1 1 2
2 2 1
query 1
";

    #[test]
    fn parses_documented_example() {
        let f = InstanceFile::parse(SAMPLE).unwrap();
        let InstanceFile::Nat(Instance::Type1 { inst, queries }) = &f else {
            panic!("wrong variant")
        };
        assert_eq!(inst.m.as_slice(), &[1, 0, 2, 3]);
        assert_eq!(inst.ps[0].entries(), &[(0, 0, 2), (1, 1, 1)]);
        assert_eq!(queries, &[1]);
        assert_eq!(InstanceFile::parse(&f.serialize()).unwrap(), f);
    }

    #[test]
    fn type2_round_trip_with_queries() {
        let inst = gen_type2(Boolean, &GenConfig::new(3, 3, 1.0, 4).with_d(2)).unwrap();
        let f = InstanceFile::Bool(Instance::Type2 {
            inst,
            queries: vec![SliceQuery::full(), SliceQuery::new(vec![(2, 3)]), SliceQuery::new(vec![(3, 1), (1, 2)])],
        });
        let text = f.serialize();
        assert!(text.starts_with("type2 semiring=bool n=3 k=3 d=2 tau=1\n"));
        assert!(text.contains("\nquery\n") && text.contains("\nquery 3:1 1:2\n"));
        assert_eq!(InstanceFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn generated_round_trip() {
        for seed in 0..20 {
            let tau = [0.25, 0.5, 1.0, 1.0 / 3.0][seed as usize % 4];
            let t1 = gen_type1(Natural, &GenConfig::new(5, 1 + seed as usize % 3, tau, seed)).unwrap();
            let f = InstanceFile::Nat(Instance::Type1 { inst: t1, queries: vec![2, 5] });
            assert_eq!(InstanceFile::parse(&f.serialize()).unwrap(), f);
        }
    }

    #[test]
    fn rejects_malformed() {
        let bad = |s: &str| InstanceFile::parse(s).unwrap_err();
        assert!(matches!(bad(""), Error::Parse { line: 1, .. }));
        assert!(matches!(bad("type3 semiring=nat n=1 k=1 tau=1"), Error::Parse { line: 1, .. }));
        assert!(matches!(bad("type1 semiring=trop n=1 k=1 tau=1"), Error::Parse { line: 1, .. }));
        // short row
        let s = SAMPLE.replace("2 3\n", "2\n");
        assert!(matches!(bad(&s), Error::Parse { line: 5, .. }));
        // duplicate sparse entry
        let s = SAMPLE.replace("2 2 1", "1 1 1");
        assert!(matches!(bad(&s), Error::Parse { line: 10, .. }));
        // boolean value out of carrier
        let s = SAMPLE.replace("semiring=nat", "semiring=bool");
        assert!(matches!(bad(&s), Error::Parse { line: 5, .. }));
        // query out of range
        let s = SAMPLE.replace("query 1", "query 3");
        assert!(matches!(bad(&s), Error::Parse { line: 13, .. }));
        // truncated
        let s = SAMPLE.replace("2 2 1\nquery 1\n", "");
        assert!(matches!(bad(&s), Error::Parse { .. }));
    }

    #[test]
    fn header_peek() {
        assert_eq!(peek_header(SAMPLE).unwrap(), (1, SemiringKind::Natural));
    }
}
