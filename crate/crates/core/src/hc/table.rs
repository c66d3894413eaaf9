//! Bilinear product tables.
//!
//! Every hyper-complex product in complex-pair form is a sum of signed
//! terms `±op(a_i)·op(b_j)` with `op` either the identity or the complex
//! conjugate. A [`ProductTable`] lists those terms per output component,
//! which makes two products comparable term by term instead of only
//! numerically. The hyper-complex MLP evaluates the table derived from the
//! Cayley–Dickson recursion with matrix products in place of scalars.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{Base, Complex, HcNumber};
use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    /// Left factor index (0-based) and whether it is conjugated.
    pub a: usize,
    pub a_conj: bool,
    pub b: usize,
    pub b_conj: bool,
    /// +1 or -1.
    pub sign: i8,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { '-' } else { '+' };
        let ca = if self.a_conj { "~" } else { "" };
        let cb = if self.b_conj { "~" } else { "" };
        write!(f, "{s} {ca}a{} {cb}b{}", self.a + 1, self.b + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductTable {
    base: Base,
    rows: Vec<Vec<Term>>,
}

/// Terms present in one table's row but not the other's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiff {
    pub row: usize,
    pub only_left: Vec<Term>,
    pub only_right: Vec<Term>,
}

impl RowDiff {
    pub fn is_empty(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty()
    }
}

impl ProductTable {
    pub fn base(&self) -> Base {
        self.base
    }

    pub fn rows(&self) -> &[Vec<Term>] {
        &self.rows
    }

    /// Parses rows written like `"a1 b1 - a2 ~b2"`: whitespace separated
    /// factors `a<k>`/`b<k>` (1-based), `~` for conjugation, `+`/`-` signs.
    pub fn parse(base: Base, rows: &[&str]) -> Result<Self> {
        let p = base.components();
        if rows.len() != p {
            return Err(contract!("{} table needs {} rows, got {}", base, p, rows.len()));
        }
        let mut out = Vec::with_capacity(p);
        for (r, row) in rows.iter().enumerate() {
            let mut terms = Vec::new();
            let mut sign = 1i8;
            let mut left: Option<(usize, bool)> = None;
            for tok in row.split_whitespace() {
                match tok {
                    "+" => sign = 1,
                    "-" => sign = -1,
                    _ => {
                        let (conj, rest) = match tok.strip_prefix('~') {
                            Some(rest) => (true, rest),
                            None => (false, tok),
                        };
                        let (side, digits) = rest.split_at(1);
                        let k: usize = digits
                            .parse()
                            .map_err(|_| contract!("row {}: bad factor {tok:?}", r + 1))?;
                        if k == 0 || k > p {
                            return Err(contract!("row {}: index {k} out of range", r + 1));
                        }
                        match (side, left) {
                            ("a", None) => left = Some((k - 1, conj)),
                            ("b", Some((a, a_conj))) => {
                                terms.push(Term {
                                    a,
                                    a_conj,
                                    b: k - 1,
                                    b_conj: conj,
                                    sign,
                                });
                                left = None;
                                sign = 1;
                            }
                            _ => return Err(contract!("row {}: unexpected {tok:?}", r + 1)),
                        }
                    }
                }
            }
            if left.is_some() {
                return Err(contract!("row {}: dangling factor", r + 1));
            }
            out.push(canonical(terms));
        }
        Ok(Self { base, rows: out })
    }

    /// Expands the Cayley–Dickson recursion symbolically.
    pub fn from_recursion(base: Base) -> Self {
        let p = base.components();
        let a: Vec<Atom> = (0..p).map(|k| Atom::new(Side::A, k)).collect();
        let b: Vec<Atom> = (0..p).map(|k| Atom::new(Side::B, k)).collect();
        let rows = sym_mul(&a, &b).into_iter().map(canonical).collect();
        Self { base, rows }
    }

    pub fn eval(&self, a: &HcNumber, b: &HcNumber) -> HcNumber {
        let (a, b) = (a.components(), b.components());
        let comps = self
            .rows
            .iter()
            .map(|row| {
                row.iter().fold(Complex::new(0.0, 0.0), |acc, t| {
                    let x = if t.a_conj { a[t.a].conj() } else { a[t.a] };
                    let y = if t.b_conj { b[t.b].conj() } else { b[t.b] };
                    acc + x * y * f64::from(t.sign)
                })
            })
            .collect();
        HcNumber::new(comps).expect("table rows match base")
    }

    /// Row-by-row symmetric difference against `other`.
    pub fn diff(&self, other: &ProductTable) -> Vec<RowDiff> {
        self.rows
            .iter()
            .zip(&other.rows)
            .enumerate()
            .map(|(row, (l, r))| RowDiff {
                row,
                only_left: l.iter().filter(|t| !r.contains(t)).copied().collect(),
                only_right: r.iter().filter(|t| !l.contains(t)).copied().collect(),
            })
            .collect()
    }

    pub fn row_string(&self, row: usize) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (i, t) in self.rows[row].iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{t}");
        }
        s
    }
}

fn canonical(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by_key(|t| (t.a, t.b, t.a_conj, t.b_conj, t.sign));
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    // merge identical factor pairs, dropping cancelled ones
    let mut i = 0;
    while i < terms.len() {
        let key = (terms[i].a, terms[i].a_conj, terms[i].b, terms[i].b_conj);
        let mut total = 0i32;
        while i < terms.len() && (terms[i].a, terms[i].a_conj, terms[i].b, terms[i].b_conj) == key {
            total += i32::from(terms[i].sign);
            i += 1;
        }
        assert!(total.abs() <= 1, "coefficient {total} in a product table");
        if total != 0 {
            out.push(Term {
                a: key.0,
                a_conj: key.1,
                b: key.2,
                b_conj: key.3,
                sign: total as i8,
            });
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

#[derive(Clone, Copy)]
struct Atom {
    side: Side,
    idx: usize,
    conj: bool,
    sign: i8,
}

impl Atom {
    fn new(side: Side, idx: usize) -> Self {
        Self {
            side,
            idx,
            conj: false,
            sign: 1,
        }
    }
}

fn sym_conj(v: &[Atom]) -> Vec<Atom> {
    v.iter()
        .enumerate()
        .map(|(k, &at)| {
            if k == 0 {
                Atom { conj: !at.conj, ..at }
            } else {
                Atom { sign: -at.sign, ..at }
            }
        })
        .collect()
}

fn sym_mul(x: &[Atom], y: &[Atom]) -> Vec<Vec<Term>> {
    if x.len() == 1 {
        // complex scalars commute, so the A-side factor is always written first
        let (p, q) = (x[0], y[0]);
        let (a, b) = if p.side == Side::A { (p, q) } else { (q, p) };
        debug_assert!(a.side == Side::A && b.side == Side::B);
        return alloc::vec![alloc::vec![Term {
            a: a.idx,
            a_conj: a.conj,
            b: b.idx,
            b_conj: b.conj,
            sign: p.sign * q.sign,
        }]];
    }
    let h = x.len() / 2;
    let (xl, xr) = x.split_at(h);
    let (yl, yr) = y.split_at(h);
    let negate = |rows: Vec<Vec<Term>>| -> Vec<Vec<Term>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(|t| Term { sign: -t.sign, ..t }).collect())
            .collect()
    };
    let join = |l: Vec<Vec<Term>>, r: Vec<Vec<Term>>| -> Vec<Vec<Term>> {
        l.into_iter().zip(r).map(|(a, b)| [a, b].concat()).collect()
    };
    let first = join(sym_mul(xl, yl), negate(sym_mul(&sym_conj(yr), xr)));
    let second = join(sym_mul(yr, xl), sym_mul(xr, &sym_conj(yl)));
    [first, second].concat()
}

/// Component displays transcribed as printed, with `a` the left factor
/// (the layer input for MLP displays) and `b` the right factor (weights).
pub mod printed {
    pub const COMPLEX: &[&str] = &["a1 b1"];

    pub const QUATERNION: &[&str] = &["a1 b1 - ~a2 b2", "a2 ~b1 + a1 b2"];

    pub const QUATERNION_MLP: &[&str] = &["a1 b1 - ~a2 b2", "a2 ~b1 + a1 b2"];

    pub const OCTONION: &[&str] = &[
        "a1 b1 - a2 ~b2 - a3 ~b3 - a4 ~b4",
        "a2 ~b1 + a1 b2 + a3 ~b4 - a4 ~b3",
        "a3 ~b1 + a4 ~b2 + a1 b3 - a2 ~b4",
        "a4 ~b1 + a2 ~b3 + a1 b4 - a3 ~b2",
    ];

    pub const OCTONION_MLP: &[&str] = &[
        "a1 b1 - a2 ~b2 - a3 ~b3 - a4 ~b4",
        "a2 ~b1 + a1 b2 - a4 ~b3 + a3 ~b4",
        "a3 b1 + a1 ~b3 - a2 ~b4 + a4 ~b2",
        "a4 ~b1 + a1 b4 - a3 ~b2 + a2 ~b3",
    ];

    pub const SEDENION: &[&str] = &[
        "a1 b1 - a2 ~b2 - a3 ~b3 - a4 ~b4 - a5 ~b5 - a6 ~b6 - a7 ~b7 - a8 ~b8",
        "a1 b2 + a2 b1 + a3 ~b4 - a4 ~b3 + a5 ~b6 - a6 ~b5 + a7 ~b8 - a8 ~b7",
        "a1 b3 - a2 ~b4 + a3 b1 + a4 b2 + a5 ~b7 - a6 ~b8 - a7 ~b5 + a8 ~b6",
        "a1 b4 + a2 b3 - a3 b2 + a4 b1 + a5 ~b8 + a6 ~b7 - a7 ~b6 - a8 ~b5",
        "a1 b5 - a2 ~b6 - a3 ~b7 - a4 ~b8 + a5 b1 + a6 b2 + a7 b3 + a8 b4",
        "a1 b6 + a2 b5 - a3 ~b8 + a4 ~b7 - a5 b2 + a6 b1 - a7 b4 + a8 b3",
        "a1 b7 + a2 b8 + a3 b5 - a4 b6 - a5 b3 + a6 b4 + a7 b1 - a8 b2",
        "a1 b8 - a2 b7 + a3 b6 + a4 b5 - a5 b4 - a6 b3 + a7 b2 + a8 b1",
    ];

    pub const SEDENION_MLP: &[&str] = &[
        "a1 b1 - a2 ~b2 - a3 ~b3 - a4 ~b4 - a5 ~b5 - a6 ~b6 - a7 ~b7 - a8 ~b8",
        "a1 b2 + a2 b1 + a3 ~b4 - a4 ~b3 + a5 ~b6 - a6 ~b5 + a7 ~b8 - a8 ~b7",
        "a1 b3 - a2 ~b4 + a3 b1 + a4 b2 + a5 ~b7 - a6 ~b8 - a7 ~b5 + a8 ~b6",
        "a1 b4 + a2 b3 - a3 b2 + a4 b1 + a5 ~b8 + a6 ~b7 - a7 ~b6 - a8 ~b5",
        "a1 b5 - a2 ~b6 - a3 ~b7 - a4 ~b8 + a5 b1 + a6 b2 + a7 b3 + a8 b4",
        "a1 b6 + a2 b5 - a3 ~b8 + a4 ~b7 - a5 b2 + a6 b1 - a7 b4 + a8 b3",
        "a1 b7 + a2 b8 + a3 b5 - a4 b6 - a5 b3 + a6 b4 + a7 b1 - a8 b2",
        "a1 b8 - a2 b7 + a3 b6 + a4 b5 - a5 b4 - a6 b3 + a7 b2 + a8 b1",
    ];
}
