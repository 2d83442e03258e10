//! Infinite binary tapes with a finite description.
//!
//! A [`Tape`] is a declarative base generator plus a finite map of
//! overridden cells, so a snapshot of machine memory is a small value no
//! matter how much of the tape is conceptually nonzero. Writes never touch
//! the base: two tapes from the same run always share it, which is what
//! makes exact snapshot comparison and cellwise limsup cheap.
//!
//! Bases come in three kinds: constant, eventually periodic, and
//! [`OrderCode`](BitGenerator::OrderCode), which codes a countable linear
//! order on the naturals as its characteristic function under the Cantor
//! pairing. Order codes are how ill-founded inputs like `omegastar` reach
//! the machine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Cantor pairing `(i+j)(i+j+1)/2 + j`, a bijection between pairs of
/// naturals and naturals.
pub fn pair(i: u64, j: u64) -> u64 {
    let s = u128::from(i) + u128::from(j);
    let n = s * (s + 1) / 2 + u128::from(j);
    u64::try_from(n).expect("pair code exceeds u64")
}

/// Inverse of [`pair`].
pub fn unpair(n: u64) -> (u64, u64) {
    fn tri(s: u64) -> u128 {
        u128::from(s) * (u128::from(s) + 1) / 2
    }
    let mut s = (((8.0 * n as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while tri(s + 1) <= u128::from(n) {
        s += 1;
    }
    while tri(s) > u128::from(n) {
        s -= 1;
    }
    let j = n - u64::try_from(tri(s)).unwrap();
    (s - j, j)
}

/// A countable linear order on all of the naturals, described as a finite
/// expression tree.
///
/// Every spec puts *all* naturals in its field, because tapes are total:
/// `Fin(n)` places `0..n` first and the surplus elements above them, each
/// block in natural order, so it codes order type `w` rather than `n`.
/// `Sum` interleaves by parity (evens are the left summand), and `Prod`
/// unpairs an element into an inner and an outer index, ordered outer
/// first. `OmegaStar` is the reversed naturals, the minimal ill-founded
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderSpec {
    Fin(u64),
    Omega,
    OmegaStar,
    Sum(Box<OrderSpec>, Box<OrderSpec>),
    Prod(Box<OrderSpec>, Box<OrderSpec>),
}

impl OrderSpec {
    /// Does element `i` come strictly before element `j`?
    pub fn precedes(&self, i: u64, j: u64) -> bool {
        match self {
            // Low block 0..n in natural order, then the surplus in natural
            // order: the comparison collapses to the natural order.
            OrderSpec::Fin(_) | OrderSpec::Omega => i < j,
            OrderSpec::OmegaStar => i > j,
            OrderSpec::Sum(left, right) => match (i % 2, j % 2) {
                (0, 0) => left.precedes(i / 2, j / 2),
                (1, 1) => right.precedes(i / 2, j / 2),
                (0, 1) => true,
                _ => false,
            },
            OrderSpec::Prod(inner, outer) => {
                let (ii, io) = unpair(i);
                let (ji, jo) = unpair(j);
                if io == jo {
                    inner.precedes(ii, ji)
                } else {
                    outer.precedes(io, jo)
                }
            }
        }
    }
}

/// A total function from cell positions to bits, finitely described.
///
/// `Periodic` values are kept canonical (shortest cycle, then shortest
/// prefix), so syntactic equality within a constructor is semantic
/// equality. Build them through [`BitGenerator::periodic`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitGenerator {
    Const(bool),
    Periodic { prefix: Vec<bool>, cycle: Vec<bool> },
    OrderCode(OrderSpec),
}

impl BitGenerator {
    /// Canonicalizing constructor for eventually periodic content: reduces
    /// the cycle to its primitive root, then folds any prefix tail that
    /// merely restates the cycle back into it.
    pub fn periodic(mut prefix: Vec<bool>, mut cycle: Vec<bool>) -> BitGenerator {
        assert!(!cycle.is_empty(), "periodic generator needs a nonempty cycle");
        let root = (1..=cycle.len())
            .find(|d| cycle.len() % d == 0 && cycle.iter().enumerate().all(|(i, &b)| b == cycle[i % d]))
            .unwrap();
        cycle.truncate(root);
        // Absorbing the last prefix bit is sound exactly when it equals the
        // last cycle bit: rotating the cycle right by one keeps the stream.
        while prefix.last().is_some_and(|b| Some(b) == cycle.last()) {
            prefix.pop();
            cycle.rotate_right(1);
        }
        BitGenerator::Periodic { prefix, cycle }
    }

    pub fn bit(&self, n: u64) -> bool {
        match self {
            BitGenerator::Const(b) => *b,
            BitGenerator::Periodic { prefix, cycle } => {
                let n = usize::try_from(n).expect("cell position exceeds usize");
                if n < prefix.len() {
                    prefix[n]
                } else {
                    cycle[(n - prefix.len()) % cycle.len()]
                }
            }
            // Pairing is a bijection, so every position codes some pair.
            BitGenerator::OrderCode(spec) => {
                let (i, j) = unpair(n);
                spec.precedes(i, j)
            }
        }
    }
}

/// One one-way infinite binary tape: a shared base plus finitely many
/// overridden cells. Immutable; [`Tape::write`] returns the updated tape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tape {
    base: Arc<BitGenerator>,
    overrides: BTreeMap<u64, bool>,
}

impl Tape {
    pub fn new(base: BitGenerator) -> Tape {
        Tape { base: Arc::new(base), overrides: BTreeMap::new() }
    }

    pub fn base(&self) -> &BitGenerator {
        &self.base
    }

    /// The overridden cells. Normalization keeps this minimal: no entry
    /// ever equals the base bit at its position.
    pub fn overrides(&self) -> &BTreeMap<u64, bool> {
        &self.overrides
    }

    pub fn read(&self, n: u64) -> bool {
        match self.overrides.get(&n) {
            Some(b) => *b,
            None => self.base.bit(n),
        }
    }

    pub fn write(&self, n: u64, b: bool) -> Tape {
        let mut next = self.clone();
        if next.base.bit(n) == b {
            next.overrides.remove(&n);
        } else {
            next.overrides.insert(n, b);
        }
        next
    }
}

impl fmt::Display for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.base)?;
        for (i, (p, b)) in self.overrides.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", p, u8::from(*b))?;
        }
        f.write_str("}")
    }
}

/// Exact content equality for tapes of one run.
///
/// Panics if the bases differ syntactically: the engine never compares
/// snapshots across runs, so a mismatch is a bug, not a condition to handle.
pub fn tapes_equal(a: &Tape, b: &Tape) -> bool {
    assert!(a.base == b.base, "tape base mismatch: {} vs {}", a.base, b.base);
    a.overrides == b.overrides
}

/// Cellwise maximum over a nonempty block of same-base tapes: the limsup
/// of the block repeated forever.
///
/// Sound because the tapes differ from the shared base on finitely many
/// cells only, so every untouched cell is constant across the block.
pub fn block_limsup(tapes: &[Tape]) -> Tape {
    let first = tapes.first().expect("limsup of an empty block");
    let mut touched = BTreeSet::new();
    for t in tapes {
        assert!(t.base == first.base, "tape base mismatch in limsup block");
        touched.extend(t.overrides.keys().copied());
    }
    let mut out = Tape { base: first.base.clone(), overrides: BTreeMap::new() };
    for p in touched {
        out = out.write(p, tapes.iter().any(|t| t.read(p)));
    }
    out
}

impl fmt::Display for OrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderSpec::Fin(n) => write!(f, "fin({n})"),
            OrderSpec::Omega => f.write_str("omega"),
            OrderSpec::OmegaStar => f.write_str("omegastar"),
            OrderSpec::Sum(a, b) => write!(f, "sum({a},{b})"),
            OrderSpec::Prod(a, b) => write!(f, "prod({a},{b})"),
        }
    }
}

impl fmt::Display for BitGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn bits(f: &mut fmt::Formatter<'_>, bs: &[bool]) -> fmt::Result {
            for b in bs {
                write!(f, "{}", u8::from(*b))?;
            }
            Ok(())
        }
        match self {
            BitGenerator::Const(b) => write!(f, "const({})", u8::from(*b)),
            BitGenerator::Periodic { prefix, cycle } => {
                f.write_str("periodic(")?;
                bits(f, prefix)?;
                f.write_str(";")?;
                bits(f, cycle)?;
                f.write_str(")")
            }
            BitGenerator::OrderCode(spec) => write!(f, "ordercode({spec})"),
        }
    }
}

/// Why a tape or order expression failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TapeExprError {
    #[error("expected {expected} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("trailing input at byte {at}")]
    Trailing { at: usize },
    #[error("cycle must be nonempty at byte {at}")]
    EmptyCycle { at: usize },
    #[error("number too large at byte {at}")]
    Overflow { at: usize },
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &'static str) -> Result<(), TapeExprError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(TapeExprError::Expected { expected: lit, at: self.pos })
        }
    }

    fn nat(&mut self) -> Result<u64, TapeExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(TapeExprError::Expected { expected: "a number", at: start });
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| TapeExprError::Overflow { at: start })
    }

    /// Possibly empty run of 0/1 characters.
    fn bits(&mut self) -> Vec<bool> {
        self.skip_ws();
        let mut out = Vec::new();
        while let Some(b) = self.src.get(self.pos) {
            match b {
                b'0' => out.push(false),
                b'1' => out.push(true),
                _ => break,
            }
            self.pos += 1;
        }
        out
    }

    fn order_spec(&mut self) -> Result<OrderSpec, TapeExprError> {
        // longest keyword first: "omega" is a prefix of "omegastar"
        if self.eat("omegastar") {
            return Ok(OrderSpec::OmegaStar);
        }
        if self.eat("omega") {
            return Ok(OrderSpec::Omega);
        }
        if self.eat("fin") {
            self.expect("(")?;
            let n = self.nat()?;
            self.expect(")")?;
            return Ok(OrderSpec::Fin(n));
        }
        for (kw, sum) in [("sum", true), ("prod", false)] {
            if self.eat(kw) {
                self.expect("(")?;
                let a = self.order_spec()?;
                self.expect(",")?;
                let b = self.order_spec()?;
                self.expect(")")?;
                return Ok(if sum {
                    OrderSpec::Sum(Box::new(a), Box::new(b))
                } else {
                    OrderSpec::Prod(Box::new(a), Box::new(b))
                });
            }
        }
        Err(TapeExprError::Expected { expected: "an order spec", at: self.pos })
    }

    fn generator(&mut self) -> Result<BitGenerator, TapeExprError> {
        if self.eat("const") {
            self.expect("(")?;
            self.skip_ws();
            let b = match self.src.get(self.pos) {
                Some(b'0') => false,
                Some(b'1') => true,
                _ => return Err(TapeExprError::Expected { expected: "0 or 1", at: self.pos }),
            };
            self.pos += 1;
            self.expect(")")?;
            return Ok(BitGenerator::Const(b));
        }
        if self.eat("periodic") {
            self.expect("(")?;
            let prefix = self.bits();
            self.expect(";")?;
            let at = self.pos;
            let cycle = self.bits();
            if cycle.is_empty() {
                return Err(TapeExprError::EmptyCycle { at });
            }
            self.expect(")")?;
            return Ok(BitGenerator::periodic(prefix, cycle));
        }
        if self.eat("ordercode") {
            self.expect("(")?;
            let spec = self.order_spec()?;
            self.expect(")")?;
            return Ok(BitGenerator::OrderCode(spec));
        }
        Err(TapeExprError::Expected { expected: "const, periodic, or ordercode", at: self.pos })
    }

    fn finish(mut self) -> Result<(), TapeExprError> {
        self.skip_ws();
        if self.pos == self.src.len() {
            Ok(())
        } else {
            Err(TapeExprError::Trailing { at: self.pos })
        }
    }
}

impl FromStr for OrderSpec {
    type Err = TapeExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut c = Cursor::new(s);
        let spec = c.order_spec()?;
        c.finish()?;
        Ok(spec)
    }
}

impl FromStr for BitGenerator {
    type Err = TapeExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut c = Cursor::new(s);
        let g = c.generator()?;
        c.finish()?;
        Ok(g)
    }
}
