//! Ordinal arithmetic in Cantor normal form, used as the run clock.
//!
//! An [`Ordinal`] is a finite sum `w^e1*c1 + ... + w^ek*ck` where the
//! exponents are themselves ordinals in strictly decreasing order and the
//! coefficients are positive naturals. Every ordinal below `e0` has exactly
//! one such form, so equality is structural and comparison is the
//! lexicographic order on term lists.
//!
//! Addition is the usual non-commutative ordinal sum (`3 + w == w`).
//! [`Ordinal::next_limit`] computes the next limit stage a run clock can
//! land on: the least multiple of `w^k` strictly above the current stage.
//!
//! The text form is minimal and canonical: `0`, `5`, `w`, `w*2`, `w^2*3+w+1`,
//! `w^(w+1)`. The parser accepts exactly the strings [`Display`] produces;
//! anything non-canonical (`3+w`, `w^1`, `w*1`, `w^(2)`) is rejected so a
//! round trip never silently renormalizes.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An ordinal below `e0` in Cantor normal form.
///
/// The derived ordering on the term list coincides with the ordinal order,
/// and structural equality with ordinal equality; both rely on the terms
/// being canonical, which every constructor enforces.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ordinal {
    /// `(exponent, coefficient)` pairs, exponents strictly decreasing,
    /// coefficients nonzero. Empty means zero.
    terms: Vec<(Ordinal, u64)>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Ordinal::nat(1)
    }

    /// The finite ordinal `n`.
    pub fn nat(n: u64) -> Self {
        if n == 0 {
            Ordinal::zero()
        } else {
            Ordinal { terms: vec![(Ordinal::zero(), n)] }
        }
    }

    pub fn omega() -> Self {
        Ordinal { terms: vec![(Ordinal::one(), 1)] }
    }

    /// `w^exp`. Note `omega_pow(0) == 1`.
    pub fn omega_pow(exp: Ordinal) -> Self {
        Ordinal { terms: vec![(exp, 1)] }
    }

    /// Builds an ordinal from raw normal-form terms, validating that the
    /// exponents strictly decrease and every coefficient is nonzero.
    pub fn from_terms(terms: Vec<(Ordinal, u64)>) -> Result<Self, InvalidNormalForm> {
        for (i, (exp, coeff)) in terms.iter().enumerate() {
            if *coeff == 0 {
                return Err(InvalidNormalForm::ZeroCoefficient { index: i });
            }
            if i > 0 && terms[i - 1].0 <= *exp {
                return Err(InvalidNormalForm::ExponentsNotDecreasing { index: i });
            }
        }
        Ok(Ordinal { terms })
    }

    /// The normal-form terms, leading term first.
    pub fn terms(&self) -> &[(Ordinal, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(n)` iff this ordinal is the finite ordinal `n`.
    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(exp, n)] if exp.is_zero() => Some(*n),
            _ => None,
        }
    }

    fn is_one(&self) -> bool {
        self.as_nat() == Some(1)
    }

    fn is_omega(&self) -> bool {
        matches!(self.terms.as_slice(), [(exp, 1)] if exp.is_one())
    }

    /// A limit ordinal is nonzero with no finite part.
    pub fn is_limit(&self) -> bool {
        match self.terms.last() {
            None => false,
            Some((exp, _)) => !exp.is_zero(),
        }
    }

    pub fn is_successor(&self) -> bool {
        matches!(self.terms.last(), Some((exp, _)) if exp.is_zero())
    }

    pub fn succ(&self) -> Ordinal {
        self.plus(&Ordinal::one())
    }

    /// Ordinal sum. Terms of `self` below the leading exponent of `rhs`
    /// are absorbed: `3 + w == w`, while `w + 3 == w+3`.
    pub fn plus(&self, rhs: &Ordinal) -> Ordinal {
        let Some((cut, rc)) = rhs.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<(Ordinal, u64)> = self
            .terms
            .iter()
            .take_while(|(exp, _)| exp >= cut)
            .cloned()
            .collect();
        let mut rest = rhs.terms.iter();
        match terms.last_mut() {
            Some((exp, c)) if exp == cut => {
                *c = c.checked_add(*rc).expect("ordinal coefficient overflow");
                rest.next();
            }
            _ => {}
        }
        terms.extend(rest.cloned());
        Ordinal { terms }
    }

    /// Ordinal product, only needed internally to compute order types of
    /// product codings. `(w+1)*2 == w*2+1`, `(w*2+1)*w == w^2`.
    pub(crate) fn times(&self, rhs: &Ordinal) -> Ordinal {
        if self.is_zero() || rhs.is_zero() {
            return Ordinal::zero();
        }
        let (lead_exp, lead_coeff) = &self.terms[0];
        let mut terms: Vec<(Ordinal, u64)> = Vec::new();
        for (be, bc) in &rhs.terms {
            if be.is_zero() {
                // finite factor scales the leading coefficient; the tail
                // of self survives exactly once, at the end
                terms.push((
                    lead_exp.clone(),
                    lead_coeff.checked_mul(*bc).expect("ordinal coefficient overflow"),
                ));
                terms.extend(self.terms[1..].iter().cloned());
            } else {
                terms.push((lead_exp.plus(be), *bc));
            }
        }
        Ordinal { terms }
    }

    /// The least multiple of `w^level` strictly greater than `self`: the
    /// next stage at which a level-`level` limit can fire.
    ///
    /// `next_limit(w+3, 1) == w*2`, `next_limit(w*2, 1) == w*3`,
    /// `next_limit(w*2+1, 2) == w^2`.
    pub fn next_limit(&self, level: u32) -> Ordinal {
        assert!(level >= 1, "limit stages exist only at level >= 1");
        let k = Ordinal::nat(u64::from(level));
        let mut terms: Vec<(Ordinal, u64)> = self
            .terms
            .iter()
            .take_while(|(exp, _)| *exp >= k)
            .cloned()
            .collect();
        match terms.last_mut() {
            Some((exp, c)) if *exp == k => {
                *c = c.checked_add(1).expect("ordinal coefficient overflow")
            }
            _ => terms.push((k, 1)),
        }
        Ordinal { terms }
    }
}

impl Add for Ordinal {
    type Output = Ordinal;
    fn add(self, rhs: Ordinal) -> Ordinal {
        self.plus(&rhs)
    }
}

impl Add<&Ordinal> for &Ordinal {
    type Output = Ordinal;
    fn add(self, rhs: &Ordinal) -> Ordinal {
        self.plus(rhs)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (exp, coeff)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            if exp.is_zero() {
                write!(f, "{coeff}")?;
                continue;
            }
            f.write_str("w")?;
            if !exp.is_one() {
                if let Some(n) = exp.as_nat() {
                    write!(f, "^{n}")?;
                } else if exp.is_omega() {
                    f.write_str("^w")?;
                } else {
                    write!(f, "^({exp})")?;
                }
            }
            if *coeff >= 2 {
                write!(f, "*{coeff}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({self})")
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Rejected input to [`Ordinal::from_terms`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidNormalForm {
    #[error("term {index} has coefficient 0")]
    ZeroCoefficient { index: usize },
    #[error("exponent of term {index} is not strictly below its predecessor")]
    ExponentsNotDecreasing { index: usize },
}

/// Why a string is not a canonical ordinal expression.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrdinalParseError {
    #[error("empty ordinal expression")]
    Empty,
    #[error("unexpected character {found:?} at byte {at}")]
    Unexpected { found: char, at: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("number too large at byte {at}")]
    Overflow { at: usize },
    #[error("non-canonical form at byte {at}: {reason}")]
    NonCanonical { at: usize, reason: &'static str },
}

impl FromStr for Ordinal {
    type Err = OrdinalParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s.as_bytes(), pos: 0 };
        if p.src.is_empty() {
            return Err(OrdinalParseError::Empty);
        }
        let ord = p.ordinal()?;
        match p.peek() {
            None => Ok(ord),
            Some(c) => Err(OrdinalParseError::Unexpected { found: c, at: p.pos }),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.src.get(self.pos).map(|&b| b as char)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn ordinal(&mut self) -> Result<Ordinal, OrdinalParseError> {
        if self.peek() == Some('0') {
            // bare zero only; "0" never appears inside a sum
            let at = self.pos;
            if self.src.get(self.pos + 1).is_some_and(|b| b.is_ascii_digit()) {
                return Err(OrdinalParseError::NonCanonical { at, reason: "leading zero" });
            }
            self.bump();
            return Ok(Ordinal::zero());
        }
        let mut terms: Vec<(Ordinal, u64)> = Vec::new();
        loop {
            let at = self.pos;
            let term = self.term()?;
            if let Some((prev, _)) = terms.last() {
                if *prev <= term.0 {
                    return Err(OrdinalParseError::NonCanonical {
                        at,
                        reason: "exponents must strictly decrease",
                    });
                }
            }
            terms.push(term);
            if self.peek() == Some('+') {
                self.bump();
            } else {
                break;
            }
        }
        Ok(Ordinal { terms })
    }

    fn term(&mut self) -> Result<(Ordinal, u64), OrdinalParseError> {
        match self.peek() {
            Some('w') => {
                self.bump();
                let exp = if self.peek() == Some('^') {
                    self.bump();
                    self.exponent()?
                } else {
                    Ordinal::one()
                };
                let coeff = if self.peek() == Some('*') {
                    self.bump();
                    let at = self.pos;
                    let n = self.nat()?;
                    if n < 2 {
                        return Err(OrdinalParseError::NonCanonical {
                            at,
                            reason: "explicit coefficient must be at least 2",
                        });
                    }
                    n
                } else {
                    1
                };
                Ok((exp, coeff))
            }
            Some(c) if c.is_ascii_digit() => {
                let at = self.pos;
                let n = self.nat()?;
                if n == 0 {
                    return Err(OrdinalParseError::NonCanonical {
                        at,
                        reason: "zero cannot appear as a term",
                    });
                }
                Ok((Ordinal::zero(), n))
            }
            Some(c) => Err(OrdinalParseError::Unexpected { found: c, at: self.pos }),
            None => Err(OrdinalParseError::UnexpectedEnd),
        }
    }

    fn exponent(&mut self) -> Result<Ordinal, OrdinalParseError> {
        match self.peek() {
            Some('w') => {
                self.bump();
                Ok(Ordinal::omega())
            }
            Some(c) if c.is_ascii_digit() => {
                let at = self.pos;
                let n = self.nat()?;
                if n < 2 {
                    return Err(OrdinalParseError::NonCanonical {
                        at,
                        reason: "write w^0 as 1 and w^1 as w",
                    });
                }
                Ok(Ordinal::nat(n))
            }
            Some('(') => {
                self.bump();
                let at = self.pos;
                let inner = self.ordinal()?;
                match self.peek() {
                    Some(')') => self.bump(),
                    Some(c) => return Err(OrdinalParseError::Unexpected { found: c, at: self.pos }),
                    None => return Err(OrdinalParseError::UnexpectedEnd),
                }
                if inner.as_nat().is_some() || inner.is_omega() {
                    return Err(OrdinalParseError::NonCanonical {
                        at,
                        reason: "parentheses are only for compound exponents",
                    });
                }
                Ok(inner)
            }
            Some(c) => Err(OrdinalParseError::Unexpected { found: c, at: self.pos }),
            None => Err(OrdinalParseError::UnexpectedEnd),
        }
    }

    fn nat(&mut self) -> Result<u64, OrdinalParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.pos == start {
            return match self.peek() {
                Some(c) => Err(OrdinalParseError::Unexpected { found: c, at: self.pos }),
                None => Err(OrdinalParseError::UnexpectedEnd),
            };
        }
        let digits = &self.src[start..self.pos];
        if digits[0] == b'0' && digits.len() > 1 {
            return Err(OrdinalParseError::NonCanonical { at: start, reason: "leading zero" });
        }
        std::str::from_utf8(digits)
            .unwrap()
            .parse()
            .map_err(|_| OrdinalParseError::Overflow { at: start })
    }
}
