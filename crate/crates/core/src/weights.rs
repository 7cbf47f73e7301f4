//! Positive weight sequences `c_n` (indexed from 1) with exact tail bounds.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bitsum::{sum_all, BitSum};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSeq {
    Ones,
    /// `c_n = r^n`.
    Geometric(Dyadic),
    /// `c_n = 2^-(n²)`.
    SuperExp,
    /// `c_n` for `n <= len`; indices beyond the table are errors.
    Table(Vec<Dyadic>),
}

/// Exact upper bound on `Σ_{j>n} c_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TailBound {
    Finite(BigRational),
    Infinite,
}

/// Most terms materialized for a range sum of a non-power-of-two geometric
/// sequence.
const GEOMETRIC_RANGE_LIMIT: u64 = 1 << 16;

pub fn dyadic_to_rational(d: Dyadic) -> BigRational {
    BigRational::new(BigInt::from(d.mantissa()), BigInt::one() << d.exponent())
}

fn pow2_rational(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as u64)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as u64)
    }
}

impl WeightSeq {
    pub fn validated(self) -> Result<WeightSeq> {
        match &self {
            WeightSeq::Geometric(r) if !(r.is_positive() && *r < Dyadic::ONE) => {
                return Err(Error::InvalidWeights(format!("ratio {r} not in (0,1)")))
            }
            WeightSeq::Table(t) if t.is_empty() || t.iter().any(|c| !c.is_positive()) => {
                return Err(Error::InvalidWeights("table weights must be positive".into()))
            }
            _ => {}
        }
        Ok(self)
    }

    fn check_index(&self, n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::WeightIndex(0));
        }
        if let WeightSeq::Table(t) = self {
            if n > t.len() as u64 {
                return Err(Error::WeightIndex(n));
            }
        }
        Ok(())
    }

    /// `c_n` as a dyadic; overflows when it does not fit.
    pub fn term(&self, n: u64) -> Result<Dyadic> {
        self.check_index(n)?;
        match self {
            WeightSeq::Ones => Ok(Dyadic::ONE),
            WeightSeq::Geometric(r) => r.checked_pow(u32::try_from(n).map_err(|_| Error::Overflow(format!("r^{n}")))?),
            WeightSeq::SuperExp => {
                let e = n.checked_mul(n).and_then(|s| i64::try_from(s).ok());
                Dyadic::pow2(-e.ok_or_else(|| Error::Overflow(format!("2^-({n}^2)")))?)
            }
            WeightSeq::Table(t) => Ok(t[n as usize - 1]),
        }
    }

    /// `c_n` as an exact bit sum, available for any index.
    pub fn term_bits(&self, n: u64) -> Result<BitSum> {
        self.range_sum(n, n)
    }

    pub fn term_rational(&self, n: u64) -> Result<BigRational> {
        self.check_index(n)?;
        Ok(match self {
            WeightSeq::Ones => BigRational::one(),
            WeightSeq::Geometric(r) => {
                let n = u32::try_from(n).map_err(|_| Error::Overflow(format!("r^{n}")))?;
                num_traits::pow(dyadic_to_rational(*r), n as usize)
            }
            WeightSeq::SuperExp => pow2_rational(-(n as i64) * n as i64),
            WeightSeq::Table(t) => dyadic_to_rational(t[n as usize - 1]),
        })
    }

    /// Exact `Σ_{j=a}^{b} c_j`; zero when `a > b`.
    pub fn range_sum(&self, a: u64, b: u64) -> Result<BitSum> {
        if a > b {
            return Ok(BitSum::zero());
        }
        self.check_index(a)?;
        self.check_index(b)?;
        match self {
            WeightSeq::Ones => BitSum::from_big(&BigInt::from(b - a + 1), 0),
            WeightSeq::SuperExp => BitSum::squares(a, b),
            WeightSeq::Geometric(r) if r.is_power_of_two() => {
                let s = r.exponent() as i64;
                let first = (a as i64)
                    .checked_mul(s)
                    .ok_or_else(|| Error::Overflow("geometric exponent".into()))?;
                BitSum::arith(first, s, b - a + 1)
            }
            WeightSeq::Geometric(r) => {
                if b - a + 1 > GEOMETRIC_RANGE_LIMIT {
                    return Err(Error::Overflow(format!(
                        "geometric range of {} terms",
                        b - a + 1
                    )));
                }
                let m = BigInt::from(r.mantissa());
                let e = r.exponent() as i64;
                let mut num = m.pow(a as u32);
                let mut parts = Vec::with_capacity((b - a + 1) as usize);
                for j in a..=b {
                    parts.push(BitSum::from_big(&num, e * j as i64)?);
                    num *= &m;
                }
                sum_all(parts.iter())
            }
            WeightSeq::Table(t) => {
                let parts = t[a as usize - 1..b as usize]
                    .iter()
                    .map(|c| BitSum::from_dyadic(*c))
                    .collect::<Result<Vec<_>>>()?;
                sum_all(parts.iter())
            }
        }
    }

    /// Exponent `e` of the leading bit of `min_{a<=j<=b} c_j`; `2^e` is the
    /// smallest power of two `α` with `α·c_j >= 1` across the range.
    pub fn min_leading_exponent(&self, a: u64, b: u64) -> Result<i64> {
        if a > b {
            return Err(Error::InvalidArgument("empty index range".into()));
        }
        match self {
            WeightSeq::Table(_) => {
                let mut worst = i64::MIN;
                for j in a..=b {
                    let c = self.term(j)?;
                    // For c = m/2^e the leading bit is 2^(bitlen(m) - 1 - e).
                    let bl = 128 - c.mantissa().leading_zeros() as i64;
                    worst = worst.max(c.exponent() as i64 - (bl - 1));
                }
                Ok(worst)
            }
            // Nonincreasing sequences: the minimum sits at `b`.
            _ => self
                .term_bits(b)?
                .leading_exponent()
                .ok_or_else(|| Error::InvalidWeights("zero weight".into())),
        }
    }

    /// Exact upper bound on the tail `Σ_{j>n} c_j`.
    pub fn tail_bound(&self, n: u64) -> Result<TailBound> {
        Ok(match self {
            WeightSeq::Ones => TailBound::Infinite,
            WeightSeq::Geometric(r) => {
                let r = dyadic_to_rational(*r);
                let num = num_traits::pow(r.clone(), n as usize + 1);
                TailBound::Finite(num / (BigRational::one() - r))
            }
            // Σ_{j>n} 2^-(j²) <= 2^-((n+1)²) Σ_{i>=0} 2^-i.
            WeightSeq::SuperExp => {
                let e = (n as i64 + 1) * (n as i64 + 1);
                TailBound::Finite(pow2_rational(1 - e))
            }
            WeightSeq::Table(t) => {
                let start = (n as usize).min(t.len());
                TailBound::Finite(
                    t[start..]
                        .iter()
                        .fold(BigRational::zero(), |acc, c| acc + dyadic_to_rational(*c)),
                )
            }
        })
    }

    pub fn is_summable(&self) -> bool {
        !matches!(self, WeightSeq::Ones)
    }
}

impl FromStr for WeightSeq {
    type Err = Error;
    fn from_str(s: &str) -> Result<WeightSeq> {
        let bad = || Error::InvalidWeights(format!("bad weight rule {s:?}"));
        let s = s.trim();
        let w = match s {
            "ones" => WeightSeq::Ones,
            "superexp" => WeightSeq::SuperExp,
            _ => {
                if let Some(r) = s.strip_prefix("geometric:") {
                    WeightSeq::Geometric(r.parse().map_err(|_| bad())?)
                } else if let Some(t) = s.strip_prefix("table:") {
                    WeightSeq::Table(
                        t.split(',')
                            .map(|x| x.trim().parse::<Dyadic>())
                            .collect::<Result<_>>()
                            .map_err(|_| bad())?,
                    )
                } else {
                    return Err(bad());
                }
            }
        };
        w.validated()
    }
}

impl fmt::Display for WeightSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSeq::Ones => write!(f, "ones"),
            WeightSeq::SuperExp => write!(f, "superexp"),
            WeightSeq::Geometric(r) => write!(f, "geometric:{r}"),
            WeightSeq::Table(t) => {
                let parts: Vec<String> = t.iter().map(Dyadic::to_string).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for WeightSeq {
    type Error = Error;
    fn try_from(s: String) -> Result<WeightSeq> {
        s.parse()
    }
}

impl From<WeightSeq> for String {
    fn from(w: WeightSeq) -> String {
        w.to_string()
    }
}
