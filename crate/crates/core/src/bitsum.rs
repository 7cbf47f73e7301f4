//! Exact nonnegative sums of powers of two with unbounded exponents.
//!
//! A [`BitSum`] is a finite binary expansion `Σ 2^-e` over distinct
//! exponents `e`. Weights such as `2^-(n²)` at indices in the millions have
//! exponents far beyond any fixed-width mantissa, and range sums of them hold
//! millions of bits, so structured ranges are kept lazily and compared by
//! walking their leading exponents.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Signed;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Most bits a sum may hold once materialized.
pub const MATERIALIZE_LIMIT: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BitSum {
    /// Strictly increasing exponents.
    Sparse(Vec<i64>),
    /// `Σ_{j=from}^{to} 2^-(j² + shift)`.
    Squares { from: u64, to: u64, shift: i64 },
    /// `Σ_{i<count} 2^-(first + step·i)`, `step >= 1`.
    Arith { first: i64, step: i64, count: u64 },
}

fn square(j: u64) -> Result<i64> {
    j.checked_mul(j)
        .and_then(|s| i64::try_from(s).ok())
        .ok_or_else(|| Error::Overflow(format!("exponent {j}^2")))
}

impl BitSum {
    pub fn zero() -> BitSum {
        BitSum::Sparse(Vec::new())
    }

    pub fn pow2_neg(e: i64) -> BitSum {
        BitSum::Sparse(vec![e])
    }

    pub fn squares(from: u64, to: u64) -> Result<BitSum> {
        if from > to {
            return Ok(BitSum::zero());
        }
        square(to)?;
        Ok(BitSum::Squares { from, to, shift: 0 })
    }

    pub fn arith(first: i64, step: i64, count: u64) -> Result<BitSum> {
        if count == 0 {
            return Ok(BitSum::zero());
        }
        if step < 1 {
            return Err(Error::InvalidArgument("arithmetic step must be >= 1".into()));
        }
        (count as i128 - 1)
            .checked_mul(step as i128)
            .and_then(|s| s.checked_add(first as i128))
            .filter(|v| i64::try_from(*v).is_ok())
            .ok_or_else(|| Error::Overflow("arithmetic exponent".into()))?;
        Ok(BitSum::Arith { first, step, count })
    }

    pub fn from_dyadic(d: Dyadic) -> Result<BitSum> {
        if d.is_negative() {
            return Err(Error::InvalidArgument(format!("{d} is negative")));
        }
        Ok(from_mantissa(&BigInt::from(d.mantissa()), d.exponent() as i64))
    }

    /// `m / 2^e` for a nonnegative big integer `m`.
    pub fn from_big(m: &BigInt, e: i64) -> Result<BitSum> {
        if m.is_negative() {
            return Err(Error::InvalidArgument("negative mantissa".into()));
        }
        Ok(from_mantissa(m, e))
    }

    pub fn is_zero(&self) -> bool {
        self.bit_count() == 0
    }

    pub fn bit_count(&self) -> u64 {
        match self {
            BitSum::Sparse(v) => v.len() as u64,
            BitSum::Squares { from, to, .. } => to - from + 1,
            BitSum::Arith { count, .. } => *count,
        }
    }

    /// Exponents in increasing order (largest bit first).
    pub fn exponents(&self) -> Box<dyn Iterator<Item = i64> + '_> {
        match self {
            BitSum::Sparse(v) => Box::new(v.iter().copied()),
            BitSum::Squares { from, to, shift } => {
                Box::new((*from..=*to).map(move |j| (j * j) as i64 + shift))
            }
            BitSum::Arith { first, step, count } => {
                Box::new((0..*count as i64).map(move |i| first + step * i))
            }
        }
    }

    pub fn leading_exponent(&self) -> Option<i64> {
        self.exponents().next()
    }

    /// `self · 2^-k`.
    pub fn shifted(&self, k: i64) -> Result<BitSum> {
        let of = || Error::Overflow("bit sum shift".into());
        Ok(match self {
            BitSum::Sparse(v) => BitSum::Sparse(
                v.iter()
                    .map(|e| e.checked_add(k).ok_or_else(of))
                    .collect::<Result<_>>()?,
            ),
            BitSum::Squares { from, to, shift } => BitSum::Squares {
                from: *from,
                to: *to,
                shift: shift.checked_add(k).ok_or_else(of)?,
            },
            BitSum::Arith { first, step, count } => BitSum::Arith {
                first: first.checked_add(k).ok_or_else(of)?,
                step: *step,
                count: *count,
            },
        })
    }

    /// Exact sum; the result is materialized.
    pub fn add(&self, other: &BitSum) -> Result<BitSum> {
        sum_all([self, other])
    }

    /// `log2` of the value; `-inf` for zero. Only the leading 64 bits matter
    /// at binary64 precision.
    pub fn log2(&self) -> f64 {
        let mut it = self.exponents();
        let Some(e0) = it.next() else {
            return f64::NEG_INFINITY;
        };
        let mut frac = 1.0f64;
        for e in it.take(64) {
            let d = e - e0;
            if d > 1100 {
                break;
            }
            frac += 2f64.powi(-(d as i32));
        }
        frac.log2() - e0 as f64
    }

    pub fn to_f64(&self) -> f64 {
        self.log2().exp2()
    }

    /// Exact conversion when the value fits a [`Dyadic`].
    pub fn to_dyadic(&self) -> Result<Dyadic> {
        let mut acc = Dyadic::ZERO;
        for e in self.exponents() {
            acc = acc.checked_add(Dyadic::pow2(-e)?)?;
        }
        Ok(acc)
    }
}

fn from_mantissa(m: &BigInt, e: i64) -> BitSum {
    let (_, mag) = m.to_u64_digits();
    let mut exps = Vec::new();
    for (w, word) in mag.iter().enumerate() {
        let mut word = *word;
        while word != 0 {
            let b = word.trailing_zeros() as i64;
            exps.push(e - (w as i64 * 64 + b));
            word &= word - 1;
        }
    }
    exps.reverse();
    BitSum::Sparse(exps)
}

/// Exact sum of several bit sums, carried into a normalized expansion.
pub fn sum_all<'a>(parts: impl IntoIterator<Item = &'a BitSum>) -> Result<BitSum> {
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut total = 0u64;
    for p in parts {
        total += p.bit_count();
        if total > MATERIALIZE_LIMIT {
            return Err(Error::Overflow(format!(
                "sum holds more than {MATERIALIZE_LIMIT} bits"
            )));
        }
        for e in p.exponents() {
            *counts.entry(e).or_default() += 1;
        }
    }
    let mut out = Vec::with_capacity(counts.len());
    // Carry from the smallest bits (largest exponents) upwards.
    while let Some((e, c)) = counts.pop_last() {
        if c % 2 == 1 {
            out.push(e);
        }
        if c >= 2 {
            *counts.entry(e - 1).or_default() += c / 2;
        }
    }
    out.reverse();
    Ok(BitSum::Sparse(out))
}

impl Ord for BitSum {
    fn cmp(&self, other: &BitSum) -> Ordering {
        // Binary expansions are unique, so the first differing exponent
        // decides: a smaller exponent is a larger bit.
        let mut a = self.exponents();
        let mut b = other.exponents();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) if x != y => return y.cmp(&x),
                _ => {}
            }
        }
    }
}

impl PartialOrd for BitSum {
    fn partial_cmp(&self, other: &BitSum) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn dyadic_round_trip() {
        for s in ["0", "1", "3/8", "5", "1023/2^10", "12345/2^7"] {
            let b = BitSum::from_dyadic(d(s)).unwrap();
            assert_eq!(b.to_dyadic().unwrap(), d(s));
        }
    }

    #[test]
    fn carries() {
        let a = BitSum::from_dyadic(d("3/4")).unwrap();
        let b = BitSum::from_dyadic(d("1/4")).unwrap();
        assert_eq!(a.add(&b).unwrap(), BitSum::Sparse(vec![0]));
        let s = sum_all([&a, &a, &a]).unwrap();
        assert_eq!(s.to_dyadic().unwrap(), d("9/4"));
    }

    #[test]
    fn ordering_matches_dyadic() {
        let vals = ["0", "1/2", "3/8", "5/8", "1", "7/4", "1/1024"];
        for x in vals {
            for y in vals {
                let bx = BitSum::from_dyadic(d(x)).unwrap();
                let by = BitSum::from_dyadic(d(y)).unwrap();
                assert_eq!(bx.cmp(&by), d(x).cmp(&d(y)), "{x} {y}");
            }
        }
    }

    #[test]
    fn lazy_forms_agree_with_materialized() {
        let sq = BitSum::squares(2, 6).unwrap();
        let mat = sum_all([&sq]).unwrap();
        assert_eq!(sq.cmp(&mat), Ordering::Equal);
        assert_eq!(sq.to_dyadic().unwrap(), mat.to_dyadic().unwrap());
        let ar = BitSum::arith(3, 2, 4).unwrap();
        assert_eq!(ar.to_dyadic().unwrap(), d("85/2^9"));
        assert_eq!(ar.shifted(-3).unwrap().to_dyadic().unwrap(), d("85/2^6"));
    }

    #[test]
    fn huge_exponents_compare_lazily() {
        let j = 1u64 << 25;
        let big = BitSum::squares(j, j + 1_000_000).unwrap();
        let single = BitSum::squares(j, j).unwrap();
        assert!(big > single);
        assert!(big < single.shifted(-1).unwrap());
        assert!((big.log2() + (j * j) as f64).abs() < 1e-6);
    }
}
