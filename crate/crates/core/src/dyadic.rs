//! Exact dyadic rationals `m / 2^e` and half-open dyadic intervals.
//!
//! Values are kept canonical (`e == 0` or `m` odd), so structural equality is
//! value equality. Arithmetic is exact: a result that does not fit the 128-bit
//! mantissa is an [`Error::Overflow`], never a rounded value. The operator
//! impls (`+`, `-`, `*`) panic on overflow like debug-mode integer arithmetic;
//! use the `checked_*` methods wherever the operands are not known to be small.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: i128,
    exp: u32,
}

fn shl_exact(m: i128, s: u32) -> Option<i128> {
    if m == 0 {
        return Some(0);
    }
    if s >= 127 {
        return None;
    }
    let r = m << s;
    (r >> s == m).then_some(r)
}

fn bit_len(m: i128) -> u32 {
    128 - m.unsigned_abs().leading_zeros()
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { mant: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { mant: 1, exp: 0 };
    pub const HALF: Dyadic = Dyadic { mant: 1, exp: 1 };

    /// `mant / 2^exp`, canonicalized.
    pub fn new(mant: i128, exp: u32) -> Dyadic {
        if mant == 0 {
            return Dyadic::ZERO;
        }
        let tz = mant.trailing_zeros().min(exp);
        Dyadic {
            mant: mant >> tz,
            exp: exp - tz,
        }
    }

    pub fn from_int(n: i128) -> Dyadic {
        Dyadic { mant: n, exp: 0 }
    }

    /// `2^k` for any integer `k`.
    pub fn pow2(k: i64) -> Result<Dyadic> {
        if k >= 0 {
            if k >= 127 {
                return Err(Error::Overflow(format!("2^{k}")));
            }
            Ok(Dyadic::from_int(1i128 << k))
        } else {
            let e = u32::try_from(-k).map_err(|_| Error::Overflow(format!("2^{k}")))?;
            Ok(Dyadic { mant: 1, exp: e })
        }
    }

    pub fn mantissa(&self) -> i128 {
        self.mant
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0
    }

    pub fn is_positive(&self) -> bool {
        self.mant > 0
    }

    pub fn is_negative(&self) -> bool {
        self.mant < 0
    }

    /// True for `2^k`, any integer `k`.
    pub fn is_power_of_two(&self) -> bool {
        self.mant > 0 && (self.mant as u128).is_power_of_two()
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        if self.mant == 0 {
            return None;
        }
        Some(bit_len(self.mant) as i64 - 1 - self.exp as i64)
    }

    fn aligned(&self, other: &Dyadic) -> Result<(i128, i128, u32)> {
        let e = self.exp.max(other.exp);
        let a = shl_exact(self.mant, e - self.exp);
        let b = shl_exact(other.mant, e - other.exp);
        match (a, b) {
            (Some(a), Some(b)) => Ok((a, b, e)),
            _ => Err(Error::Overflow(format!("aligning {self} and {other}"))),
        }
    }

    pub fn checked_add(self, other: Dyadic) -> Result<Dyadic> {
        let (a, b, e) = self.aligned(&other)?;
        a.checked_add(b)
            .map(|m| Dyadic::new(m, e))
            .ok_or_else(|| Error::Overflow(format!("{self} + {other}")))
    }

    pub fn checked_sub(self, other: Dyadic) -> Result<Dyadic> {
        let (a, b, e) = self.aligned(&other)?;
        a.checked_sub(b)
            .map(|m| Dyadic::new(m, e))
            .ok_or_else(|| Error::Overflow(format!("{self} - {other}")))
    }

    pub fn checked_mul(self, other: Dyadic) -> Result<Dyadic> {
        let m = self.mant.checked_mul(other.mant);
        let e = self.exp.checked_add(other.exp);
        match (m, e) {
            (Some(m), Some(e)) => Ok(Dyadic::new(m, e)),
            _ => Err(Error::Overflow(format!("{self} * {other}"))),
        }
    }

    pub fn checked_neg(self) -> Result<Dyadic> {
        self.mant
            .checked_neg()
            .map(|m| Dyadic { mant: m, exp: self.exp })
            .ok_or_else(|| Error::Overflow(format!("-{self}")))
    }

    /// `x * 2^k`.
    pub fn mul_pow2(self, k: i64) -> Result<Dyadic> {
        if self.mant == 0 {
            return Ok(self);
        }
        if k <= 0 {
            let e = (self.exp as i64)
                .checked_sub(k)
                .and_then(|e| u32::try_from(e).ok())
                .ok_or_else(|| Error::Overflow(format!("{self} * 2^{k}")))?;
            return Ok(Dyadic::new(self.mant, e));
        }
        if k <= self.exp as i64 {
            return Ok(Dyadic::new(self.mant, self.exp - k as u32));
        }
        let s = u32::try_from(k - self.exp as i64).unwrap_or(u32::MAX);
        shl_exact(self.mant, s)
            .map(Dyadic::from_int)
            .ok_or_else(|| Error::Overflow(format!("{self} * 2^{k}")))
    }

    pub fn checked_pow(self, n: u32) -> Result<Dyadic> {
        let mut acc = Dyadic::ONE;
        for _ in 0..n {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    pub fn abs(self) -> Dyadic {
        Dyadic {
            mant: self.mant.abs(),
            exp: self.exp,
        }
    }

    /// Largest multiple of `2^-e` that is `<= self`.
    pub fn floor_to_grid(self, e: u32) -> Dyadic {
        if self.exp <= e {
            return self;
        }
        let shift = self.exp - e;
        let m = if shift >= 127 {
            if self.mant < 0 {
                -1
            } else {
                0
            }
        } else {
            self.mant >> shift
        };
        Dyadic::new(m, e)
    }

    /// Smallest multiple of `2^-e` that is `>= self`.
    pub fn ceil_to_grid(self, e: u32) -> Dyadic {
        if self.exp <= e {
            return self;
        }
        // exp > 0 means the mantissa is odd, so negation cannot overflow.
        let neg = Dyadic {
            mant: -self.mant,
            exp: self.exp,
        };
        let f = neg.floor_to_grid(e);
        Dyadic {
            mant: -f.mant,
            exp: f.exp,
        }
    }

    pub fn floor(self) -> i128 {
        self.floor_to_grid(0).mant
    }

    pub fn ceil(self) -> i128 {
        self.ceil_to_grid(0).mant
    }

    /// `floor(self * 2^e)` as an integer.
    pub fn floor_scaled(self, e: u32) -> Result<i128> {
        Ok(self.floor_to_grid(e).mul_pow2(e as i64)?.mant)
    }

    /// `ceil(self * 2^e)` as an integer.
    pub fn ceil_scaled(self, e: u32) -> Result<i128> {
        Ok(self.ceil_to_grid(e).mul_pow2(e as i64)?.mant)
    }

    /// Nearest binary64 (lossy for wide mantissas or extreme exponents).
    pub fn to_f64(self) -> f64 {
        let m = self.mant as f64;
        let mut e = self.exp as i64;
        let mut v = m;
        while e > 0 {
            let step = e.min(1000);
            v *= 2f64.powi(-(step as i32));
            e -= step;
        }
        v
    }

    /// True when [`to_f64`](Self::to_f64) is exact.
    pub fn f64_is_exact(self) -> bool {
        bit_len(self.mant) <= 53 && self.exp <= 1022
    }

    /// Exact conversion of a finite binary64.
    pub fn from_f64_exact(v: f64) -> Result<Dyadic> {
        if !v.is_finite() {
            return Err(Error::Parse(v.to_string()));
        }
        if v == 0.0 {
            return Ok(Dyadic::ZERO);
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (m, e2) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        Dyadic::from_int(sign * m).mul_pow2(e2)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Dyadic) -> Ordering {
        if self.exp == other.exp {
            return self.mant.cmp(&other.mant);
        }
        if self.exp < other.exp {
            match shl_exact(self.mant, other.exp - self.exp) {
                Some(a) => a.cmp(&other.mant),
                // |self| exceeds anything other's mantissa can express.
                None => 0.cmp(&self.mant).reverse(),
            }
        } else {
            other.cmp(self).reverse()
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Dyadic) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        self.checked_add(rhs).expect("dyadic overflow")
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self.checked_sub(rhs).expect("dyadic overflow")
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        self.checked_mul(rhs).expect("dyadic overflow")
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        self.checked_neg().expect("dyadic overflow")
    }
}

impl From<i64> for Dyadic {
    fn from(n: i64) -> Dyadic {
        Dyadic::from_int(n as i128)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.mant, self.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `"m"`, `"m/2^e"`, `"m*2^-e"`, `"m*2^e"` and `"m/d"` with `d` a
/// power of two.
impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Dyadic> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(s.to_string());
        let int = |v: &str| v.parse::<i128>().map_err(|_| bad());
        if let Some((m, e)) = t.split_once("/2^") {
            let e: u32 = e.parse().map_err(|_| bad())?;
            return Ok(Dyadic::new(int(m)?, e));
        }
        if let Some((m, e)) = t.split_once("*2^") {
            let e: i64 = e.parse().map_err(|_| bad())?;
            return Dyadic::from_int(int(m)?).mul_pow2(e);
        }
        if let Some((m, d)) = t.split_once('/') {
            let d: u128 = d.parse().map_err(|_| bad())?;
            if !d.is_power_of_two() {
                return Err(bad());
            }
            return Ok(Dyadic::new(int(m)?, d.trailing_zeros()));
        }
        Ok(Dyadic::from_int(int(&t)?))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Dyadic, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Dyadic;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a dyadic string such as \"3/2^4\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Dyadic, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Dyadic, E> {
                Ok(Dyadic::from(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Dyadic, E> {
                Ok(Dyadic::from_int(v as i128))
            }
        }
        d.deserialize_any(V)
    }
}

/// Half-open interval `[lo, hi)` with `lo < hi`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct DyadicInterval {
    lo: Dyadic,
    hi: Dyadic,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    lo: Dyadic,
    hi: Dyadic,
}

impl TryFrom<RawInterval> for DyadicInterval {
    type Error = Error;
    fn try_from(r: RawInterval) -> Result<Self> {
        DyadicInterval::new(r.lo, r.hi)
    }
}

impl DyadicInterval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Result<DyadicInterval> {
        if lo >= hi {
            return Err(Error::EmptyInterval {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        Ok(DyadicInterval { lo, hi })
    }

    pub fn lo(&self) -> Dyadic {
        self.lo
    }

    pub fn hi(&self) -> Dyadic {
        self.hi
    }

    pub fn length(&self) -> Result<Dyadic> {
        self.hi.checked_sub(self.lo)
    }

    pub fn contains(&self, x: Dyadic) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn intersect(&self, other: &DyadicInterval) -> Option<DyadicInterval> {
        DyadicInterval::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }

    /// Grid points `lo, lo + 2^-e, ...` strictly below `hi`.
    pub fn grid(&self, e: u32) -> Result<Vec<Dyadic>> {
        let step = Dyadic::pow2(-(e as i64))?;
        let mut x = self.lo.ceil_to_grid(e);
        let mut out = Vec::new();
        while x < self.hi {
            out.push(x);
            x = x.checked_add(step)?;
        }
        Ok(out)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}
