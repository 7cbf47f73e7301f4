//! Sequence rules for block resolutions `m_k` and block lengths
//! `n_{k+1} - n_k`, shared by rule-generated block sets and the deletion
//! series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Resolution exponent `m_k` of block `k` (1-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MRule {
    Constant(u32),
    /// `m_k = slope * k + offset`
    Linear { slope: u32, offset: i64 },
    Table(Vec<u32>),
}

impl MRule {
    /// `None` once a table rule runs out.
    pub fn m(&self, k: u64) -> Result<Option<u32>> {
        match self {
            MRule::Constant(m) => Ok(Some(*m)),
            MRule::Linear { slope, offset } => {
                let v = (*slope as i128) * k as i128 + *offset as i128;
                u32::try_from(v)
                    .map(Some)
                    .map_err(|_| Error::InvalidSet(format!("m_{k} = {v} is not a valid exponent")))
            }
            MRule::Table(t) => Ok(usize::try_from(k - 1).ok().and_then(|i| t.get(i)).copied()),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MRule::Table(_))
    }
}

impl FromStr for MRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<MRule> {
        let bad = || Error::InvalidSet(format!("bad m rule {s:?}"));
        let s = s.trim();
        if s == "k" {
            return Ok(MRule::Linear { slope: 1, offset: 0 });
        }
        if let Ok(m) = s.parse::<u32>() {
            return Ok(MRule::Constant(m));
        }
        if let Some(v) = s.strip_prefix("const:") {
            return v.parse().map(MRule::Constant).map_err(|_| bad());
        }
        if let Some(v) = s.strip_prefix("linear:") {
            let (a, b) = v.split_once(':').ok_or_else(bad)?;
            return Ok(MRule::Linear {
                slope: a.parse().map_err(|_| bad())?,
                offset: b.parse().map_err(|_| bad())?,
            });
        }
        if let Some(v) = s.strip_prefix("table:") {
            let t = v
                .split(',')
                .map(|x| x.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            return Ok(MRule::Table(t));
        }
        Err(bad())
    }
}

impl fmt::Display for MRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MRule::Linear { slope: 1, offset: 0 } => write!(f, "k"),
            MRule::Constant(m) => write!(f, "const:{m}"),
            MRule::Linear { slope, offset } => write!(f, "linear:{slope}:{offset}"),
            MRule::Table(t) => {
                let parts: Vec<String> = t.iter().map(u32::to_string).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for MRule {
    type Error = Error;
    fn try_from(s: String) -> Result<MRule> {
        s.parse()
    }
}

impl From<MRule> for String {
    fn from(r: MRule) -> String {
        r.to_string()
    }
}

/// Length `n_{k+1} - n_k` of block `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LenRule {
    Unit,
    Constant(u64),
    /// `ceil(ln 2 / q^(2^m_k))`, which pins each deletion probability near 1/2.
    Balanced { q: Dyadic },
    Table(Vec<u64>),
}

/// Largest length carried as an exact integer for balanced rules.
const EXACT_LEN_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

impl LenRule {
    /// Exact block length; `None` once a table runs out. Balanced lengths
    /// beyond 2^53 are reported as overflow.
    pub fn length(&self, k: u64, m_k: u32) -> Result<Option<u64>> {
        match self {
            LenRule::Unit => Ok(Some(1)),
            LenRule::Constant(l) => Ok(Some(*l)),
            LenRule::Table(t) => Ok(usize::try_from(k - 1).ok().and_then(|i| t.get(i)).copied()),
            LenRule::Balanced { q } => {
                let ln_len = balanced_ln_len(*q, m_k);
                if ln_len.exp() >= EXACT_LEN_LIMIT {
                    return Err(Error::Overflow(format!(
                        "balanced block length for m={m_k} exceeds 2^53"
                    )));
                }
                let t = q.to_f64().powf(2f64.powi(m_k as i32));
                Ok(Some((std::f64::consts::LN_2 / t).ceil() as u64))
            }
        }
    }

    /// Natural log of the block length, available even when the length
    /// itself is astronomically large.
    pub fn ln_length(&self, k: u64, m_k: u32) -> Option<f64> {
        match self {
            LenRule::Balanced { q } => {
                let ln_len = balanced_ln_len(*q, m_k);
                if ln_len < EXACT_LEN_LIMIT.ln() {
                    self.length(k, m_k).ok().flatten().map(|l| (l as f64).ln())
                } else {
                    // The ceiling is invisible at this magnitude.
                    Some(ln_len)
                }
            }
            _ => self.length(k, m_k).ok().flatten().map(|l| (l as f64).ln()),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, LenRule::Table(_))
    }
}

fn balanced_ln_len(q: Dyadic, m: u32) -> f64 {
    std::f64::consts::LN_2.ln() - 2f64.powi(m as i32) * q.to_f64().ln()
}

impl FromStr for LenRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<LenRule> {
        let bad = || Error::InvalidSet(format!("bad length rule {s:?}"));
        let s = s.trim();
        if s == "unit" {
            return Ok(LenRule::Unit);
        }
        if let Ok(l) = s.parse::<u64>() {
            return Ok(LenRule::Constant(l));
        }
        if let Some(v) = s.strip_prefix("const:") {
            return v.parse().map(LenRule::Constant).map_err(|_| bad());
        }
        if let Some(v) = s.strip_prefix("balanced:") {
            let q: Dyadic = v.parse().map_err(|_| bad())?;
            if !(q.is_positive() && q < Dyadic::ONE) {
                return Err(bad());
            }
            return Ok(LenRule::Balanced { q });
        }
        if let Some(v) = s.strip_prefix("table:") {
            let t = v
                .split(',')
                .map(|x| x.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            return Ok(LenRule::Table(t));
        }
        Err(bad())
    }
}

impl fmt::Display for LenRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LenRule::Unit => write!(f, "unit"),
            LenRule::Constant(l) => write!(f, "const:{l}"),
            LenRule::Balanced { q } => write!(f, "balanced:{q}"),
            LenRule::Table(t) => {
                let parts: Vec<String> = t.iter().map(u64::to_string).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for LenRule {
    type Error = Error;
    fn try_from(s: String) -> Result<LenRule> {
        s.parse()
    }
}

impl From<LenRule> for String {
    fn from(r: LenRule) -> String {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rules() {
        assert_eq!("k".parse::<MRule>().unwrap(), MRule::Linear { slope: 1, offset: 0 });
        assert_eq!("1".parse::<MRule>().unwrap(), MRule::Constant(1));
        assert_eq!("table:1,3".parse::<MRule>().unwrap(), MRule::Table(vec![1, 3]));
        assert_eq!("unit".parse::<LenRule>().unwrap(), LenRule::Unit);
        assert!("nope".parse::<LenRule>().is_err());
        for s in ["k", "const:4", "linear:2:-1", "table:1,2"] {
            assert_eq!(s.parse::<MRule>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn balanced_lengths_for_half() {
        let r = LenRule::Balanced { q: Dyadic::HALF };
        // ceil(ln2 * 4) = 3, ceil(ln2 * 16) = 12, ceil(ln2 * 256) = 178
        assert_eq!(r.length(1, 1).unwrap(), Some(3));
        assert_eq!(r.length(2, 2).unwrap(), Some(12));
        assert_eq!(r.length(3, 3).unwrap(), Some(178));
        assert!(r.length(7, 7).is_err());
        let ln = r.ln_length(10, 10).unwrap();
        let expected = std::f64::consts::LN_2.ln() + 1024.0 * std::f64::consts::LN_2;
        assert!((ln - expected).abs() < 1e-9);
    }

    #[test]
    fn table_rules_end() {
        let r = MRule::Table(vec![2]);
        assert_eq!(r.m(1).unwrap(), Some(2));
        assert_eq!(r.m(2).unwrap(), None);
    }
}
