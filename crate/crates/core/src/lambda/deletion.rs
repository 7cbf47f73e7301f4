//! Deletion events for thinned block sets.
//!
//! Thinning block `k` (points `2^-m_k ℕ ∩ [n_k, n_{k+1})`) with keep
//! probability `p = 1 - q`, the event `A_k` that some unit window of the
//! block loses all its points has probability
//! `1 - (1 - q^(2^m_k))^(n_{k+1} - n_k)`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::rules::{LenRule, MRule};
use super::{Block, LambdaSet};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Largest exact result computed, in denominator bits.
pub const EXACT_BIT_BUDGET: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct AkProbability {
    /// Exact value when the denominator fits the bit budget.
    pub exact: Option<BigRational>,
    pub approx: f64,
    /// Set when only the binary64 value is available.
    pub overflow: bool,
}

fn check_q(q: Dyadic) -> Result<()> {
    if q.is_positive() && q < Dyadic::ONE {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("q = {q} not in (0,1)")))
    }
}

/// `P(A_k)` for one block of resolution `m` and `len` unit windows.
pub fn ak_probability(m: u32, q: Dyadic, len: u64) -> Result<AkProbability> {
    ak_probability_within(m, q, len, EXACT_BIT_BUDGET)
}

// Series terms only need binary64, so exact evaluation there is kept cheap.
const SERIES_BIT_BUDGET: u64 = 1 << 12;

fn ak_probability_within(m: u32, q: Dyadic, len: u64, budget: u64) -> Result<AkProbability> {
    check_q(q)?;
    if len == 0 {
        return Ok(AkProbability {
            exact: Some(BigRational::zero()),
            approx: 0.0,
            overflow: false,
        });
    }
    let approx = ak_term(m, q, (len as f64).ln());
    let e = q.exponent() as u64;
    let bits = (e as u128) << m.min(127);
    let bits = if m >= 64 { None } else { Some(bits * len as u128) };
    let exact = match bits {
        Some(b) if b <= budget as u128 => {
            // q = a / 2^e, t = a^(2^m) / 2^E with E = e 2^m.
            let big_e = (e << m) as usize;
            let a = BigInt::from(q.mantissa());
            let t_num = a.pow(1u32 << m);
            let one_e = BigInt::one() << big_e;
            let survive = (&one_e - t_num).pow(len as u32);
            let denom = BigInt::one() << (big_e * len as usize);
            Some(BigRational::new(&denom - survive, denom))
        }
        _ => None,
    };
    let approx = match &exact {
        Some(r) => r.to_f64().unwrap_or(approx),
        None => approx,
    };
    Ok(AkProbability {
        overflow: exact.is_none(),
        exact,
        approx,
    })
}

/// `1 - (1 - t)^L` with `t = q^(2^m)`, given `ln L`; accurate in both the
/// tiny-`t` and huge-`L` regimes.
pub fn ak_term(m: u32, q: Dyadic, ln_len: f64) -> f64 {
    let ln_t = 2f64.powi(m.min(1023) as i32) * q.to_f64().ln();
    let exponent = if ln_t < -30.0 {
        // ln(1 - t) = -t to well below binary64 resolution.
        -(ln_len + ln_t).exp()
    } else {
        ln_len.exp() * (-(ln_t.exp())).ln_1p()
    };
    -exponent.exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Diverging,
    Flattening,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Diverging => "diverging",
            Trend::Flattening => "flattening",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AkSeries {
    pub terms: Vec<f64>,
    pub partials: Vec<f64>,
    pub trend: Trend,
}

/// Last-decade increment against first-decade increment (advisory).
pub fn decade_trend(partials: &[f64]) -> Trend {
    let k = partials.len();
    if k == 0 {
        return Trend::Flattening;
    }
    let decade = k.div_ceil(10).max(1);
    let first = partials[decade - 1];
    let last = partials[k - 1] - if k > decade { partials[k - 1 - decade] } else { 0.0 };
    if first > 0.0 && last >= 0.5 * first {
        Trend::Diverging
    } else {
        Trend::Flattening
    }
}

/// Partial sums `Σ_{k<=K} P(A_k)`; stops early if a table rule runs out.
pub fn ak_series_partial(ms: &MRule, ns: &LenRule, q: Dyadic, k_max: u64) -> Result<AkSeries> {
    check_q(q)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let mut terms = Vec::new();
    let mut partials = Vec::new();
    let mut acc = 0.0;
    for k in 1..=k_max {
        let Some(m) = ms.m(k)? else { break };
        let term = match ns.length(k, m) {
            Ok(None) => break,
            Ok(Some(0)) => 0.0,
            Ok(Some(len)) => ak_probability_within(m, q, len, SERIES_BIT_BUDGET)?.approx,
            Err(Error::Overflow(_)) => match ns.ln_length(k, m) {
                Some(ln) => ak_term(m, q, ln),
                None => break,
            },
            Err(e) => return Err(e),
        };
        acc += term;
        terms.push(term);
        partials.push(acc);
    }
    let trend = decade_trend(&partials);
    Ok(AkSeries {
        terms,
        partials,
        trend,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AkEstimate {
    pub trials: u64,
    pub events: u64,
    pub frequency: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `P(A_k)`: each trial thins the block
/// `2^-m ℕ ∩ [1, 1 + len)` with keep probability `1 - q` and seed
/// `seed_base + trial`.
pub fn ak_monte_carlo(m: u32, q: Dyadic, len: u64, trials: u64, seed_base: u64) -> Result<AkEstimate> {
    check_q(q)?;
    if len == 0 {
        return Ok(AkEstimate { trials, events: 0, frequency: 0.0, std_error: 0.0 });
    }
    let n_hi = i64::try_from(len).ok().and_then(|l| l.checked_add(1)).ok_or_else(|| Error::Overflow("block length".into()))?;
    let base = LambdaSet::blocks(vec![Block { m, n_lo: 1, n_hi }])?;
    let per_window = 1u64
        .checked_shl(m)
        .filter(|_| m < 63)
        .ok_or_else(|| Error::Overflow(format!("2^{m} points per window")))?;
    let p = Dyadic::ONE.checked_sub(q)?;
    let mut events = 0u64;
    for trial in 0..trials {
        let LambdaSet::Thinned(t) = base.thin(p, seed_base.wrapping_add(trial))? else {
            unreachable!("thin returns a thinned set")
        };
        let hole = (0..len).any(|w| {
            let first = w * per_window + 1;
            !(first..first + per_window).any(|k| t.keeps(k))
        });
        events += hole as u64;
    }
    let frequency = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
    let exact = ak_probability(m, q, len)?.approx;
    let std_error = if trials == 0 { 0.0 } else { (exact * (1.0 - exact) / trials as f64).sqrt() };
    Ok(AkEstimate { trials, events, frequency, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn hand_values() {
        let a = ak_probability(1, Dyadic::HALF, 1).unwrap();
        assert_eq!(a.exact, Some(rat(1, 4)));
        assert_eq!(a.approx, 0.25);
        let b = ak_probability(1, Dyadic::HALF, 2).unwrap();
        assert_eq!(b.exact, Some(rat(7, 16)));
        assert_eq!(ak_probability(5, "3/4".parse().unwrap(), 0).unwrap().approx, 0.0);
    }

    #[test]
    fn single_window_complement() {
        for m in 0..6 {
            for q in ["1/2", "3/4", "1/8", "5/8"] {
                let q: Dyadic = q.parse().unwrap();
                let a = ak_probability(m, q, 1).unwrap().exact.unwrap();
                let qf = BigRational::new(BigInt::from(q.mantissa()), BigInt::one() << q.exponent());
                let t = num_traits::pow(qf, 1usize << m);
                assert_eq!(a + (BigRational::one() - t), BigRational::one());
            }
        }
    }

    #[test]
    fn overflow_falls_back_to_float() {
        let a = ak_probability(30, Dyadic::HALF, 1).unwrap();
        assert!(a.overflow && a.exact.is_none());
        assert!(a.approx > 0.0 && a.approx < 1e-300 || a.approx == 0.0);
    }

    #[test]
    fn float_term_matches_exact() {
        for (m, len) in [(1u32, 3u64), (2, 12), (3, 178), (0, 5)] {
            let a = ak_probability(m, Dyadic::HALF, len).unwrap();
            let f = ak_term(m, Dyadic::HALF, (len as f64).ln());
            assert!((a.approx - f).abs() < 1e-12, "{m} {len}");
        }
    }

    #[test]
    fn balanced_series_diverges() {
        let s = ak_series_partial(
            &MRule::Linear { slope: 1, offset: 0 },
            &LenRule::Balanced { q: Dyadic::HALF },
            Dyadic::HALF,
            40,
        )
        .unwrap();
        assert_eq!(s.terms.len(), 40);
        assert!(s.terms.iter().all(|t| *t > 0.45 && *t < 0.75), "{:?}", s.terms);
        assert_eq!(s.trend, Trend::Diverging);
    }

    #[test]
    fn unit_series_converges() {
        let s = ak_series_partial(&MRule::Linear { slope: 1, offset: 0 }, &LenRule::Unit, Dyadic::HALF, 30).unwrap();
        assert_eq!(s.trend, Trend::Flattening);
        let tail = s.partials[29] - s.partials[9];
        assert!(tail < 1e-200);
        let first = ak_series_partial(&MRule::Linear { slope: 1, offset: 0 }, &LenRule::Unit, Dyadic::HALF, 1).unwrap();
        assert_eq!(first.partials, vec![0.25]);
    }

    #[test]
    fn monte_carlo_small() {
        let e = ak_monte_carlo(1, Dyadic::HALF, 2, 20_000, 0).unwrap();
        assert!((e.frequency - 7.0 / 16.0).abs() < 4.0 * e.std_error);
    }
}
