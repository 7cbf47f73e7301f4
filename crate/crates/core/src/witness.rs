//! Step-function witnesses and exact evaluation of
//! `s_c(x) = Σ_n c_n f(x + λ_n)`.
//!
//! Partial sums never enumerate `Λ`: for every block `[lo, hi)` of `f` the
//! contributing indices form one contiguous run, found by closed-form
//! counting, and the run's weight is an exact range sum.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::bitsum::BitSum;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::lambda::deletion::{decade_trend, Trend};
use crate::lambda::{CountGrowth, LambdaSet};
use crate::weights::{dyadic_to_rational, WeightSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessBlock {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub level: Dyadic,
}

impl WitnessBlock {
    pub fn new(lo: Dyadic, hi: Dyadic, level: Dyadic) -> WitnessBlock {
        WitnessBlock { lo, hi, level }
    }
}

/// Finite step function: value `level` on each `[lo, hi)`, zero elsewhere.
/// A `horizon` marks a snapshot of an unbounded witness; evaluating at or
/// beyond it is an error rather than a silent zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWitness", into = "RawWitness")]
pub struct PiecewiseWitness {
    blocks: Vec<WitnessBlock>,
    horizon: Option<Dyadic>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWitness {
    blocks: Vec<WitnessBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<Dyadic>,
}

impl TryFrom<RawWitness> for PiecewiseWitness {
    type Error = Error;
    fn try_from(r: RawWitness) -> Result<PiecewiseWitness> {
        PiecewiseWitness::new(r.blocks, r.horizon)
    }
}

impl From<PiecewiseWitness> for RawWitness {
    fn from(w: PiecewiseWitness) -> RawWitness {
        RawWitness {
            blocks: w.blocks,
            horizon: w.horizon,
        }
    }
}

impl PiecewiseWitness {
    pub fn new(blocks: Vec<WitnessBlock>, horizon: Option<Dyadic>) -> Result<PiecewiseWitness> {
        for b in &blocks {
            if b.lo >= b.hi {
                return Err(Error::InvalidWitness(format!("empty block [{}, {})", b.lo, b.hi)));
            }
            if !b.level.is_positive() {
                return Err(Error::InvalidWitness(format!("level {} must be positive", b.level)));
            }
            if let Some(h) = horizon {
                if b.hi > h {
                    return Err(Error::InvalidWitness(format!("block ends past horizon {h}")));
                }
            }
        }
        for w in blocks.windows(2) {
            if w[0].hi > w[1].lo {
                return Err(Error::InvalidWitness(format!(
                    "blocks at {} and {} overlap or are unsorted",
                    w[0].lo, w[1].lo
                )));
            }
        }
        Ok(PiecewiseWitness { blocks, horizon })
    }

    pub fn zero() -> PiecewiseWitness {
        PiecewiseWitness {
            blocks: Vec::new(),
            horizon: None,
        }
    }

    /// `1_{[lo, hi)}`.
    pub fn indicator(lo: Dyadic, hi: Dyadic) -> Result<PiecewiseWitness> {
        PiecewiseWitness::new(vec![WitnessBlock::new(lo, hi, Dyadic::ONE)], None)
    }

    pub fn blocks(&self) -> &[WitnessBlock] {
        &self.blocks
    }

    pub fn horizon(&self) -> Option<Dyadic> {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn check_position(&self, x: Dyadic) -> Result<()> {
        match self.horizon {
            Some(h) if x >= h => Err(Error::GeneratorExhausted {
                x: x.to_string(),
                horizon: h.to_string(),
            }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: Dyadic) -> Result<Dyadic> {
        self.check_position(x)?;
        let i = self.blocks.partition_point(|b| b.lo <= x);
        Ok(match i.checked_sub(1).map(|i| self.blocks[i]) {
            Some(b) if x < b.hi => b.level,
            _ => Dyadic::ZERO,
        })
    }

    /// Same intervals, levels mapped through `f`. Blocks mapped to zero are
    /// dropped.
    pub fn map_levels(&self, f: impl Fn(Dyadic) -> Dyadic) -> PiecewiseWitness {
        PiecewiseWitness {
            blocks: self
                .blocks
                .iter()
                .map(|b| WitnessBlock::new(b.lo, b.hi, f(b.level)))
                .filter(|b| b.level.is_positive())
                .collect(),
            horizon: self.horizon,
        }
    }

    /// Pointwise sum.
    pub fn add(&self, other: &PiecewiseWitness) -> Result<PiecewiseWitness> {
        self.combine(other, |a, b| a.checked_add(b))
    }

    /// Pointwise `op(self, other)` on the common refinement of both block
    /// lists; nonpositive results are dropped.
    pub fn combine(
        &self,
        other: &PiecewiseWitness,
        op: impl Fn(Dyadic, Dyadic) -> Result<Dyadic>,
    ) -> Result<PiecewiseWitness> {
        let mut cuts: Vec<Dyadic> = self
            .blocks
            .iter()
            .chain(&other.blocks)
            .flat_map(|b| [b.lo, b.hi])
            .collect();
        cuts.sort();
        cuts.dedup();
        let horizon = match (self.horizon, other.horizon) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let level_at = |w: &PiecewiseWitness, x: Dyadic| {
            let i = w.blocks.partition_point(|b| b.lo <= x);
            match i.checked_sub(1).map(|i| w.blocks[i]) {
                Some(b) if x < b.hi => b.level,
                _ => Dyadic::ZERO,
            }
        };
        let mut blocks: Vec<WitnessBlock> = Vec::new();
        for w in cuts.windows(2) {
            if horizon.is_some_and(|h| w[0] >= h) {
                break;
            }
            let (a, b) = (level_at(self, w[0]), level_at(other, w[0]));
            if a.is_zero() && b.is_zero() {
                continue;
            }
            let level = op(a, b)?;
            if level.is_positive() {
                blocks.push(WitnessBlock::new(w[0], w[1], level));
            }
        }
        PiecewiseWitness::new(merge_equal(blocks), horizon)
    }

    /// Largest level, zero for the empty witness.
    pub fn max_level(&self) -> Dyadic {
        self.blocks.iter().map(|b| b.level).max().unwrap_or(Dyadic::ZERO)
    }
}

/// Merges contiguous blocks of equal level.
fn merge_equal(blocks: Vec<WitnessBlock>) -> Vec<WitnessBlock> {
    let mut out: Vec<WitnessBlock> = Vec::with_capacity(blocks.len());
    for b in blocks {
        match out.last_mut() {
            Some(last) if last.hi == b.lo && last.level == b.level => last.hi = b.hi,
            _ => out.push(b),
        }
    }
    out
}

/// Source of an unbounded witness, materialized up to a horizon.
pub trait WitnessGenerator {
    fn snapshot(&self, horizon: Dyadic) -> Result<PiecewiseWitness>;
}

impl WitnessGenerator for PiecewiseWitness {
    fn snapshot(&self, horizon: Dyadic) -> Result<PiecewiseWitness> {
        if let Some(h) = self.horizon {
            if horizon > h {
                return Err(Error::GeneratorExhausted {
                    x: horizon.to_string(),
                    horizon: h.to_string(),
                });
            }
        }
        let blocks = self
            .blocks
            .iter()
            .filter(|b| b.lo < horizon)
            .map(|b| WitnessBlock::new(b.lo, b.hi.min(horizon), b.level))
            .collect();
        PiecewiseWitness::new(blocks, Some(horizon))
    }
}

/// A fixed pattern of blocks placed at every point `a` of an anchor set:
/// block `[a + lo, a + hi)` for each pattern block.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredPattern {
    pub anchors: LambdaSet,
    pub pattern: Vec<WitnessBlock>,
}

impl WitnessGenerator for AnchoredPattern {
    fn snapshot(&self, horizon: Dyadic) -> Result<PiecewiseWitness> {
        let lead = self.pattern.iter().map(|b| b.lo).min().unwrap_or(Dyadic::ZERO);
        let first = self.anchors.first_point()?.unwrap_or(Dyadic::ZERO);
        let anchors = self.anchors.points(first, horizon.checked_sub(lead)?, false)?;
        let mut blocks = Vec::new();
        for a in anchors {
            for p in &self.pattern {
                let lo = a.checked_add(p.lo)?;
                let hi = a.checked_add(p.hi)?.min(horizon);
                if lo < hi {
                    blocks.push(WitnessBlock::new(lo, hi, p.level));
                }
            }
        }
        blocks.sort_by_key(|b| b.lo);
        PiecewiseWitness::new(blocks, Some(horizon))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialSum {
    pub value: Dyadic,
    /// Number of `λ <= λ_max`.
    pub terms: u64,
}

/// Index runs `(level, first, last)` of the `λ <= λ_max` with `x + λ` in a
/// block of `f`.
fn contributing_runs(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    x: Dyadic,
    lambda_max: Dyadic,
) -> Result<Vec<(Dyadic, u64, u64)>> {
    f.check_position(x.checked_add(lambda_max)?).or_else(|e| {
        // Positions past the horizon only matter if some λ reaches them.
        let h = f.horizon.expect("only horizons fail");
        if set.count_between(h.checked_sub(x)?, lambda_max, true)? == 0 {
            Ok(())
        } else {
            Err(e)
        }
    })?;
    let mut runs = Vec::new();
    for b in &f.blocks {
        let lo = b.lo.checked_sub(x)?;
        if lo > lambda_max {
            break;
        }
        let hi = b.hi.checked_sub(x)?;
        let span = if hi > lambda_max {
            set.index_span(lo, lambda_max, true)?
        } else {
            set.index_span(lo, hi, false)?
        };
        if let Some((a, z)) = span {
            runs.push((b.level, a, z));
        }
    }
    Ok(runs)
}

/// Exact `Σ_{λ_n <= λ_max} c_n f(x + λ_n)`.
pub fn partial_sum(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    c: &WeightSeq,
    x: Dyadic,
    lambda_max: Dyadic,
) -> Result<PartialSum> {
    let mut value = Dyadic::ZERO;
    for (level, a, z) in contributing_runs(f, set, x, lambda_max)? {
        let w = c.range_sum(a, z)?.to_dyadic()?;
        value = value.checked_add(level.checked_mul(w)?)?;
    }
    Ok(PartialSum {
        value,
        terms: set.count_below(lambda_max, true)?,
    })
}

/// Binary64 mirror of [`partial_sum`] for sums whose exact value does not
/// fit a dyadic.
pub fn partial_sum_f64(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    c: &WeightSeq,
    x: Dyadic,
    lambda_max: Dyadic,
) -> Result<f64> {
    let mut value = 0.0;
    for (level, a, z) in contributing_runs(f, set, x, lambda_max)? {
        let w: BitSum = c.range_sum(a, z)?;
        value += level.to_f64() * w.to_f64();
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Label {
    Convergent,
    Divergent,
    Undecided,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Convergent => "convergent",
            Label::Divergent => "divergent",
            Label::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Partials {
    Exact(Vec<Dyadic>),
    Approx(Vec<f64>),
}

impl Partials {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Partials::Exact(v) => v.iter().map(|d| d.to_f64()).collect(),
            Partials::Approx(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Partials::Exact(v) => v.len(),
            Partials::Approx(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const DIVERGENCE_SLOPE: f64 = 0.5;
pub const DIVERGENCE_FLOOR: f64 = 10.0;
/// Stagnation threshold for binary64 runs; exact runs require zero.
pub const CONVERGENCE_EPS: f64 = 9.094947017729282e-13; // 2^-40

/// Heuristic label of a partial-sum trajectory (advisory only).
pub fn classify(partials: &Partials) -> Label {
    let n = partials.len();
    if n == 0 {
        return Label::Undecided;
    }
    let fl = partials.to_f64();
    let decade = n.div_ceil(10).max(1);
    let first = fl[decade - 1];
    let last = fl[n - 1] - if n > decade { fl[n - 1 - decade] } else { 0.0 };
    if first > 0.0 && last >= DIVERGENCE_SLOPE * first && fl[n - 1] > DIVERGENCE_FLOOR {
        return Label::Divergent;
    }
    let from = (n / 2).max(1);
    let stagnant = match partials {
        Partials::Exact(v) => (from..n).all(|i| v[i] == v[i - 1]),
        Partials::Approx(v) => (from..n).all(|i| v[i] - v[i - 1] < CONVERGENCE_EPS),
    };
    if stagnant && (n > 1 || fl[0] == 0.0) {
        Label::Convergent
    } else {
        Label::Undecided
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumTrajectory {
    pub x: Dyadic,
    pub horizons: Vec<Dyadic>,
    pub partials: Partials,
    pub label: Label,
}

/// Partial sums at increasing cutoffs; exact unless a sum overflows, in which
/// case the whole trajectory is reported in binary64.
pub fn classify_trajectory(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    c: &WeightSeq,
    x: Dyadic,
    horizons: &[Dyadic],
) -> Result<SumTrajectory> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("horizons must increase".into()));
    }
    let exact: Result<Vec<Dyadic>> = horizons
        .iter()
        .map(|&h| partial_sum(f, set, c, x, h).map(|p| p.value))
        .collect();
    let partials = match exact {
        Ok(v) => Partials::Exact(v),
        Err(Error::Overflow(_)) => Partials::Approx(
            horizons
                .iter()
                .map(|&h| partial_sum_f64(f, set, c, x, h))
                .collect::<Result<_>>()?,
        ),
        Err(e) => return Err(e),
    };
    Ok(SumTrajectory {
        x,
        horizons: horizons.to_vec(),
        label: classify(&partials),
        partials,
    })
}

/// Smallest `c` with `n <= 2^c`.
fn ceil_log2(n: u64) -> i64 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as i64
    }
}

/// Unit intervals of the regularization: `I_1 = [-K, 1)`, `I_k = [k-1, k)`.
fn unit_intervals(k_bound: i64, horizon: Dyadic) -> Vec<(i64, Dyadic, Dyadic)> {
    let mut out = vec![(1, Dyadic::from(-k_bound), Dyadic::ONE.min(horizon))];
    let mut k = 2i64;
    while Dyadic::from(k - 1) < horizon {
        out.push((k, Dyadic::from(k - 1), Dyadic::from(k).min(horizon)));
        k += 1;
    }
    out
}

/// `f_0 = f + Σ ε_k 1_{I_k}` on `[-K, horizon)`, with
/// `ε_k = 2^-k / 2^⌈log2 max(1, #(Λ ∩ [inf I_k - K, sup I_k + K)))⌉`.
pub fn regularize_f0(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    k_bound: i64,
    horizon: Dyadic,
) -> Result<PiecewiseWitness> {
    f.add(&epsilon_witness(f, set, k_bound, horizon)?)
}

/// `Σ ε_k 1_{I_k}` alone.
fn epsilon_witness(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    k_bound: i64,
    horizon: Dyadic,
) -> Result<PiecewiseWitness> {
    if k_bound < 0 {
        return Err(Error::InvalidArgument("K must be >= 0".into()));
    }
    let kd = Dyadic::from(k_bound);
    let mut eps_blocks = Vec::new();
    for (k, lo, hi) in unit_intervals(k_bound, horizon) {
        if lo >= hi {
            continue;
        }
        let len = hi.checked_sub(lo)?.checked_add(kd.checked_add(kd)?)?;
        let count = set.count_in(lo.checked_sub(kd)?, len)?;
        let eps = Dyadic::pow2(-k - ceil_log2(count))?;
        eps_blocks.push(WitnessBlock::new(lo, hi, eps));
    }
    PiecewiseWitness::new(eps_blocks, f.horizon)
}

/// `f_1 = min(f_0, 1)`.
pub fn clip_f1(f0: &PiecewiseWitness) -> PiecewiseWitness {
    f0.map_levels(|l| l.min(Dyadic::ONE))
}

/// The power of two `p` with `l/2 <= p < l`: `2^⌊log2 l⌋`, halved when `l`
/// is itself a power of two.
pub fn quantize_level(l: Dyadic) -> Dyadic {
    let e = l.floor_log2().expect("positive level");
    let p = Dyadic::pow2(e).expect("in range");
    if p == l {
        Dyadic::pow2(e - 1).expect("in range")
    } else {
        p
    }
}

pub fn quantize_f2(f1: &PiecewiseWitness) -> PiecewiseWitness {
    f1.map_levels(quantize_level)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimplifyEntry {
    pub k: i64,
    pub delta: Dyadic,
    /// Measure of `{f_2 != f_3} ∩ [k-1, k)`.
    pub modified_measure: Dyadic,
}

/// Per unit interval, rewrites `f_2` as a finite union of `[x, y)` blocks.
/// Step functions are already of that form, so this only merges equal
/// neighbours and the modified measure is zero; the `δ_k` budget
/// `2^-k / 2^⌈log2 max(1, #(Λ ∩ [k, k+2)))⌉` is reported alongside.
pub fn simplify_f3(
    f2: &PiecewiseWitness,
    set: &LambdaSet,
) -> Result<(PiecewiseWitness, Vec<SimplifyEntry>)> {
    let f3 = PiecewiseWitness::new(merge_equal(f2.blocks.clone()), f2.horizon)?;
    let mut report = Vec::new();
    if let (Some(first), Some(last)) = (f2.blocks.first(), f2.blocks.last()) {
        let k_lo = i64::try_from(first.lo.floor()).map_err(|_| Error::Overflow("k".into()))? + 1;
        let k_hi = i64::try_from(last.hi.ceil()).map_err(|_| Error::Overflow("k".into()))?;
        for k in k_lo..=k_hi {
            let count = set.count_in(Dyadic::from(k), Dyadic::from(2))?;
            report.push(SimplifyEntry {
                k,
                delta: Dyadic::pow2(-k - ceil_log2(count))?,
                modified_measure: Dyadic::ZERO,
            });
        }
    }
    Ok((f3, report))
}

/// Full pipeline `f -> f_0 -> f_1 -> f_2 -> f_3`.
///
/// `f_0` itself is never materialized: far out, `ε_k` sits hundreds of bits
/// below the levels of `f`, so each level of `f_2` is computed from the
/// exact rational `min(f + ε, 1)`.
pub fn regularize(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    k_bound: i64,
    horizon: Dyadic,
) -> Result<PiecewiseWitness> {
    let eps = epsilon_witness(f, set, k_bound, horizon)?;
    let f2 = f.combine(&eps, |a, e| match a.checked_add(e) {
        Ok(s) => Ok(quantize_level(s.min(Dyadic::ONE))),
        Err(Error::Overflow(_)) => quantize_sum(a, e),
        Err(err) => Err(err),
    })?;
    Ok(simplify_f3(&f2, set)?.0)
}

/// `quantize_level(min(a + e, 1))` without forming `a + e` as a dyadic.
fn quantize_sum(a: Dyadic, e: Dyadic) -> Result<Dyadic> {
    let s = dyadic_to_rational(a) + dyadic_to_rational(e);
    let one = BigRational::from_integer(BigInt::from(1));
    if s >= one {
        return Ok(Dyadic::HALF);
    }
    // 2^k <= s < 2^(k+1), k < 0.
    let (num, den) = (s.numer(), s.denom());
    let mut k = num.bits() as i64 - den.bits() as i64;
    let at = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(BigInt::from(1) << k as u64)
        } else {
            BigRational::new(BigInt::from(1), BigInt::from(1) << (-k) as u64)
        }
    };
    if at(k) > s {
        k -= 1;
    }
    if at(k) == s {
        k -= 1;
    }
    Dyadic::pow2(k)
}

/// `ε(x) = 2^(-rate·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsSchedule {
    Pow2 { rate: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ModificationVerdict {
    /// `tail_bound` bounds the series beyond the computed horizon (`None`
    /// for finite sets, where the tail vanishes eventually).
    Summable { tail_bound: Option<Dyadic> },
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModificationReport {
    pub terms: Vec<Dyadic>,
    pub partials: Vec<Dyadic>,
    pub verdict: ModificationVerdict,
    pub trend: Trend,
}

/// Partial sums of `Σ_{l=0}^{L} ε(l - K) · #(Λ ∩ [l, l+1))` with a verdict
/// from the count growth bound.
pub fn modification_series_check(
    set: &LambdaSet,
    schedule: EpsSchedule,
    k_bound: i64,
    l_max: u32,
) -> Result<ModificationReport> {
    let EpsSchedule::Pow2 { rate } = schedule;
    let r = rate as i64;
    let mut terms = Vec::new();
    let mut partials = Vec::new();
    let mut acc = Dyadic::ZERO;
    for l in 0..=l_max as i64 {
        let count = set.count_in(Dyadic::from(l), Dyadic::ONE)?;
        let t = Dyadic::from_int(count as i128).checked_mul(Dyadic::pow2(-r * (l - k_bound))?)?;
        acc = acc.checked_add(t)?;
        terms.push(t);
        partials.push(acc);
    }
    let trend = decade_trend(&partials.iter().map(|p| p.to_f64()).collect::<Vec<_>>());
    let verdict = match set.count_growth() {
        CountGrowth::Finite => ModificationVerdict::Summable { tail_bound: None },
        CountGrowth::Exponential { rate: a, log2_const } if (a as i64) < r => {
            // Σ_{l>L} 2^(-r(l-K)) 2^(a l + C) <= 2^(rK + C + (a-r)(L+1) + 1)
            let e = r * k_bound + log2_const + (a as i64 - r) * (l_max as i64 + 1) + 1;
            ModificationVerdict::Summable {
                tail_bound: Some(Dyadic::pow2(e)?),
            }
        }
        _ => ModificationVerdict::Unknown,
    };
    Ok(ModificationReport {
        terms,
        partials,
        verdict,
        trend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::dyadic_to_rational;
    use num_rational::BigRational;
    use num_traits::{ToPrimitive, Zero};

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn ladder() -> LambdaSet {
        LambdaSet::dyadic_ladder(None)
    }

    #[test]
    fn half_open_eval() {
        let f = PiecewiseWitness::indicator(d("0"), d("1")).unwrap();
        assert_eq!(f.eval(d("0")).unwrap(), Dyadic::ONE);
        assert_eq!(f.eval(d("1")).unwrap(), Dyadic::ZERO);
        assert_eq!(f.eval(d("-5")).unwrap(), Dyadic::ZERO);
        let snap = f.snapshot(d("4")).unwrap();
        assert!(matches!(snap.eval(d("4")), Err(Error::GeneratorExhausted { .. })));
    }

    #[test]
    fn validation() {
        let b = |lo: &str, hi: &str, l: &str| WitnessBlock::new(d(lo), d(hi), d(l));
        assert!(PiecewiseWitness::new(vec![b("0", "1", "0")], None).is_err());
        assert!(PiecewiseWitness::new(vec![b("0", "2", "1"), b("1", "3", "1")], None).is_err());
        assert!(PiecewiseWitness::new(vec![b("1", "1", "1")], None).is_err());
        let json = r#"{"blocks":[{"lo":"0/2^0","hi":"1/2^0","level":"1/2^0"}]}"#;
        let w: PiecewiseWitness = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), json);
        assert!(serde_json::from_str::<PiecewiseWitness>(r#"{"blocks":[],"x":1}"#).is_err());
    }

    #[test]
    fn partial_sum_examples() {
        let f = PiecewiseWitness::indicator(d("0"), d("1")).unwrap();
        let p = partial_sum(&f, &ladder(), &WeightSeq::Ones, d("0"), d("1") - Dyadic::new(1, 10)).unwrap();
        assert_eq!(p.value, Dyadic::ZERO);
        let f = PiecewiseWitness::indicator(d("1"), d("2")).unwrap();
        let p = partial_sum(&f, &ladder(), &WeightSeq::Ones, d("0"), d("2")).unwrap();
        assert_eq!(p.value, d("2"));
        assert_eq!(p.terms, 3);
        let p = partial_sum(&f, &ladder(), &WeightSeq::Ones, d("0"), d("1/2")).unwrap();
        assert_eq!(p.value, Dyadic::ZERO);
    }

    #[test]
    fn weighted_sum_against_brute_force() {
        let f = PiecewiseWitness::new(
            vec![
                WitnessBlock::new(d("1"), d("5/2"), d("3/4")),
                WitnessBlock::new(d("3"), d("13/4"), d("2")),
            ],
            None,
        )
        .unwrap();
        let set = ladder();
        for c in [WeightSeq::Ones, WeightSeq::Geometric(d("1/2")), WeightSeq::SuperExp] {
            for x in ["0", "1/8", "-1", "-3/4"] {
                let x = d(x);
                let lmax = d("9/2");
                let mut brute = BigRational::zero();
                for p in set.indexed_points(Dyadic::ZERO, lmax, true).unwrap() {
                    let v = f.eval(x + p.value).unwrap();
                    if v.is_positive() {
                        brute += dyadic_to_rational(v) * c.term_rational(p.index).unwrap();
                    }
                }
                match partial_sum(&f, &set, &c, x, lmax) {
                    Ok(s) => assert_eq!(dyadic_to_rational(s.value), brute, "{c} {x}"),
                    // Too wide for a dyadic: the binary64 mirror must agree.
                    Err(Error::Overflow(_)) => {
                        let approx = partial_sum_f64(&f, &set, &c, x, lmax).unwrap();
                        let exact = brute.to_f64().unwrap();
                        assert!((approx - exact).abs() <= 1e-15 * exact, "{c} {x}");
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn trajectory_labels() {
        let empty = PiecewiseWitness::zero();
        let hs: Vec<Dyadic> = (1..=10).map(Dyadic::from).collect();
        let t = classify_trajectory(&empty, &ladder(), &WeightSeq::Ones, d("0"), &hs).unwrap();
        assert_eq!(t.label, Label::Convergent);
        // One point per unit window, forever: linear growth.
        let f = PiecewiseWitness::indicator(d("0"), d("1/2")).unwrap();
        let every = LambdaSet::explicit((0..200).map(|i| Dyadic::from(i as i64)).collect()).unwrap();
        let g = AnchoredPattern { anchors: every.clone(), pattern: vec![WitnessBlock::new(d("0"), d("1/2"), d("1"))] }
            .snapshot(d("400"))
            .unwrap();
        let hs: Vec<Dyadic> = (1..=100).map(Dyadic::from).collect();
        let t = classify_trajectory(&g, &every, &WeightSeq::Ones, d("0"), &hs).unwrap();
        assert_eq!(t.label, Label::Divergent);
        let t = classify_trajectory(&f, &every, &WeightSeq::Ones, d("0"), &hs).unwrap();
        assert_eq!(t.label, Label::Convergent);
    }

    #[test]
    fn f0_epsilon_example() {
        let f0 = regularize_f0(&PiecewiseWitness::zero(), &ladder(), 2, d("10")).unwrap();
        // I_5 = [4,5), window [2,7) holds 4+8+16+32+64 = 124 points.
        assert_eq!(f0.eval(d("9/2")).unwrap(), Dyadic::new(1, 12));
        assert!(f0.eval(d("-2")).unwrap().is_positive());
        assert_eq!(f0.eval(d("-3")).unwrap(), Dyadic::ZERO);
        for b in f0.blocks() {
            assert!(b.level.is_power_of_two());
        }
    }

    #[test]
    fn f0_mass_below_one() {
        let set = ladder();
        let f0 = regularize_f0(&PiecewiseWitness::zero(), &set, 2, d("12")).unwrap();
        for x in ["-2", "-1", "0", "3/2", "2"] {
            let s = partial_sum(&f0, &set, &WeightSeq::Ones, d(x), d("9")).unwrap();
            assert!(s.value < Dyadic::ONE, "{x}: {}", s.value);
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_level(d("3/8")), d("1/4"));
        assert_eq!(quantize_level(d("1")), d("1/2"));
        assert_eq!(quantize_level(Dyadic::new(1, 7)), Dyadic::new(1, 8));
        let f = PiecewiseWitness::new(vec![WitnessBlock::new(d("0"), d("1"), d("2"))], None).unwrap();
        assert_eq!(clip_f1(&f).eval(d("0")).unwrap(), Dyadic::ONE);
    }

    #[test]
    fn modification_examples() {
        let r = modification_series_check(&ladder(), EpsSchedule::Pow2 { rate: 2 }, 2, 30).unwrap();
        assert!(matches!(r.verdict, ModificationVerdict::Summable { tail_bound: Some(_) }));
        let r = modification_series_check(&ladder(), EpsSchedule::Pow2 { rate: 1 }, 2, 30).unwrap();
        assert_eq!(r.verdict, ModificationVerdict::Unknown);
        assert_eq!(r.trend, Trend::Diverging);
        assert!(r.terms[1..].iter().all(|t| *t == d("4")));
        let fin = LambdaSet::dyadic_ladder(Some(4));
        let r = modification_series_check(&fin, EpsSchedule::Pow2 { rate: 1 }, 2, 10).unwrap();
        assert_eq!(r.verdict, ModificationVerdict::Summable { tail_bound: None });
    }

    #[test]
    fn modification_tail_bound_is_an_upper_bound() {
        let set = ladder();
        let short = modification_series_check(&set, EpsSchedule::Pow2 { rate: 3 }, 1, 10).unwrap();
        let long = modification_series_check(&set, EpsSchedule::Pow2 { rate: 3 }, 1, 40).unwrap();
        let ModificationVerdict::Summable { tail_bound: Some(t) } = short.verdict else { panic!() };
        assert!(long.partials[40] - short.partials[10] <= t);
    }
}
