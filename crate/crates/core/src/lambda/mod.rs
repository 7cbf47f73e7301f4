//! Discrete sets `Λ ⊂ [0, ∞)`: construction, exact enumeration and counting,
//! and Bernoulli thinning.
//!
//! Points are indexed `λ_1 < λ_2 < ...` from 1. Dyadic block sets are counted
//! in closed form; enumeration is only used when points are actually needed,
//! and is capped (see [`enumeration_cap`]).

pub mod deletion;
pub mod gaps;
pub mod rules;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, DyadicInterval};
use crate::error::{Error, Result};
use crate::sampler::DyadicProb;

pub use rules::{LenRule, MRule};

pub const DEFAULT_CAP: u64 = 100_000_000;

/// Process-wide enumeration cap: `LAMBDA_LAB_CAP` if set, else
/// [`DEFAULT_CAP`].
pub fn enumeration_cap() -> u64 {
    static CAP: OnceLock<u64> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("LAMBDA_LAB_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CAP)
    })
}

/// `2^-m ℕ ∩ [n_lo, n_hi)`, holding `(n_hi - n_lo) * 2^m` points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub m: u32,
    pub n_lo: i64,
    pub n_hi: i64,
}

const MAX_BLOCK_EXP: u32 = 62;

impl Block {
    fn validate(&self) -> Result<()> {
        if self.n_lo < 1 || self.n_lo >= self.n_hi || self.m > MAX_BLOCK_EXP {
            return Err(Error::InvalidSet(format!(
                "block m={} [{}, {}) needs 1 <= n_lo < n_hi and m <= {MAX_BLOCK_EXP}",
                self.m, self.n_lo, self.n_hi
            )));
        }
        Ok(())
    }

    pub fn count(&self) -> Result<u64> {
        let len = (self.n_hi - self.n_lo) as u64;
        len.checked_shl(self.m)
            .filter(|c| c >> self.m == len)
            .ok_or_else(|| Error::Overflow(format!("point count of block {self:?}")))
    }

    fn lattice_lo(&self) -> i128 {
        (self.n_lo as i128) << self.m
    }

    fn lattice_hi(&self) -> i128 {
        (self.n_hi as i128) << self.m
    }

    /// Lattice indices `i` (points `i / 2^m`) below `v`, or up to `v` when
    /// `inclusive`: returns the exclusive upper lattice index, clamped to the
    /// block.
    fn lattice_below(&self, v: Dyadic, inclusive: bool) -> Result<i128> {
        let end = if inclusive {
            v.floor_scaled(self.m)? + 1
        } else {
            v.ceil_scaled(self.m)?
        };
        Ok(end.clamp(self.lattice_lo(), self.lattice_hi()))
    }
}

/// Infinite (or `k_max`-truncated) block set generated from sequence rules:
/// block `k` is `2^-m_k ℕ ∩ [n_k, n_k + len_k)` with `n_1` given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRule {
    pub m: MRule,
    pub len: LenRule,
    pub n1: i64,
    #[serde(default)]
    pub k_max: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
struct PlacedBlock {
    block: Block,
    /// Global index of the block's first point.
    first_index: u64,
}

enum BlockSource<'a> {
    List(&'a [Block]),
    Rule(&'a BlockRule),
}

struct BlockCursor<'a> {
    source: BlockSource<'a>,
    k: u64,
    next_lo: i64,
    next_index: u64,
    done: bool,
}

impl<'a> BlockCursor<'a> {
    fn new(source: BlockSource<'a>) -> Self {
        let next_lo = match &source {
            BlockSource::List(_) => 0,
            BlockSource::Rule(r) => r.n1,
        };
        BlockCursor {
            source,
            k: 0,
            next_lo,
            next_index: 1,
            done: false,
        }
    }

    fn advance(&mut self) -> Result<Option<PlacedBlock>> {
        if self.done {
            return Ok(None);
        }
        self.k += 1;
        let k = self.k;
        let block = match &self.source {
            BlockSource::List(list) => match list.get((k - 1) as usize) {
                Some(b) => *b,
                None => return Ok(None),
            },
            BlockSource::Rule(rule) => {
                if rule.k_max.is_some_and(|km| k > km) {
                    return Ok(None);
                }
                let Some(m) = rule.m.m(k)? else {
                    return Ok(None);
                };
                let Some(len) = rule.len.length(k, m)? else {
                    return Ok(None);
                };
                let n_hi = i64::try_from(len)
                    .ok()
                    .and_then(|l| self.next_lo.checked_add(l))
                    .ok_or_else(|| Error::Overflow(format!("end of block {k}")))?;
                let b = Block {
                    m,
                    n_lo: self.next_lo,
                    n_hi,
                };
                b.validate()?;
                self.next_lo = n_hi;
                b
            }
        };
        let placed = PlacedBlock {
            block,
            first_index: self.next_index,
        };
        self.next_index = self
            .next_index
            .checked_add(block.count()?)
            .ok_or_else(|| Error::Overflow("global point index".into()))?;
        Ok(Some(placed))
    }
}

impl Iterator for BlockCursor<'_> {
    type Item = Result<PlacedBlock>;
    fn next(&mut self) -> Option<Self::Item> {
        match self.advance() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Bernoulli thinning of a base set: the base point with global index `k` is
/// kept iff the sampler draw `(seed, k)` succeeds with probability `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Thinned {
    base: Box<LambdaSet>,
    p: DyadicProb,
    seed: u64,
}

impl Thinned {
    pub fn base(&self) -> &LambdaSet {
        &self.base
    }

    pub fn p(&self) -> Dyadic {
        self.p.value()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether the base point with global index `k` survives.
    pub fn keeps(&self, k: u64) -> bool {
        self.p.sample(self.seed, k)
    }
}

/// A point with its global index in the set (1-based, increasing order).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexedPoint {
    pub index: u64,
    pub value: Dyadic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Descriptor", into = "Descriptor")]
pub enum LambdaSet {
    DyadicBlocks(Vec<Block>),
    DyadicRule(BlockRule),
    /// `{ln n : 1 <= n <= max_n}`, each value the exact dyadic of its
    /// binary64 rounding.
    LogIntegers { max_n: u64 },
    Explicit(Vec<Dyadic>),
    Thinned(Thinned),
}

/// Serialized form of a [`LambdaSet`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Descriptor {
    DyadicBlocks {
        blocks: Vec<Block>,
    },
    DyadicRule {
        m: MRule,
        len: LenRule,
        n1: i64,
        #[serde(default)]
        k_max: Option<u64>,
    },
    LogIntegers {
        max_n: u64,
    },
    Explicit {
        points: Vec<Dyadic>,
    },
    Thinned {
        base: Box<Descriptor>,
        p: Dyadic,
        seed: u64,
    },
}

impl TryFrom<Descriptor> for LambdaSet {
    type Error = Error;
    fn try_from(d: Descriptor) -> Result<LambdaSet> {
        match d {
            Descriptor::DyadicBlocks { blocks } => LambdaSet::blocks(blocks),
            Descriptor::DyadicRule { m, len, n1, k_max } => {
                LambdaSet::rule(BlockRule { m, len, n1, k_max })
            }
            Descriptor::LogIntegers { max_n } => Ok(LambdaSet::LogIntegers { max_n }),
            Descriptor::Explicit { points } => LambdaSet::explicit(points),
            Descriptor::Thinned { base, p, seed } => LambdaSet::try_from(*base)?.thin(p, seed),
        }
    }
}

impl From<LambdaSet> for Descriptor {
    fn from(s: LambdaSet) -> Descriptor {
        match s {
            LambdaSet::DyadicBlocks(blocks) => Descriptor::DyadicBlocks { blocks },
            LambdaSet::DyadicRule(r) => Descriptor::DyadicRule {
                m: r.m,
                len: r.len,
                n1: r.n1,
                k_max: r.k_max,
            },
            LambdaSet::LogIntegers { max_n } => Descriptor::LogIntegers { max_n },
            LambdaSet::Explicit(points) => Descriptor::Explicit { points },
            LambdaSet::Thinned(t) => Descriptor::Thinned {
                p: t.p(),
                seed: t.seed,
                base: Box::new(Descriptor::from(*t.base)),
            },
        }
    }
}

/// Upper bound `#(Λ ∩ [l, l+1)) <= 2^(rate * l + log2_const)` for integer `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountGrowth {
    Finite,
    Exponential { rate: u32, log2_const: i64 },
    Unknown,
}

fn log_value(n: u64) -> Dyadic {
    Dyadic::from_f64_exact((n as f64).ln()).expect("ln of a positive integer is finite")
}

impl LambdaSet {
    /// `⋃_{k=1}^{k_max} 2^-k ℕ ∩ [k, k+1)`; unbounded when `k_max` is `None`.
    pub fn dyadic_ladder(k_max: Option<u64>) -> LambdaSet {
        LambdaSet::DyadicRule(BlockRule {
            m: MRule::Linear { slope: 1, offset: 0 },
            len: LenRule::Unit,
            n1: 1,
            k_max,
        })
    }

    pub fn blocks(blocks: Vec<Block>) -> Result<LambdaSet> {
        for b in &blocks {
            b.validate()?;
        }
        for w in blocks.windows(2) {
            if w[0].n_hi > w[1].n_lo {
                return Err(Error::InvalidSet(format!(
                    "blocks {:?} and {:?} overlap or are out of order",
                    w[0], w[1]
                )));
            }
        }
        Ok(LambdaSet::DyadicBlocks(blocks))
    }

    pub fn rule(rule: BlockRule) -> Result<LambdaSet> {
        if rule.n1 < 1 {
            return Err(Error::InvalidSet("n1 must be positive".into()));
        }
        Ok(LambdaSet::DyadicRule(rule))
    }

    pub fn explicit(points: Vec<Dyadic>) -> Result<LambdaSet> {
        if points.iter().any(Dyadic::is_negative) {
            return Err(Error::InvalidSet("points must be nonnegative".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSet("points must be strictly increasing".into()));
        }
        Ok(LambdaSet::Explicit(points))
    }

    pub fn log_integers(max_n: u64) -> LambdaSet {
        LambdaSet::LogIntegers { max_n }
    }

    /// Keep each point independently with probability `p`.
    pub fn thin(&self, p: Dyadic, seed: u64) -> Result<LambdaSet> {
        if matches!(self, LambdaSet::Thinned(_)) {
            return Err(Error::NestedThinning);
        }
        if !(p.is_positive() && p < Dyadic::ONE) {
            return Err(Error::InvalidArgument(format!("thinning probability {p} not in (0,1)")));
        }
        Ok(LambdaSet::Thinned(Thinned {
            base: Box::new(self.clone()),
            p: DyadicProb::new(p)?,
            seed,
        }))
    }

    fn block_cursor(&self) -> Option<BlockCursor<'_>> {
        match self {
            LambdaSet::DyadicBlocks(list) => Some(BlockCursor::new(BlockSource::List(list))),
            LambdaSet::DyadicRule(rule) => Some(BlockCursor::new(BlockSource::Rule(rule))),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            LambdaSet::DyadicRule(r) => {
                r.k_max.is_some() || r.m.is_finite() || r.len.is_finite()
            }
            LambdaSet::Thinned(t) => t.base.is_finite(),
            _ => true,
        }
    }

    /// Number of points `< v`, or `<= v` when `inclusive`.
    pub fn count_below(&self, v: Dyadic, inclusive: bool) -> Result<u64> {
        match self {
            LambdaSet::DyadicBlocks(_) | LambdaSet::DyadicRule(_) => {
                let mut total = 0u64;
                for placed in self.block_cursor().expect("block set") {
                    let b = placed?.block;
                    let start = Dyadic::from(b.n_lo);
                    if start > v || (start == v && !inclusive) {
                        break;
                    }
                    let end = b.lattice_below(v, inclusive)?;
                    total += (end - b.lattice_lo()) as u64;
                }
                Ok(total)
            }
            LambdaSet::Explicit(points) => Ok(if inclusive {
                points.partition_point(|p| *p <= v)
            } else {
                points.partition_point(|p| *p < v)
            } as u64),
            LambdaSet::LogIntegers { max_n } => {
                // Smallest n in [1, max_n + 1] failing the predicate; ln is
                // monotone so this is a plain binary search over integers.
                let below = |n: u64| {
                    let x = log_value(n);
                    if inclusive {
                        x <= v
                    } else {
                        x < v
                    }
                };
                let (mut lo, mut hi) = (1u64, *max_n + 1);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if below(mid) {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo - 1)
            }
            LambdaSet::Thinned(t) => {
                let Some(first) = t.base.first_point()? else {
                    return Ok(0);
                };
                if first > v || (first == v && !inclusive) {
                    return Ok(0);
                }
                let pts = t.base.raw_points(first, v, inclusive, enumeration_cap())?;
                Ok(pts.iter().filter(|p| t.keeps(p.index)).count() as u64)
            }
        }
    }

    /// Number of points in `[lo, hi)`, or `[lo, hi]` when `hi_closed`.
    pub fn count_between(&self, lo: Dyadic, hi: Dyadic, hi_closed: bool) -> Result<u64> {
        if hi < lo || (hi == lo && !hi_closed) {
            return Ok(0);
        }
        if let LambdaSet::Thinned(t) = self {
            let pts = t.base.raw_points(lo, hi, hi_closed, enumeration_cap())?;
            return Ok(pts.iter().filter(|p| t.keeps(p.index)).count() as u64);
        }
        Ok(self.count_below(hi, hi_closed)? - self.count_below(lo, false)?)
    }

    /// `#(Λ ∩ [x, x + a))`, closed form for block sets.
    pub fn count_in(&self, x: Dyadic, a: Dyadic) -> Result<u64> {
        if !a.is_positive() {
            return Err(Error::InvalidArgument(format!("window length {a} must be positive")));
        }
        self.count_between(x, x.checked_add(a)?, false)
    }

    /// Points with their key index: the global index for unthinned sets, the
    /// base index for thinned ones.
    fn raw_points(
        &self,
        lo: Dyadic,
        hi: Dyadic,
        hi_closed: bool,
        cap: u64,
    ) -> Result<Vec<IndexedPoint>> {
        if hi < lo || (hi == lo && !hi_closed) {
            return Ok(Vec::new());
        }
        match self {
            LambdaSet::DyadicBlocks(_) | LambdaSet::DyadicRule(_) => {
                let total = self.count_between(lo, hi, hi_closed)?;
                if total > cap {
                    return Err(Error::WindowTooLarge { cap });
                }
                let mut out = Vec::with_capacity(total as usize);
                for placed in self.block_cursor().expect("block set") {
                    let PlacedBlock { block: b, first_index } = placed?;
                    let start = Dyadic::from(b.n_lo);
                    if start > hi || (start == hi && !hi_closed) {
                        break;
                    }
                    let s = b.lattice_below(lo, false)?;
                    let e = b.lattice_below(hi, hi_closed)?;
                    for i in s..e {
                        out.push(IndexedPoint {
                            index: first_index + (i - b.lattice_lo()) as u64,
                            value: Dyadic::new(i, b.m),
                        });
                    }
                }
                Ok(out)
            }
            LambdaSet::Explicit(points) => {
                let s = points.partition_point(|p| *p < lo);
                let e = if hi_closed {
                    points.partition_point(|p| *p <= hi)
                } else {
                    points.partition_point(|p| *p < hi)
                };
                if (e.saturating_sub(s)) as u64 > cap {
                    return Err(Error::WindowTooLarge { cap });
                }
                Ok((s..e)
                    .map(|i| IndexedPoint {
                        index: i as u64 + 1,
                        value: points[i],
                    })
                    .collect())
            }
            LambdaSet::LogIntegers { .. } => {
                let s = self.count_below(lo, false)?;
                let e = self.count_below(hi, hi_closed)?;
                if e.saturating_sub(s) > cap {
                    return Err(Error::WindowTooLarge { cap });
                }
                Ok((s + 1..=e)
                    .map(|n| IndexedPoint {
                        index: n,
                        value: log_value(n),
                    })
                    .collect())
            }
            LambdaSet::Thinned(t) => {
                let mut pts = t.base.raw_points(lo, hi, hi_closed, cap)?;
                pts.retain(|p| t.keeps(p.index));
                Ok(pts)
            }
        }
    }

    /// Points in `[lo, hi)` (or `[lo, hi]`), increasing.
    pub fn points(&self, lo: Dyadic, hi: Dyadic, hi_closed: bool) -> Result<Vec<Dyadic>> {
        Ok(self
            .raw_points(lo, hi, hi_closed, enumeration_cap())?
            .into_iter()
            .map(|p| p.value)
            .collect())
    }

    /// Points with their own global index (thinned sets are re-indexed over
    /// the surviving points).
    pub fn indexed_points(
        &self,
        lo: Dyadic,
        hi: Dyadic,
        hi_closed: bool,
    ) -> Result<Vec<IndexedPoint>> {
        let mut pts = self.raw_points(lo, hi, hi_closed, enumeration_cap())?;
        if matches!(self, LambdaSet::Thinned(_)) {
            let before = self.count_below(lo, false)?;
            for (i, p) in pts.iter_mut().enumerate() {
                p.index = before + 1 + i as u64;
            }
        }
        Ok(pts)
    }

    /// Exactly the points in the half-open window, increasing.
    pub fn enumerate_range(&self, window: &DyadicInterval) -> Result<Vec<Dyadic>> {
        self.enumerate_range_capped(window, enumeration_cap())
    }

    pub fn enumerate_range_capped(&self, window: &DyadicInterval, cap: u64) -> Result<Vec<Dyadic>> {
        Ok(self
            .raw_points(window.lo(), window.hi(), false, cap)?
            .into_iter()
            .map(|p| p.value)
            .collect())
    }

    /// Range `first..=last` of own indices of the points in `[lo, hi)` or
    /// `[lo, hi]`; `None` when there are none.
    pub fn index_span(&self, lo: Dyadic, hi: Dyadic, hi_closed: bool) -> Result<Option<(u64, u64)>> {
        let n = self.count_between(lo, hi, hi_closed)?;
        if n == 0 {
            return Ok(None);
        }
        let before = self.count_below(lo, false)?;
        Ok(Some((before + 1, before + n)))
    }

    pub fn first_point(&self) -> Result<Option<Dyadic>> {
        match self {
            LambdaSet::DyadicBlocks(_) | LambdaSet::DyadicRule(_) => {
                match self.block_cursor().expect("block set").next() {
                    Some(b) => Ok(Some(Dyadic::from(b?.block.n_lo))),
                    None => Ok(None),
                }
            }
            LambdaSet::Explicit(points) => Ok(points.first().copied()),
            LambdaSet::LogIntegers { max_n } => Ok((*max_n >= 1).then_some(Dyadic::ZERO)),
            LambdaSet::Thinned(_) => self.next_point_at_or_after(Dyadic::ZERO),
        }
    }

    /// Largest point for finite sets.
    pub fn last_point(&self) -> Result<Option<Dyadic>> {
        match self {
            LambdaSet::DyadicBlocks(list) => Ok(list
                .last()
                .map(|b| Dyadic::new(((b.n_hi as i128) << b.m) - 1, b.m))),
            LambdaSet::DyadicRule(_) => {
                if !self.is_finite() {
                    return Ok(None);
                }
                let mut last = None;
                for placed in self.block_cursor().expect("block set") {
                    let b = placed?.block;
                    last = Some(Dyadic::new(b.lattice_hi() - 1, b.m));
                }
                Ok(last)
            }
            LambdaSet::Explicit(points) => Ok(points.last().copied()),
            LambdaSet::LogIntegers { max_n } => Ok((*max_n >= 1).then(|| log_value(*max_n))),
            LambdaSet::Thinned(t) => {
                let (Some(first), Some(last)) = (t.base.first_point()?, t.base.last_point()?)
                else {
                    return Ok(None);
                };
                let pts = t.base.raw_points(first, last, true, enumeration_cap())?;
                Ok(pts.iter().rev().find(|p| t.keeps(p.index)).map(|p| p.value))
            }
        }
    }

    /// Smallest point `>= v`, searching windows of doubling length.
    pub fn next_point_at_or_after(&self, v: Dyadic) -> Result<Option<Dyadic>> {
        let last = if self.is_finite() { self.last_point()? } else { None };
        if self.is_finite() && last.is_none_or(|l| l < v) {
            return Ok(None);
        }
        let mut lo = v;
        let mut width = Dyadic::ONE;
        loop {
            let hi = lo.checked_add(width)?;
            if let Some(p) = self.points(lo, hi, false)?.first() {
                return Ok(Some(*p));
            }
            lo = hi;
            width = width.checked_add(width)?;
        }
    }

    /// Growth bound on unit-window counts.
    pub fn count_growth(&self) -> CountGrowth {
        if self.is_finite() {
            return CountGrowth::Finite;
        }
        match self {
            LambdaSet::DyadicRule(r) => match r.m {
                MRule::Constant(m) => CountGrowth::Exponential {
                    rate: 0,
                    log2_const: m as i64,
                },
                // Unit windows sit inside one block; block k starts at or
                // after n1 + k - 1, so m_k <= slope * (l - n1 + 1) + offset.
                MRule::Linear { slope, offset } => CountGrowth::Exponential {
                    rate: slope,
                    log2_const: slope as i64 * (1 - r.n1) + offset,
                },
                MRule::Table(_) => CountGrowth::Finite,
            },
            LambdaSet::Thinned(t) => t.base.count_growth(),
            _ => CountGrowth::Unknown,
        }
    }
}
