//! Weighted series `Σ c_n f(x + λ_n)`: the summable-weights bound, the
//! power-of-two rescaling that transfers unweighted witnesses to weighted
//! ones, the fast-decay condition `Σ_{j>n} c_j < 2^-n c_n`, and the
//! universal construction that works for every discrete `Λ` under it.
//!
//! The construction places blocks `[y_n, y_n + 1]` with level
//! `d_n = 1 / Σ_{j∈T_n} c_j`, where `T_n` indexes `Λ ∩ [y_n, y_n + 1/2]`.
//! `d_n` is generally not dyadic and `Σ_{T_n} c_j` can hold millions of
//! bits, so both are kept symbolically as [`BitSum`]s and every claim is
//! checked by exact comparison of such sums.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::bitsum::BitSum;
use crate::dyadic::{Dyadic, DyadicInterval};
use crate::error::{Error, Result};
use crate::lambda::LambdaSet;
use crate::weights::{dyadic_to_rational, TailBound, WeightSeq};
use crate::witness::{classify, Label, Partials, PiecewiseWitness, WitnessBlock};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SummableVerdict {
    /// `|s_c(x)| <= bound` for every `x`.
    EverywhereConvergent { bound: BigRational },
    Inconclusive,
}

/// For bounded `0 <= f <= f_bound` and summable weights the weighted series
/// converges everywhere.
pub fn summable_weights_check(c: &WeightSeq, f_bound: Dyadic) -> Result<SummableVerdict> {
    if f_bound.is_negative() {
        return Err(Error::InvalidArgument("f_bound must be >= 0".into()));
    }
    Ok(match c.tail_bound(0)? {
        TailBound::Finite(total) => SummableVerdict::EverywhereConvergent {
            bound: dyadic_to_rational(f_bound) * total,
        },
        TailBound::Infinite => SummableVerdict::Inconclusive,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlphaEntry {
    pub lo: Dyadic,
    pub hi: Dyadic,
    /// Indices `j` with `x + λ_j ∈ [lo, hi)` for some `x` in the window;
    /// `None` when there are none.
    pub indices: Option<(u64, u64)>,
    /// `α = 2^alpha_log2`.
    pub alpha_log2: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphaTransfer {
    pub entries: Vec<AlphaEntry>,
    pub g: PiecewiseWitness,
}

/// Rescales each interval `I_k` of a characteristic witness by the least
/// power of two `α_k` with `α_k c_j >= 1` for every index that can reach
/// `I_k` from the window.
pub fn alpha_transfer(
    f: &PiecewiseWitness,
    set: &LambdaSet,
    c: &WeightSeq,
    window: DyadicInterval,
) -> Result<AlphaTransfer> {
    let mut entries = Vec::new();
    let mut blocks = Vec::new();
    for b in f.blocks() {
        if b.level != Dyadic::ONE {
            return Err(Error::InvalidWitness(format!(
                "level {} on [{}, {}): witness must be characteristic",
                b.level, b.lo, b.hi
            )));
        }
        // x ∈ [a, b), x + λ ∈ [lo, hi)  ⇒  λ ∈ (lo - b, hi - a).
        let reach_lo = b.lo.checked_sub(window.hi())?;
        let reach_hi = b.hi.checked_sub(window.lo())?;
        let indices = set.index_span(reach_lo, reach_hi, false)?;
        let alpha_log2 = match indices {
            Some((a, z)) => c.min_leading_exponent(a, z)?,
            None => 0,
        };
        entries.push(AlphaEntry {
            lo: b.lo,
            hi: b.hi,
            indices,
            alpha_log2,
        });
        blocks.push(WitnessBlock::new(b.lo, b.hi, Dyadic::pow2(alpha_log2)?));
    }
    Ok(AlphaTransfer {
        entries,
        g: PiecewiseWitness::new(blocks, f.horizon())?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationRow {
    pub x: Dyadic,
    pub block: usize,
    pub unweighted: u64,
    pub weighted_log2: f64,
    pub ok: bool,
}

/// Per block: `Σ_j c_j g(x + λ_j) >= Σ_j f(x + λ_j)`, exactly.
pub fn transfer_domination(
    t: &AlphaTransfer,
    set: &LambdaSet,
    c: &WeightSeq,
    x: Dyadic,
) -> Result<Vec<DominationRow>> {
    let mut rows = Vec::new();
    for (k, e) in t.entries.iter().enumerate() {
        let span = set.index_span(e.lo.checked_sub(x)?, e.hi.checked_sub(x)?, false)?;
        let (unweighted, weighted) = match span {
            Some((a, z)) => (z - a + 1, c.range_sum(a, z)?.shifted(-e.alpha_log2)?),
            None => (0, BitSum::zero()),
        };
        let plain = BitSum::from_big(&unweighted.into(), 0)?;
        rows.push(DominationRow {
            x,
            block: k + 1,
            unweighted,
            weighted_log2: weighted.log2(),
            ok: weighted >= plain,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FastDecayRow {
    pub n: u64,
    /// Exact tail bound and right-hand side, as strings (`p/q` or `inf`).
    pub tail: String,
    pub rhs: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum FastDecayVerdict {
    Holds,
    Fails(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FastDecayReport {
    pub rows: Vec<FastDecayRow>,
    pub verdict: FastDecayVerdict,
}

/// `tail_bound(n) < 2^-n c_n` for `n = 1..=N`, in exact rationals.
pub fn check_fast_decr(c: &WeightSeq, n_max: u64) -> Result<FastDecayReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let mut rows = Vec::new();
    let mut first_fail = None;
    for n in 1..=n_max {
        let rhs = c.term_rational(n)? / BigRational::from_integer(num_bigint::BigInt::from(1) << n);
        let (tail, holds) = match c.tail_bound(n)? {
            TailBound::Finite(t) => {
                let h = t < rhs;
                (t.to_string(), h)
            }
            TailBound::Infinite => ("inf".to_string(), false),
        };
        if !holds && first_fail.is_none() {
            first_fail = Some(n);
        }
        rows.push(FastDecayRow {
            n,
            tail,
            rhs: rhs.to_string(),
            holds,
        });
    }
    Ok(FastDecayReport {
        rows,
        verdict: first_fail.map_or(FastDecayVerdict::Holds, FastDecayVerdict::Fails),
    })
}

pub const DEFAULT_GRID_EXP: u32 = 4;

#[derive(Clone, Debug)]
pub struct CTypeBlock {
    pub y: Dyadic,
    /// `T_n` as the index run `first..=last`.
    pub t: (u64, u64),
    /// `S_n = Σ_{j∈T_n} c_j`; the level is `d_n = 1 / S_n`.
    pub s: BitSum,
}

impl CTypeBlock {
    pub fn d_log2(&self) -> f64 {
        -self.s.log2()
    }

    /// `d_n` when it is a power of two: `Some(e)` with `d_n = 2^e`.
    pub fn d_exact_log2(&self) -> Option<i64> {
        (self.s.bit_count() == 1).then(|| self.s.leading_exponent().expect("one bit"))
    }
}

#[derive(Clone, Debug)]
pub struct CTypeConstruction {
    pub set: LambdaSet,
    pub weights: WeightSeq,
    pub grid_exp: u32,
    pub blocks: Vec<CTypeBlock>,
}

#[derive(Serialize)]
struct BlockDump {
    n: usize,
    y: Dyadic,
    t_first: u64,
    t_last: u64,
    d_log2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_exact: Option<String>,
}

#[derive(Serialize)]
struct ConstructionDump<'a> {
    set: &'a LambdaSet,
    weights: &'a WeightSeq,
    grid_exp: u32,
    blocks: Vec<BlockDump>,
}

/// Greedy choice on the `2^-G` grid: `y_1` is the least grid point with
/// `Λ ∩ [y, y + 1/2] ≠ ∅`, and `y_{n+1}` the least such point that is at
/// least `y_n + 1 + 2^-G`.
pub fn build_construction(
    set: &LambdaSet,
    c: &WeightSeq,
    n_blocks: usize,
    grid_exp: u32,
) -> Result<CTypeConstruction> {
    if grid_exp == 0 {
        return Err(Error::InvalidArgument("grid exponent must be >= 1".into()));
    }
    let fd = check_fast_decr(c, n_blocks as u64)?;
    if let FastDecayVerdict::Fails(n) = fd.verdict {
        return Err(Error::FastDecayViolated(n));
    }
    let step = Dyadic::pow2(-(grid_exp as i64))?;
    let mut blocks: Vec<CTypeBlock> = Vec::with_capacity(n_blocks);
    let mut y_min: Option<Dyadic> = None;
    while blocks.len() < n_blocks {
        let from = y_min.unwrap_or(Dyadic::ZERO);
        let insufficient = || Error::InsufficientLambda {
            built: blocks.len(),
            wanted: n_blocks,
        };
        let lambda = set.next_point_at_or_after(from)?.ok_or_else(insufficient)?;
        let candidate = lambda.checked_sub(Dyadic::HALF)?.ceil_to_grid(grid_exp);
        let y = match y_min {
            Some(m) => m.max(candidate),
            None => candidate,
        };
        let t = set
            .index_span(y, y.checked_add(Dyadic::HALF)?, true)?
            .expect("λ lies in [y, y + 1/2]");
        blocks.push(CTypeBlock {
            y,
            t,
            s: c.range_sum(t.0, t.1)?,
        });
        y_min = Some(y.checked_add(Dyadic::ONE)?.checked_add(step)?);
    }
    Ok(CTypeConstruction {
        set: set.clone(),
        weights: c.clone(),
        grid_exp,
        blocks,
    })
}

/// One block's contribution `d_n Σ_{j∈R_n(x)} c_j` with
/// `R_n(x) = {j : x + λ_j ∈ [y_n, y_n + 1]}`.
#[derive(Clone, Debug)]
struct Contribution {
    r: Option<(u64, u64)>,
    sum: BitSum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimRow {
    pub x: Dyadic,
    pub n: usize,
    pub block_contribution: f64,
    pub log2_contribution: f64,
    pub partial: f64,
    /// `n` (lower bound on the partial) or `2^-n` (upper bound on the block).
    pub bound: String,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimReport {
    pub rows: Vec<ClaimRow>,
}

impl ClaimReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }

    pub fn first_violation(&self) -> Option<&ClaimRow> {
        self.rows.iter().find(|r| !r.ok)
    }

    /// Fails with [`Error::ClaimViolated`] at the first bad row.
    pub fn into_result(self) -> Result<ClaimReport> {
        match self.first_violation() {
            Some(r) => Err(Error::ClaimViolated {
                x: r.x.to_string(),
                n: r.n,
                detail: format!("contribution {} against bound {}", r.block_contribution, r.bound),
            }),
            None => Ok(self),
        }
    }
}

impl CTypeConstruction {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block `n` (1-based) whose closed support `[y_n, y_n + 1]` holds `x`.
    pub fn block_at(&self, x: Dyadic) -> Option<usize> {
        let i = self.blocks.partition_point(|b| b.y <= x).checked_sub(1)?;
        (x <= self.blocks[i].y + Dyadic::ONE).then_some(i + 1)
    }

    /// `log2 f(x)`, `None` off the support.
    pub fn level_log2(&self, x: Dyadic) -> Option<f64> {
        self.block_at(x).map(|n| self.blocks[n - 1].d_log2())
    }

    pub fn to_json(&self) -> String {
        let dump = ConstructionDump {
            set: &self.set,
            weights: &self.weights,
            grid_exp: self.grid_exp,
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| BlockDump {
                    n: i + 1,
                    y: b.y,
                    t_first: b.t.0,
                    t_last: b.t.1,
                    d_log2: b.d_log2(),
                    d_exact: b.d_exact_log2().map(|e| format!("2^{e}")),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("construction serializes")
    }

    fn contribution(&self, x: Dyadic, n: usize) -> Result<Contribution> {
        let b = &self.blocks[n - 1];
        let lo = b.y.checked_sub(x)?;
        let r = self.set.index_span(lo, lo.checked_add(Dyadic::ONE)?, true)?;
        let sum = match r {
            Some((a, z)) => self.weights.range_sum(a, z)?,
            None => BitSum::zero(),
        };
        Ok(Contribution { r, sum })
    }

    fn ratio_log2(&self, c: &Contribution, n: usize) -> f64 {
        c.sum.log2() - self.blocks[n - 1].s.log2()
    }

    /// `Σ_{j∈R_n} c_j >= S_n`, i.e. block `n` contributes at least 1.
    fn at_least_one(&self, c: &Contribution, n: usize) -> bool {
        let t = self.blocks[n - 1].t;
        match c.r {
            // Positive weights: a superset of T_n carries at least S_n.
            Some((a, z)) if a <= t.0 && z >= t.1 => true,
            _ => c.sum >= self.blocks[n - 1].s,
        }
    }

    fn check_n(&self, n_max: usize) -> Result<usize> {
        if n_max > self.blocks.len() {
            return Err(Error::InsufficientLambda {
                built: self.blocks.len(),
                wanted: n_max,
            });
        }
        Ok(n_max)
    }

    /// For `x ∈ [0, 1/2]`: every block contributes at least 1, so the
    /// partial sum through block `n` is at least `n`.
    pub fn verify_claim_divergence(&self, grid: &[Dyadic], n_max: usize) -> Result<ClaimReport> {
        let n_max = self.check_n(n_max)?;
        for &x in grid {
            if x.is_negative() || x > Dyadic::HALF {
                return Err(Error::InvalidArgument(format!("{x} is outside [0, 1/2]")));
            }
        }
        let per_x: Vec<Vec<ClaimRow>> = grid
            .par_iter()
            .map(|&x| {
                let mut rows = Vec::with_capacity(n_max);
                let mut partial = 0.0f64;
                let mut all = true;
                for n in 1..=n_max {
                    let c = self.contribution(x, n)?;
                    let l2 = self.ratio_log2(&c, n);
                    partial += l2.exp2();
                    all &= self.at_least_one(&c, n);
                    rows.push(ClaimRow {
                        x,
                        n,
                        block_contribution: l2.exp2(),
                        log2_contribution: l2,
                        partial,
                        bound: n.to_string(),
                        ok: all,
                    });
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        Ok(ClaimReport {
            rows: per_x.into_iter().flatten().collect(),
        })
    }

    /// For `x < -1/2`: block `n` contributes less than `2^-n`, so every
    /// partial sum stays below 1.
    pub fn verify_claim_convergence(&self, grid: &[Dyadic], n_max: usize) -> Result<ClaimReport> {
        let n_max = self.check_n(n_max)?;
        for &x in grid {
            if x >= -Dyadic::HALF {
                return Err(Error::InvalidArgument(format!("{x} is not below -1/2")));
            }
        }
        let per_x: Vec<Vec<ClaimRow>> = grid
            .par_iter()
            .map(|&x| {
                let mut rows = Vec::with_capacity(n_max);
                let mut partial = 0.0f64;
                for n in 1..=n_max {
                    let c = self.contribution(x, n)?;
                    let l2 = self.ratio_log2(&c, n);
                    partial += l2.exp2();
                    // d_n Σ_R c_j < 2^-n  ⇔  Σ_R c_j < 2^-n S_n
                    let ok = c.sum < self.blocks[n - 1].s.shifted(n as i64)?;
                    rows.push(ClaimRow {
                        x,
                        n,
                        block_contribution: l2.exp2(),
                        log2_contribution: l2,
                        partial,
                        bound: format!("2^-{n}"),
                        ok,
                    });
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        Ok(ClaimReport {
            rows: per_x.into_iter().flatten().collect(),
        })
    }

    /// Trajectory of `Σ_{m<=n} min(contribution_m, 1)` over the blocks: a
    /// lower bound on the weighted partial sums that stays finite in
    /// binary64, with the usual heuristic label.
    pub fn trajectory(&self, x: Dyadic, n_max: usize) -> Result<(Vec<Dyadic>, Partials, Label)> {
        let n_max = self.check_n(n_max)?;
        let mut horizons = Vec::with_capacity(n_max);
        let mut partials = Vec::with_capacity(n_max);
        let mut acc = 0.0f64;
        for n in 1..=n_max {
            let c = self.contribution(x, n)?;
            let v = if self.at_least_one(&c, n) {
                1.0
            } else {
                self.ratio_log2(&c, n).exp2().min(1.0)
            };
            acc += v;
            horizons.push(self.blocks[n - 1].y.checked_add(Dyadic::ONE)?.checked_sub(x)?);
            partials.push(acc);
        }
        let p = Partials::Approx(partials);
        let label = classify(&p);
        Ok((horizons, p, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn ladder() -> LambdaSet {
        LambdaSet::dyadic_ladder(None)
    }

    #[test]
    fn summable_examples() {
        let v = summable_weights_check(&WeightSeq::Geometric(d("1/2")), Dyadic::ONE).unwrap();
        assert_eq!(v, SummableVerdict::EverywhereConvergent { bound: BigRational::from_integer(1.into()) });
        assert_eq!(summable_weights_check(&WeightSeq::Ones, Dyadic::ONE).unwrap(), SummableVerdict::Inconclusive);
        let v = summable_weights_check(&WeightSeq::Geometric(d("1/2")), Dyadic::ZERO).unwrap();
        assert_eq!(v, SummableVerdict::EverywhereConvergent { bound: BigRational::zero() });
    }

    #[test]
    fn fast_decay_examples() {
        assert_eq!(check_fast_decr(&WeightSeq::SuperExp, 30).unwrap().verdict, FastDecayVerdict::Holds);
        let r = check_fast_decr(&WeightSeq::Geometric(d("1/4")), 5).unwrap();
        assert_eq!(r.verdict, FastDecayVerdict::Fails(2));
        assert_eq!(r.rows[1].tail, "1/48");
        assert_eq!(r.rows[1].rhs, "1/64");
        assert_eq!(check_fast_decr(&WeightSeq::Ones, 3).unwrap().verdict, FastDecayVerdict::Fails(1));
    }

    #[test]
    fn construction_invariants() {
        let con = build_construction(&ladder(), &WeightSeq::SuperExp, 8, DEFAULT_GRID_EXP).unwrap();
        assert_eq!(con.blocks[0].y, d("1/2"));
        assert_eq!(con.blocks[1].y, d("25/16"));
        for w in con.blocks.windows(2) {
            assert!(w[1].y - w[0].y > Dyadic::ONE);
        }
        for b in &con.blocks {
            assert!(b.t.0 <= b.t.1);
            let pts = ladder().points(b.y, b.y + Dyadic::HALF, true).unwrap();
            assert_eq!(pts.len() as u64, b.t.1 - b.t.0 + 1);
        }
        let again = build_construction(&ladder(), &WeightSeq::SuperExp, 8, DEFAULT_GRID_EXP).unwrap();
        assert_eq!(con.to_json(), again.to_json());
    }

    #[test]
    fn construction_refuses_slow_weights() {
        let e = build_construction(&ladder(), &WeightSeq::Geometric(d("1/4")), 4, 4).unwrap_err();
        assert_eq!(e, Error::FastDecayViolated(2));
        let fin = LambdaSet::explicit(vec![d("1"), d("5")]).unwrap();
        assert!(matches!(
            build_construction(&fin, &WeightSeq::SuperExp, 3, 4),
            Err(Error::InsufficientLambda { built: 2, wanted: 3 })
        ));
    }

    #[test]
    fn claims_small() {
        let con = build_construction(&ladder(), &WeightSeq::SuperExp, 10, DEFAULT_GRID_EXP).unwrap();
        let div = con.verify_claim_divergence(&[d("0"), d("1/4"), d("1/2")], 10).unwrap();
        assert!(div.all_ok());
        let conv = con.verify_claim_convergence(&[d("-3/4"), d("-10")], 10).unwrap();
        assert!(conv.all_ok());
        assert!(conv.rows.iter().all(|r| r.partial < 1.0));
        let (_, _, label) = con.trajectory(d("1/4"), 10).unwrap();
        assert_eq!(label, Label::Undecided);
        let (_, p, label) = con.trajectory(d("-3/4"), 10).unwrap();
        assert_eq!(label, Label::Convergent);
        assert!(p.to_f64().last().unwrap() < &1.0);
    }

    #[test]
    fn alpha_examples() {
        let f = PiecewiseWitness::indicator(d("2"), d("3")).unwrap();
        let w = DyadicInterval::new(d("-1"), d("1")).unwrap();
        let t = alpha_transfer(&f, &ladder(), &WeightSeq::Ones, w).unwrap();
        assert_eq!(t.g, f);
        let t = alpha_transfer(&f, &ladder(), &WeightSeq::Geometric(d("1/2")), w).unwrap();
        // λ ∈ (1, 4): blocks 1..3 of the ladder hold 2 + 4 + 8 points.
        assert_eq!(t.entries[0].indices, Some((1, 14)));
        assert_eq!(t.entries[0].alpha_log2, 14);
        for xm in -8..8 {
            let x = Dyadic::new(xm, 3);
            for row in transfer_domination(&t, &ladder(), &WeightSeq::Geometric(d("1/2")), x).unwrap() {
                assert!(row.ok);
            }
        }
    }
}
