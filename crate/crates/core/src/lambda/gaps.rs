//! Gap and local-density diagnostics.

use serde::Serialize;

use super::{LambdaSet, PlacedBlock};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GapStats {
    pub horizon: Dyadic,
    pub scan_start: Dyadic,
    /// Largest difference of consecutive points in `[scan_start, horizon)`;
    /// `None` with fewer than two points.
    pub max_gap_after: Option<Dyadic>,
    /// Integers `a` with `[a, a+1) ⊂ [scan_start, horizon)` and no point in it.
    pub empty_unit_windows: Vec<i64>,
}

/// Empty unit windows and the largest gap between `start` and `horizon`.
pub fn lacunarity_scan(set: &LambdaSet, start: Dyadic, horizon: Dyadic) -> Result<GapStats> {
    if start.is_negative() {
        return Err(Error::InvalidArgument("scan start must be >= 0".into()));
    }
    let mut empty = Vec::new();
    let first = i64::try_from(start.ceil()).map_err(|_| Error::Overflow("scan start".into()))?;
    let last = i64::try_from(horizon.floor()).map_err(|_| Error::Overflow("horizon".into()))?;
    for a in first..last {
        if set.count_in(Dyadic::from(a), Dyadic::ONE)? == 0 {
            empty.push(a);
        }
    }
    Ok(GapStats {
        horizon,
        scan_start: start,
        max_gap_after: max_gap(set, start, horizon)?,
        empty_unit_windows: empty,
    })
}

fn max_gap(set: &LambdaSet, lo: Dyadic, hi: Dyadic) -> Result<Option<Dyadic>> {
    let mut best: Option<Dyadic> = None;
    let mut bump = |g: Dyadic| {
        if best.is_none_or(|b| g > b) {
            best = Some(g);
        }
    };
    if let Some(cursor) = set.block_cursor() {
        // Structural: spacing 2^-m inside a block, plus the jumps between
        // consecutive blocks. No enumeration needed.
        let mut prev_last: Option<Dyadic> = None;
        for placed in cursor {
            let PlacedBlock { block: b, .. } = placed?;
            if Dyadic::from(b.n_lo) >= hi {
                break;
            }
            let s = b.lattice_below(lo, false)?;
            let e = b.lattice_below(hi, false)?;
            if s >= e {
                continue;
            }
            if e - s >= 2 {
                bump(Dyadic::new(1, b.m));
            }
            let first = Dyadic::new(s, b.m);
            if let Some(p) = prev_last {
                bump(first.checked_sub(p)?);
            }
            prev_last = Some(Dyadic::new(e - 1, b.m));
        }
        return Ok(best);
    }
    let pts = set.points(lo, hi, false)?;
    for w in pts.windows(2) {
        bump(w[1].checked_sub(w[0])?);
    }
    Ok(best)
}

/// Smallest difference of consecutive points in `[lo, hi]`; `None` with
/// fewer than two points there.
pub fn min_gap(set: &LambdaSet, lo: Dyadic, hi: Dyadic) -> Result<Option<Dyadic>> {
    let mut best: Option<Dyadic> = None;
    let mut bump = |g: Dyadic| -> Result<()> {
        if !g.is_positive() {
            return Err(Error::ZeroGap(g.to_string()));
        }
        if best.is_none_or(|b| g < b) {
            best = Some(g);
        }
        Ok(())
    };
    if let Some(cursor) = set.block_cursor() {
        let mut prev_last: Option<Dyadic> = None;
        for placed in cursor {
            let PlacedBlock { block: b, .. } = placed?;
            if Dyadic::from(b.n_lo) > hi {
                break;
            }
            let s = b.lattice_below(lo, false)?;
            let e = b.lattice_below(hi, true)?;
            if s >= e {
                continue;
            }
            if e - s >= 2 {
                bump(Dyadic::new(1, b.m))?;
            }
            if let Some(p) = prev_last {
                bump(Dyadic::new(s, b.m).checked_sub(p)?)?;
            }
            prev_last = Some(Dyadic::new(e - 1, b.m));
        }
        return Ok(best);
    }
    let pts = set.points(lo, hi, true)?;
    for w in pts.windows(2) {
        bump(w[1].checked_sub(w[0])?)?;
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityBoundRow {
    pub x: Dyadic,
    pub holds: bool,
    pub lhs: u64,
    pub rhs: Dyadic,
}

/// Compares `#(Λ ∩ [x, x + 2^-L))` with `p · 2^(⌊x⌋ - L - 2)` at each grid
/// point, exactly.
pub fn density_bound_check(
    set: &LambdaSet,
    p: Dyadic,
    l: u32,
    grid: &[Dyadic],
) -> Result<Vec<DensityBoundRow>> {
    let width = Dyadic::pow2(-(l as i64))?;
    grid.iter()
        .map(|&x| {
            if x.is_negative() {
                return Err(Error::InvalidArgument(format!("grid point {x} is negative")));
            }
            let j = i64::try_from(x.floor()).map_err(|_| Error::Overflow(x.to_string()))?;
            let rhs = p.checked_mul(Dyadic::pow2(j - l as i64 - 2)?)?;
            let lhs = set.count_in(x, width)?;
            let lhs_d = Dyadic::from_int(lhs as i128);
            Ok(DensityBoundRow {
                x,
                holds: lhs_d > rhs,
                lhs,
                rhs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::{Block, MRule, LenRule, BlockRule};

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn ladder_has_no_empty_windows() {
        let s = lacunarity_scan(&LambdaSet::dyadic_ladder(None), Dyadic::ONE, d("40")).unwrap();
        assert!(s.empty_unit_windows.is_empty());
        assert_eq!(s.max_gap_after, Some(d("1/2")));
    }

    #[test]
    fn powers_of_two_brute_force() {
        let pts: Vec<Dyadic> = (0..=20).map(|j| Dyadic::from(1i64 << j)).collect();
        let set = LambdaSet::explicit(pts.clone()).unwrap();
        let horizon = Dyadic::from((1i64 << 20) + 1);
        let s = lacunarity_scan(&set, Dyadic::ZERO, horizon).unwrap();
        let expected: Vec<i64> = (0..(1i64 << 20) + 1)
            .filter(|a| !pts.contains(&Dyadic::from(*a)))
            .collect();
        assert_eq!(s.empty_unit_windows, expected);
        assert_eq!(s.max_gap_after, Some(Dyadic::from(1i64 << 19)));
    }

    #[test]
    fn block_gaps_across_blocks() {
        let set = LambdaSet::blocks(vec![
            Block { m: 2, n_lo: 1, n_hi: 2 },
            Block { m: 0, n_lo: 5, n_hi: 6 },
        ])
        .unwrap();
        let s = lacunarity_scan(&set, Dyadic::ZERO, d("10")).unwrap();
        // 7/4 -> 5
        assert_eq!(s.max_gap_after, Some(d("13/4")));
        assert_eq!(s.empty_unit_windows, vec![0, 2, 3, 4, 6, 7, 8, 9]);
    }

    #[test]
    fn thinned_half_resolution_has_holes() {
        let base = LambdaSet::rule(BlockRule {
            m: MRule::Constant(1),
            len: LenRule::Unit,
            n1: 1,
            k_max: None,
        })
        .unwrap();
        let with_holes = (1..=20u64)
            .filter(|&seed| {
                let t = base.thin(Dyadic::HALF, seed).unwrap();
                !lacunarity_scan(&t, Dyadic::ZERO, d("50")).unwrap().empty_unit_windows.is_empty()
            })
            .count();
        // Each of 49 windows empties with probability 1/4.
        assert!(with_holes >= 19);
    }

    #[test]
    fn min_gaps() {
        let set = LambdaSet::dyadic_ladder(None);
        assert_eq!(min_gap(&set, d("1"), d("2")).unwrap(), Some(d("1/2")));
        assert_eq!(min_gap(&set, d("1"), d("9/4")).unwrap(), Some(d("1/4")));
        assert_eq!(min_gap(&set, d("1"), d("3/2")).unwrap(), Some(d("1/2")));
        assert_eq!(min_gap(&set, d("0"), d("1")).unwrap(), None);
        let e = LambdaSet::explicit(vec![d("1"), d("2"), d("4")]).unwrap();
        assert_eq!(min_gap(&e, d("0"), d("10")).unwrap(), Some(d("1")));
        assert_eq!(min_gap(&e, d("2"), d("10")).unwrap(), Some(d("2")));
    }

    #[test]
    fn density_bound_on_ladder() {
        let rows = density_bound_check(&LambdaSet::dyadic_ladder(None), d("3/4"), 2, &[d("10")]).unwrap();
        assert_eq!(rows[0].lhs, 256);
        assert_eq!(rows[0].rhs, d("3/4") * Dyadic::from(64));
        assert!(rows[0].holds);
        // Small J: the bound drops below one point.
        let rows = density_bound_check(&LambdaSet::dyadic_ladder(None), d("7/8"), 3, &[d("2")]).unwrap();
        assert!(rows[0].rhs < Dyadic::ONE && rows[0].holds);
    }
}
