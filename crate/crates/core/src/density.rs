//! Translate counts `#((x + 2^n ℤ) ∩ C)` for finite dyadic unions
//! `C ⊂ [0, 1)`, and their convergence to `μ(C)` as `n → -∞`.

use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, DyadicInterval};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Dyadic, Dyadic)>", into = "Vec<(Dyadic, Dyadic)>")]
pub struct DyadicSet {
    intervals: Vec<DyadicInterval>,
}

impl TryFrom<Vec<(Dyadic, Dyadic)>> for DyadicSet {
    type Error = Error;
    fn try_from(v: Vec<(Dyadic, Dyadic)>) -> Result<DyadicSet> {
        DyadicSet::new(
            v.into_iter()
                .map(|(a, b)| DyadicInterval::new(a, b))
                .collect::<Result<_>>()?,
        )
    }
}

impl From<DyadicSet> for Vec<(Dyadic, Dyadic)> {
    fn from(s: DyadicSet) -> Self {
        s.intervals.iter().map(|i| (i.lo(), i.hi())).collect()
    }
}

impl DyadicSet {
    pub fn new(intervals: Vec<DyadicInterval>) -> Result<DyadicSet> {
        for i in &intervals {
            if i.lo().is_negative() || i.hi() > Dyadic::ONE {
                return Err(Error::InvalidArgument(format!("{i} is not inside [0,1)")));
            }
        }
        if intervals.windows(2).any(|w| w[0].hi() > w[1].lo()) {
            return Err(Error::InvalidArgument("intervals overlap or are unsorted".into()));
        }
        Ok(DyadicSet { intervals })
    }

    pub fn empty() -> DyadicSet {
        DyadicSet { intervals: Vec::new() }
    }

    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    /// Largest endpoint exponent.
    pub fn resolution(&self) -> u32 {
        self.intervals
            .iter()
            .flat_map(|i| [i.lo().exponent(), i.hi().exponent()])
            .max()
            .unwrap_or(0)
    }

    pub fn measure(&self) -> Dyadic {
        self.intervals
            .iter()
            .map(|i| i.length().expect("endpoints in [0,1]"))
            .fold(Dyadic::ZERO, |a, b| a + b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TranslateCount {
    pub count: u128,
    /// `count · 2^n`.
    pub scaled: Dyadic,
}

/// Points of `x + 2^n ℤ` in `C`, counted over one period `[0, 1)`.
pub fn translate_count(c: &DyadicSet, x: Dyadic, n: i64) -> Result<TranslateCount> {
    if x.is_negative() || x >= Dyadic::ONE {
        return Err(Error::InvalidArgument(format!("x = {x} not in [0,1)")));
    }
    if n > 0 {
        return Err(Error::InvalidArgument(format!("n = {n} must be <= 0")));
    }
    let e = u32::try_from(-n).map_err(|_| Error::Overflow(format!("2^{n}")))?;
    // Offset of the grid inside one cell; the grid is r + k 2^-e.
    let r = x.checked_sub(x.floor_to_grid(e))?;
    let mut count: u128 = 0;
    for i in &c.intervals {
        // #{k : a <= r + k h < b} = ceil((b - r)/h) - ceil((a - r)/h)
        let hi = i.hi().checked_sub(r)?.ceil_scaled(e)?;
        let lo = i.lo().checked_sub(r)?.ceil_scaled(e)?;
        count += (hi - lo) as u128;
    }
    let scaled = Dyadic::from_int(count as i128).mul_pow2(n)?;
    Ok(TranslateCount { count, scaled })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProfileRow {
    pub n: i64,
    pub count: u128,
    pub scaled: Dyadic,
    /// `scaled == μ(C)`.
    pub exact: bool,
    /// `-n >= resolution`, where exactness is guaranteed for every `x`.
    pub guaranteed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DensityProfile {
    pub measure: Dyadic,
    pub resolution: u32,
    pub rows: Vec<ProfileRow>,
    /// Level from which every later row is exact.
    pub first_exact: Option<i64>,
}

pub fn density_profile(c: &DyadicSet, x: Dyadic, levels: &[i64]) -> Result<DensityProfile> {
    if levels.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("levels must decrease".into()));
    }
    let measure = c.measure();
    let resolution = c.resolution();
    let rows = levels
        .iter()
        .map(|&n| {
            let t = translate_count(c, x, n)?;
            Ok(ProfileRow {
                n,
                count: t.count,
                scaled: t.scaled,
                exact: t.scaled == measure,
                guaranteed: -n >= resolution as i64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stable = rows.iter().rev().take_while(|r| r.exact).count();
    let first_exact = (stable > 0).then(|| rows[rows.len() - stable].n);
    Ok(DensityProfile {
        measure,
        resolution,
        rows,
        first_exact,
    })
}
