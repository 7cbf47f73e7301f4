//! Randomized characteristic witnesses.
//!
//! The level intervals of a quantized witness (levels `2^-κ`) are cut into
//! pieces short enough that any translate `x + Λ` meets each piece at most
//! once. Piece `J_n` then carries an independent Bernoulli variable `X_n`
//! with `P(X_n = 1) = 2^-κ_n`, and `g(x) = X_n` on `J_n`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dyadic::{Dyadic, DyadicInterval};
use crate::error::{Error, Result};
use crate::lambda::gaps::min_gap;
use crate::lambda::{enumeration_cap, LambdaSet};
use crate::sampler::bernoulli_pow2;
use crate::witness::PiecewiseWitness;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinedPartition {
    pub intervals: Vec<DyadicInterval>,
    pub kappas: Vec<u32>,
    pub k_bound: i64,
    pub cd_window: DyadicInterval,
    /// Smallest gap of `Λ` over the reachable range; `None` when at most one
    /// point is reachable.
    pub min_gap: Option<Dyadic>,
    /// SHA-256 of the source witness and set descriptors.
    pub provenance: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn kappa_of(level: Dyadic) -> Result<u32> {
    if !level.is_power_of_two() || level > Dyadic::ONE {
        return Err(Error::InvalidWitness(format!(
            "level {level} is not of the form 2^-k; quantize the witness first"
        )));
    }
    Ok(level.exponent())
}

/// Splits every block of `f3` into `2^t` equal pieces, `t` minimal with
/// piece length below the smallest gap of `Λ` reachable from `cd_window`.
pub fn refine_partition(
    f3: &PiecewiseWitness,
    set: &LambdaSet,
    k_bound: i64,
    cd_window: DyadicInterval,
) -> Result<RefinedPartition> {
    let kd = Dyadic::from(k_bound);
    if cd_window.lo() < -kd || cd_window.hi() > kd {
        return Err(Error::InvalidArgument(format!(
            "window {cd_window} is not inside [-{k_bound}, {k_bound}]"
        )));
    }
    let provenance = sha256_hex(
        format!(
            "{}\n{}",
            serde_json::to_string(f3).expect("witness serializes"),
            serde_json::to_string(set).expect("set serializes")
        )
        .as_bytes(),
    );
    let (Some(first), Some(last)) = (f3.blocks().first(), f3.blocks().last()) else {
        return Ok(RefinedPartition {
            intervals: Vec::new(),
            kappas: Vec::new(),
            k_bound,
            cd_window,
            min_gap: None,
            provenance,
        });
    };
    // x + λ in [first.lo, last.hi) with x in [a, b) needs λ in
    // (first.lo - b, last.hi - a); the closed range is a safe superset.
    let reach_lo = first.lo.checked_sub(cd_window.hi())?;
    let reach_hi = last.hi.checked_sub(cd_window.lo())?;
    let gap = min_gap(set, reach_lo.max(Dyadic::ZERO), reach_hi)?;
    let cap = enumeration_cap() as u128;
    let mut intervals = Vec::new();
    let mut kappas = Vec::new();
    let mut total: u128 = 0;
    for b in f3.blocks() {
        let kappa = kappa_of(b.level)?;
        let len = b.hi.checked_sub(b.lo)?;
        let mut t = 0u32;
        if let Some(g) = gap {
            while len.mul_pow2(-(t as i64))? >= g {
                t += 1;
            }
        }
        total += 1u128 << t.min(127);
        if total > cap {
            return Err(Error::RefinementTooLarge {
                pieces: total,
                cap: cap as u64,
            });
        }
        let piece = len.mul_pow2(-(t as i64))?;
        let mut lo = b.lo;
        for _ in 0..(1u64 << t) {
            let hi = lo.checked_add(piece)?;
            intervals.push(DyadicInterval::new(lo, hi)?);
            kappas.push(kappa);
            lo = hi;
        }
    }
    Ok(RefinedPartition {
        intervals,
        kappas,
        k_bound,
        cd_window,
        min_gap: gap,
        provenance,
    })
}

impl RefinedPartition {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// 1-based index of the piece containing `x`.
    pub fn piece_of(&self, x: Dyadic) -> Option<u64> {
        let i = self.intervals.partition_point(|j| j.lo() <= x);
        let i = i.checked_sub(1)?;
        self.intervals[i].contains(x).then_some(i as u64 + 1)
    }

    /// The quantized level `2^-κ_n` carried by piece `n`.
    pub fn level(&self, n: u64) -> Dyadic {
        Dyadic::new(1, self.kappas[n as usize - 1])
    }

    /// Most points of `Λ` landing in one piece from `x`; at most 1 when the
    /// refinement property holds.
    pub fn max_hits_per_piece(&self, set: &LambdaSet, x: Dyadic) -> Result<u64> {
        let mut worst = 0;
        for j in &self.intervals {
            let c = set.count_between(j.lo().checked_sub(x)?, j.hi().checked_sub(x)?, false)?;
            worst = worst.max(c);
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomWitness {
    pub partition: RefinedPartition,
    pub seed: u64,
}

impl RandomWitness {
    pub fn new(partition: RefinedPartition, seed: u64) -> RandomWitness {
        RandomWitness { partition, seed }
    }

    /// `X_n`, the Bernoulli variable of piece `n` (1-based).
    pub fn x_n(&self, n: u64) -> bool {
        bernoulli_pow2(self.seed, n, self.partition.kappas[n as usize - 1])
    }

    /// `g(x)`: `X_n` on `J_n`, zero off the partition.
    pub fn g_eval(&self, x: Dyadic) -> bool {
        self.partition.piece_of(x).is_some_and(|n| self.x_n(n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HitStats {
    pub horizon: Dyadic,
    /// `#{λ <= horizon : g(x + λ) = 1}`.
    pub hits: u64,
    /// `Σ_{λ <= horizon} f_3(x + λ)`, rounded once from the exact sum.
    pub expected: f64,
}

/// `Σ count·2^-κ`, smallest terms first.
fn level_total(counts: &BTreeMap<u32, u64>) -> f64 {
    counts.iter().rev().fold(0.0, |acc, (&k, &c)| acc + c as f64 * 2f64.powi(-(k as i32)))
}

/// Hits and expectations at each cutoff, from one pass over the pieces.
pub fn hit_trajectory(
    w: &RandomWitness,
    set: &LambdaSet,
    x: Dyadic,
    horizons: &[Dyadic],
) -> Result<Vec<HitStats>> {
    if horizons.windows(2).any(|h| h[0] >= h[1]) {
        return Err(Error::InvalidArgument("horizons must increase".into()));
    }
    let Some(&top) = horizons.last() else {
        return Ok(Vec::new());
    };
    // (λ, κ, hit) for every λ <= top with x + λ in some piece.
    let mut events: Vec<(Dyadic, u32, bool)> = Vec::new();
    for (i, j) in w.partition.intervals.iter().enumerate() {
        let lo = j.lo().checked_sub(x)?;
        if lo > top {
            break;
        }
        let hi = j.hi().checked_sub(x)?;
        let lambdas = if hi > top {
            set.points(lo, top, true)?
        } else {
            set.points(lo, hi, false)?
        };
        if lambdas.is_empty() {
            continue;
        }
        let n = i as u64 + 1;
        let hit = w.x_n(n);
        let kappa = w.partition.kappas[i];
        events.extend(lambdas.into_iter().map(|l| (l, kappa, hit)));
    }
    events.sort_by_key(|e| e.0);
    let mut out = Vec::with_capacity(horizons.len());
    let (mut hits, mut k) = (0u64, 0usize);
    let mut kappas: BTreeMap<u32, u64> = BTreeMap::new();
    for &h in horizons {
        while k < events.len() && events[k].0 <= h {
            hits += events[k].2 as u64;
            *kappas.entry(events[k].1).or_default() += 1;
            k += 1;
        }
        out.push(HitStats {
            horizon: h,
            hits,
            expected: level_total(&kappas),
        });
    }
    Ok(out)
}

pub fn hit_statistics(
    w: &RandomWitness,
    set: &LambdaSet,
    x: Dyadic,
    lambda_max: Dyadic,
) -> Result<HitStats> {
    Ok(hit_trajectory(w, set, x, &[lambda_max])?[0])
}

/// No new hits over the last half of the cutoffs.
pub fn stabilized(traj: &[HitStats]) -> bool {
    match traj.len() {
        0 => true,
        n => traj[n - 1].hits == traj[(n - 1) / 2].hits,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Convergence,
    Divergence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub seed: u64,
    pub side: Side,
    pub x: Dyadic,
    pub horizon: Dyadic,
    pub hits: u64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalFrequency {
    pub n: u64,
    pub kappa: u32,
    pub ones: u64,
    pub seeds: u64,
    pub frequency: f64,
    pub p: f64,
    pub std_error: f64,
}

impl IntervalFrequency {
    /// `|frequency - p| <= k·σ`.
    pub fn within(&self, k: f64) -> bool {
        (self.frequency - self.p).abs() <= k * self.std_error
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub rows: Vec<EnsembleRow>,
    pub frequencies: Vec<IntervalFrequency>,
}

/// Empirical frequency of `X_n = 1` over the seeds, per piece.
pub fn interval_frequencies(partition: &RefinedPartition, seeds: &[u64]) -> Vec<IntervalFrequency> {
    (0..partition.len() as u64)
        .into_par_iter()
        .map(|i| {
            let n = i + 1;
            let kappa = partition.kappas[i as usize];
            let ones = seeds.iter().filter(|&&s| bernoulli_pow2(s, n, kappa)).count() as u64;
            let p = 2f64.powi(-(kappa as i32));
            let m = seeds.len() as f64;
            IntervalFrequency {
                n,
                kappa,
                ones,
                seeds: seeds.len() as u64,
                frequency: if seeds.is_empty() { 0.0 } else { ones as f64 / m },
                p,
                std_error: if seeds.is_empty() { 0.0 } else { (p * (1.0 - p) / m).sqrt() },
            }
        })
        .collect()
}

/// Hit trajectories for every `(seed, x)` pair plus per-piece frequencies.
/// Work is spread over the rayon pool; output order is fixed (seed, then
/// convergence grid, then divergence grid, then horizon).
pub fn ensemble_report(
    partition: &RefinedPartition,
    set: &LambdaSet,
    seeds: &[u64],
    c_grid: &[Dyadic],
    d_grid: &[Dyadic],
    horizons: &[Dyadic],
) -> Result<EnsembleReport> {
    if seeds.is_empty() {
        return Ok(EnsembleReport {
            rows: Vec::new(),
            frequencies: Vec::new(),
        });
    }
    for &x in c_grid.iter().chain(d_grid) {
        if !partition.cd_window.contains(x) {
            return Err(Error::InvalidArgument(format!(
                "grid point {x} outside {}",
                partition.cd_window
            )));
        }
    }
    let points: Vec<(Side, Dyadic)> = c_grid
        .iter()
        .map(|&x| (Side::Convergence, x))
        .chain(d_grid.iter().map(|&x| (Side::Divergence, x)))
        .collect();
    let work: Vec<(u64, Side, Dyadic)> = seeds
        .iter()
        .flat_map(|&s| points.iter().map(move |&(side, x)| (s, side, x)))
        .collect();
    let per_item: Vec<Vec<EnsembleRow>> = work
        .par_iter()
        .map(|&(seed, side, x)| {
            let w = RandomWitness::new(partition.clone(), seed);
            Ok(hit_trajectory(&w, set, x, horizons)?
                .into_iter()
                .map(|h| EnsembleRow {
                    seed,
                    side,
                    x,
                    horizon: h.horizon,
                    hits: h.hits,
                    expected: h.expected,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleReport {
        rows: per_item.into_iter().flatten().collect(),
        frequencies: interval_frequencies(partition, seeds),
    })
}
