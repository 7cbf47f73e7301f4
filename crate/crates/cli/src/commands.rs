use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lambda_lab::ctype::{build_construction, check_fast_decr, ClaimRow, FastDecayVerdict};
use lambda_lab::density::{density_profile, DyadicSet};
use lambda_lab::lambda::deletion::{ak_monte_carlo, ak_probability, decade_trend};
use lambda_lab::lambda::{LenRule, MRule};
use lambda_lab::random_witness::{ensemble_report, refine_partition};
use lambda_lab::witness::{classify_trajectory, regularize, Partials};
use lambda_lab::{Dyadic, DyadicInterval, LambdaSet, WeightSeq};

use crate::config::{self, config_hash, parse_grid, parse_horizons, parse_seeds, Merge, SetSpec, WitnessSpec};
use crate::report::{self, Csv};
use crate::{impl_merge, CliError, EXIT_REFINEMENT};

fn parse_set(s: &str) -> Result<SetSpec, CliError> {
    SetSpec::parse_flag(s)
}

fn parse_witness(s: &str) -> Result<WitnessSpec, CliError> {
    WitnessSpec::parse_flag(s)
}

fn parse_dyadic_set(s: &str) -> Result<DyadicSet, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::config(format!("dyadic set: {e}")))
}

fn window_of(w: Option<Vec<Dyadic>>, what: &str) -> Result<Option<(Dyadic, Dyadic)>, CliError> {
    match w.as_deref() {
        None => Ok(None),
        Some([lo, hi]) if lo <= hi => Ok(Some((*lo, *hi))),
        Some([lo, hi]) => Err(CliError::config(format!("{what}: {lo} > {hi}"))),
        Some(_) => Err(CliError::config(format!("{what} needs two values"))),
    }
}

/// Shortest round-trip form; scientific outside `[1e-6, 1e15)`.
fn f64_cell(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-6..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

// ---------------------------------------------------------------- set

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct SetCmd {
    /// Set name (`dyadic-ladder[:K]`, `powers-of-two:J`, `log-integers:N`,
    /// `explicit:a,b,..`) or a JSON descriptor.
    #[arg(long, value_parser = parse_set)]
    set: Option<SetSpec>,
    /// Set name; combined with --k-max.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    k_max: Option<u64>,
    /// Half-open window `[LO, HI)`.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    window: Option<Vec<Dyadic>>,
    /// Per-unit-window counts instead of the point list.
    #[arg(long)]
    stats: bool,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(SetCmd { set, kind, k_max, window, out } bools { stats });

fn resolve_set(set: Option<SetSpec>, kind: Option<String>, k_max: Option<u64>) -> Result<LambdaSet, CliError> {
    match (set, kind) {
        (Some(_), Some(_)) => Err(CliError::config("give either --set or --kind, not both")),
        (Some(s), None) if k_max.is_none() => s.build(),
        (Some(_), None) => Err(CliError::config("--k-max goes with --kind")),
        (None, Some(k)) => {
            let name = match k_max {
                Some(n) => format!("{k}:{n}"),
                None => k,
            };
            SetSpec::Name(name).build()
        }
        (None, None) => Err(CliError::config("no set given")),
    }
}

pub fn set(flags: SetCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let lambda = resolve_set(c.set, c.kind, c.k_max)?;
    let (lo, hi) = window_of(c.window, "window")?.ok_or_else(|| CliError::config("--window is required"))?;
    if c.stats {
        let mut csv = Csv::new(&hash, &["window_lo", "window_hi", "count"])?;
        let mut a = lo.floor_to_grid(0);
        while a < hi {
            let b = a + Dyadic::ONE;
            let (s, t) = (a.max(lo), b.min(hi));
            let n = lambda.count_between(s, t, false)?;
            csv.row([s.to_string(), t.to_string(), n.to_string()])?;
            a = b;
        }
        return csv.finish(c.out.as_deref());
    }
    let mut csv = Csv::new(&hash, &["index", "value", "value_f64"])?;
    if lo < hi {
        for p in lambda.indexed_points(lo, hi, false)? {
            csv.row([p.index.to_string(), p.value.to_string(), f64_cell(p.value.to_f64())])?;
        }
    }
    csv.finish(c.out.as_deref())
}

// ---------------------------------------------------------------- thin

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct ThinCmd {
    #[arg(long, value_parser = parse_set)]
    set: Option<SetSpec>,
    /// Keep probability.
    #[arg(long)]
    p: Option<Dyadic>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    window: Option<Vec<Dyadic>>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(ThinCmd { set, p, seed, window, out } bools {});

pub fn thin(flags: ThinCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let base = c.set.ok_or_else(|| CliError::config("--set is required"))?.build()?;
    let p = c.p.ok_or_else(|| CliError::config("--p is required"))?;
    let seed = c.seed.ok_or_else(|| CliError::config("--seed is required"))?;
    let (lo, hi) = window_of(c.window, "window")?.ok_or_else(|| CliError::config("--window is required"))?;
    let thinned = base.thin(p, seed)?;
    let mut csv = Csv::new(&hash, &["index", "value", "value_f64"])?;
    if lo < hi {
        for pt in thinned.indexed_points(lo, hi, false)? {
            csv.row([pt.index.to_string(), pt.value.to_string(), f64_cell(pt.value.to_f64())])?;
        }
    }
    csv.finish(c.out.as_deref())
}

// ---------------------------------------------------------------- ak

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct AkCmd {
    /// Resolution rule: `k`, `const:M`, `linear:A:B`, `table:..`.
    #[arg(long)]
    m: Option<MRule>,
    /// Block length rule: `unit`, `const:L`, `balanced:Q`, `table:..`.
    #[arg(long)]
    n: Option<LenRule>,
    /// Deletion probability.
    #[arg(long)]
    q: Option<Dyadic>,
    #[arg(long)]
    k_max: Option<u64>,
    /// Monte Carlo trials per block (0 for formula only).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(AkCmd { m, n, q, k_max, trials, seed, out } bools {});

/// Largest block simulated, in points.
const MC_POINT_LIMIT: u64 = 1 << 24;
/// Exact values longer than this many bits are left out of the table.
const EXACT_PRINT_BITS: u64 = 512;

pub fn ak(flags: AkCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let ms = c.m.clone().ok_or_else(|| CliError::config("--m is required"))?;
    let ns = c.n.clone().ok_or_else(|| CliError::config("--n is required"))?;
    let q = c.q.ok_or_else(|| CliError::config("--q is required"))?;
    let k_max = c.k_max.ok_or_else(|| CliError::config("--k-max is required"))?;
    let trials = c.trials.unwrap_or(0);
    let seed = c.seed.unwrap_or(0);

    let mut blocks = Vec::new();
    for k in 1..=k_max {
        let Some(m) = ms.m(k)? else { break };
        let Some(len) = ns.length(k, m)? else { break };
        blocks.push((k, m, len));
    }
    let rows: Vec<Vec<String>> = blocks
        .par_iter()
        .map(|&(k, m, len)| -> Result<Vec<String>, CliError> {
            let p = ak_probability(m, q, len)?;
            let exact = match &p.exact {
                Some(r) if r.numer().bits().max(r.denom().bits()) <= EXACT_PRINT_BITS => r.to_string(),
                _ => String::new(),
            };
            let points = 1u64.checked_shl(m).filter(|_| m < 63).and_then(|w| w.checked_mul(len));
            let mut mc = vec![String::new(); 4];
            if trials > 0 && points.is_some_and(|n| n <= MC_POINT_LIMIT) {
                let est = ak_monte_carlo(m, q, len, trials, seed.wrapping_add(k.wrapping_mul(trials)))?;
                let ok = (est.frequency - p.approx).abs() <= 4.0 * est.std_error;
                mc = vec![
                    est.events.to_string(),
                    f64_cell(est.frequency),
                    f64_cell(est.std_error),
                    ok.to_string(),
                ];
            }
            let mut row = vec![k.to_string(), m.to_string(), len.to_string(), exact, f64_cell(p.approx)];
            row.extend(mc);
            Ok(row)
        })
        .collect::<Result<_, _>>()?;

    let mut partial = 0.0;
    let mut partials = Vec::with_capacity(rows.len());
    let mut csv = Csv::new(
        &hash,
        &["k", "m", "len", "p_exact", "p_approx", "partial", "mc_events", "mc_frequency", "mc_std_error", "mc_within_4sigma"],
    )?;
    for mut row in rows {
        partial += row[4].parse::<f64>().expect("own formatting");
        partials.push(partial);
        row.insert(5, f64_cell(partial));
        csv.row(row)?;
    }
    eprintln!("series trend: {}", decade_trend(&partials));
    csv.finish(c.out.as_deref())
}

// ---------------------------------------------------------------- ctype

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct CtypeCmd {
    /// Set (default `dyadic-ladder`).
    #[arg(long, value_parser = parse_set)]
    set: Option<SetSpec>,
    /// Weights: `ones`, `superexp`, `geometric:R`, `table:..` (default `superexp`).
    #[arg(long)]
    weights: Option<WeightSeq>,
    /// Number of blocks N (default 20).
    #[arg(long)]
    blocks: Option<usize>,
    /// Blocks start on the `2^-G` grid (default 4).
    #[arg(long)]
    grid_exp: Option<u32>,
    /// Divergence-side points in `[0, 1/2]` (default `k/16`, k = 0..8).
    #[arg(long, allow_hyphen_values = true)]
    div_grid: Option<String>,
    /// Convergence-side points below `-1/2` (default 9 points in `[-4, -1/2)`).
    #[arg(long, allow_hyphen_values = true)]
    conv_grid: Option<String>,
    /// Check both claims exactly; exit 5 on a violation.
    #[arg(long)]
    verify: bool,
    /// Only test the fast-decay condition.
    #[arg(long)]
    check_only: bool,
    /// Construction JSON.
    #[arg(long)]
    #[serde(skip_serializing)]
    construction_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(CtypeCmd { set, weights, blocks, grid_exp, div_grid, conv_grid, construction_out, out } bools { verify, check_only });

fn default_div_grid() -> Vec<Dyadic> {
    (0..=8).map(|k| Dyadic::new(k, 4)).collect()
}

fn default_conv_grid() -> Vec<Dyadic> {
    let mut g: Vec<Dyadic> = (0..=7).map(|k| Dyadic::from(-4) + Dyadic::new(7 * k, 4)).collect();
    g.push(Dyadic::new(-9, 4));
    g
}

fn claim_cells(side: &str, r: &ClaimRow) -> Vec<String> {
    vec![
        side.to_string(),
        r.x.to_string(),
        r.n.to_string(),
        f64_cell(r.block_contribution),
        f64_cell(r.log2_contribution),
        f64_cell(r.partial),
        r.bound.clone(),
        r.ok.to_string(),
    ]
}

pub fn ctype(flags: CtypeCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let weights = c.weights.clone().unwrap_or(WeightSeq::SuperExp).validated()?;
    let n_blocks = c.blocks.unwrap_or(20);
    if n_blocks == 0 {
        return Err(CliError::config("--blocks must be >= 1"));
    }
    if c.check_only {
        let r = check_fast_decr(&weights, n_blocks as u64)?;
        let mut csv = Csv::new(&hash, &["n", "tail_bound", "rhs", "holds"])?;
        for row in &r.rows {
            csv.row([row.n.to_string(), row.tail.clone(), row.rhs.clone(), row.holds.to_string()])?;
        }
        match r.verdict {
            FastDecayVerdict::Holds => eprintln!("fast decay: holds through n={n_blocks}"),
            FastDecayVerdict::Fails(n) => eprintln!("fast decay: fails at n={n}"),
        }
        return csv.finish(c.out.as_deref());
    }
    let set = c.set.clone().unwrap_or(SetSpec::Name("dyadic-ladder".into())).build()?;
    let con = build_construction(&set, &weights, n_blocks, c.grid_exp.unwrap_or(4))?;
    if let Some(p) = c.construction_out.as_deref() {
        report::emit(Some(p), format!("{}\n", con.to_json()).as_bytes())?;
    }
    if !c.verify {
        let mut csv = Csv::new(&hash, &["n", "y", "t_first", "t_last", "d_log2", "d_exact"])?;
        for (i, b) in con.blocks.iter().enumerate() {
            csv.row([
                (i + 1).to_string(),
                b.y.to_string(),
                b.t.0.to_string(),
                b.t.1.to_string(),
                f64_cell(b.d_log2()),
                b.d_exact_log2().map(|e| format!("2^{e}")).unwrap_or_default(),
            ])?;
        }
        return csv.finish(c.out.as_deref());
    }
    let div_grid = match &c.div_grid {
        Some(s) => parse_grid(s)?,
        None => default_div_grid(),
    };
    let conv_grid = match &c.conv_grid {
        Some(s) => parse_grid(s)?,
        None => default_conv_grid(),
    };
    let div = con.verify_claim_divergence(&div_grid, n_blocks)?;
    let conv = con.verify_claim_convergence(&conv_grid, n_blocks)?;
    let mut csv = Csv::new(
        &hash,
        &["side", "x", "n", "block_contribution", "log2_contribution", "partial", "bound", "ok"],
    )?;
    for r in &div.rows {
        csv.row(claim_cells("divergence", r))?;
    }
    for r in &conv.rows {
        csv.row(claim_cells("convergence", r))?;
    }
    csv.finish(c.out.as_deref())?;
    div.into_result()?;
    conv.into_result()?;
    eprintln!("claims: all {} rows hold", n_blocks * (div_grid.len() + conv_grid.len()));
    Ok(())
}

// ---------------------------------------------------------------- randomize

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizeCmd {
    /// Defaults for the lacunary demo: powers of two up to 2^16, the
    /// anchored two-level witness, K = 2, 10-point grids, horizons 2^0..2^16.
    #[arg(long)]
    demo: bool,
    #[arg(long, value_parser = parse_set)]
    set: Option<SetSpec>,
    /// Witness JSON, `@file.json`, `indicator:lo,hi` or `lacunary-demo`.
    #[arg(long, value_parser = parse_witness)]
    witness: Option<WitnessSpec>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k_bound: Option<i64>,
    /// Window `[C, D)` of the translates x (default `[-K, K)`).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    cd_window: Option<Vec<Dyadic>>,
    /// Right end of the witness support used by the pipeline.
    #[arg(long)]
    horizon: Option<Dyadic>,
    /// `auto` (only when levels are not already 2^-k), `always`, `never`.
    #[arg(long)]
    pipeline: Option<String>,
    /// `a..b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d_grid: Option<String>,
    /// `pow2:a..b` or a comma list.
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing)]
    partition_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing)]
    freq_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(RandomizeCmd {
    set, witness, k_bound, cd_window, horizon, pipeline, seeds, c_grid, d_grid, horizons,
    partition_out, freq_out, out
} bools { demo });

/// The demo grids: ten points `-2 + 3k/32` and ten points `3k/32`.
pub fn demo_grids() -> (Vec<Dyadic>, Vec<Dyadic>) {
    let c = (0..10).map(|k| Dyadic::from(-2) + Dyadic::new(3 * k, 5)).collect();
    let d = (0..10).map(|k| Dyadic::new(3 * k, 5)).collect();
    (c, d)
}

fn is_quantized(f: &lambda_lab::PiecewiseWitness) -> bool {
    f.blocks().iter().all(|b| b.level.is_power_of_two() && b.level <= Dyadic::ONE)
}

pub fn randomize(flags: RandomizeCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let mut c = flags.merge(config::load(cfg)?);
    if c.demo {
        c.set.get_or_insert(SetSpec::Name("powers-of-two:16".into()));
        c.witness.get_or_insert(WitnessSpec::Name("lacunary-demo".into()));
        c.k_bound.get_or_insert(2);
        c.horizon.get_or_insert(Dyadic::from((1i64 << 16) + 2));
        c.horizons.get_or_insert("pow2:0..16".into());
    }
    let hash = config_hash(&c);
    let set = c.set.clone().ok_or_else(|| CliError::config("--set is required"))?.build()?;
    let k_bound = c.k_bound.ok_or_else(|| CliError::config("--K is required"))?;
    let horizon = c.horizon.ok_or_else(|| CliError::config("--horizon is required"))?;
    let f = c
        .witness
        .clone()
        .ok_or_else(|| CliError::config("--witness is required"))?
        .build(&set, horizon)?;
    let kd = Dyadic::from(k_bound);
    let (lo, hi) = window_of(c.cd_window.clone(), "cd-window")?.unwrap_or((-kd, kd));
    let window = DyadicInterval::new(lo, hi)?;
    let apply = match c.pipeline.as_deref().unwrap_or("auto") {
        "auto" => !is_quantized(&f),
        "always" => true,
        "never" => false,
        other => return Err(CliError::config(format!("pipeline {other:?}: use auto, always or never"))),
    };
    let f3 = if apply {
        eprintln!("pipeline: applied with K={k_bound}, horizon={horizon}");
        regularize(&f, &set, k_bound, horizon)?
    } else {
        eprintln!("pipeline: skipped, witness levels are already of the form 2^-k");
        f
    };
    let partition = refine_partition(&f3, &set, k_bound, window).map_err(|e| CliError::from(e).with_code(EXIT_REFINEMENT))?;
    eprintln!("partition: {} pieces, provenance {}", partition.len(), partition.provenance);
    if let Some(p) = c.partition_out.as_deref() {
        report::json(&partition, Some(p))?;
    }
    let seeds = match &c.seeds {
        Some(s) => parse_seeds(s)?,
        None => Vec::new(),
    };
    let (demo_c, demo_d) = demo_grids();
    let grid = |s: &Option<String>, demo: Vec<Dyadic>| -> Result<Vec<Dyadic>, CliError> {
        match s {
            Some(s) => parse_grid(s),
            None if c.demo => Ok(demo),
            None => Ok(Vec::new()),
        }
    };
    let c_grid = grid(&c.c_grid, demo_c)?;
    let d_grid = grid(&c.d_grid, demo_d)?;
    let horizons = match &c.horizons {
        Some(s) => parse_horizons(s)?,
        None => vec![horizon],
    };
    let rep = ensemble_report(&partition, &set, &seeds, &c_grid, &d_grid, &horizons)?;
    let mut csv = Csv::new(&hash, &["seed", "side", "x", "horizon", "hits", "expected"])?;
    for r in &rep.rows {
        let side = match r.side {
            lambda_lab::random_witness::Side::Convergence => "convergence",
            lambda_lab::random_witness::Side::Divergence => "divergence",
        };
        csv.row([
            r.seed.to_string(),
            side.to_string(),
            r.x.to_string(),
            r.horizon.to_string(),
            r.hits.to_string(),
            f64_cell(r.expected),
        ])?;
    }
    csv.finish(c.out.as_deref())?;
    if let Some(p) = c.freq_out.as_deref() {
        let mut csv = Csv::new(&hash, &["n", "kappa", "ones", "seeds", "frequency", "p", "std_error", "within_4sigma"])?;
        for r in &rep.frequencies {
            csv.row([
                r.n.to_string(),
                r.kappa.to_string(),
                r.ones.to_string(),
                r.seeds.to_string(),
                f64_cell(r.frequency),
                f64_cell(r.p),
                f64_cell(r.std_error),
                r.within(4.0).to_string(),
            ])?;
        }
        csv.finish(Some(p))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- density

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct DensityCmd {
    /// JSON list of `[lo, hi]` pairs inside `[0, 1)`.
    #[arg(long, value_parser = parse_dyadic_set)]
    set: Option<DyadicSet>,
    #[arg(long)]
    x: Option<Dyadic>,
    /// Levels n <= 0: `a..b` (inclusive, either order) or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(DensityCmd { set, x, levels, out } bools {});

fn parse_levels(s: &str) -> Result<Vec<i64>, CliError> {
    let bad = || CliError::config(format!("bad levels {s:?}"));
    let mut v: Vec<i64> = if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        (a.min(b)..=a.max(b)).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    v.sort_unstable_by(|a, b| b.cmp(a));
    v.dedup();
    Ok(v)
}

pub fn density(flags: DensityCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let set = c.set.clone().ok_or_else(|| CliError::config("--set is required"))?;
    let x = c.x.ok_or_else(|| CliError::config("--x is required"))?;
    let levels = parse_levels(c.levels.as_deref().unwrap_or("0..-12"))?;
    let p = density_profile(&set, x, &levels)?;
    let mut csv = Csv::new(&hash, &["n", "count", "scaled", "measure", "exact", "guaranteed"])?;
    for r in &p.rows {
        csv.row([
            r.n.to_string(),
            r.count.to_string(),
            r.scaled.to_string(),
            p.measure.to_string(),
            r.exact.to_string(),
            r.guaranteed.to_string(),
        ])?;
    }
    csv.finish(c.out.as_deref())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields, default)]
pub struct EvalCmd {
    #[arg(long, value_parser = parse_set)]
    set: Option<SetSpec>,
    #[arg(long, value_parser = parse_witness)]
    witness: Option<WitnessSpec>,
    /// Default `ones`.
    #[arg(long)]
    weights: Option<WeightSeq>,
    /// `grid:lo,hi,e` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// `pow2:a..b` or a comma list; increasing.
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing)]
    out: Option<PathBuf>,
}
impl_merge!(EvalCmd { set, witness, weights, x_grid, horizons, out } bools {});

pub fn eval(flags: EvalCmd, cfg: Option<&Path>) -> Result<(), CliError> {
    let c = flags.merge(config::load(cfg)?);
    let hash = config_hash(&c);
    let set = c.set.clone().ok_or_else(|| CliError::config("--set is required"))?.build()?;
    let weights = c.weights.clone().unwrap_or(WeightSeq::Ones).validated()?;
    let xs = parse_grid(c.x_grid.as_deref().ok_or_else(|| CliError::config("--x-grid is required"))?)?;
    let horizons = parse_horizons(c.horizons.as_deref().ok_or_else(|| CliError::config("--horizons is required"))?)?;
    let top = *horizons.last().ok_or_else(|| CliError::config("no horizons"))?;
    let span = xs.iter().map(|x| x.abs()).max().unwrap_or(Dyadic::ZERO);
    let f = c
        .witness
        .clone()
        .ok_or_else(|| CliError::config("--witness is required"))?
        .build(&set, top.checked_add(span)?.checked_add(Dyadic::ONE)?)?;
    let trajectories = xs
        .par_iter()
        .map(|&x| classify_trajectory(&f, &set, &weights, x, &horizons))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&hash, &["x", "horizon", "partial", "partial_f64", "label"])?;
    for t in &trajectories {
        let approx = t.partials.to_f64();
        for (i, h) in t.horizons.iter().enumerate() {
            let exact = match &t.partials {
                Partials::Exact(v) => v[i].to_string(),
                Partials::Approx(_) => String::new(),
            };
            csv.row([t.x.to_string(), h.to_string(), exact, f64_cell(approx[i]), t.label.to_string()])?;
        }
    }
    csv.finish(c.out.as_deref())
}
