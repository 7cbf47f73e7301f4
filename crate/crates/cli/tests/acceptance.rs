//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the test log.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;

use lambda_lab::ctype::{alpha_transfer, check_fast_decr, transfer_domination, FastDecayVerdict};
use lambda_lab::density::{translate_count, DyadicSet};
use lambda_lab::lambda::deletion::{ak_monte_carlo, ak_probability};
use lambda_lab::random_witness::{ensemble_report, interval_frequencies, refine_partition, stabilized, HitStats, RefinedPartition};
use lambda_lab::witness::{clip_f1, quantize_f2, regularize, regularize_f0, AnchoredPattern, WitnessGenerator};
use lambda_lab::{Block, Dyadic, DyadicInterval, LambdaSet, PiecewiseWitness, WeightSeq, WitnessBlock};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn d(s: &str) -> Dyadic {
    s.parse().unwrap()
}

/// xorshift64*, independent of the library's sampler.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn rat(d: Dyadic) -> BigRational {
    BigRational::new(BigInt::from(d.mantissa()), BigInt::from(1) << d.exponent())
}

fn pow2_rat(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::from(1) << k as u64)
    } else {
        BigRational::new(BigInt::from(1), BigInt::from(1) << (-k) as u64)
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(t: Duration, limit: f64) -> Result<(), String> {
    check(t.as_secs_f64() < limit, format!("took {:.2}s, limit {limit}s", t.as_secs_f64()))
}

// 1 ------------------------------------------------------------------

fn lattice_counts() -> Outcome {
    let start = Instant::now();
    let ladder = LambdaSet::dyadic_ladder(None);
    for k in 1..=20i64 {
        let (lo, hi) = (Dyadic::from(k), Dyadic::from(k + 1));
        let closed = ladder.count_in(lo, Dyadic::ONE).map_err(|e| e.to_string())?;
        let listed = ladder.points(lo, hi, false).map_err(|e| e.to_string())?;
        check(closed == 1 << k, format!("closed form k={k}: {closed}"))?;
        check(listed.len() as u64 == 1 << k, format!("enumeration k={k}: {}", listed.len()))?;
        // Oracle: the points are exactly k + i 2^-k.
        check(
            listed.iter().enumerate().all(|(i, p)| *p == lo + Dyadic::new(i as i128, k as u32)),
            format!("point values k={k}"),
        )?;
    }
    // k = 0: the ladder starts at 1 and dyadic blocks start at n >= 1, so
    // the lattice ℕ ∩ [0, 1) = {0} is checked on its own: the block count
    // formula ⌈hi·2^m⌉ - ⌈lo·2^m⌉ against the one-point set.
    let formula = Dyadic::ONE.ceil_scaled(0).unwrap() - Dyadic::ZERO.ceil_scaled(0).unwrap();
    let unit = LambdaSet::explicit(vec![Dyadic::ZERO]).map_err(|e| e.to_string())?;
    check(formula == 1, "k=0 lattice formula")?;
    check(unit.count_in(Dyadic::ZERO, Dyadic::ONE) == Ok(1), "k=0 lattice count")?;
    check(unit.points(Dyadic::ZERO, Dyadic::ONE, false).map(|v| v.len()) == Ok(1), "k=0 lattice enumeration")?;
    check(ladder.count_in(Dyadic::ZERO, Dyadic::ONE) == Ok(0), "ladder meets [0,1)")?;
    // Block count formula against the library for the ladder blocks.
    for k in 1..=20u32 {
        let b = Block { m: k, n_lo: k as i64, n_hi: k as i64 + 1 };
        check(b.count() == Ok(1 << k), format!("block count k={k}"))?;
    }
    within_time(start.elapsed(), 1.0)?;
    Ok(format!("k=1..20 ladder + k=0 lattice block, {:.3}s", start.elapsed().as_secs_f64()))
}

// 2 ------------------------------------------------------------------

fn random_witness(rng: &mut Rng) -> PiecewiseWitness {
    // Blocks on the 2^-4 grid of [-4, 8), levels m/2^e up to 4.
    let mut cells: Vec<u64> = (0..12).map(|_| rng.below(12 * 16)).collect();
    cells.sort_unstable();
    cells.dedup();
    let at = |c: u64| Dyadic::from(-4) + Dyadic::new(c as i128, 4);
    let mut blocks = Vec::new();
    for w in cells.chunks(2) {
        if let [a, b] = w {
            let level = Dyadic::new(1 + rng.below(255) as i128, rng.below(7) as u32);
            blocks.push(WitnessBlock::new(at(*a), at(*b), level));
        }
    }
    PiecewiseWitness::new(blocks, None).unwrap()
}

fn pipeline_sandwich() -> Outcome {
    let set = LambdaSet::dyadic_ladder(Some(10));
    let grid = DyadicInterval::new(d("-4"), d("8")).unwrap().grid(10).unwrap();
    let grid: Vec<Dyadic> = grid.into_iter().chain([d("8")]).collect();
    let mut rng = Rng(0x5eed_0002);
    let (mut checked, mut violations) = (0u64, 0u64);
    for _ in 0..8 {
        let f = random_witness(&mut rng);
        let f1 = clip_f1(&regularize_f0(&f, &set, 4, d("8")).map_err(|e| e.to_string())?);
        let f2 = quantize_f2(&f1);
        for &x in &grid {
            let (a, b) = (f1.eval(x).unwrap(), f2.eval(x).unwrap());
            if a.is_positive() {
                checked += 1;
                // Oracle in rationals: a/2 <= b < a.
                let (ra, rb) = (rat(a), rat(b));
                if !(ra.clone() / BigInt::from(2) <= rb && rb < ra) {
                    violations += 1;
                }
            }
        }
    }
    check(violations == 0 && checked > 0, format!("{violations} violations of {checked}"))?;
    Ok(format!("8 random witnesses, {checked} grid points with f1 > 0, 0 violations"))
}

// 3 ------------------------------------------------------------------

fn demo_set() -> LambdaSet {
    LambdaSet::explicit((0..=16).map(|j| Dyadic::from(1i64 << j)).collect()).unwrap()
}

fn demo_partition() -> RefinedPartition {
    let set = demo_set();
    let pattern = AnchoredPattern {
        anchors: set.clone(),
        pattern: vec![
            WitnessBlock::new(d("0"), d("1/2"), d("1/2")),
            WitnessBlock::new(d("1/2"), d("1"), d("1/4")),
        ],
    };
    let f = pattern.snapshot(Dyadic::from((1 << 16) + 2)).unwrap();
    refine_partition(&f, &set, 2, DyadicInterval::new(d("-2"), d("2")).unwrap()).unwrap()
}

fn refinement_property() -> Outcome {
    let start = Instant::now();
    let set = demo_set();
    let part = demo_partition();
    let mut grid = DyadicInterval::new(d("-2"), d("2")).unwrap().grid(8).unwrap();
    grid.push(d("2"));
    let mut violations = 0;
    for &x in &grid {
        // Oracle: brute-force every λ against every piece.
        for j in &part.intervals {
            let hits = (0..=16).filter(|&k| j.contains(x + Dyadic::from(1i64 << k))).count();
            if hits > 1 {
                violations += 1;
            }
        }
        check(part.max_hits_per_piece(&set, x).unwrap() <= 1, format!("library count at {x}"))?;
    }
    check(violations == 0, format!("{violations} violations"))?;
    within_time(start.elapsed(), 10.0)?;
    Ok(format!(
        "{} pieces x {} grid points, 0 violations, {:.3}s",
        part.len(),
        grid.len(),
        start.elapsed().as_secs_f64()
    ))
}

// 4 ------------------------------------------------------------------

fn graded_partition() -> RefinedPartition {
    // Levels 2^-1 .. 2^-6 on [1, 4) plus the regularization's small levels.
    let set = LambdaSet::explicit((0..=8).map(|j| Dyadic::from(1i64 << j)).collect()).unwrap();
    let blocks = (0..6)
        .map(|i| WitnessBlock::new(d("1") + Dyadic::new(i, 1), d("1") + Dyadic::new(i + 1, 1), Dyadic::new(1, i as u32 + 1)))
        .collect();
    let f = PiecewiseWitness::new(blocks, None).unwrap();
    let f3 = regularize(&f, &set, 1, Dyadic::from(300)).unwrap();
    refine_partition(&f3, &set, 1, DyadicInterval::new(d("-1"), d("1")).unwrap()).unwrap()
}

fn bernoulli_law() -> Outcome {
    let seeds: Vec<u64> = (0..10_000).collect();
    let (mut tested, mut failing) = (0usize, 0usize);
    for part in [demo_partition(), graded_partition()] {
        for r in interval_frequencies(&part, &seeds) {
            if r.kappa <= 6 {
                tested += 1;
                // Oracle bound recomputed from κ directly.
                let p = 0.5f64.powi(r.kappa as i32);
                let sigma = (p * (1.0 - p) / 1e4).sqrt();
                if (r.ones as f64 / 1e4 - p).abs() > 4.0 * sigma {
                    failing += 1;
                }
            }
        }
    }
    check(tested > 0, "no intervals with κ <= 6")?;
    check(failing * 100 <= tested, format!("{failing} of {tested} intervals outside 4σ"))?;
    Ok(format!("{tested} intervals with κ <= 6, {failing} outside 4σ"))
}

// 5 ------------------------------------------------------------------

fn borel_cantelli() -> Outcome {
    let set = demo_set();
    let part = demo_partition();
    let seeds: Vec<u64> = (0..1000).collect();
    let c_grid: Vec<Dyadic> = (0..10).map(|k| d("-2") + Dyadic::new(3 * k, 5)).collect();
    let d_grid: Vec<Dyadic> = (0..10).map(|k| Dyadic::new(3 * k, 5)).collect();
    let horizons: Vec<Dyadic> = (0..=16).map(|j| Dyadic::from(1i64 << j)).collect();
    let rep = ensemble_report(&part, &set, &seeds, &c_grid, &d_grid, &horizons).map_err(|e| e.to_string())?;
    let per = horizons.len();
    let traj = |i: usize| -> Vec<HitStats> {
        rep.rows[i * per..(i + 1) * per]
            .iter()
            .map(|r| HitStats { horizon: r.horizon, hits: r.hits, expected: r.expected })
            .collect()
    };
    let points = c_grid.len() + d_grid.len();
    let mut worst = 0.0f64;
    for (k, &x) in d_grid.iter().enumerate() {
        // Oracle E: levels of the demo witness met by x + 2^j, j = 0..16.
        let e: f64 = (0..=16)
            .map(|j| {
                let y = x + Dyadic::from(1i64 << j);
                let off = y - y.floor_to_grid(0);
                let anchored = (0..=16).any(|a| y.floor_to_grid(0) == Dyadic::from(1i64 << a));
                match (anchored, off < d("1/2")) {
                    (false, _) => 0.0,
                    (true, true) => 0.5,
                    (true, false) => 0.25,
                }
            })
            .sum();
        let mut total = 0u64;
        for s in 0..seeds.len() {
            let t = traj(s * points + c_grid.len() + k);
            check(t[per - 1].expected == e, format!("expected at {x}: {} vs {e}", t[per - 1].expected))?;
            total += t[per - 1].hits;
        }
        let mean = total as f64 / seeds.len() as f64;
        let dev = (mean - e).abs() / e.sqrt();
        worst = worst.max(dev);
        check(dev <= 4.0, format!("D-grid {x}: mean {mean} vs E {e}"))?;
    }
    let mut stable = 0usize;
    for s in 0..seeds.len() {
        for k in 0..c_grid.len() {
            stable += stabilized(&traj(s * points + k)) as usize;
        }
    }
    let frac = stable as f64 / (seeds.len() * c_grid.len()) as f64;
    check(frac >= 0.9, format!("only {:.1}% of C-grid runs stabilized", 100.0 * frac))?;
    Ok(format!(
        "D-grid worst |mean-E|/sqrt(E) = {worst:.3}; C-grid {:.1}% stabilized",
        100.0 * frac
    ))
}

// 6 ------------------------------------------------------------------

fn thinning_probability() -> Outcome {
    let start = Instant::now();
    let q = d("1/2");
    let mut parts = Vec::new();
    for (len, num, den) in [(1u64, 1, 4), (2, 7, 16)] {
        // Oracle: 1 - (1 - q^2)^len with q = 1/2, m = 1.
        let oracle = BigRational::from_integer(1.into())
            - (BigRational::from_integer(1.into()) - BigRational::new(1.into(), 4.into())).pow(len as i32);
        check(oracle == BigRational::new(num.into(), den.into()), "oracle")?;
        let exact = ak_probability(1, q, len).map_err(|e| e.to_string())?;
        check(exact.exact.as_ref() == Some(&oracle), format!("formula len={len}"))?;
        let mc = ak_monte_carlo(1, q, len, 100_000, 0xa0 + len).map_err(|e| e.to_string())?;
        let p = num as f64 / den as f64;
        let sigma = (p * (1.0 - p) / 1e5).sqrt();
        check(
            (mc.frequency - p).abs() <= 4.0 * sigma,
            format!("len={len}: {} vs {p}", mc.frequency),
        )?;
        parts.push(format!("{num}/{den}: {:.5}", mc.frequency));
    }
    within_time(start.elapsed(), 30.0)?;
    Ok(format!("{}, {:.2}s", parts.join(", "), start.elapsed().as_secs_f64()))
}

// 7 ------------------------------------------------------------------

fn density_exactness() -> Outcome {
    let mut rng = Rng(0x5eed_0007);
    let (mut checks, mut violations) = (0u64, 0u64);
    for _ in 0..100 {
        let res = 1 + rng.below(10) as u32;
        let cells = 1u64 << res;
        let mut cuts: Vec<u64> = (0..2 * (1 + rng.below(4))).map(|_| rng.below(cells + 1)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut ivs = Vec::new();
        let mut measure_num = 0u64;
        for w in cuts.chunks(2) {
            if let [a, b] = w {
                ivs.push(DyadicInterval::new(Dyadic::new(*a as i128, res), Dyadic::new(*b as i128, res)).unwrap());
                measure_num += b - a;
            }
        }
        let c = DyadicSet::new(ivs).map_err(|e| e.to_string())?;
        let measure = Dyadic::new(measure_num as i128, res);
        for _ in 0..100 {
            let xe = rng.below(31) as u32;
            let x = Dyadic::new(rng.below(1 << xe) as i128, xe);
            for n in (-(res as i64) - 12)..=-(c.resolution() as i64) {
                checks += 1;
                if translate_count(&c, x, n).map_err(|e| e.to_string())?.scaled != measure {
                    violations += 1;
                }
            }
        }
    }
    check(violations == 0, format!("{violations} of {checks}"))?;
    Ok(format!("100 sets x 100 points, {checks} exact comparisons, 0 violations"))
}

// 8 ------------------------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lambda-lab")
}

fn ctype_claims(dir: &Path) -> Outcome {
    // (a) exact, with an independent tail oracle: 40 terms plus 2^{1-(n+41)^2}.
    let r = check_fast_decr(&WeightSeq::SuperExp, 20).map_err(|e| e.to_string())?;
    check(r.verdict == FastDecayVerdict::Holds, "fast decay verdict")?;
    for n in 1..=20i64 {
        let mut tail = pow2_rat(1 - (n + 41) * (n + 41));
        for j in n + 1..=n + 40 {
            tail += pow2_rat(-j * j);
        }
        check(tail < pow2_rat(-n - n * n), format!("oracle fast decay at n={n}"))?;
    }
    let out = dir.join("ctype.csv");
    let start = Instant::now();
    let status = Command::new(bin())
        .args(["ctype", "--set", "dyadic-ladder", "--weights", "superexp", "--blocks", "20", "--verify", "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    let elapsed = start.elapsed();
    check(status.code() == Some(0), format!("exit {:?}", status.code()))?;
    within_time(elapsed, 5.0)?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let (mut div, mut conv) = (0, 0);
    let mut div_x = std::collections::BTreeSet::new();
    let mut conv_x = std::collections::BTreeSet::new();
    for line in text.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let x: Dyadic = f[1].parse().map_err(|_| "x column")?;
        let n: f64 = f[2].parse().map_err(|_| "n column")?;
        let partial: f64 = f[5].parse().map_err(|_| "partial column")?;
        check(f[7] == "true", format!("row not ok: {line}"))?;
        match f[0] {
            "divergence" => {
                check(x >= Dyadic::ZERO && x <= d("1/2"), "divergence grid")?;
                check(partial >= n, format!("partial below n: {line}"))?;
                div += 1;
                div_x.insert(x);
            }
            "convergence" => {
                check(x >= d("-4") && x < d("-1/2"), "convergence grid")?;
                check(partial < 1.0, format!("partial not below 1: {line}"))?;
                conv += 1;
                conv_x.insert(x);
            }
            other => return Err(format!("side {other}")),
        }
    }
    check(div_x.len() == 9 && conv_x.len() == 9, "grid sizes")?;
    check(div == 180 && conv == 180, format!("{div} + {conv} rows"))?;
    Ok(format!("N=20, 9+9 grid points, 360 exact rows hold, exit 0, {:.2}s", elapsed.as_secs_f64()))
}

// 9 ------------------------------------------------------------------

fn transfer_domination_check() -> Outcome {
    let set = LambdaSet::dyadic_ladder(Some(6));
    let c = WeightSeq::Geometric(d("1/2"));
    let f = PiecewiseWitness::new(
        vec![
            WitnessBlock::new(d("3/2"), d("5/2"), Dyadic::ONE),
            WitnessBlock::new(d("3"), d("13/4"), Dyadic::ONE),
            WitnessBlock::new(d("9/2"), d("6"), Dyadic::ONE),
        ],
        None,
    )
    .unwrap();
    let window = DyadicInterval::new(d("0"), d("1")).unwrap();
    let t = alpha_transfer(&f, &set, &c, window).map_err(|e| e.to_string())?;
    let grid = window.grid(6).unwrap();
    let pts = set.indexed_points(Dyadic::ZERO, d("8"), false).map_err(|e| e.to_string())?;
    let mut violations = 0;
    for &x in &grid {
        for row in transfer_domination(&t, &set, &c, x).map_err(|e| e.to_string())? {
            violations += (!row.ok) as u32;
        }
        // Oracle: Σ_j 2^-j α_k over λ_j landing in block k, against the
        // plain count, in rationals.
        for (b, e) in f.blocks().iter().zip(&t.entries) {
            let landing: Vec<_> = pts.iter().filter(|p| x + p.value >= b.lo && x + p.value < b.hi).collect();
            let weighted: BigRational = landing.iter().map(|p| pow2_rat(e.alpha_log2 - p.index as i64)).sum();
            if weighted < BigRational::from_integer(BigInt::from(landing.len())) {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations"))?;
    Ok(format!("3 blocks x {} grid points, 0 violations", grid.len()))
}

// 10 -----------------------------------------------------------------

fn run_cli(threads: &str, args: &[&str], outs: &[(&str, &Path)]) -> Result<Vec<Vec<u8>>, String> {
    let mut cmd = Command::new(bin());
    cmd.args(["--threads", threads]).args(args);
    for (flag, path) in outs {
        cmd.arg(flag).arg(path);
    }
    let o = cmd.output().map_err(|e| e.to_string())?;
    check(o.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)))?;
    let mut bytes = vec![o.stdout];
    for (_, p) in outs {
        bytes.push(std::fs::read(p).map_err(|e| e.to_string())?);
    }
    Ok(bytes)
}

fn determinism(dir: &Path) -> Outcome {
    let cases: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("set", vec!["set", "--kind", "dyadic-ladder", "--k-max", "10", "--window", "0", "11", "--stats"], vec!["--out"]),
        ("thin", vec!["thin", "--set", "dyadic-ladder:8", "--p", "1/2", "--seed", "3", "--window", "0", "9"], vec!["--out"]),
        ("ak", vec!["ak", "--m", "k", "--n", "unit", "--q", "1/2", "--k-max", "8", "--trials", "5000"], vec!["--out"]),
        ("ctype", vec!["ctype", "--blocks", "12", "--verify"], vec!["--out", "--construction-out"]),
        (
            "randomize",
            vec!["randomize", "--demo", "--seeds", "0..60"],
            vec!["--out", "--partition-out", "--freq-out"],
        ),
        ("density", vec!["density", "--set", r#"[["0","1/2"],["5/8","3/4"]]"#, "--x", "3/64", "--levels", "0..-10"], vec!["--out"]),
        (
            "eval",
            vec!["eval", "--set", "powers-of-two:12", "--witness", "lacunary-demo", "--weights", "geometric:1/2", "--x-grid", "grid:0,1,3", "--horizons", "pow2:0..12"],
            vec!["--out"],
        ),
    ];
    for (name, args, out_flags) in &cases {
        let mut runs = Vec::new();
        for threads in ["1", "4"] {
            let paths: Vec<_> = out_flags.iter().map(|f| dir.join(format!("{name}-{threads}-{}", f.trim_start_matches('-')))).collect();
            let outs: Vec<(&str, &Path)> = out_flags.iter().copied().zip(paths.iter().map(|p| p.as_path())).collect();
            runs.push(run_cli(threads, args, &outs)?);
        }
        check(runs[0] == runs[1], format!("{name}: outputs differ between 1 and 4 threads"))?;
        check(runs[0].iter().skip(1).all(|b| !b.is_empty()), format!("{name}: empty output"))?;
    }
    Ok(format!("{} commands byte-identical at --threads 1 and 4", cases.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("exact lattice counts", Box::new(lattice_counts)),
        ("pipeline sandwich", Box::new(pipeline_sandwich)),
        ("refinement property", Box::new(refinement_property)),
        ("Bernoulli law", Box::new(bernoulli_law)),
        ("Borel-Cantelli analogue", Box::new(borel_cantelli)),
        ("thinning probability", Box::new(thinning_probability)),
        ("density exactness", Box::new(density_exactness)),
        ("c-type claim suite", Box::new(|| ctype_claims(dir.path()))),
        ("transfer domination", Box::new(transfer_domination_check)),
        ("CLI determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
