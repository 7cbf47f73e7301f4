//! Flag/file config plumbing: parsing of set, witness, grid and seed specs,
//! file-then-flag merging, and the config hash stamped into every output.

use std::path::Path;

use lambda_lab::witness::{AnchoredPattern, WitnessGenerator};
use lambda_lab::{Dyadic, LambdaSet, PiecewiseWitness, WitnessBlock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A set given by name (`dyadic-ladder[:K]`, `powers-of-two:J`,
/// `log-integers:N`, `explicit:a,b,...`) or as a full JSON descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Name(String),
    Descriptor(LambdaSet),
}

impl SetSpec {
    pub fn parse_flag(s: &str) -> Result<SetSpec, CliError> {
        if s.trim_start().starts_with('{') {
            let set: LambdaSet = serde_json::from_str(s).map_err(|e| CliError::config(format!("set: {e}")))?;
            return Ok(SetSpec::Descriptor(set));
        }
        Ok(SetSpec::Name(s.to_string()))
    }

    pub fn build(&self) -> Result<LambdaSet, CliError> {
        let name = match self {
            SetSpec::Descriptor(s) => return Ok(s.clone()),
            SetSpec::Name(n) => n.as_str(),
        };
        let (kind, arg) = name.split_once(':').unwrap_or((name, ""));
        let int = |what: &str| -> Result<u64, CliError> {
            arg.parse().map_err(|_| CliError::config(format!("{kind}: bad {what} {arg:?}")))
        };
        match kind {
            "dyadic-ladder" if arg.is_empty() => Ok(LambdaSet::dyadic_ladder(None)),
            "dyadic-ladder" => Ok(LambdaSet::dyadic_ladder(Some(int("k_max")?))),
            "powers-of-two" => {
                let top = int("top exponent")?;
                if top > 120 {
                    return Err(CliError::config("powers-of-two: top exponent above 120"));
                }
                Ok(LambdaSet::explicit((0..=top).map(|j| Dyadic::from_int(1i128 << j)).collect())?)
            }
            "log-integers" => Ok(LambdaSet::log_integers(int("max_n")?)),
            "explicit" => Ok(LambdaSet::explicit(parse_list(arg)?)?),
            _ => Err(CliError::config(format!("unknown set {name:?}"))),
        }
    }
}

/// A witness as JSON (`{"blocks": [...]}`), `indicator:lo,hi`, or the
/// anchored two-level pattern of the lacunary demo (`lacunary-demo`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WitnessSpec {
    Name(String),
    Inline(PiecewiseWitness),
}

impl WitnessSpec {
    pub fn parse_flag(s: &str) -> Result<WitnessSpec, CliError> {
        let t = s.trim_start();
        if t.starts_with('{') {
            let w = serde_json::from_str(t).map_err(|e| CliError::config(format!("witness: {e}")))?;
            return Ok(WitnessSpec::Inline(w));
        }
        if let Some(path) = t.strip_prefix('@') {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("witness file {path}: {e}")))?;
            let w = serde_json::from_str(&text).map_err(|e| CliError::config(format!("witness: {e}")))?;
            return Ok(WitnessSpec::Inline(w));
        }
        Ok(WitnessSpec::Name(s.to_string()))
    }

    /// `set` anchors the demo pattern; `horizon` bounds its snapshot.
    pub fn build(&self, set: &LambdaSet, horizon: Dyadic) -> Result<PiecewiseWitness, CliError> {
        match self {
            WitnessSpec::Inline(w) => Ok(w.clone()),
            WitnessSpec::Name(n) if n == "lacunary-demo" => Ok(demo_pattern(set).snapshot(horizon)?),
            WitnessSpec::Name(n) => match n.split_once(':') {
                Some(("indicator", arg)) => {
                    let v = parse_list(arg)?;
                    if v.len() != 2 {
                        return Err(CliError::config("indicator needs lo,hi"));
                    }
                    Ok(PiecewiseWitness::indicator(v[0], v[1])?)
                }
                _ => Err(CliError::config(format!("unknown witness {n:?}"))),
            },
        }
    }
}

/// `[a, a+1/2)` at level 1/2 and `[a+1/2, a+1)` at level 1/4 at every anchor.
pub fn demo_pattern(anchors: &LambdaSet) -> AnchoredPattern {
    let d = |s: &str| s.parse::<Dyadic>().expect("literal");
    AnchoredPattern {
        anchors: anchors.clone(),
        pattern: vec![
            WitnessBlock::new(d("0"), d("1/2"), d("1/2")),
            WitnessBlock::new(d("1/2"), d("1"), d("1/4")),
        ],
    }
}

/// Comma-separated dyadics.
pub fn parse_list(s: &str) -> Result<Vec<Dyadic>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<Dyadic>().map_err(CliError::from))
        .collect()
}

/// `grid:lo,hi,e` (the `2^-e` grid of `[lo, hi)`) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<Dyadic>, CliError> {
    if let Some(arg) = s.strip_prefix("grid:") {
        let v: Vec<&str> = arg.split(',').collect();
        if v.len() != 3 {
            return Err(CliError::config("grid needs lo,hi,e"));
        }
        let e: u32 = v[2].trim().parse().map_err(|_| CliError::config("grid exponent"))?;
        let iv = lambda_lab::DyadicInterval::new(v[0].trim().parse()?, v[1].trim().parse()?)?;
        return Ok(iv.grid(e)?);
    }
    parse_list(s)
}

/// `pow2:a..b` (the powers `2^a..=2^b`) or a comma list.
pub fn parse_horizons(s: &str) -> Result<Vec<Dyadic>, CliError> {
    if let Some(arg) = s.strip_prefix("pow2:") {
        let (a, b) = arg.split_once("..").ok_or_else(|| CliError::config("pow2 needs a..b"))?;
        let a: i64 = a.trim().parse().map_err(|_| CliError::config("pow2 start"))?;
        let b: i64 = b.trim().parse().map_err(|_| CliError::config("pow2 end"))?;
        return (a..=b).map(|k| Dyadic::pow2(k).map_err(CliError::from)).collect();
    }
    parse_list(s)
}

/// `a..b` (half-open) or a comma list of seeds.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::config(format!("bad seeds {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Reads a JSON config file into a command's parameter record; unknown
/// fields are rejected by the record itself.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
}

/// First 16 hex digits of the SHA-256 of the effective config.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Flags win over file values; booleans are set by either.
pub trait Merge {
    fn merge(self, file: Self) -> Self;
}

#[macro_export]
macro_rules! impl_merge {
    ($t:ty { $($opt:ident),* } bools { $($flag:ident),* }) => {
        impl $crate::config::Merge for $t {
            fn merge(self, file: Self) -> Self {
                Self {
                    $($opt: self.$opt.or(file.$opt),)*
                    $($flag: self.$flag || file.$flag,)*
                }
            }
        }
    };
}
