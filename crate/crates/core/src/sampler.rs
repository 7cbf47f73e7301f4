//! Stateless, index-addressable Bernoulli draws.
//!
//! Every draw is a pure function of `(seed, index)`, so results do not depend
//! on evaluation order or thread count. Dyadic probabilities `m / 2^e` are
//! realised exactly by comparing the top `e` bits of a SplitMix64 output with
//! `m`.

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
// Reseeds the chain for exponents beyond 64 bits.
const CHAIN: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 output finalizer.
#[inline]
pub fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn mix(seed: u64, index: u64) -> u64 {
    finalize(seed ^ index.wrapping_mul(GOLDEN))
}

/// Draw with probability `2^-kappa`: the top `kappa` bits of `mix` are zero.
/// Exponents above 64 chain into a reseeded draw for the remaining bits.
pub fn bernoulli_pow2(seed: u64, index: u64, kappa: u32) -> bool {
    let mut seed = seed;
    let mut kappa = kappa;
    loop {
        if kappa == 0 {
            return true;
        }
        let z = mix(seed, index);
        if kappa <= 64 {
            return z >> (64 - kappa) == 0;
        }
        if z != 0 {
            return false;
        }
        kappa -= 64;
        seed = finalize(seed ^ CHAIN);
    }
}

/// A probability `m / 2^e` with `0 <= m <= 2^e` and `e <= 64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicProb {
    num: u128,
    exp: u32,
}

impl DyadicProb {
    pub fn new(p: Dyadic) -> Result<DyadicProb> {
        if p.is_negative() || p > Dyadic::ONE {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0,1]")));
        }
        if p.exponent() > 64 {
            return Err(Error::InvalidArgument(format!(
                "probability {p} needs more than 64 bits"
            )));
        }
        Ok(DyadicProb {
            num: p.mantissa() as u128,
            exp: p.exponent(),
        })
    }

    pub fn value(&self) -> Dyadic {
        Dyadic::new(self.num as i128, self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64()
    }

    pub fn sample(&self, seed: u64, index: u64) -> bool {
        if self.exp == 0 {
            return self.num == 1;
        }
        let top = (mix(seed, index) >> (64 - self.exp)) as u128;
        top < self.num
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // SplitMix64 with state 0 produces these as its first two outputs.
        assert_eq!(finalize(GOLDEN), 0xE220_A839_7B1D_CDAF);
        assert_eq!(finalize(GOLDEN.wrapping_mul(2)), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn kappa_zero_always_hits() {
        for i in 0..100 {
            assert!(bernoulli_pow2(7, i, 0));
        }
    }

    #[test]
    fn deterministic() {
        for i in 0..100 {
            assert_eq!(bernoulli_pow2(3, i, 2), bernoulli_pow2(3, i, 2));
        }
    }

    #[test]
    fn pow2_agrees_with_dyadic_prob() {
        for kappa in 1..=8u32 {
            let p = DyadicProb::new(Dyadic::new(1, kappa)).unwrap();
            for i in 0..500 {
                assert_eq!(p.sample(11, i), bernoulli_pow2(11, i, kappa));
            }
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(DyadicProb::new(Dyadic::from_int(2)).is_err());
        assert!(DyadicProb::new(Dyadic::new(-1, 1)).is_err());
        assert!(DyadicProb::new(Dyadic::new(1, 70)).is_err());
    }

    #[test]
    fn frequency_of_quarter() {
        let n = 40_000u64;
        let hits = (0..n).filter(|&i| bernoulli_pow2(5, i, 2)).count() as f64;
        let p = 0.25;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 4.0 * sd);
    }
}
