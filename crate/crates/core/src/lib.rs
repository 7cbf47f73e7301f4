//! Exact experiments on translated-sum series `s(x) = Σ_{λ∈Λ} f(x + λ)`.
//!
//! All points, interval endpoints and levels are dyadic rationals
//! ([`Dyadic`]); arithmetic is exact or fails loudly. Randomness comes from a
//! stateless counter-based sampler, so every random object is a pure
//! function of `(seed, index)`.

pub mod bitsum;
pub mod ctype;
pub mod density;
pub mod dyadic;
pub mod error;
pub mod lambda;
pub mod random_witness;
pub mod sampler;
pub mod witness;
pub mod weights;

pub use dyadic::{Dyadic, DyadicInterval};
pub use error::{Error, Result};
pub use lambda::{Block, BlockRule, CountGrowth, IndexedPoint, LambdaSet};
pub use weights::{TailBound, WeightSeq};
pub use witness::{PiecewiseWitness, WitnessBlock};
