//! Wiener-chaos tensor algebra over a finite orthonormal basis, and the
//! expected determinants of iterated Malliavin matrices for pairs of
//! multiple integrals.
//!
//! * [`tensor`]: dense tensors, contractions, symmetrization, hat contractions
//! * [`chaos`]: chaos expansions, product formula, `D`, `δ`, Hermite evaluation
//! * [`malliavin`]: `E det Λ^(k)` in closed and symbolic form, `det C`, the
//!   covariance inequality and the density verdict
//! * [`mc`]: reproducible Monte Carlo estimates

pub mod chaos;
pub mod combinatorics;
pub mod error;
pub mod malliavin;
pub mod mc;
pub mod tensor;

pub use chaos::{hermite, ChaosExpansion, HValuedChaos};
pub use error::{Error, Result};
pub use malliavin::{DetBreakdown, MalliavinPair, Verdict};
pub use mc::Estimate;
pub use tensor::{hat_contract, MultiIndex, Tensor};

/// Mixes `stream` into `seed` (SplitMix64 finalizer) to derive independent
/// child seeds, e.g. one per pair component or per trial.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
