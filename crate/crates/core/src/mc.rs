//! Monte Carlo checks over the finite-dimensional isonormal process.
//!
//! Sample `i` of a run keyed by `seed` is drawn from its own ChaCha8 stream
//! (`seed`, stream `i`), so every estimate is a pure function of
//! `(seed, n_samples)` no matter how the samples are sharded across threads.
//! Per-sample values are reduced with a fixed-shape pairwise sum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosExpansion;
use crate::error::{Error, Result};
use crate::malliavin::{MalliavinPair, SumOfSquares};

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Acceptance band, in standard errors, used when comparing an estimate
/// with an exact value.
pub const DEFAULT_BAND: f64 = 4.0;

/// Sample mean with its standard error `sd / sqrt(samples)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    /// Builds the estimate from per-sample values in sample order.
    pub fn from_values(values: &[f64], seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "an estimate needs at least 2 samples".into(),
            ));
        }
        if values.iter().all(|&v| v == values[0]) {
            return Ok(Estimate {
                mean: values[0],
                stderr: 0.0,
                samples: n,
                seed,
            });
        }
        let mean = pairwise_sum(values) / n as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Ok(Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
            seed,
        })
    }

    /// `|mean - target| ≤ band · stderr`
    pub fn covers(&self, target: f64, band: f64) -> bool {
        (self.mean - target).abs() <= band * self.stderr
    }
}

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `d` iid standard normals for sample `index` of the run keyed by `seed`,
/// realizing `(W(e_0), ..., W(e_{d-1}))`.
pub fn sample_gaussian(d: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be at least 2, got {n_samples}"
        )));
    }
    Ok(())
}

/// Per-sample values of `det Λ^(k)`, computed in its sum-of-squares form.
pub fn det_samples(
    pair: &MalliavinPair,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sos = SumOfSquares::new(pair, k)?;
    let d = pair.dim();
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| sos.eval(&sample_gaussian(d, seed, i)))
        .collect()
}

/// Monte Carlo estimate of `E det Λ^(k)`.
pub fn estimate_expected_det(
    pair: &MalliavinPair,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_samples(n_samples)?;
    Estimate::from_values(&det_samples(pair, k, n_samples, seed)?, seed)
}

/// Monte Carlo estimate of `E[F^power]`, `power ∈ {1, 2}`.
pub fn estimate_moment(
    f: &ChaosExpansion,
    power: u32,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(1..=2).contains(&power) {
        return Err(Error::InvalidArgument(format!(
            "moment power must be 1 or 2, got {power}"
        )));
    }
    check_samples(n_samples)?;
    let d = f.dim();
    let values = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| Ok(f.evaluate(&sample_gaussian(d, seed, i))?.powi(power as i32)))
        .collect::<Result<Vec<f64>>>()?;
    Estimate::from_values(&values, seed)
}
