//! Seeded stochastic oracles: fading-sample generation, outage-probability
//! estimation, and ergodic sum-rate estimation per interference regime.
//!
//! Reproducibility contract: sample `i` is drawn from ChaCha8 substream `i` of
//! the seed (counter-based), and estimators reduce over fixed-size chunks in
//! index order. Results are therefore bit-identical for a given `(seed, n,
//! scenario)` regardless of how many worker threads evaluate the chunks.
//! Squared Rayleigh magnitudes are exponential, sampled by inverse CDF on a
//! 53-bit uniform so no rejection loop can diverge across platforms.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::oic::{classify_regime, primary_rate, sum_rate_oic, GainSample, OicRegime};
use crate::scenario::Scenario;

/// Samples per reduction chunk. Fixed so that chunk boundaries, and hence all
/// floating-point reduction orders, do not depend on the worker count.
const CHUNK: u64 = 8192;

#[derive(Debug, Error)]
pub enum McError {
    #[error("no samples fell in the {regime} regime (n = {n}); the conditional estimate is undefined")]
    EmptyRegimeFilter { regime: OicRegime, n: u64 },
}

/// Averaging convention for regime-filtered estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Average `rate * 1{regime}` over all n samples.
    Restricted,
    /// Average over matching samples only.
    Conditional,
}

/// Regime filter attached to an estimate, with the empirically observed
/// probability of the conditioning event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeConditioning {
    pub regime: OicRegime,
    pub convention: Convention,
    pub empirical_probability: f64,
}

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    /// Number of samples the mean averages over (matching samples for the
    /// conditional convention).
    pub n: u64,
    pub seed: u64,
    pub conditioning: Option<RegimeConditioning>,
}

/// Counter-based fading sample stream over a scenario's channel statistics.
#[derive(Debug, Clone)]
pub struct GainStream {
    base: ChaCha8Rng,
    seed: u64,
    next_index: u64,
}

impl GainStream {
    pub fn new(seed: u64) -> Self {
        GainStream {
            base: ChaCha8Rng::seed_from_u64(seed),
            seed,
            next_index: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The sample at substream `index`, independent of any other index.
    ///
    /// Draw order within a substream is fixed: `g_p`, `g_1..g_K`, `h_p`,
    /// `h_1..h_K`.
    pub fn sample_at(&self, index: u64, s: &Scenario) -> GainSample {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        let gp_sq = exponential(&mut rng, s.primary.var_gp);
        let gk_sq = s
            .users
            .iter()
            .map(|u| exponential(&mut rng, u.var_g))
            .collect();
        let hp_sq = exponential(&mut rng, s.primary.var_hp);
        let hk_sq = s
            .users
            .iter()
            .map(|u| exponential(&mut rng, u.var_h))
            .collect();
        GainSample {
            gp_sq,
            gk_sq,
            hp_sq,
            hk_sq,
        }
    }

    /// Prefix of the substream: only the primary-side gains `(g_p, g_k)`.
    /// Identical values to the first `K + 1` draws of [`Self::sample_at`].
    fn primary_gains_at(&self, index: u64, s: &Scenario) -> (f64, Vec<f64>) {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        let gp_sq = exponential(&mut rng, s.primary.var_gp);
        let gk_sq = s
            .users
            .iter()
            .map(|u| exponential(&mut rng, u.var_g))
            .collect();
        (gp_sq, gk_sq)
    }
}

/// Draw one joint gain realization and advance the stream counter.
pub fn sample_gains(s: &Scenario, stream: &mut GainStream) -> GainSample {
    let sample = stream.sample_at(stream.next_index, s);
    stream.next_index += 1;
    sample
}

/// Inverse-CDF exponential with the given mean from one 64-bit uniform draw.
fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (mean * -(1.0 - u).ln()).max(0.0)
}

fn chunk_ranges(n: u64) -> Vec<(u64, u64)> {
    let mut ranges = Vec::with_capacity(((n + CHUNK - 1) / CHUNK) as usize);
    let mut start = 0;
    while start < n {
        ranges.push((start, (start + CHUNK).min(n)));
        start += CHUNK;
    }
    ranges
}

/// Estimate the primary outage probability as the fraction of fading samples
/// with `primary_rate < Rp`. The standard error is `sqrt(p(1-p)/n)`.
pub fn estimate_outage(powers: &[f64], s: &Scenario, n: u64, seed: u64) -> EstimateWithCI {
    assert!(n >= 1, "sample count must be at least 1");
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    let stream = GainStream::new(seed);
    let rate_rp = s.primary.rate_rp;
    let outages: u64 = chunk_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut count = 0u64;
            for i in lo..hi {
                let (gp_sq, gk_sq) = stream.primary_gains_at(i, s);
                let sample = GainSample {
                    gp_sq,
                    gk_sq,
                    hp_sq: 0.0,
                    hk_sq: vec![0.0; s.k()],
                };
                if primary_rate(&sample, powers, s) < rate_rp {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let p = outages as f64 / n as f64;
    EstimateWithCI {
        mean: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n,
        seed,
        conditioning: None,
    }
}

#[derive(Clone, Copy, Default)]
struct RateAccumulator {
    sum: f64,
    sum_sq: f64,
    matched: u64,
}

/// Estimate the ergodic OIC sum rate, optionally filtered to one regime.
///
/// `Restricted` averages `rate * 1{regime}` over all `n` samples;
/// `Conditional` averages over matching samples only and reports the
/// empirical regime probability. The convention is ignored without a filter.
pub fn estimate_ergodic_rate(
    powers: &[f64],
    s: &Scenario,
    n: u64,
    seed: u64,
    filter: Option<OicRegime>,
    convention: Convention,
) -> Result<EstimateWithCI, McError> {
    assert!(n >= 1, "sample count must be at least 1");
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    let stream = GainStream::new(seed);
    let partials: Vec<RateAccumulator> = chunk_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = RateAccumulator::default();
            for i in lo..hi {
                let sample = stream.sample_at(i, s);
                let keep = match filter {
                    None => true,
                    Some(regime) => classify_regime(&sample, powers, s) == regime,
                };
                if keep {
                    let r = sum_rate_oic(&sample, powers, s);
                    acc.sum += r;
                    acc.sum_sq += r * r;
                    acc.matched += 1;
                }
            }
            acc
        })
        .collect();
    // sequential combine in chunk order keeps the reduction deterministic
    let mut total = RateAccumulator::default();
    for p in partials {
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
        total.matched += p.matched;
    }

    let (mean, std_error, n_eff) = match (filter, convention) {
        (None, _) | (Some(_), Convention::Restricted) => {
            let denom = n as f64;
            let mean = total.sum / denom;
            let var = if n > 1 {
                ((total.sum_sq - denom * mean * mean) / (denom - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / denom).sqrt(), n)
        }
        (Some(regime), Convention::Conditional) => {
            if total.matched == 0 {
                return Err(McError::EmptyRegimeFilter { regime, n });
            }
            let m = total.matched as f64;
            let mean = total.sum / m;
            let var = if total.matched > 1 {
                ((total.sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / m).sqrt(), total.matched)
        }
    };
    let conditioning = filter.map(|regime| RegimeConditioning {
        regime,
        convention,
        empirical_probability: total.matched as f64 / n as f64,
    });
    Ok(EstimateWithCI {
        mean,
        std_error,
        n: n_eff,
        seed,
        conditioning,
    })
}
