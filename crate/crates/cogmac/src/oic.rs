//! Instantaneous rate computations for the cognitive multiple-access channel:
//! the primary's interfered rate, interference-regime classification, the
//! piecewise opportunistic-interference-cancelation (OIC) sum rate, and the
//! two-source MAC region membership test.
//!
//! Regime boundaries, with `gamma_p = P0*|h_p|^2/Ns`, `alpha = 2^Rp - 1` and
//! `psi = sum_k P_k*|h_k|^2/Ns`:
//!
//! * Weak:   `gamma_p <  alpha`          — primary undecodable, treated as noise
//! * Medium: `alpha <= gamma_p < alpha*(1+psi)`
//! * Strong: `gamma_p >= alpha*(1+psi)`  — primary decoded and removed

use crate::scenario::Scenario;

/// One joint realization of all squared channel magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSample {
    /// Primary direct link `|g_p|^2`.
    pub gp_sq: f64,
    /// Secondary-to-primary interference links `|g_k|^2`, length K.
    pub gk_sq: Vec<f64>,
    /// Primary-to-secondary-BS link `|h_p|^2`.
    pub hp_sq: f64,
    /// Secondary uplinks `|h_k|^2`, length K.
    pub hk_sq: Vec<f64>,
}

/// Interference regime at the secondary base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OicRegime {
    Weak,
    Medium,
    Strong,
}

impl std::fmt::Display for OicRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OicRegime::Weak => write!(f, "weak"),
            OicRegime::Medium => write!(f, "medium"),
            OicRegime::Strong => write!(f, "strong"),
        }
    }
}

/// A (secondary sum rate, primary rate at the secondary BS) operating pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub rs: f64,
    pub rp_prime: f64,
}

/// `log2` via the natural-log ratio, for determinism across platforms.
#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    x.ln() / std::f64::consts::LN_2
}

#[inline]
fn capacity(x: f64) -> f64 {
    log2(1.0 + x)
}

/// Received primary SNR `gamma_p` and aggregate secondary SNR `psi` at the
/// secondary base station.
pub fn received_snrs(sample: &GainSample, powers: &[f64], s: &Scenario) -> (f64, f64) {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    assert_eq!(sample.hk_sq.len(), s.k(), "sample hk length must equal K");
    let gamma_p = s.primary.power_p0 * sample.hp_sq / s.noise_ns;
    let psi = powers
        .iter()
        .zip(&sample.hk_sq)
        .map(|(p, h)| p * h)
        .sum::<f64>()
        / s.noise_ns;
    (gamma_p, psi)
}

/// Rate of the primary link with all secondary transmissions treated as noise:
/// `log2(1 + P0*|g_p|^2 / (Np + sum_k P_k*|g_k|^2))`.
pub fn primary_rate(sample: &GainSample, powers: &[f64], s: &Scenario) -> f64 {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    assert_eq!(sample.gk_sq.len(), s.k(), "sample gk length must equal K");
    let interference = powers
        .iter()
        .zip(&sample.gk_sq)
        .map(|(p, g)| p * g)
        .sum::<f64>();
    let sinr = s.primary.power_p0 * sample.gp_sq / (s.primary.noise_np + interference);
    capacity(sinr)
}

/// Classify the interference regime for one realization and power vector.
///
/// Boundary assignment: `gamma_p = alpha` is Medium, `gamma_p = alpha*(1+psi)`
/// is Strong.
pub fn classify_regime(sample: &GainSample, powers: &[f64], s: &Scenario) -> OicRegime {
    let (gamma_p, psi) = received_snrs(sample, powers, s);
    let alpha = s.primary.rate_rp.exp2() - 1.0;
    if gamma_p < alpha {
        OicRegime::Weak
    } else if gamma_p < alpha * (1.0 + psi) {
        OicRegime::Medium
    } else {
        OicRegime::Strong
    }
}

/// Weak-interference branch: primary treated as noise.
pub fn weak_rate(gamma_p: f64, psi: f64) -> f64 {
    capacity(psi / (1.0 + gamma_p))
}

/// Medium-interference branch, clamped at zero from below.
pub fn medium_rate(gamma_p: f64, psi: f64, rate_rp: f64) -> f64 {
    (capacity(gamma_p + psi) - rate_rp).max(0.0)
}

/// Strong-interference branch: primary decoded and removed (clean MAC).
pub fn strong_rate(psi: f64) -> f64 {
    capacity(psi)
}

/// The piecewise OIC sum rate of the secondary system, in bits/s/Hz.
pub fn sum_rate_oic(sample: &GainSample, powers: &[f64], s: &Scenario) -> f64 {
    let (gamma_p, psi) = received_snrs(sample, powers, s);
    match classify_regime(sample, powers, s) {
        OicRegime::Weak => weak_rate(gamma_p, psi),
        OicRegime::Medium => medium_rate(gamma_p, psi, s.primary.rate_rp),
        OicRegime::Strong => strong_rate(psi),
    }
}

/// The operating pair at one realization: the OIC sum rate together with the
/// decoded primary rate. Medium/Strong report `min(Rp, C(gamma_p))`; Weak
/// reports zero since the primary is undecodable there.
pub fn operating_point(sample: &GainSample, powers: &[f64], s: &Scenario) -> RatePair {
    let (gamma_p, _) = received_snrs(sample, powers, s);
    let rs = sum_rate_oic(sample, powers, s);
    let rp_prime = match classify_regime(sample, powers, s) {
        OicRegime::Weak => 0.0,
        OicRegime::Medium | OicRegime::Strong => s.primary.rate_rp.min(capacity(gamma_p)),
    };
    RatePair { rs, rp_prime }
}

/// Membership test for the two-source MAC capacity region:
/// `rs <= C(psi)`, `rp' <= C(gamma_p)` and `rs + rp' <= C(gamma_p + psi)`.
pub fn mac_region_contains(
    pair: &RatePair,
    sample: &GainSample,
    powers: &[f64],
    s: &Scenario,
) -> bool {
    let (gamma_p, psi) = received_snrs(sample, powers, s);
    pair.rs <= capacity(psi)
        && pair.rp_prime <= capacity(gamma_p)
        && pair.rs + pair.rp_prime <= capacity(gamma_p + psi)
}
