//! Closed-form outage probability of the primary link under secondary
//! interference, the interference-free baseline, and the coexistence test.
//!
//! The core quantity is the CDF of `X / (1 + sum_k Y_k)` for independent
//! exponentials: `P{SINR < g} = 1 - exp(-g/sx) * prod_k (1 + sk*g/sx)^-1`.
//! The product is evaluated in the log domain so the form stays accurate for
//! thousands of interferers.

use crate::scenario::Scenario;

/// Inputs to the SINR CDF: the numerator mean, the interferer means and the
/// threshold, all linear.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageInputs {
    /// Mean of the numerator exponential, `P0 * var_gp / Np`.
    pub sigma_x_sq: f64,
    /// Means of the interferer exponentials, `P_k * var_gk / Np`.
    pub sigma_y_sq: Vec<f64>,
    /// SINR threshold.
    pub gamma: f64,
}

/// CDF of the exponential-over-shifted-exponential-sum SINR at `gamma`.
///
/// Limiting cases are well defined: `gamma = 0` gives 0, while an infinite
/// threshold or a zero numerator mean gives 1.
pub fn sinr_cdf(inp: &OutageInputs) -> f64 {
    debug_assert!(inp.sigma_x_sq >= 0.0 && inp.gamma >= 0.0);
    if inp.gamma == 0.0 {
        return 0.0;
    }
    if inp.sigma_x_sq == 0.0 || inp.gamma.is_infinite() {
        return 1.0;
    }
    let ratio = inp.gamma / inp.sigma_x_sq;
    let log_success: f64 = -ratio - inp.sigma_y_sq.iter().map(|sk| (sk * ratio).ln_1p()).sum::<f64>();
    (1.0 - log_success.exp()).clamp(0.0, 1.0)
}

fn inputs_for(powers: &[f64], s: &Scenario) -> OutageInputs {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    OutageInputs {
        sigma_x_sq: s.snr_p(),
        sigma_y_sq: powers
            .iter()
            .zip(&s.users)
            .map(|(p, u)| p * u.var_g / s.primary.noise_np)
            .collect(),
        gamma: s.primary.rate_rp.exp2() - 1.0,
    }
}

/// Exact primary outage probability under the given secondary powers.
pub fn outage_probability(powers: &[f64], s: &Scenario) -> f64 {
    sinr_cdf(&inputs_for(powers, s))
}

/// Primary outage probability with the secondary system silent:
/// `1 - exp(-(2^Rp - 1) * Np / (P0 * var_gp))`.
pub fn baseline_outage(s: &Scenario) -> f64 {
    sinr_cdf(&OutageInputs {
        sigma_x_sq: s.snr_p(),
        sigma_y_sq: Vec::new(),
        gamma: s.primary.rate_rp.exp2() - 1.0,
    })
}

/// The secondary system may transmit at all only when the margin strictly
/// exceeds the interference-free outage.
pub fn coexistence_feasible(s: &Scenario) -> bool {
    s.outage_margin > baseline_outage(s)
}
