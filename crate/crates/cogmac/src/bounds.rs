//! Closed-form bounds and approximations for the secondary ergodic sum rate
//! under strong, medium and weak primary interference.
//!
//! Upper bounds come from Jensen's inequality on the concave `log2(1+x)`;
//! lower bounds from the convexity of `log2(1 + a*e^x)` applied to the log of
//! the fading gains, which brings in `exp(-kappa)` and, for i.i.d. users, a
//! harmonic-number factor. The weak-interference forms divide by a truncated
//! mean of the primary gain and are approximations rather than certified
//! bounds; they are named `approx_*` accordingly.

use thiserror::Error;

use crate::oic::{log2, OicRegime};
use crate::scenario::{Scenario, EULER_KAPPA};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("i.i.d. bound requested for heterogeneous users: {detail}")]
    HeterogeneousUsers { detail: String },
}

/// Which formula produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Mean moved inside the log (upper bounds).
    Jensen,
    /// Exponential of the mean log gain, non-i.i.d. form (lower bounds).
    ExpMeanLog,
    /// Exponential of the mean log gain with the i.i.d. harmonic-sum factor.
    ExpMeanLogHarmonic,
}

/// A lower/upper pair for one interference regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    pub regime: OicRegime,
    pub lower_method: BoundMethod,
    pub upper_method: BoundMethod,
}

/// `E[X * 1{X < c}]` for `X` exponential with mean `var`:
/// `var*(1 - e^{-c/var}) - c*e^{-c/var}`.
pub fn truncated_exp_component(var: f64, c: f64) -> f64 {
    debug_assert!(var > 0.0 && c >= 0.0);
    if c.is_infinite() {
        return var;
    }
    let decay = (-c / var).exp();
    var * (1.0 - decay) - c * decay
}

/// Harmonic number `H_n = sum_{k=1}^n 1/k`, with `H_0 = 0`.
fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

fn sum_weighted_snr(powers: &[f64], s: &Scenario) -> f64 {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    powers
        .iter()
        .zip(&s.users)
        .map(|(p, u)| p * u.var_h)
        .sum::<f64>()
        / s.noise_ns
}

/// Strong-interference (clean MAC) upper bound:
/// `log2(1 + sum_k P_k*var_hk / Ns)`.
pub fn upper_bound_strong(powers: &[f64], s: &Scenario) -> f64 {
    log2(1.0 + sum_weighted_snr(powers, s))
}

/// Strong-interference lower bound, valid for arbitrary per-user statistics:
/// `log2(1 + e^{-kappa} * sum_k P_k*var_hk / Ns)`.
pub fn lower_bound_strong(powers: &[f64], s: &Scenario) -> f64 {
    log2(1.0 + sum_weighted_snr(powers, s) * (-EULER_KAPPA).exp())
}

/// Tighter strong-interference lower bound for i.i.d. users on a common power:
/// `log2(1 + (p_s*var_h/noise_ns) * exp(H_{K-1} - kappa))`.
pub fn lower_bound_strong_iid(p_s: f64, var_h: f64, k: usize, noise_ns: f64) -> f64 {
    assert!(k >= 1, "user count must be at least 1");
    let snr = p_s * var_h / noise_ns;
    log2(1.0 + snr * (harmonic(k - 1) - EULER_KAPPA).exp())
}

/// Medium-interference pair. Both forms are clamped at zero from below since
/// the raw expressions go negative at small SNR.
pub fn bounds_medium(powers: &[f64], s: &Scenario) -> BoundReport {
    let snr_hp = s.primary.power_p0 * s.primary.var_hp / s.noise_ns;
    let snr_s = sum_weighted_snr(powers, s);
    let rate_rp = s.primary.rate_rp;
    let upper = (log2(1.0 + snr_hp + snr_s) - rate_rp).max(0.0);
    let scale = (-EULER_KAPPA).exp();
    let lower = (log2(1.0 + snr_hp * scale + snr_s * scale) - rate_rp).max(0.0);
    BoundReport {
        lower,
        upper,
        regime: OicRegime::Medium,
        lower_method: BoundMethod::ExpMeanLog,
        upper_method: BoundMethod::Jensen,
    }
}

/// Effective noise-plus-interference floor of the weak-interference forms:
/// `Ns + P0 * E[|h_p|^2 * 1{|h_p|^2 < c_p}]`.
///
/// Uses the unnormalized truncated mean exactly as the closed forms are
/// printed, not the conditional mean.
fn weak_denominator(s: &Scenario) -> f64 {
    let p = &s.primary;
    let gamma_th = p.rate_rp.exp2() - 1.0;
    let c_p = s.noise_ns * gamma_th / p.power_p0;
    if p.var_hp == 0.0 {
        return s.noise_ns;
    }
    s.noise_ns + p.power_p0 * truncated_exp_component(p.var_hp, c_p)
}

/// Weak-interference upper form: Jensen applied twice, with the truncated-mean
/// denominator.
pub fn upper_bound_weak(powers: &[f64], s: &Scenario) -> f64 {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    let num: f64 = powers
        .iter()
        .zip(&s.users)
        .map(|(p, u)| p * u.var_h)
        .sum();
    log2(1.0 + num / weak_denominator(s))
}

/// Weak-interference lower approximation. With `iid` set, all users must share
/// `var_h` and transmit the same power, and the harmonic-sum factor applies.
///
/// These are approximations, not certified bounds: the truncated-denominator
/// step is not a guaranteed inequality for the realized ergodic rate.
pub fn approx_lower_weak(powers: &[f64], s: &Scenario, iid: bool) -> Result<f64, BoundsError> {
    assert_eq!(powers.len(), s.k(), "power vector length must equal K");
    let den = weak_denominator(s);
    if !iid {
        let num: f64 = powers
            .iter()
            .zip(&s.users)
            .map(|(p, u)| p * u.var_h)
            .sum();
        return Ok(log2(1.0 + num * (-EULER_KAPPA).exp() / den));
    }
    let var_h = s.users[0].var_h;
    if s.users.iter().any(|u| u.var_h != var_h) {
        return Err(BoundsError::HeterogeneousUsers {
            detail: "users do not share var_h".into(),
        });
    }
    let p_s = powers[0];
    if powers.iter().any(|p| *p != p_s) {
        return Err(BoundsError::HeterogeneousUsers {
            detail: "users do not share a common power".into(),
        });
    }
    let k = s.k();
    Ok(log2(
        1.0 + p_s * var_h * (harmonic(k - 1) - EULER_KAPPA).exp() / den,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{PrimaryConfig, SecondaryUser};

    const EK: f64 = 0.561_459_483_566_885_1; // e^{-kappa}, 30-digit evaluation

    fn scenario(var_hs: &[f64], power_p0: f64, var_hp: f64, rate_rp: f64) -> Scenario {
        Scenario::new(
            PrimaryConfig {
                power_p0,
                rate_rp,
                noise_np: 1.0,
                var_gp: 1.0,
                var_hp,
            },
            var_hs
                .iter()
                .map(|&v| SecondaryUser {
                    var_h: v,
                    var_g: 1.0,
                    power_cap: None,
                    inst_h_sq: None,
                })
                .collect(),
            1.0,
            0.1,
        )
        .unwrap()
    }

    /// Simpson-rule oracle for the truncated mean of an exponential,
    /// independent of the closed form under test.
    fn truncated_mean_quadrature(var: f64, c: f64, panels: usize) -> f64 {
        let f = |x: f64| x * (-x / var).exp() / var;
        let h = c / panels as f64;
        let mut acc = f(0.0) + f(c);
        for i in 1..panels {
            let x = h * i as f64;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * h / 3.0
    }

    #[test]
    fn truncated_mean_matches_quadrature_oracle() {
        for (var, c) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.25), (2.0, 10.0)] {
            let oracle = truncated_mean_quadrature(var, c, 20_000);
            let closed = truncated_exp_component(var, c);
            assert!(
                (closed - oracle).abs() < 1e-10,
                "var={var} c={c}: closed {closed} vs quadrature {oracle}"
            );
        }
        // frozen spot value: 1 - 2/e
        assert!((truncated_exp_component(1.0, 1.0) - 0.264_241_117_657_115_36).abs() < 1e-15);
    }

    #[test]
    fn truncated_mean_edge_cases() {
        assert_eq!(truncated_exp_component(2.0, 0.0), 0.0);
        assert_eq!(truncated_exp_component(2.0, f64::INFINITY), 2.0);
        assert!((truncated_exp_component(2.0, 1e6) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_mean_bounded_and_monotone_in_c() {
        let var = 1.7;
        let mut prev = 0.0;
        for i in 0..200 {
            let c = 0.05 * i as f64;
            let t = truncated_exp_component(var, c);
            assert!((0.0..=var).contains(&t));
            assert!(t >= prev - 1e-15);
            prev = t;
        }
    }

    #[test]
    fn strong_bounds_hand_values() {
        let s = scenario(&[1.0], 1.0, 1.0, 1.0);
        // single user, P*var_h/Ns = 3 -> log2(4) = 2
        assert_eq!(upper_bound_strong(&[3.0], &s), 2.0);
        assert_eq!(upper_bound_strong(&[0.0], &s), 0.0);
        assert_eq!(lower_bound_strong(&[0.0], &s), 0.0);
        // three users each at unit SNR -> log2(4)
        let s3 = scenario(&[1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
        assert_eq!(upper_bound_strong(&[1.0, 1.0, 1.0], &s3), 2.0);
        // K=1 unit SNR lower bound: log2(1 + e^{-kappa})
        let lb = lower_bound_strong(&[1.0], &s);
        assert!((lb - 0.642_895_135_086_642_4).abs() < 1e-12, "got {lb}");
        // K=2 with weighted SNRs (1,2): log2(1 + 3e^{-kappa})
        let s2 = scenario(&[1.0, 2.0], 1.0, 1.0, 1.0);
        let lb = lower_bound_strong(&[1.0, 1.0], &s2);
        assert!((lb - 1.424_588_080_800_306_7).abs() < 1e-12, "got {lb}");
    }

    #[test]
    fn iid_lower_bound_hand_values() {
        // K=1 reduces to the non-iid form
        let v = lower_bound_strong_iid(1.0, 1.0, 1, 1.0);
        assert!((v - 0.642_895_135_086_642_4).abs() < 1e-12);
        // K=3: log2(1 + exp(1.5 - kappa))
        let v = lower_bound_strong_iid(1.0, 1.0, 3, 1.0);
        assert!((v - 1.814_052_758_961_315_3).abs() < 1e-12, "got {v}");
        // K=2: log2(1 + exp(1 - kappa))
        let v = lower_bound_strong_iid(1.0, 1.0, 2, 1.0);
        assert!((v - 1.336_971_781_432_955_8).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn harmonic_factor_dominates_noniid_for_iid_inputs() {
        // exp(H_{K-1}) >= K makes the iid bound at least the non-iid one.
        for k in 1..=50 {
            let s = scenario(&vec![1.0; k], 1.0, 1.0, 1.0);
            let powers = vec![0.8; k];
            let noniid = lower_bound_strong(&powers, &s);
            let iid = lower_bound_strong_iid(0.8, 1.0, k, 1.0);
            if k == 1 {
                assert!((iid - noniid).abs() < 1e-14);
            } else {
                assert!(iid > noniid, "K={k}: iid {iid} <= non-iid {noniid}");
            }
        }
    }

    #[test]
    fn medium_report_hand_values() {
        // Rp = 1, P0*var_hp/Ns = 1, sum P*var_h/Ns = 1
        let s = scenario(&[1.0], 1.0, 1.0, 1.0);
        let rep = bounds_medium(&[1.0], &s);
        assert_eq!(rep.regime, OicRegime::Medium);
        assert!((rep.upper - 0.584_962_500_721_156_2).abs() < 1e-12, "upper {}", rep.upper);
        assert!((rep.lower - 0.086_049_303_911_493_8).abs() < 1e-12, "lower {}", rep.lower);
        assert!(rep.lower <= rep.upper);
    }

    #[test]
    fn medium_report_clamps_at_zero() {
        let mut s = scenario(&[1.0], 1.0, 1.0, 1.0);
        s.primary.var_hp = 0.0;
        let rep = bounds_medium(&[0.0], &s);
        assert_eq!(rep.upper, 0.0);
        assert_eq!(rep.lower, 0.0);
    }

    #[test]
    fn medium_lower_never_exceeds_upper() {
        for rp in [0.5, 1.0, 2.0] {
            for snr_hp in [0.0, 0.5, 2.0] {
                for p in [0.0, 0.3, 1.0, 10.0] {
                    let mut s = scenario(&[1.0], 1.0, 1.0, rp);
                    s.primary.var_hp = snr_hp;
                    let rep = bounds_medium(&[p], &s);
                    assert!(rep.lower <= rep.upper + 1e-15);
                }
            }
        }
    }

    #[test]
    fn weak_upper_hand_value() {
        // var_hp = 1, c_p = 1 (P0 = Ns, Rp = 1), sum P*var_h/Ns = 1:
        // log2(1 + 1/(1 + (1 - 2/e)))
        let s = scenario(&[1.0], 1.0, 1.0, 1.0);
        let v = upper_bound_weak(&[1.0], &s);
        assert!((v - 0.840_755_955_695_350_0).abs() < 1e-12, "got {v}");
        assert_eq!(upper_bound_weak(&[0.0], &s), 0.0);
    }

    #[test]
    fn weak_upper_reduces_to_strong_as_primary_power_vanishes() {
        let s = scenario(&[1.0], 1e-12, 1.0, 1.0);
        let weak = upper_bound_weak(&[1.0], &s);
        let strong = upper_bound_strong(&[1.0], &s);
        assert!((weak - strong).abs() < 1e-10, "{weak} vs {strong}");
    }

    #[test]
    fn weak_approx_hand_values() {
        let s = scenario(&[1.0], 1.0, 1.0, 1.0);
        let v = approx_lower_weak(&[1.0], &s, false).unwrap();
        assert!((v - 0.530_178_553_101_862_3).abs() < 1e-12, "got {v}");
        assert_eq!(approx_lower_weak(&[0.0], &s, false).unwrap(), 0.0);
    }

    #[test]
    fn weak_iid_approx_exceeds_noniid() {
        let s = scenario(&[1.0, 1.0, 1.0], 1.0, 1.0, 1.0);
        let powers = [0.7, 0.7, 0.7];
        let noniid = approx_lower_weak(&powers, &s, false).unwrap();
        let iid = approx_lower_weak(&powers, &s, true).unwrap();
        assert!(iid > noniid, "iid {iid} <= non-iid {noniid}");
    }

    #[test]
    fn weak_iid_flag_rejects_heterogeneous_users() {
        let s = scenario(&[1.0, 2.0], 1.0, 1.0, 1.0);
        assert!(matches!(
            approx_lower_weak(&[1.0, 1.0], &s, true),
            Err(BoundsError::HeterogeneousUsers { .. })
        ));
        let s = scenario(&[1.0, 1.0], 1.0, 1.0, 1.0);
        assert!(matches!(
            approx_lower_weak(&[1.0, 2.0], &s, true),
            Err(BoundsError::HeterogeneousUsers { .. })
        ));
    }

    #[test]
    fn weak_upper_dominates_weak_approx() {
        for p in [0.1, 1.0, 5.0, 50.0] {
            for k in [1usize, 3] {
                let s = scenario(&vec![1.0; k], 1.0, 1.0, 1.0);
                let powers = vec![p; k];
                let upper = upper_bound_weak(&powers, &s);
                let lo = approx_lower_weak(&powers, &s, false).unwrap();
                let lo_iid = approx_lower_weak(&powers, &s, true).unwrap();
                assert!(lo <= upper + 1e-15);
                assert!(lo_iid <= upper + 1e-15);
            }
        }
    }

    #[test]
    fn all_bounds_nondecreasing_in_power() {
        let s = scenario(&[1.0, 2.0], 1.0, 1.0, 1.0);
        let grid = [0.0, 0.2, 0.5, 1.0, 3.0, 9.0];
        let evals: Vec<[f64; 4]> = grid
            .iter()
            .map(|&p| {
                let powers = [p, p];
                [
                    upper_bound_strong(&powers, &s),
                    lower_bound_strong(&powers, &s),
                    bounds_medium(&powers, &s).upper,
                    upper_bound_weak(&powers, &s),
                ]
            })
            .collect();
        for w in evals.windows(2) {
            for i in 0..4 {
                assert!(w[1][i] >= w[0][i] - 1e-15, "bound {i} decreased");
            }
        }
    }
}
