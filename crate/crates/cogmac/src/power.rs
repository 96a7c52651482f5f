//! Outage-constrained sum-rate power allocation for the secondary uplink.
//!
//! The KKT conditions of the allocation problem link every companion power to
//! the pivot user's power through `F_j`, and close the system with the scalar
//! fixed point `P_1 = G(P_1)` that keeps the primary outage pinned at the
//! margin. The solver iterates that fixed point with adaptive damping; user 0
//! is the pivot throughout, matching the user ordering of the scenario file.
//!
//! A brute-force log-grid maximizer over the feasible box is provided as an
//! independent reference; solver and oracle are deliberately separate routes
//! to the same problem.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::oic::log2;
use crate::outage::{coexistence_feasible, outage_probability};
use crate::scenario::Scenario;

/// Feasibility slack for the grid oracle, absorbing last-ulp rounding of
/// points that sit exactly on the outage boundary.
const GRID_FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("user {user} has no inst_h_sq but instantaneous-CSI mode was requested")]
    MissingInstantaneousGain { user: usize },
    #[error("user {user} has no power_cap but the capped solver was requested")]
    MissingPowerCap { user: usize },
    #[error("closed form requires identical users: {detail}")]
    HeterogeneousUsers { detail: String },
    #[error("grid oracle supports at most 3 users, scenario has {k}")]
    GridTooManyUsers { k: usize },
    #[error("companion index must lie in 1..{k}, got {index}")]
    NotACompanion { index: usize, k: usize },
}

/// Which channel knowledge drives the objective weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Only uplink statistics are known; ergodic-rate lower bound objective.
    Statistical,
    /// Instantaneous uplink magnitudes are known; instantaneous rate objective.
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    SecondaryOff,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Converged => write!(f, "converged"),
            SolveStatus::MaxIterations => write!(f, "max_iterations"),
            SolveStatus::SecondaryOff => write!(f, "secondary_off"),
        }
    }
}

/// A solved power vector plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Nonnegative per-user powers, linear watts.
    pub powers: Vec<f64>,
    pub status: SolveStatus,
    /// Fixed-point iterations (or grid evaluations for the oracle).
    pub iterations: u64,
    /// Value of the outage constraint `f` at the solution; negative is slack.
    pub constraint_residual: f64,
    /// Objective value in bits/s/Hz.
    pub objective: f64,
    /// KKT multiplier diagnostic, absent when the secondary is off.
    pub lagrange_lambda: Option<f64>,
}

/// Fixed-point solver knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative convergence threshold on the pivot map residual and bound on
    /// the accepted |f|.
    pub tolerance: f64,
    pub max_iterations: u64,
    /// Initial step factor in (0, 1]; halved automatically on oscillation.
    pub damping: f64,
    /// When set, the pivot is initialized uniformly at random inside its
    /// bracket instead of at the midpoint.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 200,
            damping: 1.0,
            seed: None,
        }
    }
}

/// Outage constraint `f(P) = outage_probability(P) - rho_m`; feasible iff <= 0.
pub fn constraint_f(powers: &[f64], s: &Scenario) -> f64 {
    outage_probability(powers, s) - s.outage_margin
}

/// Mode-resolved KKT coefficients.
struct Kkt {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    /// `(1 - rho_m)^{-1} * zeta`, the product budget on `1 + beta_k P_k`.
    budget: f64,
    rho_m: f64,
}

impl Kkt {
    fn new(s: &Scenario, mode: CsiMode) -> Result<Self, PowerError> {
        let d = s.derive_constants();
        let alpha = match mode {
            CsiMode::Statistical => d.alpha_stat,
            CsiMode::Instantaneous => s
                .users
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    u.inst_h_sq
                        .map(|h| h / s.noise_ns)
                        .ok_or(PowerError::MissingInstantaneousGain { user: i })
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(Kkt {
            beta: d.beta,
            alpha,
            budget: d.zeta / (1.0 - s.outage_margin),
            rho_m: s.outage_margin,
        })
    }

    fn k(&self) -> usize {
        self.beta.len()
    }

    /// Raw companion stationarity value, unclamped.
    fn companion_raw(&self, pivot: usize, j: usize, p1: f64) -> f64 {
        let ratio = self.beta[j] * self.alpha[pivot] / (self.beta[pivot] * self.alpha[j]);
        (ratio * (1.0 + p1 * self.beta[pivot]) - 1.0) / self.beta[j]
    }

    fn companion_clamped(&self, pivot: usize, j: usize, p1: f64, caps: Option<&[f64]>) -> f64 {
        let raw = self.companion_raw(pivot, j, p1).max(0.0);
        match caps {
            Some(c) => raw.min(c[j]),
            None => raw,
        }
    }

    /// Pivot map target: `[G(p1)]^+`, optionally capped, with the product over
    /// the active companions taken in the log domain.
    fn pivot_target(&self, active: &[bool], pivot: usize, p1: f64, caps: Option<&[f64]>) -> f64 {
        let mut log_prod = 0.0;
        for j in 0..self.k() {
            if j != pivot && active[j] {
                let pj = self.companion_clamped(pivot, j, p1, caps);
                log_prod += (self.beta[j] * pj).ln_1p();
            }
        }
        let g = (self.budget * (-log_prod).exp() - 1.0) / self.beta[pivot];
        let clamped = g.max(0.0);
        match caps {
            Some(c) => clamped.min(c[pivot]),
            None => clamped,
        }
    }

    fn powers_at(&self, active: &[bool], pivot: usize, p1: f64, caps: Option<&[f64]>) -> Vec<f64> {
        (0..self.k())
            .map(|j| {
                if j == pivot {
                    p1
                } else if active[j] {
                    self.companion_clamped(pivot, j, p1, caps)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn objective(&self, powers: &[f64]) -> f64 {
        let sum: f64 = powers.iter().zip(&self.alpha).map(|(p, a)| p * a).sum();
        log2(1.0 + sum)
    }

    /// KKT multiplier evaluated at the pivot's stationarity condition.
    fn lambda(&self, pivot: usize, powers: &[f64]) -> f64 {
        let sum: f64 = powers.iter().zip(&self.alpha).map(|(p, a)| p * a).sum();
        std::f64::consts::LOG2_E * (1.0 + powers[pivot] * self.beta[pivot]) * self.alpha[pivot]
            / (self.beta[pivot] * (1.0 - self.rho_m) * (1.0 + sum))
    }

    fn limits(&self, active: &[bool], pivot: usize) -> (f64, f64) {
        let p_max = (self.budget - 1.0) / self.beta[pivot];
        let p_min = (0..self.k())
            .filter(|&j| j != pivot && active[j])
            .map(|j| {
                (self.alpha[j] / (self.beta[j] * self.alpha[pivot]) - 1.0 / self.beta[pivot])
                    .max(0.0)
            })
            .fold(0.0f64, f64::max);
        (p_min, p_max)
    }
}

/// Companion power `[F_j(p1)]^+` for user `j >= 1` given the pivot power,
/// using statistical or instantaneous gain ratios per `mode`.
pub fn companion_power(
    j: usize,
    p1: f64,
    s: &Scenario,
    mode: CsiMode,
) -> Result<f64, PowerError> {
    if j == 0 || j >= s.k() {
        return Err(PowerError::NotACompanion { index: j, k: s.k() });
    }
    let kkt = Kkt::new(s, mode)?;
    Ok(kkt.companion_raw(0, j, p1).max(0.0))
}

/// One evaluation of the pivot fixed-point map `[G(p1)]^+` with every user
/// active and user 0 as pivot.
pub fn fixed_point_g(p1: f64, s: &Scenario, mode: CsiMode) -> Result<f64, PowerError> {
    let kkt = Kkt::new(s, mode)?;
    let active = vec![true; s.k()];
    Ok(kkt.pivot_target(&active, 0, p1, None))
}

/// Transmit-power limits for the pivot user: `p_max` from spending the whole
/// budget on user 0 (may be <= 0 when coexistence is infeasible) and the
/// clamped `p_min` below which some companion's stationarity value would go
/// negative.
pub fn power_limits(s: &Scenario, mode: CsiMode) -> Result<(f64, f64), PowerError> {
    let kkt = Kkt::new(s, mode)?;
    let active = vec![true; s.k()];
    let (p_min, p_max) = kkt.limits(&active, 0);
    Ok((p_min, p_max))
}

struct SupportSolve {
    p1: f64,
    converged: bool,
    iterations: u64,
}

fn solve_support(
    kkt: &Kkt,
    active: &[bool],
    pivot: usize,
    caps: Option<&[f64]>,
    opts: &SolverOptions,
) -> SupportSolve {
    let (p_min, p_max) = kkt.limits(active, pivot);
    let hi = match caps {
        Some(c) => c[pivot].min(p_max),
        None => p_max,
    };
    let lo = p_min.min(hi);
    let mut p1 = match opts.seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            lo + u * (hi - lo)
        }
        None => 0.5 * (lo + hi),
    };

    let n_active = active.iter().filter(|a| **a).count();
    let theta_floor = 0.125f64.min(1.0 / (n_active as f64 + 1.0));
    let mut theta = opts.damping.clamp(theta_floor, 1.0);
    let mut prev_residual = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let target = kkt.pivot_target(active, pivot, p1, caps);
        let residual = target - p1;
        if residual.abs() <= opts.tolerance * (1.0 + p1.abs()) {
            converged = true;
            break;
        }
        if residual * prev_residual < 0.0 {
            theta = (0.5 * theta).max(theta_floor);
        }
        prev_residual = residual;
        p1 += theta * residual;
    }
    // Sharpen to the rounding floor of the map so the answer's relative error
    // does not depend on the power scale; the damped map keeps contracting, so
    // the residual shrinks monotonically until it bottoms out.
    if converged {
        let mut best = f64::INFINITY;
        while iterations < opts.max_iterations {
            let target = kkt.pivot_target(active, pivot, p1, caps);
            let residual = target - p1;
            if residual == 0.0 || residual.abs() >= best {
                break;
            }
            iterations += 1;
            best = residual.abs();
            p1 += theta * residual;
        }
    }
    SupportSolve {
        p1,
        converged,
        iterations,
    }
}

fn off_allocation(s: &Scenario, kkt: &Kkt) -> PowerAllocation {
    let powers = vec![0.0; s.k()];
    let constraint_residual = constraint_f(&powers, s);
    let objective = kkt.objective(&powers);
    PowerAllocation {
        powers,
        status: SolveStatus::SecondaryOff,
        iterations: 0,
        constraint_residual,
        objective,
        lagrange_lambda: None,
    }
}

fn allocate_inner(
    s: &Scenario,
    opts: &SolverOptions,
    mode: CsiMode,
    caps: Option<&[f64]>,
) -> Result<PowerAllocation, PowerError> {
    let kkt = Kkt::new(s, mode)?;
    if !coexistence_feasible(s) {
        return Ok(off_allocation(s, &kkt));
    }
    let k = s.k();
    let pivot = 0;
    let mut active = vec![true; k];
    let mut total_iterations = 0u64;

    loop {
        let n_active = active.iter().filter(|a| **a).count();
        let (powers, converged) = if n_active == 1 {
            // single-user support has a closed form: the whole budget
            let (_, p_max) = kkt.limits(&active, pivot);
            let p = match caps {
                Some(c) => c[pivot].min(p_max),
                None => p_max,
            };
            total_iterations += 1;
            (kkt.powers_at(&active, pivot, p, caps), true)
        } else {
            let solve = solve_support(&kkt, &active, pivot, caps, opts);
            total_iterations += solve.iterations;
            (
                kkt.powers_at(&active, pivot, solve.p1, caps),
                solve.converged,
            )
        };

        let residual = constraint_f(&powers, s);
        let accepted = match caps {
            None => residual.abs() <= opts.tolerance,
            Some(_) => residual <= opts.tolerance,
        };
        if converged && accepted {
            let lambda = kkt.lambda(pivot, &powers);
            let objective = kkt.objective(&powers);
            return Ok(PowerAllocation {
                powers,
                status: SolveStatus::Converged,
                iterations: total_iterations,
                constraint_residual: residual,
                objective,
                lagrange_lambda: Some(lambda),
            });
        }

        // A pivot parked at zero with the constraint still violated means the
        // companion stationarity values overshoot the budget on their own.
        // Shrink the support by the companion with the worst objective weight
        // per unit of interference and resolve on the rest.
        let pivot_parked = powers[pivot] <= opts.tolerance * 16.0;
        if converged && residual > opts.tolerance && pivot_parked && n_active > 1 {
            let worst = (0..k)
                .filter(|&j| j != pivot && active[j])
                .min_by(|&a, &b| {
                    let ra = kkt.alpha[a] / kkt.beta[a];
                    let rb = kkt.alpha[b] / kkt.beta[b];
                    ra.partial_cmp(&rb).expect("finite KKT ratios")
                })
                .expect("at least one active companion");
            active[worst] = false;
            continue;
        }

        let objective = kkt.objective(&powers);
        return Ok(PowerAllocation {
            powers,
            status: SolveStatus::MaxIterations,
            iterations: total_iterations,
            constraint_residual: residual,
            objective,
            lagrange_lambda: None,
        });
    }
}

/// Sum-rate-maximizing power allocation under the primary outage margin.
///
/// Returns all-zero powers with [`SolveStatus::SecondaryOff`] when the margin
/// does not exceed the interference-free outage. Otherwise the converged
/// allocation holds the outage exactly at the margin.
pub fn allocate(
    s: &Scenario,
    opts: &SolverOptions,
    mode: CsiMode,
) -> Result<PowerAllocation, PowerError> {
    allocate_inner(s, opts, mode, None)
}

/// Power allocation with a per-user cap; every user must carry `power_cap`.
/// The outage boundary may be unreachable when caps bind, so the converged
/// residual is only required to be feasible (`f <= tolerance`).
pub fn allocate_capped(
    s: &Scenario,
    opts: &SolverOptions,
    mode: CsiMode,
) -> Result<PowerAllocation, PowerError> {
    let caps: Vec<f64> = s
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| u.power_cap.ok_or(PowerError::MissingPowerCap { user: i }))
        .collect::<Result<_, _>>()?;
    allocate_inner(s, opts, mode, Some(&caps))
}

/// Closed-form per-user power for fully symmetric users:
/// `(P0*var_gp/(var_g*gamma_th)) * [exp(-gamma_th*Np/(K*P0*var_gp)) * (1-rho_m)^{-1/K} - 1]`,
/// clamped at zero.
pub fn symmetric_closed_form(s: &Scenario) -> Result<f64, PowerError> {
    let var_h = s.users[0].var_h;
    let var_g = s.users[0].var_g;
    if s.users.iter().any(|u| u.var_h != var_h || u.var_g != var_g) {
        return Err(PowerError::HeterogeneousUsers {
            detail: "var_h or var_g differs across users".into(),
        });
    }
    let p = &s.primary;
    let gamma_th = p.rate_rp.exp2() - 1.0;
    let k = s.k() as f64;
    let growth = (-gamma_th * p.noise_np / (k * p.power_p0 * p.var_gp)).exp()
        * (1.0 - s.outage_margin).powf(-1.0 / k);
    Ok((p.power_p0 * p.var_gp / (var_g * gamma_th) * (growth - 1.0)).max(0.0))
}

/// Brute-force reference maximizer: exhaustively evaluates the objective over
/// a log-spaced grid on `[0, p_max]^K` intersected with the outage-feasible
/// set and returns the best point. Supports K <= 3.
///
/// `grid_points_per_axis` counts the log-spaced points; zero is always added,
/// so each axis has `grid_points_per_axis + 1` values. Ties resolve to the
/// lowest odometer index, so the result is independent of evaluation order.
pub fn grid_oracle(
    s: &Scenario,
    grid_points_per_axis: usize,
    mode: CsiMode,
) -> Result<PowerAllocation, PowerError> {
    let k = s.k();
    if k > 3 {
        return Err(PowerError::GridTooManyUsers { k });
    }
    let kkt = Kkt::new(s, mode)?;
    if !coexistence_feasible(s) {
        return Ok(off_allocation(s, &kkt));
    }
    let (_, p_max) = kkt.limits(&vec![true; k], 0);

    let n = grid_points_per_axis.max(2);
    let mut axis = Vec::with_capacity(n + 1);
    axis.push(0.0);
    let lo_ln = (p_max * 1e-6).ln();
    let hi_ln = p_max.ln();
    for i in 0..n {
        if i + 1 == n {
            axis.push(p_max);
        } else {
            let t = i as f64 / (n - 1) as f64;
            axis.push((lo_ln + t * (hi_ln - lo_ln)).exp());
        }
    }

    let mut idx = vec![0usize; k];
    let mut powers = vec![0.0; k];
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut evaluated = 0u64;
    loop {
        for (d, &i) in idx.iter().enumerate() {
            powers[d] = axis[i];
        }
        evaluated += 1;
        let f = constraint_f(&powers, s);
        if f <= GRID_FEAS_TOL {
            let obj = kkt.objective(&powers);
            let better = match &best {
                None => true,
                Some((best_obj, _, _)) => obj > *best_obj,
            };
            if better {
                best = Some((obj, powers.clone(), f));
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] <= n {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == k {
                let (objective, powers, constraint_residual) =
                    best.expect("the all-zero point is always feasible");
                return Ok(PowerAllocation {
                    powers,
                    status: SolveStatus::Converged,
                    iterations: evaluated,
                    constraint_residual,
                    objective,
                    lagrange_lambda: None,
                });
            }
        }
    }
}
