//! Link-level analysis of a cognitive multiuser uplink coexisting with a
//! single primary pair under an outage margin.
//!
//! The crate pairs every closed form with an independent stochastic or
//! brute-force check:
//!
//! * [`outage`] — exact primary-outage probability under secondary
//!   interference, validated by the seeded estimators in [`montecarlo`];
//! * [`oic`] — instantaneous sum rates with opportunistic interference
//!   cancelation across the weak/medium/strong regimes;
//! * [`bounds`] — ergodic-rate upper/lower bounds and the weak-interference
//!   approximations;
//! * [`power`] — outage-constrained power allocation via the KKT fixed point,
//!   cross-checked by a log-grid brute-force maximizer;
//! * [`experiment`] — the sweep runner behind the CLI, emitting reproducible
//!   CSV datasets.
//!
//! All quantities are linear (watts, probabilities, bits/s/Hz); decibels are
//! converted at the file and CLI boundaries only.

pub mod bounds;
pub mod experiment;
pub mod montecarlo;
pub mod oic;
pub mod outage;
pub mod power;
pub mod scenario;

pub use oic::{GainSample, OicRegime, RatePair};
pub use power::{CsiMode, PowerAllocation, SolveStatus, SolverOptions};
pub use scenario::{
    load_scenario, save_scenario, DerivedConstants, PrimaryConfig, Scenario, ScenarioError,
    SecondaryUser,
};
