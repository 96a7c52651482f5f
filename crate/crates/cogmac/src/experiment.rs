//! Experiment runner behind the CLI: parameter sweeps over a scenario, CSV
//! emission with a provenance fingerprint, and the per-experiment row logic.
//!
//! Every dataset is a pure function of `(spec, seed)` and reproduces
//! byte-identically; per-row Monte Carlo seeds derive from the spec seed and
//! the row index.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bounds::{
    approx_lower_weak, lower_bound_strong, lower_bound_strong_iid, upper_bound_strong,
    upper_bound_weak,
};
use crate::montecarlo::{estimate_ergodic_rate, estimate_outage, Convention};
use crate::oic::OicRegime;
use crate::outage::{baseline_outage, outage_probability};
use crate::power::{allocate, CsiMode, PowerAllocation, SolveStatus, SolverOptions};
use crate::scenario::{load_scenario, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Power(#[from] crate::power::PowerError),
    #[error(transparent)]
    MonteCarlo(#[from] crate::montecarlo::McError),
    #[error("bad sweep expression `{expr}`: {reason}")]
    BadSweep { expr: String, reason: String },
    #[error("sweep parameter `{param}` is not valid here; expected {expected}")]
    UnknownParam { param: String, expected: &'static str },
    #[error("sweep must cover at least 2 points, got {points}")]
    TooFewPoints { points: usize },
    #[error("slope fit needs the sweep to cover [40, 60] dB, got [{start}, {stop}]")]
    SlopeRangeTooNarrow { start: f64, stop: f64 },
    #[error("slope fit found {points} usable rows (secondary off elsewhere); need at least 2")]
    NoFittablePoints { points: usize },
    #[error("weak-regime bounds need iid users (the lower approximations require a common var_h)")]
    NonIidUsers,
}

/// Scale of a sweep axis: dB steps converted per point, or already linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScale {
    Db,
    Lin,
}

/// A swept parameter: `<param>=<start>:<stop>:<step><db|lin>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub scale: SweepScale,
}

impl SweepAxis {
    /// Parse the CLI sweep grammar, e.g. `snr_p=0:40:2db` or `ratio=1:9:0.5lin`.
    pub fn parse(expr: &str) -> Result<Self, ExperimentError> {
        let bad = |reason: &str| ExperimentError::BadSweep {
            expr: expr.to_string(),
            reason: reason.to_string(),
        };
        let (param, rest) = expr.split_once('=').ok_or_else(|| bad("missing `=`"))?;
        if param.is_empty() {
            return Err(bad("missing parameter name"));
        }
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected <start>:<stop>:<step><db|lin>"));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad("start is not a number"))?;
        let stop: f64 = parts[1].parse().map_err(|_| bad("stop is not a number"))?;
        let (step_text, scale) = if let Some(t) = parts[2].strip_suffix("db") {
            (t, SweepScale::Db)
        } else if let Some(t) = parts[2].strip_suffix("lin") {
            (t, SweepScale::Lin)
        } else {
            return Err(bad("step must end in `db` or `lin`"));
        };
        let step: f64 = step_text.parse().map_err(|_| bad("step is not a number"))?;
        if !start.is_finite() || !stop.is_finite() || !step.is_finite() {
            return Err(bad("values must be finite"));
        }
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("stop must not be below start"));
        }
        let axis = SweepAxis {
            param: param.to_string(),
            start,
            stop,
            step,
            scale,
        };
        let points = axis.points().len();
        if points < 2 {
            return Err(ExperimentError::TooFewPoints { points });
        }
        Ok(axis)
    }

    /// Inclusive sweep points in the declared unit (dB values stay dB here;
    /// linear values derive on the fly at the point of use).
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u64;
        loop {
            let v = self.start + self.step * i as f64;
            if v > self.stop + 1e-9 * self.step {
                break;
            }
            out.push(v);
            i += 1;
        }
        out
    }

    /// The point converted to a linear factor.
    fn linear(&self, v: f64) -> f64 {
        match self.scale {
            SweepScale::Db => 10f64.powf(v / 10.0),
            SweepScale::Lin => v,
        }
    }
}

/// Experiment families the CLI exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    OutageSweep,
    BoundsSweep,
    AllocationSweep,
    SlopeFit,
}

impl ExperimentKind {
    fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OutageSweep => "outage",
            ExperimentKind::BoundsSweep => "bounds",
            ExperimentKind::AllocationSweep => "allocate",
            ExperimentKind::SlopeFit => "slope",
        }
    }
}

/// Which interference setting a bounds sweep reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsRegime {
    /// Primary interference decoded and removed; the Monte Carlo runs on the
    /// scenario with `var_hp` forced to zero, which evaluates the clean-MAC
    /// rate realization by realization.
    Strong,
    /// Primary treated as noise; Monte Carlo conditions on the weak regime.
    Weak,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario_path: String,
    pub sweep: SweepAxis,
    pub samples: u64,
    pub seed: u64,
    /// Only consulted by bounds sweeps.
    pub regime: BoundsRegime,
}

/// A rendered dataset: one fixed column set plus rows of already-formatted
/// fields, with the provenance line up front.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub subcommand: &'static str,
    pub fingerprint: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key=value` lines appended after the data (e.g. the fitted slope).
    pub footer: Vec<(String, String)>,
}

impl CsvDataset {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# cogmac {} fingerprint={} seed={}",
            self.subcommand, self.fingerprint, self.seed
        );
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        for (k, v) in &self.footer {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn fingerprint(spec: &ExperimentSpec, scenario: &Scenario) -> String {
    let canonical = format!(
        "{}|{}|{}={}:{}:{}{}|samples={}|seed={}|regime={}",
        spec.kind.name(),
        scenario.to_json_string(),
        spec.sweep.param,
        spec.sweep.start,
        spec.sweep.stop,
        spec.sweep.step,
        match spec.sweep.scale {
            SweepScale::Db => "db",
            SweepScale::Lin => "lin",
        },
        spec.samples,
        spec.seed,
        match spec.regime {
            BoundsRegime::Strong => "strong",
            BoundsRegime::Weak => "weak",
        },
    );
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn expect_param(axis: &SweepAxis, expected: &'static str) -> Result<(), ExperimentError> {
    if axis.param == expected {
        Ok(())
    } else {
        Err(ExperimentError::UnknownParam {
            param: axis.param.clone(),
            expected,
        })
    }
}

/// Dispatch an experiment spec to its runner.
pub fn run(spec: &ExperimentSpec) -> Result<CsvDataset, ExperimentError> {
    match spec.kind {
        ExperimentKind::OutageSweep => cmd_outage(spec),
        ExperimentKind::BoundsSweep => cmd_bounds(spec),
        ExperimentKind::AllocationSweep => cmd_allocate(spec),
        ExperimentKind::SlopeFit => cmd_slope(spec).map(|(d, _)| d),
    }
}

/// Outage sweep over the ratio between the primary SNR and the aggregate
/// secondary interference SNR at the primary receiver. Each row compares the
/// closed form against a fresh Monte Carlo estimate, with the
/// interference-free outage as the reference asymptote.
pub fn cmd_outage(spec: &ExperimentSpec) -> Result<CsvDataset, ExperimentError> {
    expect_param(&spec.sweep, "snr_ratio")?;
    let s = load_scenario(&spec.scenario_path)?;
    let rho0 = baseline_outage(&s);
    let snr_p = s.snr_p();
    let mut rows = Vec::new();
    for (i, v) in spec.sweep.points().into_iter().enumerate() {
        let ratio = spec.sweep.linear(v);
        let snr_sp_total = snr_p / ratio;
        // equal received-interference split across users
        let powers: Vec<f64> = s
            .users
            .iter()
            .map(|u| snr_sp_total * s.primary.noise_np / (s.k() as f64 * u.var_g))
            .collect();
        let closed = outage_probability(&powers, &s);
        let est = estimate_outage(&powers, &s, spec.samples, spec.seed.wrapping_add(i as u64));
        rows.push(vec![
            fmt(v),
            fmt(closed),
            fmt(est.mean),
            fmt(est.std_error),
            fmt(rho0),
        ]);
    }
    Ok(CsvDataset {
        subcommand: "outage",
        fingerprint: fingerprint(spec, &s),
        seed: spec.seed,
        columns: ["sweep_value", "closed_form", "mc_estimate", "mc_stderr", "rho0"]
            .map(String::from)
            .to_vec(),
        rows,
        footer: Vec::new(),
    })
}

/// Ergodic-rate bounds sweep over the per-user transmit SNR. Strong-regime
/// rows carry the true sandwich bounds; weak-regime rows carry the upper form
/// and the two lower approximations, with the Monte Carlo conditioned on the
/// weak regime. `gap` is the Monte Carlo rate minus the tightest reported
/// lower value.
pub fn cmd_bounds(spec: &ExperimentSpec) -> Result<CsvDataset, ExperimentError> {
    expect_param(&spec.sweep, "snr_s")?;
    let s = load_scenario(&spec.scenario_path)?;
    let var_h0 = s.users[0].var_h;
    let iid = s.users.iter().all(|u| u.var_h == var_h0);
    if matches!(spec.regime, BoundsRegime::Weak) && !iid {
        return Err(ExperimentError::NonIidUsers);
    }
    let mc_scenario = match spec.regime {
        BoundsRegime::Strong => {
            let mut c = s.clone();
            c.primary.var_hp = 0.0;
            c
        }
        BoundsRegime::Weak => s.clone(),
    };
    let mut rows = Vec::new();
    for (i, v) in spec.sweep.points().into_iter().enumerate() {
        let p = spec.sweep.linear(v) * s.noise_ns;
        let powers = vec![p; s.k()];
        let row_seed = spec.seed.wrapping_add(i as u64);
        let (est, upper, lower_noniid, lower_iid) = match spec.regime {
            BoundsRegime::Strong => {
                let est = estimate_ergodic_rate(
                    &powers,
                    &mc_scenario,
                    spec.samples,
                    row_seed,
                    None,
                    Convention::Restricted,
                )?;
                let upper = upper_bound_strong(&powers, &s);
                let lower = lower_bound_strong(&powers, &s);
                let lower_iid = iid.then(|| lower_bound_strong_iid(p, var_h0, s.k(), s.noise_ns));
                (est, upper, lower, lower_iid)
            }
            BoundsRegime::Weak => {
                let est = estimate_ergodic_rate(
                    &powers,
                    &mc_scenario,
                    spec.samples,
                    row_seed,
                    Some(OicRegime::Weak),
                    Convention::Conditional,
                )?;
                let upper = upper_bound_weak(&powers, &s);
                let lower = approx_lower_weak(&powers, &s, false).expect("non-iid form is total");
                let lower_iid = approx_lower_weak(&powers, &s, true)
                    .expect("users checked iid above");
                (est, upper, lower, Some(lower_iid))
            }
        };
        let tightest_lower = lower_iid.unwrap_or(lower_noniid);
        rows.push(vec![
            fmt(v),
            fmt(est.mean),
            fmt(est.std_error),
            fmt(upper),
            fmt(lower_noniid),
            lower_iid.map(fmt).unwrap_or_default(),
            fmt(est.mean - tightest_lower),
        ]);
    }
    Ok(CsvDataset {
        subcommand: "bounds",
        fingerprint: fingerprint(spec, &s),
        seed: spec.seed,
        columns: [
            "snr_db",
            "mc_rate",
            "mc_stderr",
            "upper",
            "lower_noniid",
            "lower_iid",
            "gap",
        ]
        .map(String::from)
        .to_vec(),
        rows,
        footer: Vec::new(),
    })
}

fn scenario_at_snr_p(s: &Scenario, snr_p_lin: f64) -> Scenario {
    let mut out = s.clone();
    out.primary.power_p0 = snr_p_lin * s.primary.noise_np / s.primary.var_gp;
    out
}

/// Power-allocation sweep over the average primary SNR. Each row solves the
/// outage-constrained allocation and reports the powers, the objective, and
/// the achieved outage.
pub fn cmd_allocate(spec: &ExperimentSpec) -> Result<CsvDataset, ExperimentError> {
    expect_param(&spec.sweep, "snr_p")?;
    let s = load_scenario(&spec.scenario_path)?;
    let opts = SolverOptions::default();
    let mut rows = Vec::new();
    for v in spec.sweep.points() {
        let at = scenario_at_snr_p(&s, spec.sweep.linear(v));
        let alloc: PowerAllocation = allocate(&at, &opts, CsiMode::Statistical)?;
        let outage_check = outage_probability(&alloc.powers, &at);
        let mut row = vec![fmt(v)];
        row.extend(alloc.powers.iter().map(|p| fmt(*p)));
        row.push(fmt(alloc.objective));
        row.push(fmt(outage_check));
        row.push(alloc.status.to_string());
        rows.push(row);
    }
    let mut columns = vec!["snr_p_db".to_string()];
    columns.extend((1..=s.k()).map(|i| format!("power_{i}")));
    columns.extend(["objective_bits", "outage_check", "status"].map(String::from));
    Ok(CsvDataset {
        subcommand: "allocate",
        fingerprint: fingerprint(spec, &s),
        seed: spec.seed,
        columns,
        rows,
        footer: Vec::new(),
    })
}

/// High-SNR slope fit: least-squares slope of the allocation objective against
/// the primary SNR in dB, over the rows where the secondary is on. The sweep
/// must cover [40, 60] dB.
pub fn cmd_slope(spec: &ExperimentSpec) -> Result<(CsvDataset, f64), ExperimentError> {
    expect_param(&spec.sweep, "snr_p")?;
    if spec.sweep.scale != SweepScale::Db
        || spec.sweep.start > 40.0 + 1e-12
        || spec.sweep.stop < 60.0 - 1e-12
    {
        return Err(ExperimentError::SlopeRangeTooNarrow {
            start: spec.sweep.start,
            stop: spec.sweep.stop,
        });
    }
    let s = load_scenario(&spec.scenario_path)?;
    let opts = SolverOptions::default();
    let mut rows = Vec::new();
    let mut fit: Vec<(f64, f64)> = Vec::new();
    for v in spec.sweep.points() {
        let at = scenario_at_snr_p(&s, spec.sweep.linear(v));
        let alloc = allocate(&at, &opts, CsiMode::Statistical)?;
        if alloc.status != SolveStatus::SecondaryOff {
            fit.push((v, alloc.objective));
        }
        rows.push(vec![fmt(v), fmt(alloc.objective), alloc.status.to_string()]);
    }
    if fit.len() < 2 {
        return Err(ExperimentError::NoFittablePoints { points: fit.len() });
    }
    let n = fit.len() as f64;
    let mean_x = fit.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = fit.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = fit.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = fit.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let slope = sxy / sxx;
    let dataset = CsvDataset {
        subcommand: "slope",
        fingerprint: fingerprint(spec, &s),
        seed: spec.seed,
        columns: ["snr_p_db", "objective_bits", "status"].map(String::from).to_vec(),
        rows,
        footer: vec![("slope".to_string(), fmt(slope))],
    };
    Ok((dataset, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_scenario(json: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(json.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn spec(kind: ExperimentKind, path: &str, sweep: &str) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            scenario_path: path.to_string(),
            sweep: SweepAxis::parse(sweep).unwrap(),
            samples: 20_000,
            seed: 7,
            regime: BoundsRegime::Strong,
        }
    }

    fn outage_scenario(k: usize) -> String {
        let users: Vec<String> = (0..k)
            .map(|_| r#"{"var_h": 1.0, "var_g": 1.0}"#.to_string())
            .collect();
        format!(
            r#"{{"primary": {{"snr_p_db": 10.0, "rate_rp": 1.0}},
                "noise_ns": 1.0, "outage_margin": 0.1,
                "users": [{}]}}"#,
            users.join(",")
        )
    }

    #[test]
    fn sweep_parse_accepts_both_scales() {
        let a = SweepAxis::parse("snr_p=0:40:2db").unwrap();
        assert_eq!(a.param, "snr_p");
        assert_eq!(a.scale, SweepScale::Db);
        assert_eq!(a.points().len(), 21);
        let a = SweepAxis::parse("ratio=1:9:0.5lin").unwrap();
        assert_eq!(a.scale, SweepScale::Lin);
        assert_eq!(a.points().len(), 17);
    }

    #[test]
    fn sweep_parse_rejects_malformed_expressions() {
        for expr in [
            "snr_p",
            "snr_p=0:40",
            "snr_p=0:40:2",
            "snr_p=0:40:2miles",
            "snr_p=a:40:2db",
            "snr_p=0:40:0db",
            "snr_p=40:0:2db",
            "=0:40:2db",
            "snr_p=0:40:-1db",
        ] {
            assert!(SweepAxis::parse(expr).is_err(), "`{expr}` should fail");
        }
        // a single-point sweep violates the two-point minimum
        assert!(matches!(
            SweepAxis::parse("snr_p=0:1:2db"),
            Err(ExperimentError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn sweep_points_step_in_exact_decimals() {
        let a = SweepAxis::parse("snr_p=0:1:0.1db").unwrap();
        let pts = a.points();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 1.0000000000000002_f64.min(1.0).max(0.9999999999999999));
    }

    #[test]
    fn outage_rows_match_closed_form_within_ci() {
        let f = write_scenario(&outage_scenario(1));
        let sp = spec(
            ExperimentKind::OutageSweep,
            f.path().to_str().unwrap(),
            "snr_ratio=0:40:5db",
        );
        let ds = cmd_outage(&sp).unwrap();
        assert_eq!(ds.rows.len(), 9);
        for row in &ds.rows {
            let closed: f64 = row[1].parse().unwrap();
            let mc: f64 = row[2].parse().unwrap();
            let se: f64 = row[3].parse().unwrap();
            assert!(
                (closed - mc).abs() < 3.0 * se.max(1e-4),
                "row {row:?} outside CI"
            );
        }
        // asymptote: at a 40 dB ratio the closed form sits on rho0
        let last = ds.rows.last().unwrap();
        let closed: f64 = last[1].parse().unwrap();
        let rho0: f64 = last[4].parse().unwrap();
        assert!(closed - rho0 < 1e-3 && closed >= rho0);
    }

    #[test]
    fn outage_insensitive_to_user_count() {
        // identical aggregate interference split across 1 vs 5 users moves the
        // closed form by well under 0.02
        let f1 = write_scenario(&outage_scenario(1));
        let f5 = write_scenario(&outage_scenario(5));
        let mk = |p: &str| {
            spec(ExperimentKind::OutageSweep, p, "snr_ratio=10:40:10db")
        };
        let d1 = cmd_outage(&mk(f1.path().to_str().unwrap())).unwrap();
        let d5 = cmd_outage(&mk(f5.path().to_str().unwrap())).unwrap();
        for (r1, r5) in d1.rows.iter().zip(&d5.rows) {
            let c1: f64 = r1[1].parse().unwrap();
            let c5: f64 = r5[1].parse().unwrap();
            assert!((c1 - c5).abs() < 0.02, "K sensitivity {c1} vs {c5}");
        }
    }

    #[test]
    fn bounds_strong_rows_sandwich_the_estimate() {
        let f = write_scenario(&outage_scenario(3));
        let sp = spec(
            ExperimentKind::BoundsSweep,
            f.path().to_str().unwrap(),
            "snr_s=0:20:5db",
        );
        let ds = cmd_bounds(&sp).unwrap();
        for row in &ds.rows {
            let mc: f64 = row[1].parse().unwrap();
            let se: f64 = row[2].parse().unwrap();
            let upper: f64 = row[3].parse().unwrap();
            let lower: f64 = row[4].parse().unwrap();
            let lower_iid: f64 = row[5].parse().unwrap();
            assert!(lower <= mc + 3.0 * se, "lower {lower} above mc {mc}");
            assert!(mc - 3.0 * se <= upper, "mc {mc} above upper {upper}");
            assert!(lower_iid >= lower, "iid bound below non-iid");
            let gap: f64 = row[6].parse().unwrap();
            assert!((gap - (mc - lower_iid)).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_weak_rows_match_reference_setup() {
        // received primary SNR of 0 dB at the secondary BS, iid users
        let f = write_scenario(&outage_scenario(1));
        let mut sp = spec(
            ExperimentKind::BoundsSweep,
            f.path().to_str().unwrap(),
            "snr_s=0:10:5db",
        );
        sp.regime = BoundsRegime::Weak;
        sp.samples = 40_000;
        let ds = cmd_bounds(&sp).unwrap();
        for row in &ds.rows {
            let mc: f64 = row[1].parse().unwrap();
            let se: f64 = row[2].parse().unwrap();
            let upper: f64 = row[3].parse().unwrap();
            let lower: f64 = row[4].parse().unwrap();
            let lower_iid: f64 = row[5].parse().unwrap();
            // the upper form holds at this operating point; the lower values
            // are approximations and are reported, not asserted
            assert!(mc - 3.0 * se <= upper, "mc {mc} above upper {upper}");
            assert!(lower_iid >= lower - 1e-12);
        }
    }

    fn allocation_scenario() -> String {
        // var_h/var_g = 8, margin 1e-2, unit noises
        r#"{"primary": {"snr_p_db": 25.0, "rate_rp": 1.0, "noise_np": 1.5},
            "noise_ns": 1.0, "outage_margin": 0.01,
            "users": [{"var_h": 8.0, "var_g": 1.0}]}"#
            .to_string()
    }

    #[test]
    fn allocate_rows_pin_outage_to_margin() {
        let f = write_scenario(&allocation_scenario());
        let sp = spec(
            ExperimentKind::AllocationSweep,
            f.path().to_str().unwrap(),
            "snr_p=10:30:1db",
        );
        let ds = cmd_allocate(&sp).unwrap();
        let mut saw_on = false;
        for row in &ds.rows {
            let status = row.last().unwrap();
            if status == "converged" {
                saw_on = true;
                let outage: f64 = row[row.len() - 2].parse().unwrap();
                assert!((outage - 0.01).abs() < 1e-9, "outage {outage} off margin");
            } else {
                assert_eq!(status, "secondary_off");
                let p: f64 = row[1].parse().unwrap();
                assert_eq!(p, 0.0);
            }
        }
        assert!(saw_on, "no converged rows in sweep");
    }

    #[test]
    fn slope_fit_matches_decade_constant() {
        let f = write_scenario(&allocation_scenario());
        let sp = spec(
            ExperimentKind::SlopeFit,
            f.path().to_str().unwrap(),
            "snr_p=40:60:1db",
        );
        let (_, slope) = cmd_slope(&sp).unwrap();
        assert!(
            (slope - 0.332_192_809_488_736_2).abs() < 0.01,
            "slope {slope}"
        );
    }

    #[test]
    fn slope_requires_covering_range() {
        let f = write_scenario(&allocation_scenario());
        let sp = spec(
            ExperimentKind::SlopeFit,
            f.path().to_str().unwrap(),
            "snr_p=45:60:1db",
        );
        assert!(matches!(
            cmd_slope(&sp),
            Err(ExperimentError::SlopeRangeTooNarrow { .. })
        ));
    }

    #[test]
    fn slope_errors_when_secondary_always_off() {
        // margin far below the baseline outage in the whole range
        let json = r#"{"primary": {"snr_p_db": 25.0, "rate_rp": 6.0},
            "noise_ns": 1.0, "outage_margin": 0.0001,
            "users": [{"var_h": 8.0, "var_g": 1.0}]}"#;
        let f = write_scenario(json);
        let mut sp = spec(
            ExperimentKind::SlopeFit,
            f.path().to_str().unwrap(),
            "snr_p=40:60:5db",
        );
        sp.sweep = SweepAxis::parse("snr_p=40:60:5db").unwrap();
        let err = cmd_slope(&sp).unwrap_err();
        assert!(matches!(err, ExperimentError::NoFittablePoints { .. }), "{err}");
    }

    #[test]
    fn datasets_render_byte_identically() {
        let f = write_scenario(&outage_scenario(2));
        let sp = spec(
            ExperimentKind::OutageSweep,
            f.path().to_str().unwrap(),
            "snr_ratio=0:20:5db",
        );
        let a = run(&sp).unwrap().to_csv_string();
        let b = run(&sp).unwrap().to_csv_string();
        assert_eq!(a, b);
        assert!(a.starts_with("# cogmac outage fingerprint="));
        // a different seed must change the fingerprint line
        let mut sp2 = spec(
            ExperimentKind::OutageSweep,
            f.path().to_str().unwrap(),
            "snr_ratio=0:20:5db",
        );
        sp2.seed = 8;
        let c = run(&sp2).unwrap().to_csv_string();
        assert_ne!(a.lines().next(), c.lines().next());
    }

    #[test]
    fn wrong_sweep_param_is_rejected() {
        let f = write_scenario(&outage_scenario(1));
        let sp = spec(
            ExperimentKind::OutageSweep,
            f.path().to_str().unwrap(),
            "snr_p=0:20:5db",
        );
        assert!(matches!(
            cmd_outage(&sp),
            Err(ExperimentError::UnknownParam { .. })
        ));
    }
}
