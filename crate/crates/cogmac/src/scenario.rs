//! Network parameterization: the primary link, the secondary users, the noise
//! powers and the outage margin, plus the constants every other module derives
//! from them.
//!
//! All values are stored in linear units. Decibel fields are accepted only at
//! the file boundary and converted on load; internal math never sees dB.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Euler-Mascheroni constant to double precision.
pub const EULER_KAPPA: f64 = 0.577_215_664_901_532_9;

/// Errors from loading, saving or validating a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read `{path}`: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write `{path}`: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: `{field}` {reason}")]
    Invalid { field: String, reason: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Primary-link parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryConfig {
    /// Transmit power of the primary terminal, linear watts.
    pub power_p0: f64,
    /// Fixed primary transmission rate, bits/s/Hz.
    pub rate_rp: f64,
    /// Noise variance at the primary base station, linear watts.
    pub noise_np: f64,
    /// Mean squared gain of the primary direct link.
    pub var_gp: f64,
    /// Mean squared gain of the primary-to-secondary-BS interference link.
    pub var_hp: f64,
}

/// One secondary (cognitive) uplink user.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryUser {
    /// Mean squared gain of the uplink to the secondary base station.
    pub var_h: f64,
    /// Mean squared gain of the interference link to the primary base station.
    pub var_g: f64,
    /// Optional per-user transmit power cap, linear watts.
    pub power_cap: Option<f64>,
    /// Optional instantaneous squared uplink gain, for instantaneous-CSI mode.
    pub inst_h_sq: Option<f64>,
}

/// Full network description: primary link, K secondary users, secondary-BS
/// noise and the tolerated primary outage probability.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub primary: PrimaryConfig,
    /// Ordered list of secondary users. The order is authoritative: index 0 is
    /// the pivot of the power-allocation iteration.
    pub users: Vec<SecondaryUser>,
    /// Noise variance at the secondary base station, linear watts.
    pub noise_ns: f64,
    /// Maximal allowed primary outage probability, in (0, 1).
    pub outage_margin: f64,
}

/// Constants precomputed from a [`Scenario`], used throughout the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    /// SINR threshold `2^rate_rp - 1`, linear.
    pub gamma_th: f64,
    /// No-interference primary success probability
    /// `exp(-gamma_th * noise_np / (power_p0 * var_gp))`.
    pub zeta: f64,
    /// Per-user interference load on the primary,
    /// `var_g * gamma_th / (power_p0 * var_gp)`, 1/W.
    pub beta: Vec<f64>,
    /// Per-user statistical objective weight, `var_h / (noise_ns * e^kappa)`, 1/W.
    pub alpha_stat: Vec<f64>,
    /// Decodability gain threshold `noise_ns * gamma_th / power_p0`.
    pub c_p: f64,
    /// Euler-Mascheroni constant used in `alpha_stat`.
    pub euler_kappa: f64,
}

impl Scenario {
    /// Build and validate a scenario from already-linear parts.
    pub fn new(
        primary: PrimaryConfig,
        users: Vec<SecondaryUser>,
        noise_ns: f64,
        outage_margin: f64,
    ) -> Result<Self, ScenarioError> {
        let s = Scenario {
            primary,
            users,
            noise_ns,
            outage_margin,
        };
        s.validate()?;
        Ok(s)
    }

    /// Number of secondary users K.
    pub fn k(&self) -> usize {
        self.users.len()
    }

    /// Average primary SNR `power_p0 * var_gp / noise_np`, linear.
    pub fn snr_p(&self) -> f64 {
        self.primary.power_p0 * self.primary.var_gp / self.primary.noise_np
    }

    /// Parse a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: ScenarioFile = serde_json::from_str(text)?;
        raw.resolve()
    }

    /// Parse a scenario from raw JSON bytes.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, ScenarioError> {
        let raw: ScenarioFile = serde_json::from_slice(bytes)?;
        raw.resolve()
    }

    /// Serialize in the file schema, all fields resolved to linear units.
    ///
    /// `load(save(s))` reproduces every numeric field bit-exactly for finite
    /// doubles.
    pub fn to_json_string(&self) -> String {
        let raw = ScenarioFile::from_scenario(self);
        serde_json::to_string_pretty(&raw).expect("scenario serialization cannot fail")
    }

    /// Derived constants for the closed forms; a pure function of the scenario.
    pub fn derive_constants(&self) -> DerivedConstants {
        let p = &self.primary;
        let gamma_th = p.rate_rp.exp2() - 1.0;
        let zeta = (-gamma_th * p.noise_np / (p.power_p0 * p.var_gp)).exp();
        let beta = self
            .users
            .iter()
            .map(|u| u.var_g * gamma_th / (p.power_p0 * p.var_gp))
            .collect();
        let alpha_stat = self
            .users
            .iter()
            .map(|u| u.var_h / (self.noise_ns * EULER_KAPPA.exp()))
            .collect();
        DerivedConstants {
            gamma_th,
            zeta,
            beta,
            alpha_stat,
            c_p: self.noise_ns * gamma_th / p.power_p0,
            euler_kappa: EULER_KAPPA,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let p = &self.primary;
        check_positive("primary.power_p0", p.power_p0)?;
        check_positive("primary.rate_rp", p.rate_rp)?;
        check_positive("primary.noise_np", p.noise_np)?;
        check_positive("primary.var_gp", p.var_gp)?;
        check_nonnegative("primary.var_hp", p.var_hp)?;
        check_positive("noise_ns", self.noise_ns)?;
        if !(self.outage_margin > 0.0 && self.outage_margin < 1.0) {
            return Err(ScenarioError::invalid(
                "outage_margin",
                format!("must lie strictly in (0, 1), got {}", self.outage_margin),
            ));
        }
        if self.users.is_empty() {
            return Err(ScenarioError::invalid("users", "must contain at least one user"));
        }
        for (i, u) in self.users.iter().enumerate() {
            check_positive(format!("users[{i}].var_h"), u.var_h)?;
            check_positive(format!("users[{i}].var_g"), u.var_g)?;
            if let Some(cap) = u.power_cap {
                check_positive(format!("users[{i}].power_cap"), cap)?;
            }
            if let Some(h) = u.inst_h_sq {
                check_nonnegative(format!("users[{i}].inst_h_sq"), h)?;
            }
        }
        Ok(())
    }
}

/// Load and validate a scenario file. See the file schema in the crate README.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json_str(&text)
}

/// Write a scenario in the file schema, all fields in linear units.
pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, s.to_json_string()).map_err(|source| ScenarioError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Derived constants for a scenario; equal scenarios give equal constants.
pub fn derive_constants(s: &Scenario) -> DerivedConstants {
    s.derive_constants()
}

fn check_positive(field: impl Into<String>, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn check_nonnegative(field: impl Into<String>, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be a nonnegative finite number, got {v}"),
        ))
    }
}

// --- file schema -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimaryFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    power_p0: Option<f64>,
    /// Average primary SNR in dB: `10*log10(power_p0 * var_gp / noise_np)`.
    /// Exactly one of `power_p0` / `snr_p_db` must be present.
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_p_db: Option<f64>,
    rate_rp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_np: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    var_gp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    var_hp: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    var_h: f64,
    var_g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    power_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inst_h_sq: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    primary: PrimaryFile,
    noise_ns: f64,
    outage_margin: f64,
    users: Vec<UserFile>,
}

impl ScenarioFile {
    fn resolve(self) -> Result<Scenario, ScenarioError> {
        let noise_np = self.primary.noise_np.unwrap_or(1.0);
        let var_gp = self.primary.var_gp.unwrap_or(1.0);
        let var_hp = self.primary.var_hp.unwrap_or(1.0);
        let power_p0 = match (self.primary.power_p0, self.primary.snr_p_db) {
            (Some(p0), None) => p0,
            (None, Some(db)) => {
                check_positive("primary.noise_np", noise_np)?;
                check_positive("primary.var_gp", var_gp)?;
                10f64.powf(db / 10.0) * noise_np / var_gp
            }
            (Some(_), Some(_)) => {
                return Err(ScenarioError::invalid(
                    "primary.power_p0/snr_p_db",
                    "exactly one of the two must be present, found both",
                ))
            }
            (None, None) => {
                return Err(ScenarioError::invalid(
                    "primary.power_p0/snr_p_db",
                    "exactly one of the two must be present, found neither",
                ))
            }
        };
        Scenario::new(
            PrimaryConfig {
                power_p0,
                rate_rp: self.primary.rate_rp,
                noise_np,
                var_gp,
                var_hp,
            },
            self.users
                .into_iter()
                .map(|u| SecondaryUser {
                    var_h: u.var_h,
                    var_g: u.var_g,
                    power_cap: u.power_cap,
                    inst_h_sq: u.inst_h_sq,
                })
                .collect(),
            self.noise_ns,
            self.outage_margin,
        )
    }

    fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            primary: PrimaryFile {
                power_p0: Some(s.primary.power_p0),
                snr_p_db: None,
                rate_rp: s.primary.rate_rp,
                noise_np: Some(s.primary.noise_np),
                var_gp: Some(s.primary.var_gp),
                var_hp: Some(s.primary.var_hp),
            },
            noise_ns: s.noise_ns,
            outage_margin: s.outage_margin,
            users: s
                .users
                .iter()
                .map(|u| UserFile {
                    var_h: u.var_h,
                    var_g: u.var_g,
                    power_cap: u.power_cap,
                    inst_h_sq: u.inst_h_sq,
                })
                .collect(),
        }
    }
}
