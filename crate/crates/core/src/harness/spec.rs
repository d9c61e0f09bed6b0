use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    PowerFractionBroadcast,
    SinrBroadcast,
    BerMl,
    PowerFractionMulticast,
    SinrMulticast,
}

/// Quantity on the horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Total transmit power `P` in dB.
    PDb,
    /// Per-user SINR target `S` in dB.
    SDb,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::PowerFractionBroadcast,
        ExperimentId::SinrBroadcast,
        ExperimentId::BerMl,
        ExperimentId::PowerFractionMulticast,
        ExperimentId::SinrMulticast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::PowerFractionBroadcast => "power_fraction_broadcast",
            ExperimentId::SinrBroadcast => "sinr_broadcast",
            ExperimentId::BerMl => "ber_ml",
            ExperimentId::PowerFractionMulticast => "power_fraction_multicast",
            ExperimentId::SinrMulticast => "sinr_multicast",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::PowerFractionBroadcast => {
                "information/jamming power split vs P, zero-forcing and joint broadcast designs"
            }
            ExperimentId::SinrBroadcast => "user 1 and eavesdropper SINR vs P, broadcast designs",
            ExperimentId::BerMl => "eavesdropper ML bit error rate vs S, with and without jamming",
            ExperimentId::PowerFractionMulticast => {
                "information/jamming power split vs P, multicast design"
            }
            ExperimentId::SinrMulticast => "user 1 and eavesdropper SINR vs P, multicast design",
        }
    }

    pub fn sweep_variable(self) -> SweepVariable {
        match self {
            ExperimentId::BerMl => SweepVariable::SDb,
            _ => SweepVariable::PDb,
        }
    }

    /// Series names, before any per-target suffix.
    pub fn series(self) -> &'static [&'static str] {
        match self {
            ExperimentId::PowerFractionBroadcast => {
                &["rho_zf", "jam_zf", "rho_joint", "jam_joint", "rho1_zf"]
            }
            ExperimentId::SinrBroadcast => &[
                "user1_sinr_zf",
                "user1_sinr_joint",
                "eve_sinr_zf",
                "eve_sinr_joint",
            ],
            ExperimentId::BerMl => &["ber_an", "ber_no_an"],
            ExperimentId::PowerFractionMulticast => &["rho_mc", "jam_mc"],
            ExperimentId::SinrMulticast => &["user_sinr_mc", "eve_sinr_mc"],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Spec(format!("unknown experiment id `{s}`")))
    }
}

fn default_p_db() -> f64 {
    20.0
}
fn default_trials() -> usize {
    5000
}
fn default_noise() -> f64 {
    1.0
}
fn default_symbols() -> usize {
    10
}

/// One experiment, as read from a TOML spec file.
///
/// Power-swept experiments run every `P` in `p_db_grid` for every `S` in
/// `s_db_grid`. The BER experiment sweeps `s_db_grid` at the fixed `p_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub p_db_grid: Vec<f64>,
    #[serde(default)]
    pub s_db_grid: Vec<f64>,
    #[serde(default = "default_p_db")]
    pub p_db: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_eve: usize,
    pub k_users: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_var_rx: f64,
    #[serde(default = "default_noise")]
    pub noise_var_eve: f64,
    #[serde(default = "default_symbols")]
    pub symbols_per_trial: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Spec(format!("`{name}` must not be empty")));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::Spec(format!(
            "`{name}` contains non-finite value {x}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Spec(format!("`{name}` must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Spec(msg) => Error::Spec(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn sweep_variable(&self) -> SweepVariable {
        self.experiment.sweep_variable()
    }

    /// Horizontal-axis values in dB.
    pub fn sweep_grid(&self) -> &[f64] {
        match self.sweep_variable() {
            SweepVariable::PDb => &self.p_db_grid,
            SweepVariable::SDb => &self.s_db_grid,
        }
    }

    /// SINR targets that each get their own copy of every series.
    pub fn target_grid(&self) -> &[f64] {
        match self.sweep_variable() {
            SweepVariable::PDb => &self.s_db_grid,
            SweepVariable::SDb => &[],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.sweep_variable() {
            SweepVariable::PDb => {
                check_grid("p_db_grid", &self.p_db_grid)?;
                check_grid("s_db_grid", &self.s_db_grid)?;
            }
            SweepVariable::SDb => {
                check_grid("s_db_grid", &self.s_db_grid)?;
                if !self.p_db_grid.is_empty() {
                    return Err(Error::Spec(format!(
                        "`{}` sweeps the SINR target at fixed `p_db`; `p_db_grid` must be omitted",
                        self.experiment
                    )));
                }
                if !self.p_db.is_finite() {
                    return Err(Error::Spec("`p_db` must be finite".into()));
                }
                if self.symbols_per_trial == 0 {
                    return Err(Error::Spec("`symbols_per_trial` must be positive".into()));
                }
            }
        }
        if self.trials == 0 {
            return Err(Error::Spec("`trials` must be positive".into()));
        }
        let (p, s) = self.points().next().expect("grids are nonempty");
        self.scenario(p, s)?;
        Ok(())
    }

    /// `(P dB, S dB)` for every sweep point, sweep value outermost.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let pairs: Vec<(f64, f64)> = match self.sweep_variable() {
            SweepVariable::PDb => self
                .p_db_grid
                .iter()
                .flat_map(|&p| self.s_db_grid.iter().map(move |&s| (p, s)))
                .collect(),
            SweepVariable::SDb => self.s_db_grid.iter().map(|&s| (self.p_db, s)).collect(),
        };
        pairs.into_iter()
    }

    pub fn scenario(&self, p_db: f64, s_db: f64) -> Result<ScenarioConfig> {
        let cfg = ScenarioConfig {
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            n_eve: self.n_eve,
            n_users: self.k_users,
            total_power: db_to_linear(p_db),
            noise_var_rx: self.noise_var_rx,
            noise_var_eve: self.noise_var_eve,
            sinr_targets: vec![db_to_linear(s_db); self.k_users],
            trials: self.trials,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
