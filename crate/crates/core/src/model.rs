//! Scenario description, channel realizations, beamformer solutions and the
//! SINR / MSE arithmetic shared by every design.
//!
//! All SINR values are linear. Decibels only appear at the reporting
//! boundary ([`db_to_linear`], [`linear_to_db`]).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{abs2_inner, CMatrix, CVector, C64};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Network dimensions, power budget, noise levels and per-user targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Transmit antennas `N_t`.
    pub n_tx: usize,
    /// Receive antennas per legitimate user `N_r`.
    pub n_rx: usize,
    /// Eavesdropper antennas `N_e`.
    pub n_eve: usize,
    /// Legitimate users `K`.
    pub n_users: usize,
    /// Total transmit power `P` (linear), shared by information and jamming.
    pub total_power: f64,
    /// Per-antenna noise variance at the legitimate receivers.
    pub noise_var_rx: f64,
    /// Per-antenna noise variance at the eavesdropper.
    pub noise_var_eve: f64,
    /// Linear SINR target per user. Multicast uses these as per-user targets
    /// for the common stream.
    pub sinr_targets: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Builds and validates a configuration with a common SINR target.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_tx: usize,
        n_rx: usize,
        n_eve: usize,
        n_users: usize,
        total_power: f64,
        noise_var: f64,
        sinr_target: f64,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n_tx,
            n_rx,
            n_eve,
            n_users,
            total_power,
            noise_var_rx: noise_var,
            noise_var_eve: noise_var,
            sinr_targets: vec![sinr_target; n_users],
            trials,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The four-antenna, three-user layout used throughout the experiments:
    /// `N_t = 4`, `N_r = 2`, `N_e = 4`, `K = 3`, unit noise.
    pub fn desk(total_power_db: f64, target_db: f64) -> Self {
        Self::new(
            4,
            2,
            4,
            3,
            db_to_linear(total_power_db),
            1.0,
            db_to_linear(target_db),
            1,
            0,
        )
        .expect("desk scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tx == 0 || self.n_rx == 0 || self.n_eve == 0 || self.n_users == 0 {
            return bad("antenna and user counts must be positive".into());
        }
        if self.n_users >= self.n_tx {
            return bad(format!(
                "K < N_t is required for nullspace jamming, got K = {} and N_t = {}",
                self.n_users, self.n_tx
            ));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return bad(format!(
                "total power must be positive, got {}",
                self.total_power
            ));
        }
        if !(self.noise_var_rx > 0.0 && self.noise_var_eve > 0.0) {
            return bad("noise variances must be positive".into());
        }
        if self.sinr_targets.len() != self.n_users {
            return bad(format!(
                "expected {} SINR targets, got {}",
                self.n_users,
                self.sinr_targets.len()
            ));
        }
        if self
            .sinr_targets
            .iter()
            .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return bad("SINR targets must be positive".into());
        }
        if self.trials == 0 {
            return bad("at least one trial is required".into());
        }
        Ok(())
    }

    pub fn with_total_power(&self, total_power: f64) -> Result<Self> {
        let cfg = Self {
            total_power,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_common_target(&self, sinr_target: f64) -> Result<Self> {
        let cfg = Self {
            sinr_targets: vec![sinr_target; self.n_users],
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One realization of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `H_k`, each `N_r x N_t`.
    pub user_channels: Vec<CMatrix>,
    /// `H_e`, `N_e x N_t`.
    pub eve_channel: CMatrix,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.user_channels.len()
    }

    pub fn n_tx(&self) -> usize {
        self.eve_channel.ncols()
    }

    pub fn check_against(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.user_channels.len() != cfg.n_users {
            return Err(Error::Shape(format!(
                "{} user channels for {} users",
                self.user_channels.len(),
                cfg.n_users
            )));
        }
        for (k, h) in self.user_channels.iter().enumerate() {
            if h.shape() != (cfg.n_rx, cfg.n_tx) {
                return Err(Error::Shape(format!(
                    "H_{k} is {:?}, expected {:?}",
                    h.shape(),
                    (cfg.n_rx, cfg.n_tx)
                )));
            }
        }
        if self.eve_channel.shape() != (cfg.n_eve, cfg.n_tx) {
            return Err(Error::Shape(format!(
                "H_e is {:?}, expected {:?}",
                self.eve_channel.shape(),
                (cfg.n_eve, cfg.n_tx)
            )));
        }
        let finite = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !self.user_channels.iter().all(finite) || !finite(&self.eve_channel) {
            return Err(Error::Numerical("non-finite channel entry".into()));
        }
        Ok(())
    }
}

/// One draw from CN(0, 1): real and imaginary parts each N(0, 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Draws i.i.d. CN(0, 1) channels for all users (in user order) and then for
/// the eavesdropper.
pub fn generate_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> ChannelSet {
    let user_channels = (0..cfg.n_users)
        .map(|_| complex_gaussian_matrix(cfg.n_rx, cfg.n_tx, rng))
        .collect();
    let eve_channel = complex_gaussian_matrix(cfg.n_eve, cfg.n_tx, rng);
    ChannelSet {
        user_channels,
        eve_channel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Independent symbol per user, one transmit beam each.
    Broadcast,
    /// One common symbol and a single transmit beam.
    Multicast,
}

/// Transmit/receive beamformers and the information-power split.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    pub scheme: Scheme,
    /// Unit-norm transmit beams: `t_k` per user, or the single `u` for multicast.
    pub tx_beams: Vec<CVector>,
    /// Receive beams `w_k` (broadcast) or `r_k` (multicast), one per user.
    pub rx_beams: Vec<CVector>,
    /// `rho_k`, one per transmit beam.
    pub power_fractions: Vec<f64>,
    /// `rho = sum_k rho_k`.
    pub info_fraction: f64,
    /// Information power needed to meet every target, before any fallback.
    pub required_power: f64,
    /// All targets met within the power budget.
    pub feasible: bool,
    /// The design iteration reached its stopping criterion.
    pub converged: bool,
    pub iterations: usize,
}

impl BeamformerSolution {
    pub fn jam_fraction(&self) -> f64 {
        (1.0 - self.info_fraction).max(0.0)
    }

    /// `rho_k P` for each transmit beam.
    pub fn stream_powers(&self, total_power: f64) -> Vec<f64> {
        self.power_fractions
            .iter()
            .map(|r| r * total_power)
            .collect()
    }

    pub fn jam_power(&self, total_power: f64) -> f64 {
        self.jam_fraction() * total_power
    }
}

/// Power split after the budget check.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    pub fractions: Vec<f64>,
    pub info_fraction: f64,
    pub feasible: bool,
}

/// Applies the budget to required per-stream fractions. When they sum past
/// one, every stream is scaled down proportionally so that all power carries
/// information and none is left for jamming.
pub fn split_power(required: &[f64]) -> PowerSplit {
    let total: f64 = required.iter().sum();
    if total <= 1.0 {
        PowerSplit {
            fractions: required.to_vec(),
            info_fraction: total,
            feasible: true,
        }
    } else {
        PowerSplit {
            fractions: required.iter().map(|r| r / total).collect(),
            info_fraction: 1.0,
            feasible: false,
        }
    }
}

fn check_user(k: usize, users: usize) -> Result<()> {
    if k >= users {
        Err(Error::UserIndex { index: k, users })
    } else {
        Ok(())
    }
}

/// Post-combining SINR of user `k` in the broadcast downlink.
///
/// Jamming does not appear: it lives in the nullspace of every `w_k^H H_k`.
pub fn broadcast_sinr(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    cfg: &ScenarioConfig,
    k: usize,
) -> Result<f64> {
    let users = chans.n_users();
    check_user(k, users)?;
    if sol.tx_beams.len() != users || sol.rx_beams.len() != users {
        return Err(Error::Shape(format!(
            "broadcast SINR needs {users} transmit and receive beams, got {} and {}",
            sol.tx_beams.len(),
            sol.rx_beams.len()
        )));
    }
    let w = &sol.rx_beams[k];
    let h = &chans.user_channels[k];
    let powers = sol.stream_powers(cfg.total_power);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, t) in sol.tx_beams.iter().enumerate() {
        let g = abs2_inner(w, &(h * t));
        if j == k {
            signal = powers[j] * g;
        } else {
            interference += powers[j] * g;
        }
    }
    Ok(signal / (interference + cfg.noise_var_rx * w.norm_squared()))
}

/// SINR of user `k` for the common multicast stream with receive beam `r_k`.
pub fn multicast_sinr(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    cfg: &ScenarioConfig,
    k: usize,
) -> Result<f64> {
    let users = chans.n_users();
    check_user(k, users)?;
    if sol.tx_beams.len() != 1 || sol.rx_beams.len() != users {
        return Err(Error::Shape(format!(
            "multicast SINR needs one transmit beam and {users} receive beams"
        )));
    }
    let r = &sol.rx_beams[k];
    let power = sol.info_fraction * cfg.total_power;
    let g = abs2_inner(r, &(&chans.user_channels[k] * &sol.tx_beams[0]));
    Ok(power * g / (cfg.noise_var_rx * r.norm_squared()))
}

/// Minimum MSE corresponding to a maximum SINR: `1 / (1 + SINR)`.
pub fn mse_of_sinr(sinr: f64) -> Result<f64> {
    if sinr.is_nan() || sinr < 0.0 {
        return Err(Error::NegativeSinr(sinr));
    }
    Ok(1.0 / (1.0 + sinr))
}

pub fn sinr_of_mse(mse: f64) -> Result<f64> {
    if !(mse > 0.0 && mse <= 1.0) {
        return Err(Error::MseOutOfRange(mse));
    }
    Ok(1.0 / mse - 1.0)
}

/// Outcome of one Monte Carlo realization for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub achieved_sinr_users: Vec<f64>,
    pub eve_sinr_per_stream: Vec<f64>,
    pub info_fraction: f64,
    pub jam_fraction: f64,
    pub eve_bit_errors: u64,
    pub bits_total: u64,
    pub feasible: bool,
}

impl TrialRecord {
    pub fn new(
        achieved_sinr_users: Vec<f64>,
        eve_sinr_per_stream: Vec<f64>,
        info_fraction: f64,
        feasible: bool,
    ) -> Self {
        Self {
            achieved_sinr_users,
            eve_sinr_per_stream,
            info_fraction,
            jam_fraction: 1.0 - info_fraction,
            eve_bit_errors: 0,
            bits_total: 0,
            feasible,
        }
    }

    pub fn with_bit_errors(mut self, errors: u64, bits: u64) -> Result<Self> {
        if errors > bits {
            return Err(Error::Numerical(format!(
                "{errors} bit errors out of {bits} bits"
            )));
        }
        self.eve_bit_errors = errors;
        self.bits_total = bits;
        Ok(self)
    }

    pub fn eve_mean_sinr(&self) -> f64 {
        self.eve_sinr_per_stream.iter().sum::<f64>() / self.eve_sinr_per_stream.len() as f64
    }
}
