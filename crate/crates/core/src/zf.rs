//! Coordinated zero-forcing broadcast beamforming.
//!
//! Given receive beams `w_l`, the transmit beam of user `k` is restricted to
//! the nullspace of the other users' effective rows `w_l^H H_l`, so stream `k`
//! never reaches another receiver. Each user then combines with the
//! maximum-ratio beam `w_k = H_k t_k`, which moves the rows the other users
//! must null. The two updates alternate until the transmit beams settle.

use nalgebra::{DVector, RowDVector, SVD};

use crate::error::{Error, Result};
use crate::linalg::{
    abs2_inner, dominant_left_singular, dominant_right_singular, normalized,
    phase_aligned_distance, CMatrix, CVector, C64,
};
use crate::model::{
    split_power, BeamformerSolution, ChannelSet, PowerSplit, ScenarioConfig, Scheme,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfOptions {
    pub max_iter: usize,
    /// Largest phase-aligned change of any transmit beam that counts as settled.
    pub tol: f64,
}

impl Default for ZfOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// SVD of one user's exclusion matrix.
#[derive(Debug, Clone)]
pub struct ExclusionSvd {
    pub singular_values: DVector<f64>,
    /// Full `N_t x N_t` right factor, columns ordered by decreasing singular value.
    pub right: CMatrix,
    pub rank: usize,
}

impl ExclusionSvd {
    fn new(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        if rows == 0 {
            return Self {
                singular_values: DVector::zeros(0),
                right: CMatrix::identity(cols, cols),
                rank: 0,
            };
        }
        let padded = rows.max(cols);
        let mut sq = CMatrix::zeros(padded, cols);
        sq.rows_mut(0, rows).copy_from(m);
        let svd = SVD::new(sq, false, true);
        let right = svd.v_t.expect("right singular vectors requested").adjoint();
        let tol = padded as f64 * f64::EPSILON * svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        Self {
            singular_values: svd.singular_values,
            right,
            rank,
        }
    }

    /// Right singular vectors of the zero singular values.
    pub fn null_vectors(&self) -> CMatrix {
        let n = self.right.ncols();
        self.right.columns(self.rank, n - self.rank).into_owned()
    }
}

/// Per-user exclusion matrices built from the other users' effective rows.
#[derive(Debug, Clone)]
pub struct ZfWorkspace {
    /// `(K-1) x N_t`, rows `w_l^H H_l` for `l != k`.
    pub excluded_channels: Vec<CMatrix>,
    pub svd_factors: Vec<ExclusionSvd>,
}

impl ZfWorkspace {
    pub fn new(chans: &ChannelSet, rx_beams: &[CVector]) -> Self {
        let users = chans.n_users();
        let rows: Vec<RowDVector<C64>> = rx_beams
            .iter()
            .zip(&chans.user_channels)
            .map(|(w, h)| w.adjoint() * h)
            .collect();
        let excluded_channels: Vec<CMatrix> = (0..users)
            .map(|k| {
                let mut m = CMatrix::zeros(users - 1, chans.n_tx());
                for (i, row) in rows
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != k)
                    .map(|(_, r)| r)
                    .enumerate()
                {
                    m.set_row(i, row);
                }
                m
            })
            .collect();
        let svd_factors = excluded_channels.iter().map(ExclusionSvd::new).collect();
        Self {
            excluded_channels,
            svd_factors,
        }
    }

    /// Unit-norm transmit beam for user `k`: the nullspace direction with the
    /// largest gain `||H_k t||`. With a one-dimensional nullspace this is the
    /// single zero-singular-value vector.
    pub fn transmit_beam(&self, k: usize, h_k: &CMatrix) -> CVector {
        let basis = self.svd_factors[k].null_vectors();
        if basis.ncols() == 1 {
            return normalized(&basis.column(0).into_owned());
        }
        let (coeffs, _) = dominant_right_singular(&(h_k * &basis));
        normalized(&(basis * coeffs))
    }
}

/// Per-user information fractions from the zero-forcing power rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// `rho_k` needed to hit each target exactly (infinite for zero-gain users).
    pub required: Vec<f64>,
    pub split: PowerSplit,
    pub zero_gain_users: Vec<usize>,
}

/// Runs the coordinated zero-forcing iteration and allocates power.
pub fn zf_design(chans: &ChannelSet, cfg: &ScenarioConfig) -> Result<BeamformerSolution> {
    zf_design_with(chans, cfg, &ZfOptions::default())
}

pub fn zf_design_with(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
    opts: &ZfOptions,
) -> Result<BeamformerSolution> {
    cfg.validate()?;
    chans.check_against(cfg)?;
    let users = cfg.n_users;

    let mut rx: Vec<CVector> = chans
        .user_channels
        .iter()
        .map(dominant_left_singular)
        .collect();
    let mut tx: Vec<CVector> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let ws = ZfWorkspace::new(chans, &rx);
        let next: Vec<CVector> = (0..users)
            .map(|k| ws.transmit_beam(k, &chans.user_channels[k]))
            .collect();
        let change = if tx.is_empty() {
            f64::INFINITY
        } else {
            tx.iter()
                .zip(&next)
                .map(|(a, b)| phase_aligned_distance(a, b))
                .fold(0.0, f64::max)
        };
        tx = next;
        // The beams just computed null the current receive rows exactly, so
        // stop before touching the receive beams again.
        if change < opts.tol {
            converged = true;
            break;
        }
        if iterations < opts.max_iter {
            rx = tx
                .iter()
                .zip(&chans.user_channels)
                .map(|(t, h)| h * t)
                .collect();
        }
    }

    let mut sol = BeamformerSolution {
        scheme: Scheme::Broadcast,
        tx_beams: tx,
        rx_beams: rx,
        power_fractions: vec![0.0; users],
        info_fraction: 0.0,
        required_power: 0.0,
        feasible: false,
        converged,
        iterations,
    };
    let alloc = zf_power_allocation(chans, &sol, cfg)?;
    sol.required_power = alloc.required.iter().sum::<f64>() * cfg.total_power;
    sol.power_fractions = alloc.split.fractions;
    sol.info_fraction = alloc.split.info_fraction;
    sol.feasible = alloc.split.feasible;
    Ok(sol)
}

/// `rho_k = sigma_n^2 S_k / (g_k P)` with `g_k = |w_k^H H_k t_k|^2 / ||w_k||^2`,
/// which is `t_k^H H_k^H H_k t_k` under maximum-ratio combining.
pub fn zf_power_allocation(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    cfg: &ScenarioConfig,
) -> Result<PowerAllocation> {
    let users = chans.n_users();
    if sol.tx_beams.len() != users || sol.rx_beams.len() != users {
        return Err(Error::Shape(
            "zero-forcing allocation needs K beam pairs".into(),
        ));
    }
    let mut required = Vec::with_capacity(users);
    let mut zero_gain_users = Vec::new();
    for k in 0..users {
        let w = &sol.rx_beams[k];
        let gain = if w.norm_squared() > 0.0 {
            abs2_inner(w, &(&chans.user_channels[k] * &sol.tx_beams[k])) / w.norm_squared()
        } else {
            0.0
        };
        if gain > 0.0 {
            required.push(cfg.noise_var_rx * cfg.sinr_targets[k] / (gain * cfg.total_power));
        } else {
            zero_gain_users.push(k);
            required.push(f64::INFINITY);
        }
    }
    let split = if zero_gain_users.is_empty() {
        split_power(&required)
    } else {
        let finite: Vec<f64> = required
            .iter()
            .map(|&r| if r.is_finite() { r } else { 0.0 })
            .collect();
        let total: f64 = finite.iter().sum();
        let fractions: Vec<f64> = if total > 0.0 {
            finite.iter().map(|r| r / total).collect()
        } else {
            finite
        };
        PowerSplit {
            info_fraction: fractions.iter().sum(),
            fractions,
            feasible: false,
        }
    };
    Ok(PowerAllocation {
        required,
        split,
        zero_gain_users,
    })
}
