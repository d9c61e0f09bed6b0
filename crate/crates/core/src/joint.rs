//! Minimum-power joint transmit/receive beamforming with per-user SINR
//! targets, solved by alternating between the downlink and its dual uplink.
//!
//! For fixed beams the minimum powers meeting every target solve a linear
//! system, and the downlink and the dual uplink need the same total power.
//! MMSE receive beams improve downlink SINRs for fixed powers; MMSE "receive"
//! beams on the uplink are the new transmit beams. Alternating the two keeps
//! the total power non-increasing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{abs2_inner, normalized, outer, solve_hpd, CMatrix, CVector, C64};
use crate::model::{split_power, BeamformerSolution, ChannelSet, ScenarioConfig, Scheme};
use crate::zf::zf_design;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOptions {
    pub max_iter: usize,
    /// Relative gap between uplink and downlink sum power that ends the loop.
    pub tol: f64,
    /// Spectral radius of `DC` at or above `1 - radius_margin` is infeasible.
    pub radius_margin: f64,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            radius_margin: 1e-9,
        }
    }
}

/// Iterate of the duality algorithm.
#[derive(Debug, Clone)]
pub struct DualityState {
    pub tx_beams: Vec<CVector>,
    /// Unit-norm receive beams.
    pub rx_beams: Vec<CVector>,
    pub downlink_powers: DVector<f64>,
    pub uplink_powers: DVector<f64>,
    /// `g[(k, j)] = |w_k^H H_k t_j|^2 / sigma_n^2`: power of stream `j` at user `k`.
    pub gains: DMatrix<f64>,
    pub iteration: usize,
    /// Downlink sum power after every completed round.
    pub power_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Downlink,
    Uplink,
}

/// Normalized gain table for unit-norm beams.
pub fn gain_table(
    chans: &ChannelSet,
    tx: &[CVector],
    rx: &[CVector],
    noise_var: f64,
) -> DMatrix<f64> {
    let users = tx.len();
    DMatrix::from_fn(users, users, |k, j| {
        let w = &rx[k];
        abs2_inner(w, &(&chans.user_channels[k] * &tx[j]))
            / (noise_var * w.norm_squared() * tx[j].norm_squared())
    })
}

/// Off-diagonal coupling: downlink interference at user `k` from stream `j`
/// is `g[(k, j)]`; on the dual uplink the roles swap and it is `g[(j, k)]`.
pub fn coupling_matrix(gains: &DMatrix<f64>, link: Link) -> DMatrix<f64> {
    let mut c = match link {
        Link::Downlink => gains.clone(),
        Link::Uplink => gains.transpose(),
    };
    c.fill_diagonal(0.0);
    c
}

/// `diag(gamma_k / g_kk)`.
pub fn target_matrix(gains: &DMatrix<f64>, targets: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        targets.len(),
        targets.iter().enumerate().map(|(k, t)| t / gains[(k, k)]),
    ))
}

/// Per-stream SINR `x_k g_kk / (1 + sum_{j != k} x_j c_kj)` for a coupling matrix.
pub fn link_sinr(gains: &DMatrix<f64>, link: Link, powers: &DVector<f64>) -> DVector<f64> {
    let c = coupling_matrix(gains, link);
    DVector::from_fn(powers.len(), |k, _| {
        powers[k] * gains[(k, k)] / (1.0 + (c.row(k) * powers)[0])
    })
}

/// Minimum powers meeting every target for fixed beams: `x* = (I - DC)^{-1} D 1`.
pub fn solve_power_allocation(c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DVector<f64>> {
    solve_power_allocation_with(c, d, JointOptions::default().radius_margin)
}

fn solve_power_allocation_with(
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    margin: f64,
) -> Result<DVector<f64>> {
    let n = c.nrows();
    if c.shape() != (n, n) || d.shape() != (n, n) {
        return Err(Error::Shape(
            "C and D must be square and of equal size".into(),
        ));
    }
    if d.diagonal().iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::InfeasibleTargets(
            "a user has zero signal gain".into(),
        ));
    }
    let dc = d * c;
    let radius = dc
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if radius >= 1.0 - margin {
        return Err(Error::InfeasibleTargets(format!(
            "spectral radius of DC is {radius:.6}"
        )));
    }
    let system = DMatrix::identity(n, n) - dc;
    let rhs = d * DVector::from_element(n, 1.0);
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InfeasibleTargets("I - DC is singular".into()))?;
    if x.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InfeasibleTargets(
            "non-positive power in solution".into(),
        ));
    }
    Ok(x)
}

/// MMSE receive beams for the current downlink powers, normalized to unit norm:
/// `w_k ∝ (sum_j p_j H_k t_j t_j^H H_k^H + sigma_n^2 I)^{-1} H_k t_k`.
pub fn update_rx_beams(
    state: &DualityState,
    chans: &ChannelSet,
    noise_var: f64,
) -> Result<Vec<CVector>> {
    chans
        .user_channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let n_rx = h.nrows();
            let mut cov = CMatrix::identity(n_rx, n_rx) * C64::new(noise_var, 0.0);
            for (t, &p) in state.tx_beams.iter().zip(state.downlink_powers.iter()) {
                cov += outer(&(h * t)) * C64::new(p, 0.0);
            }
            Ok(normalized(&solve_hpd(&cov, &(h * &state.tx_beams[k]))?))
        })
        .collect()
}

/// MMSE combiners of the dual uplink, used as the new unit-norm transmit beams:
/// `t_k ∝ (sum_j q_j H_j^H w_j w_j^H H_j + sigma_n^2 I)^{-1} H_k^H w_k`.
pub fn update_tx_beams(
    state: &DualityState,
    chans: &ChannelSet,
    noise_var: f64,
) -> Result<Vec<CVector>> {
    let n_tx = chans.n_tx();
    let signatures: Vec<CVector> = chans
        .user_channels
        .iter()
        .zip(&state.rx_beams)
        .map(|(h, w)| h.adjoint() * w)
        .collect();
    let mut cov = CMatrix::identity(n_tx, n_tx) * C64::new(noise_var, 0.0);
    for (a, &q) in signatures.iter().zip(state.uplink_powers.iter()) {
        cov += outer(a) * C64::new(q, 0.0);
    }
    signatures
        .iter()
        .map(|a| Ok(normalized(&solve_hpd(&cov, a)?)))
        .collect()
}

/// Joint design started from the zero-forcing solution of the same channels.
pub fn joint_design(chans: &ChannelSet, cfg: &ScenarioConfig) -> Result<BeamformerSolution> {
    let zf = zf_design(chans, cfg)?;
    joint_design_from(chans, cfg, &zf)
}

pub fn joint_design_from(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
    zf: &BeamformerSolution,
) -> Result<BeamformerSolution> {
    joint_design_traced(chans, cfg, zf, &JointOptions::default()).map(|(sol, _)| sol)
}

/// Runs the duality iteration and returns the final state alongside the solution.
pub fn joint_design_traced(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
    zf: &BeamformerSolution,
    opts: &JointOptions,
) -> Result<(BeamformerSolution, DualityState)> {
    cfg.validate()?;
    chans.check_against(cfg)?;
    let users = cfg.n_users;
    let noise = cfg.noise_var_rx;
    let targets = &cfg.sinr_targets;
    if zf.tx_beams.len() != users {
        return Err(Error::Shape(
            "initial solution must carry K transmit beams".into(),
        ));
    }

    let mut state = DualityState {
        tx_beams: zf.tx_beams.iter().map(normalized).collect(),
        rx_beams: zf.rx_beams.iter().map(normalized).collect(),
        downlink_powers: DVector::from_element(users, cfg.total_power / users as f64),
        uplink_powers: DVector::zeros(users),
        gains: DMatrix::zeros(users, users),
        iteration: 0,
        power_history: Vec::new(),
    };
    let mut converged = false;
    while state.iteration < opts.max_iter {
        state.iteration += 1;

        state.rx_beams = update_rx_beams(&state, chans, noise)?;

        state.gains = gain_table(chans, &state.tx_beams, &state.rx_beams, noise);
        state.uplink_powers = solve_power_allocation_with(
            &coupling_matrix(&state.gains, Link::Uplink),
            &target_matrix(&state.gains, targets),
            opts.radius_margin,
        )?;
        state.tx_beams = update_tx_beams(&state, chans, noise)?;

        state.gains = gain_table(chans, &state.tx_beams, &state.rx_beams, noise);
        state.downlink_powers = solve_power_allocation_with(
            &coupling_matrix(&state.gains, Link::Downlink),
            &target_matrix(&state.gains, targets),
            opts.radius_margin,
        )?;

        let down = state.downlink_powers.sum();
        let up = state.uplink_powers.sum();
        state.power_history.push(down);
        if (down - up).abs() / down < opts.tol {
            converged = true;
            break;
        }
    }

    let required: Vec<f64> = state
        .downlink_powers
        .iter()
        .map(|p| p / cfg.total_power)
        .collect();
    let split = split_power(&required);
    let sol = BeamformerSolution {
        scheme: Scheme::Broadcast,
        tx_beams: state.tx_beams.clone(),
        rx_beams: state.rx_beams.clone(),
        power_fractions: split.fractions,
        info_fraction: split.info_fraction,
        required_power: state.downlink_powers.sum(),
        feasible: split.feasible,
        converged,
        iterations: state.iteration,
    };
    Ok((sol, state))
}
