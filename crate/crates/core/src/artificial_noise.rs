//! Artificial-noise jamming confined to the nullspace of the effective
//! downlink channel.
//!
//! Once the receive beams are known, user `k` only sees the row `w_k^H H_k`.
//! Stacking those rows gives a `K x N_t` matrix whose nullspace has dimension
//! at least `N_t - K`; any jamming drawn from it is invisible to every
//! intended receiver.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{nullspace, CMatrix, CVector, C64};
use crate::model::{complex_gaussian_vector, BeamformerSolution, ChannelSet};

/// Covariance of the jamming vector and the nullspace it is spread over.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    /// `N_t x d` with orthonormal columns, `d >= N_t - K`.
    pub null_basis: CMatrix,
    /// `Q'_z`, isotropic over the nullspace.
    pub covariance: CMatrix,
    /// `tr(Q'_z)`.
    pub jam_power: f64,
}

impl NoiseCovariance {
    pub fn dimension(&self) -> usize {
        self.null_basis.ncols()
    }

    /// Same nullspace, no jamming power.
    pub fn without_jamming(&self) -> Self {
        let n = self.covariance.nrows();
        Self {
            null_basis: self.null_basis.clone(),
            covariance: CMatrix::zeros(n, n),
            jam_power: 0.0,
        }
    }
}

/// Stacks `w_k^H H_k` (or `r_k^H H_k`) into the `K x N_t` effective channel.
pub fn effective_channel(chans: &ChannelSet, sol: &BeamformerSolution) -> Result<CMatrix> {
    let users = chans.n_users();
    if sol.rx_beams.len() != users {
        return Err(Error::Shape(format!(
            "{} receive beams for {users} users",
            sol.rx_beams.len()
        )));
    }
    let mut eff = CMatrix::zeros(users, chans.n_tx());
    for (k, (w, h)) in sol.rx_beams.iter().zip(&chans.user_channels).enumerate() {
        if w.len() != h.nrows() {
            return Err(Error::Shape(format!(
                "receive beam {k} has length {}, channel has {} rows",
                w.len(),
                h.nrows()
            )));
        }
        eff.set_row(k, &(w.adjoint() * h));
    }
    Ok(eff)
}

/// Spreads `jam_power` evenly over an orthonormal basis of `null(eff)`.
pub fn build_noise_covariance(eff: &CMatrix, jam_power: f64) -> Result<NoiseCovariance> {
    let (users, n_tx) = eff.shape();
    if users >= n_tx {
        return Err(Error::InvalidConfig(format!(
            "K < N_t is required for nullspace jamming, got K = {users} and N_t = {n_tx}"
        )));
    }
    if !(jam_power >= 0.0 && jam_power.is_finite()) {
        return Err(Error::Numerical(format!("jamming power {jam_power}")));
    }
    let null_basis = nullspace(eff);
    let dim = null_basis.ncols();
    let scale = C64::new(jam_power / dim as f64, 0.0);
    let covariance = &null_basis * null_basis.adjoint() * scale;
    Ok(NoiseCovariance {
        null_basis,
        covariance,
        jam_power,
    })
}

/// Draws `z' = V_0 g` with `g ~ CN(0, (P_jam / d) I)`.
///
/// The Gaussian draws happen even when the jamming power is zero, so two runs
/// that differ only in jamming power consume the random stream identically.
pub fn sample_noise<R: Rng + ?Sized>(nc: &NoiseCovariance, rng: &mut R) -> CVector {
    let dim = nc.dimension();
    let g = complex_gaussian_vector(dim, rng);
    let scale = (nc.jam_power / dim as f64).sqrt();
    &nc.null_basis * g * C64::new(scale, 0.0)
}
