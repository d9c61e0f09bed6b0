//! The eavesdropper's two receivers: a per-stream max-SINR linear beam and an
//! exhaustive maximum-likelihood joint detector.
//!
//! The eavesdropper is assumed to know `H_e`, the transmit beams, their powers
//! and the jamming covariance.

use rand::Rng;

use crate::artificial_noise::{sample_noise, NoiseCovariance};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_inv_sqrt, outer, solve_hpd, CMatrix, CVector, C64};
use crate::model::{complex_gaussian_vector, BeamformerSolution, ChannelSet, ScenarioConfig};

/// Largest candidate set the ML detector will enumerate.
pub const MAX_CANDIDATES: u128 = 1 << 16;

/// BPSK: bit 0 maps to `+1`, bit 1 to `-1`.
pub const BPSK: [C64; 2] = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];

#[derive(Debug, Clone)]
pub struct EveContext {
    pub eve_channel: CMatrix,
    /// `H_e t_k` for each stream.
    pub stream_channels: Vec<CVector>,
    /// `H_e t_k sqrt(rho_k P)`, the received signature of a unit symbol.
    pub signatures: Vec<CVector>,
    /// `H_e Q'_z H_e^H`.
    pub jam_covariance: CMatrix,
    pub eve_noise_var: f64,
    /// `Q_e = H_e Q'_z H_e^H + sigma_e^2 I`.
    pub joint_covariance: CMatrix,
    /// `Q_e^k`: every other stream plus jamming plus noise.
    pub stream_covariances: Vec<CMatrix>,
}

impl EveContext {
    /// `noise = None` means no jamming.
    pub fn new(
        chans: &ChannelSet,
        sol: &BeamformerSolution,
        noise: Option<&NoiseCovariance>,
        cfg: &ScenarioConfig,
    ) -> Result<Self> {
        if cfg.noise_var_eve.is_nan() || cfg.noise_var_eve <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eavesdropper noise variance must be positive, got {}",
                cfg.noise_var_eve
            )));
        }
        if sol.tx_beams.len() != sol.power_fractions.len() {
            return Err(Error::Shape(format!(
                "{} transmit beams with {} power fractions",
                sol.tx_beams.len(),
                sol.power_fractions.len()
            )));
        }
        let he = chans.eve_channel.clone();
        let n_eve = he.nrows();
        let stream_channels: Vec<CVector> = sol.tx_beams.iter().map(|t| &he * t).collect();
        let signatures: Vec<CVector> = stream_channels
            .iter()
            .zip(sol.stream_powers(cfg.total_power))
            .map(|(a, p)| a * C64::new(p.sqrt(), 0.0))
            .collect();
        let jam_covariance = match noise {
            Some(nc) => &he * &nc.covariance * he.adjoint(),
            None => CMatrix::zeros(n_eve, n_eve),
        };
        let joint_covariance =
            &jam_covariance + CMatrix::identity(n_eve, n_eve) * C64::new(cfg.noise_var_eve, 0.0);
        let all_streams = signatures
            .iter()
            .fold(CMatrix::zeros(n_eve, n_eve), |acc, a| acc + outer(a));
        let stream_covariances = signatures
            .iter()
            .map(|a| &joint_covariance + &all_streams - outer(a))
            .collect();
        Ok(Self {
            eve_channel: he,
            stream_channels,
            signatures,
            jam_covariance,
            eve_noise_var: cfg.noise_var_eve,
            joint_covariance,
            stream_covariances,
        })
    }

    pub fn n_streams(&self) -> usize {
        self.signatures.len()
    }

    fn check_stream(&self, k: usize) -> Result<()> {
        if k >= self.n_streams() {
            Err(Error::UserIndex {
                index: k,
                users: self.n_streams(),
            })
        } else {
            Ok(())
        }
    }

    /// `H_e T diag(sqrt(rho P))`, one column per stream.
    pub fn signature_matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.signatures)
    }
}

/// Max-SINR beam `w_e = (Q_e^k)^{-1} H_e t_k` and the SINR it achieves,
/// `rho_k P t_k^H H_e^H (Q_e^k)^{-1} H_e t_k`.
pub fn eve_max_sinr(ctx: &EveContext, k: usize) -> Result<(CVector, f64)> {
    ctx.check_stream(k)?;
    let beam = solve_hpd(&ctx.stream_covariances[k], &ctx.stream_channels[k])?;
    let a = &ctx.signatures[k];
    let scale = a.norm_squared() / ctx.stream_channels[k].norm_squared().max(f64::MIN_POSITIVE);
    let sinr = scale * ctx.stream_channels[k].dotc(&beam).re;
    Ok((beam, sinr.max(0.0)))
}

/// SINR of stream `k` through an arbitrary beam `w`: signal over interference plus noise.
pub fn rayleigh_sinr(ctx: &EveContext, k: usize, w: &CVector) -> Result<f64> {
    ctx.check_stream(k)?;
    let signal = w.dotc(&ctx.signatures[k]).norm_sqr();
    let rest = w.dotc(&(&ctx.stream_covariances[k] * w)).re;
    Ok(signal / rest)
}

/// Exhaustive ML joint detector with whitening `Q_e^{-1/2}`.
#[derive(Debug, Clone)]
pub struct MlDetector {
    pub whitener: CMatrix,
    pub constellation: Vec<C64>,
    pub streams: usize,
    /// Whitened noiseless receptions, in lexicographic candidate order.
    points: Vec<CVector>,
}

impl MlDetector {
    pub fn new(ctx: &EveContext, constellation: &[C64]) -> Result<Self> {
        Self::with_covariance(
            &ctx.joint_covariance,
            &ctx.signature_matrix(),
            constellation,
        )
    }

    pub fn with_covariance(
        covariance: &CMatrix,
        signatures: &CMatrix,
        constellation: &[C64],
    ) -> Result<Self> {
        let streams = signatures.ncols();
        let m = constellation.len();
        if m == 0 {
            return Err(Error::InvalidConfig("empty constellation".into()));
        }
        let size = (m as u128).checked_pow(streams as u32).unwrap_or(u128::MAX);
        if size > MAX_CANDIDATES {
            return Err(Error::ConstellationTooLarge {
                size,
                limit: MAX_CANDIDATES,
            });
        }
        let whitener = hermitian_inv_sqrt(covariance)?;
        let white_sig = &whitener * signatures;
        let points = (0..size as usize)
            .map(|idx| &white_sig * candidate(idx, streams, constellation))
            .collect();
        Ok(Self {
            whitener,
            constellation: constellation.to_vec(),
            streams,
            points,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.points.len()
    }

    /// Constellation indices per stream of the most likely transmitted vector.
    /// Ties go to the first candidate in enumeration order.
    pub fn detect(&self, y: &CVector) -> Vec<usize> {
        let white = &self.whitener * y;
        let mut best = (f64::INFINITY, 0);
        for (idx, p) in self.points.iter().enumerate() {
            let metric = (&white - p).norm_squared();
            if metric < best.0 {
                best = (metric, idx);
            }
        }
        digits(best.1, self.streams, self.constellation.len())
    }
}

/// Digits of `idx` in base `m`, first stream most significant.
fn digits(mut idx: usize, streams: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; streams];
    for slot in out.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
    out
}

fn candidate(idx: usize, streams: usize, constellation: &[C64]) -> CVector {
    let d = digits(idx, streams, constellation.len());
    CVector::from_iterator(streams, d.into_iter().map(|i| constellation[i]))
}

pub fn eve_ml_detect(y: &CVector, ctx: &EveContext, constellation: &[C64]) -> Result<Vec<usize>> {
    Ok(MlDetector::new(ctx, constellation)?.detect(y))
}

/// Sends `n_symbols` BPSK vectors through the eavesdropper channel with fresh
/// jamming and thermal noise per symbol and counts ML bit errors over all
/// streams. Returns `(errors, bits)`.
pub fn eve_ber_trial<R: Rng + ?Sized>(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    nc: &NoiseCovariance,
    cfg: &ScenarioConfig,
    n_symbols: usize,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let ctx = EveContext::new(chans, sol, Some(nc), cfg)?;
    let detector = MlDetector::new(&ctx, &BPSK)?;
    let streams = ctx.n_streams();
    let he = &ctx.eve_channel;
    let noise_scale = C64::new(cfg.noise_var_eve.sqrt(), 0.0);
    let mut errors = 0u64;
    let mut bits = vec![0usize; streams];
    for _ in 0..n_symbols {
        let mut y =
            he * sample_noise(nc, rng) + complex_gaussian_vector(he.nrows(), rng) * noise_scale;
        for (bit, a) in bits.iter_mut().zip(&ctx.signatures) {
            *bit = usize::from(rng.random::<bool>());
            y += a * BPSK[*bit];
        }
        let detected = detector.detect(&y);
        errors += detected.iter().zip(&bits).filter(|(d, b)| d != b).count() as u64;
    }
    Ok((errors, (n_symbols * streams) as u64))
}
