//! Minimum-power multicast beamforming under per-user MSE constraints.
//!
//! For fixed receive beams `r_k` the smallest transmit beam `u` meeting
//!
//! ```text
//! |r_k^H H_k u - 1|^2 + sigma_n^2 ||r_k||^2 <= eps_k     for every k
//! ```
//!
//! is a second-order cone program. For fixed `u` the best receive beams are
//! the per-user MMSE filters. The design alternates the two, starting from
//! random receive beams; each half-step can only shrink `||u||`.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{normalized, outer, solve_hpd, CMatrix, CVector, C64};
use crate::model::{
    complex_gaussian_vector, mse_of_sinr, BeamformerSolution, ChannelSet, ScenarioConfig, Scheme,
};
use crate::socp::{self, ConeProgram, IpmSettings, KktResiduals, SolveStatus};

/// The transmit-beam subproblem for fixed receive beams.
#[derive(Debug, Clone, PartialEq)]
pub struct SocpProblem {
    /// `r_k^H H_k`, one `1 x N_t` row per user.
    pub gains: Vec<RowDVector<C64>>,
    /// `eps_k`.
    pub mse_targets: Vec<f64>,
    /// `sigma_n^2 tr(r_k r_k^H)`, the noise part of each user's MSE.
    pub noise_terms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub u_opt: CVector,
    /// `||u_opt||`.
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
}

impl SocpProblem {
    pub fn new(
        chans: &ChannelSet,
        rx_beams: &[CVector],
        mse_targets: &[f64],
        noise_var: f64,
    ) -> Result<Self> {
        let users = chans.n_users();
        if rx_beams.len() != users || mse_targets.len() != users {
            return Err(Error::Shape(format!(
                "SOCP needs {users} receive beams and MSE targets"
            )));
        }
        Ok(Self {
            gains: rx_beams
                .iter()
                .zip(&chans.user_channels)
                .map(|(r, h)| r.adjoint() * h)
                .collect(),
            mse_targets: mse_targets.to_vec(),
            noise_terms: rx_beams
                .iter()
                .map(|r| noise_var * r.norm_squared())
                .collect(),
        })
    }

    pub fn n_tx(&self) -> usize {
        self.gains.first().map_or(0, |g| g.len())
    }

    /// `sqrt(eps_k - w_k)`, or `None` when the noise alone already exceeds the target.
    pub fn cone_radius(&self, k: usize) -> Option<f64> {
        let slack = self.mse_targets[k] - self.noise_terms[k];
        (slack > 0.0).then(|| slack.sqrt())
    }

    /// MSE of user `k` for transmit beam `u` under this problem's receive beams.
    pub fn mse(&self, k: usize, u: &CVector) -> f64 {
        let v = (&self.gains[k] * u)[0] - C64::new(1.0, 0.0);
        v.norm_sqr() + self.noise_terms[k]
    }

    /// Real embedding with variables `(t, Re u, Im u)`: one norm cone
    /// `||u|| <= t` of dimension `2 N_t + 1` and one 3-dimensional cone
    /// `|r_k^H H_k u - 1| <= sqrt(eps_k - w_k)` per user.
    pub fn to_cone_program(&self) -> Result<ConeProgram> {
        let n_tx = self.n_tx();
        let users = self.gains.len();
        let n = 2 * n_tx + 1;
        let m = n + 3 * users;
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        for i in 0..n {
            g[(i, i)] = -1.0;
        }
        for k in 0..users {
            let radius = self.cone_radius(k).ok_or_else(|| {
                Error::InfeasibleTargets(format!(
                    "user {k}: noise term {:.4e} already exceeds MSE target {:.4e}",
                    self.noise_terms[k], self.mse_targets[k]
                ))
            })?;
            let row = n + 3 * k;
            h[row] = radius;
            h[row + 1] = -1.0;
            for (j, c) in self.gains[k].iter().enumerate() {
                // Re(c u) = c_re x_re - c_im x_im, Im(c u) = c_im x_re + c_re x_im.
                g[(row + 1, 1 + j)] = -c.re;
                g[(row + 1, 1 + n_tx + j)] = c.im;
                g[(row + 2, 1 + j)] = -c.im;
                g[(row + 2, 1 + n_tx + j)] = -c.re;
            }
        }
        let mut c = DVector::zeros(n);
        c[0] = 1.0;
        let mut cones = vec![n];
        cones.extend(std::iter::repeat_n(3, users));
        Ok(ConeProgram { c, g, h, cones })
    }
}

pub fn solve_socp(prob: &SocpProblem) -> Result<SocpSolution> {
    solve_socp_with(prob, &IpmSettings::default())
}

pub fn solve_socp_with(prob: &SocpProblem, settings: &IpmSettings) -> Result<SocpSolution> {
    for (k, g) in prob.gains.iter().enumerate() {
        // With a zero row the constraint reads 1 <= radius.
        if g.norm() == 0.0 && prob.cone_radius(k).is_some_and(|r| r < 1.0) {
            return Err(Error::InfeasibleTargets(format!(
                "user {k} has no channel gain"
            )));
        }
    }
    let program = prob.to_cone_program()?;
    let sol = socp::solve(&program, settings);
    let n_tx = prob.n_tx();
    let u_opt = CVector::from_fn(n_tx, |j, _| C64::new(sol.x[1 + j], sol.x[1 + n_tx + j]));
    Ok(SocpSolution {
        objective: u_opt.norm(),
        u_opt,
        status: sol.status,
        kkt_residuals: sol.residuals,
        iterations: sol.iterations,
    })
}

/// Per-user MMSE receive beams for the power-carrying transmit beam `u`:
/// `r_k = (H_k u u^H H_k^H + sigma_n^2 I)^{-1} H_k u`.
pub fn update_multicast_rx(
    u: &CVector,
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
) -> Result<Vec<CVector>> {
    chans
        .user_channels
        .iter()
        .map(|h| {
            let hu = h * u;
            let n_rx = h.nrows();
            let cov = outer(&hu) + CMatrix::identity(n_rx, n_rx) * C64::new(cfg.noise_var_rx, 0.0);
            solve_hpd(&cov, &hu)
        })
        .collect()
}

/// Random unit directions scaled so that the noise term `sigma_n^2 ||r_k||^2`
/// uses half of each user's MSE budget.
pub fn initial_rx_beams<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    mse_targets: &[f64],
    rng: &mut R,
) -> Vec<CVector> {
    mse_targets
        .iter()
        .map(|eps| {
            let dir = normalized(&complex_gaussian_vector(cfg.n_rx, rng));
            dir * C64::new((0.5 * eps / cfg.noise_var_rx).sqrt(), 0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulticastOptions {
    pub max_rounds: usize,
    /// Relative change of `||u||` between rounds that ends the loop.
    pub tol: f64,
    pub ipm: IpmSettings,
}

impl Default for MulticastOptions {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            tol: 1e-6,
            ipm: IpmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MulticastTrace {
    /// `||u||^2` after each transmit-beam solve.
    pub power_history: Vec<f64>,
    pub solves: Vec<KktResiduals>,
}

pub fn multicast_design<R: Rng + ?Sized>(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<BeamformerSolution> {
    multicast_design_traced(chans, cfg, rng, &MulticastOptions::default()).map(|(sol, _)| sol)
}

pub fn multicast_design_traced<R: Rng + ?Sized>(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
    rng: &mut R,
    opts: &MulticastOptions,
) -> Result<(BeamformerSolution, MulticastTrace)> {
    cfg.validate()?;
    chans.check_against(cfg)?;
    let mse_targets = cfg
        .sinr_targets
        .iter()
        .map(|&s| mse_of_sinr(s))
        .collect::<Result<Vec<_>>>()?;

    let mut rx = initial_rx_beams(cfg, &mse_targets, rng);
    let mut trace = MulticastTrace::default();
    let mut u = CVector::zeros(cfg.n_tx);
    let mut converged = false;
    let mut rounds = 0;
    while rounds < opts.max_rounds {
        rounds += 1;
        let prob = SocpProblem::new(chans, &rx, &mse_targets, cfg.noise_var_rx)?;
        let sol = solve_socp_with(&prob, &opts.ipm)?;
        if sol.status != SolveStatus::Optimal {
            // The previous beam still meets every constraint.
            if !trace.power_history.is_empty() {
                break;
            }
            return Err(Error::Solver(format!(
                "transmit-beam subproblem ended with {:?} after {} iterations",
                sol.status, sol.iterations
            )));
        }
        trace.solves.push(sol.kkt_residuals);
        let previous = trace.power_history.last().map(|p: &f64| p.sqrt());
        trace.power_history.push(sol.objective * sol.objective);
        u = sol.u_opt;
        rx = update_multicast_rx(&u, chans, cfg)?;
        if let Some(prev) = previous {
            if (sol.objective - prev).abs() <= opts.tol * prev {
                converged = true;
                break;
            }
        }
    }

    let required_power = u.norm_squared();
    let info_fraction = required_power / cfg.total_power;
    let feasible = info_fraction <= 1.0;
    let info_fraction = info_fraction.min(1.0);
    let sol = BeamformerSolution {
        scheme: Scheme::Multicast,
        tx_beams: vec![normalized(&u)],
        rx_beams: rx,
        power_fractions: vec![info_fraction],
        info_fraction,
        required_power,
        feasible,
        converged,
        iterations: rounds,
    };
    Ok((sol, trace))
}
