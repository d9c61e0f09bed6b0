use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::spec::{ExperimentId, ExperimentSpec, SweepVariable};
use super::table::{Accumulator, ResultTable, TrialFailure};
use crate::artificial_noise::{build_noise_covariance, effective_channel, NoiseCovariance};
use crate::eavesdropper::{eve_ber_trial, eve_max_sinr, EveContext};
use crate::error::{Error, Result};
use crate::joint::joint_design_from;
use crate::model::{
    broadcast_sinr, generate_channels, multicast_sinr, BeamformerSolution, ChannelSet,
    ScenarioConfig,
};
use crate::multicast::multicast_design;
use crate::zf::zf_design;

/// Random stream of one trial, keyed by `(seed, sweep point, trial)`.
pub fn trial_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

/// One trial's contribution to one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub infeasible: bool,
    /// `(errors, bits)` for pooled BER series.
    pub bits: Option<(u64, u64)>,
}

impl Sample {
    fn of(value: f64, sol: &BeamformerSolution) -> Self {
        Self {
            value,
            infeasible: !sol.feasible,
            bits: None,
        }
    }
}

/// All power on information, split in proportion to the current streams.
fn full_power_fallback(sol: &BeamformerSolution) -> BeamformerSolution {
    let total: f64 = sol.power_fractions.iter().sum();
    let users = sol.power_fractions.len() as f64;
    BeamformerSolution {
        power_fractions: sol
            .power_fractions
            .iter()
            .map(|r| if total > 0.0 { r / total } else { 1.0 / users })
            .collect(),
        info_fraction: 1.0,
        feasible: false,
        ..sol.clone()
    }
}

/// Zero-forcing and joint designs for one realization. When the duality
/// iteration cannot meet the targets at any power, the joint design falls
/// back to the zero-forcing beams at full power.
pub fn broadcast_designs(
    chans: &ChannelSet,
    cfg: &ScenarioConfig,
) -> Result<(BeamformerSolution, BeamformerSolution)> {
    let zf = zf_design(chans, cfg)?;
    let joint = match joint_design_from(chans, cfg, &zf) {
        Ok(sol) => sol,
        Err(Error::InfeasibleTargets(_)) => full_power_fallback(&zf),
        Err(e) => return Err(e),
    };
    Ok((zf, joint))
}

pub fn jamming_for(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    cfg: &ScenarioConfig,
) -> Result<NoiseCovariance> {
    build_noise_covariance(
        &effective_channel(chans, sol)?,
        sol.jam_power(cfg.total_power),
    )
}

/// Mean over streams of the eavesdropper's max-SINR receiver output.
pub fn eve_mean_sinr(
    chans: &ChannelSet,
    sol: &BeamformerSolution,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let nc = jamming_for(chans, sol, cfg)?;
    let ctx = EveContext::new(chans, sol, Some(&nc), cfg)?;
    let mut total = 0.0;
    for k in 0..ctx.n_streams() {
        total += eve_max_sinr(&ctx, k)?.1;
    }
    Ok(total / ctx.n_streams() as f64)
}

/// Runs one realization and returns one sample per series of the experiment.
pub fn run_trial(
    experiment: ExperimentId,
    cfg: &ScenarioConfig,
    symbols: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Sample>> {
    let chans = generate_channels(cfg, rng);
    match experiment {
        ExperimentId::PowerFractionBroadcast => {
            let (zf, joint) = broadcast_designs(&chans, cfg)?;
            Ok(vec![
                Sample::of(zf.info_fraction, &zf),
                Sample::of(zf.jam_fraction(), &zf),
                Sample::of(joint.info_fraction, &joint),
                Sample::of(joint.jam_fraction(), &joint),
                Sample::of(zf.power_fractions[0], &zf),
            ])
        }
        ExperimentId::SinrBroadcast => {
            let (zf, joint) = broadcast_designs(&chans, cfg)?;
            Ok(vec![
                Sample::of(broadcast_sinr(&chans, &zf, cfg, 0)?, &zf),
                Sample::of(broadcast_sinr(&chans, &joint, cfg, 0)?, &joint),
                Sample::of(eve_mean_sinr(&chans, &zf, cfg)?, &zf),
                Sample::of(eve_mean_sinr(&chans, &joint, cfg)?, &joint),
            ])
        }
        ExperimentId::BerMl => {
            let zf = zf_design(&chans, cfg)?;
            let nc = jamming_for(&chans, &zf, cfg)?;
            // Both runs see the same symbols and thermal noise.
            let mut twin = rng.clone();
            let with = eve_ber_trial(&chans, &zf, &nc, cfg, symbols, rng)?;
            let without =
                eve_ber_trial(&chans, &zf, &nc.without_jamming(), cfg, symbols, &mut twin)?;
            let sample = |(errors, bits): (u64, u64)| Sample {
                value: errors as f64,
                infeasible: !zf.feasible,
                bits: Some((errors, bits)),
            };
            Ok(vec![sample(with), sample(without)])
        }
        ExperimentId::PowerFractionMulticast => {
            let mc = multicast_design(&chans, cfg, rng)?;
            Ok(vec![
                Sample::of(mc.info_fraction, &mc),
                Sample::of(mc.jam_fraction(), &mc),
            ])
        }
        ExperimentId::SinrMulticast => {
            let mc = multicast_design(&chans, cfg, rng)?;
            Ok(vec![
                Sample::of(multicast_sinr(&chans, &mc, cfg, 0)?, &mc),
                Sample::of(eve_mean_sinr(&chans, &mc, cfg)?, &mc),
            ])
        }
    }
}

fn format_db(x: f64) -> String {
    format!("{x}")
}

/// Runs every trial of every sweep point on `workers` threads. The table does
/// not depend on `workers`: trials draw from their own streams and are
/// aggregated in a fixed order.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ResultTable> {
    spec.validate()?;
    let points: Vec<(f64, f64, ScenarioConfig)> = spec
        .points()
        .map(|(p, s)| Ok((p, s, spec.scenario(p, s)?)))
        .collect::<Result<_>>()?;
    let units: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..spec.trials).map(move |t| (i, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<Result<Vec<Sample>>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(i, t)| {
                let mut rng = trial_rng(spec.seed, i, t);
                run_trial(
                    spec.experiment,
                    &points[i].2,
                    spec.symbols_per_trial,
                    &mut rng,
                )
            })
            .collect()
    });

    let base = spec.experiment.series();
    let pooled = spec.experiment == ExperimentId::BerMl;
    let mut accs = vec![vec![Accumulator::default(); base.len()]; points.len()];
    let mut failures = Vec::new();
    for (&(i, t), outcome) in units.iter().zip(outcomes) {
        match outcome {
            Ok(samples) => {
                for (acc, s) in accs[i].iter_mut().zip(samples) {
                    match s.bits {
                        Some((errors, bits)) => acc.push_bits(errors, bits, s.infeasible),
                        None => acc.push(s.value, s.infeasible),
                    }
                }
            }
            Err(e) => failures.push(TrialFailure {
                p_db: points[i].0,
                s_db: points[i].1,
                trial: t as u64,
                message: e.to_string(),
            }),
        }
    }

    let suffixed = !spec.target_grid().is_empty();
    let mut rows = Vec::with_capacity(points.len() * base.len());
    for ((p, s, _), accs) in points.iter().zip(accs) {
        let sweep_db = match spec.sweep_variable() {
            SweepVariable::PDb => *p,
            SweepVariable::SDb => *s,
        };
        for (name, acc) in base.iter().zip(accs) {
            let series = if suffixed {
                format!("{name}_s{}db", format_db(*s))
            } else {
                (*name).to_string()
            };
            rows.push(acc.into_row(sweep_db, series, pooled));
        }
    }
    Ok(ResultTable {
        experiment: spec.experiment,
        sweep_variable: spec.sweep_variable(),
        rows,
        failures,
    })
}
