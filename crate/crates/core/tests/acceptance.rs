//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wiretap::artificial_noise::sample_noise;
use wiretap::eavesdropper::{eve_max_sinr, rayleigh_sinr, EveContext, MlDetector, BPSK};
use wiretap::harness::{jamming_for, run_experiment, trial_rng, ExperimentSpec, ResultTable};
use wiretap::joint::{
    coupling_matrix, joint_design_traced, solve_power_allocation, target_matrix, JointOptions, Link,
};
use wiretap::linalg::{abs2_inner, CMatrix, CVector, C64};
use wiretap::model::{
    broadcast_sinr, complex_gaussian_matrix, complex_gaussian_vector, generate_channels,
    linear_to_db,
};
use wiretap::multicast::{
    multicast_design, multicast_design_traced, solve_socp, MulticastOptions, SocpProblem,
};
use wiretap::socp::SolveStatus;
use wiretap::zf::zf_design;
use wiretap::ScenarioConfig;

const TRIALS: usize = 500;
const WORKERS: usize = 8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn spec_file(name: &str) -> ExperimentSpec {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "specs",
        &format!("{name}.toml"),
    ]
    .iter()
    .collect();
    ExperimentSpec::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn desk_spec(name: &str) -> ExperimentSpec {
    ExperimentSpec {
        trials: TRIALS,
        ..spec_file(name)
    }
}

fn run(spec: &ExperimentSpec) -> ResultTable {
    let table = run_experiment(spec, WORKERS).expect("experiment runs");
    assert!(
        table.failures.is_empty(),
        "failed trials: {:?}",
        table.failures
    );
    table
}

fn cached(cell: &'static OnceLock<ResultTable>, name: &str) -> &'static ResultTable {
    cell.get_or_init(|| run(&desk_spec(name)))
}

static SINR_BROADCAST: OnceLock<ResultTable> = OnceLock::new();
static POWER_BROADCAST: OnceLock<ResultTable> = OnceLock::new();

fn mean(table: &ResultTable, series: &str, p: f64) -> f64 {
    table
        .row(series, p)
        .unwrap_or_else(|| panic!("missing row {series} at {p}"))
        .mean
}

fn db(x: f64) -> f64 {
    linear_to_db(x)
}

/// User 1 sits at the target; the eavesdropper sits well below it.
fn broadcast_sinr_levels() -> Verdict {
    let table = cached(&SINR_BROADCAST, "sinr_broadcast");
    let mut pass = true;
    let mut notes = Vec::new();
    for p in [20.0, 25.0, 30.0] {
        for d in ["zf", "joint"] {
            let user = db(mean(table, &format!("user1_sinr_{d}_s5db"), p));
            pass &= (user - 5.0).abs() <= 0.3;
            notes.push(format!("P{p} {d} user {user:.2}"));
        }
    }
    for d in ["zf", "joint"] {
        let user = db(mean(table, &format!("user1_sinr_{d}_s5db"), 30.0));
        let eve = db(mean(table, &format!("eve_sinr_{d}_s5db"), 30.0));
        pass &= user - eve >= 4.0;
        notes.push(format!(
            "P30 {d} eve {eve:.2} dB ({:.2} dB below user)",
            user - eve
        ));
    }
    verdict(pass, notes.join(", "))
}

/// Information fraction falls with P and the joint design needs less of it.
fn power_fraction_ordering() -> Verdict {
    let table = cached(&POWER_BROADCAST, "power_fraction_broadcast");
    let mut pass = true;
    let mut notes = Vec::new();
    for d in ["zf", "joint"] {
        let curve = table.curve(&format!("rho_{d}_s5db"));
        let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1);
        pass &= decreasing;
        notes.push(format!("rho_{d} decreasing: {decreasing}"));
    }
    for p in [5.0, 10.0, 15.0, 20.0] {
        let zf = mean(table, "rho_zf_s5db", p);
        let joint = mean(table, "rho_joint_s5db", p);
        pass &= joint <= zf;
    }
    let zf = mean(table, "rho_zf_s5db", 10.0);
    let joint = mean(table, "rho_joint_s5db", 10.0);
    let gap = (zf - joint) / zf;
    pass &= (0.03..=0.20).contains(&gap);
    notes.push(format!(
        "rho at 10 dB zf {zf:.4} joint {joint:.4}, relative gap {:.1}%",
        100.0 * gap
    ));
    verdict(pass, notes.join(", "))
}

/// Target at which a decreasing BER curve first falls to `level`,
/// interpolating log10(BER) linearly in dB.
fn crossing_upward(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        (b0 >= level && b1 < level).then(|| {
            if b1 <= 0.0 {
                s1
            } else {
                s0 + (s1 - s0) * (b0.log10() - level.log10()) / (b0.log10() - b1.log10())
            }
        })
    })
}

/// Largest target at or below the top of the grid where the curve is still at
/// least `level`, interpolated as above.
fn crossing_downward(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    let last = *curve.last()?;
    if last.1 >= level {
        return Some(last.0);
    }
    curve.windows(2).rev().find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        (b0 >= level && b1 < level).then(|| {
            if b1 <= 0.0 {
                s1
            } else {
                s0 + (s1 - s0) * (b0.log10() - level.log10()) / (b0.log10() - b1.log10())
            }
        })
    })
}

/// Jamming shifts the eavesdropper's ML BER curve to the right, and the
/// shift vanishes once the targets exhaust the power budget.
fn ber_gap() -> Verdict {
    let spec = spec_file("ber_ml");
    assert!(spec.trials >= 5000 && spec.symbols_per_trial >= 10);
    let table = run(&spec);
    let with = table.curve("ber_an");
    let without = table.curve("ber_no_an");
    let s_with = crossing_upward(&with, 0.05);
    let s_without = crossing_upward(&without, 0.05);
    let gap = match (s_with, s_without) {
        (Some(a), Some(b)) => a - b,
        _ => f64::NAN,
    };
    let (s_max, top) = *with.last().expect("nonempty curve");
    let converge = crossing_downward(&without, top).map_or(f64::NAN, |s| s_max - s);
    verdict(
        gap >= 6.0 && converge < 1.0,
        format!(
            "gap at BER 0.05: {gap:.2} dB (with {:.2} dB, without {:.2} dB); gap at S = {s_max} dB: {converge:.2} dB",
            s_with.unwrap_or(f64::NAN),
            s_without.unwrap_or(f64::NAN)
        ),
    )
}

/// Multicast leaves more power for jamming than zero-forcing broadcast.
fn multicast_jamming_share() -> Verdict {
    let broadcast = cached(&POWER_BROADCAST, "power_fraction_broadcast");
    let mc = run(&desk_spec("power_fraction_multicast"));
    let mut pass = true;
    let mut notes = Vec::new();
    for (p, jam_mc) in mc.curve("jam_mc_s5db") {
        let jam_zf = mean(broadcast, "jam_zf_s5db", p);
        pass &= jam_mc > jam_zf;
        notes.push(format!("P{p} {jam_mc:.3} vs {jam_zf:.3}"));
    }
    verdict(pass, notes.join(", "))
}

/// Multicast eavesdropper stays below the target but above the broadcast one.
fn multicast_eve_sinr() -> Verdict {
    let broadcast = cached(&SINR_BROADCAST, "sinr_broadcast");
    let mc = run(&desk_spec("sinr_multicast"));
    let mut pass = true;
    let mut notes = Vec::new();
    for (p, eve_mc) in mc.curve("eve_sinr_mc_s5db") {
        let below_target = db(eve_mc) < 5.0;
        let above_broadcast = ["zf", "joint"]
            .iter()
            .all(|d| eve_mc > mean(broadcast, &format!("eve_sinr_{d}_s5db"), p));
        pass &= below_target && above_broadcast;
        notes.push(format!(
            "P{p} {:.2} dB (zf {:.2} dB)",
            db(eve_mc),
            db(mean(broadcast, "eve_sinr_zf_s5db", p))
        ));
    }
    verdict(pass, notes.join(", "))
}

/// Jamming is invisible to every user; zero-forcing beams do not leak.
fn orthogonality() -> Verdict {
    let cfg = ScenarioConfig::desk(20.0, 5.0);
    let (mut jam_leak, mut zf_leak) = (0.0f64, 0.0f64);
    for t in 0..1000 {
        let mut rng = trial_rng(61, 0, t);
        let chans = generate_channels(&cfg, &mut rng);
        let zf = zf_design(&chans, &cfg).unwrap();
        let (joint, _) = joint_design_traced(&chans, &cfg, &zf, &JointOptions::default()).unwrap();
        let mc = multicast_design(&chans, &cfg, &mut rng).unwrap();
        for sol in [&zf, &joint, &mc] {
            let nc = jamming_for(&chans, sol, &cfg).unwrap();
            let z = sample_noise(&nc, &mut rng);
            for (w, h) in sol.rx_beams.iter().zip(&chans.user_channels) {
                jam_leak = jam_leak.max(w.dotc(&(h * &z)).norm());
            }
        }
        for k in 0..3 {
            for j in (0..3).filter(|&j| j != k) {
                let leak = zf.rx_beams[k]
                    .dotc(&(&chans.user_channels[k] * &zf.tx_beams[j]))
                    .norm();
                zf_leak = zf_leak.max(leak);
            }
        }
    }
    verdict(
        jam_leak < 1e-9 && zf_leak < 1e-8,
        format!("max jamming leak {jam_leak:.2e}, max zero-forcing leak {zf_leak:.2e}"),
    )
}

/// The duality iteration converges, balances uplink and downlink, meets every
/// target exactly and never needs more power than zero-forcing.
fn duality() -> Verdict {
    let cfg = ScenarioConfig::desk(20.0, 5.0);
    let (mut feasible, mut converged, mut worse_than_zf) = (0, 0, 0);
    let (mut balance, mut target_err) = (0.0f64, 0.0f64);
    for t in 0..1000 {
        let mut rng = trial_rng(71, 0, t);
        let chans = generate_channels(&cfg, &mut rng);
        let zf = zf_design(&chans, &cfg).unwrap();
        let (joint, state) =
            joint_design_traced(&chans, &cfg, &zf, &JointOptions::default()).unwrap();
        if joint.required_power > zf.required_power {
            worse_than_zf += 1;
        }
        if !joint.feasible {
            continue;
        }
        feasible += 1;
        if !joint.converged {
            continue;
        }
        converged += 1;
        let down = state.downlink_powers.sum();
        let up = state.uplink_powers.sum();
        balance = balance.max((down - up).abs() / down);
        for k in 0..3 {
            let s = broadcast_sinr(&chans, &joint, &cfg, k).unwrap();
            target_err = target_err.max((s - cfg.sinr_targets[k]).abs() / cfg.sinr_targets[k]);
        }
    }
    let rate = converged as f64 / feasible as f64;
    verdict(
        rate >= 0.99 && balance <= 1e-5 && target_err <= 1e-6 && worse_than_zf == 0,
        format!(
            "converged {converged}/{feasible}, max power imbalance {balance:.1e}, max target error {target_err:.1e}, above zero-forcing {worse_than_zf}"
        ),
    )
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Closed-form power allocation against an independent linear solve.
fn power_allocation_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let (mut checked, mut x_err, mut sinr_err) = (0, 0.0f64, 0.0f64);
    while checked < 1000 {
        let k = rng.random_range(1..=4);
        let gains = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                rng.random_range(0.5..3.0)
            } else {
                rng.random_range(0.0..0.4)
            }
        });
        let targets: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let c = coupling_matrix(&gains, Link::Downlink);
        let d = target_matrix(&gains, &targets);
        let Ok(x) = solve_power_allocation(&c, &d) else {
            continue;
        };
        checked += 1;
        // (I - D C) x = D 1 with D = diag(gamma_k / G_kk).
        let a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let dc = if i == j {
                            0.0
                        } else {
                            targets[i] / gains[(i, i)] * gains[(i, j)]
                        };
                        f64::from(u8::from(i == j)) - dc
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..k).map(|i| targets[i] / gains[(i, i)]).collect();
        let oracle = dense_solve(a, b);
        for i in 0..k {
            x_err = x_err.max((x[i] - oracle[i]).abs() / oracle[i].abs().max(1.0));
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| gains[(i, j)] * x[j])
                .sum();
            let sinr = gains[(i, i)] * x[i] / (interference + 1.0);
            sinr_err = sinr_err.max((sinr - targets[i]).abs() / targets[i]);
        }
    }
    verdict(
        x_err <= 1e-8 && sinr_err <= 1e-9,
        format!(
            "{checked} instances, max allocation error {x_err:.1e}, max SINR error {sinr_err:.1e}"
        ),
    )
}

/// Smallest `t >= 0` with `|c_k . (t d) - 1| <= r_k` for every user.
fn ray_minimum(rows: &[[f64; 2]], radii: &[f64], theta: f64) -> f64 {
    let d = [theta.cos(), theta.sin()];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (c, &r) in rows.iter().zip(radii) {
        let p = c[0] * d[0] + c[1] * d[1];
        if p.abs() < 1e-15 {
            if r < 1.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let (a, b) = ((1.0 - r) / p, (1.0 + r) / p);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo <= hi {
        lo
    } else {
        f64::INFINITY
    }
}

/// Grid search over directions of real `u`, zooming in around the best one.
fn grid_minimum(rows: &[[f64; 2]], radii: &[f64]) -> f64 {
    let tau = std::f64::consts::TAU;
    let coarse = 20_000;
    let (mut best, mut center) = (f64::INFINITY, 0.0);
    for i in 0..coarse {
        let theta = tau * i as f64 / coarse as f64;
        let t = ray_minimum(rows, radii, theta);
        if t < best {
            (best, center) = (t, theta);
        }
    }
    let mut half = tau / coarse as f64;
    for _ in 0..4 {
        let steps = 200;
        let base = center;
        for i in 0..=steps {
            let theta = base - half + 2.0 * half * i as f64 / steps as f64;
            let t = ray_minimum(rows, radii, theta);
            if t < best {
                (best, center) = (t, theta);
            }
        }
        half /= 50.0;
    }
    best
}

/// Cone solver against grid search, solver accuracy, and monotone alternation.
fn socp_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let (mut checked, mut obj_err, mut kkt) = (0, 0.0f64, 0.0f64);
    while checked < 200 {
        let n_tx = if checked % 4 == 0 { 1 } else { 2 };
        let users = rng.random_range(1..=3);
        let rows: Vec<[f64; 2]> = (0..users)
            .map(|_| {
                let a = rng.random_range(-2.0..2.0);
                let b = if n_tx == 2 {
                    rng.random_range(-2.0..2.0)
                } else {
                    0.0
                };
                [a, b]
            })
            .collect();
        let eps: Vec<f64> = (0..users).map(|_| rng.random_range(0.1..0.7)).collect();
        let noise: Vec<f64> = eps.iter().map(|e| rng.random_range(0.0..0.5) * e).collect();
        let prob = SocpProblem {
            gains: rows
                .iter()
                .map(|r| {
                    RowDVector::from_iterator(n_tx, r[..n_tx].iter().map(|&x| C64::new(x, 0.0)))
                })
                .collect(),
            mse_targets: eps.clone(),
            noise_terms: noise.clone(),
        };
        let Ok(sol) = solve_socp(&prob) else { continue };
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        checked += 1;
        kkt = kkt
            .max(sol.kkt_residuals.max_residual())
            .max(sol.kkt_residuals.cone_violation);
        let radii: Vec<f64> = eps
            .iter()
            .zip(&noise)
            .map(|(e, w)| (e - w).sqrt())
            .collect();
        let oracle = grid_minimum(&rows, &radii);
        obj_err = obj_err.max((sol.objective - oracle).abs() / oracle.max(1e-12));
    }

    let mut monotone = true;
    let mut loops = 0;
    for (i, s_db) in [5.0, 10.0].into_iter().enumerate() {
        let cfg = ScenarioConfig::desk(20.0, s_db);
        for t in 0..100 {
            let mut rng = trial_rng(92, i, t);
            let chans = generate_channels(&cfg, &mut rng);
            let (_, trace) =
                multicast_design_traced(&chans, &cfg, &mut rng, &MulticastOptions::default())
                    .unwrap();
            monotone &= trace.power_history.windows(2).all(|w| w[1] <= w[0]);
            for r in &trace.solves {
                kkt = kkt.max(r.max_residual()).max(r.cone_violation);
            }
            loops += 1;
        }
    }
    verdict(
        obj_err <= 1e-3 && kkt < 1e-7 && monotone,
        format!(
            "{checked} instances, max objective error {obj_err:.1e}, max KKT residual {kkt:.1e}, {loops} multicast loops monotone: {monotone}"
        ),
    )
}

/// ML detection, max-SINR consistency, and scale invariance of the detector.
fn detector() -> Verdict {
    let cfg = ScenarioConfig::desk(20.0, 5.0);
    let mut exact = 0;
    let mut sinr_err = 0.0f64;
    for t in 0..1000 {
        let mut rng = trial_rng(101, 0, t);
        let chans = generate_channels(&cfg, &mut rng);
        let zf = zf_design(&chans, &cfg).unwrap();
        let nc = jamming_for(&chans, &zf, &cfg).unwrap();
        let ctx = EveContext::new(&chans, &zf, Some(&nc), &cfg).unwrap();
        let det = MlDetector::new(&ctx, &BPSK).unwrap();
        let bits: Vec<usize> = (0..3).map(|_| usize::from(rng.random::<bool>())).collect();
        let y = ctx
            .signatures
            .iter()
            .zip(&bits)
            .fold(CVector::zeros(4), |acc, (a, &b)| acc + a * BPSK[b]);
        if det.detect(&y) == bits {
            exact += 1;
        }
        for k in 0..3 {
            let (w, sinr) = eve_max_sinr(&ctx, k).unwrap();
            let direct = rayleigh_sinr(&ctx, k, &w).unwrap();
            // First principles: signal and interference-plus-noise through w.
            let signal = abs2_inner(&w, &ctx.signatures[k]);
            let mut rest =
                cfg.noise_var_eve * w.norm_squared() + w.dotc(&(&ctx.jam_covariance * &w)).re;
            for j in (0..3).filter(|&j| j != k) {
                rest += abs2_inner(&w, &ctx.signatures[j]);
            }
            sinr_err = sinr_err
                .max((sinr - direct).abs() / sinr)
                .max((sinr - signal / rest).abs() / sinr);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut invariant = 0;
    for _ in 0..100 {
        let sig = complex_gaussian_matrix(4, 3, &mut rng);
        let g = complex_gaussian_matrix(4, 4, &mut rng);
        let q = &g * g.adjoint() + CMatrix::identity(4, 4);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = MlDetector::with_covariance(&q, &sig, &BPSK).unwrap();
        let b = MlDetector::with_covariance(&(&q * C64::new(scale, 0.0)), &sig, &BPSK).unwrap();
        let y = complex_gaussian_vector(4, &mut rng) * C64::new(2.0, 0.0);
        if a.detect(&y) == b.detect(&y) {
            invariant += 1;
        }
    }
    verdict(
        exact == 1000 && sinr_err <= 1e-10 && invariant == 100,
        format!("noiseless exact {exact}/1000, max SINR mismatch {sinr_err:.1e}, scale-invariant {invariant}/100"),
    )
}

/// The same seed gives byte-identical output on 1 and 8 workers.
fn determinism() -> Verdict {
    let spec = desk_spec("sinr_broadcast");
    let csv = |workers| {
        let table = run_experiment(&spec, workers).expect("experiment runs");
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        buf
    };
    let one = csv(1);
    let eight = csv(8);
    verdict(
        one == eight && !one.is_empty(),
        format!(
            "{} bytes from 1 worker, {} bytes from 8, identical: {}",
            one.len(),
            eight.len(),
            one == eight
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("broadcast SINR levels", broadcast_sinr_levels),
        ("broadcast power fraction ordering", power_fraction_ordering),
        ("eavesdropper ML BER gap", ber_gap),
        ("multicast jamming share", multicast_jamming_share),
        ("multicast eavesdropper SINR", multicast_eve_sinr),
        ("orthogonality", orthogonality),
        ("duality", duality),
        ("power allocation oracle", power_allocation_oracle),
        ("cone program oracle", socp_oracle),
        ("detector", detector),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!outcome.pass);
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
