//! Dense primal-dual interior-point solver for second-order cone programs.
//!
//! Solves
//!
//! ```text
//! minimize    c^T x
//! subject to  G x + s = h,   s in K
//! ```
//!
//! where `K` is a product of second-order cones
//! `{ (s0, s1) : s0 >= ||s1|| }`, together with the dual
//!
//! ```text
//! maximize    -h^T z
//! subject to  G^T z + c = 0,   z in K.
//! ```
//!
//! The iteration is an infeasible-start path-following method with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Newton
//! systems are reduced to normal equations in the scaled variables and solved
//! through a QR factorization of `W^{-1} G`. Problems here have a few dozen
//! variables at most, so everything is dense.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    /// Relative primal/dual residual and relative gap accepted as optimal.
    pub tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-9,
            step_fraction: 0.99,
        }
    }
}

/// A cone program in the standard form above. `cones` lists the dimension of
/// each second-order cone; they partition the rows of `G` in order.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cones: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The dual became unbounded along a direction certifying primal infeasibility.
    Infeasible,
    /// Stopped before convergence: iteration cap reached or the Newton system broke down.
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `||G x + s - h|| / max(1, ||h||)`
    pub primal: f64,
    /// `||G^T z + c|| / max(1, ||c||)`
    pub dual: f64,
    /// `s^T z`
    pub gap: f64,
    /// `s^T z / max(|c^T x|, |h^T z|)`
    pub relative_gap: f64,
    /// Largest violation `||s1|| - s0` over all cones (negative when interior).
    pub cone_violation: f64,
}

impl KktResiduals {
    pub fn max_residual(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.relative_gap.min(self.gap))
    }
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: KktResiduals,
}

// ----- second-order cone arithmetic on one block ---------------------------

fn soc_det(x: &[f64]) -> f64 {
    let tail = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (x[0] - tail) * (x[0] + tail)
}

/// Jordan product `x ∘ y = (x^T y, x0 y1 + y0 x1)`.
fn soc_product(x: &[f64], y: &[f64], out: &mut [f64]) {
    out[0] = x.iter().zip(y).map(|(a, b)| a * b).sum();
    for i in 1..x.len() {
        out[i] = x[0] * y[i] + y[0] * x[i];
    }
}

/// Solves `l ∘ u = r` for `u`.
fn soc_divide(l: &[f64], r: &[f64], out: &mut [f64]) {
    let dot_tail: f64 = l[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
    let u0 = (l[0] * r[0] - dot_tail) / soc_det(l);
    out[0] = u0;
    for i in 1..l.len() {
        out[i] = (r[i] - u0 * l[i]) / l[0];
    }
}

/// Largest `a >= 0` with `x + a d` in the cone (`x` interior). `INFINITY` when unbounded.
fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    let qa = soc_det(d);
    let qb = 2.0 * (x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum::<f64>());
    let qc = soc_det(x);
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-14 * scale {
        return if qb < 0.0 { -qc / qb } else { f64::INFINITY };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let roots = [q / qa, if q != 0.0 { qc / q } else { f64::INFINITY }];
    roots
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Nesterov-Todd scaling for one cone: symmetric `W` with `W z = W^{-1} s`.
fn nt_scaling(s: &[f64], z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = s.len();
    let sd = soc_det(s).sqrt();
    let zd = soc_det(z).sqrt();
    let beta = (sd / zd).sqrt();
    let sb: Vec<f64> = s.iter().map(|v| v / sd).collect();
    let zb: Vec<f64> = z.iter().map(|v| v / zd).collect();
    let dot: f64 = sb.iter().zip(&zb).map(|(a, b)| a * b).sum();
    let gamma = ((1.0 + dot) / 2.0).sqrt();
    let mut w = vec![0.0; n];
    w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    for i in 1..n {
        w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
    }
    let mut fwd = DMatrix::zeros(n, n);
    let mut inv = DMatrix::zeros(n, n);
    fwd[(0, 0)] = w[0];
    inv[(0, 0)] = w[0];
    for i in 1..n {
        fwd[(0, i)] = w[i];
        fwd[(i, 0)] = w[i];
        inv[(0, i)] = -w[i];
        inv[(i, 0)] = -w[i];
        for j in 1..n {
            let v = w[i] * w[j] / (1.0 + w[0]) + if i == j { 1.0 } else { 0.0 };
            fwd[(i, j)] = v;
            inv[(i, j)] = v;
        }
    }
    (fwd * beta, inv / beta)
}

// ----- solver --------------------------------------------------------------

struct Blocks<'a> {
    dims: &'a [usize],
}

impl Blocks<'_> {
    fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = 0;
        self.dims.iter().map(move |&d| {
            let r = start..start + d;
            start += d;
            r
        })
    }

    fn identity(&self, m: usize) -> DVector<f64> {
        let mut e = DVector::zeros(m);
        for r in self.ranges() {
            e[r.start] = 1.0;
        }
        e
    }

    /// Smallest `x0 - ||x1||` over the blocks.
    fn min_margin(&self, x: &DVector<f64>) -> f64 {
        self.ranges()
            .map(|r| {
                let b = &x.as_slice()[r];
                b[0] - b[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn max_step(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.ranges()
            .map(|r| soc_max_step(&x.as_slice()[r.clone()], &d.as_slice()[r]))
            .fold(f64::INFINITY, f64::min)
    }

    fn product(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for r in self.ranges() {
            soc_product(
                &x.as_slice()[r.clone()],
                &y.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
            );
        }
        out
    }

    fn divide(&self, l: &DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(l.len());
        for r in self.ranges() {
            soc_divide(
                &l.as_slice()[r.clone()],
                &rhs.as_slice()[r.clone()],
                &mut out.as_mut_slice()[r],
            );
        }
        out
    }

    fn scaling(&self, s: &DVector<f64>, z: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = s.len();
        let mut w = DMatrix::zeros(m, m);
        let mut w_inv = DMatrix::zeros(m, m);
        for r in self.ranges() {
            let (f, i) = nt_scaling(&s.as_slice()[r.clone()], &z.as_slice()[r.clone()]);
            w.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&f);
            w_inv
                .view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&i);
        }
        (w, w_inv)
    }
}

/// Newton direction for a given complementarity right-hand side.
struct NewtonSystem {
    g: DMatrix<f64>,
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    g_scaled: DMatrix<f64>,
    r: DMatrix<f64>,
}

/// Rounds of iterative refinement applied to each Newton direction.
const REFINEMENT_STEPS: usize = 2;

impl NewtonSystem {
    fn new(g: &DMatrix<f64>, w: DMatrix<f64>, w_inv: DMatrix<f64>) -> Option<Self> {
        let g_scaled = &w_inv * g;
        let r = g_scaled.clone().qr().r();
        if r.diagonal()
            .iter()
            .any(|d| d.abs() < 1e-300 || !d.is_finite())
        {
            return None;
        }
        Some(Self {
            g: g.clone(),
            w,
            w_inv,
            g_scaled,
            r,
        })
    }

    /// Solves the linearized KKT system
    /// `G^T dz = -rd`, `G dx + ds = -rp`, `λ ∘ (W^{-1} ds + W dz) = rc`.
    ///
    /// The reduced solve squares the conditioning of `W^{-1} G`, so the
    /// direction is refined against the full system.
    fn solve(
        &self,
        blocks: &Blocks,
        lambda: &DVector<f64>,
        rd: &DVector<f64>,
        rp: &DVector<f64>,
        rc: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (mut dx, mut ds, mut dz) = self.solve_reduced(blocks, lambda, rd, rp, rc)?;
        for _ in 0..REFINEMENT_STEPS {
            let e_d = self.g.transpose() * &dz + rd;
            let e_p = &self.g * &dx + &ds + rp;
            let e_c = blocks.product(lambda, &(&self.w_inv * &ds + &self.w * &dz)) - rc;
            let (cx, cs, cz) = self.solve_reduced(blocks, lambda, &e_d, &e_p, &-e_c)?;
            dx += cx;
            ds += cs;
            dz += cz;
        }
        Some((dx, ds, dz))
    }

    fn solve_reduced(
        &self,
        blocks: &Blocks,
        lambda: &DVector<f64>,
        rd: &DVector<f64>,
        rp: &DVector<f64>,
        rc: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let l_rc = blocks.divide(lambda, rc);
        let b = -(&self.w_inv * rp) - &l_rc;
        let rhs = self.g_scaled.transpose() * &b - rd;
        let y = self.r.transpose().solve_lower_triangular(&rhs)?;
        let dx = self.r.solve_upper_triangular(&y)?;
        let dz_scaled = &self.g_scaled * &dx - b;
        let dz = &self.w_inv * &dz_scaled;
        let ds = &self.w * (l_rc - dz_scaled);
        Some((dx, ds, dz))
    }
}

fn residuals(
    prog: &ConeProgram,
    blocks: &Blocks,
    x: &DVector<f64>,
    s: &DVector<f64>,
    z: &DVector<f64>,
) -> KktResiduals {
    let rp = &prog.g * x + s - &prog.h;
    let rd = prog.g.transpose() * z + &prog.c;
    let gap = s.dot(z);
    let pcost = prog.c.dot(x);
    let dcost = -prog.h.dot(z);
    let denom = pcost.abs().max(dcost.abs());
    KktResiduals {
        primal: rp.norm() / prog.h.norm().max(1.0),
        dual: rd.norm() / prog.c.norm().max(1.0),
        gap,
        relative_gap: if denom > 0.0 {
            gap / denom
        } else {
            f64::INFINITY
        },
        cone_violation: -blocks.min_margin(s).min(blocks.min_margin(z)),
    }
}

/// Solves `prog`. Malformed input (dimension mismatch, cones not covering the
/// rows of `G`, rank-deficient `G`) panics.
pub fn solve(prog: &ConeProgram, settings: &IpmSettings) -> ConeSolution {
    let (m, n) = prog.g.shape();
    assert_eq!(prog.c.len(), n, "c must have one entry per column of G");
    assert_eq!(prog.h.len(), m, "h must have one entry per row of G");
    assert_eq!(
        prog.cones.iter().sum::<usize>(),
        m,
        "cones must partition the rows of G"
    );
    assert!(prog.cones.iter().all(|&d| d >= 1));
    let blocks = Blocks { dims: &prog.cones };
    let degree = prog.cones.len() as f64;
    let e = blocks.identity(m);

    // Least-squares primal start and least-norm dual start, then shift both
    // into the cone interior.
    let qr = prog.g.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let mut x = r
        .solve_upper_triangular(&(q.transpose() * &prog.h))
        .expect("G must have full column rank");
    let mut s = &prog.h - &prog.g * &x;
    let mut z = -(&q
        * r.transpose()
            .solve_lower_triangular(&prog.c)
            .expect("G must have full column rank"));
    for v in [&mut s, &mut z] {
        let shift = -blocks.min_margin(v);
        if shift >= 0.0 {
            *v += &e * (1.0 + shift);
        }
    }

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    loop {
        let res = residuals(prog, &blocks, &x, &s, &z);
        let converged = res.primal <= settings.tol
            && res.dual <= settings.tol
            && (res.relative_gap <= settings.tol || res.gap <= settings.tol * 1e-3);
        if converged {
            status = SolveStatus::Optimal;
            break;
        }
        let hz = prog.h.dot(&z);
        if hz < 0.0 && (prog.g.transpose() * &z).norm() <= settings.tol * -hz {
            status = SolveStatus::Infeasible;
            break;
        }
        if iterations == settings.max_iter {
            break;
        }
        iterations += 1;

        let (w, w_inv) = blocks.scaling(&s, &z);
        let lambda = &w * &z;
        let Some(newton) = NewtonSystem::new(&prog.g, w, w_inv) else {
            break;
        };
        let rp = &prog.g * &x + &s - &prog.h;
        let rd = prog.g.transpose() * &z + &prog.c;
        let mu = s.dot(&z) / degree;

        // Predictor.
        let rc_aff = -blocks.product(&lambda, &lambda);
        let Some((_, ds_a, dz_a)) = newton.solve(&blocks, &lambda, &rd, &rp, &rc_aff) else {
            break;
        };
        let alpha_aff = blocks
            .max_step(&s, &ds_a)
            .min(blocks.max_step(&z, &dz_a))
            .min(1.0);
        let sigma = (1.0 - alpha_aff).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let cross = blocks.product(&(&newton.w_inv * &ds_a), &(&newton.w * &dz_a));
        let rc = rc_aff - cross + &e * (sigma * mu);
        let Some((dx, ds, dz)) = newton.solve(&blocks, &lambda, &rd, &rp, &rc) else {
            break;
        };
        let alpha_max = blocks.max_step(&s, &ds).min(blocks.max_step(&z, &dz));
        let alpha = (settings.step_fraction * alpha_max).min(1.0);
        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }

    let residuals = residuals(prog, &blocks, &x, &s, &z);
    ConeSolution {
        primal_objective: prog.c.dot(&x),
        dual_objective: -prog.h.dot(&z),
        x,
        s,
        z,
        status,
        iterations,
        residuals,
    }
}
