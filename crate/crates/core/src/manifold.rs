//! Parameterization of the local unstable manifold of a periodic orbit.
//!
//! The unknown is an m-tuple of vector-valued two-level series
//! `P_j(t, sigma)` subject to the conjugacy relation
//!
//! ```text
//! P_j(Λ sigma) = E P_{j-1}(sigma) + S[(tau/2) f(P_j(Λ sigma), P_{j-1}(sigma))],
//! ```
//!
//! cyclic in `j`, with `Λ = diag(lambda)`. The Taylor order-0 slices are the
//! periodic-orbit segments and the order-1 slices the transported Floquet
//! eigenvectors, so the relation pins all higher orders through linear solves
//! against the same step-linearization blocks used by the Floquet stage:
//! order `alpha` satisfies `(lambda^alpha (I - K1) - K2) p_alpha = R_alpha`,
//! where `R_alpha` collects products of strictly lower-order slices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chebseq::{ChebSeq, CVecSeq, VecChebSeq};
use crate::floquet::{e_block, FloquetData};
use crate::linalg::Lu;
use crate::models::DdeModel;
use crate::periodic::SegmentedOrbit;
use crate::stepper::{s_d1_block, s_d2_block, step, StepOptions};
use crate::taylorcheb::{
    indices_of_degree, simplex_size, CTaylorVec, TaylorChebSeq, TaylorVecSeq,
};
use crate::{Error, Result};

/// A solved local-manifold parameterization.
#[derive(Debug, Clone)]
pub struct ManifoldParam {
    /// One vector-valued two-level series per orbit segment.
    pub p: Vec<CTaylorVec>,
    /// Segment-map eigenvalues, one per unstable direction.
    pub lambdas: Vec<Complex64>,
    /// First-order scalings actually applied (after auto-rescale).
    pub gamma: Vec<f64>,
    pub tau: f64,
    /// Chebyshev truncation degree `N`.
    pub degree: usize,
    /// Taylor truncation order `N'`.
    pub taylor_order: usize,
    /// Minimum over solved orders of the estimated smallest singular value
    /// of the order matrix (non-resonance margin).
    pub min_sigma_est: f64,
}

impl ManifoldParam {
    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn dim(&self) -> usize {
        self.p[0].dim()
    }

    pub fn n_u(&self) -> usize {
        self.lambdas.len()
    }

    /// Total number of stored Taylor–Chebyshev coefficients.
    pub fn coefficient_count(&self) -> usize {
        self.m() * self.dim() * (self.degree + 1) * simplex_size(self.n_u(), self.taylor_order)
    }

    /// Evaluate segment `j` (1-based) at a Taylor argument.
    pub fn eval_segment(&self, j: usize, sigma: &[Complex64]) -> CVecSeq {
        self.p[j - 1].eval_taylor(sigma)
    }

    /// The full-loop multiplier `lambda^m` (single unstable direction).
    pub fn mu(&self) -> Complex64 {
        assert_eq!(self.n_u(), 1);
        self.lambdas[0].powu(self.m() as u32)
    }
}

/// Options for the order-by-order manifold solve.
#[derive(Debug, Clone)]
pub struct ManifoldOptions {
    /// Taylor truncation order `N'`.
    pub taylor_order: usize,
    /// Fixed first-order scalings; `None` auto-rescales so the top-order
    /// slice norm lands near `target_top_norm`.
    pub gamma: Option<Vec<f64>>,
    pub target_top_norm: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self { taylor_order: 15, gamma: None, target_top_norm: 1e-12 }
    }
}

/// The two step-linearization block operators on the stacked segment space:
/// `K1` is block diagonal with `S[(tau/2) D1f(c_j, c_{j-1})]`, `K2` block
/// cyclic with `E + S[(tau/2) D2f(c_j, c_{j-1})]` at `(j, j-1)`.
pub fn assemble_k1_k2(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    degree: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = orbit.m();
    let n = model.dim;
    let len = n * (degree + 1);
    let mut k1 = DMatrix::zeros(m * len, m * len);
    let mut k2 = DMatrix::zeros(m * len, m * len);
    let e = e_block(n, degree);
    for j in 0..m {
        let jp = (j + m - 1) % m;
        let cur = &orbit.segments[j];
        let prev = &orbit.segments[jp];
        let d1 = s_d1_block(model, cur, prev, orbit.tau, degree);
        k1.view_mut((j * len, j * len), (len, len)).copy_from(&d1);
        let d2 = s_d2_block(model, cur, prev, orbit.tau, degree) + &e;
        k2.view_mut((j * len, jp * len), (len, len)).copy_from(&d2);
    }
    (k1, k2)
}

fn promote(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}

fn lambda_pow(lambdas: &[Complex64], alpha: &[usize]) -> Complex64 {
    lambdas
        .iter()
        .zip(alpha)
        .fold(Complex64::new(1.0, 0.0), |acc, (l, &a)| acc * l.powu(a as u32))
}

fn slice_or_zero(a: &TaylorChebSeq<Complex64>, alpha: &[usize]) -> ChebSeq<Complex64> {
    if a.n_u != alpha.len() {
        return ChebSeq::zeros(1);
    }
    let r = crate::taylorcheb::rank_of(alpha);
    if r < a.slices.len() { a.slices[r].clone() } else { ChebSeq::zeros(1) }
}

/// The order-`alpha` right-hand side: per segment the `alpha` slice of
/// `S[(tau/2) f((L_Λ P_j) truncated, P_{j-1} truncated)]`, where truncation
/// keeps Taylor orders `< |alpha|` so only lower-order data contributes.
pub fn assemble_r_alpha(
    p: &[CTaylorVec],
    alpha: &[usize],
    lambdas: &[Complex64],
    tau: f64,
    model: &DdeModel,
    degree: usize,
) -> DVector<Complex64> {
    let m = p.len();
    let n = model.dim;
    let len = n * (degree + 1);
    let d: usize = alpha.iter().sum();
    assert!(d >= 1, "right-hand sides start at Taylor order one");
    let truncated: Vec<CTaylorVec> = p.iter().map(|pj| pj.taylor_truncate(d - 1)).collect();
    let scaled: Vec<CTaylorVec> = truncated
        .iter()
        .map(|pj| {
            TaylorVecSeq::new(
                pj.components.iter().map(|c| c.scale_lambda(lambdas)).collect(),
            )
        })
        .collect();
    let mut rhs = DVector::zeros(m * len);
    let half_tau = Complex64::new(0.5 * tau, 0.0);
    for j in 0..m {
        let jp = (j + m - 1) % m;
        let f = model.eval(&scaled[j].components, &truncated[jp].components);
        for (i, fi) in f.iter().enumerate() {
            let slice = slice_or_zero(fi, alpha);
            let integ = slice.scale(half_tau).integrate_from_left().truncated(degree);
            for (k, &c) in integ.coeffs().iter().enumerate() {
                rhs[j * len + i * (degree + 1) + k] = c;
            }
        }
    }
    rhs
}

/// Solve the manifold recurrence from explicit first-order data (general
/// number of unstable directions). `first_order[l][j]` is direction `l`'s
/// transported eigenvector on segment `j+1`.
pub fn solve_manifold_general(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    lambdas: &[Complex64],
    first_order: &[Vec<CVecSeq>],
    opts: &ManifoldOptions,
) -> Result<ManifoldParam> {
    let m = orbit.m();
    let n = model.dim;
    let degree = orbit.degree();
    let len = n * (degree + 1);
    let n_u = lambdas.len();
    let order = opts.taylor_order;
    assert_eq!(first_order.len(), n_u, "one eigenvector family per direction");
    for fam in first_order {
        assert_eq!(fam.len(), m, "one eigenvector per segment");
    }

    // Seed orders 0 and 1.
    let gamma0 = opts.gamma.clone().unwrap_or_else(|| vec![1.0; n_u]);
    let mut p: Vec<CTaylorVec> = (0..m)
        .map(|j| {
            let comps = (0..n)
                .map(|i| {
                    let mut series = TaylorChebSeq::zeros(n_u, order, degree + 1);
                    series.slices[0] = orbit.segments[j].components[i]
                        .truncated(degree)
                        .map_scalar(|x| Complex64::new(x, 0.0));
                    for (l, fam) in first_order.iter().enumerate() {
                        let mut e_l = vec![0usize; n_u];
                        e_l[l] = 1;
                        *series.slice_mut(&e_l) = fam[j].components[i]
                            .truncated(degree)
                            .scale(Complex64::new(gamma0[l], 0.0));
                    }
                    series
                })
                .collect();
            TaylorVecSeq::new(comps)
        })
        .collect();

    let (k1, k2) = assemble_k1_k2(orbit, model, degree);
    let ik1 = promote(&(DMatrix::identity(m * len, m * len) - k1));
    let k2c = promote(&k2);

    let mut min_sigma = f64::INFINITY;
    for d in 2..=order {
        for alpha in indices_of_degree(n_u, d) {
            let la = lambda_pow(lambdas, &alpha);
            let a = ik1.map(|v| v * la) - &k2c;
            let lu = Lu::factor(a, "manifold order matrix").map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::Resonance {
                    alpha: alpha.clone(),
                    detail: format!("order matrix singular at lambda^alpha = {la}"),
                },
                other => other,
            })?;
            min_sigma = min_sigma.min(lu.smallest_singular_estimate()?);
            let rhs = assemble_r_alpha(&p, &alpha, lambdas, orbit.tau, model, degree);
            let sol = lu.solve_vec(&rhs)?;
            for j in 0..m {
                for i in 0..n {
                    let start = j * len + i * (degree + 1);
                    *p[j].components[i].slice_mut(&alpha) =
                        ChebSeq::new(sol.as_slice()[start..start + degree + 1].to_vec());
                }
            }
        }
    }

    // Auto-rescale: scaling the first-order data by t multiplies each
    // order-d slice by t^d, so one post-hoc pass sets the top-order norm.
    let mut gamma = gamma0;
    if opts.gamma.is_none() && order >= 2 {
        let top = p
            .iter()
            .flat_map(|pj| pj.components.iter())
            .map(|c| c.degree_slice_norm(order))
            .fold(0.0f64, f64::max);
        if top > 0.0 {
            let t = (opts.target_top_norm / top).powf(1.0 / order as f64);
            for pj in &mut p {
                for c in &mut pj.components {
                    for dd in 1..=order {
                        let start = simplex_size(n_u, dd - 1);
                        let end = simplex_size(n_u, dd);
                        let w = Complex64::new(t.powi(dd as i32), 0.0);
                        for s in &mut c.slices[start..end] {
                            *s = s.scale(w);
                        }
                    }
                }
            }
            for g in &mut gamma {
                *g *= t;
            }
        }
    }

    Ok(ManifoldParam {
        p,
        lambdas: lambdas.to_vec(),
        gamma,
        tau: orbit.tau,
        degree,
        taylor_order: order,
        min_sigma_est: min_sigma,
    })
}

/// Solve the manifold for the single dominant unstable direction of a
/// Floquet analysis. The transported eigenvector family is first normalized
/// so the physical component of the **first** segment has endpoint value
/// one. Besides removing the eigensolver's phase ambiguity this keeps the
/// base eigenvector real for a negative real multiplier, which is what makes
/// the rotated-ray slices of the manifold real.
pub fn solve_manifold(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    fd: &FloquetData,
    opts: &ManifoldOptions,
) -> Result<ManifoldParam> {
    let m = orbit.m();
    assert_eq!(fd.vectors.len(), m);
    let anchor = fd.vectors[0].components[0].eval_right();
    if anchor.norm() < 1e-300 {
        return Err(Error::InvalidInput(
            "eigenvector endpoint vanishes; cannot normalize".into(),
        ));
    }
    let scale = Complex64::new(1.0, 0.0) / anchor;
    let fam: Vec<CVecSeq> = fd
        .vectors
        .iter()
        .map(|v| VecChebSeq::new(v.components.iter().map(|c| c.scale(scale)).collect()))
        .collect();
    solve_manifold_general(orbit, model, &[fd.lambda], &[fam], opts)
}

/// Maximum over sample arguments of the segmentwise sup-norm conjugacy
/// defect `P_j(lambda sigma) - Step(P_{j-1}(sigma))`.
pub fn conjugacy_residual(
    param: &ManifoldParam,
    model: &DdeModel,
    sigmas: &[Complex64],
) -> Result<f64> {
    assert_eq!(param.n_u(), 1);
    let m = param.m();
    let lambda = param.lambdas[0];
    let opts = StepOptions::default();
    let mut worst = 0.0f64;
    for &sigma in sigmas {
        for j in 0..m {
            let jp = (j + m - 1) % m;
            let phi = param.p[jp].eval_taylor(&[sigma]);
            let stepped = step(&phi, param.tau, model, param.degree, &opts)?.segment;
            let target = param.p[j].eval_taylor(&[lambda * sigma]);
            worst = worst.max(sup_distance_all(&target, &stepped));
        }
    }
    Ok(worst)
}

/// Sup over Chebyshev sample points and components of the difference.
fn sup_distance_all(a: &CVecSeq, b: &CVecSeq) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..33 {
        let t = (std::f64::consts::PI * i as f64 / 32.0).cos();
        for (ca, cb) in a.components.iter().zip(&b.components) {
            worst = worst.max((ca.eval(t) - cb.eval(t)).norm());
        }
    }
    worst
}

/// Sup over Chebyshev sample points of the first (physical) component.
pub fn sup_distance_first(a: &VecChebSeq<f64>, b: &VecChebSeq<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..33 {
        let t = (std::f64::consts::PI * i as f64 / 32.0).cos();
        worst = worst.max((a.components[0].eval(t) - b.components[0].eval(t)).abs());
    }
    worst
}

/// First component of the orbit shifted by `theta` in time, expressed on the
/// local chart of segment `j` (1-based).
pub fn shifted_segment(
    orbit: &SegmentedOrbit,
    j: usize,
    theta: f64,
    degree: usize,
) -> VecChebSeq<f64> {
    let tau = orbit.tau;
    let base = (j - 1) as f64 * tau;
    let n = orbit.dim();
    VecChebSeq::new(
        (0..n)
            .map(|i| {
                crate::chebseq::interpolate(
                    |t| orbit.eval_orbit(base + theta + tau * (t + 1.0) / 2.0)[i],
                    degree,
                )
            })
            .collect(),
    )
}

/// Report of the boundary-growth return search.
#[derive(Debug, Clone)]
pub struct ReturnReport {
    /// Iterations before the landing step (landing happens at step `k + 1`).
    pub k: usize,
    /// 1-based orbit segment nearest at landing.
    pub j_star: usize,
    /// Endpoint (anchor) value of the time-shifted orbit nearest at landing.
    pub phase: f64,
    /// Departure Taylor argument on the last segment's real ray.
    pub sigma: f64,
    /// Landing distance actually achieved.
    pub distance: f64,
    /// Continuum time shift of the orbit at the nearest alignment.
    pub theta: f64,
}

/// Options for [`grow_boundary`].
#[derive(Debug, Clone)]
pub struct GrowOptions {
    pub max_steps: usize,
    /// Distance threshold for return detection.
    pub tol: f64,
    /// Boundary samples across the fundamental domain (split over both signs).
    pub samples: usize,
}

impl Default for GrowOptions {
    fn default() -> Self {
        Self { max_steps: 60, tol: 1e-4, samples: 64 }
    }
}

/// Real history on the last segment's rotated ray (the seed family for
/// boundary growth).
pub fn real_history(param: &ManifoldParam, sigma: f64) -> VecChebSeq<f64> {
    let m = param.m();
    let phase =
        Complex64::from_polar(1.0, (m - 1) as f64 * std::f64::consts::PI / m as f64);
    let v = param.p[m - 1].eval_taylor(&[phase * sigma]);
    VecChebSeq::new(v.components.iter().map(|c| c.map_scalar(|z| z.re)).collect())
}

/// Iterate the step map on real boundary histories of the local manifold and
/// report the first pass within `tol` of the (phase-shifted) return orbit.
pub fn grow_boundary(
    param: &ManifoldParam,
    model: &DdeModel,
    return_orbit: &SegmentedOrbit,
    opts: &GrowOptions,
) -> Result<ReturnReport> {
    assert_eq!(param.n_u(), 1, "boundary growth is implemented for one direction");
    let m = param.m();
    let mu_mod = param.lambdas[0].norm().powi(m as i32);
    let r0 = 1.0 / mu_mod;
    let half = opts.samples / 2;
    let mut seeds = Vec::with_capacity(opts.samples);
    for sgn in [1.0f64, -1.0] {
        for i in 1..=half {
            seeds.push(sgn * (r0 + (1.0 - r0) * i as f64 / half as f64));
        }
    }

    let run = |sigma: f64, limit: usize| -> Result<(usize, Alignment, VecChebSeq<f64>)> {
        // Returns (steps, best alignment, landing segment).
        let mut u = real_history(param, sigma);
        let mut best = orbit_distance_shifted(&u, return_orbit);
        if best.dist < opts.tol {
            return Ok((0, best, u));
        }
        for i in 1..=limit {
            u = step(&u, param.tau, model, param.degree, &StepOptions::default())?.segment;
            best = orbit_distance_shifted(&u, return_orbit);
            if best.dist < opts.tol {
                return Ok((i, best, u));
            }
        }
        Ok((usize::MAX, best, u))
    };

    // Coarse pass: first iterate count at which any sample returns.
    let mut first: Option<(usize, f64, Alignment)> = None;
    let mut closest = f64::INFINITY;
    for &s in &seeds {
        let (steps, align, _) = run(s, opts.max_steps)?;
        closest = closest.min(align.dist);
        if steps == usize::MAX {
            continue;
        }
        let better = match &first {
            None => true,
            Some((bs, _, ba)) => steps < *bs || (steps == *bs && align.dist < ba.dist),
        };
        if better {
            first = Some((steps, s, align));
        }
    }
    let (steps, coarse_sigma, mut best_align) =
        first.ok_or(Error::NoReturn { steps: opts.max_steps, closest })?;

    // Refine the boundary sampling fourfold around the winner.
    let span = (1.0 - r0) / half as f64;
    let mut sigma = coarse_sigma;
    for r in 1..=7 {
        let cand = coarse_sigma + (r as f64 - 4.0) * span / 4.0;
        if cand.abs() <= r0 || cand.abs() > 1.0 || cand == coarse_sigma {
            continue;
        }
        let (st, align, _) = run(cand, steps)?;
        if st <= steps && align.dist < best_align.dist {
            sigma = cand;
            best_align = align;
        }
    }

    let phase = return_orbit.eval_orbit(best_align.theta)[0];
    Ok(ReturnReport {
        k: steps.saturating_sub(1),
        j_star: best_align.j,
        phase,
        sigma,
        distance: best_align.dist,
        theta: best_align.theta,
    })
}

/// A best phase alignment of a history segment against the orbit: nearest
/// segment index (1-based), local time shift, and the distance there.
#[derive(Debug, Clone, Copy)]
pub struct Alignment {
    pub j: usize,
    pub theta: f64,
    pub dist: f64,
}

/// Distance of a history segment to the orbit modulo time shift: minimizes
/// the sup metric on the physical component over the orbit's segments and a
/// continuous local shift of the comparison window.
pub fn orbit_distance_shifted(u: &VecChebSeq<f64>, orbit: &SegmentedOrbit) -> Alignment {
    let tau = orbit.tau;
    let m = orbit.m();
    let samples: Vec<(f64, f64)> = (0..33)
        .map(|i| {
            let t = (std::f64::consts::PI * i as f64 / 32.0).cos();
            (t, u.components[0].eval(t))
        })
        .collect();
    let dist_at = |j: usize, theta: f64| -> f64 {
        let base = (j - 1) as f64 * tau + theta;
        samples
            .iter()
            .map(|&(t, v)| (v - orbit.eval_orbit(base + tau * (t + 1.0) / 2.0)[0]).abs())
            .fold(0.0f64, f64::max)
    };
    let grid = 17usize;
    let mut best = Alignment { j: 1, theta: 0.0, dist: f64::INFINITY };
    for j in 1..=m {
        for g in 0..grid {
            let theta = -0.5 * tau + tau * g as f64 / (grid - 1) as f64;
            let d = dist_at(j, theta);
            if d < best.dist {
                best = Alignment { j, theta, dist: d };
            }
        }
    }
    let h = tau / (grid - 1) as f64;
    let j = best.j;
    let (theta, dist) = golden_min(&|t| dist_at(j, t), best.theta - h, best.theta + h);
    if dist < best.dist {
        best = Alignment { j, theta, dist };
    }
    best
}

/// Distance of a history segment to the nearest stored orbit segment
/// (1-based index, sup metric on the physical component, no shift).
pub fn orbit_distance(u: &VecChebSeq<f64>, orbit: &SegmentedOrbit) -> (usize, f64) {
    let mut best = (1usize, f64::INFINITY);
    for (j, seg) in orbit.segments.iter().enumerate() {
        let d = sup_distance_first(u, seg);
        if d < best.1 {
            best = (j + 1, d);
        }
    }
    best
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
