//! Chebyshev method-of-steps integrator for delay differential equations.
//!
//! One delay interval of `u'(t) = f(u(t), u(t - tau))` with known history
//! segment `phi` is characterized by the fixed-point equation
//!
//! ```text
//! u = E(phi) + S((tau/2) f(u, phi))
//! ```
//!
//! on Chebyshev coefficients over `[-1, 1]`: `E` injects the history's right
//! endpoint value as the integration constant, `S` is the antiderivative from
//! `t = -1`, and `tau/2` rescales the delay interval to unit half-width.
//! [`step`] solves the truncated equation by Newton, [`iterate`] chains steps
//! into a trajectory of segments, [`rk_oracle`] is an independent classical
//! RK4 method-of-steps integrator used for cross-checks and initial sweeps,
//! and [`find_periodic_candidate`] detects near-recurrences in a segment
//! trajectory.

use nalgebra::DMatrix;

use crate::chebseq::{mult_matrix, s_matrix, ChebSeq, Scalar, VecChebSeq};
use crate::linalg::{LapackScalar, Lu};
use crate::models::DdeModel;
use crate::{Error, Result};

/// Options for the per-step Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Convergence tolerance on the step defect (max component l1 norm).
    pub tol: f64,
    /// Maximum Newton iterations per step.
    pub max_iters: usize,
    /// Picard warm-start iterations used when Newton's first step diverges.
    pub picard_fallback: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iters: 25, picard_fallback: 5 }
    }
}

/// Result of one Chebyshev step.
#[derive(Debug, Clone)]
pub struct StepResult<T: Scalar> {
    pub segment: VecChebSeq<T>,
    pub newton_iters: usize,
    pub residual: f64,
}

/// `E(phi) + S((tau/2) f(u, phi))` truncated to `degree`.
pub fn step_rhs<T: Scalar>(
    model: &DdeModel,
    u: &VecChebSeq<T>,
    phi: &VecChebSeq<T>,
    tau: f64,
    degree: usize,
) -> VecChebSeq<T> {
    let f = model.eval(&u.components, &phi.components);
    let endpoint = phi.eval_right();
    let components = f
        .iter()
        .zip(endpoint)
        .map(|(fi, e)| {
            let integ = fi.scale(T::from_real(0.5 * tau)).integrate_from_left().truncated(degree);
            ChebSeq::constant(e).add(&integ)
        })
        .collect();
    VecChebSeq::new(components)
}

/// Defect `u - E(phi) - S((tau/2) f(u, phi))` truncated to `degree`.
pub fn step_defect<T: Scalar>(
    model: &DdeModel,
    u: &VecChebSeq<T>,
    phi: &VecChebSeq<T>,
    tau: f64,
    degree: usize,
) -> VecChebSeq<T> {
    u.truncated(degree).sub(&step_rhs(model, u, phi, tau, degree))
}

/// Dense `n(N+1)` square matrix of the map `u -> S((tau/2) D1f(u, phi) u)`
/// truncated to `degree`; the step Jacobian is `I` minus this.
pub fn s_d1_block<T: Scalar>(
    model: &DdeModel,
    u: &VecChebSeq<T>,
    phi: &VecChebSeq<T>,
    tau: f64,
    degree: usize,
) -> DMatrix<T> {
    let n = model.dim;
    let len = degree + 1;
    let mut out = DMatrix::zeros(n * len, n * len);
    for i in 0..n {
        for j in 0..n {
            let g = model.d1(i, j);
            if g.is_zero() {
                continue;
            }
            let gseq = g.eval(&u.components, &phi.components);
            // The multiplication output extends past degree N and the
            // antiderivative reads all of it, so compose at full height
            // before truncating rows.
            let tall = len + gseq.len();
            let s = s_matrix::<T>(len, tall).scale(0.5 * tau);
            let block = s * mult_matrix(&gseq, tall, len);
            out.view_mut((i * len, j * len), (len, len)).copy_from(&block);
        }
    }
    out
}

/// Same structure for the delayed argument: `v -> S((tau/2) D2f(u, phi) v)`.
pub fn s_d2_block<T: Scalar>(
    model: &DdeModel,
    u: &VecChebSeq<T>,
    phi: &VecChebSeq<T>,
    tau: f64,
    degree: usize,
) -> DMatrix<T> {
    let n = model.dim;
    let len = degree + 1;
    let mut out = DMatrix::zeros(n * len, n * len);
    for i in 0..n {
        for j in 0..n {
            let g = model.d2(i, j);
            if g.is_zero() {
                continue;
            }
            let gseq = g.eval(&u.components, &phi.components);
            let tall = len + gseq.len();
            let s = s_matrix::<T>(len, tall).scale(0.5 * tau);
            let block = s * mult_matrix(&gseq, tall, len);
            out.view_mut((i * len, j * len), (len, len)).copy_from(&block);
        }
    }
    out
}

/// Advance one delay interval from history `phi`, solving the truncated
/// fixed-point equation by Newton (initial guess `u = phi`).
pub fn step<T: Scalar + LapackScalar>(
    phi: &VecChebSeq<T>,
    tau: f64,
    model: &DdeModel,
    degree: usize,
    opts: &StepOptions,
) -> Result<StepResult<T>> {
    assert!(tau > 0.0, "delay must be positive");
    let mut u = phi.truncated(degree);
    let mut defect = step_defect(model, &u, phi, tau, degree);
    let mut res = defect.norm_l1();
    let mut iters = 0;
    let mut tried_picard = false;
    while res > opts.tol {
        if iters >= opts.max_iters {
            return Err(Error::NoConvergence {
                context: "chebyshev step",
                iterations: iters,
                residual: res,
            });
        }
        let len = degree + 1;
        let n = model.dim;
        let mut jac = s_d1_block(model, &u, phi, tau, degree);
        jac.neg_mut();
        for k in 0..n * len {
            jac[(k, k)] += T::one();
        }
        let lu = Lu::factor(jac, "chebyshev step jacobian")?;
        let delta = lu.solve_vec(&defect.flatten(degree))?;
        let correction = VecChebSeq::from_flat(delta.as_slice(), n, degree);
        let next = u.sub(&correction);
        let next_defect = step_defect(model, &next, phi, tau, degree);
        let next_res = next_defect.norm_l1();
        if next_res > 10.0 * res && !tried_picard {
            // Newton overshot from a poor guess: warm-start with Picard
            // (the step map is a contraction near the solution).
            tried_picard = true;
            u = phi.truncated(degree);
            for _ in 0..opts.picard_fallback {
                u = step_rhs(model, &u, phi, tau, degree);
            }
            defect = step_defect(model, &u, phi, tau, degree);
            res = defect.norm_l1();
            continue;
        }
        u = next;
        defect = next_defect;
        res = next_res;
        iters += 1;
    }
    Ok(StepResult { segment: u, newton_iters: iters, residual: res })
}

/// `k` successive steps; segment `j` (1-based) of the result is the image of
/// `phi` under `j` applications of the delay map.
pub fn iterate<T: Scalar + LapackScalar>(
    phi: &VecChebSeq<T>,
    tau: f64,
    model: &DdeModel,
    degree: usize,
    k: usize,
    opts: &StepOptions,
) -> Result<Vec<VecChebSeq<T>>> {
    let mut out = Vec::with_capacity(k);
    let mut current = phi.clone();
    for _ in 0..k {
        let result = step(&current, tau, model, degree, opts)?;
        current = result.segment.clone();
        out.push(result.segment);
    }
    Ok(out)
}

/// Dense grid solution of a DDE, cubic-Hermite interpolable between nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    /// Node values, one `dim`-vector per node.
    pub values: Vec<Vec<f64>>,
    /// Node derivatives (matching `values`).
    pub derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h * (self.values.len() - 1) as f64
    }

    /// Cubic Hermite interpolation on the step containing `t`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.values.len();
        let x = (t - self.t0) / self.h;
        let i = (x.floor() as isize).clamp(0, n as isize - 2) as usize;
        let th = x - i as f64;
        let (t2, t3) = (th * th, th * th * th);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + th;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (0..self.dim())
            .map(|c| {
                h00 * self.values[i][c]
                    + h10 * self.h * self.derivs[i][c]
                    + h01 * self.values[i + 1][c]
                    + h11 * self.h * self.derivs[i + 1][c]
            })
            .collect()
    }
}

/// Independent reference integrator: classical RK4 method of steps with
/// cubic Hermite dense history. `history` supplies the solution on
/// `[-tau, 0]`; integration runs to `t_end` with `steps_per_delay` RK steps
/// per delay interval.
pub fn rk_oracle<F, H>(
    rhs: F,
    dim: usize,
    tau: f64,
    history: H,
    t_end: f64,
    steps_per_delay: usize,
) -> Result<Trajectory>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
    H: Fn(f64) -> Vec<f64>,
{
    assert!(tau > 0.0 && t_end > 0.0 && steps_per_delay > 0);
    let h = tau / steps_per_delay as f64;
    let m = steps_per_delay;
    let total = m + (t_end / h).ceil() as usize;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(total + 1);
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(total + 1);
    // History nodes on [-tau, 0]; derivatives by central differences of the
    // supplied closure (used only if the trajectory is evaluated there).
    let fd = 1e-6 * tau;
    for i in 0..=m {
        let t = -tau + i as f64 * h;
        values.push(history(t));
        let tp = (t + fd).min(0.0);
        let tm = (t - fd).max(-tau);
        let vp = history(tp);
        let vm = history(tm);
        derivs.push(vp.iter().zip(&vm).map(|(a, b)| (a - b) / (tp - tm)).collect());
    }
    let traj_eval = |values: &Vec<Vec<f64>>, derivs: &Vec<Vec<f64>>, t: f64| -> Vec<f64> {
        if t <= 0.0 {
            history(t.max(-tau))
        } else {
            let x = (t + tau) / h;
            let i = (x.floor() as isize).clamp(0, values.len() as isize - 2) as usize;
            let th = x - i as f64;
            let (t2, t3) = (th * th, th * th * th);
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + th;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            (0..dim)
                .map(|c| {
                    h00 * values[i][c]
                        + h10 * h * derivs[i][c]
                        + h01 * values[i + 1][c]
                        + h11 * h * derivs[i + 1][c]
                })
                .collect()
        }
    };
    for i in m..total {
        let t = -tau + i as f64 * h;
        let u = values[i].clone();
        // The derivative at already-computed nodes uses the exact lag value.
        let lag0 = traj_eval(&values, &derivs, t - tau);
        let k1 = rhs(&u, &lag0);
        derivs[i] = k1.clone();
        let lag_half = traj_eval(&values, &derivs, t + 0.5 * h - tau);
        let u2: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = rhs(&u2, &lag_half);
        let u3: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = rhs(&u3, &lag_half);
        let lag1 = traj_eval(&values, &derivs, t + h - tau);
        let u4: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = rhs(&u4, &lag1);
        let next: Vec<f64> = (0..dim)
            .map(|c| u[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
            .collect();
        let lag_next = traj_eval(&values, &derivs, t + h - tau);
        let d_next = rhs(&next, &lag_next);
        values.push(next);
        derivs.push(d_next);
    }
    Ok(Trajectory { t0: -tau, h, values, derivs })
}

/// RK4 reference run of a polynomial model from a constant history.
pub fn rk_oracle_model(
    model: &DdeModel,
    tau: f64,
    history: impl Fn(f64) -> Vec<f64>,
    t_end: f64,
    steps_per_delay: usize,
) -> Result<Trajectory> {
    let dim = model.dim;
    let model = model.clone();
    rk_oracle(move |x, y| model.eval(x, y), dim, tau, history, t_end, steps_per_delay)
}

/// Chebyshev segment for the window `[t_start, t_start + tau]` of a dense
/// trajectory (segment variable `t` in `[-1, 1]` maps left-to-right).
pub fn segment_from_trajectory(
    traj: &Trajectory,
    t_start: f64,
    tau: f64,
    degree: usize,
) -> VecChebSeq<f64> {
    let n = traj.dim();
    let components = (0..n)
        .map(|c| {
            crate::chebseq::interpolate(
                |s| traj.eval(t_start + 0.5 * tau * (s + 1.0))[c],
                degree,
            )
        })
        .collect();
    VecChebSeq::new(components)
}

/// Sup-norm distance between two segments, sampled at Chebyshev points.
fn segment_distance(a: &VecChebSeq<f64>, b: &VecChebSeq<f64>) -> f64 {
    let samples = 33;
    let mut worst: f64 = 0.0;
    for i in 0..=samples {
        let t = -1.0 + 2.0 * i as f64 / samples as f64;
        let va = a.eval(t);
        let vb = b.eval(t);
        for (x, y) in va.iter().zip(&vb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Scan a segment trajectory for the smallest `m` such that a window of `m`
/// consecutive segments matches its `m`-shifted copy within `tol` (sup norm).
/// Returns `(m, window start index, phase)` where the phase is the first
/// component's value at the window's closing endpoint.
pub fn find_periodic_candidate(
    trajectory: &[VecChebSeq<f64>],
    tol: f64,
) -> Option<(usize, usize, f64)> {
    let k = trajectory.len();
    for m in 1..=k / 2 {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..=(k - 2 * m) {
            let err = (0..m)
                .map(|i| segment_distance(&trajectory[j + i], &trajectory[j + i + m]))
                .fold(0.0f64, f64::max);
            if err <= tol && best.map_or(true, |(_, b)| err < b) {
                best = Some((j, err));
            }
        }
        if let Some((j, _)) = best {
            let delta = trajectory[j + m - 1].eval_right()[0];
            return Some((m, j, delta));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ikeda, DdeModel, Lift, Monomial, Poly};

    fn zero_model() -> DdeModel {
        DdeModel::new("zero", vec![Poly::default()], 0, Lift::Identity)
    }

    fn decay_model() -> DdeModel {
        // f(x, y) = -x
        let p = Poly {
            terms: vec![Monomial { coeff: -1.0, x_powers: vec![1], y_powers: vec![0] }],
        };
        DdeModel::new("decay", vec![p], 0, Lift::Identity)
    }

    #[test]
    fn zero_field_steps_to_constant() {
        let model = zero_model();
        let phi = VecChebSeq::new(vec![ChebSeq::new(vec![0.3f64, 0.1, -0.05])]);
        let r = step(&phi, 1.0, &model, 8, &StepOptions::default()).unwrap();
        let endpoint = phi.eval_right()[0];
        assert!((r.segment.components[0].c(0) - endpoint).abs() < 1e-14);
        for k in 1..=8 {
            assert!(r.segment.components[0].c(k).abs() < 1e-14);
        }
        assert!(r.newton_iters <= 1);
    }

    #[test]
    fn linear_decay_matches_analytic_solution() {
        // u' = -u with u = 1 entering the interval: u(t) = exp(-(tau/2)(t+1)).
        let model = decay_model();
        let tau = 1.3;
        let phi = VecChebSeq::new(vec![ChebSeq::constant(1.0f64)]);
        let r = step(&phi, tau, &model, 24, &StepOptions::default()).unwrap();
        let analytic = crate::chebseq::interpolate(|t| (-(tau / 2.0) * (t + 1.0)).exp(), 24);
        let diff = r.segment.components[0].sub(&analytic);
        assert!(diff.norm_l1() < 1e-12, "coefficient error {}", diff.norm_l1());
        for i in 0..=10 {
            let t = -1.0 + 0.2 * i as f64;
            let expect = (-(tau / 2.0) * (t + 1.0)).exp();
            assert!((r.segment.components[0].eval(t) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ikeda_step_matches_rk_oracle() {
        let model = ikeda();
        let tau = 1.56;
        let phi = VecChebSeq::new(vec![ChebSeq::constant(0.5f64)]);
        let r = step(&phi, tau, &model, 30, &StepOptions::default()).unwrap();
        let traj = rk_oracle_model(&model, tau, |_| vec![0.5], tau, 2048).unwrap();
        for i in 0..20 {
            let t = -1.0 + 2.0 * i as f64 / 19.0;
            let expect = traj.eval(0.5 * tau * (t + 1.0))[0];
            assert!(
                (r.segment.components[0].eval(t) - expect).abs() < 1e-8,
                "t={t}: {} vs {expect}",
                r.segment.components[0].eval(t)
            );
        }
    }

    #[test]
    fn iterate_chains_and_is_a_semigroup() {
        let model = ikeda();
        let tau = 1.56;
        let phi = VecChebSeq::new(vec![ChebSeq::constant(0.5f64)]);
        let opts = StepOptions::default();
        assert!(iterate(&phi, tau, &model, 30, 0, &opts).unwrap().is_empty());
        let eight = iterate(&phi, tau, &model, 30, 8, &opts).unwrap();
        // Semigroup: 3 then 5 equals 8 straight.
        let three = iterate(&phi, tau, &model, 30, 3, &opts).unwrap();
        let five = iterate(three.last().unwrap(), tau, &model, 30, 5, &opts).unwrap();
        for (a, b) in eight[3..].iter().zip(&five) {
            assert!(a.sub(b).norm_l1() < 1e-12);
        }
        // Continuity of concatenated history.
        for w in eight.windows(2) {
            let left = w[1].eval(-1.0)[0];
            let right = w[0].eval_right()[0];
            assert!((left - right).abs() < 1e-12);
        }
        // Against the RK oracle over 8 delay intervals.
        let traj = rk_oracle_model(&model, tau, |_| vec![0.5], 8.0 * tau, 2048).unwrap();
        for (j, seg) in eight.iter().enumerate() {
            for i in 0..=10 {
                let t = -1.0 + 0.2 * i as f64;
                let expect = traj.eval(j as f64 * tau + 0.5 * tau * (t + 1.0))[0];
                assert!((seg.components[0].eval(t) - expect).abs() < 1e-7, "segment {j}");
            }
        }
    }

    #[test]
    fn five_zero_field_steps_are_identical_constants() {
        let model = zero_model();
        let phi = VecChebSeq::new(vec![ChebSeq::new(vec![0.2f64, -0.4])]);
        let segs = iterate(&phi, 0.7, &model, 6, 5, &StepOptions::default()).unwrap();
        assert_eq!(segs.len(), 5);
        let endpoint = phi.eval_right()[0];
        for s in &segs {
            assert!((s.components[0].c(0) - endpoint).abs() < 1e-14);
        }
    }

    #[test]
    fn rk_oracle_exponential_accuracy() {
        let model = decay_model();
        let tau = 1.0;
        let traj = rk_oracle_model(&model, tau, |_| vec![1.0], 3.0, 512).unwrap();
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            assert!((traj.eval(t)[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn rk_oracle_fourth_order_self_convergence() {
        let model = ikeda();
        let tau = 1.56;
        let run = |steps: usize| rk_oracle_model(&model, tau, |_| vec![0.5], 2.0 * tau, steps).unwrap();
        let fine = run(2048);
        let sup_err = |steps: usize| {
            let t = run(steps);
            (0..=100)
                .map(|i| {
                    let tt = 2.0 * tau * i as f64 / 100.0;
                    (t.eval(tt)[0] - fine.eval(tt)[0]).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let (e1, e2, e3) = (sup_err(64), sup_err(128), sup_err(256));
        // Halving h should shrink the sup error ~16x (order 4).
        assert!((10.0..26.0).contains(&(e1 / e2)), "ratio {}", e1 / e2);
        assert!((10.0..26.0).contains(&(e2 / e3)), "ratio {}", e2 / e3);
    }

    #[test]
    fn periodic_candidate_detection() {
        // Synthetic exactly-periodic trajectory with m = 3.
        let a = VecChebSeq::new(vec![ChebSeq::new(vec![0.1f64, 0.2])]);
        let b = VecChebSeq::new(vec![ChebSeq::new(vec![-0.3f64, 0.4])]);
        let c = VecChebSeq::new(vec![ChebSeq::new(vec![0.5f64, -0.1])]);
        let traj: Vec<_> =
            vec![a.clone(), b.clone(), c.clone(), a.clone(), b.clone(), c.clone(), a, b, c];
        let (m, _, delta) = find_periodic_candidate(&traj, 1e-10).unwrap();
        assert_eq!(m, 3);
        // delta is the endpoint value of the window's last segment (c).
        assert!((delta - (0.5 + 2.0 * -0.1)).abs() < 1e-14);

        // Constant trajectory recurs at m = 1.
        let k = VecChebSeq::new(vec![ChebSeq::constant(0.9f64)]);
        let traj: Vec<_> = vec![k.clone(); 6];
        let (m, _, delta) = find_periodic_candidate(&traj, 1e-12).unwrap();
        assert_eq!(m, 1);
        assert!((delta - 0.9).abs() < 1e-14);

        // No recurrence below tolerance: strictly increasing constants.
        let traj: Vec<_> = (0..6)
            .map(|i| VecChebSeq::new(vec![ChebSeq::constant(i as f64)]))
            .collect();
        assert!(find_periodic_candidate(&traj, 1e-3).is_none());
    }

    #[test]
    fn complex_step_agrees_with_real_step() {
        use num_complex::Complex64;
        let model = ikeda();
        let tau = 1.56;
        let phi_r = VecChebSeq::new(vec![ChebSeq::new(vec![0.5f64, 0.1])]);
        let phi_c = phi_r.to_complex();
        let r = step(&phi_r, tau, &model, 20, &StepOptions::default()).unwrap();
        let c = step(&phi_c, tau, &model, 20, &StepOptions::default()).unwrap();
        let diff = c.segment.sub(&r.segment.map_scalar(Complex64::from));
        assert!(diff.norm_l1() < 1e-12);
        assert!(c.segment.max_imag() < 1e-13);
    }
}
