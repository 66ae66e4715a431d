//! Periodic-orbit zero-finding by multiple shooting over delay intervals.
//!
//! An `m·tau`-periodic solution is represented by `m` Chebyshev segments
//! `c_1, …, c_m`, one per delay interval, together with the delay `tau`
//! itself (solved for, which quotients out time-translation invariance via a
//! scalar phase anchor `delta`). The residual couples consecutive segments
//! through the step fixed-point equation and closes the loop cyclically:
//!
//! ```text
//! phase:    (c_m at t = 1) - delta          (first component)
//! defects:  E(c_{j-1}) + S((tau/2) f(c_j, c_{j-1})) - c_j,   c_0 = c_m
//! ```
//!
//! Models obtained by polynomially embedding a scalar equation carry
//! unfolding parameters `eta` (one per auxiliary component) and pin the full
//! endpoint to the lift of `delta`; for a true orbit of the scalar equation
//! `eta` vanishes, which downstream stages assert.

use nalgebra::{DMatrix, DVector};

use crate::chebseq::{e_matrix, ChebSeq, VecChebSeq};
use crate::linalg::{Lu, NewtonReport};
use crate::models::{inject_iota, DdeModel};
use crate::stepper::{s_d1_block, s_d2_block, step_defect};
use crate::{Error, Result};

/// A candidate or converged segmented periodic orbit.
#[derive(Debug, Clone)]
pub struct SegmentedOrbit {
    pub tau: f64,
    /// `m` segments, each an `n`-component Chebyshev sequence vector.
    pub segments: Vec<VecChebSeq<f64>>,
    /// Unfolding parameters (empty for models that need none).
    pub eta: Vec<f64>,
    /// Phase anchor: prescribed first-component value at the end of segment `m`.
    pub delta: f64,
}

impl SegmentedOrbit {
    pub fn m(&self) -> usize {
        self.segments.len()
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    pub fn degree(&self) -> usize {
        self.segments[0].components[0].len().saturating_sub(1)
    }

    /// Evaluate the orbit function on `[0, m·tau)` (piecewise through the
    /// segments, `t` in delay-interval units of the underlying time).
    pub fn eval_orbit(&self, t: f64) -> Vec<f64> {
        let m = self.m() as f64;
        let period = m * self.tau;
        let mut s = t % period;
        if s < 0.0 {
            s += period;
        }
        let j = ((s / self.tau).floor() as usize).min(self.m() - 1);
        let local = 2.0 * (s - j as f64 * self.tau) / self.tau - 1.0;
        self.segments[j].eval(local)
    }

    /// Number of scalar unknowns of the associated zero-finding problem.
    pub fn unknowns(&self) -> usize {
        1 + self.eta.len() + self.m() * self.dim() * (self.degree() + 1)
    }

    fn pack(&self) -> DVector<f64> {
        let degree = self.degree();
        let n = self.dim();
        let len = n * (degree + 1);
        let mut v = DVector::zeros(self.unknowns());
        v[0] = self.tau;
        for (i, e) in self.eta.iter().enumerate() {
            v[1 + i] = *e;
        }
        let base = 1 + self.eta.len();
        for (j, seg) in self.segments.iter().enumerate() {
            v.rows_mut(base + j * len, len).copy_from(&seg.flatten(degree));
        }
        v
    }

    fn unpack(&self, v: &DVector<f64>) -> SegmentedOrbit {
        let degree = self.degree();
        let n = self.dim();
        let len = n * (degree + 1);
        let base = 1 + self.eta.len();
        SegmentedOrbit {
            tau: v[0],
            eta: (0..self.eta.len()).map(|i| v[1 + i]).collect(),
            segments: (0..self.m())
                .map(|j| {
                    VecChebSeq::from_flat(v.rows(base + j * len, len).as_slice(), n, degree)
                })
                .collect(),
            delta: self.delta,
        }
    }
}

/// Endpoint target of the phase block: `delta` alone for plain models, the
/// full lifted state for embedded models.
fn phase_target(orbit: &SegmentedOrbit, model: &DdeModel) -> Result<Vec<f64>> {
    if model.unfold_dim == 0 {
        Ok(vec![orbit.delta])
    } else {
        model.lift_value(orbit.delta)
    }
}

/// The segment defect including the unfolding injection:
/// `E(prev) + S((tau/2) f(cur, prev) + iota(eta)) - cur`.
fn segment_defect(
    model: &DdeModel,
    cur: &VecChebSeq<f64>,
    prev: &VecChebSeq<f64>,
    tau: f64,
    eta: &[f64],
    degree: usize,
) -> VecChebSeq<f64> {
    let mut defect = step_defect(model, cur, prev, tau, degree).scale(-1.0);
    if !eta.is_empty() {
        let iota = inject_iota(eta, model.dim);
        let integrated = VecChebSeq::new(
            iota.components
                .iter()
                .map(|c| c.integrate_from_left().truncated(degree))
                .collect(),
        );
        defect = defect.add(&integrated);
    }
    defect
}

/// Residual of the periodic zero-finding problem (both variants; the
/// unfolding block is active exactly when the model carries one).
pub fn residual_periodic(orbit: &SegmentedOrbit, model: &DdeModel) -> Result<DVector<f64>> {
    assert_eq!(orbit.eta.len(), model.unfold_dim, "unfolding dimension mismatch");
    assert_eq!(orbit.dim(), model.dim);
    let m = orbit.m();
    let n = model.dim;
    let degree = orbit.degree();
    let len = n * (degree + 1);
    let target = phase_target(orbit, model)?;
    let mut r = DVector::zeros(target.len() + m * len);
    let endpoint = orbit.segments[m - 1].eval_right();
    for (i, t) in target.iter().enumerate() {
        r[i] = endpoint[i] - t;
    }
    let base = target.len();
    for j in 0..m {
        let prev = &orbit.segments[(j + m - 1) % m];
        let defect = segment_defect(model, &orbit.segments[j], prev, orbit.tau, &orbit.eta, degree);
        r.rows_mut(base + j * len, len).copy_from(&defect.flatten(degree));
    }
    Ok(r)
}

/// Dense analytic Jacobian of [`residual_periodic`] with respect to
/// `(tau, eta, c_1, …, c_m)`.
pub fn jacobian_periodic(orbit: &SegmentedOrbit, model: &DdeModel) -> Result<DMatrix<f64>> {
    let m = orbit.m();
    let n = model.dim;
    let degree = orbit.degree();
    let len = n * (degree + 1);
    let d = model.unfold_dim;
    let n_phase = if d == 0 { 1 } else { n };
    let dim = n_phase + m * len;
    assert_eq!(dim, orbit.unknowns(), "periodic problem must be square");
    let mut jac = DMatrix::zeros(dim, dim);
    let col_base = 1 + d;
    let row_base = n_phase;

    // Phase rows: derivative of the segment-m endpoint (E row per component).
    let e = e_matrix::<f64>(1, degree + 1);
    for i in 0..n_phase {
        for k in 0..=degree {
            jac[(i, col_base + (m - 1) * len + i * (degree + 1) + k)] = e[(0, k)];
        }
    }

    for j in 0..m {
        let jp = (j + m - 1) % m;
        let cur = &orbit.segments[j];
        let prev = &orbit.segments[jp];
        let rows = row_base + j * len;

        // d defect_j / d c_j = S (tau/2) M_{D1f} - I
        let mut dj = s_d1_block(model, cur, prev, orbit.tau, degree);
        for k in 0..len {
            dj[(k, k)] -= 1.0;
        }
        jac.view_mut((rows, col_base + j * len), (len, len)).copy_from(&dj);

        // d defect_j / d c_{j-1} = E + S (tau/2) M_{D2f}
        let mut dp = s_d2_block(model, cur, prev, orbit.tau, degree);
        for i in 0..n {
            for k in 0..=degree {
                dp[(i * (degree + 1), jp_col(i, k, degree))] += e[(0, k)];
            }
        }
        let mut view = jac.view_mut((rows, col_base + jp * len), (len, len));
        view += dp;

        // d defect_j / d tau = S((1/2) f(c_j, c_{j-1})).
        let f = model.eval(&cur.components, &prev.components);
        let dtau = VecChebSeq::new(
            f.iter()
                .map(|fi| fi.scale(0.5).integrate_from_left().truncated(degree))
                .collect(),
        );
        jac.view_mut((rows, 0), (len, 1)).copy_from(&dtau.flatten(degree));

        // d defect_j / d eta_i = S applied to the unit injection.
        for i in 0..d {
            let mut unit = vec![0.0; d];
            unit[i] = 1.0;
            let col = VecChebSeq::new(
                inject_iota(&unit, n)
                    .components
                    .iter()
                    .map(|c| c.integrate_from_left().truncated(degree))
                    .collect(),
            );
            jac.view_mut((rows, 1 + i), (len, 1)).copy_from(&col.flatten(degree));
        }
    }
    Ok(jac)
}

// Column offset of coefficient k of component i inside one segment block.
fn jp_col(i: usize, k: usize, degree: usize) -> usize {
    i * (degree + 1) + k
}

/// Options for the periodic Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 30 }
    }
}

/// Newton's method on the periodic zero-finding problem. Full steps; aborts
/// if the residual grows over three consecutive iterations.
pub fn newton_periodic(
    guess: &SegmentedOrbit,
    model: &DdeModel,
    opts: &PeriodicOptions,
) -> Result<(SegmentedOrbit, NewtonReport)> {
    let mut orbit = guess.clone();
    let mut residual = residual_periodic(&orbit, model)?;
    let mut norms = vec![residual.norm()];
    let mut growth = 0;
    for _ in 0..opts.max_iters {
        if *norms.last().unwrap() <= opts.tol {
            return Ok((orbit, NewtonReport { residual_norms: norms, converged: true }));
        }
        let jac = jacobian_periodic(&orbit, model)?;
        let lu = Lu::factor(jac, "periodic orbit jacobian")?;
        let delta = lu.solve_vec(&residual)?;
        let x = orbit.pack() - delta;
        orbit = orbit.unpack(&x);
        residual = residual_periodic(&orbit, model)?;
        let norm = residual.norm();
        if norm > *norms.last().unwrap() {
            growth += 1;
            if growth >= 3 {
                return Err(Error::NoConvergence {
                    context: "periodic orbit newton (residual growth)",
                    iterations: norms.len(),
                    residual: norm,
                });
            }
        } else {
            growth = 0;
        }
        norms.push(norm);
    }
    if *norms.last().unwrap() <= opts.tol {
        return Ok((orbit, NewtonReport { residual_norms: norms, converged: true }));
    }
    Err(Error::NoConvergence {
        context: "periodic orbit newton",
        iterations: norms.len() - 1,
        residual: *norms.last().unwrap(),
    })
}

/// Build an initial segmented guess from a scalar orbit sample: `eval` maps
/// `[0, 1)` (one full period, normalized) to the scalar value, which is
/// lifted into the model's state space per segment. Resampling a window whose
/// observed period differs from `m·tau` amounts to composing `eval` with the
/// affine rescale, which this parameterization absorbs.
pub fn orbit_guess_from_scalar(
    eval: impl Fn(f64) -> f64,
    model: &DdeModel,
    tau: f64,
    m: usize,
    degree: usize,
    delta: f64,
) -> Result<SegmentedOrbit> {
    let mut segments = Vec::with_capacity(m);
    for j in 0..m {
        let components = (0..model.dim)
            .map(|i| {
                ChebSeq::new(
                    crate::chebseq::interpolate(
                        |s| {
                            let frac = (j as f64 + 0.5 * (s + 1.0)) / m as f64;
                            let mut w = eval(frac.min(1.0 - 1e-12));
                            if model.requires_positivity() {
                                // Clamp just above the floor rather than fail:
                                // guesses may graze it, Newton repairs the rest.
                                w = w.max(2e-6);
                            }
                            model.lift_value(w).map(|l| l[i]).unwrap_or(0.0)
                        },
                        degree,
                    )
                    .coeffs()
                    .to_vec(),
                )
            })
            .collect();
        segments.push(VecChebSeq::new(components));
    }
    Ok(SegmentedOrbit { tau, segments, eta: vec![0.0; model.unfold_dim], delta })
}

/// Build a segmented guess from a sampled scalar time series `(t_i, w_i)`
/// covering one presumed period. The window is resampled by linear
/// interpolation onto `m` equal delay intervals (so a window whose observed
/// period is not exactly `m·tau` is absorbed by the affine rescale), and the
/// delay guess is `span / m`.
pub fn orbit_guess_from_series(
    series: &[(f64, f64)],
    model: &DdeModel,
    m: usize,
    degree: usize,
    delta: f64,
) -> Result<SegmentedOrbit> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("time series needs at least two samples".into()));
    }
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0;
    if !(t1 > t0) {
        return Err(Error::InvalidInput("time series must be increasing in t".into()));
    }
    let span = t1 - t0;
    let interp = |frac: f64| -> f64 {
        let t = t0 + frac * span;
        let idx = series.partition_point(|&(ti, _)| ti <= t).clamp(1, series.len() - 1);
        let (ta, wa) = series[idx - 1];
        let (tb, wb) = series[idx];
        if tb == ta {
            wa
        } else {
            wa + (wb - wa) * (t - ta) / (tb - ta)
        }
    };
    orbit_guess_from_scalar(interp, model, span / m as f64, m, degree, delta)
}
