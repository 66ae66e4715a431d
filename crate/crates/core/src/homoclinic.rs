//! Connecting-orbit boundary-value problem and transversality certificate.
//!
//! A homoclinic connection of a segmented periodic orbit is computed as a
//! zero of one square complex system coupling three ingredients:
//!
//! * the unstable-bundle parameterization `P_1..P_m` (Taylor in the chart
//!   coordinate, Chebyshev in time), re-solved here as unknowns so that the
//!   connection and the bundle share a single delay `tau` and root `lambda`;
//! * a finite chain `y_1..y_k` of step segments departing from `P_m(sigma)`
//!   at an unknown chart point `sigma`;
//! * a landing condition placing the step image of `y_k` on an affine graph
//!   `c + V h` over the stable eigenspace of the return segment, with graph
//!   coordinates `h` unknown.
//!
//! Row blocks, in order: the endpoint phase anchor (one row per component,
//! against a free anchor vector `delta`), the first-order scaling row
//! (pinning the chart scale to `gamma`), the bundle conjugacy equations per
//! segment and Taylor slice, the landing equation, the departure equation,
//! and the interior chain steps.  The unknown column order is `tau`, the
//! unfolding parameters `eta`, `lambda`, the bundle coefficients, `sigma`,
//! `delta`, `h`, and the chain coefficients; with the stable graph holding
//! `n(N+1) - 2 - unfold` directions the system is exactly square.
//!
//! Everything is complex: the bundle is genuinely complex (the chart rotates
//! by an m-th root of a negative multiplier), while the chain and the scalar
//! data `tau`, `eta`, `delta` are real at a solution, which is checked a
//! posteriori and reported rather than imposed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chebseq::{e_matrix, mult_matrix, s_matrix, ChebSeq, VecChebSeq};
use crate::floquet::{build_all_hhat, build_h, eigen_residual};
use crate::linalg::{eig_real, lstsq_complex, order_by_modulus_desc, Lu, NewtonReport};
use crate::manifold::ManifoldParam;
use crate::models::{inject_iota, Algebra, DdeModel};
use crate::periodic::SegmentedOrbit;
use crate::stepper::{step, StepOptions};
use crate::taylorcheb::{CTaylorSeq, CTaylorVec};
use crate::{Error, Result};

type C = Complex64;

/// Affine graph `c + V h` over the stable eigenspace of the return segment.
#[derive(Debug, Clone)]
pub struct StableGraph {
    /// Landing segment index (1-based, like all segment indices here).
    pub j_star: usize,
    /// The orbit's landing-segment history (graph base point).
    pub center: VecChebSeq<C>,
    /// Stable eigenvector basis, one unit-`l1` column per kept direction.
    pub basis: DMatrix<C>,
    /// Eigenvalues matching the basis columns, descending modulus.
    pub values: Vec<C>,
    /// Worst relative eigen-defect among the kept columns.
    pub eigen_residual: f64,
}

/// Options for assembling the stable graph.
#[derive(Debug, Clone)]
pub struct GraphOptions {
    /// Keep exactly this many stable directions (largest modulus first);
    /// `None` keeps every direction above `min_modulus`.
    pub count: Option<usize>,
    /// Modulus floor below which directions are numerical noise.
    pub min_modulus: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self { count: None, min_modulus: 1e-10 }
    }
}

/// Assemble the stable graph of the based monodromy matrix at segment
/// `j_star`: drop the dominant (unstable) multiplier and the trivial
/// multiplier nearest `+1`, keep the rest per `opts`, and normalize each
/// eigenvector column to unit sequence `l1` norm.
pub fn build_stable_graph(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    j_star: usize,
    opts: &GraphOptions,
) -> Result<StableGraph> {
    let m = orbit.m();
    if !(1..=m).contains(&j_star) {
        return Err(Error::InvalidInput(format!(
            "landing segment {j_star} out of range 1..={m}"
        )));
    }
    let degree = orbit.degree();
    let n = orbit.dim();
    let len = degree + 1;
    let hhat = build_all_hhat(orbit, model, degree)?;
    let h = build_h(j_star, &hhat);
    let (values, vectors) = eig_real(&h)?;
    let mut order = order_by_modulus_desc(&values);
    let dominant = order.remove(0);
    if values[dominant].norm() <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "expected an unstable multiplier, largest is |z| = {}",
            values[dominant].norm()
        )));
    }
    // The trivial multiplier of the flow sits nearest +1.
    let trivial_pos = order
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (values[*a.1] - C::one()).norm();
            let db = (values[*b.1] - C::one()).norm();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(pos, _)| pos)
        .expect("spectrum has at least two eigenvalues");
    order.remove(trivial_pos);
    let kept: Vec<usize> = match opts.count {
        Some(c) => {
            if order.len() < c {
                return Err(Error::InvalidInput(format!(
                    "graph wants {c} directions, only {} available",
                    order.len()
                )));
            }
            order[..c].to_vec()
        }
        None => order
            .into_iter()
            .filter(|&i| values[i].norm() >= opts.min_modulus)
            .collect(),
    };
    for &i in &kept {
        if values[i].norm() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "kept direction with |z| = {} is not stable",
                values[i].norm()
            )));
        }
    }
    let mut basis = DMatrix::<C>::zeros(n * len, kept.len());
    let mut vals = Vec::with_capacity(kept.len());
    let mut worst = 0.0f64;
    for (c, &idx) in kept.iter().enumerate() {
        let col: DVector<C> = vectors.column(idx).into_owned();
        worst = worst.max(eigen_residual(&h, &col, values[idx]));
        let norm = VecChebSeq::from_flat(col.as_slice(), n, degree).norm_l1();
        for r in 0..n * len {
            basis[(r, c)] = col[r] / norm;
        }
        vals.push(values[idx]);
    }
    Ok(StableGraph {
        j_star,
        center: orbit.segments[j_star - 1].to_complex(),
        basis,
        values: vals,
        eigen_residual: worst,
    })
}

/// Fixed data and sizes of the square connecting-orbit system.
pub struct HomoclinicProblem<'a> {
    pub model: &'a DdeModel,
    /// Chebyshev truncation degree (`len = degree + 1` coefficients).
    pub degree: usize,
    /// Taylor truncation order of the bundle.
    pub taylor_order: usize,
    /// Segments per period.
    pub m: usize,
    /// Chain length (`y_1..y_k`).
    pub k: usize,
    /// First-order scaling pinned by the scaling row.
    pub gamma: C,
    pub graph: StableGraph,
}

impl<'a> HomoclinicProblem<'a> {
    pub fn new(
        model: &'a DdeModel,
        degree: usize,
        taylor_order: usize,
        m: usize,
        k: usize,
        gamma: C,
        graph: StableGraph,
    ) -> Result<Self> {
        let n = model.dim;
        let len = degree + 1;
        if k < 1 {
            return Err(Error::InvalidInput("chain length must be at least 1".into()));
        }
        if graph.basis.nrows() != n * len {
            return Err(Error::DimensionMismatch {
                context: "connecting-orbit layout",
                detail: format!(
                    "graph rows {} vs segment size {}",
                    graph.basis.nrows(),
                    n * len
                ),
            });
        }
        let need = n * len - 2 - model.unfold_dim;
        if graph.basis.ncols() != need {
            return Err(Error::DimensionMismatch {
                context: "connecting-orbit layout",
                detail: format!(
                    "square system needs {} stable directions, graph holds {}",
                    need,
                    graph.basis.ncols()
                ),
            });
        }
        let pr = Self { model, degree, taylor_order, m, k, gamma, graph };
        debug_assert_eq!(pr.rows(), pr.total());
        Ok(pr)
    }

    pub fn n(&self) -> usize {
        self.model.dim
    }
    pub fn len(&self) -> usize {
        self.degree + 1
    }
    pub fn slices(&self) -> usize {
        self.taylor_order + 1
    }
    pub fn n_s(&self) -> usize {
        self.graph.basis.ncols()
    }
    pub fn unfold(&self) -> usize {
        self.model.unfold_dim
    }

    // Column offsets.
    pub fn c_tau(&self) -> usize {
        0
    }
    pub fn c_eta(&self) -> usize {
        1
    }
    pub fn c_lambda(&self) -> usize {
        1 + self.unfold()
    }
    pub fn c_p(&self) -> usize {
        self.c_lambda() + 1
    }
    /// Bundle coefficient block: segment `j` (0-based), slice `s`, component `i`.
    pub fn c_p_at(&self, j: usize, s: usize, i: usize) -> usize {
        self.c_p() + ((j * self.slices() + s) * self.n() + i) * self.len()
    }
    pub fn c_sigma(&self) -> usize {
        self.c_p() + self.m * self.slices() * self.n() * self.len()
    }
    pub fn c_delta(&self) -> usize {
        self.c_sigma() + 1
    }
    pub fn c_h(&self) -> usize {
        self.c_delta() + self.n()
    }
    pub fn c_y(&self) -> usize {
        self.c_h() + self.n_s()
    }
    /// Chain coefficient block: segment `j` (0-based), component `i`.
    pub fn c_y_at(&self, j: usize, i: usize) -> usize {
        self.c_y() + (j * self.n() + i) * self.len()
    }
    pub fn total(&self) -> usize {
        self.c_y() + self.k * self.n() * self.len()
    }

    // Row offsets.
    pub fn r_phase(&self) -> usize {
        0
    }
    pub fn r_scale(&self) -> usize {
        self.n()
    }
    pub fn r_conj(&self) -> usize {
        self.n() + 1
    }
    pub fn r_conj_at(&self, j: usize, s: usize, i: usize) -> usize {
        self.r_conj() + ((j * self.slices() + s) * self.n() + i) * self.len()
    }
    pub fn r_land(&self) -> usize {
        self.r_conj() + self.m * self.slices() * self.n() * self.len()
    }
    pub fn r_dep(&self) -> usize {
        self.r_land() + self.n() * self.len()
    }
    pub fn r_chain(&self) -> usize {
        self.r_dep() + self.n() * self.len()
    }
    /// Chain equation rows for step `j` (1-based, `2..=k`), component `i`.
    pub fn r_chain_at(&self, j: usize, i: usize) -> usize {
        self.r_chain() + ((j - 2) * self.n() + i) * self.len()
    }
    pub fn rows(&self) -> usize {
        self.r_chain() + (self.k - 1) * self.n() * self.len()
    }
}

/// One point of the connecting-orbit unknown space.
#[derive(Debug, Clone)]
pub struct HomoclinicState {
    pub tau: C,
    pub eta: Vec<C>,
    pub lambda: C,
    /// Bundle segments `P_1..P_m` (index 0 holds `P_1`).
    pub p: Vec<CTaylorVec>,
    pub sigma: C,
    /// Free endpoint anchor, one entry per component.
    pub delta: Vec<C>,
    /// Stable graph coordinates.
    pub h: DVector<C>,
    /// Chain segments `y_1..y_k` (index 0 holds `y_1`).
    pub y: Vec<VecChebSeq<C>>,
}

fn put_seq(x: &mut DVector<C>, off: usize, seq: &ChebSeq<C>, len: usize) {
    for t in 0..len {
        x[off + t] = seq.c(t);
    }
}

fn get_seq(x: &DVector<C>, off: usize, len: usize) -> ChebSeq<C> {
    ChebSeq::new(x.as_slice()[off..off + len].to_vec())
}

impl HomoclinicState {
    pub fn pack(&self, pr: &HomoclinicProblem) -> DVector<C> {
        let len = pr.len();
        let mut x = DVector::zeros(pr.total());
        x[pr.c_tau()] = self.tau;
        for l in 0..pr.unfold() {
            x[pr.c_eta() + l] = self.eta[l];
        }
        x[pr.c_lambda()] = self.lambda;
        for j in 0..pr.m {
            for s in 0..pr.slices() {
                for i in 0..pr.n() {
                    put_seq(&mut x, pr.c_p_at(j, s, i), self.p[j].components[i].slice(&[s]), len);
                }
            }
        }
        x[pr.c_sigma()] = self.sigma;
        for i in 0..pr.n() {
            x[pr.c_delta() + i] = self.delta[i];
        }
        for c in 0..pr.n_s() {
            x[pr.c_h() + c] = self.h[c];
        }
        for j in 0..pr.k {
            for i in 0..pr.n() {
                put_seq(&mut x, pr.c_y_at(j, i), &self.y[j].components[i], len);
            }
        }
        x
    }

    pub fn unpack(pr: &HomoclinicProblem, x: &DVector<C>) -> Self {
        let len = pr.len();
        let tau = x[pr.c_tau()];
        let eta: Vec<C> = (0..pr.unfold()).map(|l| x[pr.c_eta() + l]).collect();
        let lambda = x[pr.c_lambda()];
        let p: Vec<CTaylorVec> = (0..pr.m)
            .map(|j| {
                let components = (0..pr.n())
                    .map(|i| {
                        let slices = (0..pr.slices())
                            .map(|s| get_seq(x, pr.c_p_at(j, s, i), len))
                            .collect();
                        CTaylorSeq { n_u: 1, order: pr.taylor_order, slices }
                    })
                    .collect();
                CTaylorVec { components }
            })
            .collect();
        let sigma = x[pr.c_sigma()];
        let delta: Vec<C> = (0..pr.n()).map(|i| x[pr.c_delta() + i]).collect();
        let h = DVector::from_fn(pr.n_s(), |c, _| x[pr.c_h() + c]);
        let y: Vec<VecChebSeq<C>> = (0..pr.k)
            .map(|j| {
                VecChebSeq::new((0..pr.n()).map(|i| get_seq(x, pr.c_y_at(j, i), len)).collect())
            })
            .collect();
        Self { tau, eta, lambda, p, sigma, delta, h, y }
    }
}

/// The graph point `c + V h` as a segment.
pub fn graph_point(pr: &HomoclinicProblem, h: &DVector<C>) -> VecChebSeq<C> {
    let mut q = pr.graph.center.clone();
    for c in 0..pr.n_s() {
        let col: DVector<C> = pr.graph.basis.column(c).into_owned();
        let vc = VecChebSeq::from_flat(col.as_slice(), pr.n(), pr.degree);
        q = q.add(&vc.scale(h[c]));
    }
    q
}

fn write_row_block(r: &mut DVector<C>, off: usize, row: &ChebSeq<C>, len: usize) {
    for t in 0..len {
        r[off + t] = row.c(t);
    }
}

/// `E(prev) + S((tau/2) f(cur, prev))` for plain segments, complex `tau`.
fn step_image(model: &DdeModel, cur: &VecChebSeq<C>, prev: &VecChebSeq<C>, tau: C) -> Vec<ChebSeq<C>> {
    let f = model.eval(&cur.components, &prev.components);
    f.into_iter()
        .zip(&prev.components)
        .map(|(fi, pi)| {
            ChebSeq::constant(pi.eval_right()).add(&fi.scale(tau * 0.5).integrate_from_left())
        })
        .collect()
}

/// Residual of the connecting-orbit system at `st`.
pub fn residual(pr: &HomoclinicProblem, st: &HomoclinicState) -> DVector<C> {
    let n = pr.n();
    let len = pr.len();
    let mut r = DVector::zeros(pr.total());

    // Phase rows: slice-0 endpoint of the last bundle segment against delta.
    for i in 0..n {
        r[pr.r_phase() + i] = st.p[pr.m - 1].components[i].slice(&[0]).eval_right() - st.delta[i];
    }
    // Scaling row: slice-1 endpoint of the first component against gamma.
    r[pr.r_scale()] =
        st.p[pr.m - 1].components[0].slice(&[1]).eval_right() - pr.gamma;

    // Conjugacy rows.
    let iota = inject_iota(&st.eta, n);
    for j in 0..pr.m {
        let jp = (j + pr.m - 1) % pr.m;
        let a: Vec<CTaylorSeq> =
            st.p[j].components.iter().map(|c| c.scale_lambda(&[st.lambda])).collect();
        let b = &st.p[jp];
        let f = pr.model.eval(&a, &b.components);
        for s in 0..pr.slices() {
            let lam_s = st.lambda.powu(s as u32);
            for i in 0..n {
                let mut row = ChebSeq::constant(b.components[i].slice(&[s]).eval_right());
                row = row.add(&f[i].slice(&[s]).scale(st.tau * 0.5).integrate_from_left());
                if s == 0 {
                    row = row.add(&iota.components[i].integrate_from_left());
                }
                row = row.sub(&st.p[j].components[i].slice(&[s]).scale(lam_s));
                write_row_block(&mut r, pr.r_conj_at(j, s, i), &row, len);
            }
        }
    }

    // Landing rows: step image of y_k against the graph point.
    let q = graph_point(pr, &st.h);
    let yk = &st.y[pr.k - 1];
    let img = step_image(pr.model, &q, yk, st.tau);
    for i in 0..n {
        let row = img[i].sub(&q.components[i]);
        write_row_block(&mut r, pr.r_land() + i * len, &row, len);
    }

    // Departure rows: P_m(sigma) against y_1.
    let pm_sigma = st.p[pr.m - 1].eval_taylor(&[st.sigma]);
    for i in 0..n {
        let row = pm_sigma.components[i].sub(&st.y[0].components[i]);
        write_row_block(&mut r, pr.r_dep() + i * len, &row, len);
    }

    // Chain rows.
    for j in 1..pr.k {
        let img = step_image(pr.model, &st.y[j], &st.y[j - 1], st.tau);
        for i in 0..n {
            let row = img[i].sub(&st.y[j].components[i]);
            write_row_block(&mut r, pr.r_chain_at(j + 1, i), &row, len);
        }
    }
    r
}

/// Coefficient matrix of `v ↦ S((tau/2) g·v)` truncated to `len` rows.
fn s_half_block(g: &ChebSeq<C>, tau: C, len: usize) -> DMatrix<C> {
    let tall = len + g.len() + 1;
    let block = s_matrix::<C>(len, tall) * mult_matrix(g, tall, len);
    block * (tau * 0.5)
}

/// Coefficients of `S((1/2) g)` truncated to `len`.
fn s_half_col(g: &ChebSeq<C>, len: usize) -> Vec<C> {
    let v = g.scale(C::new(0.5, 0.0)).integrate_from_left();
    (0..len).map(|t| v.c(t)).collect()
}

fn add_block(jm: &mut DMatrix<C>, r0: usize, c0: usize, block: &DMatrix<C>) {
    for c in 0..block.ncols() {
        for r in 0..block.nrows() {
            jm[(r0 + r, c0 + c)] += block[(r, c)];
        }
    }
}

/// Dense analytic Jacobian of [`residual`] at `st`.
pub fn jacobian(pr: &HomoclinicProblem, st: &HomoclinicState) -> DMatrix<C> {
    let n = pr.n();
    let len = pr.len();
    let e = e_matrix::<C>(len, len);
    let mut jm = DMatrix::<C>::zeros(pr.total(), pr.total());

    // Phase and scaling rows: endpoint functionals.
    for i in 0..n {
        let r0 = pr.r_phase() + i;
        let c0 = pr.c_p_at(pr.m - 1, 0, i);
        for t in 0..len {
            jm[(r0, c0 + t)] = e[(0, t)];
        }
        jm[(r0, pr.c_delta() + i)] = -C::one();
    }
    {
        let r0 = pr.r_scale();
        let c0 = pr.c_p_at(pr.m - 1, 1, 0);
        for t in 0..len {
            jm[(r0, c0 + t)] = e[(0, t)];
        }
    }

    // Conjugacy rows.
    let s_iota = ChebSeq::constant(C::one()).integrate_from_left();
    for j in 0..pr.m {
        let jp = (j + pr.m - 1) % pr.m;
        let a: Vec<CTaylorSeq> =
            st.p[j].components.iter().map(|c| c.scale_lambda(&[st.lambda])).collect();
        let b = &st.p[jp];
        let f = pr.model.eval(&a, &b.components);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n {
            let mut row1 = Vec::with_capacity(n);
            let mut row2 = Vec::with_capacity(n);
            for l in 0..n {
                row1.push(pr.model.d1(i, l).eval(&a, &b.components));
                row2.push(pr.model.d2(i, l).eval(&a, &b.components));
            }
            d1.push(row1);
            d2.push(row2);
        }
        // d/d lambda of the lambda-scaled segment: slice s picks up s·lambda^{s-1}.
        let lp: Vec<CTaylorSeq> = st.p[j]
            .components
            .iter()
            .map(|comp| {
                let slices = (0..pr.slices())
                    .map(|s| {
                        if s == 0 {
                            ChebSeq::zeros(1)
                        } else {
                            comp.slice(&[s]).scale(st.lambda.powu((s - 1) as u32) * s as f64)
                        }
                    })
                    .collect();
                CTaylorSeq { n_u: 1, order: pr.taylor_order, slices }
            })
            .collect();
        let g: Vec<CTaylorSeq> = (0..n)
            .map(|i| {
                let mut acc: Option<CTaylorSeq> = None;
                for l in 0..n {
                    let term = Algebra::mul(&d1[i][l], &lp[l]);
                    acc = Some(match acc {
                        None => term,
                        Some(prev) => prev.add_seq(&term),
                    });
                }
                acc.expect("at least one component")
            })
            .collect();

        for s in 0..pr.slices() {
            let lam_s = st.lambda.powu(s as u32);
            for i in 0..n {
                let r0 = pr.r_conj_at(j, s, i);
                // tau column: S((1/2) {f}_s).
                let tc = s_half_col(f[i].slice(&[s]), len);
                for t in 0..len {
                    jm[(r0 + t, pr.c_tau())] += tc[t];
                }
                // eta columns enter the slice-0 rows of the injected components.
                if s == 0 && i >= 1 && i <= pr.unfold() {
                    for t in 0..len {
                        jm[(r0 + t, pr.c_eta() + (i - 1))] += s_iota.c(t);
                    }
                }
                // lambda column.
                {
                    let col = s_half_col(g[i].slice(&[s]), len);
                    for t in 0..len {
                        jm[(r0 + t, pr.c_lambda())] += st.tau * col[t];
                    }
                    if s >= 1 {
                        let ps = st.p[j].components[i].slice(&[s]);
                        let fac = st.lambda.powu((s - 1) as u32) * s as f64;
                        for t in 0..len {
                            jm[(r0 + t, pr.c_lambda())] -= fac * ps.c(t);
                        }
                    }
                }
                // Bundle blocks.
                for beta in 0..=s {
                    let lam_b = st.lambda.powu(beta as u32);
                    for l in 0..n {
                        let blk =
                            s_half_block(d1[i][l].slice(&[s - beta]), st.tau, len) * lam_b;
                        add_block(&mut jm, r0, pr.c_p_at(j, beta, l), &blk);
                        let blk2 = s_half_block(d2[i][l].slice(&[s - beta]), st.tau, len);
                        add_block(&mut jm, r0, pr.c_p_at(jp, beta, l), &blk2);
                    }
                }
                // Diagonal -lambda^s I and the E functional on the previous segment.
                {
                    let c0 = pr.c_p_at(j, s, i);
                    for t in 0..len {
                        jm[(r0 + t, c0 + t)] -= lam_s;
                    }
                    let c1 = pr.c_p_at(jp, s, i);
                    for t in 0..len {
                        jm[(r0, c1 + t)] += e[(0, t)];
                    }
                }
            }
        }
    }

    // Landing rows.
    {
        let q = graph_point(pr, &st.h);
        let yk = &st.y[pr.k - 1];
        let fl = pr.model.eval(&q.components, &yk.components);
        let mut b_blocks = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for l in 0..n {
                let d1 = pr.model.d1(i, l).eval(&q.components, &yk.components);
                let mut blk = s_half_block(&d1, st.tau, len);
                if i == l {
                    for t in 0..len {
                        blk[(t, t)] -= C::one();
                    }
                }
                row.push(blk);
            }
            b_blocks.push(row);
        }
        for i in 0..n {
            let r0 = pr.r_land() + i * len;
            // tau column.
            let tc = s_half_col(&fl[i], len);
            for t in 0..len {
                jm[(r0 + t, pr.c_tau())] += tc[t];
            }
            // y_k blocks.
            for l in 0..n {
                let d2 = pr.model.d2(i, l).eval(&q.components, &yk.components);
                let blk = s_half_block(&d2, st.tau, len);
                add_block(&mut jm, r0, pr.c_y_at(pr.k - 1, l), &blk);
            }
            {
                let c0 = pr.c_y_at(pr.k - 1, i);
                for t in 0..len {
                    jm[(r0, c0 + t)] += e[(0, t)];
                }
            }
            // h columns: (S((tau/2) D1) - I) applied to each basis column.
            for c in 0..pr.n_s() {
                let col: DVector<C> = pr.graph.basis.column(c).into_owned();
                for l in 0..n {
                    let v = DVector::from_fn(len, |t, _| col[l * len + t]);
                    let prod = &b_blocks[i][l] * &v;
                    for t in 0..len {
                        jm[(r0 + t, pr.c_h() + c)] += prod[t];
                    }
                }
            }
        }
    }

    // Departure rows.
    {
        let pm = &st.p[pr.m - 1];
        for i in 0..n {
            let r0 = pr.r_dep() + i * len;
            for s in 0..pr.slices() {
                let sig_s = st.sigma.powu(s as u32);
                let c0 = pr.c_p_at(pr.m - 1, s, i);
                for t in 0..len {
                    jm[(r0 + t, c0 + t)] += sig_s;
                }
                if s >= 1 {
                    let fac = st.sigma.powu((s - 1) as u32) * s as f64;
                    let ps = pm.components[i].slice(&[s]);
                    for t in 0..len {
                        jm[(r0 + t, pr.c_sigma())] += fac * ps.c(t);
                    }
                }
            }
            let c0 = pr.c_y_at(0, i);
            for t in 0..len {
                jm[(r0 + t, c0 + t)] -= C::one();
            }
        }
    }

    // Chain rows.
    for j in 1..pr.k {
        let cur = &st.y[j];
        let prev = &st.y[j - 1];
        let fc = pr.model.eval(&cur.components, &prev.components);
        for i in 0..n {
            let r0 = pr.r_chain_at(j + 1, i);
            let tc = s_half_col(&fc[i], len);
            for t in 0..len {
                jm[(r0 + t, pr.c_tau())] += tc[t];
            }
            for l in 0..n {
                let d1 = pr.model.d1(i, l).eval(&cur.components, &prev.components);
                let blk = s_half_block(&d1, st.tau, len);
                add_block(&mut jm, r0, pr.c_y_at(j, l), &blk);
                let d2 = pr.model.d2(i, l).eval(&cur.components, &prev.components);
                let blk2 = s_half_block(&d2, st.tau, len);
                add_block(&mut jm, r0, pr.c_y_at(j - 1, l), &blk2);
            }
            {
                let c0 = pr.c_y_at(j, i);
                for t in 0..len {
                    jm[(r0 + t, c0 + t)] -= C::one();
                }
                let c1 = pr.c_y_at(j - 1, i);
                for t in 0..len {
                    jm[(r0, c1 + t)] += e[(0, t)];
                }
            }
        }
    }
    jm
}

/// Options for the connecting-orbit Newton solve and its certificate.
#[derive(Debug, Clone)]
pub struct HomoclinicOptions {
    /// Sup-norm residual tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// `‖h‖_1` threshold under which the linear-graph landing is adequate.
    pub h_threshold: f64,
    /// Allowed imaginary residue on quantities that are real at a solution.
    pub imag_tol: f64,
}

impl Default for HomoclinicOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 25, h_threshold: 1e-8, imag_tol: 1e-9 }
    }
}

/// A converged connecting orbit plus solver-side diagnostics.
#[derive(Debug)]
pub struct HomoclinicSolution {
    pub state: HomoclinicState,
    pub report: NewtonReport,
    /// Reciprocal condition estimate of the Jacobian at the solution.
    pub rcond: f64,
    /// Whether the solution Jacobian contains (numerically) duplicate rows.
    pub duplicate_rows: bool,
}

/// Detect duplicated rows via a deterministic random projection, confirming
/// candidates by direct comparison.
fn has_duplicate_rows(jm: &DMatrix<C>) -> bool {
    let rows = jm.nrows();
    let cols = jm.ncols();
    // Deterministic LCG weights.
    let mut w = Vec::with_capacity(cols);
    let mut state = 0x2545f4914f6cdd1du64;
    for _ in 0..cols {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        w.push(((state >> 11) as f64) / ((1u64 << 53) as f64));
    }
    let mut sig: Vec<(f64, usize)> = (0..rows)
        .map(|r| {
            let mut acc = 0.0;
            for c in 0..cols {
                acc += w[c] * (jm[(r, c)].re + 0.7071067811865476 * jm[(r, c)].im);
            }
            (acc, r)
        })
        .collect();
    sig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for win in sig.windows(2) {
        let (sa, ra) = win[0];
        let (sb, rb) = win[1];
        let scale = sa.abs().max(sb.abs()).max(1e-300);
        if (sa - sb).abs() > 1e-10 * scale {
            continue;
        }
        let mut diff = 0.0f64;
        let mut size = 0.0f64;
        for c in 0..cols {
            diff += (jm[(ra, c)] - jm[(rb, c)]).norm();
            size += jm[(ra, c)].norm().max(jm[(rb, c)].norm());
        }
        if diff <= 1e-12 * size.max(1e-300) {
            return true;
        }
    }
    false
}

/// Newton iteration on the connecting-orbit system with full steps.
pub fn newton_homoclinic(
    pr: &HomoclinicProblem,
    seed: &HomoclinicState,
    opts: &HomoclinicOptions,
) -> Result<HomoclinicSolution> {
    let mut x = seed.pack(pr);
    let mut norms: Vec<f64> = Vec::new();
    loop {
        let st = HomoclinicState::unpack(pr, &x);
        let r = residual(pr, &st);
        let res = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        norms.push(res);
        if res < opts.tol {
            let jm = jacobian(pr, &st);
            let duplicate_rows = has_duplicate_rows(&jm);
            let lu = Lu::factor(jm, "connection jacobian")?;
            let rcond = lu.rcond()?;
            return Ok(HomoclinicSolution {
                state: st,
                report: NewtonReport { residual_norms: norms, converged: true },
                rcond,
                duplicate_rows,
            });
        }
        if norms.len() > opts.max_iters {
            return Err(Error::NoConvergence {
                context: "connecting-orbit newton",
                iterations: norms.len() - 1,
                residual: res,
            });
        }
        let grew = norms.len() >= 4 && {
            let t = &norms[norms.len() - 4..];
            t[1] > t[0] && t[2] > t[1] && t[3] > t[2]
        };
        if grew {
            return Err(Error::NoConvergence {
                context: "connecting-orbit newton (diverging)",
                iterations: norms.len() - 1,
                residual: res,
            });
        }
        let jm = jacobian(pr, &st);
        let lu = Lu::factor(jm, "connection jacobian")?;
        let dx = lu.solve_vec(&r)?;
        x -= dx;
    }
}

/// The chart scaling a solved bundle actually carries (slice-1 endpoint of
/// the physical component of the last segment); pinning `gamma` to this value
/// makes a converged bundle an exact zero of the scaling row.
pub fn seed_gamma(param: &ManifoldParam) -> C {
    let m = param.p.len();
    param.p[m - 1].components[0].slice(&[1]).eval_right()
}

/// Build a Newton seed from a converged orbit, bundle, and growth data:
/// departure at the real-slice ray point `sigma_ray`, `k` forward steps, and
/// a least-squares fit of the final step image onto the stable graph.
pub fn seed_connection(
    pr: &HomoclinicProblem,
    orbit: &SegmentedOrbit,
    param: &ManifoldParam,
    sigma_ray: f64,
) -> Result<HomoclinicState> {
    if param.lambdas.len() != 1 {
        return Err(Error::InvalidInput(
            "connecting-orbit seeding expects a single unstable direction".into(),
        ));
    }
    let m = pr.m;
    let ray = C::from_polar(1.0, (m as f64 - 1.0) * std::f64::consts::PI / m as f64);
    let sigma = ray * sigma_ray;
    let p: Vec<CTaylorVec> = param
        .p
        .iter()
        .map(|seg| seg.taylor_truncate(pr.taylor_order).cheb_truncate(pr.degree))
        .collect();
    let mut y = Vec::with_capacity(pr.k);
    let mut cur = p[m - 1].eval_taylor(&[sigma]).truncated(pr.degree);
    y.push(cur.clone());
    for _ in 1..pr.k {
        cur = step(&cur, orbit.tau, pr.model, pr.degree, &StepOptions::default())?.segment;
        y.push(cur.clone());
    }
    let image = step(&cur, orbit.tau, pr.model, pr.degree, &StepOptions::default())?.segment;
    let rhs_seq = image.sub(&pr.graph.center);
    let rhs = rhs_seq.flatten(pr.degree);
    let h = lstsq_complex(&pr.graph.basis, &rhs)?;
    let delta: Vec<C> =
        (0..pr.n()).map(|i| p[m - 1].components[i].slice(&[0]).eval_right()).collect();
    Ok(HomoclinicState {
        tau: C::new(orbit.tau, 0.0),
        eta: orbit.eta.iter().map(|&e| C::new(e, 0.0)).collect(),
        lambda: param.lambdas[0],
        p,
        sigma,
        delta,
        h,
        y,
    })
}

/// Certificate-style summary of a solved connection.
#[derive(Debug, Clone)]
pub struct TransversalityReport {
    pub converged: bool,
    pub final_residual: f64,
    pub iterations: usize,
    /// Successive residual ratios `r_{i+1} / r_i`.
    pub newton_ratios: Vec<f64>,
    pub quadratic_tail: bool,
    /// `l1` size of the stable graph coordinates at the solution.
    pub h_norm: f64,
    pub h_threshold: f64,
    /// Second-order landing error bound `‖h‖²`.
    pub quadratic_bound: f64,
    /// Reciprocal condition estimate (reported, never asserted).
    pub rcond: f64,
    /// `|tau - tau_ref|` against the reference orbit delay.
    pub delay_gap: f64,
    /// Worst imaginary residue among `tau`, `eta`, `delta`, and the chain.
    pub max_imag: f64,
    pub duplicate_rows: bool,
    pub certified: bool,
}

/// Assemble the transversality report for a solved connection.
pub fn transversality_report(
    sol: &HomoclinicSolution,
    tau_ref: f64,
    opts: &HomoclinicOptions,
) -> TransversalityReport {
    let h_norm: f64 = sol.state.h.iter().map(|z| z.norm()).sum();
    let norms = &sol.report.residual_norms;
    let newton_ratios: Vec<f64> = norms
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let mut max_imag = sol.state.tau.im.abs();
    for e in &sol.state.eta {
        max_imag = max_imag.max(e.im.abs());
    }
    for d in &sol.state.delta {
        max_imag = max_imag.max(d.im.abs());
    }
    for seg in &sol.state.y {
        for comp in &seg.components {
            for t in 0..comp.len() {
                max_imag = max_imag.max(comp.c(t).im.abs());
            }
        }
    }
    let certified = sol.report.converged
        && h_norm <= opts.h_threshold
        && !sol.duplicate_rows
        && max_imag <= opts.imag_tol;
    TransversalityReport {
        converged: sol.report.converged,
        final_residual: sol.report.final_residual(),
        iterations: sol.report.iterations(),
        newton_ratios,
        quadratic_tail: sol.report.has_quadratic_tail(1e-13),
        h_norm,
        h_threshold: opts.h_threshold,
        quadratic_bound: h_norm * h_norm,
        rcond: sol.rcond,
        delay_gap: (sol.state.tau - C::new(tau_ref, 0.0)).norm(),
        max_imag,
        duplicate_rows: sol.duplicate_rows,
        certified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{floquet_data, CENTER_TOL};
    use crate::manifold::{solve_manifold, ManifoldOptions};
    use crate::models::ikeda;
    use crate::periodic::{newton_periodic, orbit_guess_from_series, PeriodicOptions};

    fn read_series() -> Vec<(f64, f64)> {
        let path =
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/cubic_ikeda_series.csv");
        let text = std::fs::read_to_string(path).unwrap();
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let mut parts = l.split(',');
                (
                    parts.next().unwrap().trim().parse().unwrap(),
                    parts.next().unwrap().trim().parse().unwrap(),
                )
            })
            .collect()
    }

    /// Small Ikeda instance: coarse degree and Taylor order, short chain.
    fn tiny_setup(
        degree: usize,
        taylor_order: usize,
        k: usize,
    ) -> (crate::models::DdeModel, SegmentedOrbit, ManifoldParam) {
        let model = ikeda();
        let series = read_series();
        let guess = orbit_guess_from_series(&series, &model, 8, degree, 0.0).unwrap();
        let (orbit, rep) = newton_periodic(&guess, &model, &PeriodicOptions::default()).unwrap();
        assert!(rep.converged);
        let fd = floquet_data(&orbit, &model, CENTER_TOL).unwrap();
        let opts = ManifoldOptions { taylor_order, ..ManifoldOptions::default() };
        let param = solve_manifold(&orbit, &model, &fd, &opts).unwrap();
        let _ = k;
        (model, orbit, param)
    }

    #[test]
    fn layout_is_square_and_roundtrips() {
        let (model, orbit, param) = tiny_setup(10, 4, 3);
        let graph = build_stable_graph(
            &orbit,
            &model,
            3,
            &GraphOptions { count: Some(11 - 2), min_modulus: 0.0 },
        )
        .unwrap();
        let gamma = seed_gamma(&param);
        let pr = HomoclinicProblem::new(&model, 10, 4, 8, 3, gamma, graph).unwrap();
        assert_eq!(pr.rows(), pr.total());
        let seed = seed_connection(&pr, &orbit, &param, 0.35).unwrap();
        let x = seed.pack(&pr);
        let st = HomoclinicState::unpack(&pr, &x);
        let x2 = st.pack(&pr);
        assert_eq!(x.len(), pr.total());
        for i in 0..x.len() {
            assert_eq!(x[i], x2[i], "component {i}");
        }
    }

    #[test]
    fn seed_zeroes_every_block_but_the_landing() {
        let (model, orbit, param) = tiny_setup(12, 5, 3);
        let graph = build_stable_graph(
            &orbit,
            &model,
            5,
            &GraphOptions { count: Some(13 - 2), min_modulus: 0.0 },
        )
        .unwrap();
        let gamma = seed_gamma(&param);
        let pr = HomoclinicProblem::new(&model, 12, 5, 8, 3, gamma, graph).unwrap();
        let seed = seed_connection(&pr, &orbit, &param, 0.3).unwrap();
        let r = residual(&pr, &seed);
        let sup = |lo: usize, hi: usize| {
            (lo..hi).map(|i| r[i].norm()).fold(0.0f64, f64::max)
        };
        // Phase, scaling, and departure rows vanish by construction.
        assert!(sup(pr.r_phase(), pr.r_conj()) < 1e-13);
        assert!(sup(pr.r_dep(), pr.r_chain()) < 1e-12);
        // Conjugacy rows reproduce the bundle solve, chain rows the stepper.
        assert!(sup(pr.r_conj(), pr.r_land()) < 1e-9);
        assert!(sup(pr.r_chain(), pr.rows()) < 1e-11);
        // The landing rows carry the least-squares misfit; they are the only
        // rows allowed to be visibly nonzero.
        assert!(sup(pr.r_land(), pr.r_dep()) < 1.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (model, orbit, param) = tiny_setup(8, 3, 2);
        let graph = build_stable_graph(
            &orbit,
            &model,
            2,
            &GraphOptions { count: Some(9 - 2), min_modulus: 0.0 },
        )
        .unwrap();
        let gamma = seed_gamma(&param);
        let pr = HomoclinicProblem::new(&model, 8, 3, 8, 2, gamma, graph).unwrap();
        let seed = seed_connection(&pr, &orbit, &param, 0.4).unwrap();
        let x0 = seed.pack(&pr);
        let st0 = HomoclinicState::unpack(&pr, &x0);
        let jm = jacobian(&pr, &st0);
        let eps = 1e-7;
        // Deterministically sample columns across every block.
        let picks: Vec<usize> = vec![
            pr.c_tau(),
            pr.c_lambda(),
            pr.c_p_at(0, 0, 0) + 2,
            pr.c_p_at(3, 1, 0) + 5,
            pr.c_p_at(7, 3, 0),
            pr.c_p_at(7, 0, 0) + 1,
            pr.c_sigma(),
            pr.c_delta(),
            pr.c_h() + 3,
            pr.c_y_at(0, 0) + 4,
            pr.c_y_at(1, 0) + 7,
        ];
        for &c in &picks {
            let mut xp = x0.clone();
            xp[c] += C::new(eps, 0.0);
            let mut xm = x0.clone();
            xm[c] -= C::new(eps, 0.0);
            let rp = residual(&pr, &HomoclinicState::unpack(&pr, &xp));
            let rm = residual(&pr, &HomoclinicState::unpack(&pr, &xm));
            let mut worst = 0.0f64;
            let mut scale = 1.0f64;
            for rix in 0..pr.total() {
                let fd = (rp[rix] - rm[rix]) / (2.0 * eps);
                worst = worst.max((fd - jm[(rix, c)]).norm());
                scale = scale.max(jm[(rix, c)].norm());
            }
            assert!(
                worst <= 2e-6 * scale,
                "column {c}: finite-difference gap {worst:.3e} (scale {scale:.3e})"
            );
        }
    }
}
