//! Floquet analysis of a segmented periodic orbit.
//!
//! Linearizing one Chebyshev step about the orbit gives, per segment `j`, the
//! truncated monodromy factor
//!
//! ```text
//! Hhat_j = (I - S[(tau/2) D1f(c_{j+1}, c_j)])^{-1} (E + S[(tau/2) D2f(c_{j+1}, c_j)])
//! ```
//!
//! mapping history perturbations of segment `j` to segment `j+1` (indices
//! cyclic). The full-loop monodromy based at segment `j` is the ordered
//! product `H_j = Hhat_{j-1} ··· Hhat_1 · Hhat_m ··· Hhat_j` (rightmost factor
//! applied first). Its spectrum — the Floquet multipliers — is classified
//! against the unit circle, an m-th root `lambda` of the selected unstable
//! multiplier is fixed, and the eigenvector is transported around the orbit
//! by `v_j = lambda^{-1} Hhat_{j-1} v_{j-1}`, which downstream stages use as
//! the first-order data of the unstable-manifold parameterization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chebseq::{e_matrix, CVecSeq, VecChebSeq};
use crate::linalg::{eig_real, order_by_modulus_desc, Lu};
use crate::models::DdeModel;
use crate::periodic::SegmentedOrbit;
use crate::stepper::{s_d1_block, s_d2_block};
use crate::{Error, Result};

/// Default distance from the unit circle below which a multiplier counts as
/// a center eigenvalue.
pub const CENTER_TOL: f64 = 1e-6;

/// Spectrum, classification and transported eigenvector data of an orbit.
#[derive(Debug, Clone)]
pub struct FloquetData {
    /// All multipliers of the based monodromy matrix, descending modulus.
    pub eigenvalues: Vec<Complex64>,
    /// (unstable, center, stable) counts at the classification tolerance.
    pub counts: (usize, usize, usize),
    /// Selected unstable multiplier (largest modulus).
    pub mu: Complex64,
    /// Chosen m-th root of `mu` for the segment-level maps.
    pub lambda: Complex64,
    /// Transported eigenvectors `v_1..v_m` (index 0 is the base segment's).
    pub vectors: Vec<CVecSeq>,
    /// Base segment of the monodromy product (1-based, as in `H_1`).
    pub base_index: usize,
}

/// Componentwise endpoint-injection operator `E` on a flattened segment.
pub fn e_block(n: usize, degree: usize) -> DMatrix<f64> {
    let len = degree + 1;
    let e = e_matrix::<f64>(len, len);
    let mut out = DMatrix::zeros(n * len, n * len);
    for i in 0..n {
        out.view_mut((i * len, i * len), (len, len)).copy_from(&e);
    }
    out
}

/// The factor `Hhat_j` taking perturbations of segment `j` (1-based) to
/// perturbations of segment `j+1` (cyclically).
pub fn build_hhat(
    j: usize,
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    degree: usize,
) -> Result<DMatrix<f64>> {
    let m = orbit.m();
    assert!((1..=m).contains(&j), "segment index is 1-based");
    let prev = &orbit.segments[j - 1];
    let cur = &orbit.segments[j % m];
    let rhs = e_block(model.dim, degree) + s_d2_block(model, cur, prev, orbit.tau, degree);
    let d1 = s_d1_block(model, cur, prev, orbit.tau, degree);
    if d1.iter().all(|v| *v == 0.0) {
        return Ok(rhs);
    }
    let dim = d1.nrows();
    let inner = DMatrix::identity(dim, dim) - d1;
    let lu = Lu::factor(inner, "monodromy factor inner solve")?;
    let mut out = rhs;
    lu.solve_in_place(&mut out)?;
    Ok(out)
}

/// All `m` factors, `Hhat_1..Hhat_m` (index 0 holds `Hhat_1`).
pub fn build_all_hhat(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    degree: usize,
) -> Result<Vec<DMatrix<f64>>> {
    (1..=orbit.m()).map(|j| build_hhat(j, orbit, model, degree)).collect()
}

/// The based monodromy matrix `H_j` (1-based), as the ordered cyclic product
/// of the factors with `Hhat_j` applied first.
pub fn build_h(j: usize, hhat: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = hhat.len();
    assert!((1..=m).contains(&j));
    let mut h = hhat[j - 1].clone();
    for step in 1..m {
        let k = (j - 1 + step) % m;
        h = &hhat[k] * h;
    }
    h
}

/// Eigenvalues of a monodromy matrix classified against the unit circle.
pub fn classify_spectrum(h: &DMatrix<f64>, center_tol: f64) -> Result<(Vec<Complex64>, (usize, usize, usize))> {
    let (values, _) = eig_real(h)?;
    let order = order_by_modulus_desc(&values);
    let sorted: Vec<Complex64> = order.iter().map(|&i| values[i]).collect();
    let mut counts = (0usize, 0usize, 0usize);
    for z in &sorted {
        let r = z.norm();
        if (r - 1.0).abs() <= center_tol {
            counts.1 += 1;
        } else if r > 1.0 {
            counts.0 += 1;
        } else {
            counts.2 += 1;
        }
    }
    Ok((sorted, counts))
}

/// The m-th root of an unstable multiplier used by the segment-level maps:
/// negative real multipliers take the root on the ray `e^{i·pi/m}`, positive
/// real ones the positive real root, and genuinely complex ones the
/// principal root.
pub fn choose_root(mu: Complex64, m: usize) -> Result<Complex64> {
    if mu.norm() <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "m-th root selection expects an unstable multiplier, got |mu| = {}",
            mu.norm()
        )));
    }
    let tol = 1e-12 * mu.norm();
    let root_mod = mu.norm().powf(1.0 / m as f64);
    if mu.im.abs() <= tol && mu.re < 0.0 {
        let angle = std::f64::consts::PI / m as f64;
        Ok(Complex64::from_polar(root_mod, angle))
    } else if mu.im.abs() <= tol {
        Ok(Complex64::new(root_mod, 0.0))
    } else {
        Ok(mu.powc(Complex64::new(1.0 / m as f64, 0.0)))
    }
}

/// Product of a real matrix with a complex vector.
pub fn complex_matvec(a: &DMatrix<f64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let re: DVector<f64> = v.map(|z| z.re);
    let im: DVector<f64> = v.map(|z| z.im);
    let pre = a * re;
    let pim = a * im;
    DVector::from_fn(pre.len(), |i, _| Complex64::new(pre[i], pim[i]))
}

/// Transport an eigenvector of `H_{j0}` around the orbit:
/// `v_{j+1} = lambda^{-1} Hhat_j v_j`. Returns `v_1..v_m` (index 0 = segment 1).
pub fn transport_eigenvector(
    j0: usize,
    v: &DVector<Complex64>,
    lambda: Complex64,
    hhat: &[DMatrix<f64>],
) -> Vec<DVector<Complex64>> {
    let m = hhat.len();
    assert!((1..=m).contains(&j0));
    let mut out = vec![DVector::zeros(v.len()); m];
    out[j0 - 1] = v.clone();
    let inv = Complex64::new(1.0, 0.0) / lambda;
    for step in 0..m - 1 {
        let j = (j0 - 1 + step) % m; // factor Hhat_{j+1} moves segment j+1 -> j+2
        let next = complex_matvec(&hhat[j], &out[j]);
        out[(j + 1) % m] = next.map(|z| z * inv);
    }
    out
}

/// Relative eigen-residual `‖H v − mu v‖ / ‖v‖` with a real matrix.
pub fn eigen_residual(h: &DMatrix<f64>, v: &DVector<Complex64>, mu: Complex64) -> f64 {
    let hv = complex_matvec(h, v);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..v.len() {
        num += (hv[i] - mu * v[i]).norm_sqr();
        den += v[i].norm_sqr();
    }
    (num / den).sqrt()
}

/// Full Floquet pipeline for a converged orbit: spectrum of `H_1`,
/// classification, root choice for the dominant multiplier, and transported
/// eigenvectors.
pub fn floquet_data(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    center_tol: f64,
) -> Result<FloquetData> {
    let degree = orbit.degree();
    let n = model.dim;
    let m = orbit.m();
    let hhat = build_all_hhat(orbit, model, degree)?;
    let h1 = build_h(1, &hhat);
    let (values, vectors) = eig_real(&h1)?;
    let order = order_by_modulus_desc(&values);
    let sorted: Vec<Complex64> = order.iter().map(|&i| values[i]).collect();
    let mut counts = (0usize, 0usize, 0usize);
    for z in &sorted {
        let r = z.norm();
        if (r - 1.0).abs() <= center_tol {
            counts.1 += 1;
        } else if r > 1.0 {
            counts.0 += 1;
        } else {
            counts.2 += 1;
        }
    }
    let mu = sorted[0];
    let lambda = choose_root(mu, m)?;
    let v1: DVector<Complex64> = vectors.column(order[0]).into_owned();
    let transported = transport_eigenvector(1, &v1, lambda, &hhat);
    let vectors = transported
        .iter()
        .map(|v| VecChebSeq::from_flat(v.as_slice(), n, degree))
        .collect();
    Ok(FloquetData { eigenvalues: sorted, counts, mu, lambda, vectors, base_index: 1 })
}
