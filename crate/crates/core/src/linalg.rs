//! Dense linear-algebra kernels used across the pipeline: LU factorization
//! with forward/back solves and reciprocal-condition estimation, the real
//! nonsymmetric eigenproblem, complex least squares, and gemm.
//!
//! Everything dispatches to the system LAPACK/BLAS (OpenBLAS). nalgebra's
//! column-major dense storage maps directly onto the FFI, so no copies are
//! made beyond what LAPACK itself requires.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

extern "C" {
    fn dgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const f64,
        a: *const f64,
        lda: *const i32,
        b: *const f64,
        ldb: *const i32,
        beta: *const f64,
        c: *mut f64,
        ldc: *const i32,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

/// Scalar types with LAPACK LU / condition-estimation support.
pub trait LapackScalar: nalgebra::ComplexField<RealField = f64> + Copy {
    unsafe fn getrf(n: i32, a: *mut Self, lda: i32, ipiv: *mut i32, info: *mut i32);
    unsafe fn getrs(
        trans: u8,
        n: i32,
        nrhs: i32,
        a: *const Self,
        lda: i32,
        ipiv: *const i32,
        b: *mut Self,
        ldb: i32,
        info: *mut i32,
    );
    unsafe fn gecon(n: i32, a: *const Self, lda: i32, anorm: f64, rcond: *mut f64, info: *mut i32);
    unsafe fn gemm(
        transa: u8,
        transb: u8,
        m: i32,
        n: i32,
        k: i32,
        alpha: Self,
        a: *const Self,
        lda: i32,
        b: *const Self,
        ldb: i32,
        beta: Self,
        c: *mut Self,
        ldc: i32,
    );
}

impl LapackScalar for f64 {
    unsafe fn getrf(n: i32, a: *mut Self, lda: i32, ipiv: *mut i32, info: *mut i32) {
        lapack_sys::dgetrf_(&n, &n, a, &lda, ipiv, info);
    }
    unsafe fn getrs(
        trans: u8,
        n: i32,
        nrhs: i32,
        a: *const Self,
        lda: i32,
        ipiv: *const i32,
        b: *mut Self,
        ldb: i32,
        info: *mut i32,
    ) {
        lapack_sys::dgetrs_(&trans as *const u8 as *const i8, &n, &nrhs, a, &lda, ipiv, b, &ldb, info);
    }
    unsafe fn gecon(n: i32, a: *const Self, lda: i32, anorm: f64, rcond: *mut f64, info: *mut i32) {
        let mut work = vec![0.0f64; (4 * n.max(1)) as usize];
        let mut iwork = vec![0i32; n.max(1) as usize];
        lapack_sys::dgecon_(
            b"1".as_ptr() as *const i8,
            &n,
            a,
            &lda,
            &anorm,
            rcond,
            work.as_mut_ptr(),
            iwork.as_mut_ptr(),
            info,
        );
    }
    unsafe fn gemm(
        transa: u8,
        transb: u8,
        m: i32,
        n: i32,
        k: i32,
        alpha: Self,
        a: *const Self,
        lda: i32,
        b: *const Self,
        ldb: i32,
        beta: Self,
        c: *mut Self,
        ldc: i32,
    ) {
        dgemm_(
            &transa, &transb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc,
        );
    }
}

impl LapackScalar for Complex64 {
    unsafe fn getrf(n: i32, a: *mut Self, lda: i32, ipiv: *mut i32, info: *mut i32) {
        lapack_sys::zgetrf_(&n, &n, a as *mut _, &lda, ipiv, info);
    }
    unsafe fn getrs(
        trans: u8,
        n: i32,
        nrhs: i32,
        a: *const Self,
        lda: i32,
        ipiv: *const i32,
        b: *mut Self,
        ldb: i32,
        info: *mut i32,
    ) {
        lapack_sys::zgetrs_(&trans as *const u8 as *const i8, &n, &nrhs, a as *const _, &lda, ipiv, b as *mut _, &ldb, info);
    }
    unsafe fn gecon(n: i32, a: *const Self, lda: i32, anorm: f64, rcond: *mut f64, info: *mut i32) {
        let mut work = vec![Complex64::new(0.0, 0.0); (2 * n.max(1)) as usize];
        let mut rwork = vec![0.0f64; (2 * n.max(1)) as usize];
        lapack_sys::zgecon_(
            b"1".as_ptr() as *const i8,
            &n,
            a as *const _,
            &lda,
            &anorm,
            rcond,
            work.as_mut_ptr() as *mut _,
            rwork.as_mut_ptr(),
            info,
        );
    }
    unsafe fn gemm(
        transa: u8,
        transb: u8,
        m: i32,
        n: i32,
        k: i32,
        alpha: Self,
        a: *const Self,
        lda: i32,
        b: *const Self,
        ldb: i32,
        beta: Self,
        c: *mut Self,
        ldc: i32,
    ) {
        zgemm_(
            &transa, &transb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc,
        );
    }
}

/// LU factorization (partial pivoting) of a square matrix, retaining the
/// 1-norm of the original matrix so a reciprocal condition estimate is
/// available after the fact.
pub struct Lu<T: LapackScalar> {
    factors: DMatrix<T>,
    ipiv: Vec<i32>,
    anorm: f64,
}

/// Column-wise 1-norm of a matrix.
pub fn norm_one<T: LapackScalar>(a: &DMatrix<T>) -> f64 {
    let mut best = 0.0f64;
    for col in a.column_iter() {
        let s: f64 = col.iter().map(|v| v.modulus()).sum();
        best = best.max(s);
    }
    best
}

impl<T: LapackScalar> Lu<T> {
    /// Factor `a` in place (the argument is consumed as workspace).
    pub fn factor(a: DMatrix<T>, context: &'static str) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "Lu::factor",
                detail: format!("matrix is {}x{}", a.nrows(), a.ncols()),
            });
        }
        let anorm = norm_one(&a);
        let mut factors = a;
        let mut ipiv = vec![0i32; n];
        let mut info = 0i32;
        unsafe {
            T::getrf(n as i32, factors.as_mut_ptr(), n as i32, ipiv.as_mut_ptr(), &mut info);
        }
        if info > 0 {
            return Err(Error::SingularMatrix { context, pivot: info as usize });
        }
        if info < 0 {
            return Err(Error::Lapack { routine: "getrf", info });
        }
        Ok(Self { factors, ipiv, anorm })
    }

    pub fn dim(&self) -> usize {
        self.factors.nrows()
    }

    /// Solve `A x = b` for each column of `b`, in place.
    pub fn solve_in_place(&self, b: &mut DMatrix<T>) -> Result<()> {
        self.solve_trans_in_place(b, b'N')
    }

    /// Solve `A^T x = b` in place (unconjugated transpose).
    pub fn solve_transpose_in_place(&self, b: &mut DMatrix<T>) -> Result<()> {
        self.solve_trans_in_place(b, b'T')
    }

    fn solve_trans_in_place(&self, b: &mut DMatrix<T>, trans: u8) -> Result<()> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "Lu::solve",
                detail: format!("rhs has {} rows, matrix is {}x{}", b.nrows(), n, n),
            });
        }
        let mut info = 0i32;
        unsafe {
            T::getrs(
                trans,
                n as i32,
                b.ncols() as i32,
                self.factors.as_ptr(),
                n as i32,
                self.ipiv.as_ptr(),
                b.as_mut_ptr(),
                n as i32,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "getrs", info });
        }
        Ok(())
    }

    /// Solve for a single vector right-hand side.
    pub fn solve_vec(&self, b: &DVector<T>) -> Result<DVector<T>> {
        let mut m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_in_place(&mut m)?;
        Ok(DVector::from_column_slice(m.as_slice()))
    }

    /// 1-norm of the matrix as it was before factorization.
    pub fn norm_one_original(&self) -> f64 {
        self.anorm
    }

    /// Estimated smallest 1-norm singular value `1 / ‖A⁻¹‖₁ = rcond · ‖A‖₁`.
    pub fn smallest_singular_estimate(&self) -> Result<f64> {
        Ok(self.rcond()? * self.anorm)
    }

    /// Reciprocal 1-norm condition estimate (Hager–Higham estimator).
    pub fn rcond(&self) -> Result<f64> {
        let n = self.dim();
        let mut rcond = 0.0f64;
        let mut info = 0i32;
        unsafe {
            T::gecon(n as i32, self.factors.as_ptr(), n as i32, self.anorm, &mut rcond, &mut info);
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "gecon", info });
        }
        Ok(rcond)
    }
}

/// `c <- alpha * a * b + beta * c` on column-major views. The views must have
/// unit row stride (any view formed from contiguous row blocks of a column-
/// major matrix qualifies).
pub fn gemm<T: LapackScalar>(
    alpha: T,
    a: DMatrixView<'_, T>,
    b: DMatrixView<'_, T>,
    beta: T,
    mut c: DMatrixViewMut<'_, T>,
) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb, "gemm inner dimensions");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    assert_eq!(a.strides().0, 1, "gemm requires unit row stride");
    assert_eq!(b.strides().0, 1, "gemm requires unit row stride");
    assert_eq!(c.strides().0, 1, "gemm requires unit row stride");
    if m == 0 || n == 0 {
        return;
    }
    let lda = a.strides().1.max(1) as i32;
    let ldb = b.strides().1.max(1) as i32;
    let ldc = c.strides().1.max(1) as i32;
    unsafe {
        T::gemm(
            b'N',
            b'N',
            m as i32,
            n as i32,
            k as i32,
            alpha,
            a.as_ptr(),
            lda,
            b.as_ptr(),
            ldb,
            beta,
            c.as_mut_ptr(),
            ldc,
        );
    }
}

/// Eigenvalues and right eigenvectors of a real general matrix.
///
/// Eigenvectors come back as complex columns: for a conjugate pair LAPACK's
/// packed real representation is expanded, so column `j` always satisfies
/// `A v_j = lambda_j v_j` with unit 2-norm.
pub fn eig_real(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eig_real",
            detail: format!("matrix is {}x{}", a.nrows(), a.ncols()),
        });
    }
    let mut work_a = a.clone();
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut vr = DMatrix::<f64>::zeros(n, n);
    let mut info = 0i32;
    // Workspace query, then the real call.
    let mut lwork_query = [0.0f64];
    unsafe {
        lapack_sys::dgeev_(
            b"N".as_ptr() as *const i8,
            b"V".as_ptr() as *const i8,
            &(n as i32),
            work_a.as_mut_ptr(),
            &(n as i32),
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1i32,
            vr.as_mut_ptr(),
            &(n as i32),
            lwork_query.as_mut_ptr(),
            &(-1i32),
            &mut info,
        );
    }
    let lwork = (lwork_query[0] as i32).max(4 * n as i32);
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        lapack_sys::dgeev_(
            b"N".as_ptr() as *const i8,
            b"V".as_ptr() as *const i8,
            &(n as i32),
            work_a.as_mut_ptr(),
            &(n as i32),
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1i32,
            vr.as_mut_ptr(),
            &(n as i32),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgeev", info });
    }
    let values: Vec<Complex64> = (0..n).map(|j| Complex64::new(wr[j], wi[j])).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut j = 0;
    while j < n {
        if wi[j] == 0.0 {
            for i in 0..n {
                vectors[(i, j)] = Complex64::new(vr[(i, j)], 0.0);
            }
            j += 1;
        } else {
            for i in 0..n {
                vectors[(i, j)] = Complex64::new(vr[(i, j)], vr[(i, j + 1)]);
                vectors[(i, j + 1)] = Complex64::new(vr[(i, j)], -vr[(i, j + 1)]);
            }
            j += 2;
        }
    }
    Ok((values, vectors))
}

/// Indices that sort eigenvalues by descending modulus.
pub fn order_by_modulus_desc(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .norm()
            .partial_cmp(&values[i].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

/// Minimum-norm least-squares solution of `A x ~ b` via SVD (zgelsd), robust
/// to (near-)rank-deficient `A`.
pub fn lstsq_complex(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            context: "lstsq_complex",
            detail: format!("A is {}x{}, b has {} rows", m, n, b.len()),
        });
    }
    let mut work_a = a.clone();
    let ldb = m.max(n);
    let mut rhs = DMatrix::<Complex64>::zeros(ldb, 1);
    for i in 0..m {
        rhs[(i, 0)] = b[i];
    }
    let mut s = vec![0.0f64; m.min(n)];
    let rcond = -1.0f64; // machine-precision rank threshold
    let mut rank = 0i32;
    let mut info = 0i32;
    // Workspace query.
    let mut wkopt = [Complex64::new(0.0, 0.0)];
    let mut rwork_query = [0.0f64];
    let mut iwork_query = [0i32];
    unsafe {
        lapack_sys::zgelsd_(
            &(m as i32),
            &(n as i32),
            &1i32,
            work_a.as_mut_ptr() as *mut _,
            &(m as i32),
            rhs.as_mut_ptr() as *mut _,
            &(ldb as i32),
            s.as_mut_ptr(),
            &rcond,
            &mut rank,
            wkopt.as_mut_ptr() as *mut _,
            &(-1i32),
            rwork_query.as_mut_ptr(),
            iwork_query.as_mut_ptr(),
            &mut info,
        );
    }
    let lwork = wkopt[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; (rwork_query[0] as usize).max(1)];
    let mut iwork = vec![0i32; (iwork_query[0] as usize).max(1)];
    unsafe {
        lapack_sys::zgelsd_(
            &(m as i32),
            &(n as i32),
            &1i32,
            work_a.as_mut_ptr() as *mut _,
            &(m as i32),
            rhs.as_mut_ptr() as *mut _,
            &(ldb as i32),
            s.as_mut_ptr(),
            &rcond,
            &mut rank,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zgelsd", info });
    }
    Ok(DVector::from_fn(n, |i, _| rhs[(i, 0)]))
}

/// Convergence record of a Newton iteration.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Residual norm before each correction, then the final residual norm.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().unwrap_or(&f64::INFINITY)
    }

    /// Whether the trailing iterates contract at least quadratically until
    /// they hit the floor set by roundoff. The test is deliberately loose
    /// (`r_next <= c * r^2` with a generous constant) — it distinguishes
    /// Newton-like convergence from linear creep, nothing finer.
    pub fn has_quadratic_tail(&self, floor: f64) -> bool {
        let rs = &self.residual_norms;
        if rs.len() < 2 {
            return false;
        }
        let mut checked = false;
        for w in rs.windows(2) {
            let (r0, r1) = (w[0], w[1]);
            if r0 < 1.0e-1 && r0 > floor {
                checked = true;
                if r1 > (1.0e3 * r0 * r0).max(floor) {
                    return false;
                }
            }
        }
        checked || self.final_residual() <= floor
    }
}

/// Generic Newton driver: `residual_norm` measures the current iterate,
/// `correct` applies one Newton update in place. Stops when the measured norm
/// drops to `tol` or the iteration budget runs out.
pub fn newton<X>(
    x: &mut X,
    tol: f64,
    max_iter: usize,
    context: &'static str,
    mut residual_norm: impl FnMut(&X) -> Result<f64>,
    mut correct: impl FnMut(&mut X) -> Result<()>,
) -> Result<NewtonReport> {
    let mut norms = vec![residual_norm(x)?];
    for _ in 0..max_iter {
        if *norms.last().unwrap() <= tol {
            return Ok(NewtonReport { residual_norms: norms, converged: true });
        }
        correct(x)?;
        norms.push(residual_norm(x)?);
    }
    let converged = *norms.last().unwrap() <= tol;
    if !converged {
        return Err(Error::NoConvergence {
            context,
            iterations: max_iter,
            residual: *norms.last().unwrap(),
        });
    }
    Ok(NewtonReport { residual_norms: norms, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn lu_solves_real_system() {
        let a = dmatrix![2.0, 1.0; 1.0, 3.0];
        let lu = Lu::factor(a.clone(), "test").unwrap();
        let b = DVector::from_column_slice(&[5.0, 10.0]);
        let x = lu.solve_vec(&b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn lu_solves_complex_system_and_transpose() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(3.0, -2.0),
            ],
        );
        let lu = Lu::factor(a.clone(), "test").unwrap();
        let b = DVector::from_column_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let x = lu.solve_vec(&b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-14);

        let mut bt = DMatrix::from_column_slice(2, 1, b.as_slice());
        lu.solve_transpose_in_place(&mut bt).unwrap();
        let xt = DVector::from_column_slice(bt.as_slice());
        let rt = a.transpose() * &xt - &b;
        assert!(rt.norm() < 1e-14);
    }

    #[test]
    fn lu_reports_singularity() {
        let a = dmatrix![1.0, 2.0; 2.0, 4.0];
        match Lu::factor(a, "test") {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn rcond_tracks_conditioning() {
        let good = DMatrix::<f64>::identity(4, 4);
        let lu = Lu::factor(good, "test").unwrap();
        assert!((lu.rcond().unwrap() - 1.0).abs() < 1e-12);

        let mut bad = DMatrix::<f64>::identity(4, 4);
        bad[(3, 3)] = 1e-12;
        let lu = Lu::factor(bad, "test").unwrap();
        let rc = lu.rcond().unwrap();
        assert!(rc < 1e-11 && rc > 1e-14, "rcond = {rc}");
    }

    #[test]
    fn eig_real_reproduces_known_spectrum() {
        // Companion-style matrix with eigenvalues 1, 2, 3.
        let a = DMatrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (vals, vecs) = eig_real(&a).unwrap();
        let mut mods: Vec<f64> = vals.iter().map(|z| z.norm()).collect();
        mods.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((mods[0] - 1.0).abs() < 1e-10);
        assert!((mods[1] - 2.0).abs() < 1e-10);
        assert!((mods[2] - 3.0).abs() < 1e-10);
        // Residual check A v = lambda v for every column.
        let ac = a.map(|x| Complex64::new(x, 0.0));
        for j in 0..3 {
            let v = vecs.column(j);
            let r = &ac * v - v * vals[j];
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn eig_real_handles_complex_pairs() {
        // Rotation-like block: eigenvalues cos t +- i sin t.
        let t: f64 = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let (vals, vecs) = eig_real(&a).unwrap();
        let ac = a.map(|x| Complex64::new(x, 0.0));
        for j in 0..2 {
            assert!((vals[j].norm() - 1.0).abs() < 1e-12);
            let v = vecs.column(j);
            let r = &ac * v - v * vals[j];
            assert!(r.norm() < 1e-12, "pair residual {}", r.norm());
        }
    }

    #[test]
    fn gemm_matches_nalgebra() {
        let a = DMatrix::from_fn(4, 3, |i, j| Complex64::new((i + 2 * j) as f64, j as f64 - 1.0));
        let b = DMatrix::from_fn(3, 5, |i, j| Complex64::new(i as f64 - j as f64, 0.5 * j as f64));
        let mut c = DMatrix::from_element(4, 5, Complex64::new(1.0, 1.0));
        let expect = &a * &b + &c * Complex64::new(0.5, 0.0);
        gemm(
            Complex64::new(1.0, 0.0),
            a.as_view(),
            b.as_view(),
            Complex64::new(0.5, 0.0),
            c.as_view_mut(),
        );
        assert!((&c - &expect).norm() < 1e-13);
    }

    #[test]
    fn gemm_on_views_respects_strides() {
        let a = DMatrix::from_fn(6, 6, |i, j| (i * 7 + j) as f64);
        let b = DMatrix::from_fn(6, 6, |i, j| (i as f64) - 0.3 * (j as f64));
        let mut c = DMatrix::zeros(6, 6);
        let expect = a.view((1, 2), (3, 2)) * b.view((0, 1), (2, 4));
        gemm(
            1.0,
            a.view((1, 2), (3, 2)),
            b.view((0, 1), (2, 4)),
            0.0,
            c.view_mut((2, 1), (3, 4)),
        );
        assert!((c.view((2, 1), (3, 4)) - expect).norm() < 1e-13);
    }

    #[test]
    fn lstsq_solves_overdetermined_system() {
        let a = DMatrix::from_fn(5, 2, |i, j| Complex64::new((i + 1) as f64 * (j + 1) as f64, i as f64));
        let x_true = DVector::from_column_slice(&[Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)]);
        let b = &a * &x_true;
        let x = lstsq_complex(&a, &b).unwrap();
        assert!((&x - &x_true).norm() < 1e-12);
    }

    #[test]
    fn lstsq_handles_rank_deficiency() {
        // Second column is a multiple of the first; minimum-norm solution exists.
        let c1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)];
        let a = DMatrix::from_fn(3, 2, |i, j| c1[i] * Complex64::new((j + 1) as f64, 0.0));
        let b = DVector::from_column_slice(&c1);
        let x = lstsq_complex(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn newton_driver_converges_quadratically() {
        // Scalar model problem: solve x^2 = 2 by explicit Newton updates.
        let mut x = 3.0f64;
        let report = newton(
            &mut x,
            1e-14,
            25,
            "sqrt2",
            |x| Ok((x * x - 2.0).abs()),
            |x| {
                *x -= (*x * *x - 2.0) / (2.0 * *x);
                Ok(())
            },
        )
        .unwrap();
        assert!(report.converged);
        assert!((x - 2.0f64.sqrt()).abs() < 1e-12);
        assert!(report.has_quadratic_tail(1e-14));
    }
}
