//! One-sided Chebyshev coefficient sequences and their operator algebra.
//!
//! A sequence `a = (a_0, a_1, ...)` represents the function
//!
//! ```text
//! a(t) = a_0 + 2 * sum_{k >= 1} a_k T_k(t),     t in [-1, 1],
//! ```
//!
//! the convention under which the product of two functions corresponds to the
//! discrete convolution
//!
//! ```text
//! (a * b)_k = sum_{j in Z} a_{|k - j|} b_{|j|}.
//! ```
//!
//! Everything downstream (time stepping, periodic orbits, manifolds) is
//! phrased in terms of four linear operations on these sequences — pointwise
//! product (convolution), evaluation at the right endpoint `t = 1`,
//! antiderivative from the left endpoint `t = -1`, and truncation — plus the
//! weighted norm `|a_0| + 2 sum |a_k| nu^k` that makes the sequence space a
//! Banach algebra under convolution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Scalar types the sequence algebra is generic over: `f64` for the real
/// stages of the pipeline, `Complex64` for spectra and manifolds.
pub trait Scalar:
    nalgebra::ComplexField<RealField = f64> + Copy + std::fmt::Debug + 'static
{
}
impl<T> Scalar for T where
    T: nalgebra::ComplexField<RealField = f64> + Copy + std::fmt::Debug + 'static
{
}

/// A finitely supported one-sided Chebyshev coefficient sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeq<T: Scalar> {
    coeffs: Vec<T>,
}

pub type RSeq = ChebSeq<f64>;
pub type CSeq = ChebSeq<Complex64>;

impl<T: Scalar> ChebSeq<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self { coeffs: vec![T::zero(); len] }
    }

    /// The constant function `value`.
    pub fn constant(value: T) -> Self {
        Self { coeffs: vec![value] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    /// Coefficient at index `k`, zero beyond the stored support.
    pub fn c(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, k: usize, value: T) {
        if k >= self.coeffs.len() {
            self.coeffs.resize(k + 1, T::zero());
        }
        self.coeffs[k] = value;
    }

    /// Truncation `pi^N`: keep coefficients `0..=degree`, padding with zeros
    /// if the sequence is shorter.
    pub fn truncated(&self, degree: usize) -> Self {
        let mut coeffs = vec![T::zero(); degree + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = self.c(k);
        }
        Self { coeffs }
    }

    /// Discrete convolution — the coefficient sequence of the pointwise
    /// product `a(t) b(t)`.
    pub fn conv(&self, other: &Self) -> Self {
        if self.is_empty() || other.is_empty() {
            return Self::zeros(0);
        }
        let la = self.len();
        let lb = other.len();
        let mut out = vec![T::zero(); la + lb - 1];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            // j ranges over Z; b_{|j|} vanishes for |j| >= lb.
            for j in -(lb as isize - 1)..=(lb as isize - 1) {
                let ai = (k as isize - j).unsigned_abs();
                if ai < la {
                    acc += self.coeffs[ai] * other.coeffs[j.unsigned_abs()];
                }
            }
            *o = acc;
        }
        Self { coeffs: out }
    }

    /// Clenshaw evaluation at `t in [-1, 1]`.
    pub fn eval(&self, t: f64) -> T {
        if self.is_empty() {
            return T::zero();
        }
        // Classic-convention coefficients: c_0 = a_0, c_k = 2 a_k.
        let x = T::from_real(t);
        let two_x = x * T::from_real(2.0);
        let n = self.len() - 1;
        let mut b1 = T::zero();
        let mut b2 = T::zero();
        for k in (1..=n).rev() {
            let ck = self.coeffs[k] * T::from_real(2.0);
            let b = ck + two_x * b1 - b2;
            b2 = b1;
            b1 = b;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// The evaluation functional at the right endpoint `t = 1`:
    /// `a_0 + 2 sum_{k>=1} a_k`. (All `T_k(1) = 1`.)
    pub fn eval_right(&self) -> T {
        let mut acc = self.c(0);
        for k in 1..self.len() {
            acc += self.coeffs[k] * T::from_real(2.0);
        }
        acc
    }

    /// Antiderivative from the left endpoint: the coefficient sequence of
    /// `t |-> int_{-1}^t a`. Output has one more coefficient than the input.
    ///
    /// ```text
    /// (Sa)_0 = a_0 - a_1 / 2 - 2 sum_{k >= 2} (-1)^k a_k / (k^2 - 1)
    /// (Sa)_k = (a_{k-1} - a_{k+1}) / (2k),   k >= 1.
    /// ```
    pub fn integrate_from_left(&self) -> Self {
        let la = self.len();
        if la == 0 {
            return Self::zeros(1);
        }
        let mut out = vec![T::zero(); la + 1];
        let mut head = self.c(0) - self.c(1) * T::from_real(0.5);
        for k in 2..la {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            head -= self.coeffs[k] * T::from_real(2.0 * sign / ((k * k - 1) as f64));
        }
        out[0] = head;
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            *o = (self.c(k - 1) - self.c(k + 1)) * T::from_real(0.5 / k as f64);
        }
        Self { coeffs: out }
    }

    /// Coefficient sequence of the derivative `a'(t)`.
    pub fn diff(&self) -> Self {
        if self.len() <= 1 {
            return Self::zeros(1);
        }
        let n = self.len() - 1;
        // Work in the classic convention, then convert back.
        let mut d = vec![T::zero(); n + 2];
        for k in (1..=n).rev() {
            let ck = self.coeffs[k] * T::from_real(2.0);
            d[k - 1] = d[k + 1] + ck * T::from_real(2.0 * k as f64);
        }
        d[0] *= T::from_real(0.5);
        d.truncate(n);
        let mut out = d;
        for c in out.iter_mut().skip(1) {
            *c *= T::from_real(0.5);
        }
        Self { coeffs: out }
    }

    /// Weighted `l1` norm `|a_0| + 2 sum_{k >= 1} |a_k| nu^k`.
    pub fn norm_l1nu(&self, nu: f64) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let f = if k == 0 { 1.0 } else { 2.0 * w };
            acc += f * c.modulus();
            w *= nu;
        }
        acc
    }

    pub fn norm_l1(&self) -> f64 {
        self.norm_l1nu(1.0)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// `self + other`, at the longer of the two lengths.
    pub fn add(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let mut coeffs = Vec::with_capacity(len);
        for k in 0..len {
            coeffs.push(self.c(k) + other.c(k));
        }
        Self { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let mut coeffs = Vec::with_capacity(len);
        for k in 0..len {
            coeffs.push(self.c(k) - other.c(k));
        }
        Self { coeffs }
    }

    /// Map real sequences into complex ones (and generally change scalar).
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(T) -> U) -> ChebSeq<U> {
        ChebSeq::new(self.coeffs.iter().map(|&c| f(c)).collect())
    }
}

impl RSeq {
    pub fn to_complex(&self) -> CSeq {
        self.map_scalar(|x| Complex64::new(x, 0.0))
    }
}

impl CSeq {
    /// Real part, for casts after operations that are real in exact arithmetic.
    pub fn real_part(&self) -> RSeq {
        self.map_scalar(|z| z.re)
    }

    /// Largest imaginary-part modulus — a diagnostic for those casts.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Chebyshev interpolation of `f` on `[-1, 1]` at the `degree + 1`
/// Chebyshev–Lobatto points, returned in the one-sided convention. Exact
/// (to roundoff) for polynomials of degree `<= degree`.
pub fn interpolate<T: Scalar>(f: impl Fn(f64) -> T, degree: usize) -> ChebSeq<T> {
    let n = degree;
    if n == 0 {
        return ChebSeq::new(vec![f(1.0)]);
    }
    let samples: Vec<T> = (0..=n)
        .map(|i| f((std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    // Discrete cosine transform (type I), classic convention, then halve the
    // interior coefficients for the one-sided convention.
    let mut coeffs = vec![T::zero(); n + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = (samples[0] + samples[n] * T::from_real(if k % 2 == 0 { 1.0 } else { -1.0 }))
            * T::from_real(0.5);
        for (i, s) in samples.iter().enumerate().take(n).skip(1) {
            acc += *s * T::from_real((std::f64::consts::PI * (i * k) as f64 / n as f64).cos());
        }
        let scale = if k == 0 || k == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
        *c = acc * T::from_real(scale);
    }
    for c in coeffs.iter_mut().skip(1) {
        *c *= T::from_real(0.5);
    }
    ChebSeq::new(coeffs)
}

/// Matrix of the evaluation-at-right-endpoint operator `E` on truncations:
/// row 0 is `(1, 2, 2, ...)`, all other rows zero. Shape `rows x cols`.
pub fn e_matrix<T: Scalar>(rows: usize, cols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    if rows > 0 {
        for j in 0..cols {
            m[(0, j)] = T::from_real(if j == 0 { 1.0 } else { 2.0 });
        }
    }
    m
}

/// Matrix of the antiderivative operator `S` between truncations: entry
/// `(i, j)` is the `i`-th output coefficient of `S` applied to the `j`-th
/// unit sequence. Shape `rows x cols`.
pub fn s_matrix<T: Scalar>(rows: usize, cols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        // Row 0.
        if rows > 0 {
            m[(0, j)] = T::from_real(match j {
                0 => 1.0,
                1 => -0.5,
                _ => {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    -2.0 * sign / ((j * j - 1) as f64)
                }
            });
        }
        // (Sa)_k = (a_{k-1} - a_{k+1}) / (2k): unit j contributes to rows j+1 and j-1.
        if j + 1 < rows {
            m[(j + 1, j)] += T::from_real(0.5 / (j + 1) as f64);
        }
        if j >= 1 && j - 1 < rows && j - 1 >= 1 {
            m[(j - 1, j)] += T::from_real(-0.5 / (j - 1) as f64);
        }
    }
    m
}

/// Matrix of the multiplication operator `b |-> a * b` between truncations
/// (Toeplitz-plus-Hankel): column 0 is `a_k`, column `j >= 1` is
/// `a_{|k-j|} + a_{k+j}`. Shape `rows x cols`; uses the full support of `a`.
pub fn mult_matrix<T: Scalar>(a: &ChebSeq<T>, rows: usize, cols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    for k in 0..rows {
        for j in 0..cols {
            m[(k, j)] = if j == 0 {
                a.c(k)
            } else {
                a.c((k as isize - j as isize).unsigned_abs()) + a.c(k + j)
            };
        }
    }
    m
}

/// An `n`-component vector of Chebyshev sequences — one history segment of an
/// `R^n`-valued function.
#[derive(Debug, Clone, PartialEq)]
pub struct VecChebSeq<T: Scalar> {
    pub components: Vec<ChebSeq<T>>,
}

pub type RVecSeq = VecChebSeq<f64>;
pub type CVecSeq = VecChebSeq<Complex64>;

impl<T: Scalar> VecChebSeq<T> {
    pub fn new(components: Vec<ChebSeq<T>>) -> Self {
        Self { components }
    }

    pub fn zeros(n: usize, len: usize) -> Self {
        Self { components: vec![ChebSeq::zeros(len); n] }
    }

    /// Number of components `n`.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, t: f64) -> Vec<T> {
        self.components.iter().map(|c| c.eval(t)).collect()
    }

    pub fn eval_right(&self) -> Vec<T> {
        self.components.iter().map(|c| c.eval_right()).collect()
    }

    pub fn truncated(&self, degree: usize) -> Self {
        Self { components: self.components.iter().map(|c| c.truncated(degree)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    /// Max over components of the weighted `l1` norm.
    pub fn norm_l1nu(&self, nu: f64) -> f64 {
        self.components.iter().map(|c| c.norm_l1nu(nu)).fold(0.0, f64::max)
    }

    pub fn norm_l1(&self) -> f64 {
        self.norm_l1nu(1.0)
    }

    /// Flatten to a component-blocked coefficient vector of length
    /// `n * (degree + 1)`: component 0's coefficients first, then component 1's.
    pub fn flatten(&self, degree: usize) -> DVector<T> {
        let n = self.dim();
        let len = degree + 1;
        DVector::from_fn(n * len, |i, _| self.components[i / len].c(i % len))
    }

    pub fn from_flat(v: &[T], n: usize, degree: usize) -> Self {
        let len = degree + 1;
        assert_eq!(v.len(), n * len, "flat vector length");
        Self {
            components: (0..n)
                .map(|c| ChebSeq::new(v[c * len..(c + 1) * len].to_vec()))
                .collect(),
        }
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> VecChebSeq<U> {
        VecChebSeq::new(self.components.iter().map(|c| c.map_scalar(f)).collect())
    }
}

impl RVecSeq {
    pub fn to_complex(&self) -> CVecSeq {
        self.map_scalar(|x| Complex64::new(x, 0.0))
    }
}

impl CVecSeq {
    pub fn real_part(&self) -> RVecSeq {
        self.map_scalar(|z| z.re)
    }

    pub fn max_imag(&self) -> f64 {
        self.components.iter().map(|c| c.max_imag()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(v: &[f64]) -> RSeq {
        ChebSeq::new(v.to_vec())
    }

    /// Composite Simpson on [-1, t] — the independent quadrature oracle for S.
    fn simpson(f: impl Fn(f64) -> f64, t: f64, panels: usize) -> f64 {
        let a = -1.0;
        let h = (t - a) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let x0 = a + i as f64 * h;
            acc += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
        }
        acc
    }

    #[test]
    fn conv_t1_squared_is_frozen_value() {
        // T_1 is represented by (0, 1/2); T_1^2 = (1 + T_2)/2 = (1/2, 0, 1/4).
        let t1 = rs(&[0.0, 0.5]);
        let sq = t1.conv(&t1);
        assert_eq!(sq.coeffs(), &[0.5, 0.0, 0.25]);
    }

    #[test]
    fn conv_matches_pointwise_product() {
        let a = rs(&[0.3, -0.21, 0.07, 0.011, -0.002]);
        let b = rs(&[1.1, 0.4, -0.13, 0.02]);
        let ab = a.conv(&b);
        for i in 0..25 {
            let t = (std::f64::consts::PI * i as f64 / 24.0).cos();
            let lhs = ab.eval(t);
            let rhs = a.eval(t) * b.eval(t);
            assert!((lhs - rhs).abs() < 1e-13, "t={t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn integrate_constant_and_t1_frozen_values() {
        assert_eq!(rs(&[1.0]).integrate_from_left().coeffs(), &[1.0, 0.5]);
        // a(t) = t, int_{-1}^t = (t^2 - 1)/2 = -1/4 + 2 * (1/8) T_2.
        assert_eq!(rs(&[0.0, 0.5]).integrate_from_left().coeffs(), &[-0.25, 0.0, 0.125]);
    }

    #[test]
    fn integrate_matches_quadrature() {
        let a = rs(&[0.2, -0.4, 0.31, -0.05, 0.007, 0.001]);
        let sa = a.integrate_from_left();
        // S fixes the value 0 at t = -1 by construction.
        assert!(sa.eval(-1.0).abs() < 1e-14);
        for i in 0..=10 {
            let t = -1.0 + 0.2 * i as f64;
            let exact = simpson(|x| a.eval(x), t, 800);
            assert!((sa.eval(t) - exact).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn eval_right_sums_with_weight_two() {
        assert_eq!(rs(&[1.0, 1.0]).eval_right(), 3.0);
        let a = rs(&[0.2, -0.1, 0.05]);
        assert!((a.eval_right() - a.eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn diff_inverts_integration() {
        let a = rs(&[0.3, -0.2, 0.1, 0.04, -0.01]);
        let round = a.integrate_from_left().diff();
        for k in 0..a.len() {
            assert!((round.c(k) - a.c(k)).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn diff_matches_known_derivative() {
        // d/dt of t^2 = (1/2, 0, 1/4) is 2t = (0, 1).
        let sq = rs(&[0.5, 0.0, 0.25]);
        let d = sq.diff();
        assert!((d.c(0) - 0.0).abs() < 1e-15);
        assert!((d.c(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norm_is_weighted_l1() {
        let a = rs(&[1.0, -2.0, 0.5]);
        assert!((a.norm_l1() - (1.0 + 4.0 + 1.0)).abs() < 1e-15);
        let nu = 1.1;
        assert!((a.norm_l1nu(nu) - (1.0 + 4.0 * nu + 1.0 * nu * nu)).abs() < 1e-15);
    }

    #[test]
    fn norm_is_submultiplicative() {
        let a = rs(&[0.5, 0.2, -0.3, 0.08]);
        let b = rs(&[-0.1, 0.7, 0.02]);
        for nu in [1.0, 1.05, 1.3] {
            let lhs = a.conv(&b).norm_l1nu(nu);
            let rhs = a.norm_l1nu(nu) * b.norm_l1nu(nu);
            assert!(lhs <= rhs + 1e-13, "nu={nu}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn mult_matrix_matches_conv() {
        let a = rs(&[0.4, -0.2, 0.1, 0.05]);
        let b = rs(&[1.0, 0.3, -0.6]);
        let m = mult_matrix(&a, 6, 3);
        let via_matrix = &m * DVector::from_column_slice(b.coeffs());
        let direct = a.conv(&b);
        for k in 0..6 {
            assert!((via_matrix[k] - direct.c(k)).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn operator_matrices_match_functional_forms() {
        let a = rs(&[0.3, -0.7, 0.2, 0.09, -0.01]);
        let v = DVector::from_column_slice(a.coeffs());

        let e = e_matrix::<f64>(5, 5);
        let ev = &e * &v;
        assert!((ev[0] - a.eval_right()).abs() < 1e-14);
        assert!(ev.iter().skip(1).all(|&x| x == 0.0));

        let s = s_matrix::<f64>(6, 5);
        let sv = &s * &v;
        let direct = a.integrate_from_left();
        for k in 0..6 {
            assert!((sv[k] - direct.c(k)).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn truncated_s_matrix_drops_high_rows_only() {
        // pi^N S pi^N: the square matrix agrees with the rectangular one on
        // its common rows.
        let full = s_matrix::<f64>(6, 5);
        let square = s_matrix::<f64>(5, 5);
        assert_eq!(full.view((0, 0), (5, 5)), square.view((0, 0), (5, 5)));
    }

    #[test]
    fn interpolate_recovers_polynomials_exactly() {
        let p = rs(&[0.2, -0.5, 0.125, 0.03]);
        // Oversampled and at the exact degree (the latter exercises the
        // endpoint coefficient's DCT weight).
        for degree in [6, 3] {
            let q = interpolate(|t| p.eval(t), degree);
            for k in 0..=degree {
                assert!((q.c(k) - p.c(k)).abs() < 1e-13, "deg={degree} k={k}: {} vs {}", q.c(k), p.c(k));
            }
        }
    }

    #[test]
    fn interpolate_converges_on_smooth_functions() {
        let q = interpolate(|t| (2.0 * t).sin() + 0.5 * t.cos(), 24);
        for i in 0..=20 {
            let t = -1.0 + 0.1 * i as f64;
            let exact = (2.0 * t).sin() + 0.5 * t.cos();
            assert!((q.eval(t) - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn flatten_roundtrip_is_identity() {
        let v = VecChebSeq::new(vec![rs(&[1.0, 2.0]), rs(&[3.0, 4.0, 5.0])]);
        let flat = v.flatten(3);
        assert_eq!(flat.len(), 8);
        assert_eq!(flat[0], 1.0);
        assert_eq!(flat[4], 3.0);
        assert_eq!(flat[6], 5.0);
        let back = VecChebSeq::from_flat(flat.as_slice(), 2, 3);
        assert_eq!(back.components[0].c(1), 2.0);
        assert_eq!(back.components[1].c(2), 5.0);
        assert_eq!(back.components[1].c(3), 0.0);
    }

    #[test]
    fn complex_sequences_evaluate_consistently() {
        let a = ChebSeq::new(vec![
            Complex64::new(0.2, 0.1),
            Complex64::new(-0.3, 0.05),
            Complex64::new(0.04, -0.02),
        ]);
        let re = a.map_scalar(|z| z.re);
        let im = a.map_scalar(|z| z.im);
        let t = 0.37;
        let z = a.eval(t);
        assert!((z.re - re.eval(t)).abs() < 1e-14);
        assert!((z.im - im.eval(t)).abs() < 1e-14);
    }
}
