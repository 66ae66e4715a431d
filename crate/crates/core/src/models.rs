//! Polynomial delay differential equation right-hand sides.
//!
//! A model describes `u'(t) = f(u(t), u(t - tau))` with `f : R^n x R^n -> R^n`
//! polynomial in both arguments. Each component is a sum of monomials
//! `c * prod_i x_i^{p_i} * prod_i y_i^{q_i}`, where `x` is the current state
//! and `y` the delayed state. Keeping `f` as explicit monomial lists lets the
//! same definition be evaluated over scalars, Chebyshev sequences, or
//! Taylor–Chebyshev series, and differentiated symbolically for Jacobians.
//!
//! Two concrete models ship here:
//!
//! * [`ikeda`] — the cubic Ikeda equation `u' = u(t-tau) - u(t-tau)^3`.
//! * [`mackey_glass`] — a polynomial embedding of the Mackey–Glass equation
//!   `w' = -a w + b w_tau / (1 + w_tau^rho)`. The scalar equation is not
//!   polynomial; adding the auxiliary coordinates `v1 = w/(1+w^rho)`,
//!   `v2 = w^(rho-2)`, `v3 = 1/w` closes it into a 4-component polynomial
//!   system whose solutions project back onto Mackey–Glass solutions as long
//!   as `w` stays positive. The embedding introduces a 3-parameter unfolding
//!   (one compensating scalar per auxiliary coordinate) that downstream
//!   zero-finding problems carry as extra unknowns `eta`.

use crate::chebseq::{ChebSeq, Scalar, VecChebSeq};
use crate::{Error, Result};

/// A commutative algebra the polynomial evaluation is generic over.
pub trait Algebra: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
}

impl Algebra for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

impl Algebra for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        num_complex::Complex64::new(1.0, 0.0)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

impl<T: Scalar> Algebra for ChebSeq<T> {
    fn zero() -> Self {
        ChebSeq::zeros(1)
    }
    fn one() -> Self {
        ChebSeq::constant(T::one())
    }
    fn add(&self, other: &Self) -> Self {
        ChebSeq::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        self.conv(other)
    }
    fn scale(&self, s: f64) -> Self {
        ChebSeq::scale(self, T::from_real(s))
    }
}

/// One monomial `coeff * prod x_i^xp_i * prod y_i^yp_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub x_powers: Vec<u32>,
    pub y_powers: Vec<u32>,
}

impl Monomial {
    fn eval<A: Algebra>(&self, x: &[A], y: &[A]) -> A {
        let mut acc = A::one().scale(self.coeff);
        for (i, &p) in self.x_powers.iter().enumerate() {
            for _ in 0..p {
                acc = acc.mul(&x[i]);
            }
        }
        for (i, &p) in self.y_powers.iter().enumerate() {
            for _ in 0..p {
                acc = acc.mul(&y[i]);
            }
        }
        acc
    }

    /// Partial derivative with respect to `x_j` (`arg = 0`) or `y_j` (`arg = 1`).
    fn diff(&self, arg: usize, j: usize) -> Option<Monomial> {
        let powers = if arg == 0 { &self.x_powers } else { &self.y_powers };
        let p = powers[j];
        if p == 0 {
            return None;
        }
        let mut out = self.clone();
        let powers = if arg == 0 { &mut out.x_powers } else { &mut out.y_powers };
        powers[j] = p - 1;
        out.coeff *= p as f64;
        Some(out)
    }
}

/// A polynomial in `(x, y)` as a monomial list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

impl Poly {
    pub fn eval<A: Algebra>(&self, x: &[A], y: &[A]) -> A {
        let mut acc = A::zero();
        for t in &self.terms {
            acc = acc.add(&t.eval(x, y));
        }
        acc
    }

    pub fn diff(&self, arg: usize, j: usize) -> Poly {
        Poly { terms: self.terms.iter().filter_map(|t| t.diff(arg, j)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree (max over monomials of combined x/y degree).
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.x_powers.iter().sum::<u32>() + t.y_powers.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }
}

/// How a model's physical scalar state maps into its (possibly embedded)
/// polynomial state.
#[derive(Debug, Clone, PartialEq)]
pub enum Lift {
    /// The model is already polynomial in its physical variables.
    Identity,
    /// Mackey–Glass embedding `w -> (w, w/(1+w^rho), w^(rho-2), 1/w)`,
    /// defined only for `w` above a positivity floor.
    MackeyGlass { rho: f64, floor: f64 },
}

/// A polynomial DDE model, with symbolic Jacobians precomputed.
#[derive(Debug, Clone)]
pub struct DdeModel {
    pub name: String,
    /// State dimension `n` of the polynomial system.
    pub dim: usize,
    /// Number of unfolding parameters carried by elementary embeddings
    /// (`n - 1` for embedded scalar models, `0` otherwise).
    pub unfold_dim: usize,
    pub components: Vec<Poly>,
    pub lift: Lift,
    d1: Vec<Vec<Poly>>,
    d2: Vec<Vec<Poly>>,
}

impl DdeModel {
    pub fn new(name: &str, components: Vec<Poly>, unfold_dim: usize, lift: Lift) -> Self {
        let n = components.len();
        let d1 = (0..n)
            .map(|i| (0..n).map(|j| components[i].diff(0, j)).collect())
            .collect();
        let d2 = (0..n)
            .map(|i| (0..n).map(|j| components[i].diff(1, j)).collect())
            .collect();
        Self { name: name.to_string(), dim: n, unfold_dim, components, lift, d1, d2 }
    }

    /// `f(x, y)` over any algebra.
    pub fn eval<A: Algebra>(&self, x: &[A], y: &[A]) -> Vec<A> {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        self.components.iter().map(|p| p.eval(x, y)).collect()
    }

    /// Entry `(i, j)` of the Jacobian with respect to the current state.
    pub fn d1(&self, i: usize, j: usize) -> &Poly {
        &self.d1[i][j]
    }

    /// Entry `(i, j)` of the Jacobian with respect to the delayed state.
    pub fn d2(&self, i: usize, j: usize) -> &Poly {
        &self.d2[i][j]
    }

    /// Largest total degree across components.
    pub fn degree(&self) -> u32 {
        self.components.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// Map a physical scalar value into the model's state space.
    pub fn lift_value(&self, w: f64) -> Result<Vec<f64>> {
        match &self.lift {
            Lift::Identity => Ok(vec![w]),
            Lift::MackeyGlass { rho, floor } => {
                if w <= *floor {
                    return Err(Error::PositivityViolation { value: w, floor: *floor });
                }
                Ok(vec![w, w / (1.0 + w.powf(*rho)), w.powf(*rho - 2.0), 1.0 / w])
            }
        }
    }

    /// Lift a sampled scalar history `(t_i, w_i)` into state-space samples.
    pub fn lift_history(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        values.iter().map(|&w| self.lift_value(w)).collect()
    }

    /// Whether states must remain positive in their first component for the
    /// model (and its lift) to be meaningful.
    pub fn requires_positivity(&self) -> bool {
        matches!(self.lift, Lift::MackeyGlass { .. })
    }
}

/// The compensating-parameter injection for elementary embeddings: an
/// `n`-component sequence vector that is zero in the first component and has
/// `eta_i` as the constant (index 0) Chebyshev coefficient of component
/// `1 + i`.
pub fn inject_iota<T: Scalar>(eta: &[T], dim: usize) -> VecChebSeq<T> {
    assert_eq!(eta.len() + 1, dim, "unfolding dimension must be dim - 1");
    let mut components = vec![ChebSeq::zeros(1); dim];
    for (i, &e) in eta.iter().enumerate() {
        components[1 + i] = ChebSeq::constant(e);
    }
    VecChebSeq::new(components)
}

fn mono(coeff: f64, x_powers: &[u32], y_powers: &[u32]) -> Monomial {
    Monomial { coeff, x_powers: x_powers.to_vec(), y_powers: y_powers.to_vec() }
}

/// The cubic Ikeda equation `u'(t) = u(t - tau) - u(t - tau)^3`.
pub fn ikeda() -> DdeModel {
    let f = Poly { terms: vec![mono(1.0, &[0], &[1]), mono(-1.0, &[0], &[3])] };
    DdeModel::new("ikeda", vec![f], 0, Lift::Identity)
}

/// Default positivity floor for the Mackey–Glass lift.
pub const MACKEY_GLASS_FLOOR: f64 = 1e-6;

/// Polynomial embedding of the Mackey–Glass equation
/// `w' = -a w + b w_tau / (1 + w_tau^rho)`.
///
/// State `(x1, x2, x3, x4) = (w, v1, v2, v3)` with `v1 = w/(1+w^rho)`,
/// `v2 = w^(rho-2)`, `v3 = 1/w`. Writing `g = -a x1 + b y2` for the (now
/// polynomial) physical right-hand side, the chain rule closes the system:
///
/// ```text
/// x1' = g
/// x2' = x2 (x4 - rho x2 x3) g
/// x3' = (rho - 2) x3 x4 g
/// x4' = -x4^2 g
/// ```
pub fn mackey_glass(a: f64, b: f64, rho: f64) -> DdeModel {
    // g = -a x1 + b y2, distributed over each component's prefactor.
    let g_terms = |x_extra: &[u32]| -> Vec<Monomial> {
        let mut with_x1 = x_extra.to_vec();
        with_x1[0] += 1;
        vec![mono(-a, &with_x1, &[0, 0, 0, 0]), mono(b, x_extra, &[0, 1, 0, 0])]
    };

    let f1 = Poly { terms: g_terms(&[0, 0, 0, 0]) };

    // x2 x4 g - rho x2^2 x3 g
    let mut f2_terms = g_terms(&[0, 1, 0, 1]);
    f2_terms.extend(g_terms(&[0, 2, 1, 0]).into_iter().map(|mut m| {
        m.coeff *= -rho;
        m
    }));
    let f2 = Poly { terms: f2_terms };

    let f3 = Poly {
        terms: g_terms(&[0, 0, 1, 1])
            .into_iter()
            .map(|mut m| {
                m.coeff *= rho - 2.0;
                m
            })
            .collect(),
    };

    let f4 = Poly {
        terms: g_terms(&[0, 0, 0, 2])
            .into_iter()
            .map(|mut m| {
                m.coeff *= -1.0;
                m
            })
            .collect(),
    };

    DdeModel::new(
        "mackey-glass",
        vec![f1, f2, f3, f4],
        3,
        Lift::MackeyGlass { rho, floor: MACKEY_GLASS_FLOOR },
    )
}

/// The scalar Mackey–Glass right-hand side (used by the reference integrator
/// and by tests as the ground truth the embedding must reproduce).
pub fn mackey_glass_scalar_rhs(a: f64, b: f64, rho: f64) -> impl Fn(f64, f64) -> f64 {
    move |w: f64, w_tau: f64| -a * w + b * w_tau / (1.0 + w_tau.powf(rho))
}
