//! Order-2 truncated Taylor arithmetic over the real chart
//! `(x1, x2, x3, x4) = (Re p, Im p, Re z², Im z²)`.
//!
//! Coefficients are complex, chart variables are real. Seeds come from exact
//! Wirtinger jets, so everything built on top (metric, frame, Christoffel
//! symbols) carries exact first and second derivatives up to roundoff.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::expsum::{CoordPoint, ExpSumError, ExpSumPotential, VJet, WirtingerIndex};

/// Divisions and roots of values smaller than this are rejected.
pub const SINGULAR_FLOOR: f64 = 1e-140;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("singular input: |value| = {magnitude:e} below {SINGULAR_FLOOR:e}")]
    Singular { magnitude: f64 },
    #[error("jet of order {have} cannot seed derivative of order {needed}")]
    Order { needed: u32, have: u32 },
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
}

/// Point of the real chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealChartPoint(pub [f64; 4]);

impl RealChartPoint {
    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Self([x1, x2, x3, x4])
    }

    pub fn coord(&self) -> CoordPoint {
        let [x1, x2, x3, x4] = self.0;
        CoordPoint::new(Complex64::new(x1, x2), Complex64::new(x3, x4))
    }

    pub fn shifted(&self, i: usize, h: f64) -> Self {
        let mut x = self.0;
        x[i] += h;
        Self(x)
    }
}

impl From<CoordPoint> for RealChartPoint {
    fn from(c: CoordPoint) -> Self {
        Self([c.p.re, c.p.im, c.z2.re, c.z2.im])
    }
}

/// Position of `(i, j)`, `i ≤ j`, in the packed upper triangle.
pub const fn hess_slot(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * 4 - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Value, gradient and Hessian of a complex function of the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorScalar {
    pub value: Complex64,
    pub grad: [Complex64; 4],
    pub hess: [Complex64; 10],
}

impl TaylorScalar {
    pub fn constant(value: Complex64) -> Self {
        Self { value, grad: [ZERO; 4], hess: [ZERO; 10] }
    }

    pub fn real(value: f64) -> Self {
        Self::constant(Complex64::new(value, 0.0))
    }

    pub fn h(&self, i: usize, j: usize) -> Complex64 {
        self.hess[hess_slot(i, j)]
    }

    /// Hessian expanded to a full symmetric matrix.
    pub fn hess_matrix(&self) -> [[Complex64; 4]; 4] {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.h(i, j);
            }
        }
        m
    }

    /// Applies a scalar function given its value and first two derivatives at `self.value`.
    fn compose(&self, f: Complex64, df: Complex64, d2f: Complex64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..4 {
            out.grad[i] = df * self.grad[i];
            for j in i..4 {
                out.hess[hess_slot(i, j)] =
                    d2f * self.grad[i] * self.grad[j] + df * self.h(i, j);
            }
        }
        out
    }

    fn guard(&self) -> Result<(), JetError> {
        let magnitude = self.value.norm();
        if !(magnitude >= SINGULAR_FLOOR) {
            return Err(JetError::Singular { magnitude });
        }
        Ok(())
    }

    pub fn conj(&self) -> Self {
        Self {
            value: self.value.conj(),
            grad: self.grad.map(|g| g.conj()),
            hess: self.hess.map(|h| h.conj()),
        }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            value: self.value * k,
            grad: self.grad.map(|g| g * k),
            hess: self.hess.map(|h| h * k),
        }
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        self.guard()?;
        let r = self.value.inv();
        Ok(self.compose(r, -r * r, 2.0 * r * r * r))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        Ok(*self * other.recip()?)
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        self.guard()?;
        let s = self.value.sqrt();
        Ok(self.compose(s, 0.5 / s, -0.25 / (s * self.value)))
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        self.guard()?;
        let r = self.value.inv();
        Ok(self.compose(self.value.ln(), r, -r * r))
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    /// `(∂_p, ∂_p̄, ∂_2, ∂_2̄)` of the function, from its chart gradient.
    pub fn wirtinger_grad(&self) -> [Complex64; 4] {
        let g = self.grad;
        [
            0.5 * (g[0] - I * g[1]),
            0.5 * (g[0] + I * g[1]),
            0.5 * (g[2] - I * g[3]),
            0.5 * (g[2] + I * g[3]),
        ]
    }

    /// Drops the Hessian and re-seeds a first-order jet of `∂_i f`.
    /// Its Hessian slots are unknown and set to zero.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::constant(self.grad[i]);
        for j in 0..4 {
            out.grad[j] = self.h(i, j);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        std::iter::once(self.value)
            .chain(self.grad)
            .chain(self.hess)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Add for TaylorScalar {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        out.value += o.value;
        for i in 0..4 {
            out.grad[i] += o.grad[i];
        }
        for k in 0..10 {
            out.hess[k] += o.hess[k];
        }
        out
    }
}

impl Sub for TaylorScalar {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for TaylorScalar {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

impl Mul for TaylorScalar {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.value * o.value);
        for i in 0..4 {
            out.grad[i] = self.grad[i] * o.value + self.value * o.grad[i];
            for j in i..4 {
                out.hess[hess_slot(i, j)] = self.h(i, j) * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.h(i, j);
            }
        }
        out
    }
}

/// Arithmetic shared by plain complex values and Taylor data, so that metric
/// and frame formulas are written once.
pub trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: Complex64) -> Self;
    fn value(&self) -> Complex64;
    fn conj(&self) -> Self;
    fn scale(&self, k: Complex64) -> Self;
    fn checked_div(&self, other: &Self) -> Result<Self, JetError>;
    fn checked_sqrt(&self) -> Result<Self, JetError>;

    fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }
}

impl Field for Complex64 {
    fn constant(c: Complex64) -> Self {
        c
    }
    fn value(&self) -> Complex64 {
        *self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn scale(&self, k: Complex64) -> Self {
        self * k
    }
    fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        let magnitude = other.norm();
        if !(magnitude >= SINGULAR_FLOOR) {
            return Err(JetError::Singular { magnitude });
        }
        Ok(self / other)
    }
    fn checked_sqrt(&self) -> Result<Self, JetError> {
        let magnitude = self.norm();
        if !(magnitude >= SINGULAR_FLOOR) {
            return Err(JetError::Singular { magnitude });
        }
        Ok(self.sqrt())
    }
}

impl Field for TaylorScalar {
    fn constant(c: Complex64) -> Self {
        TaylorScalar::constant(c)
    }
    fn value(&self) -> Complex64 {
        self.value
    }
    fn conj(&self) -> Self {
        TaylorScalar::conj(self)
    }
    fn scale(&self, k: Complex64) -> Self {
        TaylorScalar::scale(self, k)
    }
    fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        TaylorScalar::checked_div(self, other)
    }
    fn checked_sqrt(&self) -> Result<Self, JetError> {
        self.sqrt()
    }
}

/// The chart coordinate `x_i` (0-based) as a Taylor scalar.
pub fn lift_coordinate(i: usize, at: &RealChartPoint) -> TaylorScalar {
    let mut t = TaylorScalar::real(at.0[i]);
    t.grad[i] = ONE;
    t
}

/// Wirtinger weights of `∂_{x_i}`: `∂_{x1} = ∂_p + ∂_p̄`, `∂_{x2} = i(∂_p - ∂_p̄)`, etc.
const CHAIN: [[Complex64; 4]; 4] = [
    [ONE, ONE, ZERO, ZERO],
    [I, Complex64::new(0.0, -1.0), ZERO, ZERO],
    [ZERO, ZERO, ONE, ONE],
    [ZERO, ZERO, I, Complex64::new(0.0, -1.0)],
];

/// Taylor data of `∂^index f` read off a Wirtinger jet of `f` of order ≥ |index| + 2.
pub fn lift_from_jet(jet: &VJet, index: WirtingerIndex) -> Result<TaylorScalar, JetError> {
    let needed = index.order() + 2;
    if jet.order() < needed {
        return Err(JetError::Order { needed, have: jet.order() });
    }
    let at = |extra: &[usize]| {
        let mut k = index.to_array();
        for &d in extra {
            k[d] += 1;
        }
        jet.at(WirtingerIndex::from_array(k))
    };
    let mut t = TaylorScalar::constant(at(&[]));
    for i in 0..4 {
        t.grad[i] = (0..4).map(|a| CHAIN[i][a] * at(&[a])).sum();
        for j in i..4 {
            let mut s = ZERO;
            for a in 0..4 {
                for b in 0..4 {
                    let w = CHAIN[i][a] * CHAIN[j][b];
                    if w != ZERO {
                        s += w * at(&[a, b]);
                    }
                }
            }
            t.hess[hess_slot(i, j)] = s;
        }
    }
    Ok(t)
}

pub fn lift_derivative_of_v(
    potential: &ExpSumPotential,
    index: WirtingerIndex,
    at: &RealChartPoint,
) -> Result<TaylorScalar, JetError> {
    let jet = potential.jet(&at.coord(), index.order() + 2)?;
    lift_from_jet(&jet, index)
}

pub fn log_jet(a: &TaylorScalar) -> Result<TaylorScalar, JetError> {
    a.ln()
}

/// Central-difference gradient and Hessian.
#[derive(Debug, Clone, Copy)]
pub struct FdEstimate<T> {
    pub grad: [T; 4],
    pub hess: [[T; 4]; 4],
}

/// Independent finite-difference oracle, `O(step²)`.
pub fn fd_oracle<T, F>(field: F, at: &RealChartPoint, step: f64) -> FdEstimate<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: Fn(&RealChartPoint) -> T,
{
    let h = step;
    let f0 = field(at);
    let grad = std::array::from_fn(|i| {
        (field(&at.shifted(i, h)) - field(&at.shifted(i, -h))) * (0.5 / h)
    });
    let mut hess = [[f0; 4]; 4];
    for i in 0..4 {
        hess[i][i] = (field(&at.shifted(i, h)) - f0 * 2.0 + field(&at.shifted(i, -h))) * (1.0 / (h * h));
        for j in i + 1..4 {
            let pp = field(&at.shifted(i, h).shifted(j, h));
            let pm = field(&at.shifted(i, h).shifted(j, -h));
            let mp = field(&at.shifted(i, -h).shifted(j, h));
            let mm = field(&at.shifted(i, -h).shifted(j, -h));
            let d = (pp - pm - mp + mm) * (0.25 / (h * h));
            hess[i][j] = d;
            hess[j][i] = d;
        }
    }
    FdEstimate { grad, hess }
}
