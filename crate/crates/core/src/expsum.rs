//! Real exponential-sum potentials in two complex variables.
//!
//! A potential is a finite sum of terms `K exp(lp p + lq p̄ + l2 z² + lw z̄²)`.
//! All Wirtinger derivatives are exact: differentiating a term only multiplies
//! its amplitude by a monomial in the exponents.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Largest admissible magnitude of the real part of a term exponent.
pub const EXPONENT_LIMIT: f64 = 700.0;
/// Terms whose amplitude falls below this are dropped at construction.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;
/// Relative tolerance on the imaginary residue of a real evaluation.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;
/// Highest jet order served by [`ExpSumPotential::jet`].
pub const MAX_JET_ORDER: u32 = 6;

const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpSumError {
    #[error("exponent of term {term} has real part {real_part:e}, beyond ±{EXPONENT_LIMIT}")]
    Range { term: usize, real_part: f64 },
    #[error("imaginary residue {residue:e} exceeds tolerance (scale {scale:e}); potential is not conjugation-closed")]
    ImaginaryResidue { residue: f64, scale: f64 },
    #[error("requested jet order {requested} exceeds cap {MAX_JET_ORDER}")]
    OrderCap { requested: u32 },
    #[error("term {term} has a non-finite field")]
    NonFinite { term: usize },
}

/// A point in the Legendre chart. Conjugates are implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordPoint {
    pub p: Complex64,
    pub z2: Complex64,
}

impl CoordPoint {
    pub fn new(p: Complex64, z2: Complex64) -> Self {
        Self { p, z2 }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.z2.is_finite()
    }
}

/// `amplitude · exp(lp·p + lq·p̄ + l2·z² + lw·z̄²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: Complex64,
    pub lp: Complex64,
    pub lq: Complex64,
    pub l2: Complex64,
    pub lw: Complex64,
}

impl ExpTerm {
    pub fn new(
        amplitude: Complex64,
        lp: Complex64,
        lq: Complex64,
        l2: Complex64,
        lw: Complex64,
    ) -> Self {
        Self { amplitude, lp, lq, l2, lw }
    }

    /// Exponents in direction order (p, p̄, z², z̄²).
    pub fn exponents(&self) -> [Complex64; 4] {
        [self.lp, self.lq, self.l2, self.lw]
    }

    /// The term that makes `self + partner` real.
    pub fn partner(&self) -> ExpTerm {
        ExpTerm {
            amplitude: self.amplitude.conj(),
            lp: self.lq.conj(),
            lq: self.lp.conj(),
            l2: self.lw.conj(),
            lw: self.l2.conj(),
        }
    }

    pub fn exponent_at(&self, at: &CoordPoint) -> Complex64 {
        self.lp * at.p + self.lq * at.p.conj() + self.l2 * at.z2 + self.lw * at.z2.conj()
    }

    /// `lp^kp · lq^kq · l2^k2 · lw^kw`.
    pub fn monomial(&self, index: WirtingerIndex) -> Complex64 {
        self.lp.powu(index.kp)
            * self.lq.powu(index.kq)
            * self.l2.powu(index.k2)
            * self.lw.powu(index.kw)
    }

    pub fn is_finite(&self) -> bool {
        self.amplitude.is_finite() && self.exponents().iter().all(|e| e.is_finite())
    }

    /// Value of the term at a point, with the overflow guard applied.
    pub fn value_at(&self, at: &CoordPoint, term: usize) -> Result<Complex64, ExpSumError> {
        let x = self.exponent_at(at);
        if !(x.re.abs() <= EXPONENT_LIMIT) {
            return Err(ExpSumError::Range { term, real_part: x.re });
        }
        Ok(self.amplitude * x.exp())
    }

    fn same_exponents(&self, other: &ExpTerm) -> bool {
        self.exponents() == other.exponents()
    }

    fn approx_eq(&self, other: &ExpTerm) -> bool {
        let close = |a: Complex64, b: Complex64| (a - b).norm() <= PAIR_TOL * a.norm().max(b.norm()).max(1.0);
        close(self.amplitude, other.amplitude)
            && self
                .exponents()
                .iter()
                .zip(other.exponents().iter())
                .all(|(a, b)| close(*a, *b))
    }
}

impl fmt::Display for ExpTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={} lp={} lq={} l2={} lw={}",
            self.amplitude, self.lp, self.lq, self.l2, self.lw
        )
    }
}

/// Derivative counts in directions (p, p̄, z², z̄²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct WirtingerIndex {
    pub kp: u32,
    pub kq: u32,
    pub k2: u32,
    pub kw: u32,
}

impl WirtingerIndex {
    pub const ZERO: WirtingerIndex = WirtingerIndex { kp: 0, kq: 0, k2: 0, kw: 0 };

    pub const fn new(kp: u32, kq: u32, k2: u32, kw: u32) -> Self {
        Self { kp, kq, k2, kw }
    }

    /// Unit index along direction `d` (0 = p, 1 = p̄, 2 = z², 3 = z̄²).
    pub fn unit(d: usize) -> Self {
        let mut k = [0; 4];
        k[d] = 1;
        Self::from_array(k)
    }

    pub fn from_array(k: [u32; 4]) -> Self {
        Self::new(k[0], k[1], k[2], k[3])
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.kp, self.kq, self.k2, self.kw]
    }

    pub fn order(self) -> u32 {
        self.kp + self.kq + self.k2 + self.kw
    }

    /// The index of the conjugate derivative of a real function.
    pub fn conjugate(self) -> Self {
        Self::new(self.kq, self.kp, self.kw, self.k2)
    }

    pub fn plus(self, other: WirtingerIndex) -> Self {
        Self::new(
            self.kp + other.kp,
            self.kq + other.kq,
            self.k2 + other.k2,
            self.kw + other.kw,
        )
    }

    /// All indices of total order ≤ `order`, graded then lexicographic.
    pub fn all_up_to(order: u32) -> Vec<WirtingerIndex> {
        let mut out = Vec::new();
        for total in 0..=order {
            for kp in (0..=total).rev() {
                for kq in (0..=total - kp).rev() {
                    for k2 in (0..=total - kp - kq).rev() {
                        out.push(WirtingerIndex::new(kp, kq, k2, total - kp - kq - k2));
                    }
                }
            }
        }
        out
    }
}

/// Table of Wirtinger derivatives of a real function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct VJet {
    point: CoordPoint,
    order: u32,
    table: Vec<Complex64>,
}

impl VJet {
    fn slot(order: u32, index: WirtingerIndex) -> usize {
        let n = (order + 1) as usize;
        let [a, b, c, d] = index.to_array().map(|k| k as usize);
        ((a * n + b) * n + c) * n + d
    }

    /// An all-zero jet, filled in through [`VJet::set`].
    pub fn zeros(point: CoordPoint, order: u32) -> Self {
        let n = (order + 1) as usize;
        Self { point, order, table: vec![Complex64::new(0.0, 0.0); n * n * n * n] }
    }

    pub fn point(&self) -> CoordPoint {
        self.point
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn get(&self, index: WirtingerIndex) -> Option<Complex64> {
        (index.order() <= self.order).then(|| self.table[Self::slot(self.order, index)])
    }

    /// Panicking accessor for indices known to be in range.
    pub fn at(&self, index: WirtingerIndex) -> Complex64 {
        self.get(index)
            .unwrap_or_else(|| panic!("index {index:?} beyond jet order {}", self.order))
    }

    pub fn set(&mut self, index: WirtingerIndex, value: Complex64) {
        assert!(index.order() <= self.order, "index {index:?} beyond jet order {}", self.order);
        let s = Self::slot(self.order, index);
        self.table[s] = value;
    }

    /// Real value at the zero index.
    pub fn value(&self) -> f64 {
        self.at(WirtingerIndex::ZERO).re
    }

    /// `(f, f_p, f_p̄, f_2, f_2̄)`.
    pub fn first(&self) -> [Complex64; 5] {
        [
            self.at(WirtingerIndex::ZERO),
            self.at(WirtingerIndex::unit(0)),
            self.at(WirtingerIndex::unit(1)),
            self.at(WirtingerIndex::unit(2)),
            self.at(WirtingerIndex::unit(3)),
        ]
    }

    /// Worst violation of `f[k] = conj(f[k̄])`, relative to the largest entry.
    pub fn reality_defect(&self) -> f64 {
        let scale = self.table.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        WirtingerIndex::all_up_to(self.order)
            .into_iter()
            .map(|k| (self.at(k) - self.at(k.conjugate()).conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Outcome of the conjugation-closure check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationReport {
    pub pass: bool,
    /// Indices of terms with no matching partner.
    pub unpaired: Vec<usize>,
}

/// Finite, canonicalized sum of [`ExpTerm`]s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSumPotential {
    terms: Vec<ExpTerm>,
}

impl ExpSumPotential {
    /// Merges terms with identical exponent vectors and drops negligible amplitudes.
    pub fn new(terms: impl IntoIterator<Item = ExpTerm>) -> Result<Self, ExpSumError> {
        let mut merged: Vec<ExpTerm> = Vec::new();
        for (i, t) in terms.into_iter().enumerate() {
            if !t.is_finite() {
                return Err(ExpSumError::NonFinite { term: i });
            }
            match merged.iter_mut().find(|m| m.same_exponents(&t)) {
                Some(m) => m.amplitude += t.amplitude,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.amplitude.norm() >= AMPLITUDE_FLOOR);
        Ok(Self { terms: merged })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of two potentials, re-canonicalized.
    pub fn merge(&self, other: &ExpSumPotential) -> ExpSumPotential {
        Self::new(self.terms.iter().chain(other.terms.iter()).copied())
            .expect("terms of valid potentials are finite")
    }

    /// Multiplies every amplitude by a real constant.
    pub fn scaled(&self, factor: f64) -> ExpSumPotential {
        Self::new(self.terms.iter().map(|t| ExpTerm { amplitude: t.amplitude * factor, ..*t }))
            .expect("finite scaling of finite terms")
    }

    fn term_values(&self, at: &CoordPoint) -> Result<Vec<Complex64>, ExpSumError> {
        self.terms.iter().enumerate().map(|(i, t)| t.value_at(at, i)).collect()
    }

    /// Real value of the potential.
    pub fn eval(&self, at: &CoordPoint) -> Result<f64, ExpSumError> {
        let values = self.term_values(at)?;
        let sum: Complex64 = values.iter().sum();
        let scale: f64 = values.iter().map(|z| z.norm()).sum();
        if sum.im.abs() > IMAGINARY_RESIDUE_TOL * scale {
            return Err(ExpSumError::ImaginaryResidue { residue: sum.im.abs(), scale });
        }
        Ok(sum.re)
    }

    /// Exact Wirtinger derivative `∂^index v`.
    pub fn derivative(&self, index: WirtingerIndex, at: &CoordPoint) -> Result<Complex64, ExpSumError> {
        let values = self.term_values(at)?;
        Ok(self.terms.iter().zip(values).map(|(t, e)| e * t.monomial(index)).sum())
    }

    /// All derivatives of total order ≤ `order` at `at`.
    pub fn jet(&self, at: &CoordPoint, order: u32) -> Result<VJet, ExpSumError> {
        if order > MAX_JET_ORDER {
            return Err(ExpSumError::OrderCap { requested: order });
        }
        let values = self.term_values(at)?;
        let mut jet = VJet::zeros(*at, order);
        let n = order as usize + 1;
        for (t, e) in self.terms.iter().zip(values) {
            // powers[d][k] = exponent_d^k
            let powers: Vec<Vec<Complex64>> = t
                .exponents()
                .iter()
                .map(|l| {
                    let mut row = Vec::with_capacity(n);
                    let mut acc = Complex64::new(1.0, 0.0);
                    for _ in 0..n {
                        row.push(acc);
                        acc *= l;
                    }
                    row
                })
                .collect();
            for k in WirtingerIndex::all_up_to(order) {
                let [a, b, c, d] = k.to_array().map(|x| x as usize);
                let s = VJet::slot(order, k);
                jet.table[s] += e * powers[0][a] * powers[1][b] * powers[2][c] * powers[3][d];
            }
        }
        // value entry of a real function is real; drop roundoff.
        jet.table[0].im = 0.0;
        Ok(jet)
    }

    /// Checks that every term has exactly one conjugate partner.
    pub fn conjugation_check(&self) -> ConjugationReport {
        let unpaired: Vec<usize> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let partner = t.partner();
                self.terms.iter().filter(|u| u.approx_eq(&partner)).count() != 1
            })
            .map(|(i, _)| i)
            .collect();
        ConjugationReport { pass: unpaired.is_empty(), unpaired }
    }
}
