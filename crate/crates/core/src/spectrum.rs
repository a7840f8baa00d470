//! Discrete-spectrum solutions of the constant-coefficient linear system for
//! `v = exp(-ψ)`, and the one-term family that lies on the singular locus.

use num_complex::Complex64;
use thiserror::Error;

use crate::expsum::{ExpSumError, ExpSumPotential, ExpTerm};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("mode {index}: |alpha| = {modulus} < 1 (imaginary s unsupported)")]
    AlphaTooSmall { index: usize, modulus: f64 },
    #[error("mode {index}: non-finite parameter")]
    NonFinite { index: usize },
    #[error("nu must be finite")]
    NonFiniteNu,
    #[error("spectrum has no modes")]
    Empty,
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
}

/// `s = sqrt(1 - 1/|alpha|²)`.
pub fn mode_s(alpha: Complex64) -> Result<f64, SpectrumError> {
    let m2 = alpha.norm_sqr();
    // |alpha| = 1 written as e.g. 0.6 + 0.8i may round just below one.
    if !(m2 >= 1.0 - 4.0 * f64::EPSILON) {
        return Err(SpectrumError::AlphaTooSmall { index: 0, modulus: m2.sqrt() });
    }
    Ok((1.0 - 1.0 / m2).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub alpha: Complex64,
    pub f: Complex64,
    pub g: Complex64,
}

impl Mode {
    pub fn new(alpha: Complex64, f: Complex64, g: Complex64) -> Self {
        Self { alpha, f, g }
    }

    pub fn s(&self) -> Result<f64, SpectrumError> {
        mode_s(self.alpha)
    }

    /// Exponent 4-vector of the F-branch term.
    pub fn f_branch_exponents(&self, nu: f64) -> Result<[Complex64; 4], SpectrumError> {
        let (a, s) = (self.alpha, self.s()?);
        let ac = a.conj();
        Ok([
            a * (s + 1.0),
            ac * (s - 1.0),
            -I * (a * a * (s + 1.0).powi(2) + 1.0) + nu * a * (s + 1.0),
            I * (ac * ac * (s - 1.0).powi(2) + 1.0) + nu * ac * (s - 1.0),
        ])
    }

    /// Exponent 4-vector of the G-branch term.
    pub fn g_branch_exponents(&self, nu: f64) -> Result<[Complex64; 4], SpectrumError> {
        let (a, s) = (self.alpha, self.s()?);
        let ac = a.conj();
        Ok([
            a * (1.0 - s),
            -ac * (1.0 + s),
            -I * (a * a * (s - 1.0).powi(2) + 1.0) + nu * a * (1.0 - s),
            I * (ac * ac * (s + 1.0).powi(2) + 1.0) - nu * ac * (1.0 + s),
        ])
    }
}

/// Real drift `nu` plus a nonempty list of modes with distinct `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumData {
    nu: f64,
    modes: Vec<Mode>,
}

impl SpectrumData {
    /// Validates every mode and merges those with identical `alpha`.
    pub fn new(nu: f64, modes: impl IntoIterator<Item = Mode>) -> Result<Self, SpectrumError> {
        if !nu.is_finite() {
            return Err(SpectrumError::NonFiniteNu);
        }
        let mut merged: Vec<Mode> = Vec::new();
        for (index, m) in modes.into_iter().enumerate() {
            if !(m.alpha.is_finite() && m.f.is_finite() && m.g.is_finite()) {
                return Err(SpectrumError::NonFinite { index });
            }
            mode_s(m.alpha).map_err(|_| SpectrumError::AlphaTooSmall {
                index,
                modulus: m.alpha.norm(),
            })?;
            match merged.iter_mut().find(|x| x.alpha == m.alpha) {
                Some(x) => {
                    x.f += m.f;
                    x.g += m.g;
                }
                None => merged.push(m),
            }
        }
        if merged.is_empty() {
            return Err(SpectrumError::Empty);
        }
        Ok(Self { nu, modes: merged })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }
}

/// Rewrites the Re-structure of the discrete-spectrum solution as conjugate
/// pairs of complex exponentials: `Re(w) = (w + w̄)/2`.
pub fn expand(spec: &SpectrumData) -> Result<ExpSumPotential, SpectrumError> {
    let nu = spec.nu();
    let mut terms = Vec::with_capacity(4 * spec.modes().len());
    for mode in spec.modes() {
        for (amp, e) in [
            (mode.f, mode.f_branch_exponents(nu)?),
            (mode.g, mode.g_branch_exponents(nu)?),
        ] {
            let t = ExpTerm::new(0.5 * amp, e[0], e[1], e[2], e[3]);
            terms.push(t);
            terms.push(t.partner());
        }
    }
    Ok(ExpSumPotential::new(terms)?)
}

/// Residuals of the six constant-coefficient equations for a single exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermResiduals {
    pub e1: Complex64,
    pub e2: Complex64,
    pub e3: Complex64,
    pub e4: Complex64,
    pub e2c: Complex64,
    pub e3c: Complex64,
}

impl TermResiduals {
    pub fn all(&self) -> [Complex64; 6] {
        [self.e1, self.e2, self.e3, self.e4, self.e2c, self.e3c]
    }

    pub fn max_abs(&self) -> f64 {
        self.all().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Substitutes `exp(lp p + lq p̄ + l2 z² + lw z̄²)` into the linear system.
/// Distinct exponentials are linearly independent, so a sum solves the
/// system iff every term does.
pub fn term_residuals(term: &ExpTerm, nu: f64) -> TermResiduals {
    let ExpTerm { lp, lq, l2, lw, .. } = *term;
    TermResiduals {
        e1: lp * lq + 1.0,
        e2: lp * lp + 1.0 - I * (l2 - nu * lp),
        e3: lp * lw + nu - I * (lp - lq),
        e4: l2 * lw + nu * nu - I * (l2 - lw + nu * (lp - lq)),
        e2c: lq * lq + 1.0 + I * (lw - nu * lq),
        e3c: lq * l2 + nu + I * (lq - lp),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub pass: bool,
    pub worst_term: Option<usize>,
    pub worst_residual: f64,
}

pub fn is_solution(potential: &ExpSumPotential, nu: f64, tol: f64) -> SolutionReport {
    let mut worst_term = None;
    let mut worst_residual = 0.0;
    for (i, t) in potential.terms().iter().enumerate() {
        let r = term_residuals(t, nu).max_abs();
        if worst_term.is_none() || r > worst_residual {
            worst_term = Some(i);
            worst_residual = r;
        }
    }
    SolutionReport { pass: worst_residual <= tol, worst_term, worst_residual }
}

/// Parameters of the one-term solutions that also satisfy the first-order
/// singularity condition.
///
/// Derived quantities, not stored: `λ = -α/ᾱ`, `μ = ν - 2iαs`,
/// `ξ = p + μz²`, `η = λξ + ξ̄`; along the family `a/c = λ` and `b/c = μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularFamily {
    pub alpha: Complex64,
    pub f: Complex64,
    pub nu: f64,
}

impl SingularFamily {
    pub fn lambda(&self) -> Complex64 {
        -self.alpha / self.alpha.conj()
    }

    pub fn mu(&self) -> Result<Complex64, SpectrumError> {
        Ok(self.nu - 2.0 * I * self.alpha * mode_s(self.alpha)?)
    }
}

/// `v = Re{F exp[α(s+1)p + ᾱ(s-1)p̄ - i(α²(s+1)² + 1 + iνα(s+1))z²
///              + i(ᾱ²(s-1)² + 1 - iνᾱ(s-1))z̄²]}`.
pub fn singular_family(fam: &SingularFamily) -> Result<ExpSumPotential, SpectrumError> {
    let (a, nu) = (fam.alpha, fam.nu);
    let s = mode_s(a)?;
    let ac = a.conj();
    let t = ExpTerm::new(
        0.5 * fam.f,
        a * (s + 1.0),
        ac * (s - 1.0),
        -I * (a * a * (s + 1.0) * (s + 1.0) + 1.0 + I * nu * a * (s + 1.0)),
        I * (ac * ac * (s - 1.0) * (s - 1.0) + 1.0 - I * nu * ac * (s - 1.0)),
    );
    Ok(ExpSumPotential::new([t, t.partner()])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mode_s_values() {
        assert_eq!(mode_s(c(1.0, 0.0)).unwrap(), 0.0);
        assert!((mode_s(c(2.0, 0.0)).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-16);
        assert!((mode_s(c(2.0, 0.0)).unwrap() - 0.8660254037844386).abs() < 1e-16);
        assert!(matches!(mode_s(c(0.5, 0.0)), Err(SpectrumError::AlphaTooSmall { .. })));
        assert!(mode_s(c(0.6, 0.8)).is_ok());
    }

    #[test]
    fn expand_alpha_one() {
        let spec = SpectrumData::new(0.0, [Mode::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))]).unwrap();
        let pot = expand(&spec).unwrap();
        assert_eq!(pot.len(), 2);
        let t = pot.terms()[0];
        assert_eq!(t.amplitude, c(0.5, 0.0));
        assert_eq!(t.exponents(), [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, -2.0), c(0.0, 2.0)]);
        assert_eq!(pot.terms()[1], t.partner());
    }

    #[test]
    fn expand_alpha_one_merges_branches() {
        let spec = SpectrumData::new(0.0, [Mode::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0))]).unwrap();
        let pot = expand(&spec).unwrap();
        assert_eq!(pot.len(), 2);
        assert_eq!(pot.terms()[0].amplitude, c(1.0, 0.0));
    }

    #[test]
    fn expand_alpha_two_f_branch() {
        let spec = SpectrumData::new(0.0, [Mode::new(c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))]).unwrap();
        let t = expand(&spec).unwrap().terms()[0];
        assert!((t.lp.re - (2.0 + 3f64.sqrt())).abs() < 1e-15);
        assert!((t.lq.re + 0.2679491924311228).abs() < 1e-15);
        assert!((t.lp * t.lq + 1.0).norm() < 1e-15);
    }

    #[test]
    fn residuals_vanish_for_alpha_one_term() {
        let t = ExpTerm::new(c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, -2.0), c(0.0, 2.0));
        assert_eq!(term_residuals(&t, 0.0).max_abs(), 0.0);
        let bad = ExpTerm::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(term_residuals(&bad, 0.0).e1, c(2.0, 0.0));
    }

    #[test]
    fn perturbed_exponent_is_identified() {
        let spec = SpectrumData::new(
            0.5,
            [
                Mode::new(c(1.2, 0.3), c(1.0, 0.0), c(0.5, 0.5)),
                Mode::new(c(0.0, 2.0), c(0.3, -0.2), c(1.0, 0.0)),
            ],
        )
        .unwrap();
        let pot = expand(&spec).unwrap();
        assert!(is_solution(&pot, 0.5, 1e-10).pass);
        let mut terms = pot.terms().to_vec();
        terms[3].lp += 1e-3;
        let bad = ExpSumPotential::new(terms).unwrap();
        let r = is_solution(&bad, 0.5, 1e-10);
        assert!(!r.pass);
        assert_eq!(r.worst_term, Some(3));
    }

    #[test]
    fn empty_modes_rejected() {
        assert_eq!(SpectrumData::new(0.0, []), Err(SpectrumError::Empty));
    }

    #[test]
    fn small_alpha_names_mode() {
        let err = SpectrumData::new(
            0.0,
            [
                Mode::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
                Mode::new(c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, SpectrumError::AlphaTooSmall { index: 1, .. }));
    }

    #[test]
    fn duplicate_alpha_merges() {
        let spec = SpectrumData::new(
            0.0,
            [
                Mode::new(c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
                Mode::new(c(2.0, 0.0), c(0.5, 0.0), c(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(spec.modes(), &[Mode::new(c(2.0, 0.0), c(1.5, 0.0), c(1.0, 0.0))]);
    }

    #[test]
    fn singular_family_matches_one_mode_expansion() {
        for (alpha, f, nu) in [
            (c(1.0, 0.0), c(1.0, 0.0), 0.0),
            (c(1.3, -0.9), c(0.2, 0.7), -1.25),
            (c(0.0, 3.0), c(-1.0, 0.4), 2.0),
        ] {
            let fam = SingularFamily { alpha, f, nu };
            let a = singular_family(&fam).unwrap();
            let b = expand(&SpectrumData::new(nu, [Mode::new(alpha, f, c(0.0, 0.0))]).unwrap()).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.terms().iter().zip(b.terms()) {
                for (u, w) in x.exponents().iter().zip(y.exponents().iter()) {
                    assert!((u - w).norm() <= 1e-14 * u.norm().max(1.0));
                }
                assert!((x.amplitude - y.amplitude).norm() <= 1e-14);
            }
            assert!(is_solution(&a, nu, 1e-10).pass);
        }
    }
}
