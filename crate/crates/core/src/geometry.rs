//! Partner potentials, metric coefficients, the Legendre-transformed metric,
//! its Newman-Penrose coframe, the Kähler triple and the singularity
//! functionals, all assembled from Wirtinger jets of `v`.
//!
//! Formulas are written once over [`Field`], so the same code yields plain
//! values (`Complex64`) and exact chart Taylor data ([`TaylorScalar`]).

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::expsum::{CoordPoint, ExpSumError, ExpSumPotential, VJet, WirtingerIndex};
use crate::jets::{lift_from_jet, Field, JetError, RealChartPoint, TaylorScalar};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Points with `|c² - |a|²| < NEAR_LOCUS_GUARD · c²` are treated as on the singular locus.
pub const NEAR_LOCUS_GUARD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("outside positivity domain: v = {v:e}")]
    NonPositive { v: f64 },
    #[error("near singular locus: c^2 - |a|^2 = {locus:e} (c^2 = {c2:e})")]
    NearLocus { locus: f64, c2: f64 },
    #[error("outside signature domain: c^2 - |a|^2 = {locus:e} <= 0")]
    SignatureDomain { locus: f64 },
    #[error("zero denominator in partner coefficients")]
    SingularPartner,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
}

/// `(f, f_p, f_p̄, f_2, f_2̄)` of a real function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstDerivs<T> {
    pub f: T,
    pub p: T,
    pub q: T,
    pub z2: T,
    pub w: T,
}

impl FirstDerivs<Complex64> {
    pub fn from_jet(jet: &VJet) -> Self {
        let [f, p, q, z2, w] = jet.first();
        Self { f, p, q, z2, w }
    }

    pub fn new(f: Complex64, p: Complex64, q: Complex64, z2: Complex64, w: Complex64) -> Self {
        Self { f, p, q, z2, w }
    }
}

impl FirstDerivs<TaylorScalar> {
    /// Chart Taylor data of `f` and its first Wirtinger derivatives; the jet needs order ≥ 3.
    pub fn lift(jet: &VJet) -> Result<Self, JetError> {
        let l = |d: Option<usize>| {
            lift_from_jet(jet, d.map_or(WirtingerIndex::ZERO, WirtingerIndex::unit))
        };
        Ok(Self { f: l(None)?, p: l(Some(0))?, q: l(Some(1))?, z2: l(Some(2))?, w: l(Some(3))? })
    }

    pub fn values(&self) -> FirstDerivs<Complex64> {
        FirstDerivs {
            f: self.f.value,
            p: self.p.value,
            q: self.q.value,
            z2: self.z2.value,
            w: self.w.value,
        }
    }
}

/// First derivatives of the translational potential `φ = p + p̄ + ν(z² + z̄²)`;
/// all higher derivatives vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDerivs {
    pub p: f64,
    pub q: f64,
    pub z2: f64,
    pub w: f64,
}

pub fn phi_derivs(nu: f64) -> PhiDerivs {
    PhiDerivs { p: 1.0, q: 1.0, z2: nu, w: nu }
}

impl PhiDerivs {
    pub fn lift<T: Field>(&self) -> FirstDerivs<T> {
        FirstDerivs {
            f: T::real(0.0),
            p: T::real(self.p),
            q: T::real(self.q),
            z2: T::real(self.z2),
            w: T::real(self.w),
        }
    }
}

/// Wirtinger jet of `-ln f` from a jet of `f > 0`, by the Leibniz recursion
/// for the derivatives of `ln f`.
pub fn neg_log_jet(jet: &VJet) -> Result<VJet, GeometryError> {
    let v = jet.value();
    if !(v > 0.0) {
        return Err(GeometryError::NonPositive { v });
    }
    let order = jet.order();
    let mut w = VJet::zeros(jet.point(), order);
    w.set(WirtingerIndex::ZERO, Complex64::new(v.ln(), 0.0));
    for gamma in WirtingerIndex::all_up_to(order).into_iter().skip(1) {
        let g = gamma.to_array();
        let k = g.iter().position(|&x| x > 0).expect("nonzero index");
        let mut alpha = g;
        alpha[k] -= 1;
        let mut acc = jet.at(gamma);
        for beta in sub_indices(alpha) {
            if beta == [0; 4] {
                continue;
            }
            let mut rest = [0; 4];
            for d in 0..4 {
                rest[d] = alpha[d] - beta[d];
            }
            rest[k] += 1;
            acc -= multi_binomial(alpha, beta)
                * jet.at(WirtingerIndex::from_array(beta))
                * w.at(WirtingerIndex::from_array(rest));
        }
        w.set(gamma, acc / v);
    }
    let mut psi = VJet::zeros(jet.point(), order);
    for k in WirtingerIndex::all_up_to(order) {
        psi.set(k, -w.at(k));
    }
    Ok(psi)
}

fn sub_indices(alpha: [u32; 4]) -> impl Iterator<Item = [u32; 4]> {
    let [a, b, c, d] = alpha;
    (0..=a).flat_map(move |i| {
        (0..=b).flat_map(move |j| (0..=c).flat_map(move |k| (0..=d).map(move |l| [i, j, k, l])))
    })
}

fn multi_binomial(alpha: [u32; 4], beta: [u32; 4]) -> f64 {
    alpha
        .iter()
        .zip(beta.iter())
        .map(|(&n, &k)| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64))
        .product()
}

/// Wirtinger jet of `ψ = -ln v` up to `order`.
pub fn psi_jet(potential: &ExpSumPotential, at: &CoordPoint, order: u32) -> Result<VJet, GeometryError> {
    neg_log_jet(&potential.jet(at, order)?)
}

/// Coefficients of the solved second-order system `ψ_pp = Aψ_pp̄`,
/// `ψ_p2̄ = Cψ_pp̄`, `ψ_22̄ = Bψ_pp̄`.
///
/// `b` is the directly computed coefficient (real for valid data);
/// `b_identity` is `|A|² + |C|² - 1`, which it must equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerCoeffs<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub b_identity: T,
}

impl PartnerCoeffs<Complex64> {
    pub fn b_real(&self) -> f64 {
        self.b.re
    }

    pub fn b_identity_defect(&self) -> f64 {
        (self.b - self.b_identity).norm()
    }
}

/// Numerators of `A`, `C`, `B` and their common denominator `ψ_pp̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerParts<T> {
    pub num_a: T,
    pub num_c: T,
    pub num_b: T,
    pub den: T,
}

pub fn partner_parts<T: Field>(phi: &FirstDerivs<T>, psi: &FirstDerivs<T>) -> PartnerParts<T> {
    let i = |x: T| x.scale(I);
    PartnerParts {
        num_a: phi.p * phi.p + psi.p * psi.p + i(phi.p * psi.z2 - phi.z2 * psi.p),
        num_c: phi.p * phi.w + psi.p * psi.w + i(phi.q * psi.p - phi.p * psi.q),
        num_b: phi.z2 * phi.w
            + psi.z2 * psi.w
            + i(psi.p * phi.w - phi.p * psi.w + psi.z2 * phi.q - phi.z2 * psi.q),
        den: phi.p * phi.q + psi.p * psi.q,
    }
}

pub fn partner_coeffs<T: Field>(
    phi: &FirstDerivs<T>,
    psi: &FirstDerivs<T>,
) -> Result<PartnerCoeffs<T>, GeometryError> {
    let PartnerParts { num_a, num_c, num_b, den } = partner_parts(phi, psi);
    if den.value().norm() == 0.0 {
        return Err(GeometryError::SingularPartner);
    }
    let a = num_a.checked_div(&den)?;
    let c = num_c.checked_div(&den)?;
    let b = num_b.checked_div(&den)?;
    let b_identity = a * a.conj() + c * c.conj() - T::real(1.0);
    Ok(PartnerCoeffs { a, b, c, b_identity })
}

/// Numerators of the partner coefficients: `A = a/c`, `C = b̄/c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAbc<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

pub fn abc<T: Field>(v: &FirstDerivs<T>, nu: f64) -> MetricAbc<T> {
    let i = |x: T| x.scale(I);
    let nu_t = T::real(nu);
    let v2 = v.f * v.f;
    MetricAbc {
        a: v2 + v.p * v.p - i(v.f * (v.z2 - nu_t * v.p)),
        b: v.q * v.z2 + nu_t * v2 - i(v.f * (v.p - v.q)),
        c: v2 + v.p * v.q,
    }
}

impl<T: Field> MetricAbc<T> {
    /// `c² - |a|²`.
    pub fn locus(&self) -> T {
        self.c * self.c - self.a * self.a.conj()
    }
}

/// `c² - |a|²` with the `v⁴` terms cancelled analytically:
/// `-v²(v_p - v_p̄)² - v²|δ|² + iv(X - X̄)`, `δ = v_2 - νv_p`, `X = δ(v² + v_p̄²)`.
pub fn locus_of<T: Field>(v: &FirstDerivs<T>, nu: f64) -> T {
    let delta = v.z2 - T::real(nu) * v.p;
    let v2 = v.f * v.f;
    let dp = v.p - v.q;
    let x = delta * (v2 + v.q * v.q);
    -(v2 * dp * dp) - v2 * delta * delta.conj() + (v.f * (x - x.conj())).scale(I)
}

/// `c² - |a|²`; zero on the singular locus.
pub fn singular_locus_value(v: &FirstDerivs<Complex64>, nu: f64) -> f64 {
    locus_of(v, nu).re
}

/// First-order condition satisfied by `v` wherever the locus is reached identically.
pub fn singularity_residual(v: &FirstDerivs<Complex64>, nu: f64) -> f64 {
    let d = v.z2 - nu * v.p;
    let vv = v.f.re;
    let dp = v.p - v.q;
    (vv * (dp * dp + d.norm_sqr()) + 2.0 * (d * (v.f * v.f + v.q * v.q)).im).re
}

/// `ψ_pp ψ_p̄p̄ - ψ_pp̄²`; nonzero where the Legendre transformation exists.
pub fn legendre_existence_residual(psi: &VJet) -> Complex64 {
    let pp = psi.at(WirtingerIndex::new(2, 0, 0, 0));
    let qq = psi.at(WirtingerIndex::new(0, 2, 0, 0));
    let pq = psi.at(WirtingerIndex::new(1, 1, 0, 0));
    pp * qq - pq * pq
}

/// Wirtinger covector components `(ω_p, ω_p̄, ω_2, ω_2̄)` to chart components.
pub fn to_chart<T: Field>(w: [T; 4]) -> [T; 4] {
    [w[0] + w[1], (w[0] - w[1]).scale(I), w[2] + w[3], (w[2] - w[3]).scale(I)]
}

/// Metric components over the chart, from the metric coefficients.
///
/// The symmetric product in the displayed line element is `XY = X⊗Y + Y⊗X`,
/// which is the normalization under which the NP coframe reconstructs it.
pub fn metric_components<T: Field>(v: &FirstDerivs<T>, nu: f64) -> Result<[[T; 4]; 4], GeometryError> {
    let MetricAbc { a, b, c } = abc(v, nu);
    let zero = T::real(0.0);
    let one = T::real(1.0);
    let x = to_chart([c, zero, b, zero]);
    let xb = to_chart([zero, c.conj(), zero, b.conj()]);
    let z = to_chart([zero, zero, one, zero]);
    let zb = to_chart([zero, zero, zero, one]);
    let aa = a * a.conj();
    let d = locus_of(v, nu);
    let v2 = v.f * v.f;
    let k1 = T::real(2.0).checked_div(&(v2 * d))?;
    let kx = (c * c + aa).checked_div(&c.scale(Complex64::new(2.0, 0.0)))?;
    let kz = d.checked_div(&(v2 * c))?;
    let ab = a.conj();
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            k1 * (a * x[i] * x[j] + ab * xb[i] * xb[j] + kx * (x[i] * xb[j] + xb[i] * x[j]))
                + kz * (z[i] * zb[j] + zb[i] * z[j])
        })
    }))
}

/// Newman-Penrose coframe `{l, l̄, m, m̄}` in Wirtinger components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coframe<T> {
    pub l: [T; 4],
    pub m: [T; 4],
}

impl<T: Field> Coframe<T> {
    pub fn l_chart(&self) -> [T; 4] {
        to_chart(self.l)
    }

    pub fn m_chart(&self) -> [T; 4] {
        to_chart(self.m)
    }

    /// `l⊗l̄ + l̄⊗l + m⊗m̄ + m̄⊗m` over the chart.
    pub fn metric(&self) -> [[T; 4]; 4] {
        let (l, m) = (self.l_chart(), self.m_chart());
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                l[i] * l[j].conj() + l[i].conj() * l[j] + m[i] * m[j].conj() + m[i].conj() * m[j]
            })
        })
    }
}

pub fn coframe<T: Field>(v: &FirstDerivs<T>, nu: f64) -> Result<Coframe<T>, GeometryError> {
    let MetricAbc { a, b, c } = abc(v, nu);
    let d = locus_of(v, nu);
    if !(d.value().re > 0.0) {
        return Err(GeometryError::SignatureDomain { locus: d.value().re });
    }
    let zero = T::real(0.0);
    let norm_l = v.f * (c * d).checked_sqrt()?;
    let kl = T::real(1.0).checked_div(&norm_l)?;
    let ab = a.conj();
    let l = [c * c * kl, ab * c * kl, c * b * kl, ab * b.conj() * kl];
    let km = d.checked_sqrt()?.checked_div(&(v.f * c.checked_sqrt()?))?;
    Ok(Coframe { l, m: [zero, zero, km, zero] })
}

/// Real orthonormal coframe `ω¹..ω⁴` (rows, chart components) with
/// `g = Σ ω^a⊗ω^a`, `l = u(ω¹ + iω²)/√2` for a unit `u`, and `m = (ω³ + iω⁴)/√2`.
///
/// Near the singular locus `l` and `l̄` are almost parallel; rotating `l` by
/// the half phase of `a` separates its real and imaginary parts exactly,
/// with `c - |a|` taken as `(c² - |a|²)/(c + |a|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealCoframe<T> {
    pub omega: [[T; 4]; 4],
    pub phase: T,
}

pub fn real_coframe<T: Field>(v: &FirstDerivs<T>, nu: f64) -> Result<RealCoframe<T>, GeometryError> {
    let MetricAbc { a, b, c } = abc(v, nu);
    let d = locus_of(v, nu);
    if !(d.value().re > 0.0) {
        return Err(GeometryError::SignatureDomain { locus: d.value().re });
    }
    let zero = T::real(0.0);
    let root2 = Complex64::new(std::f64::consts::SQRT_2, 0.0);
    let x = to_chart([c, zero, b, zero]);
    let norm = v.f * (c * d).checked_sqrt()?;
    let (re_l, im_l, phase) = if a.value().norm() >= 0.5 * c.value().norm() {
        let mod_a = (a * a.conj()).checked_sqrt()?;
        let h = a.checked_div(&mod_a)?.checked_sqrt()?;
        let y = x.map(|xi| h * xi);
        let kr = (c + mod_a).checked_div(&norm)?;
        let ki = d.checked_div(&((c + mod_a) * norm))?;
        let re = y.map(|yi| (yi + yi.conj()).scale(Complex64::new(0.5, 0.0)) * kr);
        let im = y.map(|yi| (yi - yi.conj()).scale(Complex64::new(0.0, -0.5)) * ki);
        (re, im, h.conj())
    } else {
        let ab = a.conj();
        let kl = T::real(1.0).checked_div(&norm)?;
        let l = to_chart([c * c * kl, ab * c * kl, c * b * kl, ab * b.conj() * kl]);
        let re = l.map(|li| (li + li.conj()).scale(Complex64::new(0.5, 0.0)));
        let im = l.map(|li| (li - li.conj()).scale(Complex64::new(0.0, -0.5)));
        (re, im, T::real(1.0))
    };
    let km = d.checked_sqrt()?.checked_div(&(v.f * c.checked_sqrt()?))?;
    let omega = [
        re_l.map(|w| w.scale(root2)),
        im_l.map(|w| w.scale(root2)),
        [zero, zero, km.scale(root2), zero],
        [zero, zero, zero, km.scale(root2)],
    ];
    Ok(RealCoframe { omega, phase })
}

impl<T: Field> RealCoframe<T> {
    /// Kähler triple built from the real coframe, same forms as
    /// [`kahler_triple_components`] of the NP coframe.
    pub fn kahler_triple(&self) -> [[T; 6]; 3] {
        let w = &self.omega;
        let e = |i: usize, j: usize| wedge(&w[i], &w[j]);
        let (w12, w13, w14, w23, w24, w34) = (e(0, 1), e(0, 2), e(0, 3), e(1, 2), e(1, 3), e(2, 3));
        let half = Complex64::new(0.5, 0.0);
        let lm: [T; 6] = std::array::from_fn(|k| {
            self.phase * (w13[k] + w24[k] + (w23[k] - w14[k]).scale(I)).scale(half)
        });
        [
            std::array::from_fn(|k| w34[k] - w12[k]),
            lm.map(|z| (z + z.conj()).scale(half)),
            lm.map(|z| (z - z.conj()).scale(-0.5 * I)),
        ]
    }
}

/// Real 2-form over the chart, components `(12, 13, 14, 23, 24, 34)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoForm(pub [f64; 6]);

/// Chart index pairs `(i, j)`, `i < j`, in storage order.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn pair_slot(i: usize, j: usize) -> Option<(usize, f64)> {
    if i == j {
        return None;
    }
    let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    PAIRS.iter().position(|&p| p == (a, b)).map(|k| (k, sign))
}

impl TwoForm {
    pub fn from_matrix(m: &[[f64; 4]; 4]) -> Self {
        Self(PAIRS.map(|(i, j)| m[i][j]))
    }

    pub fn matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            m[i][j] = self.0[k];
            m[j][i] = -self.0[k];
        }
        m
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `½ α_ij β^ij` with indices raised by `ginv`.
    pub fn inner(&self, other: &TwoForm, ginv: &[[f64; 4]; 4]) -> f64 {
        let (a, b) = (self.matrix(), other.matrix());
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        s += a[i][j] * ginv[i][k] * ginv[j][l] * b[k][l];
                    }
                }
            }
        }
        0.5 * s
    }

    /// Coefficient of `dx¹∧dx²∧dx³∧dx⁴` in `self ∧ other`.
    pub fn wedge_top(&self, o: &TwoForm) -> f64 {
        let (a, b) = (self.0, o.0);
        a[0] * b[5] - a[1] * b[4] + a[2] * b[3] + a[3] * b[2] - a[4] * b[1] + a[5] * b[0]
    }

    pub fn add(&self, o: &TwoForm) -> TwoForm {
        TwoForm(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    pub fn sub(&self, o: &TwoForm) -> TwoForm {
        TwoForm(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

/// `α∧β` of complex covectors, packed like [`TwoForm`].
pub fn wedge<T: Field>(a: &[T; 4], b: &[T; 4]) -> [T; 6] {
    PAIRS.map(|(i, j)| a[i] * b[j] - a[j] * b[i])
}

/// `θ₀ = -i(l∧l̄ - m∧m̄)`, `θ₊ = ½(l∧m̄ + l̄∧m)`, `θ₋ = (1/2i)(l∧m̄ - l̄∧m)`
/// as complex-valued chart components whose imaginary parts vanish.
pub fn kahler_triple_components<T: Field>(frame: &Coframe<T>) -> [[T; 6]; 3] {
    let l = frame.l_chart();
    let m = frame.m_chart();
    let lb = l.map(|x| x.conj());
    let mb = m.map(|x| x.conj());
    let llb = wedge(&l, &lb);
    let mmb = wedge(&m, &mb);
    let lmb = wedge(&l, &mb);
    let lbm = wedge(&lb, &m);
    let half = Complex64::new(0.5, 0.0);
    [
        std::array::from_fn(|k| (llb[k] - mmb[k]).scale(-I)),
        std::array::from_fn(|k| (lmb[k] + lbm[k]).scale(half)),
        std::array::from_fn(|k| (lmb[k] - lbm[k]).scale(-0.5 * I)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerTriple {
    pub forms: [TwoForm; 3],
    /// Largest imaginary part relative to the largest component.
    pub imag_defect: f64,
}

pub fn kahler_triple(frame: &Coframe<Complex64>) -> KahlerTriple {
    let comps = kahler_triple_components(frame);
    let scale = comps.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = comps.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
    KahlerTriple {
        forms: comps.map(|c| TwoForm(c.map(|z| z.re))),
        imag_defect: if scale > 0.0 { imag / scale } else { 0.0 },
    }
}

/// Real symmetric 4×4 metric over the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealMetric4(pub [[f64; 4]; 4]);

impl RealMetric4 {
    pub fn from_complex(g: &[[Complex64; 4]; 4]) -> Self {
        Self(g.map(|row| row.map(|z| z.re)))
    }

    fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.0[i][j])
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut e: Vec<f64> = SymmetricEigen::new(self.matrix()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2], e[3]]
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    pub fn inverse(&self) -> Option<[[f64; 4]; 4]> {
        let inv = self.matrix().try_inverse()?;
        Some(std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.matrix().cholesky().is_some()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Geometric data at one chart point, with the domain guards applied.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub at: RealChartPoint,
    pub nu: f64,
    /// Wirtinger jet of `v`, order 3.
    pub jet: VJet,
    pub v: FirstDerivs<Complex64>,
    pub v_taylor: FirstDerivs<TaylorScalar>,
    pub abc: MetricAbc<Complex64>,
    /// `c² - |a|²`.
    pub locus: f64,
}

impl LocalGeometry {
    /// Requires `v > 0` and `|c² - |a|²| ≥ guard · c²`.
    pub fn new(
        potential: &ExpSumPotential,
        nu: f64,
        at: &RealChartPoint,
        guard: f64,
    ) -> Result<Self, GeometryError> {
        let jet = potential.jet(&at.coord(), 3)?;
        let value = jet.value();
        if !(value > 0.0) {
            return Err(GeometryError::NonPositive { v: value });
        }
        let v = FirstDerivs::from_jet(&jet);
        let abc_v = abc(&v, nu);
        let locus = singular_locus_value(&v, nu);
        let c2 = abc_v.c.re * abc_v.c.re;
        if !(locus.abs() >= guard * c2) {
            return Err(GeometryError::NearLocus { locus, c2 });
        }
        let v_taylor = FirstDerivs::lift(&jet)?;
        Ok(Self { at: *at, nu, jet, v, v_taylor, abc: abc_v, locus })
    }

    pub fn metric(&self) -> Result<RealMetric4, GeometryError> {
        Ok(RealMetric4::from_complex(&metric_components(&self.v, self.nu)?))
    }

    pub fn metric_taylor(&self) -> Result<[[TaylorScalar; 4]; 4], GeometryError> {
        metric_components(&self.v_taylor, self.nu)
    }

    pub fn coframe(&self) -> Result<Coframe<Complex64>, GeometryError> {
        coframe(&self.v, self.nu)
    }

    pub fn real_coframe(&self) -> Result<RealCoframe<Complex64>, GeometryError> {
        real_coframe(&self.v, self.nu)
    }

    pub fn real_coframe_taylor(&self) -> Result<RealCoframe<TaylorScalar>, GeometryError> {
        real_coframe(&self.v_taylor, self.nu)
    }

    pub fn coframe_taylor(&self) -> Result<Coframe<TaylorScalar>, GeometryError> {
        coframe(&self.v_taylor, self.nu)
    }
}

pub fn metric_at(potential: &ExpSumPotential, nu: f64, at: &RealChartPoint) -> Result<RealMetric4, GeometryError> {
    LocalGeometry::new(potential, nu, at, NEAR_LOCUS_GUARD)?.metric()
}

pub fn coframe_at(
    potential: &ExpSumPotential,
    nu: f64,
    at: &RealChartPoint,
) -> Result<Coframe<Complex64>, GeometryError> {
    LocalGeometry::new(potential, nu, at, NEAR_LOCUS_GUARD)?.coframe()
}
