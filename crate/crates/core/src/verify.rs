//! Residual suites over sampled chart points: the linear system for `v`, the
//! partner system for `ψ = -ln v` and its consequences, and the metric,
//! Kähler and curvature identities.
//!
//! Residuals are relative: each is divided by the sum of the absolute values
//! of the terms that cancel in it at the same point.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curvature::{
    closedness_of, frame_curvature_of, killing_scan, triple_duality, FrameCurvature, KillingReport, ORIENTATION_TOL,
};
use crate::expsum::{ExpSumPotential, VJet, WirtingerIndex};
use crate::geometry::{
    kahler_triple, legendre_existence_residual, neg_log_jet, partner_coeffs, partner_parts, phi_derivs, FirstDerivs, GeometryError,
    LocalGeometry, TwoForm, NEAR_LOCUS_GUARD,
};
use crate::jets::{RealChartPoint, TaylorScalar};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub const VERSION: &str = concat!("hkmetric ", env!("CARGO_PKG_VERSION"));

/// 64-bit linear congruential generator (multiplier 6364136223846793005,
/// increment 1442695040888963407); a draw maps the top 53 bits of the state
/// to `[0, 1)`.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.state
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn point_in(&mut self, bounds: &[(f64, f64); 4]) -> RealChartPoint {
        RealChartPoint(std::array::from_fn(|k| {
            let (lo, hi) = bounds[k];
            lo + (hi - lo) * self.next_f64()
        }))
    }
}

pub const DEFAULT_POINTS: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BOX: [(f64, f64); 4] = [(-1.0, 1.0); 4];
/// Guard on `|1 - |A|²|` for the third-order relations.
pub const THIRD_ORDER_GUARD: f64 = 1e-8;
/// A run fails its domain check when more than this fraction of points has `v ≤ 0`.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.9;
/// `|c² - |a|²| ≥ CLEARANCE_RATIO · c²` counts as clear of the singular locus.
pub const CLEARANCE_RATIO: f64 = 1e-6;

pub mod check {
    pub const CONJUGATION: &str = "conjugation_closure";
    pub const LINEAR_SYSTEM: &str = "linear_system";
    pub const PARTNER_SYSTEM: &str = "partner_system";
    pub const LEGENDRE_CMA: &str = "legendre_cma";
    pub const SOLVED_SECOND_ORDER: &str = "solved_second_order";
    pub const THIRD_ORDER: &str = "third_order";
    pub const COMPATIBILITY: &str = "compatibility";
    pub const B_IDENTITY: &str = "b_identity";
    pub const PDE_DOMAIN: &str = "pde_domain";
    pub const GEOMETRY_DOMAIN: &str = "geometry_domain";
    pub const NP_RECONSTRUCTION: &str = "np_reconstruction";
    pub const SIGNATURE: &str = "signature";
    pub const KAHLER_REALITY: &str = "kahler_reality";
    pub const KAHLER_ORTHOGONALITY: &str = "kahler_orthogonality";
    pub const KAHLER_NORMS: &str = "kahler_norms";
    pub const ORIENTATION: &str = "orientation_consistency";
    pub const RIEMANN_SYMMETRIES: &str = "riemann_symmetries";
    pub const RICCI_FLATNESS: &str = "ricci_flatness";
    pub const ANTI_SELF_DUALITY: &str = "anti_self_duality";
    pub const KAHLER_CLOSEDNESS: &str = "kahler_closedness";
    pub const HITCHIN_SATURATION: &str = "hitchin_saturation";
    pub const LEGENDRE_IDENTITY: &str = "legendre_identity";
    pub const LEGENDRE_EXISTENCE: &str = "legendre_existence";
    pub const LOCUS_CLEARANCE: &str = "locus_clearance";
    pub const KILLING_RANK: &str = "killing_rank";
}

pub fn default_tolerances() -> BTreeMap<String, f64> {
    use check::*;
    [
        (CONJUGATION, 1e-12),
        (LINEAR_SYSTEM, 1e-8),
        (PARTNER_SYSTEM, 1e-8),
        (LEGENDRE_CMA, 1e-8),
        (SOLVED_SECOND_ORDER, 1e-8),
        (THIRD_ORDER, 1e-8),
        (COMPATIBILITY, 1e-8),
        (B_IDENTITY, 1e-8),
        (PDE_DOMAIN, MAX_EXCLUDED_FRACTION),
        (GEOMETRY_DOMAIN, MAX_EXCLUDED_FRACTION),
        (NP_RECONSTRUCTION, 1e-10),
        (SIGNATURE, 0.0),
        (KAHLER_REALITY, 1e-10),
        (KAHLER_ORTHOGONALITY, 1e-10),
        (KAHLER_NORMS, 1e-10),
        (ORIENTATION, ORIENTATION_TOL),
        (RIEMANN_SYMMETRIES, 1e-9),
        (RICCI_FLATNESS, 1e-6),
        (ANTI_SELF_DUALITY, 1e-6),
        (KAHLER_CLOSEDNESS, 1e-6),
        (HITCHIN_SATURATION, 1e-6),
        (LEGENDRE_IDENTITY, 1e-9),
        (LEGENDRE_EXISTENCE, 0.0),
        (LOCUS_CLEARANCE, 0.05),
        (KILLING_RANK, 0.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub bounds: [(f64, f64); 4],
    pub n_points: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    /// Relative near-locus guard on `|c² - |a|²| / c²`.
    pub near_locus_guard: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            bounds: DEFAULT_BOX,
            n_points: DEFAULT_POINTS,
            seed: DEFAULT_SEED,
            tolerances: default_tolerances(),
            near_locus_guard: NEAR_LOCUS_GUARD,
        }
    }
}

impl SuiteConfig {
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(0.0)
    }

    pub fn points(&self) -> Vec<RealChartPoint> {
        let mut rng = Lcg64::new(self.seed);
        (0..self.n_points).map(|_| rng.point_in(&self.bounds)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub worst_residual: Option<f64>,
    pub worst_point: Option<[f64; 4]>,
    pub tolerance: f64,
    pub pass: bool,
    pub evaluated: usize,
    pub informational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardCounts {
    pub sampled: usize,
    pub non_positive: usize,
    pub near_locus: usize,
    /// Points with `c² < |a|²`, where the metric is not positive definite.
    pub outside_signature: usize,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillingSummary {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub null_directions: Vec<[f64; 4]>,
    pub points_used: usize,
}

impl From<KillingReport> for KillingSummary {
    fn from(k: KillingReport) -> Self {
        Self { rank: k.rank, singular_values: k.singular_values, null_directions: k.null_directions, points_used: k.points_used }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: String,
    pub n_points: usize,
    pub seed: u64,
    pub bounds: [[f64; 2]; 4],
    pub pass: bool,
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde_guards: Option<GuardCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_guards: Option<GuardCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_sign: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killing: Option<KillingSummary>,
}

impl SuiteReport {
    fn new(config: &SuiteConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            n_points: config.n_points,
            seed: config.seed,
            bounds: config.bounds.map(|(lo, hi)| [lo, hi]),
            pass: true,
            checks: Vec::new(),
            pde_guards: None,
            geometry_guards: None,
            orientation_sign: None,
            killing: None,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, c: CheckResult) {
        if !c.informational && !c.pass {
            self.pass = false;
        }
        self.checks.push(c);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.informational && !c.pass)
    }
}

/// Running worst residual of one named check.
#[derive(Debug, Clone)]
struct Tracker {
    name: &'static str,
    tolerance: f64,
    worst: Option<(f64, [f64; 4])>,
    evaluated: usize,
    non_finite: bool,
}

impl Tracker {
    fn new(name: &'static str, config: &SuiteConfig) -> Self {
        Self { name, tolerance: config.tolerance(name), worst: None, evaluated: 0, non_finite: false }
    }

    fn record(&mut self, residual: f64, at: &RealChartPoint) {
        self.evaluated += 1;
        if !residual.is_finite() {
            self.non_finite = true;
            return;
        }
        if self.worst.is_none_or(|(w, _)| residual > w) {
            self.worst = Some((residual, at.0));
        }
    }

    fn finish(self) -> CheckResult {
        let worst = self.worst.map(|w| w.0);
        let pass = !self.non_finite && worst.is_none_or(|w| w <= self.tolerance);
        CheckResult {
            name: self.name.to_string(),
            worst_residual: worst,
            worst_point: self.worst.map(|w| w.1),
            tolerance: self.tolerance,
            pass,
            evaluated: self.evaluated,
            informational: false,
            note: if self.non_finite {
                Some("non-finite residual".into())
            } else if self.evaluated == 0 {
                Some("no points evaluated".into())
            } else {
                None
            },
        }
    }
}

/// `|Σ terms| / Σ |terms|`, 0 when every term vanishes.
pub fn relative(terms: &[Complex64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    let sum: Complex64 = terms.iter().sum();
    if scale == 0.0 {
        0.0
    } else {
        sum.norm() / scale
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn k(a: u32, b: u32, c: u32, d: u32) -> WirtingerIndex {
    WirtingerIndex::new(a, b, c, d)
}

/// The four linear equations for `v` and the two conjugate ones.
pub fn linear_system_residuals(v: &VJet, nu: f64) -> [f64; 6] {
    let g = |a, b, c, d| v.at(k(a, b, c, d));
    let (f, vp, vq, v2, vw) = (g(0, 0, 0, 0), g(1, 0, 0, 0), g(0, 1, 0, 0), g(0, 0, 1, 0), g(0, 0, 0, 1));
    let nu_c = Complex64::new(nu, 0.0);
    [
        relative(&[g(1, 1, 0, 0), f]),
        relative(&[g(2, 0, 0, 0), f, -I * v2, I * nu_c * vp]),
        relative(&[g(1, 0, 0, 1), nu_c * f, -I * vp, I * vq]),
        relative(&[g(0, 0, 1, 1), nu_c * nu_c * f, -I * v2, I * vw, -I * nu_c * vp, I * nu_c * vq]),
        relative(&[g(0, 2, 0, 0), f, I * vw, -I * nu_c * vq]),
        relative(&[g(0, 1, 1, 0), nu_c * f, I * vq, -I * vp]),
    ]
}

/// Second-order data of `ψ` used by the partner-system checks.
struct PsiSecond {
    p: Complex64,
    q: Complex64,
    z2: Complex64,
    w: Complex64,
    pp: Complex64,
    qq: Complex64,
    pq: Complex64,
    pw: Complex64,
    q2: Complex64,
    zw: Complex64,
}

impl PsiSecond {
    fn new(psi: &VJet) -> Self {
        let g = |a, b, c, d| psi.at(k(a, b, c, d));
        Self {
            p: g(1, 0, 0, 0),
            q: g(0, 1, 0, 0),
            z2: g(0, 0, 1, 0),
            w: g(0, 0, 0, 1),
            pp: g(2, 0, 0, 0),
            qq: g(0, 2, 0, 0),
            pq: g(1, 1, 0, 0),
            pw: g(1, 0, 0, 1),
            q2: g(0, 1, 1, 0),
            zw: g(0, 0, 1, 1),
        }
    }
}

/// The six equations of the partner system with `φ = p + p̄ + ν(z² + z̄²)`.
pub fn partner_system_residuals(psi: &VJet, nu: f64) -> [f64; 6] {
    let s = PsiSecond::new(psi);
    let phi = phi_derivs(nu);
    let c = |x: f64| Complex64::new(x, 0.0);
    let (fp, fq, f2, fw) = (c(phi.p), c(phi.q), c(phi.z2), c(phi.w));
    [
        relative(&[s.pq, -fp * fq, -s.p * s.q]),
        relative(&[s.pp, -fp * fp, -s.p * s.p, -I * fp * s.z2, I * f2 * s.p]),
        relative(&[s.pw, -fp * fw, -s.p * s.w, -I * fq * s.p, I * fp * s.q]),
        relative(&[
            s.zw,
            -f2 * fw,
            -s.z2 * s.w,
            -I * s.p * fw,
            I * fp * s.w,
            -I * s.z2 * fq,
            I * f2 * s.q,
        ]),
        relative(&[s.qq, -fq * fq, -s.q * s.q, I * fq * s.w, -I * fw * s.q]),
        relative(&[s.q2, -fq * f2, -s.q * s.z2, I * fp * s.q, -I * fq * s.p]),
    ]
}

/// `ψ_pp̄ψ_22̄ - ψ_p2̄ψ_p̄2 - ψ_ppψ_p̄p̄ + ψ_pp̄²`.
pub fn legendre_cma_residual(psi: &VJet) -> f64 {
    let s = PsiSecond::new(psi);
    relative(&[s.pq * s.zw, -s.pw * s.q2, -s.pp * s.qq, s.pq * s.pq])
}

/// Wirtinger gradient of a quotient `N/D` together with the size of the
/// terms that cancel in each component, `(|N_x| + |N/D| |D_x|) / |D|`.
#[derive(Debug, Clone, Copy)]
struct QuotientGrad {
    d: [Complex64; 4],
    scale: [f64; 4],
}

impl QuotientGrad {
    fn new(num: &TaylorScalar, den: &TaylorScalar, value: Complex64) -> Self {
        let (gn, gd) = (num.wirtinger_grad(), den.wirtinger_grad());
        let dn = den.value.norm();
        Self {
            d: std::array::from_fn(|x| (gn[x] - value * gd[x]) / den.value),
            scale: std::array::from_fn(|x| (gn[x].norm() + value.norm() * gd[x].norm()) / dn),
        }
    }
}

const P: usize = 0;
const Q: usize = 1;
const Z2: usize = 2;
const W: usize = 3;

struct PartnerJets {
    a: Complex64,
    c: Complex64,
    b: Complex64,
    b_identity: Complex64,
    da: QuotientGrad,
    dab: QuotientGrad,
    dc: QuotientGrad,
    dcb: QuotientGrad,
}

fn partner_jets(psi: &VJet, nu: f64) -> Result<PartnerJets, GeometryError> {
    let psi_t = FirstDerivs::lift(psi)?;
    let phi = phi_derivs(nu).lift::<TaylorScalar>();
    let coeffs = partner_coeffs(&phi, &psi_t)?;
    let parts = partner_parts(&phi, &psi_t);
    let (a, c) = (coeffs.a.value, coeffs.c.value);
    let den_b = parts.den.conj();
    Ok(PartnerJets {
        a,
        c,
        b: coeffs.b.value,
        b_identity: coeffs.b_identity.value,
        da: QuotientGrad::new(&parts.num_a, &parts.den, a),
        dab: QuotientGrad::new(&parts.num_a.conj(), &den_b, a.conj()),
        dc: QuotientGrad::new(&parts.num_c, &parts.den, c),
        dcb: QuotientGrad::new(&parts.num_c.conj(), &den_b, c.conj()),
    })
}

fn scaled(sum: Complex64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        sum.norm() / scale
    }
}

/// `ψ_pp - Aψ_pp̄`, `ψ_p2̄ - Cψ_pp̄`, `ψ_22̄ - Bψ_pp̄` and the two conjugates.
fn solved_second_order_residuals(psi: &VJet, j: &PartnerJets) -> [f64; 5] {
    let s = PsiSecond::new(psi);
    let (a, c) = (j.a, j.c);
    [
        relative(&[s.pp, -a * s.pq]),
        relative(&[s.pw, -c * s.pq]),
        relative(&[s.zw, -j.b * s.pq]),
        relative(&[s.qq, -a.conj() * s.pq]),
        relative(&[s.q2, -c.conj() * s.pq]),
    ]
}

/// Third derivatives `ψ_ppp̄`, `ψ_pp̄2` and conjugates against their expressions
/// through `A`, `C` and their first derivatives; `None` when `|1 - |A|²|` is too small.
fn third_order_residuals(psi: &VJet, j: &PartnerJets) -> Option<[f64; 4]> {
    let (a, c) = (j.a, j.c);
    let denom = 1.0 - a.norm_sqr();
    if !(denom.abs() > THIRD_ORDER_GUARD) {
        return None;
    }
    let d = denom.abs();
    let (da, dab, dcb, dc) = (&j.da, &j.dab, &j.dcb, &j.dc);
    let r = (a * dab.d[P] + da.d[Q]) / denom;
    let rc = (a.conj() * da.d[Q] + dab.d[P]) / denom;
    let sr = (a.norm() * dab.scale[P] + da.scale[Q]) / d;
    let src = (a.norm() * da.scale[Q] + dab.scale[P]) / d;
    let pq = psi.at(k(1, 1, 0, 0));
    let pqn = pq.norm();
    let third = [k(2, 1, 0, 0), k(1, 2, 0, 0), k(1, 1, 1, 0), k(1, 1, 0, 1)].map(|i| psi.at(i));
    let rhs = [r, rc, c.conj() * r + dcb.d[P], c * rc + dc.d[Q]];
    let scale = [sr, src, c.norm() * sr + dcb.scale[P], c.norm() * src + dc.scale[Q]];
    Some(std::array::from_fn(|n| scaled(third[n] - rhs[n] * pq, third[n].norm() + scale[n] * pqn)))
}

/// Both compatibility conditions of the solved system and their conjugates.
fn compatibility_residuals(j: &PartnerJets) -> [f64; 4] {
    let (a, c, ab, cb) = (j.a, j.c, j.a.conj(), j.c.conj());
    let (da, dc, dab, dcb) = (&j.da, &j.dc, &j.dab, &j.dcb);
    let (na, nc) = (a.norm(), c.norm());
    [
        scaled(
            a * dc.d[Q] - c * da.d[Q] - dc.d[P] + da.d[W],
            na * dc.scale[Q] + nc * da.scale[Q] + dc.scale[P] + da.scale[W],
        ),
        scaled(
            ab * da.d[P] + cb * dc.d[P] - da.d[Q] - dc.d[Z2],
            na * da.scale[P] + nc * dc.scale[P] + da.scale[Q] + dc.scale[Z2],
        ),
        scaled(
            ab * dcb.d[P] - cb * dab.d[P] - dcb.d[Q] + dab.d[Z2],
            na * dcb.scale[P] + nc * dab.scale[P] + dcb.scale[Q] + dab.scale[Z2],
        ),
        scaled(
            a * dab.d[Q] + c * dcb.d[Q] - dab.d[P] - dcb.d[W],
            na * dab.scale[Q] + nc * dcb.scale[Q] + dab.scale[P] + dcb.scale[W],
        ),
    ]
}

fn domain_check(name: &'static str, config: &SuiteConfig, guards: &GuardCounts, note: Option<String>) -> CheckResult {
    let tol = config.tolerance(name);
    let fraction = if guards.sampled == 0 { 1.0 } else { guards.non_positive as f64 / guards.sampled as f64 };
    let pass = fraction <= tol && guards.evaluated > 0;
    let note = if guards.evaluated == 0 {
        Some(note.unwrap_or_else(|| "no sampled point passes the guards".into()))
    } else if fraction > tol {
        Some(format!(
            "{:.1}% of points have v <= 0; choose a box inside the positivity domain",
            100.0 * fraction
        ))
    } else {
        None
    };
    CheckResult {
        name: name.to_string(),
        worst_residual: Some(fraction),
        worst_point: None,
        tolerance: tol,
        pass,
        evaluated: guards.sampled,
        informational: false,
        note,
    }
}

/// Residual checks of the linear system for `v` and the partner system for `ψ`.
pub fn pde_suite(potential: &ExpSumPotential, nu: f64, config: &SuiteConfig) -> SuiteReport {
    use check::*;
    let mut report = SuiteReport::new(config);
    let conj = potential.conjugation_check();
    report.push(CheckResult {
        name: CONJUGATION.into(),
        worst_residual: None,
        worst_point: None,
        tolerance: config.tolerance(CONJUGATION),
        pass: conj.pass,
        evaluated: potential.len(),
        informational: false,
        note: (!conj.pass).then(|| format!("unpaired terms: {:?}", conj.unpaired)),
    });
    let mut linear = Tracker::new(LINEAR_SYSTEM, config);
    let mut partner = Tracker::new(PARTNER_SYSTEM, config);
    let mut cma = Tracker::new(LEGENDRE_CMA, config);
    let mut solved = Tracker::new(SOLVED_SECOND_ORDER, config);
    let mut third = Tracker::new(THIRD_ORDER, config);
    let mut compat = Tracker::new(COMPATIBILITY, config);
    let mut b_id = Tracker::new(B_IDENTITY, config);
    let mut guards = GuardCounts::default();
    let mut third_skipped = 0;
    for at in config.points() {
        guards.sampled += 1;
        let Ok(v) = potential.jet(&at.coord(), 3) else {
            guards.non_positive += 1;
            continue;
        };
        let Ok(psi) = neg_log_jet(&v) else {
            guards.non_positive += 1;
            continue;
        };
        guards.evaluated += 1;
        linear.record(worst(linear_system_residuals(&v, nu)), &at);
        partner.record(worst(partner_system_residuals(&psi, nu)), &at);
        cma.record(legendre_cma_residual(&psi), &at);
        let Ok(j) = partner_jets(&psi, nu) else {
            for t in [&mut solved, &mut compat, &mut b_id] {
                t.record(f64::NAN, &at);
            }
            continue;
        };
        solved.record(worst(solved_second_order_residuals(&psi, &j)), &at);
        match third_order_residuals(&psi, &j) {
            Some(r) => third.record(worst(r), &at),
            None => third_skipped += 1,
        }
        compat.record(worst(compatibility_residuals(&j)), &at);
        let bscale = j.b.norm() + j.b_identity.norm() + 2.0;
        b_id.record((j.b - j.b_identity).norm() / bscale, &at);
    }
    report.push(domain_check(PDE_DOMAIN, config, &guards, None));
    for t in [linear, partner, cma, solved] {
        report.push(t.finish());
    }
    let mut third = third.finish();
    if third_skipped > 0 {
        third.note = Some(format!("{third_skipped} points with |1 - |A|^2| <= {THIRD_ORDER_GUARD:e} skipped"));
    }
    report.push(third);
    report.push(compat.finish());
    report.push(b_id.finish());
    report.pde_guards = Some(guards);
    report
}

/// Inner product `½ F_ab G_ab` of frame components.
fn frame_inner(f: &TwoForm, g: &TwoForm) -> f64 {
    f.0.iter().zip(g.0.iter()).map(|(x, y)| x * y).sum()
}

struct PointGeometry {
    reconstruction: f64,
    signature: f64,
    reality: f64,
    orthogonality: f64,
    norms: f64,
    orientation: Result<(f64, f64), String>,
    symmetries: f64,
    ricci: f64,
    asd: f64,
    closedness: f64,
    saturation: f64,
}

fn evaluate_point(geo: &LocalGeometry) -> Result<PointGeometry, String> {
    let g = geo.metric().map_err(|e| e.to_string())?;
    let frame_np = geo.coframe().map_err(|e| e.to_string())?;
    let h = frame_np.metric();
    let scale = g.max_abs();
    let mut reconstruction: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            reconstruction = reconstruction.max((g.0[i][j] - h[i][j].re).abs().max(h[i][j].im.abs()) / scale);
        }
    }
    let eig = g.eigenvalues();
    let signature = if eig[0] > 0.0 { 0.0 } else { -eig[0] / eig[3].abs().max(f64::MIN_POSITIVE) };

    let frame: FrameCurvature = frame_curvature_of(geo).map_err(|e| e.to_string())?;
    let triple = kahler_triple(&frame_np);
    let forms = triple.forms.map(|t| frame.to_frame(&t));
    let gram: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| frame_inner(&forms[i], &forms[j])));
    let mut orthogonality: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                orthogonality = orthogonality.max(gram[i][j].abs() / (gram[i][i] * gram[j][j]).abs().sqrt());
            }
        }
    }
    let norms = [(gram[0][0] - 2.0).abs() / 2.0, (gram[1][1] - 0.5).abs() / 0.5, (gram[2][2] - 0.5).abs() / 0.5]
        .into_iter()
        .fold(0.0, f64::max);

    let (plus, minus) = triple_duality(geo, &frame).map_err(|e| e.to_string())?;
    let orientation = if plus <= minus { Ok((1.0, plus)) } else { Ok((-1.0, minus)) };
    let sign = orientation.as_ref().map(|o| o.0).unwrap_or(1.0);
    let duality = frame.duality(sign);
    let closed = geo.real_coframe_taylor().map_err(|e| e.to_string())?.kahler_triple().map(|f| closedness_of(&f));
    Ok(PointGeometry {
        reconstruction,
        signature,
        reality: triple.imag_defect,
        orthogonality,
        norms,
        orientation: orientation.map_err(|e: String| e),
        symmetries: frame.symmetry_residual(),
        ricci: frame.ricci_ratio(),
        asd: duality.asd_residual,
        closedness: worst(closed),
        saturation: frame.densities(sign).saturation_residual(),
    })
}

/// Metric, Kähler triple and curvature identities at the sampled points in
/// the positive-signature domain.
pub fn geometry_suite(potential: &ExpSumPotential, nu: f64, config: &SuiteConfig) -> SuiteReport {
    use check::*;
    let mut report = SuiteReport::new(config);
    let mut recon = Tracker::new(NP_RECONSTRUCTION, config);
    let mut signature = Tracker::new(SIGNATURE, config);
    let mut reality = Tracker::new(KAHLER_REALITY, config);
    let mut ortho = Tracker::new(KAHLER_ORTHOGONALITY, config);
    let mut norms = Tracker::new(KAHLER_NORMS, config);
    let mut orient = Tracker::new(ORIENTATION, config);
    let mut sym = Tracker::new(RIEMANN_SYMMETRIES, config);
    let mut ricci = Tracker::new(RICCI_FLATNESS, config);
    let mut asd = Tracker::new(ANTI_SELF_DUALITY, config);
    let mut closed = Tracker::new(KAHLER_CLOSEDNESS, config);
    let mut hitchin = Tracker::new(HITCHIN_SATURATION, config);
    let mut legendre = Tracker::new(LEGENDRE_IDENTITY, config);
    let mut guards = GuardCounts::default();
    let mut signs: Vec<i8> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let (mut positive, mut clear, mut legendre_ok) = (0usize, 0usize, 0usize);
    for at in config.points() {
        guards.sampled += 1;
        // positivity and locus statistics come first, independent of the guard
        let Ok(v) = potential.jet(&at.coord(), 3) else {
            guards.non_positive += 1;
            continue;
        };
        if !(v.value() > 0.0) {
            guards.non_positive += 1;
            continue;
        }
        positive += 1;
        let first = FirstDerivs::from_jet(&v);
        let locus = crate::geometry::singular_locus_value(&first, nu);
        let c = crate::geometry::abc(&first, nu).c.re;
        if locus.abs() >= CLEARANCE_RATIO * c * c {
            clear += 1;
        }
        if let Ok(psi) = neg_log_jet(&v) {
            let e = legendre_existence_residual(&psi);
            if e.norm() > 0.0 {
                legendre_ok += 1;
            }
            if let Ok(j) = partner_jets(&psi, nu) {
                let pq = psi.at(k(1, 1, 0, 0));
                let pp = psi.at(k(2, 0, 0, 0));
                let qq = psi.at(k(0, 2, 0, 0));
                let rhs = pq * pq * (j.a.norm_sqr() - 1.0);
                let scale = (pp * qq).norm() + (pq * pq).norm() + rhs.norm();
                legendre.record(if scale == 0.0 { 0.0 } else { (e - rhs).norm() / scale }, &at);
            }
        }
        let geo = match LocalGeometry::new(potential, nu, &at, config.near_locus_guard) {
            Ok(g) => g,
            Err(GeometryError::NearLocus { .. }) => {
                guards.near_locus += 1;
                continue;
            }
            Err(_) => {
                guards.non_positive += 1;
                continue;
            }
        };
        if geo.locus <= 0.0 {
            guards.outside_signature += 1;
            continue;
        }
        guards.evaluated += 1;
        match evaluate_point(&geo) {
            Ok(p) => {
                recon.record(p.reconstruction, &at);
                signature.record(p.signature, &at);
                reality.record(p.reality, &at);
                ortho.record(p.orthogonality, &at);
                norms.record(p.norms, &at);
                match p.orientation {
                    Ok((s, defect)) => {
                        signs.push(s as i8);
                        orient.record(defect, &at);
                    }
                    Err(e) => {
                        orient.record(f64::NAN, &at);
                        failures.push(e);
                    }
                }
                sym.record(p.symmetries, &at);
                ricci.record(p.ricci, &at);
                asd.record(p.asd, &at);
                closed.record(p.closedness, &at);
                hitchin.record(p.saturation, &at);
            }
            Err(e) => {
                for t in [&mut recon, &mut sym, &mut ricci, &mut asd, &mut closed, &mut hitchin] {
                    t.record(f64::NAN, &at);
                }
                failures.push(e);
            }
        }
    }
    let domain_note = (positive > 0 && guards.evaluated == 0 && guards.near_locus == positive)
        .then(|| "every positive point lies on the singular locus c^2 = |a|^2; the metric is undefined".to_string());
    report.push(domain_check(GEOMETRY_DOMAIN, config, &guards, domain_note));
    for t in [recon, signature, reality, ortho, norms] {
        report.push(t.finish());
    }
    let mut orient = orient.finish();
    let consistent = signs.windows(2).all(|w| w[0] == w[1]);
    if !consistent {
        orient.pass = false;
        orient.note = Some("orientation sign differs between points".into());
    } else if let Some(e) = failures.first() {
        orient.note.get_or_insert_with(|| e.clone());
    }
    report.push(orient);
    for t in [sym, ricci, asd, closed, hitchin, legendre] {
        report.push(t.finish());
    }
    let fraction = |n: usize| if positive == 0 { 0.0 } else { n as f64 / positive as f64 };
    report.push(CheckResult {
        name: LEGENDRE_EXISTENCE.into(),
        worst_residual: Some(1.0 - fraction(legendre_ok)),
        worst_point: None,
        tolerance: config.tolerance(LEGENDRE_EXISTENCE),
        pass: legendre_ok == positive,
        evaluated: positive,
        informational: true,
        note: Some("fraction of positive points where the Legendre transformation degenerates".into()),
    });
    let clearance_tol = config.tolerance(LOCUS_CLEARANCE);
    report.push(CheckResult {
        name: LOCUS_CLEARANCE.into(),
        worst_residual: Some(1.0 - fraction(clear)),
        worst_point: None,
        tolerance: clearance_tol,
        pass: 1.0 - fraction(clear) <= clearance_tol,
        evaluated: positive,
        informational: true,
        note: Some(format!("fraction of positive points with |c^2 - |a|^2| < {CLEARANCE_RATIO:e} c^2")),
    });
    report.orientation_sign = (consistent && !signs.is_empty()).then(|| signs[0]);
    report.geometry_guards = Some(guards);
    report
}

/// Both suites plus the translational-symmetry scan.
pub fn full_report(potential: &ExpSumPotential, nu: f64, config: &SuiteConfig) -> SuiteReport {
    let pde = pde_suite(potential, nu, config);
    let geo = geometry_suite(potential, nu, config);
    let mut report = SuiteReport::new(config);
    for c in pde.checks.into_iter().chain(geo.checks) {
        report.push(c);
    }
    report.pde_guards = pde.pde_guards;
    report.geometry_guards = geo.geometry_guards;
    report.orientation_sign = geo.orientation_sign;
    let killing = killing_scan(potential, nu, &config.points());
    let (summary, note) = match killing {
        Ok(k) => (Some(KillingSummary::from(k)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    report.push(CheckResult {
        name: check::KILLING_RANK.into(),
        worst_residual: summary.as_ref().map(|k| (4 - k.rank) as f64),
        worst_point: None,
        tolerance: config.tolerance(check::KILLING_RANK),
        pass: summary.as_ref().is_some_and(|k| k.rank == 4),
        evaluated: summary.as_ref().map_or(0, |k| k.points_used),
        informational: true,
        note: note.or_else(|| Some("number of translational symmetry directions".into())),
    });
    report.killing = summary;
    report
}

/// Writes every float as `{:.16e}` (17 significant digits).
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn report_to_json(report: &SuiteReport) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    report.serialize(&mut ser).expect("report serialization is infallible");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn report_from_json(text: &str) -> Result<SuiteReport, serde_json::Error> {
    serde_json::from_str(text)
}
