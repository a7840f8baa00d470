#![allow(dead_code)]

use std::path::PathBuf;

use hkmetric::expsum::{ExpSumPotential, ExpTerm};
use hkmetric::jets::RealChartPoint;
use hkmetric::spectrum::{expand, Mode, SpectrumData};
use hkmetric::verify::Lcg64;
use hkmetric::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn two_mode_spectrum() -> SpectrumData {
    SpectrumData::new(0.0, [Mode::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)), Mode::new(c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0))])
        .unwrap()
}

pub fn two_mode() -> ExpSumPotential {
    expand(&two_mode_spectrum()).unwrap()
}

pub fn one_mode(alpha: Complex64, f: Complex64, g: Complex64, nu: f64) -> ExpSumPotential {
    expand(&SpectrumData::new(nu, [Mode::new(alpha, f, g)]).unwrap()).unwrap()
}

/// Direct evaluation of the closed-form discrete-spectrum solution, written
/// with real and imaginary parts instead of exponential pairs:
/// `Σ exp{2 Im([α²(s²+1)+1] z²)} (exp[2s Re(αx)] Re{F exp[2i(Im(αx) - 2s Re(α²z²))]}
/// + exp[-2s Re(αx)] Re{G exp[2i(Im(αx) + 2s Re(α²z²))]})`, `x = p + νz²`.
///
/// Returns the value and the sum of the magnitudes of its pieces.
pub fn direct_v(modes: &[(Complex64, Complex64, Complex64)], nu: f64, at: &RealChartPoint) -> (f64, f64) {
    let [x1, x2, x3, x4] = at.0;
    let (p, z2) = (c(x1, x2), c(x3, x4));
    let x = p + nu * z2;
    let (mut sum, mut scale) = (0.0, 0.0);
    for &(alpha, f, g) in modes {
        let s = (1.0 - 1.0 / alpha.norm_sqr()).max(0.0).sqrt();
        let envelope = (2.0 * ((alpha * alpha * (s * s + 1.0) + 1.0) * z2).im).exp();
        let grow = (2.0 * s * (alpha * x).re).exp();
        let phase_f = 2.0 * ((alpha * x).im - 2.0 * s * (alpha * alpha * z2).re);
        let phase_g = 2.0 * ((alpha * x).im + 2.0 * s * (alpha * alpha * z2).re);
        let tf = envelope * grow * (f * Complex64::from_polar(1.0, phase_f)).re;
        let tg = envelope / grow * (g * Complex64::from_polar(1.0, phase_g)).re;
        sum += tf + tg;
        scale += envelope * (grow * f.norm() + g.norm() / grow);
    }
    (sum, scale)
}

pub fn random_modes(rng: &mut Lcg64) -> (f64, Vec<(Complex64, Complex64, Complex64)>) {
    let nu = -2.0 + 4.0 * rng.next_f64();
    let n = 1 + (rng.next_u64() % 5) as usize;
    let modes = (0..n)
        .map(|_| {
            let r = 1.0 + 2.0 * rng.next_f64();
            let th = std::f64::consts::TAU * rng.next_f64();
            let mut z = || c(2.0 * rng.next_f64() - 1.0, 2.0 * rng.next_f64() - 1.0);
            (Complex64::from_polar(r, th), z(), z())
        })
        .collect();
    (nu, modes)
}

pub fn spectrum_of(nu: f64, modes: &[(Complex64, Complex64, Complex64)]) -> SpectrumData {
    SpectrumData::new(nu, modes.iter().map(|&(a, f, g)| Mode::new(a, f, g))).unwrap()
}

/// Real potential independent of `x4 = Im z²`: every exponent has `l2 = lw`.
pub fn x4_independent() -> ExpSumPotential {
    let t1 = ExpTerm::new(c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.3, 0.0), c(0.3, 0.0));
    let t2 = ExpTerm::new(c(0.2, 0.1), c(0.4, 0.7), c(-0.3, 0.4), c(0.2, 0.5), c(0.2, 0.5));
    let t3 = ExpTerm::new(c(0.3, -0.2), c(0.1, 0.3), c(0.6, -0.2), c(-0.4, 0.1), c(-0.4, 0.1));
    ExpSumPotential::new([t1, t2, t2.partner(), t3, t3.partner()]).unwrap()
}

pub fn points(n: usize, seed: u64, half_width: f64) -> Vec<RealChartPoint> {
    let mut rng = Lcg64::new(seed);
    (0..n).map(|_| rng.point_in(&[(-half_width, half_width); 4])).collect()
}

/// Largest `|a - b|` over all entries relative to the largest `|b|`.
pub fn rel_max_diff<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
