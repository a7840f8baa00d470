mod common;

use common::*;
use hkmetric::expsum::WirtingerIndex;
use hkmetric::jets::{fd_oracle, RealChartPoint};
use hkmetric::spectrum::{expand, term_residuals};
use hkmetric::verify::Lcg64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expanded_terms_solve_the_linear_system(seed in any::<u64>()) {
        let (nu, modes) = random_modes(&mut Lcg64::new(seed));
        let pot = expand(&spectrum_of(nu, &modes)).unwrap();
        for t in pot.terms() {
            let scale = t.exponents().iter().map(|l| 1.0 + l.norm_sqr()).sum::<f64>() + nu * nu;
            prop_assert!(term_residuals(t, nu).max_abs() <= 1e-14 * scale, "{t}");
        }
        prop_assert!(pot.conjugation_check().pass);
    }

    #[test]
    fn expansion_matches_closed_form(seed in any::<u64>(), x in prop::array::uniform4(-1.0f64..1.0)) {
        let (nu, modes) = random_modes(&mut Lcg64::new(seed));
        let pot = expand(&spectrum_of(nu, &modes)).unwrap();
        let at = RealChartPoint(x);
        let (direct, scale) = direct_v(&modes, nu, &at);
        let v = pot.eval(&at.coord()).unwrap();
        prop_assert!((v - direct).abs() <= 1e-12 * scale, "{v} vs {direct}");
    }

    #[test]
    fn jet_matches_differences_of_closed_form(seed in any::<u64>(), x in prop::array::uniform4(-0.8f64..0.8)) {
        let (nu, modes) = random_modes(&mut Lcg64::new(seed));
        let pot = expand(&spectrum_of(nu, &modes)).unwrap();
        let at = RealChartPoint(x);
        let jet = pot.jet(&at.coord(), 2).unwrap();
        let fd = fd_oracle(|p: &RealChartPoint| direct_v(&modes, nu, p).0, &at, 1e-4);
        // chart derivatives from Wirtinger ones: ∂1 = ∂p + ∂p̄, ∂2 = i(∂p - ∂p̄)
        let w = |a, b, c, d| jet.at(WirtingerIndex::new(a, b, c, d));
        let i = c(0.0, 1.0);
        let grad = [
            (w(1, 0, 0, 0) + w(0, 1, 0, 0)).re,
            (i * (w(1, 0, 0, 0) - w(0, 1, 0, 0))).re,
            (w(0, 0, 1, 0) + w(0, 0, 0, 1)).re,
            (i * (w(0, 0, 1, 0) - w(0, 0, 0, 1))).re,
        ];
        let d11 = (w(2, 0, 0, 0) + 2.0 * w(1, 1, 0, 0) + w(0, 2, 0, 0)).re;
        let scale = direct_v(&modes, nu, &at).1 * 100.0;
        for (jet, fd) in grad.iter().zip(fd.grad) {
            prop_assert!((jet - fd).abs() <= 1e-6 * scale);
        }
        prop_assert!((d11 - fd.hess[0][0]).abs() <= 1e-4 * scale);
    }
}

#[test]
fn two_mode_term_table() {
    let pot = two_mode();
    assert_eq!(pot.len(), 6);
    assert!(pot.conjugation_check().pass);
    let lp: Vec<f64> = pot.terms().iter().map(|t| t.lp.re).collect();
    assert!(lp.iter().any(|x| (x - (2.0 + 3f64.sqrt())).abs() < 1e-15));
    assert!(lp.iter().any(|x| (x - (2.0 - 3f64.sqrt())).abs() < 1e-15));
}
