mod common;

use common::*;
use hkmetric::expsum::{ExpSumPotential, ExpTerm};
use hkmetric::geometry::{abc, singular_locus_value, FirstDerivs};
use hkmetric::spectrum::{singular_family, SingularFamily};
use hkmetric::verify::{check, full_report, geometry_suite, pde_suite, SuiteConfig};
use proptest::prelude::*;

fn perturbed(pot: &ExpSumPotential, shift: f64) -> ExpSumPotential {
    let mut terms = pot.terms().to_vec();
    let mut t = terms[0];
    let partner_at = terms.iter().position(|u| *u == t.partner()).unwrap();
    t.lp += shift;
    terms[0] = t;
    terms[partner_at] = t.partner();
    ExpSumPotential::new(terms).unwrap()
}

#[test]
fn two_mode_passes_every_pde_check() {
    let r = pde_suite(&two_mode(), 0.0, &SuiteConfig::default());
    assert!(r.pass, "{:?}", r.failures().collect::<Vec<_>>());
    assert!(r.pde_guards.as_ref().unwrap().evaluated >= 100);
}

#[test]
fn two_mode_geometry_on_many_guarded_points() {
    let config = SuiteConfig { n_points: 600, ..SuiteConfig::default() };
    let r = geometry_suite(&two_mode(), 0.0, &config);
    assert!(r.pass, "{:?}", r.failures().collect::<Vec<_>>());
    assert!(r.geometry_guards.as_ref().unwrap().evaluated >= 50);
    assert_eq!(r.orientation_sign, Some(-1));
    assert!(r.check(check::LOCUS_CLEARANCE).unwrap().pass);
}

#[test]
fn perturbed_exponent_breaks_pde_and_duality() {
    let pot = perturbed(&two_mode(), 1e-2);
    let config = SuiteConfig { n_points: 600, ..SuiteConfig::default() };
    let pde = pde_suite(&pot, 0.0, &config);
    assert!(!pde.check(check::LINEAR_SYSTEM).unwrap().pass);
    let geo = geometry_suite(&pot, 0.0, &config);
    assert!(geo.check(check::ANTI_SELF_DUALITY).unwrap().worst_residual.unwrap() > 1e-3);
    assert!(!geo.pass);
}

#[test]
fn singular_family_passes_pde_and_lies_on_locus() {
    let pot = singular_family(&SingularFamily { alpha: c(2.0, 0.0), f: c(1.0, 0.0), nu: 0.0 }).unwrap();
    assert!(pde_suite(&pot, 0.0, &SuiteConfig::default()).pass);
    for at in points(100, 9, 1.0) {
        let v = FirstDerivs::from_jet(&pot.jet(&at.coord(), 1).unwrap());
        let cc = abc(&v, 0.0).c.re;
        assert!(singular_locus_value(&v, 0.0).abs() <= 1e-10 * cc * cc);
    }
    let geo = geometry_suite(&pot, 0.0, &SuiteConfig::default());
    let domain = geo.check(check::GEOMETRY_DOMAIN).unwrap();
    assert!(!domain.pass);
    assert!(domain.note.as_deref().unwrap().contains("singular locus"));
}

#[test]
fn negative_potential_fails_domain_with_advice() {
    let t = ExpTerm::new(c(-1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0));
    let pot = ExpSumPotential::new([t]).unwrap();
    let r = pde_suite(&pot, 0.0, &SuiteConfig::default());
    let d = r.check(check::PDE_DOMAIN).unwrap();
    assert!(!d.pass && !r.pass);
    assert_eq!(r.pde_guards.as_ref().unwrap().non_positive, 200);
}

#[test]
fn unpaired_term_fails_conjugation_closure() {
    let t = ExpTerm::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
    let pot = ExpSumPotential::new([t]).unwrap();
    let r = pde_suite(&pot, 0.0, &SuiteConfig { n_points: 5, ..SuiteConfig::default() });
    assert!(!r.check(check::CONJUGATION).unwrap().pass);
}

#[test]
fn reports_are_reproducible_and_seed_dependent() {
    let base = SuiteConfig { n_points: 60, ..SuiteConfig::default() };
    let a = full_report(&two_mode(), 0.0, &base);
    assert_eq!(a, full_report(&two_mode(), 0.0, &base));
    let b = full_report(&two_mode(), 0.0, &SuiteConfig { seed: 7, ..base });
    assert_ne!(a.checks, b.checks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn enlarging_the_guard_never_breaks_a_passing_check(exp in -8i32..-2, seed in 0u64..1000) {
        let base = SuiteConfig { n_points: 80, seed, ..SuiteConfig::default() };
        let loose = geometry_suite(&two_mode(), 0.0, &base);
        let tight = geometry_suite(&two_mode(), 0.0, &SuiteConfig { near_locus_guard: 10f64.powi(exp), ..base });
        for c in loose.checks.iter().filter(|c| c.pass && !c.informational && c.name != check::GEOMETRY_DOMAIN) {
            prop_assert!(tight.check(&c.name).unwrap().pass, "{}", c.name);
        }
    }

    #[test]
    fn random_spectra_pass_the_pde_suite(seed in any::<u64>()) {
        let (nu, modes) = random_modes(&mut hkmetric::verify::Lcg64::new(seed));
        let pot = hkmetric::spectrum::expand(&spectrum_of(nu, &modes)).unwrap();
        let r = pde_suite(&pot, nu, &SuiteConfig { n_points: 40, bounds: [(-0.5, 0.5); 4], ..SuiteConfig::default() });
        for name in [check::LINEAR_SYSTEM, check::PARTNER_SYSTEM, check::LEGENDRE_CMA, check::B_IDENTITY] {
            prop_assert!(r.check(name).unwrap().pass, "{name}: {:?}", r.check(name));
        }
    }
}
