mod common;

use common::*;
use hkmetric::curvature::{frame_curvature_of, riemann_fd_oracle, Curvature, MetricField};
use hkmetric::geometry::{metric_at, LocalGeometry, NEAR_LOCUS_GUARD};
use hkmetric::jets::{fd_oracle, RealChartPoint};

fn guarded(n: usize, seed: u64) -> Vec<LocalGeometry> {
    let pot = two_mode();
    points(n, seed, 1.0)
        .iter()
        .filter_map(|p| LocalGeometry::new(&pot, 0.0, p, NEAR_LOCUS_GUARD).ok())
        .filter(|g| g.locus > 0.0)
        .collect()
}

/// Central differences at steps `h` and `h/2`, Richardson-combined to cancel
/// the `O(h²)` truncation term.
fn richardson(f: impl Fn(&RealChartPoint) -> f64 + Copy, at: &RealChartPoint, h: f64) -> ([f64; 4], [f64; 16]) {
    let (coarse, fine) = (fd_oracle(f, at, h), fd_oracle(f, at, 0.5 * h));
    (
        std::array::from_fn(|k| (4.0 * fine.grad[k] - coarse.grad[k]) / 3.0),
        std::array::from_fn(|n| (4.0 * fine.hess[n / 4][n % 4] - coarse.hess[n / 4][n % 4]) / 3.0),
    )
}

/// Jet vs finite differences for the gradient and Hessian tensors of the
/// metric, each relative to its largest jet entry.
fn metric_derivative_error(geo: &LocalGeometry, step: f64) -> (f64, f64) {
    let pot = two_mode();
    let m = geo.metric_taylor().unwrap();
    let (mut jet_g, mut fd_g, mut jet_h, mut fd_h) = ([0.0; 64], [0.0; 64], [0.0; 256], [0.0; 256]);
    for i in 0..4 {
        for j in 0..4 {
            let (grad, hess) = richardson(|p: &RealChartPoint| metric_at(&pot, 0.0, p).unwrap().0[i][j], &geo.at, step);
            for k in 0..4 {
                jet_g[16 * i + 4 * j + k] = m[i][j].grad[k].re;
                fd_g[16 * i + 4 * j + k] = grad[k];
            }
            for n in 0..16 {
                jet_h[64 * i + 16 * j + n] = m[i][j].h(n / 4, n % 4).re;
                fd_h[64 * i + 16 * j + n] = hess[n];
            }
        }
    }
    (rel_max_diff(&fd_g, &jet_g), rel_max_diff(&fd_h, &jet_h))
}

/// Finite differences converge to the jets; near the singular locus the
/// step has to shrink before they do, so each point takes its best step.
/// Second differences there lose about five digits to rounding.
#[test]
fn metric_jets_match_finite_differences() {
    let pts = guarded(200, 11);
    assert!(pts.len() >= 20);
    let mut worst = (0.0f64, 0.0f64);
    for geo in pts.iter().take(25) {
        let best = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| metric_derivative_error(geo, h))
            .fold((f64::INFINITY, f64::INFINITY), |m, e| (m.0.min(e.0), m.1.min(e.1)));
        worst = (worst.0.max(best.0), worst.1.max(best.1));
    }
    assert!(worst.0 <= 1e-7 && worst.1 <= 1e-4, "{worst:?}");
}

#[test]
fn well_resolved_points_match_at_the_default_step() {
    for geo in guarded(200, 11).iter().filter(|g| g.locus > 0.1 * g.abc.c.re * g.abc.c.re).take(8) {
        let (g, h) = metric_derivative_error(geo, 1e-4);
        assert!(g <= 1e-6 && h <= 1e-6, "{g:e} {h:e}");
    }
}

#[test]
fn riemann_matches_difference_of_christoffels() {
    let pot = two_mode();
    for geo in guarded(200, 13).iter().take(12) {
        let exact = frame_curvature_of(geo).unwrap().riemann_up_chart();
        let flat = |t: &[[[[f64; 4]; 4]; 4]; 4]| -> [f64; 256] { std::array::from_fn(|n| t[n / 64][(n / 16) % 4][(n / 4) % 4][n % 4]) };
        let err = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| rel_max_diff(&flat(&riemann_fd_oracle(&pot, 0.0, &geo.at, h).unwrap()), &flat(&exact)))
            .fold(f64::INFINITY, f64::min);
        assert!(err <= 1e-5, "{err:e} at {:?}", geo.at);
    }
}

#[test]
fn chart_and_frame_curvature_agree_on_well_conditioned_points() {
    for geo in guarded(200, 17).iter().filter(|g| g.locus > 1e-1 * g.abc.c.re * g.abc.c.re).take(8) {
        let chart = Curvature::from_metric(&MetricField::from_taylor(&geo.metric_taylor().unwrap())).unwrap();
        let frame = frame_curvature_of(geo).unwrap().riemann_chart();
        let flat = |t: &[[[[f64; 4]; 4]; 4]; 4]| -> [f64; 256] { std::array::from_fn(|n| t[n / 64][(n / 16) % 4][(n / 4) % 4][n % 4]) };
        assert!(rel_max_diff(&flat(&chart.riemann), &flat(&frame)) <= 1e-7);
    }
}
