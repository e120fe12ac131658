//! Property-based invariants over random grid measures.

mod common;

use gridmetric::fourier_metrics::{
    converged_pfm, d_sup, pfm, tv_like, MetricParams, QuadratureRule,
};
use gridmetric::spectrum::transform;
use gridmetric::wasserstein::wp_exact;
use gridmetric::{GridMeasure, Translation};
use proptest::prelude::*;

/// Probability measure on an `n×n` grid with some zero cells.
fn measure(n: usize) -> impl Strategy<Value = GridMeasure> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n * n)
        .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(move |w| GridMeasure::new(2, n, w).unwrap().normalized().unwrap())
}

fn measure_1d(n: usize) -> impl Strategy<Value = GridMeasure> {
    prop::collection::vec(0.01f64..1.0, n)
        .prop_map(move |w| GridMeasure::new(1, n, w).unwrap().normalized().unwrap())
}

fn w(mu: &GridMeasure, nu: &GridMeasure, p: u32) -> f64 {
    wp_exact(mu, nu, p).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wasserstein_is_a_metric(a in measure(4), b in measure(4), c in measure(4)) {
        for p in [1, 2] {
            prop_assert!(w(&a, &a, p).abs() < 1e-12);
            prop_assert!((w(&a, &b, p) - w(&b, &a, p)).abs() < 1e-12);
            prop_assert!(w(&a, &c, p) <= w(&a, &b, p) + w(&b, &c, p) + 1e-12);
        }
    }

    #[test]
    fn w2_squared_bounded_by_diameter_times_w1(a in measure(5), b in measure(5)) {
        let w1 = w(&a, &b, 1);
        let w2 = w(&a, &b, 2);
        prop_assert!(w1 <= w2 + 1e-12);
        prop_assert!(w2 * w2 <= 2f64.sqrt() * w1 + 1e-12);
    }

    #[test]
    fn transport_plans_certify(a in measure(4), b in measure(4)) {
        let (_, plan) = wp_exact(&a, &b, 2).unwrap();
        prop_assert!(plan.certify().is_valid(plan.objective));
    }

    #[test]
    fn one_dimensional_w1_matches_cdf(a in measure_1d(12), b in measure_1d(12)) {
        prop_assert!((w(&a, &b, 1) - common::cdf_w1(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn fourier_metric_is_symmetric_and_vanishes_on_diagonal(a in measure(4), b in measure(4)) {
        let params = MetricParams::f12(4);
        prop_assert_eq!(pfm(&a, &a, &params).unwrap(), 0.0);
        let ab = pfm(&a, &b, &params).unwrap();
        let ba = pfm(&b, &a, &params).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1e-300));
    }

    #[test]
    fn tv_like_is_a_metric_and_matches_unit_lattice(a in measure(4), b in measure(4), c in measure(4)) {
        let ab = tv_like(&a, &b).unwrap();
        prop_assert!(tv_like(&a, &c).unwrap() <= ab + tv_like(&b, &c).unwrap() + 1e-15);
        let params = MetricParams::new(0.0, 2.0, 0.0, 1).with_rule(QuadratureRule::Riemann);
        prop_assert!((pfm(&a, &b, &params).unwrap() - ab).abs() < 1e-10);
    }

    #[test]
    fn f12_below_w1(a in measure(4), b in measure(4)) {
        let f = converged_pfm(&a, &b, &MetricParams::f12(2)).unwrap();
        prop_assert!(f.value <= w(&a, &b, 1) + 1e-9 + f.allowance());
    }

    #[test]
    fn lattice_sup_grows_under_refinement(a in measure(4), b in measure(4)) {
        // the r-lattice is contained in the 2r-lattice
        let coarse = d_sup(&a, &b, 1.0, 2).unwrap();
        let fine = d_sup(&a, &b, 1.0, 4).unwrap();
        prop_assert!(coarse <= fine * (1.0 + 1e-12));
    }

    #[test]
    fn centers_are_affine(a in measure(5), b in measure(5), t in 0.0f64..1.0, s0 in -1.0f64..1.0, s1 in -1.0f64..1.0) {
        let ca = a.center().unwrap();
        let cb = b.center().unwrap();
        let mix: Vec<f64> = a.weights().iter().zip(b.weights()).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        let cm = GridMeasure::new(2, 5, mix).unwrap().center().unwrap();
        for i in 0..2 {
            prop_assert!((cm.0[i] - ((1.0 - t) * ca.0[i] + t * cb.0[i])).abs() < 1e-12);
        }
        let tau = Translation(vec![s0, s1]);
        let moved = a.translate(tau.clone()).unwrap().center().unwrap();
        let from_spectrum = transform(&a, 2).unwrap().translated(&tau).center().unwrap();
        for i in 0..2 {
            prop_assert!((moved.0[i] - ca.0[i] - tau.0[i]).abs() < 1e-12);
            prop_assert!((from_spectrum.0[i] - moved.0[i]).abs() < 1e-9);
        }
    }
}
