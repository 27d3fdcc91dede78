use poa_lab::bounds::{
    beta, bracket_threshold, corollary_poly_identical, dual_certificate_check, find_witness,
    gamma_bound, gamma_identical, gamma_param, identical_bound, poly_gamma_weighted, poly_phi,
    unweighted_closed_form, ClosedFormKind, LatencyClass, Metric, MetricKind, Mode,
};
use poa_lab::caps::Caps;
use poa_lab::LatencyFunction;
use proptest::prelude::*;

const KINDS: [MetricKind; 3] = [MetricKind::PoA, MetricKind::CrSelfish, MetricKind::CrCooperative];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn unweighted_closed_form_equals_grid_search() {
    let caps = Caps::default();
    for d in 1..=8 {
        for eps in [0.0, 0.1, 1.0] {
            for kind in [MetricKind::PoA, MetricKind::CrCooperative] {
                let m = Metric::new(kind, eps).unwrap();
                let cf = unweighted_closed_form(m, d, &caps).unwrap();
                assert_eq!(cf.kind, ClosedFormKind::Tight);
                let grid = gamma_bound(Mode::Unweighted, m, &LatencyClass::Polynomial(d), &caps).unwrap();
                assert!(
                    rel(cf.value, grid.value) <= 1e-6,
                    "d={d} eps={eps} {kind:?}: closed {} grid {}",
                    cf.value,
                    grid.value
                );
            }
        }
    }
}

#[test]
fn selfish_unweighted_closed_form_is_a_lower_bound() {
    let caps = Caps::default();
    for d in 1..=3 {
        let m = Metric::exact(MetricKind::CrSelfish);
        let cf = unweighted_closed_form(m, d, &caps).unwrap();
        assert_eq!(cf.kind, ClosedFormKind::LowerBound);
        let grid = gamma_bound(Mode::Unweighted, m, &LatencyClass::Polynomial(d), &caps).unwrap();
        assert!(cf.value <= grid.value * (1.0 + 1e-9));
        assert!(cf.value <= poly_gamma_weighted(m, d));
    }
}

#[test]
fn weighted_bound_grows_with_degree() {
    for kind in KINDS {
        let v: Vec<f64> = (1..=8).map(|d| poly_gamma_weighted(Metric::exact(kind), d)).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{kind:?}: {v:?}");
    }
}

#[test]
fn certificates_hold_over_dense_grids() {
    let caps = Caps::default();
    for d in 1..=3 {
        for kind in KINDS {
            let m = Metric::exact(kind);
            let b = gamma_bound(Mode::Weighted, m, &LatencyClass::Polynomial(d), &caps).unwrap();
            let mut tuples = Vec::with_capacity(10_000);
            for i in 0..100 {
                for j in 0..100 {
                    let k = 0.05 + 0.2 * i as f64;
                    let o = 0.05 + 0.2 * j as f64;
                    tuples.push((k, o, LatencyFunction::monomial(1 + (i + j) % d.max(1))));
                }
            }
            for g in 0..=d {
                tuples.push((1.7, 1.0, LatencyFunction::monomial(g)));
            }
            let rep = dual_certificate_check(Mode::Weighted, m, b.x, b.value, &tuples).unwrap();
            assert!(rep.feasible, "d={d} {kind:?}: {:?}", rep.violations.first());
            let low = dual_certificate_check(Mode::Weighted, m, b.x, b.value * 0.99, &tuples).unwrap();
            assert!(!low.feasible);
        }
    }
}

#[test]
fn witness_sandwich() {
    let caps = Caps::default();
    for (mode, d) in [(Mode::Weighted, 1), (Mode::Weighted, 2), (Mode::Unweighted, 1), (Mode::Unweighted, 2)] {
        for kind in KINDS {
            let m = Metric::exact(kind);
            let class = LatencyClass::Polynomial(d);
            let bound = gamma_bound(mode, m, &class, &caps).unwrap();
            for frac in [0.5, 0.9, 0.999] {
                let w = find_witness(mode, m, &class, bound.value * frac, &caps).unwrap();
                w.validate(mode, m).unwrap();
                assert!(w.value() > bound.value * frac);
                assert!(w.value() <= bound.value * (1.0 + 1e-6));
            }
            assert!(find_witness(mode, m, &class, bound.value * 1.01, &caps).is_err());
        }
    }
}

#[test]
fn identical_bound_of_mixed_polynomials_is_dominated() {
    for (d, coeffs) in [(1, vec![1.0, 1.0]), (2, vec![0.5, 0.0, 2.0]), (3, vec![1.0, 1.0, 1.0, 1.0])] {
        let f = LatencyFunction::polynomial(coeffs).unwrap();
        let v = identical_bound(0.0, &f).unwrap().value;
        let (_, c) = corollary_poly_identical(d).unwrap();
        assert!(v <= c * (1.0 + 1e-9), "d={d}: {v} > {c}");
    }
}

proptest! {
    #[test]
    fn weighted_poa_beta_decreases_after_sign_change(d in 1usize..6, eps in 0.0f64..1.0, o in 0.5f64..3.0) {
        let f = LatencyFunction::monomial(d);
        let m = Metric::new(MetricKind::PoA, eps).unwrap();
        let b = |k: f64| beta(Mode::Weighted, m, k, o, &f).unwrap();
        let mut k = 0.01;
        while b(k) > 0.0 { k *= 1.1; }
        let mut prev = b(k);
        for _ in 0..50 {
            k *= 1.05;
            let cur = b(k);
            prop_assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn phi_solves_its_equation(d in 1usize..9, eps in 0.0f64..2.0) {
        for kind in KINDS {
            let m = Metric::new(kind, eps).unwrap();
            let k = poly_phi(m, d);
            // At the root, β(k, 1, t^d) = 0 in the weighted model.
            let f = LatencyFunction::monomial(d);
            let b = beta(Mode::Weighted, m, k, 1.0, &f).unwrap();
            prop_assert!(b.abs() <= 1e-9 * k.powi(d as i32 + 1), "{kind:?} d={d}: beta {b}");
            let g = gamma_param(Mode::Weighted, m, 3.0, k, 1.0, &f).unwrap();
            prop_assert!(rel(g, poly_gamma_weighted(m, d)) <= 1e-9);
        }
    }

    #[test]
    fn bracket_is_half_for_exact_equilibria(d in 1usize..5, c in 0.0f64..2.0, x in 0.01f64..1000.0) {
        let mut coeffs = vec![c];
        coeffs.extend(std::iter::repeat(0.0).take(d - 1));
        coeffs.push(1.0);
        let f = LatencyFunction::polynomial(coeffs).unwrap();
        prop_assert!((bracket_threshold(&f, 0.0, x).unwrap() - x / 2.0).abs() <= 1e-10 * x.max(1.0));
    }

    #[test]
    fn gamma_identical_degenerates_at_the_ends(d in 1usize..6, x in 0.1f64..50.0) {
        let f = LatencyFunction::monomial(d);
        for l in [1e-7, 1.0 - 1e-7] {
            let g = gamma_identical(0.0, &f, x, l).unwrap();
            prop_assert!((g - 1.0).abs() < 1e-3, "λ={l}: {g}");
        }
    }
}
