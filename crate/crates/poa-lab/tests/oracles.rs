//! Values computed by independent oracles (hand derivations evaluated in
//! this file) and frozen.

use poa_lab::bounds::{
    beta, bracket_threshold, gamma_bound, gamma_identical, gamma_param, poly_phi, unweighted_closed_form,
    LatencyClass, Metric, MetricKind, Mode, Witness,
};
use poa_lab::caps::Caps;
use poa_lab::dynamics::WalkMode;
use poa_lab::generators::{
    gen_identical_unweighted_walk, gen_identical_weighted, gen_unweighted_multipartite, gen_weighted_tree,
    identical_walk_ratio, TreeVariant,
};
use poa_lab::LatencyFunction;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Case-1 tree with unit level multiplier: every level contributes k f(k)
/// to SUM(σ); σ* puts one incoming player on each inner level (cost f(1))
/// plus the top level's self-loops and incoming player.
fn tree_ratio_oracle(s: usize, k: f64, d: i32) -> f64 {
    let f = |t: f64| t.powi(d);
    let sigma = 2.0 * s as f64 * k * f(k);
    let star = (2 * s - 2) as f64 * f(1.0) + (k + 1.0) * f(k + 1.0);
    sigma / star
}

#[test]
fn weighted_tree_ratio_matches_hand_derivation() {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let oracle = tree_ratio_oracle(3, phi, 1);
    // Frozen: 6φ² / (4 + (φ+1)²) = (5 + √5) / 5.
    assert!(close(oracle, 1.447_213_595_499_958, 1e-15), "{oracle}");
    let w = Witness::Case1 {
        k: poly_phi(Metric::exact(MetricKind::PoA), 1),
        o: 1.0,
        f: LatencyFunction::monomial(1),
    };
    let inst = gen_weighted_tree(3, 4, &w, 0.0, TreeVariant::Restricted, &Caps::default()).unwrap();
    assert!(close(inst.simulated_ratio(), oracle, 1e-9));
    let cf = inst.closed_form_sums.unwrap();
    assert!(close(cf.sigma / cf.optimum, oracle, 1e-9));
    assert!(close(inst.closed_form_ratio.unwrap().limit.unwrap(), phi * phi, 1e-9));
}

#[test]
fn multipartite_poa_case_two_limit() {
    // α1 = β(1) = 1 and α2 = -β(2) = 1 give (α1·2² + α2·1²) / (α1 + α2) = 5/2.
    let b = |k: f64| beta(Mode::Unweighted, Metric::exact(MetricKind::PoA), k, 1.0, &LatencyFunction::monomial(1)).unwrap();
    assert_eq!((b(1.0), b(2.0)), (1.0, -1.0));
    let cf = unweighted_closed_form(Metric::exact(MetricKind::PoA), 1, &Caps::default()).unwrap();
    assert_eq!(cf.value, 2.5);
    let inst = gen_unweighted_multipartite(8, &cf.witness, 0.0, &Caps::default()).unwrap();
    let r = inst.simulated_ratio();
    assert!((r - 2.5).abs() <= 0.02 * 2.5, "{r}");
}

#[test]
fn unweighted_cooperative_linear_is_seventeen_thirds() {
    let m = Metric::exact(MetricKind::CrCooperative);
    let f = LatencyFunction::monomial(1);
    // β(k) = -k² + (k+1)² - k² = 2k + 1 - k²: β(2) = 1, β(3) = -2.
    assert_eq!(beta(Mode::Unweighted, m, 2.0, 1.0, &f).unwrap(), 1.0);
    assert_eq!(beta(Mode::Unweighted, m, 3.0, 1.0, &f).unwrap(), -2.0);
    let g = gamma_bound(Mode::Unweighted, m, &LatencyClass::Polynomial(1), &Caps::default()).unwrap();
    assert!(close(g.value, 17.0 / 3.0, 1e-9));
    assert!(close(gamma_param(Mode::Unweighted, m, 1.0, 2.0, 1.0, &f).unwrap(), 5.0, 1e-15));
}

#[test]
fn nested_sets_ratio_by_hand() {
    // o = (1, 1, 2): |E| = 12, 6, 3, 2 (E_0 ⊃ E_1 ⊃ E_2 ⊃ E_3).
    // σ: 3 resources end at depth 1, 1 at depth 2, 2 at depth 3, so
    // SUM = 3·1 + 1·4 + 2·9 = 25.
    // σ*: type-i players spread o_i per resource over E_{i-1} \ E_i:
    // 6·1 + 3·1 + 1·4 = 13.
    let o = [1u64, 1, 2];
    let f = LatencyFunction::monomial(1);
    let r = identical_walk_ratio(&o, &f).unwrap();
    assert!(close(r, 25.0 / 13.0, 1e-15), "{r}");
    for mode in [WalkMode::Selfish, WalkMode::Cooperative] {
        let inst = gen_identical_unweighted_walk(&o, &f, mode, &Caps::default()).unwrap();
        let (a, b) = inst.simulated_sums();
        assert_eq!((a, b), (25.0, 13.0));
    }
}

#[test]
fn red_blue_instance_matches_gamma_formula() {
    let f = LatencyFunction::monomial(1);
    let (x, eps, m, h) = (8.0, 0.2, 16usize, 7usize);
    // [x] solves 8 = 1.2 (4 + t) → t = 8/3.
    let br = bracket_threshold(&f, eps, x).unwrap();
    assert!(close(br, 8.0 / 3.0, 1e-10));
    let lam = h as f64 / m as f64;
    let c = lam * x + (1.0 - lam) * br;
    let oracle = (lam * x * x + (1.0 - lam) * br * br) / (c * c);
    assert!(close(oracle, 1.28, 1e-12));
    assert!(close(gamma_identical(eps, &f, x, lam).unwrap(), oracle, 1e-9));
    let inst = gen_identical_weighted(x, m, eps, &f, Some(h), &Caps::default()).unwrap();
    let (a, b) = inst.simulated_sums();
    assert!(close(a, 512.0, 1e-12) && close(b, 400.0, 1e-12), "{a} {b}");
}
