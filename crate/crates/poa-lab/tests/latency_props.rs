use poa_lab::numeric::adaptive_simpson;
use poa_lab::LatencyFunction;
use proptest::prelude::*;

fn poly() -> impl Strategy<Value = LatencyFunction> {
    prop::collection::vec(0.0f64..3.0, 1..5)
        .prop_filter("non-zero", |c| c.iter().any(|&a| a > 0.0))
        .prop_map(|c| LatencyFunction::polynomial(c).unwrap())
}

fn grid(hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| hi * i as f64 / n as f64).collect()
}

proptest! {
    #[test]
    fn eval_is_non_decreasing(f in poly(), hi in 0.1f64..50.0) {
        let g = grid(hi, 200);
        prop_assert!(f.is_non_decreasing(&g));
        for w in g.windows(2) {
            prop_assert!(f.eval(w[0]) <= f.eval(w[1]));
        }
    }

    #[test]
    fn integral_is_non_decreasing_and_convex(f in poly(), hi in 0.1f64..20.0) {
        let g = grid(hi, 100);
        let v: Vec<f64> = g.iter().map(|&k| f.integral(k)).collect();
        let scale = v.last().unwrap().abs().max(1.0);
        for w in v.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * scale);
        }
        for w in v.windows(3) {
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9 * scale);
        }
    }

    #[test]
    fn marginal_dominates_weight_times_latency(f in poly(), k in 0.0f64..30.0, w in 0.01f64..10.0) {
        let m = f.marginal(k, w);
        let lower = w * f.eval(k);
        prop_assert!(m >= lower - 1e-9 * m.abs().max(1.0), "{m} < {lower}");
    }

    #[test]
    fn closed_form_integral_matches_quadrature(f in poly(), k in 0.0f64..100.0) {
        let exact = f.integral(k);
        let quad = adaptive_simpson(&|t| f.eval(t), 0.0, k, 1e-10);
        prop_assert!((exact - quad).abs() <= 1e-8 * exact.abs().max(1e-12), "{exact} vs {quad}");
        let q2 = f.integral_by_quadrature(k);
        prop_assert!((exact - q2).abs() <= 1e-8 * exact.abs().max(1e-12));
    }

    #[test]
    fn polynomials_are_semi_convex(f in poly()) {
        prop_assert!(f.is_semi_convex(&grid(10.0, 100)).unwrap());
    }

    #[test]
    fn scalings_act_on_the_right_axis(f in poly(), a in 0.1f64..5.0, x in 0.0f64..10.0) {
        let o = f.scale_ordinate(a).unwrap();
        let s = f.scale_abscissa(a).unwrap();
        let fx = f.eval(x);
        prop_assert!((o.eval(x) - a * fx).abs() <= 1e-12 * (a * fx).max(1.0));
        let fax = f.eval(a * x);
        prop_assert!((s.eval(x) - fax).abs() <= 1e-10 * fax.max(1.0));
    }

    #[test]
    fn json_round_trip(f in poly()) {
        let s = serde_json::to_string(&f).unwrap();
        let back: LatencyFunction = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, f);
    }
}

#[test]
fn linear_integral_at_the_selfish_witness() {
    // ∫_0^k (1+t) dt = k + k²/2 with k = 1+√3, i.e. 3 + 2√3.
    let f = LatencyFunction::polynomial(vec![1.0, 1.0]).unwrap();
    let k = 1.0 + 3f64.sqrt();
    let oracle = adaptive_simpson(&|t| 1.0 + t, 0.0, k, 1e-12);
    assert!((f.integral(k) - oracle).abs() < 1e-10);
    assert!((f.integral(k) - (3.0 + 2.0 * 3f64.sqrt())).abs() < 1e-12);
}
