use henonlab_core::json::{laurent_from_json, laurent_to_json};
use henonlab_core::measure::{ma_measure, GreenGrid, GridSpec};
use henonlab_core::scalar::qint;
use henonlab_core::{
    Branch, ComplexHenon, Error, ExactLaurent, ExtRational, GreenBudget, HenonFamily, HybridNormParams, LaurentPoly,
    NAHenon, ValPoint, C2,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mono(e: i64, c: i64) -> ExactLaurent {
    LaurentPoly::monomial(e, qint(c, 0))
}

fn arb_laurent() -> impl Strategy<Value = ExactLaurent> {
    prop::collection::vec((-6i64..6, -9i64..9, -9i64..9), 0..5)
        .prop_map(|terms| LaurentPoly::from_terms(terms.into_iter().map(|(e, re, im)| (e, qint(re, im)))))
}

fn arb_order() -> impl Strategy<Value = ExtRational> {
    prop_oneof![9 => (-20i64..20).prop_map(ExtRational::int), 1 => Just(ExtRational::Infinity)]
}

fn arb_map() -> impl Strategy<Value = ComplexHenon> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.3f64..2.0, 0.0f64..6.28).prop_map(|(c_re, c_im, a_abs, a_arg)| {
        ComplexHenon::new(vec![Complex64::new(0.0, 0.0), Complex64::new(c_re, c_im)], Complex64::from_polar(a_abs, a_arg), 5.0)
            .expect("valid map")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laurent_json_round_trip(p in arb_laurent()) {
        prop_assert_eq!(laurent_from_json(&laurent_to_json(&p)).unwrap(), p);
    }

    #[test]
    fn valpoint_json_round_trip(u in arb_order(), v in arb_order()) {
        let w = ValPoint::new(u, v);
        prop_assert_eq!(ValPoint::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn green_plus_is_invariant(h in arb_map(), re in -40.0f64..40.0, im in -40.0f64..40.0, y in -3.0f64..3.0) {
        let z = C2::new(Complex64::new(re, im), Complex64::new(y, 0.0));
        let budget = GreenBudget::new(1e-12, 60);
        let g0 = h.green_certified(z, budget, Branch::Plus);
        let g1 = h.green_certified(h.apply(z), budget, Branch::Plus);
        let slack = g1.err_bound + 2.0 * g0.err_bound + 1e-9;
        prop_assert!((g1.value - 2.0 * g0.value).abs() <= slack, "{} vs {}", g1.value, 2.0 * g0.value);
    }

    #[test]
    fn green_is_nonnegative_with_finite_bound(h in arb_map(), re in -3.0f64..3.0, y in -3.0f64..3.0) {
        let g = h.green_certified_max(C2::from_re(re, y), GreenBudget::new(1e-10, 40));
        prop_assert!(g.value() >= 0.0);
        prop_assert!(g.err_bound().is_finite());
    }

    /// Whenever one term dominates, the tropical step is the order of the
    /// exact image.
    #[test]
    fn tropical_step_matches_exact_orders(u in -12i64..12, v in -12i64..12, seed in any::<u64>()) {
        let family = HenonFamily::new(vec![mono(0, 0), mono(-1, -1)], mono(0, 1), 5.0).unwrap();
        let h = NAHenon::new(&family, HybridNormParams::new(0.5).unwrap());
        let w = ValPoint::ints(u, v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = h.representative(&w, &mut rng).unwrap();
        for branch in [Branch::Plus, Branch::Minus] {
            match h.tropical_step_branch(&w, branch) {
                Ok(img) => prop_assert_eq!(&h.orbit_orders(&p, 1, branch).unwrap()[1], &img),
                Err(Error::TropicalTie { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}

#[test]
fn integration_is_linear_and_normalized() {
    let h = ComplexHenon::new(vec![Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)], Complex64::new(0.3, 0.0), 5.0)
        .unwrap();
    let spec = GridSpec::around(2.0, 14, 1.5).unwrap();
    let grid = GreenGrid::from_fn(spec, |z| h.green_n_max(z, 20)).unwrap();
    let m = ma_measure(&grid).unwrap();
    assert!(m.total_mass > 0.0);
    assert!((m.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
    let f = |z: C2| z.x.norm_sqr();
    let g = |z: C2| z.y.re;
    let lhs = m.integrate(|z| 2.0 * f(z) - 3.0 * g(z));
    let rhs = 2.0 * m.integrate(f) - 3.0 * m.integrate(g);
    assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
}
