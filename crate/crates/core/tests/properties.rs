use proptest::prelude::*;

use idk_core::expr::{parse, Expr};
use idk_core::forces::{dainelli_forces, eta_from_forces};
use idk_core::helmholtz::{assess, constant_multiplier_residual};
use idk_core::scalar::rat;
use idk_core::{Bindings, CurveFamily, EtaField, Metric, Rect};

/// A polynomial of total degree at most 4 from up to 15 small rational
/// coefficients.
fn poly4() -> impl Strategy<Value = Expr> {
    prop::collection::vec((-6i64..=6, 1i64..=4), 15).prop_map(|cs| {
        let mut e = Expr::zero();
        let mut k = 0;
        for d in 0..=4 {
            for i in 0..=d {
                let (n, q) = cs[k];
                k += 1;
                e = e + Expr::rat(n, q) * Expr::x().powi(i) * Expr::y().powi(d - i);
            }
        }
        e.normalize()
    })
}

fn families() -> Vec<CurveFamily> {
    ["x*y", "x*y^2", "(1/2)*x^2 + y^2 + x"]
        .iter()
        .map(|f| CurveFamily::parse(f, Rect::square(0.5, 2.0)).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn eta_round_trip(eta in poly4()) {
        for fam in families() {
            let ff = dainelli_forces(&fam, &EtaField::unsampled(eta.clone()));
            let back = eta_from_forces(&fam, &ff).unwrap();
            prop_assert!((&back - &eta).is_zero(), "{} -> {}", eta, back);
        }
    }

    #[test]
    fn normalize_is_idempotent(e in poly4()) {
        let n = e.normalize();
        prop_assert_eq!(n.normalize(), n);
    }

    #[test]
    fn display_parses_back(e in poly4()) {
        let text = e.to_string();
        prop_assert!((&parse(&text).unwrap() - &e).is_zero(), "{}", text);
    }

    #[test]
    fn gradient_forces_satisfy_the_multiplier_condition(v in poly4(), a in 1i64..5, b in -3i64..4, c in 1i64..5) {
        // X, Y from g (X, Y) = -grad V
        let g = Metric::new_unchecked(rat(a, 1), rat(b, 1), rat(c, 1));
        prop_assume!(a * c - b * b != 0);
        let (vx, vy) = (v.diff(idk_core::Var::X), v.diff(idk_core::Var::Y));
        let det = Expr::constant(rat(a * c - b * b, 1));
        let x = (Expr::int(-c) * &vx + Expr::int(b) * &vy) / &det;
        let y = (Expr::int(b) * &vx - Expr::int(a) * &vy) / &det;
        let ff = idk_core::ForceField::new(x, y);
        prop_assert!(constant_multiplier_residual(&g, &ff).unwrap().is_zero());
    }

    #[test]
    fn sampled_assessment_sees_nonzero_sums(k in 1i64..20) {
        let terms = [Expr::x() * Expr::int(k), Expr::y()];
        let a = assess(&terms, &Rect::square(0.5, 2.0), &Bindings::new(), 16, 3);
        prop_assert!(!a.passes(1e-9, 1e-12));
    }
}
