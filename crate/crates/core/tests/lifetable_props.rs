use annuity_bounds::lifetable::*;
use annuity_bounds::quadrature::GaussLegendre;
use proptest::prelude::*;

fn survival(probs: Vec<f64>) -> AnnualSurvival {
    AnnualSurvival::new(40, probs).unwrap()
}

fn probs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..1.0, 1..8)
}

proptest! {
    #[test]
    fn integer_times_hit_the_cumulative_product(p in probs()) {
        let s = survival(p.clone());
        for kind in FaaKind::ALL {
            let mut prod = 1.0;
            for (j, pj) in p.iter().enumerate() {
                prop_assert!((faa_survival(&s, kind, j as f64).unwrap() - prod).abs() <= 1e-12);
                prod *= pj;
            }
            prop_assert!((faa_survival(&s, kind, p.len() as f64).unwrap() - prod).abs() <= 1e-12);
        }
    }

    #[test]
    fn survival_is_non_increasing(p in probs(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let s = survival(p.clone());
        let n = p.len() as f64;
        let (t0, t1) = if a <= b { (a * n, b * n) } else { (b * n, a * n) };
        for kind in FaaKind::ALL {
            prop_assert!(faa_survival(&s, kind, t1).unwrap() <= faa_survival(&s, kind, t0).unwrap() + 1e-15);
        }
    }

    #[test]
    fn hazard_integrates_back_to_survival(p in probs(), frac in 0.0f64..1.0) {
        let s = survival(p.clone());
        let t = frac * p.len() as f64;
        let gl = GaussLegendre::new(32);
        for kind in FaaKind::ALL {
            // piecewise over whole years keeps the integrand smooth
            let mut cum = 0.0;
            let mut lo = 0.0;
            while lo < t {
                let hi = (lo.floor() + 1.0).min(t);
                cum += gl.integrate(|u| faa_hazard(&s, kind, u).unwrap(), lo, hi);
                lo = hi;
            }
            let direct = faa_survival(&s, kind, t).unwrap();
            prop_assert!(((-cum).exp() - direct).abs() <= 1e-8, "{kind:?} t={t}");
        }
    }

    #[test]
    fn makeham_ratios_follow_the_integrated_hazard(a in 0.0f64..0.01, b in 1e-6f64..1e-4, c in 1.02f64..1.12, x in 20i64..60) {
        let t = make_makeham_table(a, b, c, x, 30, 1e5).unwrap();
        let counts = t.counts();
        for k in 0..30 {
            let age = (x + k as i64) as f64;
            // Simpson on the hazard itself, independent of the closed form
            let m = 200;
            let h = 1.0 / m as f64;
            let f = |s: f64| a + b * c.powf(s);
            let mut acc = f(age) + f(age + 1.0);
            for i in 1..m {
                acc += f(age + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let expected = (-acc * h / 3.0).exp();
            prop_assert!((counts[k + 1] / counts[k] - expected).abs() <= 1e-10);
        }
    }

    #[test]
    fn csv_round_trip(p in prop::collection::vec(0.5f64..1.0, 1..20), base in 0i64..90) {
        let mut counts = vec![1e5];
        for q in &p {
            counts.push(counts.last().unwrap() * q);
        }
        let t = LifeTable::new(base, counts).unwrap();
        prop_assert_eq!(parse_life_table(&t.to_csv()).unwrap(), t);
    }
}

#[test]
fn fractional_assumptions_are_ordered() {
    for p in [0.5, 0.8, 0.9, 0.99] {
        let s = survival(vec![p]);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let udd = faa_survival(&s, FaaKind::Udd, t).unwrap();
            let cfm = faa_survival(&s, FaaKind::Cfm, t).unwrap();
            let bal = faa_survival(&s, FaaKind::Balducci, t).unwrap();
            assert!(udd >= cfm && cfm >= bal, "p={p} t={t}");
        }
    }
}

#[test]
fn parse_errors_name_the_row() {
    assert!(matches!(
        parse_life_table("age,lx\n40,100\n42,90"),
        Err(annuity_bounds::Error::NonConsecutiveAges { row: 2, .. })
    ));
    assert!(matches!(
        parse_life_table("age,lx\n40,100\n41,101"),
        Err(annuity_bounds::Error::IncreasingCount { row: 2, .. })
    ));
    assert!(matches!(
        parse_life_table("40,100\n41,90"),
        Err(annuity_bounds::Error::MissingHeader { .. })
    ));
    assert!(matches!(
        parse_life_table("age,lx\n40,100\n41,0"),
        Err(annuity_bounds::Error::NonPositiveCount { row: 2, .. })
    ));
}

#[test]
fn bundled_table_is_the_default_makeham_table() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/makeham_default.csv")).unwrap();
    assert_eq!(parse_life_table(&text).unwrap(), default_table());
}
