use std::ffi::{CStr, CString};
use std::ptr;

use annuity_bounds_ffi::*;

fn paper_market() -> AbMarketParams {
    AbMarketParams {
        kappa: 0.1,
        sigma_r: 0.02,
        sigma_s: 0.2,
        rho: 0.3,
        r0: 0.01,
        curve_a: 0.015,
        curve_b: -0.0105,
        curve_c: 0.02,
        curve_d: 0.75,
        a0: 100.0,
        pi_s: 0.6,
        pi_p: 0.2,
    }
}

fn makeham() -> *mut AbLifeTable {
    let mut t = ptr::null_mut();
    assert_eq!(
        unsafe { ab_life_table_makeham(0.0002, 3e-5, 1.09, 20, 90, 100_000.0, &mut t) },
        AbStatus::Ok
    );
    t
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ab_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn survival_is_between_zero_and_one_and_matches_table_at_integers() {
    let table = makeham();
    let mut s1 = 0.0;
    let mut s_half = 0.0;
    unsafe {
        assert_eq!(ab_survival(table, 60, AbFaa::Udd, 1.0, &mut s1), AbStatus::Ok);
        assert_eq!(ab_survival(table, 60, AbFaa::Udd, 0.5, &mut s_half), AbStatus::Ok);
        ab_life_table_free(table);
    }
    assert!(s1 < s_half && s_half < 1.0);
    assert!(((1.0 + s1) / 2.0 - s_half).abs() < 1e-14);
}

#[test]
fn gmab_strict_bounds_collapse_and_match_faa_price() {
    let table = makeham();
    let mut market = ptr::null_mut();
    let contract = AbContract {
        product: AbProduct::Gmab,
        rg: 0.03,
        age: 60,
        maturity: 5.0,
    };
    let mut strict = AbStrictResult::default();
    let mut faa = 0.0;
    unsafe {
        assert_eq!(ab_market_new(&paper_market(), &mut market), AbStatus::Ok);
        assert_eq!(ab_strict_bounds(market, table, &contract, &mut strict), AbStatus::Ok);
        assert_eq!(
            ab_faa_price(market, table, &contract, AbFaa::Cfm, &mut faa),
            AbStatus::Ok
        );
        ab_market_free(market);
        ab_life_table_free(table);
    }
    assert_eq!(strict.lower, strict.upper);
    assert!((strict.lower - faa).abs() < 1e-9 * faa);
    assert_eq!(strict.assumptions_hold, 1);
}

#[test]
fn relaxed_bounds_bracket_the_baseline() {
    let table = makeham();
    let mut market = ptr::null_mut();
    let mut flat = paper_market();
    flat.sigma_r = 0.0;
    flat.rho = 0.0;
    flat.curve_b = 0.01;
    flat.curve_c = 0.0;
    flat.curve_d = 0.0;
    let contract = AbContract {
        product: AbProduct::Gmdb,
        rg: 0.03,
        age: 60,
        maturity: 3.0,
    };
    let mut r = AbRelaxedResult::default();
    let mut base = 0.0;
    unsafe {
        assert_eq!(ab_market_new(&flat, &mut market), AbStatus::Ok);
        let s = ab_relaxed_bounds(
            market,
            table,
            &contract,
            AbFaa::Balducci,
            1.0,
            AbConstraints::Full,
            &mut r,
        );
        assert_eq!(s, AbStatus::Ok, "{}", last_error());
        assert_eq!(
            ab_faa_price(market, table, &contract, AbFaa::Balducci, &mut base),
            AbStatus::Ok
        );
        ab_market_free(market);
        ab_life_table_free(table);
    }
    assert!(r.lower <= base + 1e-2 && base <= r.upper + 1e-2, "{r:?} vs {base}");
    assert!(r.residual_max <= 1e-3);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut t = ptr::null_mut();
    let bad = CString::new("age,lx\n60,100\n62,90\n").unwrap();
    unsafe {
        assert_eq!(ab_life_table_from_csv(bad.as_ptr(), &mut t), AbStatus::LifeTable);
        assert!(t.is_null());
        assert!(last_error().contains("does not follow"));
        assert_eq!(ab_life_table_from_csv(ptr::null(), &mut t), AbStatus::NullPointer);
        assert_eq!(
            ab_survival(ptr::null(), 60, AbFaa::Udd, 1.0, ptr::null_mut()),
            AbStatus::NullPointer
        );
    }
    let table = makeham();
    let mut s = 0.0;
    unsafe {
        assert_eq!(
            ab_survival(table, 5, AbFaa::Udd, 1.0, &mut s),
            AbStatus::InvalidArgument
        );
        ab_survival(table, 60, AbFaa::Udd, 1.0, &mut s);
        assert_eq!(last_error(), "");
        ab_life_table_free(table);
        ab_life_table_free(ptr::null_mut());
    }
    let mut market = ptr::null_mut();
    let mut p = paper_market();
    p.pi_s = 0.9;
    assert_eq!(unsafe { ab_market_new(&p, &mut market) }, AbStatus::InvalidArgument);
    assert!(market.is_null());
}

#[test]
fn run_config_matches_exit_code_classes() {
    let json = r#"{
  "life_table": {"makeham": {"a": 0.0002, "b": 3e-5, "c": 1.09, "base_age": 20, "span": 90}},
  "market": {"kappa": 0.1, "sigma_r": 0.02, "sigma_s": 0.2, "rho": 0.3, "r0": 0.01,
             "curve": {"a": 0.015, "b": -0.0105, "c": 0.02, "d": 0.75}},
  "fund": {"a0": 100, "pi_s": 0.6, "pi_p": 0.2},
  "contracts": {"products": ["gmib"], "rg": 0.03, "ages": [40, 60], "maturities": [1, 5]},
  "mode": "strict-bounds"
}"#;
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    let csv = unsafe {
        assert_eq!(ab_run_config(c.as_ptr(), ptr::null(), &mut out), AbStatus::Ok);
        let s = CStr::from_ptr(out).to_str().unwrap().to_owned();
        ab_string_free(out);
        s
    };
    assert!(csv.starts_with("# annuity-bounds"));
    assert_eq!(csv.lines().count(), 2 + 4);

    let broken = CString::new(json.replace("strict-bounds", "nonsense")).unwrap();
    assert_eq!(
        unsafe { ab_run_config(broken.as_ptr(), ptr::null(), &mut out) },
        AbStatus::InvalidArgument
    );
    assert!(out.is_null());
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
