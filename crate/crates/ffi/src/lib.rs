//! C interface. Objects are opaque handles created by `ab_*_new`/`ab_*_from_*`
//! and released with the matching `ab_*_free`. Every call returns an
//! [`AbStatus`]; on failure `ab_last_error` describes what went wrong on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use annuity_bounds::cli::{execute, provenance, LoadedConfig};
use annuity_bounds::lifetable::{
    annual_survival_probs, faa_survival, make_makeham_table, parse_life_table, FaaKind, LifeTable,
};
use annuity_bounds::market::{ContractKind, ContractSpec, FundParams, MarketParams, YieldCurveParams};
use annuity_bounds::relaxed::{
    optimize_lambda, ConstraintMode, Direction, DualOptions, HazardBand, HjbConfig, LambdaVector,
};
use annuity_bounds::strict::{faa_baseline_price, strict_bounds};
use annuity_bounds::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LifeTable = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbFaa {
    Udd = 0,
    Cfm = 1,
    Balducci = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbProduct {
    Gmab = 0,
    Gmib = 1,
    Gmdb = 2,
    Combined = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbConstraints {
    Full = 0,
    TerminalOnly = 1,
}

/// Hull-White market, forward curve `b + c e^{-at} + d a t e^{-at}`, and fund mix.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbMarketParams {
    pub kappa: f64,
    pub sigma_r: f64,
    pub sigma_s: f64,
    pub rho: f64,
    pub r0: f64,
    pub curve_a: f64,
    pub curve_b: f64,
    pub curve_c: f64,
    pub curve_d: f64,
    pub a0: f64,
    pub pi_s: f64,
    pub pi_p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AbContract {
    pub product: AbProduct,
    pub rg: f64,
    pub age: i64,
    pub maturity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AbStrictResult {
    pub lower: f64,
    pub upper: f64,
    /// 0 when the death-benefit formulas were evaluated outside their sufficient conditions.
    pub assumptions_hold: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AbRelaxedResult {
    pub lower: f64,
    pub upper: f64,
    pub residual_max: f64,
    pub iterations: u32,
}

pub struct AbLifeTable(LifeTable);

pub struct AbMarket {
    mkt: MarketParams,
    fund: FundParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AbStatus {
    match e {
        Error::MissingHeader { .. }
        | Error::MalformedRow { .. }
        | Error::NonConsecutiveAges { .. }
        | Error::NonPositiveCount { .. }
        | Error::IncreasingCount { .. } => AbStatus::LifeTable,
        Error::GridTooCoarse { .. }
        | Error::GridMismatch(_)
        | Error::InconsistentGrid(_)
        | Error::DualNotConverged { .. }
        | Error::SolverFailure(_) => AbStatus::Numerical,
        Error::Io(_) => AbStatus::Io,
        _ => AbStatus::InvalidArgument,
    }
}

enum Failure {
    Status(AbStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(AbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AbStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            AbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(AbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn faa(k: AbFaa) -> FaaKind {
    match k {
        AbFaa::Udd => FaaKind::Udd,
        AbFaa::Cfm => FaaKind::Cfm,
        AbFaa::Balducci => FaaKind::Balducci,
    }
}

fn spec(c: &AbContract) -> Result<ContractSpec, Failure> {
    let kind = match c.product {
        AbProduct::Gmab => ContractKind::Gmab,
        AbProduct::Gmib => ContractKind::Gmib,
        AbProduct::Gmdb => ContractKind::Gmdb,
        AbProduct::Combined => ContractKind::Combined,
    };
    let s = ContractSpec::new(kind, c.rg, c.age, c.maturity);
    s.validate()?;
    Ok(s)
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an `age,lx` CSV.
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ab_life_table_from_csv(csv: *const c_char, out: *mut *mut AbLifeTable) -> AbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let table = parse_life_table(text(csv, "csv")?)?;
        *out = Box::into_raw(Box::new(AbLifeTable(table)));
        Ok(())
    })
}

/// Synthetic table with Makeham hazard `a + b c^x`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ab_life_table_makeham(
    a: f64,
    b: f64,
    c: f64,
    base_age: i64,
    span: u32,
    l0: f64,
    out: *mut *mut AbLifeTable,
) -> AbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let table = make_makeham_table(a, b, c, base_age, span as usize, l0)?;
        *out = Box::into_raw(Box::new(AbLifeTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ab_life_table_free(table: *mut AbLifeTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// `t`-year survival of a life aged `age` under a fractional-age assumption.
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ab_survival(
    table: *const AbLifeTable,
    age: i64,
    kind: AbFaa,
    t: f64,
    out: *mut f64,
) -> AbStatus {
    guard(|| {
        let table = handle(table, "table")?;
        let out = out_ref(out, "out")?;
        if !t.is_finite() || t < 0.0 {
            return Err(Failure::Status(
                AbStatus::InvalidArgument,
                format!("t must be >= 0, got {t}"),
            ));
        }
        let p = annual_survival_probs(&table.0, age, t.ceil().max(1.0) as usize)?;
        *out = faa_survival(&p, faa(kind), t)?;
        Ok(())
    })
}

/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_market_new(params: *const AbMarketParams, out: *mut *mut AbMarket) -> AbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let p = handle(params, "params")?;
        let mkt = MarketParams {
            kappa: p.kappa,
            sigma_r: p.sigma_r,
            sigma_s: p.sigma_s,
            rho: p.rho,
            r0: p.r0,
            curve: YieldCurveParams {
                a: p.curve_a,
                b: p.curve_b,
                c: p.curve_c,
                d: p.curve_d,
            },
            mu_s: None,
        };
        let fund = FundParams {
            a0: p.a0,
            pi_s: p.pi_s,
            pi_p: p.pi_p,
        };
        mkt.validate()?;
        fund.validate()?;
        *out = Box::into_raw(Box::new(AbMarket { mkt, fund }));
        Ok(())
    })
}

/// # Safety
/// `market` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ab_market_free(market: *mut AbMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Time-0 price under one fractional-age assumption.
///
/// # Safety
/// Handles must be live; `contract` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_faa_price(
    market: *const AbMarket,
    table: *const AbLifeTable,
    contract: *const AbContract,
    kind: AbFaa,
    out: *mut f64,
) -> AbStatus {
    guard(|| {
        let m = handle(market, "market")?;
        let table = handle(table, "table")?;
        let spec = spec(handle(contract, "contract")?)?;
        let out = out_ref(out, "out")?;
        let p = annual_survival_probs(&table.0, spec.age, spec.maturity.ceil() as usize)?;
        *out = faa_baseline_price(&spec, &m.mkt, &m.fund, &p, faa(kind), m.mkt.r0, m.fund.a0)?;
        Ok(())
    })
}

/// Bounds over every intensity matching the table at integer ages.
///
/// # Safety
/// Handles must be live; `contract` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_strict_bounds(
    market: *const AbMarket,
    table: *const AbLifeTable,
    contract: *const AbContract,
    out: *mut AbStrictResult,
) -> AbStatus {
    guard(|| {
        let m = handle(market, "market")?;
        let table = handle(table, "table")?;
        let spec = spec(handle(contract, "contract")?)?;
        let out = out_ref(out, "out")?;
        let p = annual_survival_probs(&table.0, spec.age, spec.maturity.ceil() as usize)?;
        let b = strict_bounds(&spec, &m.mkt, &m.fund, &p, m.mkt.r0, m.fund.a0)?;
        *out = AbStrictResult {
            lower: b.lower,
            upper: b.upper,
            assumptions_hold: i32::from(!b.assumptions_violated),
        };
        Ok(())
    })
}

/// Bounds over the hazard band `[(μ - δ)+, μ + δ]` around the `kind` baseline,
/// in the flat-rate market at `r0`. Needs an integer maturity.
///
/// # Safety
/// Handles must be live; `contract` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_relaxed_bounds(
    market: *const AbMarket,
    table: *const AbLifeTable,
    contract: *const AbContract,
    kind: AbFaa,
    delta: f64,
    constraints: AbConstraints,
    out: *mut AbRelaxedResult,
) -> AbStatus {
    guard(|| {
        let m = handle(market, "market")?;
        let table = handle(table, "table")?;
        let spec = spec(handle(contract, "contract")?)?;
        let out = out_ref(out, "out")?;
        let mode = match constraints {
            AbConstraints::Full => ConstraintMode::Full,
            AbConstraints::TerminalOnly => ConstraintMode::TerminalOnly,
        };
        let p = annual_survival_probs(&table.0, spec.age, spec.maturity.ceil() as usize)?;
        let band = HazardBand::new(p, faa(kind), delta)?;
        let opts = DualOptions::default();
        let solve = |dir| -> annuity_bounds::Result<_> {
            let cfg = HjbConfig::reduced(&spec, &m.fund, m.mkt.r0, m.mkt.sigma_s, dir, mode)?;
            optimize_lambda(&cfg, &band, &spec, &m.fund, &LambdaVector::zeros(cfg.n), &opts)
        };
        let best = solve(Direction::Best)?;
        let worst = solve(Direction::Worst)?;
        *out = AbRelaxedResult {
            lower: best.value,
            upper: worst.value,
            residual_max: best.max_residual().max(worst.max_residual()),
            iterations: (best.dual_iterations + worst.dual_iterations) as u32,
        };
        Ok(())
    })
}

/// Runs a JSON run configuration and returns the CSV the command-line tool
/// would write. `base_dir` resolves relative paths and may be null.
/// Free the result with `ab_string_free`.
///
/// # Safety
/// `json` must be NUL-terminated, `base_dir` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ab_run_config(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut c_char,
) -> AbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let dir = if base_dir.is_null() {
            PathBuf::new()
        } else {
            PathBuf::from(text(base_dir, "base_dir")?)
        };
        let loaded = LoadedConfig::from_str(text(json, "json")?, dir)?;
        let csv = execute(&loaded)?.to_csv(&provenance(&loaded))?;
        *out = CString::new(csv).expect("csv has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
