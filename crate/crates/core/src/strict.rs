//! Almost-sure bounds: mortality paths that reproduce every tabulated
//! one-year survival probability exactly.
//!
//! Inside a policy year the admissible paths may shift all of that year's
//! mortality to a single instant, so the extremal survival curves are step
//! functions that drop either at the end (`Sup`) or right at the start
//! (`Inf`) of each year.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetable::{faa_survival, AnnualSurvival, FaaKind};
use crate::market::{
    check_gmdb_assumptions, price_gmib_flow, price_max_payoff, ContractKind, ContractSpec, FundParams,
    GmdbAssumptionReport, MarketParams,
};
use crate::quadrature::{integrate_adaptive, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDirection {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub tau: f64,
    pub jump: f64,
}

/// Discrete mortality jumps `(τ_j, μ_j)` of an extremal control.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionSchedule {
    pub entries: Vec<Intervention>,
}

impl InterventionSchedule {
    /// One jump of size `1 - p̂_j` at each year end `⌈t⌉ + j + 1`.
    fn year_ends(spec: &ContractSpec, p: &AnnualSurvival, years: usize) -> Self {
        let start = spec.first_knot();
        let entries = p.probs()[..years]
            .iter()
            .enumerate()
            .map(|(j, &pj)| Intervention {
                tau: start + j as f64 + 1.0,
                jump: 1.0 - pj,
            })
            .collect();
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictBounds {
    pub upper: f64,
    pub lower: f64,
    pub upper_schedule: InterventionSchedule,
    pub lower_schedule_note: String,
    /// Sufficient conditions behind the death-benefit bounds, when applicable.
    pub assumptions: Option<GmdbAssumptionReport>,
    pub assumptions_violated: bool,
}

const LOWER_LIMIT_NOTE: &str =
    "infimum approached by jumps of size 1 - p_j as tau_j decreases to each year start; not attained";

/// Survival to `s` along the extremal step curve for valuation time `t`.
pub fn step_survival(p: &AnnualSurvival, dir: StepDirection, t: f64, s: f64) -> f64 {
    let start = t.ceil();
    p.probs()
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let knot = start + *j as f64;
            match dir {
                StepDirection::Sup => knot + 1.0 <= s,
                StepDirection::Inf => knot < s,
            }
        })
        .map(|(_, &pj)| pj)
        .product()
}

/// Survival to `s` under a fractional age assumption, anchored at `⌈t⌉`.
/// The stubs `[t, ⌈t⌉]` and `[⌊T⌋, T]` carry no mortality.
pub fn faa_curve(p: &AnnualSurvival, kind: FaaKind, t: f64, s: f64) -> f64 {
    let u = s - t.ceil();
    if u <= 0.0 {
        return 1.0;
    }
    if u >= p.years() as f64 {
        return p.cumulative(p.years());
    }
    faa_survival(p, kind, u).expect("inside horizon")
}

fn checked_years(spec: &ContractSpec, p: &AnnualSurvival) -> Result<usize> {
    spec.validate()?;
    let years = spec.whole_years();
    if p.years() < years {
        return Err(Error::HorizonExceeded {
            t: spec.maturity,
            horizon: p.years(),
        });
    }
    Ok(years)
}

/// `t`, the integer knots inside `(t, T)`, and `T`.
fn knots(spec: &ContractSpec) -> Vec<f64> {
    let mut out = vec![spec.t];
    let mut k = spec.t.ceil();
    while k < spec.maturity {
        if k > spec.t {
            out.push(k);
        }
        k += 1.0;
    }
    out.push(spec.maturity);
    out
}

thread_local! {
    static GL16: GaussLegendre = GaussLegendre::new(16);
}

const PANEL_TOL: f64 = 1e-9;

fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    GL16.with(|rule| integrate_adaptive(rule, f, a, b, PANEL_TOL))
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::SolverFailure(format!("{what} is not finite")))
    }
}

fn check_fund(a_t: f64) -> Result<()> {
    if a_t > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveFund(a_t))
    }
}

fn expect_kind(spec: &ContractSpec, kind: ContractKind) -> Result<()> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "expected a {} contract, got {}",
            kind.name(),
            spec.kind.name()
        )))
    }
}

pub fn gmab_bounds(
    spec: &ContractSpec,
    mkt: &MarketParams,
    fund: &FundParams,
    p: &AnnualSurvival,
    r_t: f64,
    a_t: f64,
) -> Result<StrictBounds> {
    expect_kind(spec, ContractKind::Gmab)?;
    let years = checked_years(spec, p)?;
    let c = price_max_payoff(
        mkt,
        fund,
        a_t,
        r_t,
        spec.t,
        spec.maturity,
        spec.guarantee(fund, spec.maturity),
    )?;
    let value = p.cumulative(years) * c;
    Ok(StrictBounds {
        upper: value,
        lower: value,
        upper_schedule: InterventionSchedule::default(),
        lower_schedule_note: "every admissible control attains the value".into(),
        assumptions: None,
        assumptions_violated: false,
    })
}

pub fn gmib_bounds(
    spec: &ContractSpec,
    mkt: &MarketParams,
    fund: &FundParams,
    p: &AnnualSurvival,
    r_t: f64,
    a_t: f64,
) -> Result<StrictBounds> {
    expect_kind(spec, ContractKind::Gmib)?;
    let years = checked_years(spec, p)?;
    check_fund(a_t)?;
    let flow = |s: f64| price_gmib_flow(mkt, fund, a_t, r_t, spec.t, s, spec).unwrap_or(f64::NAN);
    let p = p.truncated(years)?;
    let (mut upper, mut lower) = (0.0, 0.0);
    for w in knots(spec).windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let piece = integrate(flow, w[0], w[1]);
        upper += step_survival(&p, StepDirection::Sup, spec.t, mid) * piece;
        lower += step_survival(&p, StepDirection::Inf, spec.t, mid) * piece;
    }
    Ok(StrictBounds {
        upper: finite(upper, "GMIB upper bound")?,
        lower: finite(lower, "GMIB lower bound")?,
        upper_schedule: InterventionSchedule::year_ends(spec, &p, years),
        lower_schedule_note: LOWER_LIMIT_NOTE.into(),
        assumptions: None,
        assumptions_violated: false,
    })
}

pub fn gmdb_bounds(
    spec: &ContractSpec,
    mkt: &MarketParams,
    fund: &FundParams,
    p: &AnnualSurvival,
    r_t: f64,
    a_t: f64,
) -> Result<StrictBounds> {
    expect_kind(spec, ContractKind::Gmdb)?;
    let years = checked_years(spec, p)?;
    let benefit = |s: f64| price_max_payoff(mkt, fund, a_t, r_t, spec.t, s, spec.guarantee(fund, s));
    let start = spec.first_knot();
    let (mut upper, mut lower) = (0.0, 0.0);
    let mut alive = 1.0;
    for (j, &pj) in p.probs()[..years].iter().enumerate() {
        let knot = start + j as f64;
        upper += benefit(knot + 1.0)? * (1.0 - pj) * alive;
        lower += benefit(knot)? * (1.0 - pj) * alive;
        alive *= pj;
    }
    let report = check_gmdb_assumptions(mkt, r_t, spec.t, spec.maturity, spec.rg);
    Ok(StrictBounds {
        upper,
        lower,
        upper_schedule: InterventionSchedule::year_ends(spec, p, years),
        lower_schedule_note: LOWER_LIMIT_NOTE.into(),
        assumptions: Some(report),
        assumptions_violated: !report.holds(),
    })
}

/// Dispatches on the contract kind. Combined contracts have no strict bounds.
pub fn strict_bounds(
    spec: &ContractSpec,
    mkt: &MarketParams,
    fund: &FundParams,
    p: &AnnualSurvival,
    r_t: f64,
    a_t: f64,
) -> Result<StrictBounds> {
    match spec.kind {
        ContractKind::Gmab => gmab_bounds(spec, mkt, fund, p, r_t, a_t),
        ContractKind::Gmib => gmib_bounds(spec, mkt, fund, p, r_t, a_t),
        ContractKind::Gmdb => gmdb_bounds(spec, mkt, fund, p, r_t, a_t),
        ContractKind::Combined => Err(Error::InvalidParameter(
            "strict bounds are defined per product; mask a single payoff instead".into(),
        )),
    }
}

/// Price under a smooth fractional-age survival curve.
#[allow(clippy::too_many_arguments)]
pub fn faa_baseline_price(
    spec: &ContractSpec,
    mkt: &MarketParams,
    fund: &FundParams,
    p: &AnnualSurvival,
    kind: FaaKind,
    r_t: f64,
    a_t: f64,
) -> Result<f64> {
    let years = checked_years(spec, p)?;
    check_fund(a_t)?;
    let p = p.truncated(years)?;
    let start = spec.first_knot();
    let value = match spec.kind {
        ContractKind::Gmab => {
            let g = spec.guarantee(fund, spec.maturity);
            p.cumulative(years) * price_max_payoff(mkt, fund, a_t, r_t, spec.t, spec.maturity, g)?
        }
        ContractKind::Gmib => {
            let flow = |s: f64| {
                faa_curve(&p, kind, spec.t, s)
                    * price_gmib_flow(mkt, fund, a_t, r_t, spec.t, s, spec).unwrap_or(f64::NAN)
            };
            knots(spec).windows(2).map(|w| integrate(flow, w[0], w[1])).sum()
        }
        ContractKind::Gmdb => (0..years)
            .map(|j| {
                let pj = p.probs()[j];
                let alive = p.cumulative(j);
                let knot = start + j as f64;
                let density = |s: f64| {
                    let u = s - knot;
                    let price =
                        price_max_payoff(mkt, fund, a_t, r_t, spec.t, s, spec.guarantee(fund, s)).unwrap_or(f64::NAN);
                    price * alive * kind.within_year_survival(pj, u) * kind.within_year_hazard(pj, u)
                };
                integrate(density, knot, knot + 1.0)
            })
            .sum(),
        ContractKind::Combined => {
            return Err(Error::InvalidParameter(
                "baseline prices are defined per product".into(),
            ))
        }
    };
    finite(value, "baseline price")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::YieldCurveParams;

    fn market() -> MarketParams {
        MarketParams {
            kappa: 0.1,
            sigma_r: 0.02,
            sigma_s: 0.2,
            rho: 0.3,
            r0: 0.01,
            curve: YieldCurveParams {
                a: 0.015,
                b: -0.0105,
                c: 0.02,
                d: 0.75,
            },
            mu_s: None,
        }
    }

    fn fund() -> FundParams {
        FundParams {
            a0: 100.0,
            pi_s: 0.6,
            pi_p: 0.2,
        }
    }

    fn probs(v: &[f64]) -> AnnualSurvival {
        AnnualSurvival::new(60, v.to_vec()).unwrap()
    }

    #[test]
    fn step_curves_follow_index_sets() {
        let p = probs(&[0.9, 0.8, 0.7]);
        assert_eq!(step_survival(&p, StepDirection::Sup, 0.0, 0.5), 1.0);
        assert_eq!(step_survival(&p, StepDirection::Inf, 0.0, 0.5), 0.9);
        assert!((step_survival(&p, StepDirection::Sup, 0.0, 2.5) - 0.72).abs() < 1e-15);
        assert!((step_survival(&p, StepDirection::Inf, 0.0, 2.5) - 0.504).abs() < 1e-15);
        // the year end itself already carries the jump for Sup
        assert!((step_survival(&p, StepDirection::Sup, 0.0, 1.0) - 0.9).abs() < 1e-15);
        assert_eq!(step_survival(&p, StepDirection::Inf, 0.0, 0.0), 1.0);
    }

    #[test]
    fn knots_split_at_integers() {
        let mut spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 3.5);
        spec.t = 0.25;
        assert_eq!(knots(&spec), vec![0.25, 1.0, 2.0, 3.0, 3.5]);
        spec.t = 0.0;
        spec.maturity = 2.0;
        assert_eq!(knots(&spec), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn gmab_single_year_product() {
        let spec = ContractSpec::new(ContractKind::Gmab, 0.03, 60, 1.0);
        let b = gmab_bounds(&spec, &market(), &fund(), &probs(&[0.9]), 0.01, 100.0).unwrap();
        let c = price_max_payoff(&market(), &fund(), 100.0, 0.01, 0.0, 1.0, 100.0 * 0.03f64.exp()).unwrap();
        assert!((b.upper - 0.9 * c).abs() < 1e-12);
        assert_eq!(b.upper, b.lower);
        assert!(b.upper_schedule.is_empty());
    }

    #[test]
    fn gmib_one_year_identity() {
        let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 1.0);
        let b = gmib_bounds(&spec, &market(), &fund(), &probs(&[0.97]), 0.01, 100.0).unwrap();
        assert!((b.lower - 0.97 * b.upper).abs() <= 1e-12 * b.upper);
        assert_eq!(
            b.upper_schedule.entries,
            vec![Intervention {
                tau: 1.0,
                jump: 0.97f64.mul_add(-1.0, 1.0)
            }]
        );
    }

    #[test]
    fn gmdb_one_year_collapse_and_no_deaths() {
        let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 1.0);
        let m = market();
        let b = gmdb_bounds(&spec, &m, &fund(), &probs(&[0.95]), 0.01, 100.0).unwrap();
        let c1 = price_max_payoff(&m, &fund(), 100.0, 0.01, 0.0, 1.0, 100.0 * 0.03f64.exp()).unwrap();
        assert!((b.upper - 0.05 * c1).abs() < 1e-12);
        assert!((b.lower - 5.0).abs() < 1e-12);
        assert!(b.assumptions.is_some());

        let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 3.0);
        let b = gmdb_bounds(&spec, &m, &fund(), &probs(&[1.0, 1.0, 1.0]), 0.01, 100.0).unwrap();
        assert_eq!((b.upper, b.lower), (0.0, 0.0));
        let base = faa_baseline_price(&spec, &m, &fund(), &probs(&[1.0; 3]), FaaKind::Udd, 0.01, 100.0).unwrap();
        assert!(base.abs() < 1e-15);
    }

    #[test]
    fn certain_survival_collapses_gmib() {
        let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 2.0);
        let b = gmib_bounds(&spec, &market(), &fund(), &probs(&[1.0, 1.0]), 0.01, 100.0).unwrap();
        assert!((b.upper - b.lower).abs() < 1e-12);
    }

    #[test]
    fn stub_periods_carry_no_mortality() {
        let p = probs(&[0.9, 0.8]);
        assert_eq!(faa_curve(&p, FaaKind::Cfm, 0.4, 0.9), 1.0);
        assert!((faa_curve(&p, FaaKind::Cfm, 0.4, 3.2) - 0.72).abs() < 1e-15);
        let mut spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 3.6);
        spec.t = 0.4;
        assert_eq!(spec.whole_years(), 2);
        assert!(gmdb_bounds(&spec, &market(), &fund(), &p, 0.01, 100.0).is_ok());
    }

    #[test]
    fn combined_is_rejected() {
        let spec = ContractSpec::new(ContractKind::Combined, 0.03, 60, 2.0);
        assert!(strict_bounds(&spec, &market(), &fund(), &probs(&[0.9, 0.9]), 0.01, 100.0).is_err());
    }
}
