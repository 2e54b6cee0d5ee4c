//! Hull–White short rate with a correlated equity, a constant-mix fund, and
//! the closed-form prices of the guarantee claims written on that fund.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_refined, GaussLegendre};

/// Forward curve family `f(0,t) = b + c e^{-at} + d a t e^{-at}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldCurveParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl YieldCurveParams {
    pub fn flat(rate: f64) -> Self {
        Self {
            a: 1.0,
            b: rate,
            c: 0.0,
            d: 0.0,
        }
    }

    pub fn forward(&self, t: f64) -> f64 {
        let e = (-self.a * t).exp();
        self.b + self.c * e + self.d * self.a * t * e
    }

    pub fn forward_slope(&self, t: f64) -> f64 {
        let e = (-self.a * t).exp();
        self.a * e * (self.d - self.c - self.d * self.a * t)
    }

    /// `∫_0^T f(0,s) ds`, integrated analytically.
    pub fn integrated_forward(&self, t: f64) -> f64 {
        let e = (-self.a * t).exp();
        let one_minus = -(-self.a * t).exp_m1();
        self.b * t + (self.c / self.a) * one_minus + self.d * (one_minus / self.a - t * e)
    }

    /// `P(0,T)`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.integrated_forward(t)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub kappa: f64,
    pub sigma_r: f64,
    pub sigma_s: f64,
    pub rho: f64,
    pub r0: f64,
    pub curve: YieldCurveParams,
    /// Real-world stock drift; only the density process uses it.
    #[serde(default)]
    pub mu_s: Option<f64>,
}

impl MarketParams {
    /// Deterministic flat rate: no rate volatility, flat curve at `rate`.
    pub fn deterministic(rate: f64, sigma_s: f64) -> Self {
        Self {
            kappa: 1.0,
            sigma_r: 0.0,
            sigma_s,
            rho: 0.0,
            r0: rate,
            curve: YieldCurveParams::flat(rate),
            mu_s: Some(rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.kappa > 0.0) {
            return bad("kappa must be > 0");
        }
        if !(self.sigma_s > 0.0) {
            return bad("sigma_S must be > 0");
        }
        if !(self.sigma_r >= 0.0) {
            return bad("sigma_r must be >= 0");
        }
        if !(self.rho.abs() < 1.0) {
            return bad("|rho| must be < 1");
        }
        if !(self.curve.a > 0.0) {
            return bad("curve decay a must be > 0");
        }
        if !self.r0.is_finite() {
            return bad("r0 must be finite");
        }
        Ok(())
    }

    /// Real-world stock drift, defaulting to the initial short rate.
    pub fn stock_drift(&self) -> f64 {
        self.mu_s.unwrap_or(self.r0)
    }

    /// `B(t,T) = (1 - e^{-κ(T-t)}) / κ`.
    pub fn b_factor(&self, t: f64, maturity: f64) -> f64 {
        -(-self.kappa * (maturity - t)).exp_m1() / self.kappa
    }

    /// Lower-triangular Cholesky factor of the stock/rate correlation matrix.
    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [self.rho, (1.0 - self.rho * self.rho).sqrt()]]
    }

    pub fn is_deterministic_rate(&self) -> bool {
        self.sigma_r == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundParams {
    pub a0: f64,
    pub pi_s: f64,
    pub pi_p: f64,
}

impl FundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0) {
            return Err(Error::NonPositiveFund(self.a0));
        }
        let unit = |w: f64| (0.0..=1.0).contains(&w);
        if !unit(self.pi_s) || !unit(self.pi_p) || self.pi_s + self.pi_p > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "fund weights pi_S={} pi_P={} must lie in [0,1] with sum <= 1",
                self.pi_s, self.pi_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractKind {
    Gmab,
    Gmib,
    Gmdb,
    Combined,
}

impl ContractKind {
    pub fn name(self) -> &'static str {
        match self {
            ContractKind::Gmab => "gmab",
            ContractKind::Gmib => "gmib",
            ContractKind::Gmdb => "gmdb",
            ContractKind::Combined => "combined",
        }
    }
}

/// Which of the three payoff legs (terminal, income flow, death benefit) are live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PayoffMask {
    pub gmab: bool,
    pub gmib: bool,
    pub gmdb: bool,
}

impl PayoffMask {
    pub const NONE: PayoffMask = PayoffMask {
        gmab: false,
        gmib: false,
        gmdb: false,
    };
    pub const ALL: PayoffMask = PayoffMask {
        gmab: true,
        gmib: true,
        gmdb: true,
    };

    pub fn only(kind: ContractKind) -> Self {
        match kind {
            ContractKind::Gmab => PayoffMask {
                gmab: true,
                ..Self::NONE
            },
            ContractKind::Gmib => PayoffMask {
                gmib: true,
                ..Self::NONE
            },
            ContractKind::Gmdb => PayoffMask {
                gmdb: true,
                ..Self::NONE
            },
            ContractKind::Combined => Self::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub kind: ContractKind,
    pub rg: f64,
    pub age: i64,
    #[serde(default)]
    pub t: f64,
    pub maturity: f64,
    /// Only read for `Combined`.
    #[serde(default)]
    pub mask: Option<PayoffMask>,
}

impl ContractSpec {
    pub fn new(kind: ContractKind, rg: f64, age: i64, maturity: f64) -> Self {
        Self {
            kind,
            rg,
            age,
            t: 0.0,
            maturity,
            mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t < self.maturity) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= t < T, got t={} T={}",
                self.t, self.maturity
            )));
        }
        if !self.rg.is_finite() {
            return Err(Error::InvalidParameter("guaranteed rate must be finite".into()));
        }
        Ok(())
    }

    pub fn payoff_mask(&self) -> PayoffMask {
        match self.kind {
            ContractKind::Combined => self.mask.unwrap_or(PayoffMask::ALL),
            k => PayoffMask::only(k),
        }
    }

    /// `G_s = A_0 e^{r_g s}`; the same schedule backs all three guarantees.
    pub fn guarantee(&self, fund: &FundParams, s: f64) -> f64 {
        fund.a0 * (self.rg * s).exp()
    }

    /// Number of whole policy years `⌊T⌋ - ⌈t⌉` inside `[t, T]`.
    pub fn whole_years(&self) -> usize {
        let n = self.maturity.floor() - self.t.ceil();
        if n > 0.0 {
            n as usize
        } else {
            0
        }
    }

    /// `⌈t⌉`, the first integer knot at or after the valuation time.
    pub fn first_knot(&self) -> f64 {
        self.t.ceil()
    }

    /// Anchor age of the one-year probabilities, `x + ⌈t⌉`.
    pub fn anchor_age(&self) -> i64 {
        self.age + self.t.ceil() as i64
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn forward_rate0(curve: &YieldCurveParams, t: f64) -> f64 {
    curve.forward(t)
}

/// Mean-reversion level that fits the initial forward curve.
pub fn theta(mkt: &MarketParams, t: f64) -> f64 {
    let k = mkt.kappa;
    mkt.curve.forward_slope(t) / k
        + mkt.curve.forward(t)
        + mkt.sigma_r * mkt.sigma_r / (2.0 * k * k) * (-(-2.0 * k * t).exp_m1())
}

/// Zero-coupon bond price `P(t,T)` given the short rate `r_t`.
pub fn zcb_price(mkt: &MarketParams, r_t: f64, t: f64, maturity: f64) -> f64 {
    if maturity == t {
        return 1.0;
    }
    let k = mkt.kappa;
    let b = mkt.b_factor(t, maturity);
    let curve = &mkt.curve;
    let log_ratio = -(curve.integrated_forward(maturity) - curve.integrated_forward(t));
    let convexity = mkt.sigma_r * mkt.sigma_r / (4.0 * k) * (-(-2.0 * k * t).exp_m1()) * b * b;
    (-b * r_t + log_ratio + b * curve.forward(t) - convexity).exp()
}

const FORWARD_FD_STEP: f64 = 1e-5;

/// Instantaneous forward `f(t,s) = -∂_s ln P(t,s)`, by central difference.
pub fn forward_rate(mkt: &MarketParams, r_t: f64, t: f64, s: f64) -> f64 {
    let h = FORWARD_FD_STEP;
    let up = zcb_price(mkt, r_t, t, s + h).ln();
    let down = zcb_price_unclamped(mkt, r_t, t, s - h).ln();
    -(up - down) / (2.0 * h)
}

// The affine formula is smooth through s = t; the FD stencil may step past it.
fn zcb_price_unclamped(mkt: &MarketParams, r_t: f64, t: f64, maturity: f64) -> f64 {
    let k = mkt.kappa;
    let b = mkt.b_factor(t, maturity);
    let curve = &mkt.curve;
    let log_ratio = -(curve.integrated_forward(maturity) - curve.integrated_forward(t));
    let convexity = mkt.sigma_r * mkt.sigma_r / (4.0 * k) * (-(-2.0 * k * t).exp_m1()) * b * b;
    (-b * r_t + log_ratio + b * curve.forward(t) - convexity).exp()
}

/// Integrand of `σ_Y²` at time `s` for claims maturing at `maturity`.
fn sigma_y_integrand(mkt: &MarketParams, fund: &FundParams, s: f64, maturity: f64) -> f64 {
    let sig = mkt.cholesky();
    let b = mkt.b_factor(s, maturity);
    // Σ_F(s) rows: (σ_S, 0) and (-ρ σ_r B, -√(1-ρ²) σ_r B)
    let sigma_f = [
        [mkt.sigma_s, 0.0],
        [-mkt.rho * mkt.sigma_r * b, -sig[1][1] * mkt.sigma_r * b],
    ];
    let mut w = [0.0; 2];
    for (col, wc) in w.iter_mut().enumerate() {
        // B σ_r e₂ᵀΣ + πᵀΣ_F
        *wc = b * mkt.sigma_r * sig[1][col] + fund.pi_s * sigma_f[0][col] + fund.pi_p * sigma_f[1][col];
    }
    w[0] * w[0] + w[1] * w[1]
}

thread_local! {
    static GL64: GaussLegendre = GaussLegendre::new(64);
}

/// Aggregated log-variance of fund over bond between `t` and `maturity`.
pub fn sigma_y_sq(mkt: &MarketParams, fund: &FundParams, t: f64, maturity: f64) -> f64 {
    if maturity <= t {
        return 0.0;
    }
    if mkt.sigma_r == 0.0 {
        let v = fund.pi_s * mkt.sigma_s;
        return v * v * (maturity - t);
    }
    let panels = (maturity - t).ceil().max(1.0) as usize;
    GL64.with(|rule| {
        integrate_refined(
            rule,
            |s| sigma_y_integrand(mkt, fund, s, maturity),
            t,
            maturity,
            panels,
            1e-10,
            1e-300,
        )
    })
}

const DEGENERATE_VARIANCE: f64 = 1e-18;

/// `A Φ(-d₁) - K Φ(-d₂)` for a lognormal fund over a discounted strike `K`.
fn fund_call(fund_value: f64, discounted_strike: f64, variance: f64) -> f64 {
    if discounted_strike <= 0.0 {
        return fund_value;
    }
    if variance < DEGENERATE_VARIANCE {
        return (fund_value - discounted_strike).max(0.0);
    }
    let vol = variance.sqrt();
    let d2 = ((discounted_strike / fund_value).ln() + 0.5 * variance) / vol;
    let d1 = d2 - vol;
    fund_value * norm_cdf(-d1) - discounted_strike * norm_cdf(-d2)
}

/// Price at `t` of `max(A_T, G)` paid at `maturity`.
#[allow(clippy::too_many_arguments)]
pub fn price_max_payoff(
    mkt: &MarketParams,
    fund: &FundParams,
    fund_value: f64,
    r_t: f64,
    t: f64,
    maturity: f64,
    guarantee: f64,
) -> Result<f64> {
    if !(fund_value > 0.0) {
        return Err(Error::NonPositiveFund(fund_value));
    }
    if guarantee < 0.0 || maturity < t {
        return Err(Error::InvalidParameter(format!(
            "need G >= 0 and t <= T, got G={guarantee} t={t} T={maturity}"
        )));
    }
    let gp = guarantee * zcb_price(mkt, r_t, t, maturity);
    let variance = sigma_y_sq(mkt, fund, t, maturity);
    Ok(gp + fund_call(fund_value, gp, variance))
}

/// Price at `t` of the income flow paid at `s`: `A_0 r_g + (A_s - G^I_s)_+`.
pub fn price_gmib_flow(
    mkt: &MarketParams,
    fund: &FundParams,
    fund_value: f64,
    r_t: f64,
    t: f64,
    s: f64,
    spec: &ContractSpec,
) -> Result<f64> {
    if !(fund_value > 0.0) {
        return Err(Error::NonPositiveFund(fund_value));
    }
    if s < t {
        return Err(Error::InvalidParameter(format!("flow time {s} precedes t={t}")));
    }
    let p = zcb_price(mkt, r_t, t, s);
    let strike = spec.guarantee(fund, s) * p;
    let variance = sigma_y_sq(mkt, fund, t, s);
    Ok(fund.a0 * spec.rg * p + fund_call(fund_value, strike, variance))
}

/// Outcome of the sufficient conditions under which the closed-form GMDB bounds hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmdbAssumptionReport {
    pub rg_dominates_forward: bool,
    pub drift_condition: bool,
    pub alpha: f64,
    pub drift_value: f64,
    /// Time and size of the largest excess `f(t,s) - r_g` on the check grid.
    pub worst_violation: (f64, f64),
}

impl GmdbAssumptionReport {
    pub fn holds(&self) -> bool {
        self.rg_dominates_forward && self.drift_condition
    }
}

const ASSUMPTION_GRID: f64 = 0.01;

pub fn check_gmdb_assumptions(mkt: &MarketParams, r_t: f64, t: f64, maturity: f64, rg: f64) -> GmdbAssumptionReport {
    let alpha = (-mkt.kappa * (maturity - t)).exp_m1() / mkt.kappa;
    debug_assert!(alpha <= 0.0);
    let drift_value = r_t * alpha - theta(mkt, t) * (alpha + (maturity - t));

    let steps = ((maturity - t) / ASSUMPTION_GRID).round().max(1.0) as usize;
    let mut worst = (t, f64::NEG_INFINITY);
    for k in 0..=steps {
        let s = if k == steps {
            maturity
        } else {
            t + k as f64 * ASSUMPTION_GRID
        };
        let excess = forward_rate(mkt, r_t, t, s) - rg;
        if excess > worst.1 {
            worst = (s, excess);
        }
    }
    GmdbAssumptionReport {
        rg_dominates_forward: worst.1 <= 0.0,
        drift_condition: drift_value <= 0.0,
        alpha,
        drift_value,
        worst_violation: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn paper_market() -> MarketParams {
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

    fn paper_fund() -> FundParams {
        FundParams {
            a0: 100.0,
            pi_s: 0.6,
            pi_p: 0.2,
        }
    }

    #[test]
    fn forward_curve_values() {
        let c = paper_market().curve;
        assert!((forward_rate0(&c, 0.0) - 0.0095).abs() < 1e-15);
        assert!((forward_rate0(&c, 1e4) + 0.0105).abs() < 1e-12);
        // b + c e^{-a} + d a e^{-a}
        let e = (-0.015f64).exp();
        let expect = -0.0105 + 0.02 * e + 0.75 * 0.015 * e;
        assert!((forward_rate0(&c, 1.0) - expect).abs() < 1e-15);
        assert!((expect - 0.020285).abs() < 1e-6);
    }

    #[test]
    fn theta_values() {
        let m = paper_market();
        assert!((theta(&m, 0.0) - 0.119).abs() < 1e-12);
        let flat = MarketParams {
            sigma_r: 0.0,
            curve: YieldCurveParams {
                c: 0.0,
                d: 0.0,
                ..m.curve
            },
            ..m
        };
        for t in [0.0, 1.0, 7.5] {
            assert!((theta(&flat, t) - m.curve.b).abs() < 1e-15);
        }
    }

    #[test]
    fn integrated_forward_matches_derivative() {
        let c = paper_market().curve;
        let h = 1e-5;
        for t in [0.3, 2.0, 9.0] {
            let fd = (c.integrated_forward(t + h) - c.integrated_forward(t - h)) / (2.0 * h);
            assert!((fd - c.forward(t)).abs() < 1e-9);
            let fd2 = (c.forward(t + h) - c.forward(t - h)) / (2.0 * h);
            assert!((fd2 - c.forward_slope(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn bond_identities() {
        let m = paper_market();
        assert_eq!(zcb_price(&m, 0.03, 2.0, 2.0), 1.0);
        let det = MarketParams { sigma_r: 0.0, ..m };
        let t = 1.5;
        let r = m.curve.forward(t);
        let expect = (-(m.curve.integrated_forward(6.0) - m.curve.integrated_forward(t))).exp();
        assert!((zcb_price(&det, r, t, 6.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn forward_rate_short_end_and_deterministic_curve() {
        let m = paper_market();
        assert!((forward_rate(&m, 0.017, 1.0, 1.0) - 0.017).abs() < 1e-4);
        let det = MarketParams { sigma_r: 0.0, ..m };
        let t = 2.0;
        let r = m.curve.forward(t);
        for s in [2.5, 4.0, 8.0] {
            assert!((forward_rate(&det, r, t, s) - m.curve.forward(s)).abs() < 1e-6);
        }
        // With r_0 = f(0,0) the time-0 forward is the initial curve.
        assert!((forward_rate(&m, m.curve.forward(0.0), 0.0, 5.0) - 0.0602).abs() < 1e-4);
    }

    #[test]
    fn sigma_y_degenerations() {
        let m = paper_market();
        let f = paper_fund();
        assert_eq!(sigma_y_sq(&m, &f, 3.0, 3.0), 0.0);
        let no_rate_vol = MarketParams { sigma_r: 0.0, ..m };
        let v = sigma_y_sq(&no_rate_vol, &f, 1.0, 4.0);
        assert!((v - 0.36 * 0.04 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_y_matches_expanded_integrand() {
        // |π_S σ_S e₁ + (1-π_P) σ_r B e₂|² in the correlated metric.
        let m = paper_market();
        let f = paper_fund();
        let s = 1.7;
        let b = m.b_factor(s, 5.0);
        let x = f.pi_s * m.sigma_s;
        let y = (1.0 - f.pi_p) * m.sigma_r * b;
        let expect = x * x + 2.0 * m.rho * x * y + y * y;
        assert!((sigma_y_integrand(&m, &f, s, 5.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn max_payoff_degenerate_cases() {
        let m = paper_market();
        let f = paper_fund();
        let c = price_max_payoff(&m, &f, 100.0, 0.01, 0.0, 5.0, 0.0).unwrap();
        assert!((c - 100.0).abs() < 1e-12);
        let still = MarketParams {
            sigma_r: 0.0,
            ..MarketParams::deterministic(0.0, 1e-12)
        };
        let c = price_max_payoff(&still, &f, 100.0, 0.0, 0.0, 1.0, 90.0).unwrap();
        assert!((c - 100.0).abs() < 1e-12);
        assert!(matches!(
            price_max_payoff(&m, &f, 0.0, 0.01, 0.0, 5.0, 100.0),
            Err(Error::NonPositiveFund(_))
        ));
    }

    #[test]
    fn gmib_flow_degenerate_cases() {
        let m = paper_market();
        let f = paper_fund();
        let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 5.0);
        // immediate payoff
        let now = price_gmib_flow(&m, &f, 120.0, 0.01, 0.0, 0.0, &spec).unwrap();
        assert!((now - (3.0 + 20.0)).abs() < 1e-12);
        // r_g = 0: a plain call struck at A_0
        let zero = ContractSpec { rg: 0.0, ..spec };
        let flow = price_gmib_flow(&m, &f, 100.0, 0.01, 0.0, 3.0, &zero).unwrap();
        let max = price_max_payoff(&m, &f, 100.0, 0.01, 0.0, 3.0, 100.0).unwrap();
        let bond = 100.0 * zcb_price(&m, 0.01, 0.0, 3.0);
        assert!((flow - (max - bond)).abs() < 1e-10);
    }

    #[test]
    fn gmdb_assumption_report() {
        let m = paper_market();
        let rep = check_gmdb_assumptions(&m, 0.01, 5.0 - 1e-12, 5.0, 0.03);
        assert!(rep.alpha.abs() < 1e-9);
        let flat = MarketParams::deterministic(0.01, 0.2);
        let rep = check_gmdb_assumptions(&flat, 0.01, 0.0, 5.0, 0.03);
        assert!(rep.rg_dominates_forward && rep.drift_condition);
        let rep = check_gmdb_assumptions(&m, 0.01, 0.0, 5.0, 0.03);
        assert!(!rep.rg_dominates_forward);
        assert!((rep.worst_violation.0 - 5.0).abs() < 0.011);
        assert!(rep.alpha <= 0.0);
    }
}
