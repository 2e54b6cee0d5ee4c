//! Bounds under life-table constraints that only hold in expectation.
//!
//! Rates are deterministic and the stock earns the short rate under the
//! real-world measure, so the state reduces to time and the log fund value.
//! For fixed multipliers the inner control problem is a one-dimensional HJB
//! equation whose optimal hazard sits on an edge of the band around a
//! baseline fractional-age hazard. The multipliers are then chosen by
//! minimising (or maximising) the dual function.

mod dual;
mod hjb;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetable::{AnnualSurvival, FaaKind};
use crate::market::{ContractSpec, FundParams, PayoffMask};

pub use dual::{delta_sweep, optimize_lambda, DeltaSweep, DualMethod, DualOptions};
pub use hjb::{constraint_survival, hjb_solve, ValueSurface};

/// Which side of the price range is sought.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Worst,
    Best,
}

impl Direction {
    /// Sign of the multiplier term in the jump conditions.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Worst => 1.0,
            Direction::Best => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Worst => "worst",
            Direction::Best => "best",
        }
    }
}

/// Optimal hazard for the pointwise Hamiltonian `μ (Ĥ - v)`.
pub fn bang_bang_control(h_hat: f64, v: f64, mu_a: f64, delta: f64, direction: Direction) -> f64 {
    let low = (mu_a - delta).max(0.0);
    let high = mu_a + delta;
    let take_low = match direction {
        Direction::Worst => h_hat < v,
        Direction::Best => h_hat > v,
    };
    if take_low {
        low
    } else {
        high
    }
}

/// Hazards allowed at time `t`: `[(μ_a(t) - δ)_+, μ_a(t) + δ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardBand {
    survival: AnnualSurvival,
    kind: FaaKind,
    delta: f64,
}

impl HazardBand {
    pub fn new(survival: AnnualSurvival, kind: FaaKind, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "band half-width must be >= 0, got {delta}"
            )));
        }
        if survival.years() == 0 {
            return Err(Error::InvalidParameter(
                "band needs at least one year of survival data".into(),
            ));
        }
        Ok(Self { survival, kind, delta })
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.survival.clone(), self.kind, delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> FaaKind {
        self.kind
    }

    pub fn survival(&self) -> &AnnualSurvival {
        &self.survival
    }

    pub fn years(&self) -> usize {
        self.survival.years()
    }

    fn hazard(&self, year: usize, u: f64) -> f64 {
        self.kind.within_year_hazard(self.survival.probs()[year], u)
    }

    /// Baseline hazard, right limit at integer times (left limit at the horizon).
    pub fn baseline(&self, t: f64) -> f64 {
        let n = self.years();
        let year = (t.floor().max(0.0) as usize).min(n - 1);
        self.hazard(year, (t - year as f64).clamp(0.0, 1.0))
    }

    /// Baseline hazard, left limit at integer times.
    pub fn baseline_left(&self, t: f64) -> f64 {
        if t > 0.0 && t == t.floor() {
            let year = (t as usize - 1).min(self.years() - 1);
            return self.hazard(year, (t - year as f64).clamp(0.0, 1.0));
        }
        self.baseline(t)
    }

    /// Band baseline evaluated as a left or right limit.
    pub fn baseline_at(&self, t: f64, left: bool) -> f64 {
        if left {
            self.baseline_left(t)
        } else {
            self.baseline(t)
        }
    }

    pub fn edges(&self, t: f64) -> (f64, f64) {
        let mu = self.baseline(t);
        ((mu - self.delta).max(0.0), mu + self.delta)
    }

    /// `ⱼp̂` for `j = 1..=n`.
    pub fn target(&self, j: usize) -> f64 {
        self.survival.cumulative(j)
    }
}

/// Uniform grid in `x = ln a` and the number of time steps per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
}

impl GridSpec {
    pub const DEFAULT_NX: usize = 401;
    pub const DEFAULT_NT: usize = 64;

    /// `ln A_0 ± 6 σ √T`, with a floor on the half-width for tiny volatilities.
    pub fn around(a0: f64, sigma: f64, horizon: f64, nx: usize, nt: usize) -> Self {
        let half = (6.0 * sigma * horizon.sqrt()).max(0.5);
        let centre = a0.ln();
        Self {
            x_min: centre - half,
            x_max: centre + half,
            nx,
            nt,
        }
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nx)
            .map(|i| {
                if i + 1 == self.nx {
                    self.x_max
                } else {
                    self.x_min + h * i as f64
                }
            })
            .collect()
    }

    /// Same range with both resolutions doubled (`nx` stays odd).
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            nt: 2 * self.nt,
            ..*self
        }
    }
}

/// Constraint years used in the dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    TerminalOnly,
    Full,
}

impl ConstraintMode {
    pub fn times(self, n: usize) -> Vec<usize> {
        match self {
            ConstraintMode::TerminalOnly => vec![n],
            ConstraintMode::Full => (1..=n).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbConfig {
    pub n: usize,
    pub r: f64,
    pub sigma_a: f64,
    pub grid: GridSpec,
    pub constraint_times: Vec<usize>,
    pub direction: Direction,
    pub mask: PayoffMask,
    pub policy_tol: f64,
    pub max_policy_iter: usize,
}

impl HjbConfig {
    /// Deterministic-rate setting for `spec` at the default grid.
    pub fn reduced(
        spec: &ContractSpec,
        fund: &FundParams,
        r: f64,
        sigma_s: f64,
        direction: Direction,
        mode: ConstraintMode,
    ) -> Result<Self> {
        let n = integer_maturity(spec.maturity)?;
        let sigma_a = fund.pi_s * sigma_s;
        let cfg = Self {
            n,
            r,
            sigma_a,
            grid: GridSpec::around(fund.a0, sigma_a, n as f64, GridSpec::DEFAULT_NX, GridSpec::DEFAULT_NT),
            constraint_times: mode.times(n),
            direction,
            mask: spec.payoff_mask(),
            policy_tol: 1e-10,
            max_policy_iter: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            direction,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 {
            return bad("horizon must be at least one year".into());
        }
        if self.grid.nx < 3 || self.grid.nt < 1 || !(self.grid.x_min < self.grid.x_max) {
            return bad(format!("degenerate grid {:?}", self.grid));
        }
        if !(self.sigma_a >= 0.0) || !self.r.is_finite() {
            return bad("need sigma_A >= 0 and finite r".into());
        }
        if self.constraint_times.is_empty() {
            return bad("at least one constraint time is required".into());
        }
        let mut last = 0;
        for &j in &self.constraint_times {
            if j <= last || j > self.n {
                return bad(format!(
                    "constraint times must increase within 1..={}, got {:?}",
                    self.n, self.constraint_times
                ));
            }
            last = j;
        }
        if self.max_policy_iter == 0 || !(self.policy_tol > 0.0) {
            return bad("policy iteration needs a positive cap and tolerance".into());
        }
        Ok(())
    }

    pub fn is_constraint(&self, j: usize) -> bool {
        self.constraint_times.contains(&j)
    }
}

pub(crate) fn integer_maturity(maturity: f64) -> Result<usize> {
    if maturity >= 1.0 && maturity == maturity.floor() && maturity.is_finite() {
        Ok(maturity as usize)
    } else {
        Err(Error::NonIntegerMaturity(maturity))
    }
}

/// Multipliers `λ_1..λ_n`; entries at inactive times stay zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaVector {
    pub values: Vec<f64>,
}

impl LambdaVector {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    /// `λ_j` for `j` in `1..=n`.
    pub fn get(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    pub fn set(&mut self, j: usize, value: f64) {
        self.values[j - 1] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outcome of the outer dual problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedBounds {
    pub value: f64,
    pub direction: Direction,
    pub lambda_star: LambdaVector,
    pub constraint_times: Vec<usize>,
    /// `|E[e^{-∫μ*}] - ⱼp̂|`, aligned with `constraint_times`.
    pub residuals: Vec<f64>,
    pub dual_iterations: usize,
    pub delta: f64,
}

impl RelaxedBounds {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}
