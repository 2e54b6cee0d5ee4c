//! Monte Carlo pricing under a given mortality intensity, used to audit the
//! closed forms and both families of bounds.
//!
//! Mortality enters through survival weights `e^{-∫μ}` rather than sampled
//! death times. Paths are generated lazily in fixed blocks of
//! [`BLOCK_PATHS`]; block `b` draws from ChaCha8 stream `b` of the seed, so
//! results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetable::{AnnualSurvival, FaaKind};
use crate::market::{ContractSpec, FundParams, MarketParams};
use crate::relaxed::{HazardBand, RelaxedBounds};
use crate::strict::{Intervention, StrictBounds};

pub const BLOCK_PATHS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps_per_year: 64,
            seed: 20_240_601,
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 || self.steps_per_year == 0 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 paths and 1 step per year, got {} and {}",
                self.paths, self.steps_per_year
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

impl McEstimate {
    /// Sample mean and standard error; antithetic pairs count as one draw.
    pub fn from_samples(values: &[f64], antithetic: bool) -> Self {
        let draws: Vec<f64> = if antithetic {
            values
                .chunks(2)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect()
        } else {
            values.to_vec()
        };
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = if draws.len() > 1 {
            draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
            paths: values.len(),
        }
    }

    /// Whether `lower - k·se ≤ mean ≤ upper + k·se`.
    pub fn within(&self, lower: f64, upper: f64, k: f64) -> bool {
        self.mean >= lower - k * self.stderr && self.mean <= upper + k * self.stderr
    }
}

/// One simulated trajectory on the shared time grid.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub times: &'a [f64],
    pub fund: &'a [f64],
    pub rate: &'a [f64],
    /// Running `∫_0^t r`, trapezoidal.
    pub integrated_rate: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnedPath {
    pub fund: Vec<f64>,
    pub rate: Vec<f64>,
    pub integrated_rate: Vec<f64>,
}

impl OwnedPath {
    fn zeros(len: usize) -> Self {
        Self {
            fund: vec![0.0; len],
            rate: vec![0.0; len],
            integrated_rate: vec![0.0; len],
        }
    }

    pub fn view<'a>(&'a self, times: &'a [f64]) -> PathView<'a> {
        PathView {
            times,
            fund: &self.fund,
            rate: &self.rate,
            integrated_rate: &self.integrated_rate,
        }
    }
}

/// Anything that can hand out simulated paths in a fixed order.
pub trait PathSource: Sync {
    fn times(&self) -> &[f64];
    fn fund_params(&self) -> &FundParams;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn antithetic(&self) -> bool;
    /// `f` applied to every path, results in path order.
    fn map_paths<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&PathView) -> f64 + Sync;
}

/// Lazily generated paths of the short rate and the fund.
///
/// The short rate is Hull–White, stepped exactly as `r = x + α(t)` with an
/// Ornstein–Uhlenbeck `x`; the log-fund is stepped with the trapezoidal rate
/// in its drift so that `e^{-∫r} A` is an exact martingale on the grid.
#[derive(Debug, Clone)]
pub struct PathSet {
    mkt: MarketParams,
    fund: FundParams,
    horizon: f64,
    cfg: McConfig,
    times: Vec<f64>,
    /// Deterministic part `α(t_k)` of the short rate.
    alpha: Vec<f64>,
    /// Fund volatility loadings on the two independent normals, per step.
    loadings: Vec<[f64; 2]>,
}

pub fn simulate_market_paths(mkt: &MarketParams, fund: &FundParams, horizon: f64, cfg: &McConfig) -> Result<PathSet> {
    mkt.validate()?;
    fund.validate()?;
    cfg.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let spy = cfg.steps_per_year as f64;
    let steps = (horizon * spy - 1e-9).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| (k as f64 / spy).min(horizon)).collect();
    let k = mkt.kappa;
    let s2 = mkt.sigma_r * mkt.sigma_r;
    let alpha = times
        .iter()
        .map(|&t| mkt.curve.forward(t) + s2 / (2.0 * k * k) * (-k * t).exp_m1().powi(2))
        .collect();
    let chol = mkt.cholesky();
    let loadings = times
        .windows(2)
        .map(|w| {
            let b = mkt.b_factor(w[0], horizon);
            let bond = -fund.pi_p * mkt.sigma_r * b;
            [fund.pi_s * mkt.sigma_s + bond * chol[1][0], bond * chol[1][1]]
        })
        .collect();
    Ok(PathSet {
        mkt: *mkt,
        fund: *fund,
        horizon,
        cfg: *cfg,
        times,
        alpha,
        loadings,
    })
}

impl PathSet {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn config(&self) -> &McConfig {
        &self.cfg
    }

    fn blocks(&self) -> usize {
        self.cfg.paths.div_ceil(BLOCK_PATHS)
    }

    /// Simulates block `b`, calling `sink(index_in_block, path)` in order.
    fn run_block(&self, b: usize, mut sink: impl FnMut(usize, &OwnedPath)) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(b as u64);
        let count = BLOCK_PATHS.min(self.cfg.paths - b * BLOCK_PATHS);
        let n = self.times.len();
        let mut pair = [OwnedPath::zeros(n), OwnedPath::zeros(n)];
        let mut normals = vec![[0.0f64; 2]; n - 1];
        let mut i = 0;
        while i < count {
            for z in normals.iter_mut() {
                *z = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            }
            let twins = if self.cfg.antithetic { 2.min(count - i) } else { 1 };
            for (t, path) in pair.iter_mut().enumerate().take(twins) {
                let sign = if t == 0 { 1.0 } else { -1.0 };
                self.fill(path, &normals, sign);
                sink(i + t, path);
            }
            i += twins;
        }
    }

    fn fill(&self, path: &mut OwnedPath, normals: &[[f64; 2]], sign: f64) {
        let mkt = &self.mkt;
        let chol = mkt.cholesky();
        let mut x = mkt.r0 - self.alpha[0];
        let mut ln_a = self.fund.a0.ln();
        let mut integral = 0.0;
        path.fund[0] = self.fund.a0;
        path.rate[0] = mkt.r0;
        path.integrated_rate[0] = 0.0;
        for (k, z) in normals.iter().enumerate() {
            let dt = self.times[k + 1] - self.times[k];
            let (z1, z2) = (sign * z[0], sign * z[1]);
            let decay = (-mkt.kappa * dt).exp();
            let ou_sd = mkt.sigma_r * (-(-2.0 * mkt.kappa * dt).exp_m1() / (2.0 * mkt.kappa)).sqrt();
            let r_prev = x + self.alpha[k];
            x = x * decay + ou_sd * (chol[1][0] * z1 + chol[1][1] * z2);
            let r_next = x + self.alpha[k + 1];
            let r_bar = 0.5 * (r_prev + r_next);
            let [l1, l2] = self.loadings[k];
            let var = l1 * l1 + l2 * l2;
            let sq = dt.sqrt();
            ln_a += (r_bar - 0.5 * var) * dt + sq * (l1 * z1 + l2 * z2);
            integral += r_bar * dt;
            path.fund[k + 1] = ln_a.exp();
            path.rate[k + 1] = r_next;
            path.integrated_rate[k + 1] = integral;
        }
    }

    /// Path `i`, regenerated from its block.
    pub fn path(&self, i: usize) -> Result<OwnedPath> {
        if i >= self.cfg.paths {
            return Err(Error::InvalidParameter(format!("path {i} of {}", self.cfg.paths)));
        }
        let mut out = None;
        self.run_block(i / BLOCK_PATHS, |j, p| {
            if j == i % BLOCK_PATHS {
                out = Some(p.clone());
            }
        });
        Ok(out.expect("path inside its block"))
    }

    /// Every path held in memory; sized for audits, not for 10⁶ paths.
    pub fn materialize(&self) -> StoredPaths {
        let n = self.times.len();
        let mut fund = vec![0.0; self.cfg.paths * n];
        let mut rate = vec![0.0; self.cfg.paths * n];
        let mut integrated = vec![0.0; self.cfg.paths * n];
        let width = BLOCK_PATHS * n;
        fund.par_chunks_mut(width)
            .zip(rate.par_chunks_mut(width))
            .zip(integrated.par_chunks_mut(width))
            .enumerate()
            .for_each(|(b, ((f, r), d))| {
                self.run_block(b, |j, p| {
                    f[j * n..(j + 1) * n].copy_from_slice(&p.fund);
                    r[j * n..(j + 1) * n].copy_from_slice(&p.rate);
                    d[j * n..(j + 1) * n].copy_from_slice(&p.integrated_rate);
                });
            });
        StoredPaths {
            times: self.times.clone(),
            fund_params: self.fund,
            antithetic: self.cfg.antithetic,
            fund,
            rate,
            integrated_rate: integrated,
        }
    }
}

impl PathSource for PathSet {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn fund_params(&self) -> &FundParams {
        &self.fund
    }

    fn len(&self) -> usize {
        self.cfg.paths
    }

    fn antithetic(&self) -> bool {
        self.cfg.antithetic
    }

    fn map_paths<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&PathView) -> f64 + Sync,
    {
        let per_block: Vec<Vec<f64>> = (0..self.blocks())
            .into_par_iter()
            .map(|b| {
                let mut out = Vec::with_capacity(BLOCK_PATHS);
                self.run_block(b, |_, p| out.push(f(&p.view(&self.times))));
                out
            })
            .collect();
        per_block.concat()
    }
}

/// Paths held in memory, row-major by path.
#[derive(Debug, Clone)]
pub struct StoredPaths {
    times: Vec<f64>,
    fund_params: FundParams,
    antithetic: bool,
    fund: Vec<f64>,
    rate: Vec<f64>,
    integrated_rate: Vec<f64>,
}

impl StoredPaths {
    pub fn view(&self, i: usize) -> PathView<'_> {
        let n = self.times.len();
        let span = i * n..(i + 1) * n;
        PathView {
            times: &self.times,
            fund: &self.fund[span.clone()],
            rate: &self.rate[span.clone()],
            integrated_rate: &self.integrated_rate[span],
        }
    }
}

impl PathSource for StoredPaths {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn fund_params(&self) -> &FundParams {
        &self.fund_params
    }

    fn len(&self) -> usize {
        self.fund.len() / self.times.len()
    }

    fn antithetic(&self) -> bool {
        self.antithetic
    }

    fn map_paths<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&PathView) -> f64 + Sync,
    {
        (0..self.len()).into_par_iter().map(|i| f(&self.view(i))).collect()
    }
}

/// Mortality intensity `μ(t, A_t)` with optional discrete killings.
pub trait Hazard: Sync {
    /// Intensity just after `t`.
    fn rate(&self, t: f64, fund: f64) -> f64;

    /// Intensity just before `t`.
    fn rate_before(&self, t: f64, fund: f64) -> f64 {
        self.rate(t, fund)
    }

    /// Killings: survival is multiplied by `1 - jump` at `tau`.
    fn interventions(&self) -> &[Intervention] {
        &[]
    }
}

/// Deterministic intensity `μ(t)`.
pub struct DeterministicHazard<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Hazard for DeterministicHazard<F> {
    fn rate(&self, t: f64, _fund: f64) -> f64 {
        (self.0)(t)
    }
}

/// The smooth intensity of a fractional-age assumption.
#[derive(Debug, Clone)]
pub struct FaaHazard {
    pub survival: AnnualSurvival,
    pub kind: FaaKind,
}

impl FaaHazard {
    fn in_year(&self, year: usize, u: f64) -> f64 {
        let p = self.survival.probs();
        let year = year.min(p.len() - 1);
        self.kind.within_year_hazard(p[year], u.clamp(0.0, 1.0))
    }
}

impl Hazard for FaaHazard {
    fn rate(&self, t: f64, _fund: f64) -> f64 {
        let year = t.floor().max(0.0) as usize;
        self.in_year(year, t - year as f64)
    }

    fn rate_before(&self, t: f64, fund: f64) -> f64 {
        if t > 0.0 && t == t.floor() {
            let year = t as usize - 1;
            return self.in_year(year, 1.0);
        }
        self.rate(t, fund)
    }
}

/// A continuous intensity together with discrete killings.
pub struct WithInterventions<H> {
    pub hazard: H,
    pub interventions: Vec<Intervention>,
}

impl<H: Hazard> Hazard for WithInterventions<H> {
    fn rate(&self, t: f64, fund: f64) -> f64 {
        self.hazard.rate(t, fund)
    }

    fn rate_before(&self, t: f64, fund: f64) -> f64 {
        self.hazard.rate_before(t, fund)
    }

    fn interventions(&self) -> &[Intervention] {
        &self.interventions
    }
}

fn grid_index(times: &[f64], t: f64) -> Option<usize> {
    let k = times.partition_point(|&s| s < t - 1e-9);
    (k < times.len() && (times[k] - t).abs() <= 1e-9).then_some(k)
}

/// Discounted contract cash flows weighted by survival, one value per path.
fn path_value<H: Hazard + ?Sized>(
    spec: &ContractSpec,
    fund: &FundParams,
    p: &PathView,
    end: usize,
    hazard: &H,
    jumps: &[(usize, f64)],
) -> f64 {
    let mask = spec.payoff_mask();
    let times = p.times;
    let disc = |k: usize| (-p.integrated_rate[k]).exp();
    let death = |k: usize| p.fund[k].max(spec.guarantee(fund, times[k]));
    let flow = |k: usize| fund.a0 * spec.rg + (p.fund[k] - spec.guarantee(fund, times[k])).max(0.0);
    let mut jump_iter = jumps.iter().peekable();
    let mut alive = 1.0;
    let mut value = 0.0;
    let mut apply_jumps = |k: usize, alive: &mut f64, value: &mut f64| {
        while let Some(&&(at, jump)) = jump_iter.peek() {
            if at != k {
                break;
            }
            if mask.gmdb {
                *value += disc(k) * death(k) * *alive * jump;
            }
            *alive *= 1.0 - jump;
            jump_iter.next();
        }
    };
    apply_jumps(0, &mut alive, &mut value);
    for k in 0..end {
        let dt = times[k + 1] - times[k];
        let mu0 = hazard.rate(times[k], p.fund[k]);
        let mu1 = hazard.rate_before(times[k + 1], p.fund[k + 1]);
        let next = alive * (-0.5 * (mu0 + mu1) * dt).exp();
        if mask.gmib {
            value += 0.5 * dt * (disc(k) * alive * flow(k) + disc(k + 1) * next * flow(k + 1));
        }
        if mask.gmdb {
            value += 0.5 * dt * (disc(k) * alive * mu0 * death(k) + disc(k + 1) * next * mu1 * death(k + 1));
        }
        alive = next;
        apply_jumps(k + 1, &mut alive, &mut value);
    }
    if mask.gmab {
        value += disc(end) * alive * p.fund[end].max(spec.guarantee(fund, times[end]));
    }
    value
}

/// Price of the contract when mortality follows `hazard`.
pub fn mc_price<P: PathSource, H: Hazard + ?Sized>(spec: &ContractSpec, paths: &P, hazard: &H) -> Result<McEstimate> {
    spec.validate()?;
    let times = paths.times();
    if spec.t != 0.0 {
        return Err(Error::InconsistentGrid(format!(
            "paths start at 0, contract valued at t = {}",
            spec.t
        )));
    }
    let end = grid_index(times, spec.maturity).ok_or_else(|| {
        Error::InconsistentGrid(format!(
            "maturity {} is not a grid time (grid ends at {})",
            spec.maturity,
            times.last().copied().unwrap_or(0.0)
        ))
    })?;
    let mut jumps = Vec::new();
    for iv in hazard.interventions() {
        if !(0.0..=1.0).contains(&iv.jump) {
            return Err(Error::InvalidParameter(format!("jump {} outside [0,1]", iv.jump)));
        }
        if iv.tau > spec.maturity + 1e-12 {
            continue;
        }
        let k = grid_index(times, iv.tau)
            .ok_or_else(|| Error::InconsistentGrid(format!("intervention at {} is off the grid", iv.tau)))?;
        jumps.push((k, iv.jump));
    }
    jumps.sort_by_key(|&(k, _)| k);
    let fund = *paths.fund_params();
    let values = paths.map_paths(|p| path_value(spec, &fund, p, end, hazard, &jumps));
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "hazard produced a non-finite price contribution {bad}"
        )));
    }
    Ok(McEstimate::from_samples(&values, paths.antithetic()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HazardFamily {
    /// Fractional-age baseline, checked against the strict bounds.
    Faa,
    /// Pathwise-feasible perturbation, checked against the strict bounds.
    StrictFeasible,
    /// Feasible in expectation only, checked against the relaxed bounds.
    ExpectationFeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub family: HazardFamily,
    pub label: String,
    pub estimate: McEstimate,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.inside)
    }

    pub fn violations(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.inside)
    }
}

/// Market, fund and mortality inputs shared by the bounds being audited.
#[derive(Debug, Clone)]
pub struct AuditContext<'a> {
    pub spec: &'a ContractSpec,
    pub mkt: &'a MarketParams,
    pub fund: &'a FundParams,
    pub survival: &'a AnnualSurvival,
    /// Band of the relaxed bounds; needed for expectation-feasible draws.
    pub band: Option<&'a HazardBand>,
}

/// Within-year shape `1 + a sin(2π(f u + φ))`, normalised to unit mean on the grid.
struct Wiggle {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Wiggle {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            amp: rng.random_range(0.0..0.9),
            freq: rng.random_range(1..=3) as f64,
            phase: rng.random::<f64>(),
        }
    }

    fn at(&self, u: f64) -> f64 {
        1.0 + self.amp * (std::f64::consts::TAU * (self.freq * u + self.phase)).sin()
    }
}

/// Piecewise-smooth intensity with pathwise year-by-year survival `p̂_j`,
/// part of each year's mortality optionally moved into a killing at the
/// start or end of the year.
struct StrictDraw {
    /// Per year: shape, scale, continuous share.
    years: Vec<(Wiggle, f64)>,
    interventions: Vec<Intervention>,
}

impl StrictDraw {
    fn new(p: &AnnualSurvival, first: f64, steps_per_year: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut years = Vec::new();
        let mut interventions = Vec::new();
        for (j, &pj) in p.probs().iter().enumerate() {
            let wiggle = Wiggle::draw(rng);
            let share: f64 = if rng.random_bool(0.5) {
                1.0
            } else {
                rng.random_range(0.0..1.0)
            };
            // trapezoidal mean of the shape on the simulation grid
            let n = steps_per_year;
            let mean = (0..n)
                .map(|k| 0.5 * (wiggle.at(k as f64 / n as f64) + wiggle.at((k + 1) as f64 / n as f64)))
                .sum::<f64>()
                / n as f64;
            let total = -pj.ln();
            years.push((wiggle, share * total / mean));
            if share < 1.0 {
                let tau = first + j as f64 + if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                interventions.push(Intervention {
                    tau,
                    jump: 1.0 - (-(1.0 - share) * total).exp(),
                });
            }
        }
        Self { years, interventions }
    }

    fn eval(&self, year: usize, u: f64) -> f64 {
        let (w, scale) = &self.years[year.min(self.years.len() - 1)];
        scale * w.at(u)
    }
}

impl Hazard for StrictDraw {
    fn rate(&self, t: f64, _fund: f64) -> f64 {
        let year = t.floor().max(0.0) as usize;
        self.eval(year, t - year as f64)
    }

    fn rate_before(&self, t: f64, fund: f64) -> f64 {
        if t > 0.0 && t == t.floor() {
            return self.eval(t as usize - 1, 1.0);
        }
        self.rate(t, fund)
    }

    fn interventions(&self) -> &[Intervention] {
        &self.interventions
    }
}

/// Fund-dependent band policy `clip(μ_a + β_s + δ a sin(ω ln(A/A_0) + φ))`
/// with one level shift `β_s` per constraint segment.
struct BandDraw<'a> {
    band: &'a HazardBand,
    a0: f64,
    amp: f64,
    omega: f64,
    phase: f64,
    /// Segment end times and their shifts.
    segments: Vec<(f64, f64)>,
}

impl BandDraw<'_> {
    fn shift(&self, t: f64, left: bool) -> f64 {
        self.segments
            .iter()
            .find(|(end, _)| if left { t <= *end } else { t < *end })
            .or(self.segments.last())
            .map_or(0.0, |s| s.1)
    }

    fn eval(&self, t: f64, fund: f64, left: bool) -> f64 {
        let mu = self.band.baseline_at(t, left);
        let delta = self.band.delta();
        let raw = mu + self.shift(t, left) + delta * self.amp * (self.omega * (fund / self.a0).ln() + self.phase).sin();
        raw.clamp((mu - delta).max(0.0), mu + delta)
    }
}

impl Hazard for BandDraw<'_> {
    fn rate(&self, t: f64, fund: f64) -> f64 {
        self.eval(t, fund, false)
    }

    fn rate_before(&self, t: f64, fund: f64) -> f64 {
        self.eval(t, fund, true)
    }
}

/// Level shifts making `draw` feasible for every constraint on the sample.
///
/// Segments are solved in time order by bisection on the shift. The
/// shift-free part of the intensity is tabulated once per segment and each
/// path's survival up to the previous constraint is carried forward.
fn calibrate_band(draw: &mut BandDraw, paths: &StoredPaths, constraint_times: &[usize]) -> Result<()> {
    let times = paths.times();
    let n_paths = paths.len();
    let delta = draw.band.delta();
    let bound = delta + 1.0;
    let mut prefix = vec![1.0; n_paths];
    let mut start = 0;
    for (s, &j) in constraint_times.iter().enumerate() {
        let end = grid_index(times, j as f64)
            .ok_or_else(|| Error::InconsistentGrid(format!("constraint time {j} is off the grid")))?;
        // per step: (dt, baseline right, baseline left at the next node)
        let steps: Vec<(f64, f64, f64)> = (start..end)
            .map(|k| {
                (
                    times[k + 1] - times[k],
                    draw.band.baseline_at(times[k], false),
                    draw.band.baseline_at(times[k + 1], true),
                )
            })
            .collect();
        let wiggle = |a: f64| delta * draw.amp * (draw.omega * (a / draw.a0).ln() + draw.phase).sin();
        let table: Vec<Vec<[f64; 2]>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let v = paths.view(i);
                (start..end)
                    .map(|k| [wiggle(v.fund[k]), wiggle(v.fund[k + 1])])
                    .collect()
            })
            .collect();
        let clip = |mu: f64, x: f64| x.clamp((mu - delta).max(0.0), mu + delta);
        let survival = |beta: f64| -> Vec<f64> {
            table
                .par_iter()
                .zip(&prefix)
                .map(|(row, &alive)| {
                    let integral: f64 = row
                        .iter()
                        .zip(&steps)
                        .map(|(w, &(dt, m0, m1))| 0.5 * dt * (clip(m0, m0 + beta + w[0]) + clip(m1, m1 + beta + w[1])))
                        .sum();
                    alive * (-integral).exp()
                })
                .collect()
        };
        let target = draw.band.target(j) * n_paths as f64;
        let (mut lo, mut hi) = (-bound, bound);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if survival(mid).iter().sum::<f64>() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let beta = 0.5 * (lo + hi);
        draw.segments[s].1 = beta;
        prefix = survival(beta);
        start = end;
    }
    Ok(())
}

/// Prices sampled admissible intensities and checks them against the bounds.
///
/// Strict-feasible draws and the FAA baselines are checked against
/// `strict`; fund-dependent band policies, calibrated on the simulated
/// sample to meet every expectation constraint of `relaxed`, are checked
/// against the (best, worst) pair.
pub fn verify_bounds(
    ctx: &AuditContext,
    strict: Option<&StrictBounds>,
    relaxed: Option<(&RelaxedBounds, &RelaxedBounds)>,
    samples: usize,
    cfg: &McConfig,
) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    if samples == 0 {
        return Ok(report);
    }
    let spec = ctx.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_a0d1);
    let paths = simulate_market_paths(ctx.mkt, ctx.fund, spec.maturity, cfg)?.materialize();
    let years = spec.whole_years();
    let p = ctx.survival.truncated(years)?;
    let mut check = |family, label: String, est: McEstimate, lower: f64, upper: f64| {
        report.checks.push(AuditCheck {
            family,
            label,
            estimate: est,
            lower,
            upper,
            inside: est.within(lower, upper, 3.0),
        });
    };

    if let Some(b) = strict {
        for kind in FaaKind::ALL {
            let h = FaaHazard {
                survival: p.clone(),
                kind,
            };
            let est = mc_price(spec, &paths, &h)?;
            check(HazardFamily::Faa, kind.name().to_string(), est, b.lower, b.upper);
        }
        for i in 0..samples {
            let h = StrictDraw::new(&p, spec.first_knot(), cfg.steps_per_year, &mut rng);
            let est = mc_price(spec, &paths, &h)?;
            check(
                HazardFamily::StrictFeasible,
                format!("strict-{i}"),
                est,
                b.lower,
                b.upper,
            );
        }
    }

    if let Some((best, worst)) = relaxed {
        let band = ctx
            .band
            .ok_or_else(|| Error::InvalidParameter("auditing relaxed bounds needs the hazard band".into()))?;
        if best.constraint_times != worst.constraint_times {
            return Err(Error::InvalidParameter(
                "best and worst bounds use different constraints".into(),
            ));
        }
        let constraint_times = &worst.constraint_times;
        for i in 0..samples {
            let mut draw = BandDraw {
                band,
                a0: ctx.fund.a0,
                amp: rng.random_range(0.2..1.0),
                omega: rng.random_range(0.5..4.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                segments: constraint_times.iter().map(|&j| (j as f64, 0.0)).collect(),
            };
            calibrate_band(&mut draw, &paths, constraint_times)?;
            let est = mc_price(spec, &paths, &draw)?;
            check(
                HazardFamily::ExpectationFeasible,
                format!("band-{i}"),
                est,
                best.value,
                worst.value,
            );
        }
    }
    Ok(report)
}
