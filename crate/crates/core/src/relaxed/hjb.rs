//! Finite differences for the reduced HJB equation and its companion
//! survival equation.
//!
//! Space is a uniform grid in `x = ln a`. Time runs backwards with
//! Crank–Nicolson, except that the step right before every payoff or
//! multiplier discontinuity is replaced by two implicit Euler half steps.
//! At each step the implicit control is found by policy iteration. At the
//! two edges the value is taken to be linear in `a`, i.e. `v_aa = 0`, which
//! in log coordinates turns the generator into a pure transport term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bang_bang_control, integer_maturity, Direction, HazardBand, HjbConfig, LambdaVector};
use crate::error::{Error, Result};
use crate::market::{ContractSpec, FundParams};

/// Value and optimal hazard on every time level of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    pub times: Vec<f64>,
    /// Implicitness of the step from `times[k]` to `times[k + 1]`.
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    /// At a multiplier time the stored value is the left limit `v(j⁻)`.
    pub values: Vec<Vec<f64>>,
    /// Hazard used on the implicit side of the step leaving level `k`.
    pub policy: Vec<Vec<f64>>,
    /// Hazard at level `k` seen from the left, used on explicit sides.
    pub policy_left: Vec<Vec<f64>>,
    pub centre: usize,
    pub direction: Direction,
}

impl ValueSurface {
    /// `v(0, ln A_0)`.
    pub fn value_at_origin(&self) -> f64 {
        self.values[0][self.centre]
    }

    pub fn level_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }
}

struct TimeGrid {
    times: Vec<f64>,
    theta: Vec<f64>,
}

fn time_grid(cfg: &HjbConfig) -> TimeGrid {
    let nt = cfg.grid.nt;
    let total = cfg.n * nt;
    let at = |k: usize| k as f64 / nt as f64;
    let mut times = vec![0.0];
    let mut theta = Vec::with_capacity(total + cfg.constraint_times.len() + 1);
    for k in 0..total {
        let (t0, t1) = (at(k), at(k + 1));
        let end_is_jump = (k + 1) % nt == 0 && {
            let j = (k + 1) / nt;
            j == cfg.n || cfg.is_constraint(j)
        };
        if end_is_jump {
            times.push(0.5 * (t0 + t1));
            theta.push(1.0);
            theta.push(1.0);
        } else {
            theta.push(0.5);
        }
        times.push(t1);
    }
    TimeGrid { times, theta }
}

/// Tridiagonal generator `L v_i = lo_i v_{i-1} + di_i v_i + up_i v_{i+1}`.
struct Generator {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Generator {
    fn new(nx: usize, h: f64, r: f64, sigma: f64, discount: f64) -> Self {
        let diff = 0.5 * sigma * sigma / (h * h);
        let drift = r - 0.5 * sigma * sigma;
        let (mut lo_c, mut up_c) = (diff - drift / (2.0 * h), diff + drift / (2.0 * h));
        if lo_c < 0.0 || up_c < 0.0 {
            if drift > 0.0 {
                lo_c = diff;
                up_c = diff + drift / h;
            } else {
                lo_c = diff - drift / h;
                up_c = diff;
            }
        }
        let mut lo = vec![lo_c; nx];
        let mut up = vec![up_c; nx];
        let mut di = vec![-lo_c - up_c - discount; nx];
        // v_xx = v_x at the edges: only the transport term r v_x survives
        lo[0] = 0.0;
        up[0] = r / h;
        di[0] = -r / h - discount;
        lo[nx - 1] = -r / h;
        up[nx - 1] = 0.0;
        di[nx - 1] = r / h - discount;
        Self { lo, di, up }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let mut s = self.di[i] * v[i];
            if i > 0 {
                s += self.lo[i] * v[i - 1];
            }
            if i + 1 < n {
                s += self.up[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solves `(I - c L + c diag(μ)) v = rhs` by the Thomas algorithm.
    fn solve_implicit(&self, c: f64, mu: &[f64], rhs: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let n = rhs.len();
        let diag = |i: usize| 1.0 - c * self.di[i] + c * mu[i];
        let mut beta = diag(0);
        out[0] = rhs[0] / beta;
        for i in 1..n {
            scratch[i] = -c * self.up[i - 1] / beta;
            let sub = -c * self.lo[i];
            beta = diag(i) - sub * scratch[i];
            out[i] = (rhs[i] - sub * out[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            out[i] -= scratch[i + 1] * out[i + 1];
        }
    }
}

struct Payoffs<'a> {
    cfg: &'a HjbConfig,
    spec: &'a ContractSpec,
    fund: &'a FundParams,
    a: Vec<f64>,
}

impl Payoffs<'_> {
    fn terminal(&self, out: &mut [f64]) {
        let g = self.spec.guarantee(self.fund, self.cfg.n as f64);
        for (o, &a) in out.iter_mut().zip(&self.a) {
            *o = if self.cfg.mask.gmab { a.max(g) } else { 0.0 };
        }
    }

    /// Income flow rate `A_0 r_g + (a - G_t)_+`.
    fn flow(&self, t: f64, out: &mut [f64]) {
        if !self.cfg.mask.gmib {
            out.fill(0.0);
            return;
        }
        let g = self.spec.guarantee(self.fund, t);
        let base = self.fund.a0 * self.spec.rg;
        for (o, &a) in out.iter_mut().zip(&self.a) {
            *o = base + (a - g).max(0.0);
        }
    }

    /// Death benefit `max(a, G_t)`.
    fn death(&self, t: f64, out: &mut [f64]) {
        if !self.cfg.mask.gmdb {
            out.fill(0.0);
            return;
        }
        let g = self.spec.guarantee(self.fund, t);
        for (o, &a) in out.iter_mut().zip(&self.a) {
            *o = a.max(g);
        }
    }
}

fn policy_into(out: &mut [f64], h_hat: &[f64], v: &[f64], mu_a: f64, delta: f64, dir: Direction) {
    for ((o, &h), &w) in out.iter_mut().zip(h_hat).zip(v) {
        *o = bang_bang_control(h, w, mu_a, delta, dir);
    }
}

fn check_inputs(cfg: &HjbConfig, band: &HazardBand, spec: &ContractSpec) -> Result<()> {
    cfg.validate()?;
    let n = integer_maturity(spec.maturity)?;
    if n != cfg.n || spec.t != 0.0 {
        return Err(Error::GridMismatch(format!(
            "contract runs over [{}, {}] but the grid covers [0, {}]",
            spec.t, spec.maturity, cfg.n
        )));
    }
    if band.years() < cfg.n {
        return Err(Error::HorizonExceeded {
            t: cfg.n as f64,
            horizon: band.years(),
        });
    }
    Ok(())
}

/// Backward solve of the HJB equation for fixed multipliers.
pub fn hjb_solve(
    cfg: &HjbConfig,
    band: &HazardBand,
    spec: &ContractSpec,
    fund: &FundParams,
    lambda: &LambdaVector,
) -> Result<ValueSurface> {
    check_inputs(cfg, band, spec)?;
    if lambda.len() != cfg.n || lambda.values.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need {} finite multipliers, got {:?}",
            cfg.n, lambda.values
        )));
    }
    let grid = time_grid(cfg);
    let x = cfg.grid.nodes();
    let nx = x.len();
    let gen = Generator::new(nx, cfg.grid.step(), cfg.r, cfg.sigma_a, cfg.r);
    let pay = Payoffs {
        cfg,
        spec,
        fund,
        a: x.iter().map(|v| v.exp()).collect(),
    };
    let dir = cfg.direction;
    let sgn = dir.sign();
    let delta = band.delta();
    let jump = |j: usize| {
        if cfg.is_constraint(j) {
            sgn * lambda.get(j) * (cfg.r * j as f64).exp()
        } else {
            0.0
        }
    };

    let levels = grid.times.len();
    let mut values = vec![Vec::new(); levels];
    let mut policy = vec![Vec::new(); levels];
    let mut policy_left = vec![Vec::new(); levels];

    let last = levels - 1;
    let t_end = grid.times[last];
    let mut v = vec![0.0; nx];
    pay.terminal(&mut v);
    let shift = jump(cfg.n);
    v.iter_mut().for_each(|w| *w -= shift);
    let mut h_next = vec![0.0; nx];
    pay.death(t_end, &mut h_next);
    let mut mu_left = vec![0.0; nx];
    policy_into(&mut mu_left, &h_next, &v, band.baseline_left(t_end), delta, dir);
    policy[last] = mu_left.clone();
    policy_left[last] = mu_left.clone();
    values[last] = v.clone();

    let mut src_next = vec![0.0; nx];
    pay.flow(t_end, &mut src_next);
    let mut src = vec![0.0; nx];
    let mut h_now = vec![0.0; nx];
    let mut lv = vec![0.0; nx];
    let mut base = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut v_new = vec![0.0; nx];
    let mut mu = vec![0.0; nx];
    let mut mu_try = vec![0.0; nx];
    let mut scratch = vec![0.0; nx];

    for k in (0..last).rev() {
        let (t0, t1) = (grid.times[k], grid.times[k + 1]);
        let dt = t1 - t0;
        let th = grid.theta[k];
        pay.flow(t0, &mut src);
        pay.death(t0, &mut h_now);

        let c_exp = (1.0 - th) * dt;
        if c_exp > 0.0 {
            gen.apply(&v, &mut lv);
            for i in 0..nx {
                base[i] = v[i] + c_exp * (lv[i] + src_next[i] + mu_left[i] * (h_next[i] - v[i]));
            }
        } else {
            base.copy_from_slice(&v);
        }
        let c_imp = th * dt;
        for i in 0..nx {
            base[i] += c_imp * src[i];
        }

        let mu_a = band.baseline(t0);
        policy_into(&mut mu, &h_now, &v, mu_a, delta, dir);
        let mut iterations = 0;
        loop {
            for i in 0..nx {
                rhs[i] = base[i] + c_imp * mu[i] * h_now[i];
            }
            gen.solve_implicit(c_imp, &mu, &rhs, &mut v_new, &mut scratch);
            iterations += 1;
            policy_into(&mut mu_try, &h_now, &v_new, mu_a, delta, dir);
            if mu_try == mu {
                break;
            }
            if iterations > 1 {
                let change = v_new
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                if change <= cfg.policy_tol {
                    break;
                }
            }
            if iterations >= cfg.max_policy_iter {
                return Err(Error::GridTooCoarse { t: t0, iterations });
            }
            mu.copy_from_slice(&mu_try);
            // v holds the previous sweep from here on; the explicit part is already in `base`
            v.copy_from_slice(&v_new);
        }
        v.copy_from_slice(&v_new);

        if t0 > 0.0 && t0 == t0.floor() {
            let shift = jump(t0 as usize);
            if shift != 0.0 {
                v.iter_mut().for_each(|w| *w -= shift);
            }
        }
        policy[k] = mu.clone();
        policy_into(&mut mu_left, &h_now, &v, band.baseline_left(t0), delta, dir);
        policy_left[k] = mu_left.clone();
        values[k] = v.clone();
        std::mem::swap(&mut src_next, &mut src);
        std::mem::swap(&mut h_next, &mut h_now);
    }

    Ok(ValueSurface {
        times: grid.times,
        theta: grid.theta,
        centre: nx / 2,
        x,
        values,
        policy,
        policy_left,
        direction: dir,
    })
}

/// `E[e^{-∫_0^j μ*(s, A_s) ds}]` for each constraint time, started at `(0, ln A_0)`.
pub fn constraint_survival(cfg: &HjbConfig, band: &HazardBand, surface: &ValueSurface) -> Result<Vec<f64>> {
    cfg.validate()?;
    let expected = time_grid(cfg);
    if surface.x.len() != cfg.grid.nx
        || surface.times != expected.times
        || surface.policy.iter().any(|p| p.len() != cfg.grid.nx)
    {
        return Err(Error::GridMismatch(format!(
            "policy lives on {} nodes x {} levels, config expects {} x {}",
            surface.x.len(),
            surface.times.len(),
            cfg.grid.nx,
            expected.times.len()
        )));
    }
    if band.years() < cfg.n {
        return Err(Error::HorizonExceeded {
            t: cfg.n as f64,
            horizon: band.years(),
        });
    }
    let nx = cfg.grid.nx;
    let gen = Generator::new(nx, cfg.grid.step(), cfg.r, cfg.sigma_a, 0.0);
    cfg.constraint_times
        .par_iter()
        .map(|&j| {
            let start = surface
                .level_of(j as f64)
                .ok_or_else(|| Error::GridMismatch(format!("no time level at t = {j}")))?;
            let mut u = vec![1.0; nx];
            let mut lu = vec![0.0; nx];
            let mut rhs = vec![0.0; nx];
            let mut next = vec![0.0; nx];
            let mut scratch = vec![0.0; nx];
            for k in (0..start).rev() {
                let dt = surface.times[k + 1] - surface.times[k];
                let th = surface.theta[k];
                let c_exp = (1.0 - th) * dt;
                if c_exp > 0.0 {
                    gen.apply(&u, &mut lu);
                    let ml = &surface.policy_left[k + 1];
                    for i in 0..nx {
                        rhs[i] = u[i] + c_exp * (lu[i] - ml[i] * u[i]);
                    }
                } else {
                    rhs.copy_from_slice(&u);
                }
                gen.solve_implicit(th * dt, &surface.policy[k], &rhs, &mut next, &mut scratch);
                std::mem::swap(&mut u, &mut next);
            }
            Ok(u[surface.centre])
        })
        .collect()
}
