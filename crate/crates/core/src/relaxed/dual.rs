//! Outer problem over the multipliers.
//!
//! Both directions are written as the minimisation of a convex function
//! `φ(λ)` (the dual for the worst case, minus the dual for the best case)
//! whose gradient is `ⱼp̂ - E[e^{-∫μ*}]`. On a finite grid the optimal policy
//! is piecewise constant in `λ`, so `φ` is piecewise affine, with a few
//! large kinks where the whole policy flips and many small grid facets. The
//! default is a proximal bundle method, which switches to gradient sampling
//! once the cutting-plane model can no longer resolve the facets. A
//! trust-region Newton iteration on a finite-difference curvature and a
//! projected subgradient method with Polyak averaging are kept as
//! alternatives.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{constraint_survival, hjb_solve, HazardBand, HjbConfig, LambdaVector, RelaxedBounds};
use crate::error::{Error, Result};
use crate::market::{ContractSpec, FundParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualMethod {
    Bundle,
    Newton,
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualOptions {
    pub method: DualMethod,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub obj_tol: f64,
    /// Box `[-bound, bound]` for every multiplier.
    pub bound: f64,
    /// Finite-difference step for the Newton curvature, in currency units.
    pub fd_step: f64,
    /// Length of the first step (bundle) or the starting trust radius
    /// (Newton), in currency units.
    pub initial_radius: f64,
    /// Radius of the ball in which gradients are sampled near a kink; the
    /// residuals are certified over this ball.
    pub sample_radius: f64,
    /// Scale `c` of the subgradient step `c / √k`.
    pub step_scale: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            method: DualMethod::Bundle,
            max_iter: 200,
            grad_tol: 1e-3,
            obj_tol: 1e-6,
            bound: 1e4,
            fd_step: 1.0,
            initial_radius: 25.0,
            sample_radius: 1e-2,
            step_scale: 200.0,
        }
    }
}

/// Trust radius below which the curvature model is abandoned for gradient sampling.
const GS_START: f64 = 0.1;
/// Gradient-sampling steps taken at a kink before the curvature model is retried.
const GS_BURST: usize = 3;
/// Bursts in a row that may fail to move before giving up.
const MAX_STALLS: usize = 2;

enum Sampled {
    Converged(RelaxedBounds),
    Stopped { at: Point, iter: usize, moved: bool },
}

struct Problem<'a> {
    cfg: &'a HjbConfig,
    band: &'a HazardBand,
    spec: &'a ContractSpec,
    fund: &'a FundParams,
    opts: &'a DualOptions,
    /// Every point evaluated so far, for the ε-subgradient stopping rule.
    history: Mutex<Vec<Point>>,
}

#[derive(Debug, Clone)]
struct Point {
    /// Active multipliers, aligned with `cfg.constraint_times`.
    lambda: Vec<f64>,
    phi: f64,
    dual: f64,
    grad: Vec<f64>,
}

impl Point {
    fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem<'_> {
    fn full(&self, active: &[f64]) -> LambdaVector {
        let mut l = LambdaVector::zeros(self.cfg.n);
        for (&j, &v) in self.cfg.constraint_times.iter().zip(active) {
            l.set(j, v);
        }
        l
    }

    fn project(&self, lambda: &mut [f64]) {
        let b = self.opts.bound;
        lambda.iter_mut().for_each(|l| *l = l.clamp(-b, b));
    }

    fn eval(&self, lambda: Vec<f64>) -> Result<Point> {
        let surface = hjb_solve(self.cfg, self.band, self.spec, self.fund, &self.full(&lambda))?;
        let surv = constraint_survival(self.cfg, self.band, &surface)?;
        let sgn = self.cfg.direction.sign();
        let mut dual = surface.value_at_origin();
        let mut grad = Vec::with_capacity(surv.len());
        for ((&j, &l), &s) in self.cfg.constraint_times.iter().zip(&lambda).zip(&surv) {
            let target = self.band.target(j);
            dual += sgn * l * target;
            grad.push(target - s);
        }
        let p = Point {
            lambda,
            phi: sgn * dual,
            dual,
            grad,
        };
        self.history.lock().expect("history lock").push(p.clone());
        Ok(p)
    }

    /// Smallest element of the convex hull of the gradients evaluated within
    /// `radius` of `p` whose linearisation error at `p` is at most `eps`.
    /// The weights mix the corresponding policies.
    fn aggregate(&self, p: &Point, radius: f64, eps: f64) -> Vec<f64> {
        let history = self.history.lock().expect("history lock");
        let bundle: Vec<&[f64]> = history
            .iter()
            .filter(|y| {
                let diff: Vec<f64> = p.lambda.iter().zip(&y.lambda).map(|(a, b)| a - b).collect();
                norm(&diff) <= radius && p.phi - y.phi - dot(&y.grad, &diff) <= eps
            })
            .map(|y| y.grad.as_slice())
            .collect();
        if bundle.is_empty() {
            return p.grad.clone();
        }
        min_norm_in_hull(&bundle)
    }

    fn certificate(&self, p: &Point) -> Vec<f64> {
        self.aggregate(p, self.opts.sample_radius, f64::INFINITY)
    }

    /// Gradients at `2 dim` points drawn uniformly from the ball of radius `r` around `p`.
    fn sample_ball(&self, p: &Point, r: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let m = p.lambda.len();
        let points: Vec<Vec<f64>> = (0..2 * m)
            .map(|_| {
                let dir: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let scale = r * rng.random::<f64>().powf(1.0 / m as f64) / norm(&dir).max(f64::MIN_POSITIVE);
                let mut l: Vec<f64> = p.lambda.iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
                self.project(&mut l);
                l
            })
            .collect();
        points.into_par_iter().map(|l| self.eval(l).map(|_| ())).collect()
    }

    fn bounds(&self, p: &Point, residuals: &[f64], iterations: usize) -> RelaxedBounds {
        RelaxedBounds {
            value: p.dual,
            direction: self.cfg.direction,
            lambda_star: self.full(&p.lambda),
            constraint_times: self.cfg.constraint_times.clone(),
            residuals: residuals.iter().map(|g| g.abs()).collect(),
            dual_iterations: iterations,
            delta: self.band.delta(),
        }
    }

    /// Residuals at a converged point, if `p` is one.
    fn converged(&self, p: &Point, previous: Option<f64>) -> Option<Vec<f64>> {
        let flat = previous.is_none_or(|q| (p.phi - q).abs() <= self.opts.obj_tol * p.phi.abs().max(1.0));
        if p.grad_norm() <= self.opts.grad_tol && flat {
            return Some(p.grad.clone());
        }
        let g = self.certificate(p);
        (norm(&g) <= self.opts.grad_tol).then_some(g)
    }

    fn not_converged(&self, best: &Point, iterations: usize) -> Error {
        let g = self.certificate(best);
        Error::DualNotConverged {
            iterations,
            grad_norm: norm(&g),
            best: Box::new(self.bounds(best, &g, iterations)),
        }
    }

    /// Symmetrised forward-difference Hessian of `φ`.
    fn curvature(&self, p: &Point) -> Result<Vec<Vec<f64>>> {
        let m = p.lambda.len();
        let h = self.opts.fd_step;
        let shifted: Vec<Point> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut l = p.lambda.clone();
                l[i] += h;
                self.eval(l)
            })
            .collect::<Result<_>>()?;
        let mut hess = vec![vec![0.0; m]; m];
        for (i, q) in shifted.iter().enumerate() {
            for r in 0..m {
                hess[r][i] = (q.grad[r] - p.grad[r]) / h;
            }
        }
        for r in 0..m {
            for c in 0..r {
                let s = 0.5 * (hess[r][c] + hess[c][r]);
                hess[r][c] = s;
                hess[c][r] = s;
            }
        }
        Ok(hess)
    }

    fn newton(&self, start: Point) -> Result<RelaxedBounds> {
        let mut p = start;
        let mut previous: Option<f64> = None;
        let mut radius = self.opts.initial_radius;
        let mut hess: Option<Vec<Vec<f64>>> = None;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut stalls = 0;
        let mut iter = 0;
        while iter < self.opts.max_iter {
            if let Some(res) = self.converged(&p, previous) {
                return Ok(self.bounds(&p, &res, iter));
            }
            // a collapsed radius means the model is stuck at a kink: step past it
            // by gradient sampling, then rebuild the curvature
            if radius < GS_START {
                let moved;
                (p, iter, moved) = match self.gradient_sampling(p, iter, GS_BURST, &mut rng)? {
                    Sampled::Converged(b) => return Ok(b),
                    Sampled::Stopped { at, iter, moved } => (at, iter, moved),
                };
                if moved {
                    stalls = 0;
                } else {
                    stalls += 1;
                    if stalls > MAX_STALLS {
                        break;
                    }
                }
                previous = None;
                hess = None;
                radius = self.opts.initial_radius;
                continue;
            }
            iter += 1;
            let h = match hess.take() {
                Some(h) => h,
                None => self.curvature(&p)?,
            };
            let g = self.aggregate(&p, f64::INFINITY, self.opts.obj_tol * p.phi.abs().max(1.0));
            let step = trust_region_step(&h, &g, radius);
            let mut l: Vec<f64> = p.lambda.iter().zip(&step).map(|(l, d)| l + d).collect();
            self.project(&mut l);
            let d: Vec<f64> = l.iter().zip(&p.lambda).map(|(a, b)| a - b).collect();
            let linear = dot(&g, &d);
            let curved: f64 = h.iter().zip(&d).map(|(row, di)| di * dot(row, &d)).sum();
            let mut predicted = -(linear + 0.5 * curved);
            if !(predicted > 0.0) {
                predicted = -linear;
            }
            let q = self.eval(l)?;
            let actual = p.phi - q.phi;
            let moved = norm(&d);
            let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
            if rho < 0.25 {
                radius = 0.25 * moved.min(radius);
            } else if rho > 0.75 && moved >= 0.5 * radius {
                radius *= 2.0;
            }
            // on a flat facet a step that shrinks the gradient is still progress
            let flat = actual >= -1e-12 * p.phi.abs().max(1.0);
            if actual > 0.0 || (flat && q.grad_norm() < p.grad_norm()) {
                previous = Some(p.phi);
                p = q;
            } else {
                hess = Some(h);
            }
        }
        Err(self.not_converged(&p, iter))
    }

    /// Gradient sampling: descend along the minimum-norm element of the
    /// gradients sampled in a shrinking ball, which stays informative on
    /// facets too small for the curvature model. Returns after `budget`
    /// successful steps.
    fn gradient_sampling(&self, mut p: Point, mut iter: usize, budget: usize, rng: &mut ChaCha8Rng) -> Result<Sampled> {
        let floor = self.opts.sample_radius;
        let mut eps = GS_START.max(floor);
        let mut steps = 0;
        while iter < self.opts.max_iter && steps < budget {
            iter += 1;
            self.sample_ball(&p, eps, rng)?;
            let g = self.aggregate(&p, eps, f64::INFINITY);
            let gn = norm(&g);
            if gn <= self.opts.grad_tol {
                if eps <= floor {
                    return Ok(Sampled::Converged(self.bounds(&p, &g, iter)));
                }
                eps = (0.5 * eps).max(floor);
                continue;
            }
            let mut t = 4.0 * eps;
            let mut moved = false;
            for _ in 0..8 {
                let mut l: Vec<f64> = p.lambda.iter().zip(&g).map(|(l, gi)| l - t * gi / gn).collect();
                self.project(&mut l);
                let q = self.eval(l)?;
                if q.phi <= p.phi - 1e-4 * t * gn {
                    p = q;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if moved {
                steps += 1;
            } else {
                eps *= 0.5;
                if eps < 1e-9 {
                    break;
                }
            }
        }
        Ok(Sampled::Stopped {
            at: p,
            iter,
            moved: steps > 0,
        })
    }

    /// Proximal bundle method: each trial point minimises the cutting-plane
    /// model of `φ` plus `u/2 |d|²` around the current centre.
    fn bundle(&self, start: Point) -> Result<RelaxedBounds> {
        let m = start.lambda.len();
        let cap = 4 * m + 10;
        let mut center = start;
        let mut cuts = vec![Cut::at(&center)];
        let mut u = (center.grad_norm() / self.opts.initial_radius).max(1e-8);
        let mut previous: Option<f64> = None;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut next_burst = 0;
        let mut iter = 0;
        while iter < self.opts.max_iter {
            if let Some(res) = self.converged(&center, previous) {
                return Ok(self.bounds(&center, &res, iter));
            }
            let errors: Vec<f64> = cuts
                .iter()
                .map(|c| (center.phi - c.value(&center.lambda)).max(0.0))
                .collect();
            let alpha = simplex_qp(&cuts, &errors, u);
            let agg = combine(&cuts, &alpha);
            let agg_err: f64 = alpha.iter().zip(&errors).map(|(a, e)| a * e).sum();
            let gn = norm(&agg);
            let scale = center.phi.abs().max(1.0);
            // an ε-subgradient of small norm with small ε: the mixture of the
            // bundle's policies is nearly feasible and nearly optimal
            if gn <= self.opts.grad_tol && agg_err <= self.opts.obj_tol * scale {
                return Ok(self.bounds(&center, &agg, iter));
            }
            // near the optimum the model resolves facets no finer than the
            // bundle's spread; sample the neighbourhood directly instead
            if agg_err <= self.opts.obj_tol * scale && gn <= 10.0 * self.opts.grad_tol && iter >= next_burst {
                match self.gradient_sampling(center.clone(), iter, GS_BURST, &mut rng)? {
                    Sampled::Converged(b) => return Ok(b),
                    Sampled::Stopped { at, iter: reached, .. } => {
                        iter = reached;
                        next_burst = iter + m;
                        if at.phi < center.phi {
                            cuts.push(Cut::at(&at));
                            previous = Some(center.phi);
                            center = at;
                        }
                        continue;
                    }
                }
            }
            iter += 1;
            let predicted = gn * gn / u + agg_err;
            let mut l: Vec<f64> = center.lambda.iter().zip(&agg).map(|(x, g)| x - g / u).collect();
            self.project(&mut l);
            let q = self.eval(l)?;
            // keep cuts that carry weight, then the newest ones
            let mut kept: Vec<Cut> = Vec::with_capacity(cap);
            kept.push(Cut::aggregate(&cuts, &alpha));
            let mut order: Vec<usize> = (0..cuts.len()).collect();
            order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]).then(b.cmp(&a)));
            kept.extend(order.into_iter().take(cap - 2).map(|i| cuts[i].clone()));
            kept.push(Cut::at(&q));
            cuts = kept;
            let actual = center.phi - q.phi;
            if actual >= 0.1 * predicted {
                if actual >= 0.5 * predicted {
                    u = (0.5 * u).max(1e-10);
                }
                previous = Some(center.phi);
                center = q;
            } else if actual < 0.0 {
                u *= 1.5;
            }
        }
        Err(self.not_converged(&center, iter))
    }

    fn subgradient(&self, start: Point) -> Result<RelaxedBounds> {
        let mut lambda = start.lambda.clone();
        let mut avg = start.lambda.clone();
        let mut best = start.clone();
        let mut current = start;
        let mut previous: Option<f64> = None;
        for k in 1..=self.opts.max_iter {
            let step = self.opts.step_scale / (k as f64).sqrt();
            for (l, g) in lambda.iter_mut().zip(&current.grad) {
                *l -= step * g;
            }
            self.project(&mut lambda);
            for (a, l) in avg.iter_mut().zip(&lambda) {
                *a += (l - *a) / (k + 1) as f64;
            }
            current = self.eval(lambda.clone())?;
            let averaged = self.eval(avg.clone())?;
            for cand in [&current, &averaged] {
                if cand.grad_norm() < best.grad_norm() {
                    best = cand.clone();
                }
            }
            if let Some(res) = self.converged(&averaged, previous) {
                return Ok(self.bounds(&averaged, &res, k));
            }
            previous = Some(averaged.phi);
        }
        Err(self.not_converged(&best, self.opts.max_iter))
    }
}

/// Minimiser of the model `g·d + ½ dᵀHd` over `|d| ≤ radius`, through
/// Levenberg–Marquardt shifts `(H + τ I) d = -g`.
fn trust_region_step(hess: &[Vec<f64>], grad: &[f64], radius: f64) -> Vec<f64> {
    let solve = |tau: f64| {
        let mut a = hess.to_vec();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += tau;
        }
        cholesky_solve(a, grad)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .map(|d| d.into_iter().map(|v| -v).collect::<Vec<_>>())
    };
    if let Some(d) = solve(0.0) {
        if norm(&d) <= radius {
            return d;
        }
    }
    let gershgorin = hess
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, norm(grad) / radius + 2.0 * gershgorin + f64::MIN_POSITIVE);
    let mut best = solve(hi).unwrap_or_else(|| grad.iter().map(|g| -g * radius / norm(grad)).collect());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match solve(mid) {
            Some(d) if norm(&d) <= radius => {
                hi = mid;
                best = d;
            }
            _ => lo = mid,
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    best
}

/// Affine minorant `c + g·λ` of `φ`.
#[derive(Debug, Clone)]
struct Cut {
    c: f64,
    g: Vec<f64>,
}

impl Cut {
    fn at(p: &Point) -> Self {
        Self {
            c: p.phi - dot(&p.grad, &p.lambda),
            g: p.grad.clone(),
        }
    }

    fn aggregate(cuts: &[Cut], alpha: &[f64]) -> Self {
        Self {
            c: cuts.iter().zip(alpha).map(|(k, a)| a * k.c).sum(),
            g: combine(cuts, alpha),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c + dot(&self.g, x)
    }
}

fn combine(cuts: &[Cut], alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cuts[0].g.len()];
    for (k, a) in cuts.iter().zip(alpha) {
        out.iter_mut().zip(&k.g).for_each(|(o, g)| *o += a * g);
    }
    out
}

/// Minimiser over the simplex of `|Σ αᵢ gᵢ|² / 2u + Σ αᵢ eᵢ`, by accelerated
/// projected gradient.
fn simplex_qp(cuts: &[Cut], errors: &[f64], u: f64) -> Vec<f64> {
    let k = cuts.len();
    let q: Vec<Vec<f64>> = cuts
        .iter()
        .map(|a| cuts.iter().map(|b| dot(&a.g, &b.g) / u).collect())
        .collect();
    let lip = (0..k).map(|i| q[i][i]).sum::<f64>().max(1e-300);
    let grad = |a: &[f64]| -> Vec<f64> { (0..k).map(|i| dot(&q[i], a) + errors[i]).collect() };
    let mut x = vec![1.0 / k as f64; k];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let g = grad(&y);
        let next = project_simplex(y.iter().zip(&g).map(|(v, gi)| v - gi / lip).collect());
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let step: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = next;
        t = t_next;
        if step <= 1e-13 {
            break;
        }
    }
    x
}

fn project_simplex(v: Vec<f64>) -> Vec<f64> {
    let mut sorted = v.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        acc += s;
        let cand = (acc - 1.0) / (i + 1) as f64;
        if s - cand > 0.0 {
            theta = cand;
        }
    }
    v.into_iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimum-norm point of the convex hull of `points`, by Frank–Wolfe with
/// exact line search.
fn min_norm_in_hull(points: &[&[f64]]) -> Vec<f64> {
    let mut x = points
        .iter()
        .min_by(|a, b| norm(a).total_cmp(&norm(b)))
        .expect("non-empty hull")
        .to_vec();
    for _ in 0..10_000 {
        let s = points
            .iter()
            .min_by(|a, b| dot(a, &x).total_cmp(&dot(b, &x)))
            .expect("non-empty hull");
        let d: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dd = dot(&d, &d);
        let gap = -dot(&x, &d);
        if dd == 0.0 || gap <= 1e-14 * dot(&x, &x) {
            break;
        }
        let t = (gap / dd).min(1.0);
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += t * di);
    }
    x
}

fn cholesky_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    Some(y)
}

/// Worst-case (minimised dual) or best-case (maximised dual) price.
pub fn optimize_lambda(
    cfg: &HjbConfig,
    band: &HazardBand,
    spec: &ContractSpec,
    fund: &FundParams,
    lambda0: &LambdaVector,
    opts: &DualOptions,
) -> Result<RelaxedBounds> {
    if lambda0.len() != cfg.n || lambda0.values.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need {} finite starting multipliers, got {:?}",
            cfg.n, lambda0.values
        )));
    }
    let problem = Problem {
        cfg,
        band,
        spec,
        fund,
        opts,
        history: Mutex::new(Vec::new()),
    };
    let mut start: Vec<f64> = cfg.constraint_times.iter().map(|&j| lambda0.get(j)).collect();
    problem.project(&mut start);
    let first = problem.eval(start)?;
    match opts.method {
        DualMethod::Newton => problem.newton(first),
        DualMethod::Bundle => problem.bundle(first),
        DualMethod::Subgradient => problem.subgradient(first),
    }
}

/// Bounds along increasing band widths, each warm-started from the previous multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub deltas: Vec<f64>,
    pub bounds: Vec<RelaxedBounds>,
    /// `V(δ_k) - V(δ_{k-1})`, one shorter than `bounds`.
    pub increments: Vec<f64>,
}

pub fn delta_sweep(
    cfg: &HjbConfig,
    band: &HazardBand,
    spec: &ContractSpec,
    fund: &FundParams,
    deltas: &[f64],
    opts: &DualOptions,
) -> Result<DeltaSweep> {
    if deltas.iter().any(|d| !(*d >= 0.0)) || deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "band widths must be non-negative and increasing, got {deltas:?}"
        )));
    }
    let mut lambda = LambdaVector::zeros(cfg.n);
    let mut bounds = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let b = band.with_delta(d)?;
        let out = optimize_lambda(cfg, &b, spec, fund, &lambda, opts)?;
        lambda = out.lambda_star.clone();
        bounds.push(out);
    }
    let increments = bounds.windows(2).map(|w| w[1].value - w[0].value).collect();
    Ok(DeltaSweep {
        deltas: deltas.to_vec(),
        bounds,
        increments,
    })
}
