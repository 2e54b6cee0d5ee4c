//! Gauss–Legendre rules and the composite/adaptive drivers built on them.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Same rule applied on `panels` equal sub-intervals of [a, b].
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(&mut f, lo, hi)
            })
            .sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite rule whose panel count doubles until two successive estimates
/// agree to `rel_tol` (absolute floor `abs_tol`).
pub fn integrate_refined<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    mut f: F,
    a: f64,
    b: f64,
    initial_panels: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels = initial_panels.max(1);
    let mut prev = rule.composite(&mut f, a, b, panels);
    for _ in 0..12 {
        panels *= 2;
        let next = rule.composite(&mut f, a, b, panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(abs_tol) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Adaptive bisection with a Gauss–Legendre rule on each panel.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(rule: &GaussLegendre, mut f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = rule.integrate(&mut f, a, b);
    adaptive_step(rule, &mut f, a, b, whole, rel_tol, 0)
}

fn adaptive_step<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(&mut *f, a, mid);
    let right = rule.integrate(&mut *f, mid, b);
    let both = left + right;
    if depth >= 30 || (both - whole).abs() <= rel_tol * both.abs().max(1e-300) {
        return both;
    }
    adaptive_step(rule, f, a, mid, left, rel_tol, depth + 1) + adaptive_step(rule, f, mid, b, right, rel_tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(5);
        let got = rule.integrate(|x| x.powi(9) + 3.0 * x.powi(4), 0.0, 2.0);
        let exact = 2f64.powi(10) / 10.0 + 3.0 * 2f64.powi(5) / 5.0;
        assert!((got - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 16, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn adaptive_handles_a_kink() {
        let rule = GaussLegendre::new(8);
        let got = integrate_adaptive(&rule, |x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((got - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn refined_converges_on_smooth_integrand() {
        let rule = GaussLegendre::new(16);
        let got = integrate_refined(&rule, f64::exp, 0.0, 3.0, 1, 1e-12, 1.0);
        assert!((got - (3f64.exp() - 1.0)).abs() < 1e-10);
    }
}
