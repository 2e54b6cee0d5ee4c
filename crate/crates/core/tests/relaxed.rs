use annuity_bounds::lifetable::{annual_survival_probs, default_table, FaaKind};
use annuity_bounds::market::*;
use annuity_bounds::relaxed::*;
use annuity_bounds::strict::faa_baseline_price;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = 0.01;
const SIGMA_S: f64 = 0.2;

fn fund() -> FundParams {
    FundParams {
        a0: 100.0,
        pi_s: 0.6,
        pi_p: 0.2,
    }
}

fn band(age: i64, n: usize, delta: f64) -> HazardBand {
    let p = annual_survival_probs(&default_table(), age, n).unwrap();
    HazardBand::new(p, FaaKind::Balducci, delta).unwrap()
}

fn config(spec: &ContractSpec, dir: Direction, mode: ConstraintMode, nx: usize, nt: usize) -> HjbConfig {
    let mut cfg = HjbConfig::reduced(spec, &fund(), R, SIGMA_S, dir, mode).unwrap();
    cfg.grid = GridSpec::around(100.0, cfg.sigma_a, cfg.n as f64, nx, nt);
    cfg
}

fn nothing(n: f64) -> ContractSpec {
    ContractSpec {
        mask: Some(PayoffMask {
            gmab: false,
            gmib: false,
            gmdb: false,
        }),
        ..ContractSpec::new(ContractKind::Combined, 0.03, 60, n)
    }
}

/// `v(0; λ) ± Σ λ_j ⱼp̂`, the function the outer loop optimises.
fn dual_objective(cfg: &HjbConfig, band: &HazardBand, spec: &ContractSpec, lambda: &LambdaVector) -> f64 {
    let v = hjb_solve(cfg, band, spec, &fund(), lambda).unwrap().value_at_origin();
    let sign = cfg.direction.sign();
    let penalty: f64 = cfg
        .constraint_times
        .iter()
        .map(|&j| lambda.get(j) * band.survival().cumulative(j))
        .sum();
    v + sign * penalty
}

#[test]
fn zero_payoff_terminal_multiplier_is_discounted_by_the_upper_edge() {
    let spec = nothing(4.0);
    let b = band(60, 4, 0.3);
    let cfg = config(&spec, Direction::Worst, ConstraintMode::TerminalOnly, 201, 64);
    let mut lambda = LambdaVector::zeros(4);
    lambda.set(4, 2.5);
    let v = hjb_solve(&cfg, &b, &spec, &fund(), &lambda).unwrap().value_at_origin();
    // ∫ (μ_a + δ) over four years: the baseline integrates to -ln ₄p̂
    let exact = -2.5 * b.survival().cumulative(4) * (-0.3f64 * 4.0).exp();
    assert!((v - exact).abs() <= 1e-3 * exact.abs(), "{v} vs {exact}");
}

#[test]
fn jumps_add_up_over_all_constraint_times() {
    let spec = nothing(3.0);
    let b = band(60, 3, 0.5);
    let cfg = config(&spec, Direction::Worst, ConstraintMode::Full, 201, 64);
    let lambda = LambdaVector {
        values: vec![1.0, 2.0, 3.0],
    };
    let v = hjb_solve(&cfg, &b, &spec, &fund(), &lambda).unwrap().value_at_origin();
    // every term has v < 0 = Ĥ, so the upper edge applies throughout
    let expected: f64 = (1..=3)
        .map(|j| -lambda.get(j) * b.survival().cumulative(j) * (-0.5 * j as f64).exp())
        .sum();
    assert!((v - expected).abs() <= 1e-3 * expected.abs(), "{v} vs {expected}");
}

#[test]
fn worst_value_decreases_in_each_multiplier() {
    let spec = nothing(2.0);
    let b = band(60, 2, 1.0);
    let cfg = config(&spec, Direction::Worst, ConstraintMode::Full, 101, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let base = LambdaVector {
            values: vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)],
        };
        let v0 = hjb_solve(&cfg, &b, &spec, &fund(), &base).unwrap().value_at_origin();
        for j in 1..=2 {
            let mut up = base.clone();
            up.set(j, base.get(j) + 1.0);
            let v1 = hjb_solve(&cfg, &b, &spec, &fund(), &up).unwrap().value_at_origin();
            assert!(v1 < v0, "λ={:?} j={j}", base.values);
        }
    }
}

#[test]
fn worst_dual_objective_is_midpoint_convex() {
    let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 3.0);
    let b = band(60, 3, 1.0);
    let cfg = config(&spec, Direction::Worst, ConstraintMode::Full, 101, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let draw = |rng: &mut ChaCha8Rng| LambdaVector {
            values: (0..3).map(|_| rng.random_range(-200.0..200.0)).collect(),
        };
        let (l1, l2) = (draw(&mut rng), draw(&mut rng));
        let mid = LambdaVector {
            values: l1.values.iter().zip(&l2.values).map(|(a, b)| 0.5 * (a + b)).collect(),
        };
        let f = |l: &LambdaVector| dual_objective(&cfg, &b, &spec, l);
        assert!(f(&mid) <= 0.5 * (f(&l1) + f(&l2)) + 1e-6);
    }
}

#[test]
fn doubling_the_grid_barely_moves_the_value() {
    let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 3.0);
    let b = band(60, 3, 1.0);
    let lambda = LambdaVector {
        values: vec![-20.0, 15.0, 30.0],
    };
    for dir in [Direction::Worst, Direction::Best] {
        let coarse = config(
            &spec,
            dir,
            ConstraintMode::Full,
            GridSpec::DEFAULT_NX,
            GridSpec::DEFAULT_NT,
        );
        let mut fine = coarse.clone();
        fine.grid = coarse.grid.refined();
        let v = |c: &HjbConfig| hjb_solve(c, &b, &spec, &fund(), &lambda).unwrap().value_at_origin();
        let (vc, vf) = (v(&coarse), v(&fine));
        assert!((vc - vf).abs() <= 1e-3 * vf.abs(), "{dir:?}: {vc} vs {vf}");
    }
}

#[test]
fn zero_width_band_returns_the_baseline() {
    let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 3.0);
    let b = band(60, 3, 0.0);
    let mkt = MarketParams::deterministic(R, SIGMA_S);
    let base = faa_baseline_price(&spec, &mkt, &fund(), b.survival(), FaaKind::Balducci, R, 100.0).unwrap();
    for dir in [Direction::Worst, Direction::Best] {
        let cfg = config(
            &spec,
            dir,
            ConstraintMode::Full,
            GridSpec::DEFAULT_NX,
            GridSpec::DEFAULT_NT,
        );
        let r = optimize_lambda(
            &cfg,
            &b,
            &spec,
            &fund(),
            &LambdaVector::zeros(3),
            &DualOptions::default(),
        )
        .unwrap();
        assert!((r.value - base).abs() <= 1e-3 * base, "{dir:?}: {} vs {base}", r.value);
        assert!(r.max_residual() <= 1e-6);
    }
}

#[test]
fn zero_payoff_has_zero_value_at_zero_multiplier() {
    let spec = nothing(2.0);
    let b = band(60, 2, 1.0);
    let cfg = config(&spec, Direction::Worst, ConstraintMode::TerminalOnly, 101, 32);
    let r = optimize_lambda(
        &cfg,
        &b,
        &spec,
        &fund(),
        &LambdaVector::zeros(2),
        &DualOptions::default(),
    )
    .unwrap();
    assert!(r.value.abs() < 1e-9);
    assert!(r.lambda_star.get(2).abs() < 1e-6);
}

#[test]
fn intermediate_constraints_narrow_the_bounds() {
    let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 3.0);
    let b = band(60, 3, 1.0);
    let opts = DualOptions::default();
    let solve = |dir, mode| {
        let cfg = config(&spec, dir, mode, GridSpec::DEFAULT_NX, GridSpec::DEFAULT_NT);
        optimize_lambda(&cfg, &b, &spec, &fund(), &LambdaVector::zeros(3), &opts).unwrap()
    };
    let wf = solve(Direction::Worst, ConstraintMode::Full);
    let wt = solve(Direction::Worst, ConstraintMode::TerminalOnly);
    let bf = solve(Direction::Best, ConstraintMode::Full);
    let bt = solve(Direction::Best, ConstraintMode::TerminalOnly);
    let tol = 2e-3 * wt.value;
    assert!(wf.value <= wt.value + tol);
    assert!(bf.value >= bt.value - tol);
    assert!(wf.value >= bf.value);
    for r in [&wf, &wt, &bf, &bt] {
        assert!(r.max_residual() <= 1e-3);
    }
}

#[test]
fn death_benefit_worst_case_exceeds_every_smooth_baseline() {
    let spec = ContractSpec::new(ContractKind::Gmdb, 0.03, 60, 5.0);
    let b = band(60, 5, 1.0);
    let cfg = config(
        &spec,
        Direction::Worst,
        ConstraintMode::Full,
        GridSpec::DEFAULT_NX,
        GridSpec::DEFAULT_NT,
    );
    let r = optimize_lambda(
        &cfg,
        &b,
        &spec,
        &fund(),
        &LambdaVector::zeros(5),
        &DualOptions::default(),
    )
    .unwrap();
    let mkt = MarketParams::deterministic(R, SIGMA_S);
    for kind in FaaKind::ALL {
        let base = faa_baseline_price(&spec, &mkt, &fund(), b.survival(), kind, R, 100.0).unwrap();
        assert!(r.value >= base, "{kind:?}");
    }
    assert!(r.max_residual() <= 1e-3);
}

#[test]
fn sweep_is_monotone_in_the_band_width() {
    let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 3.0);
    let b = band(60, 3, 0.0);
    let deltas = [0.0, 0.5, 1.0, 2.0];
    let cfg = config(
        &spec,
        Direction::Worst,
        ConstraintMode::Full,
        GridSpec::DEFAULT_NX,
        GridSpec::DEFAULT_NT,
    );
    let s = delta_sweep(&cfg, &b, &spec, &fund(), &deltas, &DualOptions::default()).unwrap();
    assert_eq!(s.increments.len(), 3);
    for inc in &s.increments {
        assert!(*inc >= -2e-3 * s.bounds[0].value, "{:?}", s.increments);
    }
}

#[test]
fn dual_methods_agree_and_residuals_meet_the_tolerance() {
    let spec = ContractSpec::new(ContractKind::Gmib, 0.03, 60, 3.0);
    let b = band(60, 3, 1.0);
    for dir in [Direction::Worst, Direction::Best] {
        let cfg = HjbConfig::reduced(&spec, &fund(), R, SIGMA_S, dir, ConstraintMode::Full).unwrap();
        let run = |method| {
            let opts = DualOptions {
                method,
                ..DualOptions::default()
            };
            optimize_lambda(&cfg, &b, &spec, &fund(), &LambdaVector::zeros(3), &opts).unwrap()
        };
        let (bundle, newton) = (run(DualMethod::Bundle), run(DualMethod::Newton));
        for r in [&bundle, &newton] {
            assert!(r.max_residual() <= 1e-3, "{:?}", r.residuals);
        }
        assert!(
            (bundle.value - newton.value).abs() <= 1e-4 * newton.value,
            "{dir:?}: {} vs {}",
            bundle.value,
            newton.value
        );
    }
}
