//! Batch runs driven by a JSON configuration, writing one CSV per run.
//!
//! A config has the sections `life_table`, `market`, `fund`, `contracts`,
//! `mode`, optional `numerics` and `output`. Relative paths resolve against
//! the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lifetable::{annual_survival_probs, faa_survival, make_makeham_table, parse_life_table, FaaKind, LifeTable};
use crate::market::{ContractKind, ContractSpec, FundParams, MarketParams, PayoffMask};
use crate::mc::{mc_price, simulate_market_paths, verify_bounds, AuditContext, FaaHazard, McConfig};
use crate::relaxed::{
    delta_sweep, optimize_lambda, ConstraintMode, Direction, DualOptions, GridSpec, HazardBand, HjbConfig,
    LambdaVector, RelaxedBounds,
};
use crate::strict::{faa_baseline_price, step_survival, strict_bounds, StepDirection};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LifeTableSource {
    /// CSV with an `age,lx` header.
    Path(PathBuf),
    Makeham(MakehamParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MakehamParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub base_age: i64,
    pub span: usize,
    #[serde(default = "default_radix")]
    pub l0: f64,
}

fn default_radix() -> f64 {
    100_000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SurvivalCurves,
    FaaPrice,
    StrictBounds,
    RelaxedBounds,
    DeltaSweep,
    McCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contracts {
    pub products: Vec<ContractKind>,
    pub rg: f64,
    pub ages: Vec<i64>,
    pub maturities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Fractional-age assumption of the band baseline.
    pub faa: FaaKind,
    pub delta: f64,
    pub deltas: Vec<f64>,
    pub constraints: ConstraintMode,
    pub nx: usize,
    pub nt: usize,
    /// Short rate of the reduced market; defaults to `market.r0`.
    pub reduced_rate: Option<f64>,
    pub survival_step: f64,
    pub dual: DualOptions,
    pub mc: McConfig,
    /// Sampled hazards per family in `mc-check`.
    pub audit_samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            faa: FaaKind::Balducci,
            delta: 1.0,
            deltas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            constraints: ConstraintMode::Full,
            nx: GridSpec::DEFAULT_NX,
            nt: GridSpec::DEFAULT_NT,
            reduced_rate: None,
            survival_step: 0.01,
            dual: DualOptions::default(),
            mc: McConfig::default(),
            audit_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub life_table: LifeTableSource,
    pub market: MarketParams,
    pub fund: FundParams,
    pub contracts: Contracts,
    pub mode: Mode,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A parsed config together with the directory its paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir)
    }

    pub fn from_str(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        Ok(Self { config, base_dir })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self, cli_out: Option<&Path>) -> Option<PathBuf> {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.config.output.as_deref().map(|p| self.resolve(p)))
    }

    pub fn load_table(&self) -> Result<LifeTable> {
        let invalid = |e: Error| Error::ConfigInvalid(format!("life_table: {e}"));
        match &self.config.life_table {
            LifeTableSource::Path(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::ConfigInvalid(format!("life_table: cannot read {}: {e}", path.display())))?;
                parse_life_table(&text).map_err(invalid)
            }
            LifeTableSource::Makeham(m) => make_makeham_table(m.a, m.b, m.c, m.base_age, m.span, m.l0).map_err(invalid),
        }
    }

    /// Schema-level and semantic checks; loads the life table.
    pub fn validate(&self) -> Result<LifeTable> {
        let cfg = &self.config;
        let invalid = |section: &str, e: Error| Error::ConfigInvalid(format!("{section}: {e}"));
        let table = self.load_table()?;
        cfg.market.validate().map_err(|e| invalid("market", e))?;
        cfg.fund.validate().map_err(|e| invalid("fund", e))?;
        let c = &cfg.contracts;
        if c.products.is_empty() || c.ages.is_empty() || c.maturities.is_empty() {
            return Err(Error::ConfigInvalid(
                "contracts: products, ages and maturities must be non-empty".into(),
            ));
        }
        let relaxed = matches!(cfg.mode, Mode::RelaxedBounds | Mode::DeltaSweep);
        for &kind in &c.products {
            if kind == ContractKind::Combined && !relaxed {
                return Err(Error::ConfigInvalid(format!(
                    "contracts: combined contracts are only priced in relaxed modes, not {:?}",
                    cfg.mode
                )));
            }
            for &age in &c.ages {
                for &t in &c.maturities {
                    let spec = ContractSpec::new(kind, c.rg, age, t);
                    spec.validate().map_err(|e| invalid("contracts", e))?;
                    if relaxed && t.fract() != 0.0 {
                        return Err(Error::ConfigInvalid(format!(
                            "contracts: relaxed bounds need integer maturities, got {t}"
                        )));
                    }
                    annual_survival_probs(&table, age, t.ceil() as usize).map_err(|e| invalid("life_table", e))?;
                }
            }
        }
        let n = &cfg.numerics;
        if !(n.delta >= 0.0) || !n.delta.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "numerics: delta must be >= 0, got {}",
                n.delta
            )));
        }
        if n.deltas.is_empty() || n.deltas.iter().any(|d| !(*d >= 0.0)) || n.deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ConfigInvalid(format!(
                "numerics: deltas must be non-negative and increasing, got {:?}",
                n.deltas
            )));
        }
        if n.nx < 3 || n.nt < 1 {
            return Err(Error::ConfigInvalid(format!(
                "numerics: need nx >= 3 and nt >= 1, got {} and {}",
                n.nx, n.nt
            )));
        }
        if !(n.survival_step > 0.0) {
            return Err(Error::ConfigInvalid("numerics: survival_step must be positive".into()));
        }
        if let Some(r) = n.reduced_rate {
            if !r.is_finite() {
                return Err(Error::ConfigInvalid("numerics: reduced_rate must be finite".into()));
            }
        }
        n.mc.validate().map_err(|e| invalid("numerics.mc", e))?;
        Ok(table)
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.config).expect("config serialises");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// Column-labelled rows ready for CSV output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self, provenance: &str) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8 csv");
        Ok(format!("# {provenance}\n{body}"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Flag(bool),
}

fn render(cells: Vec<Cell>) -> Result<Vec<String>> {
    cells
        .into_iter()
        .map(|c| match c {
            Cell::Text(s) => Ok(s),
            Cell::Int(i) => Ok(i.to_string()),
            Cell::Flag(b) => Ok(b.to_string()),
            Cell::Num(x) if x.is_finite() => Ok(x.to_string()),
            Cell::Num(x) => Err(Error::SolverFailure(format!("non-finite result {x}"))),
        })
        .collect()
}

struct Context<'a> {
    cfg: &'a RunConfig,
    table: LifeTable,
}

impl Context<'_> {
    fn cells(&self) -> Vec<(ContractKind, i64, f64)> {
        let c = &self.cfg.contracts;
        let mut out = Vec::new();
        for &kind in &c.products {
            for &age in &c.ages {
                for &t in &c.maturities {
                    out.push((kind, age, t));
                }
            }
        }
        out
    }

    fn reduced_market(&self) -> MarketParams {
        let r = self.cfg.numerics.reduced_rate.unwrap_or(self.cfg.market.r0);
        MarketParams::deterministic(r, self.cfg.market.sigma_s)
    }

    fn spec(&self, kind: ContractKind, age: i64, t: f64) -> ContractSpec {
        ContractSpec::new(kind, self.cfg.contracts.rg, age, t)
    }

    fn hjb(&self, spec: &ContractSpec, dir: Direction) -> Result<HjbConfig> {
        let n = &self.cfg.numerics;
        let fund = &self.cfg.fund;
        let r = self.reduced_market().r0;
        let mut hjb = HjbConfig::reduced(spec, fund, r, self.cfg.market.sigma_s, dir, n.constraints)?;
        hjb.grid = GridSpec::around(fund.a0, hjb.sigma_a, hjb.n as f64, n.nx, n.nt);
        hjb.validate()?;
        Ok(hjb)
    }

    /// FAA baseline in the reduced market; combined contracts add their parts.
    fn reduced_baseline(&self, spec: &ContractSpec, kind: FaaKind) -> Result<f64> {
        let mkt = self.reduced_market();
        let p = annual_survival_probs(&self.table, spec.age, spec.maturity as usize)?;
        let mask = spec.payoff_mask();
        let mut total = 0.0;
        for (on, part) in [
            (mask.gmab, ContractKind::Gmab),
            (mask.gmib, ContractKind::Gmib),
            (mask.gmdb, ContractKind::Gmdb),
        ] {
            if on {
                let s = ContractSpec {
                    kind: part,
                    mask: Some(PayoffMask::only(part)),
                    ..*spec
                };
                total += faa_baseline_price(&s, &mkt, &self.cfg.fund, &p, kind, mkt.r0, self.cfg.fund.a0)?;
            }
        }
        Ok(total)
    }

    fn relaxed_pair(&self, spec: &ContractSpec, delta: f64) -> Result<(RelaxedBounds, RelaxedBounds)> {
        let p = annual_survival_probs(&self.table, spec.age, spec.maturity as usize)?;
        let band = HazardBand::new(p, self.cfg.numerics.faa, delta)?;
        let solve = |dir| -> Result<RelaxedBounds> {
            let hjb = self.hjb(spec, dir)?;
            optimize_lambda(
                &hjb,
                &band,
                spec,
                &self.cfg.fund,
                &LambdaVector::zeros(hjb.n),
                &self.cfg.numerics.dual,
            )
        };
        let (best, worst) = rayon::join(|| solve(Direction::Best), || solve(Direction::Worst));
        Ok((best?, worst?))
    }
}

fn survival_curves(ctx: &Context) -> Result<ResultTable> {
    let mut out = ResultTable::new(&["age", "t", "udd", "cfm", "balducci", "sup", "inf"]);
    let horizon = ctx.cfg.contracts.maturities.iter().cloned().fold(0.0, f64::max);
    let step = ctx.cfg.numerics.survival_step;
    let count = (horizon / step).round() as usize;
    for &age in &ctx.cfg.contracts.ages {
        let p = annual_survival_probs(&ctx.table, age, horizon.ceil() as usize)?;
        for k in 0..=count {
            let t = (k as f64 * step).min(horizon);
            let mut cells = vec![Cell::Int(age), Cell::Num(t)];
            for kind in FaaKind::ALL {
                cells.push(Cell::Num(faa_survival(&p, kind, t)?));
            }
            cells.push(Cell::Num(step_survival(&p, StepDirection::Sup, 0.0, t)));
            cells.push(Cell::Num(step_survival(&p, StepDirection::Inf, 0.0, t)));
            out.rows.push(render(cells)?);
        }
    }
    Ok(out)
}

fn cell_prefix(kind: ContractKind, age: i64, t: f64) -> Vec<Cell> {
    vec![Cell::Text(kind.name().into()), Cell::Int(age), Cell::Num(t)]
}

fn faa_prices(ctx: &Context, spec: &ContractSpec) -> Result<Vec<f64>> {
    let mkt = &ctx.cfg.market;
    let p = annual_survival_probs(&ctx.table, spec.age, spec.maturity.ceil() as usize)?;
    FaaKind::ALL
        .iter()
        .map(|&k| faa_baseline_price(spec, mkt, &ctx.cfg.fund, &p, k, mkt.r0, ctx.cfg.fund.a0))
        .collect()
}

fn per_cell<F>(ctx: &Context, header: &[&str], f: F) -> Result<ResultTable>
where
    F: Fn(ContractKind, i64, f64) -> Result<Vec<Vec<Cell>>> + Sync,
{
    let rows: Vec<Vec<Vec<Cell>>> = ctx
        .cells()
        .into_par_iter()
        .map(|(kind, age, t)| {
            f(kind, age, t).map_err(|e| match e {
                Error::ConfigInvalid(_) => e,
                other => Error::SolverFailure(format!("{} age {age} maturity {t}: {other}", kind.name())),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = ResultTable::new(header);
    for r in rows.into_iter().flatten() {
        out.rows.push(render(r)?);
    }
    Ok(out)
}

fn faa_price(ctx: &Context) -> Result<ResultTable> {
    per_cell(
        ctx,
        &["product", "age", "maturity", "faa_udd", "faa_cfm", "faa_balducci"],
        |kind, age, t| {
            let spec = ctx.spec(kind, age, t);
            let mut row = cell_prefix(kind, age, t);
            row.extend(faa_prices(ctx, &spec)?.into_iter().map(Cell::Num));
            Ok(vec![row])
        },
    )
}

fn strict(ctx: &Context) -> Result<ResultTable> {
    let header = [
        "product",
        "age",
        "maturity",
        "faa_udd",
        "faa_cfm",
        "faa_balducci",
        "strict_lower",
        "strict_upper",
        "assumptions_hold",
    ];
    per_cell(ctx, &header, |kind, age, t| {
        let spec = ctx.spec(kind, age, t);
        let mkt = &ctx.cfg.market;
        let p = annual_survival_probs(&ctx.table, age, t.ceil() as usize)?;
        let b = strict_bounds(&spec, mkt, &ctx.cfg.fund, &p, mkt.r0, ctx.cfg.fund.a0)?;
        let mut row = cell_prefix(kind, age, t);
        row.extend(faa_prices(ctx, &spec)?.into_iter().map(Cell::Num));
        row.extend([
            Cell::Num(b.lower),
            Cell::Num(b.upper),
            Cell::Flag(!b.assumptions_violated),
        ]);
        Ok(vec![row])
    })
}

fn constraint_label(mode: ConstraintMode) -> Cell {
    Cell::Text(
        match mode {
            ConstraintMode::Full => "full",
            ConstraintMode::TerminalOnly => "terminal-only",
        }
        .into(),
    )
}

fn relaxed(ctx: &Context) -> Result<ResultTable> {
    let header = [
        "product",
        "age",
        "maturity",
        "constraints",
        "delta",
        "baseline",
        "relaxed_lower",
        "relaxed_upper",
        "residual_max",
        "iterations_lower",
        "iterations_upper",
    ];
    let n = &ctx.cfg.numerics;
    per_cell(ctx, &header, |kind, age, t| {
        let spec = ctx.spec(kind, age, t);
        let (best, worst) = ctx.relaxed_pair(&spec, n.delta)?;
        let mut row = cell_prefix(kind, age, t);
        row.extend([
            constraint_label(n.constraints),
            Cell::Num(n.delta),
            Cell::Num(ctx.reduced_baseline(&spec, n.faa)?),
            Cell::Num(best.value),
            Cell::Num(worst.value),
            Cell::Num(best.max_residual().max(worst.max_residual())),
            Cell::Int(best.dual_iterations as i64),
            Cell::Int(worst.dual_iterations as i64),
        ]);
        Ok(vec![row])
    })
}

fn sweep(ctx: &Context) -> Result<ResultTable> {
    let header = [
        "product",
        "age",
        "maturity",
        "constraints",
        "delta",
        "relaxed_lower",
        "relaxed_upper",
        "increment_lower",
        "increment_upper",
        "residual_max",
    ];
    let n = &ctx.cfg.numerics;
    per_cell(ctx, &header, |kind, age, t| {
        let spec = ctx.spec(kind, age, t);
        let p = annual_survival_probs(&ctx.table, age, t as usize)?;
        let band = HazardBand::new(p, n.faa, n.deltas[0])?;
        let run = |dir| -> Result<_> {
            let hjb = ctx.hjb(&spec, dir)?;
            delta_sweep(&hjb, &band, &spec, &ctx.cfg.fund, &n.deltas, &n.dual)
        };
        let (best, worst) = rayon::join(|| run(Direction::Best), || run(Direction::Worst));
        let (best, worst) = (best?, worst?);
        let mut rows = Vec::new();
        for (k, &d) in n.deltas.iter().enumerate() {
            let inc = |s: &crate::relaxed::DeltaSweep| if k == 0 { 0.0 } else { s.increments[k - 1] };
            let mut row = cell_prefix(kind, age, t);
            row.extend([
                constraint_label(n.constraints),
                Cell::Num(d),
                Cell::Num(best.bounds[k].value),
                Cell::Num(worst.bounds[k].value),
                Cell::Num(inc(&best)),
                Cell::Num(inc(&worst)),
                Cell::Num(best.bounds[k].max_residual().max(worst.bounds[k].max_residual())),
            ]);
            rows.push(row);
        }
        Ok(rows)
    })
}

/// Closed-form FAA prices against simulation, then (optionally) the bound
/// audit, all in the reduced market where every formula matches the
/// simulated fund.
fn mc_check(ctx: &Context) -> Result<ResultTable> {
    let header = [
        "product",
        "age",
        "maturity",
        "family",
        "label",
        "lower",
        "upper",
        "mc_mean",
        "mc_stderr",
        "inside",
    ];
    let n = &ctx.cfg.numerics;
    let mkt = ctx.reduced_market();
    let fund = ctx.cfg.fund;
    // cells run one after another; paths and solves parallelise inside
    let mut out = ResultTable::new(&header);
    for (kind, age, t) in ctx.cells() {
        let spec = ctx.spec(kind, age, t);
        let p = annual_survival_probs(&ctx.table, age, t.ceil() as usize)?;
        let paths = simulate_market_paths(&mkt, &fund, t, &n.mc)?;
        for k in FaaKind::ALL {
            let exact = faa_baseline_price(&spec, &mkt, &fund, &p, k, mkt.r0, fund.a0)?;
            let est = mc_price(
                &spec,
                &paths,
                &FaaHazard {
                    survival: p.clone(),
                    kind: k,
                },
            )?;
            let mut row = cell_prefix(kind, age, t);
            row.extend([
                Cell::Text("closed-form".into()),
                Cell::Text(k.name().into()),
                Cell::Num(exact),
                Cell::Num(exact),
                Cell::Num(est.mean),
                Cell::Num(est.stderr),
                Cell::Flag(est.within(exact, exact, 3.0)),
            ]);
            out.rows.push(render(row)?);
        }
        if n.audit_samples == 0 {
            continue;
        }
        let sb = strict_bounds(&spec, &mkt, &fund, &p, mkt.r0, fund.a0)?;
        let integer = t.fract() == 0.0;
        let band = HazardBand::new(p.clone(), n.faa, n.delta)?;
        let pair = if integer {
            Some(ctx.relaxed_pair(&spec, n.delta)?)
        } else {
            None
        };
        let audit_ctx = AuditContext {
            spec: &spec,
            mkt: &mkt,
            fund: &fund,
            survival: &p,
            band: Some(&band),
        };
        let report = verify_bounds(
            &audit_ctx,
            Some(&sb),
            pair.as_ref().map(|(b, w)| (b, w)),
            n.audit_samples,
            &n.mc,
        )?;
        for c in report.checks {
            let family = serde_json::to_value(c.family).expect("family serialises");
            let mut row = cell_prefix(kind, age, t);
            row.extend([
                Cell::Text(family.as_str().unwrap_or_default().to_string()),
                Cell::Text(c.label),
                Cell::Num(c.lower),
                Cell::Num(c.upper),
                Cell::Num(c.estimate.mean),
                Cell::Num(c.estimate.stderr),
                Cell::Flag(c.inside),
            ]);
            out.rows.push(render(row)?);
        }
    }
    Ok(out)
}

/// Runs the configured mode and returns the table.
pub fn execute(loaded: &LoadedConfig) -> Result<ResultTable> {
    let table = loaded.validate()?;
    let ctx = Context {
        cfg: &loaded.config,
        table,
    };
    let solver = |e: Error| match e {
        Error::ConfigInvalid(_) | Error::SolverFailure(_) => e,
        other => Error::SolverFailure(other.to_string()),
    };
    match loaded.config.mode {
        Mode::SurvivalCurves => survival_curves(&ctx),
        Mode::FaaPrice => faa_price(&ctx),
        Mode::StrictBounds => strict(&ctx),
        Mode::RelaxedBounds => relaxed(&ctx),
        Mode::DeltaSweep => sweep(&ctx),
        Mode::McCheck => mc_check(&ctx),
    }
    .map_err(solver)
}

pub fn provenance(loaded: &LoadedConfig) -> String {
    format!("annuity-bounds {VERSION} config-sha256={}", loaded.hash())
}

/// `run`: executes and writes the CSV (to `out`, the config's `output`, or stdout).
pub fn run(config_path: &Path, out: Option<&Path>) -> Result<Option<PathBuf>> {
    let loaded = LoadedConfig::from_file(config_path)?;
    let table = execute(&loaded)?;
    let text = table.to_csv(&provenance(&loaded))?;
    match loaded.output_path(out) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, text)?;
            Ok(Some(path))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

/// `validate`: parses and checks the config, returning a one-line summary.
pub fn validate(config_path: &Path) -> Result<String> {
    let loaded = LoadedConfig::from_file(config_path)?;
    let table = loaded.validate()?;
    let c = &loaded.config.contracts;
    let mut s = String::new();
    let _ = write!(
        s,
        "ok: mode {:?}, {} cells, life table ages {}..={}",
        loaded.config.mode,
        c.products.len() * c.ages.len() * c.maturities.len(),
        table.base_age(),
        table.last_age()
    );
    Ok(s)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_) => 2,
        _ => 3,
    }
}

/// Caps the global thread pool from `ANNUITY_BOUNDS_THREADS`.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("ANNUITY_BOUNDS_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::ConfigInvalid(format!("ANNUITY_BOUNDS_THREADS must be a positive integer, got {v:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json(mode: &str) -> String {
        format!(
            r#"{{
  "life_table": {{"makeham": {{"a": 0.0002, "b": 3e-5, "c": 1.09, "base_age": 20, "span": 90}}}},
  "market": {{"kappa": 0.1, "sigma_r": 0.02, "sigma_s": 0.2, "rho": 0.3, "r0": 0.01,
              "curve": {{"a": 0.015, "b": -0.0105, "c": 0.02, "d": 0.75}}}},
  "fund": {{"a0": 100, "pi_s": 0.6, "pi_p": 0.2}},
  "contracts": {{"products": ["gmab"], "rg": 0.03, "ages": [60], "maturities": [2]}},
  "mode": "{mode}"
}}"#
        )
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = base_json("faa-price").replace("\"mode\"", "\"colour\": 1, \"mode\"");
        assert!(matches!(
            LoadedConfig::from_str(&text, PathBuf::new()),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn strict_gmab_columns_coincide() {
        let loaded = LoadedConfig::from_str(&base_json("strict-bounds"), PathBuf::new()).unwrap();
        let t = execute(&loaded).unwrap();
        let lo = t.header.iter().position(|h| h == "strict_lower").unwrap();
        assert_eq!(t.rows[0][lo], t.rows[0][lo + 1]);
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = LoadedConfig::from_str(&base_json("faa-price"), PathBuf::new()).unwrap();
        let b = LoadedConfig::from_str(&base_json("faa-price").replace('\n', " "), PathBuf::new()).unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn combined_outside_relaxed_modes_is_invalid() {
        let text = base_json("strict-bounds").replace("[\"gmab\"]", "[\"combined\"]");
        let loaded = LoadedConfig::from_str(&text, PathBuf::new()).unwrap();
        assert_eq!(exit_code(&execute(&loaded).unwrap_err()), 2);
    }
}
