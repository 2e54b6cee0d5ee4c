//! Life tables, one-year survival probabilities and fractional-age curves.
//!
//! A table only pins down survival at integer ages. Between two integer ages
//! the survival curve is filled in by one of the classical fractional age
//! assumptions (UDD, constant force, Balducci), each of which reproduces the
//! tabulated one-year probability exactly at the year end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected survivor counts `l_x` at consecutive integer ages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTable {
    base_age: i64,
    counts: Vec<f64>,
}

impl LifeTable {
    /// Validates the table invariants. Rows are reported 1-based.
    pub fn new(base_age: i64, counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("life table has no rows".into()));
        }
        for (i, &c) in counts.iter().enumerate() {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::NonPositiveCount { row: i + 1, count: c });
            }
            if i > 0 && c > counts[i - 1] {
                return Err(Error::IncreasingCount {
                    row: i + 1,
                    count: c,
                    previous: counts[i - 1],
                });
            }
        }
        Ok(Self { base_age, counts })
    }

    pub fn base_age(&self) -> i64 {
        self.base_age
    }

    pub fn last_age(&self) -> i64 {
        self.base_age + self.counts.len() as i64 - 1
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// `l_x` for an integer age inside the table.
    pub fn count_at(&self, age: i64) -> Option<f64> {
        if age < self.base_age {
            return None;
        }
        self.counts.get((age - self.base_age) as usize).copied()
    }

    /// Serialises back to the two-column `age,lx` format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("age,lx\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.base_age + i as i64, c));
        }
        out
    }
}

/// Parses a two-column `age,lx` CSV document.
pub fn parse_life_table(text: &str) -> Result<LifeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(Error::MalformedRow {
                row: 0,
                reason: e.to_string(),
            })
        }
        None => return Err(Error::MissingHeader { row: 0 }),
    };
    let is_header = header.len() == 2 && header[0].eq_ignore_ascii_case("age") && header[1].eq_ignore_ascii_case("lx");
    if !is_header {
        return Err(Error::MissingHeader { row: 0 });
    }

    let mut base_age = None;
    let mut previous_age: Option<i64> = None;
    let mut counts = Vec::new();
    for (idx, record) in records.enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let age: i64 = record[0].parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("age `{}` is not an integer", &record[0]),
        })?;
        let count: f64 = record[1].parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("count `{}` is not a number", &record[1]),
        })?;
        if let Some(prev) = previous_age {
            if age != prev + 1 {
                return Err(Error::NonConsecutiveAges {
                    row,
                    age,
                    previous: prev,
                });
            }
        }
        if !(count > 0.0) || !count.is_finite() {
            return Err(Error::NonPositiveCount { row, count });
        }
        if let Some(&prev) = counts.last() {
            if count > prev {
                return Err(Error::IncreasingCount {
                    row,
                    count,
                    previous: prev,
                });
            }
        }
        base_age.get_or_insert(age);
        previous_age = Some(age);
        counts.push(count);
    }
    match base_age {
        Some(base) => LifeTable::new(base, counts),
        None => Err(Error::InvalidParameter("life table has no data rows".into())),
    }
}

/// Synthetic table from the Makeham hazard `a + b c^x`.
pub fn make_makeham_table(a: f64, b: f64, c: f64, base_age: i64, span: usize, l0: f64) -> Result<LifeTable> {
    if !(a >= 0.0) {
        return Err(Error::InvalidParameter(format!("Makeham A must be >= 0, got {a}")));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("Makeham B must be > 0, got {b}")));
    }
    if !(c > 1.0) {
        return Err(Error::InvalidParameter(format!("Makeham c must be > 1, got {c}")));
    }
    if span < 1 {
        return Err(Error::InvalidParameter("Makeham span must be >= 1 year".into()));
    }
    if !(l0 > 0.0) {
        return Err(Error::InvalidParameter(format!("radix must be > 0, got {l0}")));
    }
    let ln_c = c.ln();
    let mut counts = Vec::with_capacity(span + 1);
    let mut l = l0;
    counts.push(l);
    for k in 0..span {
        let x = (base_age + k as i64) as f64;
        let cum_hazard = a + b * (c.powf(x + 1.0) - c.powf(x)) / ln_c;
        l *= (-cum_hazard).exp();
        counts.push(l);
    }
    LifeTable::new(base_age, counts)
}

/// The synthetic table shipped as `data/makeham_default.csv`: ages 20 to 110.
pub fn default_table() -> LifeTable {
    make_makeham_table(0.0002, 3e-5, 1.09, 20, 90, 100_000.0).expect("valid Makeham parameters")
}

/// One-year survival probabilities `p̂_j = l_{x+j+1} / l_{x+j}` from an anchor age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSurvival {
    anchor_age: i64,
    probs: Vec<f64>,
}

impl AnnualSurvival {
    pub fn new(anchor_age: i64, probs: Vec<f64>) -> Result<Self> {
        for (j, &p) in probs.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "one-year survival probability {p} for year {j} is outside (0, 1]"
                )));
            }
        }
        Ok(Self { anchor_age, probs })
    }

    pub fn anchor_age(&self) -> i64 {
        self.anchor_age
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn years(&self) -> usize {
        self.probs.len()
    }

    /// `∏_{i<j} p̂_i`, i.e. survival to the end of year `j - 1`.
    pub fn cumulative(&self, j: usize) -> f64 {
        self.probs[..j.min(self.probs.len())].iter().product()
    }

    /// The first `n` years only.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.probs.len() {
            return Err(Error::HorizonExceeded {
                t: n as f64,
                horizon: self.probs.len(),
            });
        }
        Ok(Self {
            anchor_age: self.anchor_age,
            probs: self.probs[..n].to_vec(),
        })
    }
}

pub fn annual_survival_probs(table: &LifeTable, x: i64, n: usize) -> Result<AnnualSurvival> {
    let last = x + n as i64;
    if x < table.base_age() || last > table.last_age() {
        return Err(Error::AgeOutOfRange {
            from: x,
            to: last,
            base: table.base_age(),
            last: table.last_age(),
        });
    }
    let probs = (0..n as i64)
        .map(|j| {
            let now = table.count_at(x + j).expect("checked range");
            let next = table.count_at(x + j + 1).expect("checked range");
            next / now
        })
        .collect();
    AnnualSurvival::new(x, probs)
}

/// Fractional age assumption used between integer ages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaaKind {
    Udd,
    Cfm,
    Balducci,
}

impl FaaKind {
    pub const ALL: [FaaKind; 3] = [FaaKind::Udd, FaaKind::Cfm, FaaKind::Balducci];

    /// Survival over the fraction `u ∈ [0, 1]` of a year with one-year probability `p`.
    pub fn within_year_survival(self, p: f64, u: f64) -> f64 {
        let q = 1.0 - p;
        match self {
            FaaKind::Udd => 1.0 - u * q,
            FaaKind::Cfm => p.powf(u),
            FaaKind::Balducci => p / (p + u * q),
        }
    }

    /// Hazard at fraction `u ∈ [0, 1]` of a year with one-year probability `p`.
    pub fn within_year_hazard(self, p: f64, u: f64) -> f64 {
        let q = 1.0 - p;
        match self {
            FaaKind::Udd => q / (1.0 - u * q),
            FaaKind::Cfm => -p.ln(),
            FaaKind::Balducci => q / (p + u * q),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaaKind::Udd => "udd",
            FaaKind::Cfm => "cfm",
            FaaKind::Balducci => "balducci",
        }
    }
}

impl fmt::Display for FaaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "udd" => Ok(FaaKind::Udd),
            "cfm" | "constant-force" => Ok(FaaKind::Cfm),
            "balducci" => Ok(FaaKind::Balducci),
            other => Err(Error::InvalidParameter(format!(
                "unknown fractional age assumption `{other}`"
            ))),
        }
    }
}

/// Splits `t` into (year index, fraction). `t = n` maps to `(n, 0)`.
fn split_time(p: &AnnualSurvival, t: f64) -> Result<(usize, f64)> {
    if !(t >= 0.0) || t > p.years() as f64 {
        return Err(Error::HorizonExceeded { t, horizon: p.years() });
    }
    let j = t.floor();
    Ok((j as usize, t - j))
}

/// `ₜp` under the chosen assumption, chained across years.
pub fn faa_survival(p: &AnnualSurvival, kind: FaaKind, t: f64) -> Result<f64> {
    let (j, u) = split_time(p, t)?;
    let whole = p.cumulative(j);
    if j == p.years() || u == 0.0 {
        return Ok(whole);
    }
    Ok(whole * kind.within_year_survival(p.probs()[j], u))
}

/// Hazard rate at `t`; at integer `t` the right limit is returned.
pub fn faa_hazard(p: &AnnualSurvival, kind: FaaKind, t: f64) -> Result<f64> {
    let (j, u) = split_time(p, t)?;
    if j >= p.years() {
        return Err(Error::HorizonExceeded { t, horizon: p.years() });
    }
    Ok(kind.within_year_hazard(p.probs()[j], u))
}

/// Hazard on year `year` at fraction `u ∈ [0, 1]`; `u = 1` gives the left limit at the year end.
pub fn faa_hazard_in_year(p: &AnnualSurvival, kind: FaaKind, year: usize, u: f64) -> Result<f64> {
    if year >= p.years() {
        return Err(Error::HorizonExceeded {
            t: year as f64 + u,
            horizon: p.years(),
        });
    }
    Ok(kind.within_year_hazard(p.probs()[year], u.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn parses_simple_table() {
        let t = parse_life_table("age,lx\n40,100000\n41,99000\n42,97900").unwrap();
        assert_eq!(t.base_age(), 40);
        assert_eq!(t.counts(), &[100000.0, 99000.0, 97900.0]);
    }

    #[test]
    fn rejects_gap() {
        match parse_life_table("age,lx\n40,100\n42,90") {
            Err(Error::NonConsecutiveAges { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_increase() {
        match parse_life_table("age,lx\n40,100\n41,101") {
            Err(Error::IncreasingCount { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_header_and_zero_count() {
        assert!(matches!(
            parse_life_table("40,100\n41,99"),
            Err(Error::MissingHeader { .. })
        ));
        assert!(matches!(
            parse_life_table("age,lx\n40,100\n41,0"),
            Err(Error::NonPositiveCount { row: 2, .. })
        ));
        assert!(matches!(
            parse_life_table("age,lx\n40,abc"),
            Err(Error::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn fractional_counts_and_roundtrip() {
        let t = parse_life_table("age,lx\n60,1000.5\n61,990.25\n").unwrap();
        assert_eq!(parse_life_table(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn makeham_constant_hazard_limit() {
        let t = make_makeham_table(0.01, 1e-300, 1.09, 0, 5, 1.0).unwrap();
        for w in t.counts().windows(2) {
            assert!(approx(w[1] / w[0], (-0.01f64).exp(), 1e-15));
        }
    }

    #[test]
    fn makeham_rejects_bad_parameters() {
        assert!(make_makeham_table(0.0002, 3e-5, 1.09, 40, 0, 1e5).is_err());
        assert!(make_makeham_table(-1.0, 3e-5, 1.09, 40, 10, 1e5).is_err());
        assert!(make_makeham_table(0.0, 0.0, 1.09, 40, 10, 1e5).is_err());
        assert!(make_makeham_table(0.0, 1e-5, 1.0, 40, 10, 1e5).is_err());
    }

    #[test]
    fn annual_probabilities() {
        let t = parse_life_table("age,lx\n40,100000\n41,99000\n42,97900").unwrap();
        let p = annual_survival_probs(&t, 40, 2).unwrap();
        assert!(approx(p.probs()[0], 0.99, 1e-15));
        assert!(approx(p.probs()[1], 97900.0 / 99000.0, 1e-15));
        assert!(matches!(
            annual_survival_probs(&t, 40, 3),
            Err(Error::AgeOutOfRange { .. })
        ));
        let flat = LifeTable::new(0, vec![5.0; 4]).unwrap();
        let p = annual_survival_probs(&flat, 0, 3).unwrap();
        assert!(p.probs().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn survival_examples() {
        let p = AnnualSurvival::new(0, vec![0.99]).unwrap();
        assert!(approx(faa_survival(&p, FaaKind::Udd, 0.5).unwrap(), 0.995, 1e-15));
        let p = AnnualSurvival::new(0, vec![0.81]).unwrap();
        assert!(approx(faa_survival(&p, FaaKind::Cfm, 0.5).unwrap(), 0.9, 1e-15));
        let p = AnnualSurvival::new(0, vec![0.9]).unwrap();
        assert!(approx(
            faa_survival(&p, FaaKind::Balducci, 0.5).unwrap(),
            0.9 / 0.95,
            1e-15
        ));
        assert!(matches!(
            faa_survival(&p, FaaKind::Udd, 1.5),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn hazard_examples() {
        let p = AnnualSurvival::new(0, vec![(-0.02f64).exp()]).unwrap();
        for u in [0.0, 0.3, 0.99] {
            assert!(approx(faa_hazard(&p, FaaKind::Cfm, u).unwrap(), 0.02, 1e-15));
        }
        let p = AnnualSurvival::new(0, vec![0.99]).unwrap();
        assert!(approx(faa_hazard(&p, FaaKind::Udd, 0.0).unwrap(), 0.01, 1e-15));
        assert!(approx(
            faa_hazard_in_year(&p, FaaKind::Balducci, 0, 1.0).unwrap(),
            0.01,
            1e-15
        ));
        assert!(faa_hazard(&p, FaaKind::Udd, 1.0).is_err());
    }

    #[test]
    fn zero_mortality_year_is_admitted() {
        let p = AnnualSurvival::new(0, vec![1.0, 0.9]).unwrap();
        for kind in FaaKind::ALL {
            assert_eq!(faa_hazard(&p, kind, 0.4).unwrap(), 0.0);
            assert_eq!(faa_survival(&p, kind, 0.7).unwrap(), 1.0);
        }
        assert!(AnnualSurvival::new(0, vec![0.0]).is_err());
    }
}
