//! Survival models: force of mortality, survival probabilities, densities.

use std::io::Read;
use std::path::Path;

use crate::error::{PricingError, Result};
use crate::Side;

/// Integer-age survivorship `l_x`, ending in a row with `l_ω = 0`.
///
/// Between integer ages the hazard is constant, except in the final year
/// where survivors decline linearly to zero at `ω` (a constant hazard
/// cannot reach zero within the year).
#[derive(Debug, Clone, PartialEq)]
pub struct LifeTable {
    first_age: u32,
    survivors: Vec<f64>,
}

impl LifeTable {
    pub fn new(first_age: u32, survivors: Vec<f64>) -> Result<Self> {
        if survivors.len() < 2 {
            return Err(PricingError::InvalidModel(
                "life table needs at least two ages".into(),
            ));
        }
        let last = survivors.len() - 1;
        for (i, &l) in survivors.iter().enumerate() {
            if !l.is_finite() {
                return Err(PricingError::NonFiniteInput(format!("l[{i}] = {l}")));
            }
            if i < last && l <= 0.0 {
                return Err(PricingError::InvalidModel(format!(
                    "l at age {} must be positive before the final row",
                    first_age as usize + i
                )));
            }
            if i > 0 && l > survivors[i - 1] {
                return Err(PricingError::InvalidModel(format!(
                    "survivors increase at age {}",
                    first_age as usize + i
                )));
            }
        }
        if survivors[last] != 0.0 {
            return Err(PricingError::InvalidModel(
                "final row must have l = 0 to define the limiting age".into(),
            ));
        }
        Ok(LifeTable {
            first_age,
            survivors,
        })
    }

    /// Reads `age,lx` CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        if header.len() != 2 || &header[0] != "age" || &header[1] != "lx" {
            return Err(PricingError::Parse {
                line: 1,
                message: "header must be age,lx".into(),
            });
        }
        let mut first_age = None;
        let mut survivors = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let age: u32 = record[0].parse().map_err(|_| PricingError::Parse {
                line,
                message: format!("age must be a nonnegative integer, got {:?}", &record[0]),
            })?;
            let lx: f64 = record[1].parse().map_err(|_| PricingError::Parse {
                line,
                message: format!("not a number: {:?}", &record[1]),
            })?;
            let expected = first_age.map(|a: u32| a + survivors.len() as u32);
            match expected {
                Some(e) if e != age => {
                    return Err(PricingError::Parse {
                        line,
                        message: format!("ages must increase by 1: expected {e}, got {age}"),
                    })
                }
                None => first_age = Some(age),
                _ => {}
            }
            if survivors.last() == Some(&0.0) {
                return Err(PricingError::Parse {
                    line,
                    message: "rows after lx = 0".into(),
                });
            }
            survivors.push(lx);
        }
        let first_age = first_age.ok_or_else(|| PricingError::Parse {
            line: 2,
            message: "no rows".into(),
        })?;
        LifeTable::new(first_age, survivors)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn first_age(&self) -> f64 {
        self.first_age as f64
    }

    pub fn limiting_age(&self) -> f64 {
        (self.first_age as usize + self.survivors.len() - 1) as f64
    }

    pub fn survivors(&self) -> &[f64] {
        &self.survivors
    }

    /// `l_x` at integer age, `None` off the table.
    pub fn lx(&self, age: u32) -> Option<f64> {
        age.checked_sub(self.first_age)
            .and_then(|i| self.survivors.get(i as usize))
            .copied()
    }

    fn year_index(&self, x: f64) -> usize {
        (x - self.first_age()).floor() as usize
    }

    fn is_final_year(&self, k: usize) -> bool {
        k + 2 == self.survivors.len()
    }

    /// Constant hazard of year `k` (not the final year).
    fn year_hazard(&self, k: usize) -> f64 {
        (self.survivors[k] / self.survivors[k + 1]).ln()
    }

    /// Interpolated survivors at fractional age.
    fn l_at(&self, x: f64) -> f64 {
        if x >= self.limiting_age() {
            return 0.0;
        }
        let k = self.year_index(x);
        let s = x - (self.first_age() + k as f64);
        if s == 0.0 {
            self.survivors[k]
        } else if self.is_final_year(k) {
            self.survivors[k] * (1.0 - s)
        } else {
            self.survivors[k] * (-self.year_hazard(k) * s).exp()
        }
    }
}

fn csv_error(err: csv::Error) -> PricingError {
    let line = err.position().map_or(0, |p| p.line() as usize);
    PricingError::Parse {
        line,
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurvivalModel {
    /// `μ_x = μ`
    ConstantForce { mu: f64 },
    /// Uniform deaths on `[0, ω)`: `μ_x = 1/(ω − x)`.
    DeMoivre { omega: f64 },
    /// `μ_x = B c^x`
    Gompertz { b: f64, c: f64 },
    LifeTable(LifeTable),
}

impl SurvivalModel {
    pub fn constant_force(mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(PricingError::InvalidModel(format!("force of mortality {mu} must be ≥ 0")));
        }
        Ok(SurvivalModel::ConstantForce { mu })
    }

    pub fn de_moivre(omega: f64) -> Result<Self> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(PricingError::InvalidModel(format!("limiting age {omega} must be > 0")));
        }
        Ok(SurvivalModel::DeMoivre { omega })
    }

    pub fn gompertz(b: f64, c: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0 && c.is_finite() && c > 0.0) {
            return Err(PricingError::InvalidModel(format!(
                "Gompertz parameters must be positive, got B={b}, c={c}"
            )));
        }
        Ok(SurvivalModel::Gompertz { b, c })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SurvivalModel::ConstantForce { .. } => "constant_fom",
            SurvivalModel::DeMoivre { .. } => "de_moivre",
            SurvivalModel::Gompertz { .. } => "gompertz",
            SurvivalModel::LifeTable(_) => "life_table",
        }
    }

    /// Limiting age `ω`; infinite for constant force and Gompertz.
    pub fn limiting_age(&self) -> f64 {
        match self {
            SurvivalModel::ConstantForce { .. } | SurvivalModel::Gompertz { .. } => f64::INFINITY,
            SurvivalModel::DeMoivre { omega } => *omega,
            SurvivalModel::LifeTable(t) => t.limiting_age(),
        }
    }

    fn first_age(&self) -> f64 {
        match self {
            SurvivalModel::LifeTable(t) => t.first_age(),
            _ => 0.0,
        }
    }

    fn check_age(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(PricingError::NonFiniteInput(format!("age {x}")));
        }
        let first = self.first_age();
        if x < first {
            return Err(PricingError::AgeOutOfRange { age: x, first });
        }
        Ok(())
    }

    fn check_alive(&self, x: f64) -> Result<()> {
        self.check_age(x)?;
        if x >= self.limiting_age() {
            return Err(PricingError::DeadCohort { age: x });
        }
        Ok(())
    }

    /// `S_0(x)`, relative to the first tabulated age for life tables.
    pub fn survival_from_birth(&self, x: f64) -> Result<f64> {
        self.check_age(x)?;
        Ok(match self {
            SurvivalModel::LifeTable(t) => t.l_at(x) / t.survivors[0],
            _ => self.survival_unchecked(self.first_age(), x - self.first_age()),
        })
    }

    /// `ₜp_x = S_0(x+t)/S_0(x)`.
    pub fn survival_probability(&self, x: f64, t: f64) -> Result<f64> {
        self.check_alive(x)?;
        check_duration(t)?;
        Ok(self.survival_unchecked(x, t))
    }

    pub(crate) fn survival_unchecked(&self, x: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        match self {
            SurvivalModel::ConstantForce { mu } => (-mu * t).exp(),
            SurvivalModel::DeMoivre { omega } => {
                if x + t >= *omega {
                    0.0
                } else {
                    (omega - x - t) / (omega - x)
                }
            }
            SurvivalModel::Gompertz { b, c } => {
                let ln_c = c.ln();
                let hazard = if ln_c == 0.0 {
                    b * t
                } else {
                    b * c.powf(x) * (t * ln_c).exp_m1() / ln_c
                };
                (-hazard).exp()
            }
            SurvivalModel::LifeTable(table) => {
                let lx = table.l_at(x);
                if lx == 0.0 {
                    0.0
                } else {
                    table.l_at(x + t) / lx
                }
            }
        }
    }

    /// `μ_x`; right-continuous at life-table year boundaries.
    pub fn force_of_mortality(&self, x: f64) -> Result<f64> {
        self.hazard(x, Side::Right)
    }

    /// One-sided force of mortality; differs from the right limit only at
    /// integer ages of a life table.
    pub fn hazard(&self, x: f64, side: Side) -> Result<f64> {
        self.check_alive(x)?;
        Ok(match self {
            SurvivalModel::ConstantForce { mu } => *mu,
            SurvivalModel::DeMoivre { omega } => 1.0 / (omega - x),
            SurvivalModel::Gompertz { b, c } => b * c.powf(x),
            SurvivalModel::LifeTable(table) => {
                let mut k = table.year_index(x);
                let on_boundary = x == table.first_age() + k as f64;
                if side == Side::Left && on_boundary && k > 0 {
                    k -= 1;
                }
                if table.is_final_year(k) {
                    1.0 / (table.limiting_age() - x)
                } else {
                    table.year_hazard(k)
                }
            }
        })
    }

    /// `f_x(t) = μ_{x+t} · ₜp_x`; zero beyond `ω`, with the left limit at
    /// `t = ω − x`.
    pub fn death_density(&self, x: f64, t: f64) -> Result<f64> {
        self.density(x, t, Side::Right)
    }

    /// One-sided death density (see [`SurvivalModel::hazard`]).
    pub fn density(&self, x: f64, t: f64, side: Side) -> Result<f64> {
        self.check_alive(x)?;
        check_duration(t)?;
        let omega = self.limiting_age();
        let age = x + t;
        if age > omega {
            return Ok(0.0);
        }
        Ok(match self {
            SurvivalModel::DeMoivre { omega } => 1.0 / (omega - x),
            SurvivalModel::LifeTable(table) => {
                let final_start = omega - 1.0;
                if age > final_start || (age == final_start && side == Side::Right) {
                    // Linear decline: -dl/dt is constant over the final year.
                    table.survivors[table.survivors.len() - 2] / table.l_at(x)
                } else {
                    self.hazard(age, side)? * self.survival_unchecked(x, t)
                }
            }
            _ => self.hazard(age, side)? * self.survival_unchecked(x, t),
        })
    }

    /// `q_x = 1 − p_x`.
    pub fn one_year_mortality(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.survival_probability(x, 1.0)?)
    }

    /// Policy times in `(0, horizon)` where the hazard of a life issued at
    /// `x` jumps.
    pub fn breakpoints(&self, x: f64, horizon: f64) -> Vec<f64> {
        match self {
            SurvivalModel::LifeTable(table) => {
                let first = (x.floor() as i64 + 1).max(table.first_age as i64);
                (first..)
                    .map(|age| age as f64 - x)
                    .take_while(|&t| t < horizon)
                    .filter(|&t| t > 0.0)
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

fn check_duration(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(PricingError::InvalidModel(format!("duration {t} must be finite and ≥ 0")))
    }
}
