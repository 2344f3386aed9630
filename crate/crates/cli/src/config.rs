//! JSON valuation configs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contingent_pricer::mortality::{LifeTable, SurvivalModel};
use contingent_pricer::valuation::{ForceOfInterest, Schedule, ValuationRequest, DEFAULT_GRID_STEP};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MortalityConfig {
    #[serde(rename = "constant_fom")]
    ConstantForce { mu: f64 },
    DeMoivre { omega: f64 },
    Gompertz { b: f64, c: f64 },
    /// Either `path` to an `age,lx` CSV (relative to the config file) or an
    /// inline `first_age` plus `lx` column.
    LifeTable {
        path: Option<PathBuf>,
        first_age: Option<u32>,
        lx: Option<Vec<f64>>,
    },
}

/// A number, a step function, or polynomial coefficients in `t`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CurveConfig {
    Constant(f64),
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
    Polynomial { polynomial: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContractConfig {
    WholeLife {
        #[serde(default = "unit")]
        benefit: CurveConfig,
    },
    Annuity {
        #[serde(default = "unit")]
        rate: CurveConfig,
    },
    RiskFree {
        #[serde(default = "unit")]
        rate: CurveConfig,
        #[serde(default)]
        terminal_value: f64,
    },
}

fn unit() -> CurveConfig {
    CurveConfig::Constant(1.0)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationConfig {
    pub contract: ContractConfig,
    pub mortality: Option<MortalityConfig>,
    pub issue_age: Option<f64>,
    /// Force of interest.
    pub interest: CurveConfig,
    pub term: Option<f64>,
    pub grid_step: Option<f64>,
}

impl CurveConfig {
    fn schedule(&self) -> Result<Schedule> {
        Ok(match self {
            CurveConfig::Constant(v) => Schedule::constant(*v)?,
            CurveConfig::Piecewise { breakpoints, values } => {
                Schedule::piecewise(breakpoints.clone(), values.clone())?
            }
            CurveConfig::Polynomial { polynomial } => Schedule::polynomial(polynomial.clone())?,
        })
    }

    fn force_of_interest(&self) -> Result<ForceOfInterest> {
        Ok(match self {
            CurveConfig::Constant(v) => ForceOfInterest::constant(*v)?,
            CurveConfig::Piecewise { breakpoints, values } => {
                ForceOfInterest::piecewise(breakpoints.clone(), values.clone())?
            }
            CurveConfig::Polynomial { polynomial } => {
                let c = polynomial.clone();
                if c.iter().any(|v| !v.is_finite()) {
                    bail!("interest polynomial has non-finite coefficients");
                }
                ForceOfInterest::curve(move |t| c.iter().rev().fold(0.0, |acc, a| acc * t + a))
            }
        })
    }
}

impl MortalityConfig {
    pub fn model(&self, base: &Path) -> Result<SurvivalModel> {
        Ok(match self {
            MortalityConfig::ConstantForce { mu } => SurvivalModel::constant_force(*mu)?,
            MortalityConfig::DeMoivre { omega } => SurvivalModel::de_moivre(*omega)?,
            MortalityConfig::Gompertz { b, c } => SurvivalModel::gompertz(*b, *c)?,
            MortalityConfig::LifeTable { path, first_age, lx } => {
                let table = match (path, first_age, lx) {
                    (Some(p), None, None) => {
                        let p = base.join(p);
                        LifeTable::from_csv_path(&p).with_context(|| format!("life table {}", p.display()))?
                    }
                    (None, Some(age), Some(lx)) => LifeTable::new(*age, lx.clone())?,
                    _ => bail!("life_table needs either `path` or both `first_age` and `lx`"),
                };
                SurvivalModel::LifeTable(table)
            }
        })
    }
}

impl ValuationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if text.trim().is_empty() {
            bail!("{}: empty config", path.display());
        }
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Builds the request; `grid_step` from the command line wins over the
    /// config's.
    pub fn request(&self, base: &Path, grid_step: Option<f64>) -> Result<ValuationRequest> {
        self.build(&self.contract, base, grid_step)
    }

    /// The whole-life contract and a unit annuity on the same life.
    pub fn premium_requests(&self, base: &Path) -> Result<(ValuationRequest, ValuationRequest)> {
        if !matches!(self.contract, ContractConfig::WholeLife { .. }) {
            bail!("premium needs a whole_life contract");
        }
        let annuity = ContractConfig::Annuity { rate: unit() };
        Ok((self.request(base, None)?, self.build(&annuity, base, None)?))
    }

    fn build(&self, contract: &ContractConfig, base: &Path, grid_step: Option<f64>) -> Result<ValuationRequest> {
        let foi = self.interest.force_of_interest()?;
        let life = |what: &str| -> Result<(SurvivalModel, f64)> {
            let Some(m) = &self.mortality else { bail!("{what} needs a `mortality` section") };
            let Some(x) = self.issue_age else { bail!("{what} needs `issue_age`") };
            Ok((m.model(base)?, x))
        };
        let mut request = match contract {
            ContractConfig::WholeLife { benefit } => {
                let (model, x) = life("whole_life")?;
                ValuationRequest::whole_life(model, x, foi, benefit.schedule()?)
            }
            ContractConfig::Annuity { rate } => {
                let (model, x) = life("annuity")?;
                ValuationRequest::annuity(model, x, foi, rate.schedule()?)
            }
            ContractConfig::RiskFree { rate, terminal_value } => {
                let Some(n) = self.term else { bail!("risk_free needs `term`") };
                ValuationRequest::risk_free(rate.schedule()?, *terminal_value, foi, n)
            }
        };
        if let (Some(term), false) = (self.term, matches!(contract, ContractConfig::RiskFree { .. })) {
            request = request.with_term(term);
        }
        Ok(request.with_grid_step(grid_step.or(self.grid_step).unwrap_or(DEFAULT_GRID_STEP)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_mortality_kind() {
        for m in [
            r#"{"kind":"constant_fom","mu":0.04}"#,
            r#"{"kind":"de_moivre","omega":100}"#,
            r#"{"kind":"gompertz","b":0.0003,"c":1.07}"#,
            r#"{"kind":"life_table","first_age":98,"lx":[10,4,0]}"#,
        ] {
            let cfg: MortalityConfig = serde_json::from_str(m).unwrap();
            cfg.model(Path::new(".")).unwrap();
        }
        assert!(serde_json::from_str::<MortalityConfig>(r#"{"kind":"weibull","k":2}"#).is_err());
    }

    #[test]
    fn builds_a_whole_life_request() {
        let cfg: ValuationConfig = serde_json::from_str(
            r#"{"contract":{"kind":"whole_life","benefit":{"breakpoints":[5],"values":[1,2]}},
                "mortality":{"kind":"constant_fom","mu":0.04},"issue_age":40,"interest":0.06}"#,
        )
        .unwrap();
        let req = cfg.request(Path::new("."), Some(0.5)).unwrap();
        assert!(req.is_life_contingent());
        let no_age: ValuationConfig = serde_json::from_str(
            r#"{"contract":{"kind":"annuity"},"mortality":{"kind":"constant_fom","mu":0.04},"interest":0.06}"#,
        )
        .unwrap();
        assert!(no_age.request(Path::new("."), None).is_err());
    }
}
