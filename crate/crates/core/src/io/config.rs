//! TOML scenario files. Every key is optional; omitted keys take the
//! reference scenario values. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::cost::{CostSpec, SocialCost};
use crate::error::{Result, SvirError};
use crate::fbs::FbsConfig;
use crate::model::{ModelParams, SvirState, TimeGrid};
use crate::pmp::SwitchingTolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub beta0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub mu: f64,
    pub eps: f64,
    pub u_bar: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::baseline();
        ModelSection {
            beta0: p.beta0,
            alpha: p.alpha,
            gamma: p.gamma,
            gamma1: p.gamma1,
            mu: p.mu,
            eps: p.eps,
            u_bar: p.u_bar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let x = SvirState::baseline_initial();
        InitialSection {
            s: x.s,
            v: x.v,
            i: x.i,
            r: x.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonSection {
    pub t0: f64,
    pub tf: f64,
    /// Defaults to a step of 0.1 days.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

impl Default for HorizonSection {
    fn default() -> Self {
        HorizonSection {
            t0: 0.0,
            tf: 240.0,
            n_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub family: String,
    /// `b`, `k` or `a`; defaults to 0.02, 0.06 or 0.05 by family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection {
            family: "quadratic".to_string(),
            param: None,
            c1: 1.0,
            c2: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub relaxation: f64,
    pub min_relaxation: f64,
    pub relaxation_decay: f64,
    pub rel_tol: f64,
    pub tol_switch: f64,
    pub tol_singular: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = FbsConfig::new(TimeGrid::new(0.0, 1.0, 1).expect("unit grid"));
        SolverSection {
            max_iters: c.max_iters,
            relaxation: c.relaxation,
            min_relaxation: c.min_relaxation,
            relaxation_decay: c.relaxation_decay,
            rel_tol: c.rel_tol,
            tol_switch: c.switching.switch,
            tol_singular: c.switching.singular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    /// `none`, `full`, `constant` or `optimal`.
    pub kind: String,
    /// Level for `constant`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection {
            kind: "optimal".to_string(),
            u: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Family parameter symbol; checked against the cost family when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    pub values: Vec<f64>,
}

/// The file as written, with defaults filled in. Serialises back to an
/// equivalent TOML document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub initial: InitialSection,
    pub horizon: HorizonSection,
    pub cost: CostSection,
    pub solver: SolverSection,
    pub strategy: StrategySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    None,
    Full,
    Constant { u: f64 },
    Optimal,
}

impl Strategy {
    pub fn parse(kind: &str, u: Option<f64>) -> Result<Strategy> {
        let s = match kind {
            "none" => Strategy::None,
            "full" => Strategy::Full,
            "optimal" => Strategy::Optimal,
            "constant" => Strategy::Constant {
                u: u.ok_or_else(|| SvirError::validation("strategy.u", "required for kind = \"constant\""))?,
            },
            other => {
                return Err(SvirError::validation(
                    "strategy.kind",
                    format!("unknown strategy {other:?} (expected none, full, constant or optimal)"),
                ))
            }
        };
        if u.is_some() && !matches!(s, Strategy::Constant { .. }) {
            return Err(SvirError::validation(
                "strategy.u",
                "only allowed with kind = \"constant\"",
            ));
        }
        Ok(s)
    }
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub file: ConfigFile,
    pub params: ModelParams,
    pub initial: SvirState,
    pub grid: TimeGrid,
    pub cost: CostSpec,
    pub solver: FbsConfig,
    pub strategy: Strategy,
    pub sweep_values: Option<Vec<f64>>,
}

fn prefixed(section: &str, e: SvirError) -> SvirError {
    match e {
        SvirError::Validation { field, message } if !field.contains('.') => SvirError::Validation {
            field: format!("{section}.{field}"),
            message,
        },
        other => other,
    }
}

pub fn family_from_name(family: &str, param: Option<f64>) -> Result<SocialCost> {
    let social = match family {
        "quadratic" => SocialCost::Quadratic(param.unwrap_or(0.02)),
        "exponential" => SocialCost::Exponential(param.unwrap_or(0.06)),
        "linear" => SocialCost::Linear(param.unwrap_or(0.05)),
        other => {
            return Err(SvirError::validation(
                "cost.family",
                format!("unknown cost family {other:?} (expected quadratic, exponential or linear)"),
            ))
        }
    };
    social.validate()?;
    Ok(social)
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| SvirError::validation("config", e.to_string().trim_end().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn resolve(mut self) -> Result<ScenarioConfig> {
        let m = &self.model;
        let params = ModelParams {
            beta0: m.beta0,
            alpha: m.alpha,
            gamma: m.gamma,
            gamma1: m.gamma1,
            mu: m.mu,
            eps: m.eps,
            u_bar: m.u_bar,
        };
        params.validate().map_err(|e| prefixed("model", e))?;

        let x = &self.initial;
        let initial = SvirState::new(x.s, x.v, x.i, x.r);
        initial.validate().map_err(|e| prefixed("initial", e))?;

        let h = &self.horizon;
        if !(h.t0.is_finite() && h.tf.is_finite()) {
            return Err(SvirError::validation("horizon", "t0 and tf must be finite"));
        }
        if h.tf <= h.t0 {
            return Err(SvirError::validation(
                "horizon.tf",
                format!("must exceed t0 ({} <= {})", h.tf, h.t0),
            ));
        }
        let n_steps = match h.n_steps {
            Some(n) => n,
            None => {
                let n = ((h.tf - h.t0) / 0.1).round();
                if n > 1e8 {
                    return Err(SvirError::validation(
                        "horizon.tf",
                        "horizon too long for the default step",
                    ));
                }
                (n as usize).max(1)
            }
        };
        if n_steps > 100_000_000 {
            return Err(SvirError::validation("horizon.n_steps", "at most 1e8 steps"));
        }
        let grid = TimeGrid::new(h.t0, h.tf, n_steps)?;

        let social = family_from_name(&self.cost.family, self.cost.param)?;
        self.cost.param = Some(social.parameter());
        let cost = CostSpec {
            c1: self.cost.c1,
            c2: self.cost.c2,
            social,
        };
        cost.validate()?;

        let s = &self.solver;
        let solver = FbsConfig {
            max_iters: s.max_iters,
            relaxation: s.relaxation,
            min_relaxation: s.min_relaxation,
            relaxation_decay: s.relaxation_decay,
            rel_tol: s.rel_tol,
            grid,
            initial_control: None,
            switching: SwitchingTolerances {
                switch: s.tol_switch,
                singular: s.tol_singular,
            },
        };
        solver.validate()?;
        for (name, v) in [
            ("solver.tol_switch", s.tol_switch),
            ("solver.tol_singular", s.tol_singular),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SvirError::validation(name, format!("must be non-negative, got {v}")));
            }
        }

        let strategy = Strategy::parse(&self.strategy.kind, self.strategy.u)?;
        if let Strategy::Constant { u } = strategy {
            if !(u.is_finite() && (0.0..=params.u_bar).contains(&u)) {
                return Err(SvirError::validation(
                    "strategy.u",
                    format!("must lie in [0, u_bar = {}], got {u}", params.u_bar),
                ));
            }
        }

        let sweep_values = match &self.sweep {
            None => None,
            Some(sw) => {
                if let Some(sym) = &sw.param {
                    if sym != social.parameter_symbol() {
                        return Err(SvirError::validation(
                            "sweep.param",
                            format!(
                                "{sym:?} does not match the {} family parameter {:?}",
                                social.family_name(),
                                social.parameter_symbol()
                            ),
                        ));
                    }
                }
                if sw.values.is_empty() {
                    return Err(SvirError::validation("sweep.values", "must not be empty"));
                }
                for &v in &sw.values {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(SvirError::validation("sweep.values", format!("must be > 0, got {v}")));
                    }
                }
                Some(sw.values.clone())
            }
        };

        Ok(ScenarioConfig {
            file: self,
            params,
            initial,
            grid,
            cost,
            solver,
            strategy,
            sweep_values,
        })
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig> {
        ConfigFile::from_toml_str(text)?.resolve()
    }

    pub fn load(path: &std::path::Path) -> Result<ScenarioConfig> {
        Self::from_toml_str(&super::read_file(path)?)
    }
}
