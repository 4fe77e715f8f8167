//! Social-cost families, the running cost and the three-way decomposition
//! of the cost functional.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvirError};
use crate::model::{ControlPath, ModelParams, SvirState, TimeGrid};

/// Cost of social restrictions as a function of the control level.
/// Every family satisfies `c(0) = 0` and is strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "param", rename_all = "lowercase")]
pub enum SocialCost {
    /// `b * u^2`
    Quadratic(f64),
    /// `exp(k * u) - 1`
    Exponential(f64),
    /// `a * u`
    Linear(f64),
}

impl SocialCost {
    pub fn parameter(&self) -> f64 {
        match *self {
            SocialCost::Quadratic(x) | SocialCost::Exponential(x) | SocialCost::Linear(x) => x,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SocialCost::Quadratic(_) => "quadratic",
            SocialCost::Exponential(_) => "exponential",
            SocialCost::Linear(_) => "linear",
        }
    }

    /// Conventional symbol of the family parameter (`b`, `k` or `a`).
    pub fn parameter_symbol(&self) -> &'static str {
        match self {
            SocialCost::Quadratic(_) => "b",
            SocialCost::Exponential(_) => "k",
            SocialCost::Linear(_) => "a",
        }
    }

    /// Same family with a different parameter.
    pub fn with_parameter(&self, x: f64) -> Self {
        match self {
            SocialCost::Quadratic(_) => SocialCost::Quadratic(x),
            SocialCost::Exponential(_) => SocialCost::Exponential(x),
            SocialCost::Linear(_) => SocialCost::Linear(x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let x = self.parameter();
        if !x.is_finite() || x <= 0.0 {
            return Err(SvirError::validation(
                "cost.param",
                format!("{} parameter must be > 0, got {x}", self.family_name()),
            ));
        }
        Ok(())
    }

    /// Cost rate without range checks.
    #[inline]
    pub(crate) fn eval(&self, u: f64) -> f64 {
        match *self {
            SocialCost::Quadratic(b) => b * u * u,
            SocialCost::Exponential(k) => (k * u).exp_m1(),
            SocialCost::Linear(a) => a * u,
        }
    }

    #[inline]
    pub(crate) fn slope(&self, u: f64) -> f64 {
        match *self {
            SocialCost::Quadratic(b) => 2.0 * b * u,
            SocialCost::Exponential(k) => k * (k * u).exp(),
            SocialCost::Linear(a) => a,
        }
    }
}

pub(crate) fn check_control(u: f64) -> Result<()> {
    if u.is_finite() && (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(SvirError::invalid(format!("control {u} is outside [0, 1]")))
    }
}

pub fn social_cost(spec: &SocialCost, u: f64) -> Result<f64> {
    check_control(u)?;
    Ok(spec.eval(u))
}

pub fn marginal_social_cost(spec: &SocialCost, u: f64) -> Result<f64> {
    check_control(u)?;
    Ok(spec.slope(u))
}

/// Weights of the cost functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    /// Cost per unit of infected fraction per day.
    pub c1: f64,
    /// Cost per vaccinated susceptible per day.
    pub c2: f64,
    pub social: SocialCost,
}

impl CostSpec {
    /// Normalised reference weights `c1 = 1`, `c2 = 0.02`.
    pub fn normalized(social: SocialCost) -> Self {
        CostSpec {
            c1: 1.0,
            c2: 0.02,
            social,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cost.c1", self.c1), ("cost.c2", self.c2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SvirError::validation(name, format!("must be non-negative, got {v}")));
            }
        }
        self.social.validate()
    }
}

/// `c(u) + c1*I + c2*alpha*S`.
pub fn running_cost(state: &SvirState, u: f64, spec: &CostSpec, alpha: f64) -> Result<f64> {
    check_control(u)?;
    Ok(spec.social.eval(u) + spec.c1 * state.i + spec.c2 * alpha * state.s)
}

/// Fractions of the total attributable to each term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostShares {
    pub social: f64,
    pub infection: f64,
    pub vaccination: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub j_social: f64,
    pub j_infection: f64,
    pub j_vaccination: f64,
    pub j_total: f64,
}

impl CostBreakdown {
    pub fn from_terms(j_social: f64, j_infection: f64, j_vaccination: f64) -> Self {
        CostBreakdown {
            j_social,
            j_infection,
            j_vaccination,
            j_total: j_social + j_infection + j_vaccination,
        }
    }

    /// Zero shares when the total vanishes.
    pub fn shares(&self) -> CostShares {
        if self.j_total > 0.0 {
            CostShares {
                social: self.j_social / self.j_total,
                infection: self.j_infection / self.j_total,
                vaccination: self.j_vaccination / self.j_total,
            }
        } else {
            CostShares {
                social: 0.0,
                infection: 0.0,
                vaccination: 0.0,
            }
        }
    }
}

/// Composite trapezoid rule on a uniform grid.
pub(crate) fn trapezoid(values: impl ExactSizeIterator<Item = f64>, h: f64) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for (k, v) in values.enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        sum += w * v;
    }
    h * sum
}

/// Integrates each term of the cost functional separately along a
/// trajectory.
pub fn evaluate_costs(
    states: &[SvirState],
    u_path: &ControlPath,
    spec: &CostSpec,
    p: &ModelParams,
    grid: &TimeGrid,
) -> Result<CostBreakdown> {
    if states.len() != grid.len() || u_path.len() != grid.len() {
        return Err(SvirError::invalid(format!(
            "trajectory ({}) and control ({}) must both have {} nodes",
            states.len(),
            u_path.len(),
            grid.len()
        )));
    }
    let h = grid.step();
    let us = u_path.values();
    let j_social = trapezoid(us.iter().map(|&u| spec.social.eval(u)), h);
    let j_infection = trapezoid(states.iter().map(|x| spec.c1 * x.i), h);
    let j_vaccination = trapezoid(states.iter().map(|x| spec.c2 * p.alpha * x.s), h);
    Ok(CostBreakdown::from_terms(j_social, j_infection, j_vaccination))
}
