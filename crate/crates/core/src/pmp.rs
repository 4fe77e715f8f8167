//! Pontryagin conditions for the controlled SVIR problem: Hamiltonian,
//! costate dynamics with zero terminal data, and the pointwise minimisers of
//! the Hamiltonian for each social-cost family.

use serde::{Deserialize, Serialize};

use crate::cost::{check_control, CostSpec, SocialCost};
use crate::error::{Result, SvirError};
use crate::model::{self, ControlPath, ModelParams, SvirState, TimeGrid};
use crate::rk4::{self, Stage};
use crate::singular;

/// Shadow prices of `S`, `V` and `I`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostateState {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl CostateState {
    pub const ZERO: CostateState = CostateState::new(0.0, 0.0, 0.0);

    pub const fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        CostateState {
            lambda1,
            lambda2,
            lambda3,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        CostateState::new(a[0], a[1], a[2])
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `S (lambda3 - lambda1) + eps V (lambda3 - lambda2)`: the marginal cost
    /// of one more infection, weighted by who gets infected.
    pub fn infection_premium(&self, state: &SvirState, eps: f64) -> f64 {
        state.s * (self.lambda3 - self.lambda1) + eps * state.v * (self.lambda3 - self.lambda2)
    }
}

#[inline]
pub(crate) fn hamiltonian_unchecked(x: &SvirState, l: &CostateState, u: f64, p: &ModelParams, spec: &CostSpec) -> f64 {
    let f = model::rhs(&x.to_array(), u, p);
    spec.social.eval(u)
        + spec.c1 * x.i
        + spec.c2 * p.alpha * x.s
        + l.lambda1 * f[0]
        + l.lambda2 * f[1]
        + l.lambda3 * f[2]
}

pub fn hamiltonian(state: &SvirState, costate: &CostateState, u: f64, p: &ModelParams, spec: &CostSpec) -> Result<f64> {
    check_control(u)?;
    Ok(hamiltonian_unchecked(state, costate, u, p, spec))
}

#[inline]
pub(crate) fn costate_rhs_raw(x: &[f64; 3], l: &[f64; 3], u: f64, p: &ModelParams, spec: &CostSpec) -> [f64; 3] {
    let [s, v, i] = *x;
    let [l1, l2, l3] = *l;
    let b = p.transmission(u);
    let eb = p.eps * b;
    [
        (b * i + p.alpha + p.mu) * l1 - p.alpha * l2 - b * i * l3 - spec.c2 * p.alpha,
        (eb * i + p.gamma1 + p.mu) * l2 - eb * i * l3,
        b * s * l1 + eb * v * l2 - (b * s + eb * v - p.gamma - p.mu) * l3 - spec.c1,
    ]
}

/// `-dH/d(S, V, I)`.
pub fn costate_rhs(
    state: &SvirState,
    costate: &CostateState,
    u: f64,
    p: &ModelParams,
    spec: &CostSpec,
) -> Result<CostateState> {
    check_control(u)?;
    Ok(CostateState::from_array(costate_rhs_raw(
        &[state.s, state.v, state.i],
        &costate.to_array(),
        u,
        p,
        spec,
    )))
}

/// Integrates the costate system backwards from zero terminal values. State
/// values at the RK midpoint stages are the average of the bracketing nodes;
/// the control is the left-node value of each step, as in the forward pass.
pub fn integrate_backward(
    states: &[SvirState],
    u_path: &ControlPath,
    p: &ModelParams,
    spec: &CostSpec,
    grid: &TimeGrid,
) -> Result<Vec<CostateState>> {
    if states.len() != grid.len() || u_path.len() != grid.len() {
        return Err(SvirError::invalid(format!(
            "trajectory ({}) and control ({}) must both have {} nodes",
            states.len(),
            u_path.len(),
            grid.len()
        )));
    }
    let h = grid.step();
    let n = grid.n_steps();
    let us = u_path.values();
    let mut out = vec![CostateState::ZERO; grid.len()];
    let mut l = [0.0; 3];
    let svi = |x: &SvirState| [x.s, x.v, x.i];
    for k in (0..n).rev() {
        let right = svi(&states[k + 1]);
        let left = svi(&states[k]);
        let mid = [
            0.5 * (left[0] + right[0]),
            0.5 * (left[1] + right[1]),
            0.5 * (left[2] + right[2]),
        ];
        let u = us[k];
        l = rk4::step(&l, -h, |stage, y| {
            let x = match stage {
                Stage::Start => &right,
                Stage::Mid => &mid,
                Stage::End => &left,
            };
            costate_rhs_raw(x, y, u, p, spec)
        });
        if l.iter().any(|v| !v.is_finite()) {
            return Err(SvirError::Instability {
                step: k,
                time: grid.time(k),
                reason: "non-finite costate".into(),
            });
        }
        out[k] = CostateState::from_array(l);
    }
    Ok(out)
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SvirError::invalid(format!("{name} must be > 0, got {v}")))
    }
}

/// Minimiser of the Hamiltonian for `c(u) = b u^2`:
/// `clamp(beta0 I K / (2b), 0, u_bar)`.
pub fn optimal_control_quadratic(state: &SvirState, costate: &CostateState, p: &ModelParams, b: f64) -> Result<f64> {
    require_positive("b", b)?;
    let raw = p.beta0 * state.i * costate.infection_premium(state, p.eps) / (2.0 * b);
    Ok(raw.clamp(0.0, p.u_bar))
}

/// Minimiser of the Hamiltonian for `c(u) = exp(k u) - 1`:
/// `clamp(ln(beta0 I K / k) / k, 0, u_bar)`, and 0 whenever the logarithm's
/// argument is not positive.
pub fn optimal_control_exponential(state: &SvirState, costate: &CostateState, p: &ModelParams, k: f64) -> Result<f64> {
    require_positive("k", k)?;
    let premium = costate.infection_premium(state, p.eps);
    let arg = p.beta0 * state.i * premium / k;
    if premium <= 0.0 || arg <= 0.0 {
        return Ok(0.0);
    }
    Ok((arg.ln() / k).clamp(0.0, p.u_bar))
}

/// Tolerances for classifying the sign of the switching function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingTolerances {
    pub switch: f64,
    pub singular: f64,
}

impl Default for SwitchingTolerances {
    fn default() -> Self {
        SwitchingTolerances {
            switch: 1e-6,
            singular: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Upper,
    Singular,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingDiagnostics {
    /// `dH/du` at the point.
    pub phi: f64,
    pub a1: f64,
    pub a2: f64,
    pub regime: Regime,
}

/// Bang-bang/singular control for `c(u) = a u`. `previous` is returned on a
/// singular plateau where `A1` vanishes and the singular formula is undefined.
pub fn optimal_control_linear(
    state: &SvirState,
    costate: &CostateState,
    p: &ModelParams,
    spec: &CostSpec,
    previous: f64,
    tol: SwitchingTolerances,
) -> Result<(f64, SwitchingDiagnostics)> {
    let SocialCost::Linear(a) = spec.social else {
        return Err(SvirError::invalid("linear control map needs a linear social cost"));
    };
    require_positive("a", a)?;
    let phi = singular::switching_function(state, costate, p, a);
    let (a1, a2) = if phi.abs() <= tol.switch {
        singular::singular_control_coefficients(state, costate, p, spec)?
    } else {
        (0.0, 0.0)
    };
    let (u, regime) = if phi < -tol.switch {
        (p.u_bar, Regime::Upper)
    } else if phi > tol.switch {
        (0.0, Regime::Lower)
    } else if a1.abs() > tol.singular {
        ((a2 / a1).clamp(0.0, p.u_bar), Regime::Singular)
    } else {
        (previous.clamp(0.0, p.u_bar), Regime::Singular)
    };
    Ok((u, SwitchingDiagnostics { phi, a1, a2, regime }))
}

/// Dispatches to the family's pointwise control map.
pub fn optimal_control(
    state: &SvirState,
    costate: &CostateState,
    p: &ModelParams,
    spec: &CostSpec,
    previous: f64,
    tol: SwitchingTolerances,
) -> Result<f64> {
    match spec.social {
        SocialCost::Quadratic(b) => optimal_control_quadratic(state, costate, p, b),
        SocialCost::Exponential(k) => optimal_control_exponential(state, costate, p, k),
        SocialCost::Linear(_) => optimal_control_linear(state, costate, p, spec, previous, tol).map(|r| r.0),
    }
}
