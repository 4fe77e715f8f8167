//! Switching function of the linear-cost problem and its time derivatives.
//!
//! For `c(u) = a u` the Hamiltonian is affine in `u` and
//!
//! ```text
//! phi = dH/du = a - beta0 I [S (l3 - l1) + eps V (l3 - l2)].
//! ```
//!
//! Along the coupled state/costate flow `d(phi)/dt` does not depend on `u`;
//! the second derivative is affine in `u`, `A1 u - A2`, so a singular arc
//! (`phi = 0` on an interval) carries the control `A2 / A1`.
//!
//! [`singular_control_coefficients`] obtains `A1` and `A2` by applying the
//! exact gradient of `d(phi)/dt` to the vector field at `u = 0` and `u = 1`.
//! The [`expanded`] module keeps a hand-expanded closed form of the same
//! quantities that disagrees with the flow (see the tests there).

use crate::cost::{CostSpec, SocialCost};
use crate::error::{Result, SvirError};
use crate::model::{self, ModelParams, SvirState};
use crate::pmp::{costate_rhs_raw, CostateState};

/// `dH/du` for the linear social cost `a u`.
pub fn switching_function(state: &SvirState, costate: &CostateState, p: &ModelParams, a: f64) -> f64 {
    a - p.beta0 * state.i * costate.infection_premium(state, p.eps)
}

struct RateTerms {
    /// Coefficient of `S I` in `d(phi)/dt / beta0`.
    p_si: f64,
    /// Coefficient of `V I`.
    q_vi: f64,
    /// Coefficient of `I`.
    m_i: f64,
}

fn rate_terms(l: &CostateState, p: &ModelParams, spec: &CostSpec) -> RateTerms {
    let (l1, l2, l3) = (l.lambda1, l.lambda2, l.lambda3);
    let gp = p.gamma + p.mu;
    let g1p = p.gamma1 + p.mu;
    RateTerms {
        p_si: spec.c1 - p.alpha * spec.c2 - gp * l1 - p.alpha * l2
            + (p.alpha + p.mu) * l3
            + p.alpha * p.eps * (l2 - l3),
        q_vi: p.eps * (spec.c1 - gp * l2 + g1p * l3),
        m_i: p.mu * (l1 - l3),
    }
}

/// `d(phi)/dt` along the state/costate flow. Independent of the control.
pub fn switching_rate(state: &SvirState, costate: &CostateState, p: &ModelParams, spec: &CostSpec) -> f64 {
    let t = rate_terms(costate, p, spec);
    let (s, v, i) = (state.s, state.v, state.i);
    p.beta0 * (t.p_si * s * i + t.q_vi * v * i + t.m_i * i)
}

/// Gradient of `d(phi)/dt / beta0` with respect to `(S, V, I, l1, l2, l3)`.
fn rate_gradient(state: &SvirState, l: &CostateState, p: &ModelParams, spec: &CostSpec) -> [f64; 6] {
    let t = rate_terms(l, p, spec);
    let (s, v, i) = (state.s, state.v, state.i);
    let gp = p.gamma + p.mu;
    let g1p = p.gamma1 + p.mu;
    let ae = p.alpha * p.eps;
    [
        t.p_si * i,
        t.q_vi * i,
        t.p_si * s + t.m_i + t.q_vi * v,
        (-gp * s + p.mu) * i,
        (ae - p.alpha) * s * i - p.eps * gp * v * i,
        (p.alpha + p.mu - ae) * s * i - p.mu * i + p.eps * g1p * v * i,
    ]
}

fn flow(state: &SvirState, l: &CostateState, u: f64, p: &ModelParams, spec: &CostSpec) -> [f64; 6] {
    let fx = model::rhs(&state.to_array(), u, p);
    let fl = costate_rhs_raw(&[state.s, state.v, state.i], &l.to_array(), u, p, spec);
    [fx[0], fx[1], fx[2], fl[0], fl[1], fl[2]]
}

/// `(A1, A2)` with `d^2(phi)/dt^2 = A1 u - A2`.
pub fn singular_control_coefficients(
    state: &SvirState,
    costate: &CostateState,
    p: &ModelParams,
    spec: &CostSpec,
) -> Result<(f64, f64)> {
    if !matches!(spec.social, SocialCost::Linear(_)) {
        return Err(SvirError::invalid(
            "singular arcs only arise for the linear social cost",
        ));
    }
    let g = rate_gradient(state, costate, p, spec);
    let f0 = flow(state, costate, 0.0, p, spec);
    let f1 = flow(state, costate, 1.0, p, spec);
    let dot = |f: &[f64; 6], w: &[f64; 6]| f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let base = dot(&g, &f0);
    let slope = dot(&g, &f1) - base;
    Ok((p.beta0 * slope, -p.beta0 * base))
}

/// Hand-expanded closed forms, term by term with `beta` standing for
/// `beta0`. Kept only for comparison against the flow.
pub mod expanded {
    use super::*;

    /// Expanded `d(phi)/dt`.
    pub fn switching_rate(state: &SvirState, l: &CostateState, p: &ModelParams, spec: &CostSpec) -> f64 {
        let (s, v, i) = (state.s, state.v, state.i);
        let (l1, l2, l3) = (l.lambda1, l.lambda2, l.lambda3);
        let (al, g, g1, mu, e) = (p.alpha, p.gamma, p.gamma1, p.mu, p.eps);
        let (c1, c2) = (spec.c1, spec.c2);
        (-(g + mu) * l1 + (al + mu) * l3 - al * l2 + (c1 - al * c2)) * s * i
            + mu * (l1 - l3) * i
            + e * (-(g + mu) * l2 + (g1 + mu) * l3 + c1) * v * i
    }

    /// Expanded `(A1, A2)`.
    #[allow(clippy::too_many_lines)]
    pub fn coefficients(state: &SvirState, l: &CostateState, p: &ModelParams, spec: &CostSpec) -> (f64, f64) {
        let (s, v, i) = (state.s, state.v, state.i);
        let (l1, l2, l3) = (l.lambda1, l.lambda2, l.lambda3);
        let (b, al, g, g1, mu, e) = (p.beta0, p.alpha, p.gamma, p.gamma1, p.mu, p.eps);
        let (c1, c2) = (spec.c1, spec.c2);
        let (s2, v2, e2, mu2) = (s * s, v * v, e * e, mu * mu);

        let a1 = i
            * (-al * l1 * mu + 2.0 * al * l2 * mu - al * l3 * mu
                + 2.0 * g * l1 * mu
                + c1 * (s * (-al * (e - 2.0) + g + b * i + 3.0 * mu - 2.0 * b * e * v)
                    + e * v * (g + 2.0 * g1 + b * e * i + 3.0 * mu)
                    - 2.0 * mu
                    - b * s2
                    - b * e2 * v2)
                + al * c2 * (-s * (al + 2.0 * g + b * i + 3.0 * mu - b * e * v) + 2.0 * mu + b * s2)
                - b * i * l1 * mu
                + b * i * l3 * mu
                + al * b * e * i * l2 * s
                - al * b * e * i * l3 * s
                - al * b * i * l2 * s
                + al * b * i * l3 * s
                - b * g * i * l3 * s
                - b * g * e2 * i * l3 * v
                + b * g1 * e2 * i * l3 * v
                + l1 * mu2
                - l3 * mu2
                - al * b * l1 * s2
                + al * b * l2 * s2
                + b * g * l1 * s2
                - al * al * l2 * s
                + al * al * l3 * s
                + al * g * e * l2 * s
                - 2.0 * al * g * l2 * s
                - al * g1 * e * l3 * s
                + al * g1 * l2 * s
                + al * e * l2 * mu * s
                - al * e * l3 * mu * s
                - 2.0 * al * l2 * mu * s
                + 2.0 * al * l3 * mu * s
                - g * g * l1 * s
                - 2.0 * g * l1 * mu * s
                - l1 * mu2 * s
                + l3 * mu2 * s
                + b * g * e * l1 * s * v
                + b * g * e * l2 * s * v
                - b * g1 * e * l1 * s * v
                + b * g * e2 * l2 * v2
                - b * g1 * e2 * l2 * v2
                - b * e * l1 * mu * v
                - g * g * e * l2 * v
                - 2.0 * g * e * l2 * mu * v
                + g1 * g1 * e * l3 * v
                + 2.0 * l1 * e * l3 * mu * v
                - e * l2 * mu2 * v
                + e * l3 * mu2 * v
                + e * b * l2 * mu * v);

        let a2 = i
            * (b * c1 * (i * (s + e2 * v) - (s + e * v) * (s + e * v)) + al * b * c2 * s * (-i + s + e * v)
                - b * i * l1 * mu
                + b * i * l3 * mu
                + al * b * e * i * l2 * s
                - al * b * e * i * l3 * s
                - al * b * i * l2 * s
                + al * b * i * l3 * s
                - b * g * i * l3 * s
                - b * g * e2 * i * l3 * v
                + b * g1 * e2 * i * l3 * v
                - al * b * l1 * s2
                + al * b * l2 * s2
                + b * g * l1 * s2
                + b * g * e * l1 * s * v
                + b * g * e * l2 * s * v
                - b * g1 * e * l1 * s * v
                + b * g * e2 * l2 * v2
                - b * g1 * e2 * l2 * v2
                - b * e * l1 * mu * v
                + e * b * l2 * mu * v);
        (a1, a2)
    }
}
