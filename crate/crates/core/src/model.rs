//! SVIR state space, controlled vector field, forward integration, the
//! reproduction number and the two equilibria.
//!
//! Compartments are population fractions. The control `u` scales the
//! transmission rate linearly, `beta(u) = beta0 * (1 - u)`, and vaccinees are
//! infected at the leaked rate `eps * beta(u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvirError};
use crate::rk4;

/// Lower bound a state component may reach before integration is declared
/// unstable.
pub const TOL_STATE: f64 = 1e-9;
/// Maximum vector-field norm accepted at a reported equilibrium.
pub const TOL_EQ: f64 = 1e-8;

/// Epidemiological rates (per day) and the control cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub mu: f64,
    /// Vaccine leakage, `1 - effectiveness`.
    pub eps: f64,
    pub u_bar: f64,
}

impl ModelParams {
    /// Baseline calibrated rates with no demography, `eps = 0.078` and a full
    /// control cap.
    pub const fn baseline() -> Self {
        ModelParams {
            beta0: 0.22,
            alpha: 0.004,
            gamma: 0.095,
            gamma1: 0.071,
            mu: 0.0,
            eps: 0.078,
            u_bar: 1.0,
        }
    }

    /// Baseline rates with a daily birth-death rate of 0.005, which puts the
    /// reproduction number above one.
    pub const fn endemic() -> Self {
        let mut p = Self::baseline();
        p.mu = 0.005;
        p
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("beta0", self.beta0),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("gamma1", self.gamma1),
            ("mu", self.mu),
            ("eps", self.eps),
            ("u_bar", self.u_bar),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(SvirError::validation(name, "must be finite"));
            }
            if v < 0.0 {
                return Err(SvirError::validation(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.beta0 <= 0.0 {
            return Err(SvirError::validation("beta0", "must be > 0"));
        }
        if self.gamma <= 0.0 {
            return Err(SvirError::validation("gamma", "must be > 0"));
        }
        if self.eps > 1.0 {
            return Err(SvirError::validation(
                "eps",
                format!("must lie in [0, 1], got {}", self.eps),
            ));
        }
        if self.u_bar > 1.0 {
            return Err(SvirError::validation(
                "u_bar",
                format!("must lie in [0, 1], got {}", self.u_bar),
            ));
        }
        Ok(())
    }

    /// Controlled transmission rate `beta0 * (1 - u)`.
    #[inline]
    pub fn transmission(&self, u: f64) -> f64 {
        self.beta0 * (1.0 - u)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

/// One point `(S, V, I, R)` of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SvirState {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl SvirState {
    pub const fn new(s: f64, v: f64, i: f64, r: f64) -> Self {
        SvirState { s, v, i, r }
    }

    /// `(0.85, 0, 0.15, 0)`, the initial condition of the reference experiments.
    pub const fn baseline_initial() -> Self {
        SvirState::new(0.85, 0.0, 0.15, 0.0)
    }

    pub fn total(&self) -> f64 {
        self.s + self.v + self.i + self.r
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.v, self.i, self.r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        SvirState::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Checks finiteness and that no component is below `-TOL_STATE`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in ["S", "V", "I", "R"].iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(SvirError::validation(*name, "must be finite"));
            }
            if v < -TOL_STATE {
                return Err(SvirError::validation(*name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Uniform time grid with `n_steps + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() || !tf.is_finite() {
            return Err(SvirError::validation("horizon", "t0 and tf must be finite"));
        }
        if tf <= t0 {
            return Err(SvirError::validation(
                "horizon.tf",
                format!("must exceed t0 ({tf} <= {t0})"),
            ));
        }
        if n_steps == 0 {
            return Err(SvirError::validation("horizon.n_steps", "must be at least 1"));
        }
        Ok(TimeGrid { t0, tf, n_steps })
    }

    /// `[0, tf]` with step 0.1 day when `tf` is a multiple of it.
    pub fn with_default_step(tf: f64) -> Result<Self> {
        let n = (tf / 0.1).round().max(1.0) as usize;
        Self::new(0.0, tf, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, node: usize) -> f64 {
        if node == self.n_steps {
            self.tf
        } else {
            self.t0 + node as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|n| self.time(n))
    }

    /// Same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.t0, self.tf, self.n_steps * factor)
    }
}

/// Control values, one per grid node, each in `[0, u_bar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    values: Vec<f64>,
}

impl ControlPath {
    pub fn new(values: Vec<f64>, grid: &TimeGrid, u_bar: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SvirError::invalid(format!(
                "control path has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((n, u)) = values
            .iter()
            .enumerate()
            .find(|(_, u)| !u.is_finite() || **u < 0.0 || **u > u_bar)
        {
            return Err(SvirError::invalid(format!(
                "control value {u} at node {n} is outside [0, {u_bar}]"
            )));
        }
        Ok(ControlPath { values })
    }

    pub fn constant(grid: &TimeGrid, u: f64, u_bar: f64) -> Result<Self> {
        Self::new(vec![u; grid.len()], grid, u_bar)
    }

    pub fn zeros(grid: &TimeGrid) -> Self {
        ControlPath {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ControlPath { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub state: SvirState,
}

#[inline]
pub(crate) fn rhs(x: &[f64; 4], u: f64, p: &ModelParams) -> [f64; 4] {
    let [s, v, i, r] = *x;
    let b = p.transmission(u);
    let inf_s = b * s * i;
    let inf_v = p.eps * b * v * i;
    [
        -inf_s - p.alpha * s + p.mu - p.mu * s,
        p.alpha * s - inf_v - p.gamma1 * v - p.mu * v,
        inf_s + inf_v - p.gamma * i - p.mu * i,
        p.gamma1 * v + p.gamma * i - p.mu * r,
    ]
}

/// Time derivative of the state under control `u`.
pub fn controlled_rhs(state: &SvirState, u: f64, p: &ModelParams) -> Result<SvirState> {
    if !state.is_finite() {
        return Err(SvirError::invalid("state has a non-finite component"));
    }
    if !u.is_finite() || !(0.0..=1.0).contains(&u) {
        return Err(SvirError::invalid(format!("control {u} is outside [0, 1]")));
    }
    Ok(SvirState::from_array(rhs(&state.to_array(), u, p)))
}

/// Integrates the controlled system over `grid` with classical RK4. The
/// control is held at its left-node value over each step.
pub fn integrate_forward(
    p: &ModelParams,
    u_path: &ControlPath,
    x0: &SvirState,
    grid: &TimeGrid,
) -> Result<Vec<SvirState>> {
    if u_path.len() != grid.len() {
        return Err(SvirError::invalid(format!(
            "control path has {} values but the grid has {} nodes",
            u_path.len(),
            grid.len()
        )));
    }
    x0.validate()?;
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0.to_array();
    out.push(*x0);
    for (n, &u) in u_path.values()[..grid.n_steps()].iter().enumerate() {
        x = rk4::step(&x, h, |_, y| rhs(y, u, p));
        if let Some(c) = x.iter().position(|v| !v.is_finite() || *v < -TOL_STATE) {
            return Err(SvirError::Instability {
                step: n + 1,
                time: grid.time(n + 1),
                reason: format!("{} = {:e}", ["S", "V", "I", "R"][c], x[c]),
            });
        }
        out.push(SvirState::from_array(x));
    }
    Ok(out)
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(SvirError::Domain(format!("{name} must be positive")))
    }
}

/// Reproduction number of the vaccinated population,
/// `mu*beta0/((mu+alpha)(mu+gamma)) + alpha*mu*eps*beta0/((mu+gamma1)(mu+alpha)(mu+gamma))`.
pub fn reproduction_number(p: &ModelParams) -> Result<f64> {
    require_positive("mu + alpha", p.mu + p.alpha)?;
    require_positive("mu + gamma", p.mu + p.gamma)?;
    require_positive("mu + gamma1", p.mu + p.gamma1)?;
    let beta1 = p.eps * p.beta0;
    let direct = p.mu * p.beta0 / ((p.mu + p.alpha) * (p.mu + p.gamma));
    let leaked = p.alpha * p.mu * beta1 / ((p.mu + p.gamma1) * (p.mu + p.alpha) * (p.mu + p.gamma));
    Ok(direct + leaked)
}

pub fn disease_free_equilibrium(p: &ModelParams) -> Result<Equilibrium> {
    require_positive("mu + alpha", p.mu + p.alpha)?;
    require_positive("mu + gamma1", p.mu + p.gamma1)?;
    let s = p.mu / (p.mu + p.alpha);
    let v = p.alpha * p.mu / ((p.mu + p.gamma1) * (p.mu + p.alpha));
    Ok(Equilibrium {
        kind: EquilibriumKind::DiseaseFree,
        state: SvirState::new(s, v, 0.0, 1.0 - s - v),
    })
}

/// Susceptible and vaccinee steady-state levels for a given infected level.
fn steady_sv(p: &ModelParams, i: f64) -> (f64, f64) {
    let d_s = p.mu + p.alpha + p.beta0 * i;
    let s = p.mu / d_s;
    let v = p.alpha * p.mu / (d_s * (p.mu + p.gamma1 + p.eps * p.beta0 * i));
    (s, v)
}

/// Endemic equilibrium, present only when the reproduction number exceeds
/// one. `I+` is located by bisection of the per-capita infected balance,
/// which is strictly decreasing in `I`.
pub fn endemic_equilibrium(p: &ModelParams) -> Result<Option<Equilibrium>> {
    if reproduction_number(p)? <= 1.0 {
        return Ok(None);
    }
    let balance = |i: f64| {
        let (s, v) = steady_sv(p, i);
        p.beta0 * s + p.eps * p.beta0 * v - (p.gamma + p.mu)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if balance(hi) > 0.0 {
        return Err(SvirError::Numerical(
            "infected balance does not change sign on (0, 1]".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let i = 0.5 * (lo + hi);
    let (s, v) = steady_sv(p, i);
    let state = SvirState::new(s, v, i, 1.0 - s - v - i);
    let residual = SvirState::from_array(rhs(&state.to_array(), 0.0, p)).max_abs();
    if residual > TOL_EQ {
        return Err(SvirError::Numerical(format!("endemic root has residual {residual:e}")));
    }
    Ok(Some(Equilibrium {
        kind: EquilibriumKind::Endemic,
        state,
    }))
}
