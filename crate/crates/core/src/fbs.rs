//! Forward-backward sweep: alternate forward state integration, backward
//! costate integration and a relaxed pointwise control update until the
//! control, states and costates stop moving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{evaluate_costs, CostBreakdown, CostSpec, SocialCost};
use crate::error::{Result, SvirError};
use crate::model::{integrate_forward, ControlPath, ModelParams, SvirState, TimeGrid};
use crate::pmp::{integrate_backward, optimal_control, CostateState, SwitchingTolerances};
use crate::singular::switching_function;

#[derive(Debug, Clone, PartialEq)]
pub struct FbsConfig {
    pub max_iters: usize,
    /// Initial weight of the freshly mapped control in the update, in `(0, 1]`.
    pub relaxation: f64,
    /// Floor for the weight. The weight shrinks whenever the relative
    /// change grows from one sweep to the next; set equal to `relaxation`
    /// for a fixed weight.
    pub min_relaxation: f64,
    /// Factor applied to the weight when the change grows.
    pub relaxation_decay: f64,
    pub rel_tol: f64,
    pub grid: TimeGrid,
    /// Starting control; all zeros when absent.
    pub initial_control: Option<ControlPath>,
    pub switching: SwitchingTolerances,
}

impl FbsConfig {
    pub fn new(grid: TimeGrid) -> Self {
        FbsConfig {
            max_iters: 500,
            relaxation: 0.5,
            min_relaxation: 1e-5,
            relaxation_decay: 0.9,
            rel_tol: 1e-4,
            grid,
            initial_control: None,
            switching: SwitchingTolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(SvirError::validation("solver.max_iters", "must be at least 1"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(SvirError::validation(
                "solver.relaxation",
                format!("must lie in (0, 1], got {}", self.relaxation),
            ));
        }
        if !(self.min_relaxation > 0.0 && self.min_relaxation <= self.relaxation) {
            return Err(SvirError::validation(
                "solver.min_relaxation",
                format!("must lie in (0, relaxation], got {}", self.min_relaxation),
            ));
        }
        if !(self.relaxation_decay > 0.0 && self.relaxation_decay <= 1.0) {
            return Err(SvirError::validation(
                "solver.relaxation_decay",
                format!("must lie in (0, 1], got {}", self.relaxation_decay),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(SvirError::validation("solver.rel_tol", "must be > 0"));
        }
        if let Some(u) = &self.initial_control {
            if u.len() != self.grid.len() {
                return Err(SvirError::validation(
                    "solver.initial_control",
                    "length does not match the grid",
                ));
            }
        }
        Ok(())
    }
}

/// A discrete state/costate/control triple with its cost and solver
/// metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub grid: TimeGrid,
    pub states: Vec<SvirState>,
    /// Absent for single forward passes.
    pub costates: Option<Vec<CostateState>>,
    pub control: ControlPath,
    pub cost: CostBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub final_rel_change: f64,
    /// Relaxation weight in force at the last sweep.
    pub final_relaxation: f64,
}

fn rel_change<const N: usize>(new: impl Iterator<Item = [f64; N]>, old: impl Iterator<Item = [f64; N]>) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in new.zip(old) {
        for k in 0..N {
            diff = diff.max((a[k] - b[k]).abs());
            scale = scale.max(a[k].abs());
        }
    }
    diff / scale.max(1e-12)
}

fn control_change(new: &[f64], old: &[f64]) -> f64 {
    rel_change(new.iter().map(|&x| [x]), old.iter().map(|&x| [x]))
}

/// Pointwise control map of the family, evaluated node by node. `previous`
/// supplies the value held on degenerate singular plateaus.
pub fn map_control(
    p: &ModelParams,
    spec: &CostSpec,
    states: &[SvirState],
    costates: &[CostateState],
    previous: &ControlPath,
    tol: SwitchingTolerances,
) -> Result<Vec<f64>> {
    states
        .iter()
        .zip(costates)
        .zip(previous.values())
        .map(|((x, l), &prev)| optimal_control(x, l, p, spec, prev, tol))
        .collect()
}

fn relax(mapped: &[f64], old: &[f64], theta: f64, u_bar: f64) -> Vec<f64> {
    mapped
        .iter()
        .zip(old)
        .map(|(m, o)| (theta * m + (1.0 - theta) * o).clamp(0.0, u_bar))
        .collect()
}

/// Control produced by one more sweep from `path`, relaxed with the weight
/// the solve ended on.
pub fn sweep_once(p: &ModelParams, spec: &CostSpec, path: &SolutionPath, cfg: &FbsConfig) -> Result<ControlPath> {
    let costates = match &path.costates {
        Some(c) => c.clone(),
        None => integrate_backward(&path.states, &path.control, p, spec, &path.grid)?,
    };
    let mapped = map_control(p, spec, &path.states, &costates, &path.control, cfg.switching)?;
    Ok(ControlPath::from_raw(relax(
        &mapped,
        path.control.values(),
        path.final_relaxation,
        p.u_bar,
    )))
}

/// Solves the optimal control problem by forward-backward sweep. A run that
/// exhausts `max_iters` yields [`SvirError::NonConvergence`] carrying the
/// last iterate (with `converged == false`).
pub fn solve(p: &ModelParams, x0: &SvirState, spec: &CostSpec, cfg: &FbsConfig) -> Result<SolutionPath> {
    p.validate()?;
    x0.validate()?;
    spec.validate()?;
    cfg.validate()?;
    let grid = cfg.grid;
    let mut control = match &cfg.initial_control {
        Some(u) => ControlPath::new(u.values().to_vec(), &grid, p.u_bar)?,
        None => ControlPath::zeros(&grid),
    };
    let mut states = integrate_forward(p, &control, x0, &grid)?;
    let mut costates = integrate_backward(&states, &control, p, spec, &grid)?;
    let mut change = f64::INFINITY;
    let mut theta = cfg.relaxation;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mapped = map_control(p, spec, &states, &costates, &control, cfg.switching)?;
        let next = ControlPath::from_raw(relax(&mapped, control.values(), theta, p.u_bar));
        let next_states = integrate_forward(p, &next, x0, &grid)?;
        let next_costates = integrate_backward(&next_states, &next, p, spec, &grid)?;

        let du = control_change(next.values(), control.values());
        let dx = rel_change(
            next_states.iter().map(|x| x.to_array()),
            states.iter().map(|x| x.to_array()),
        );
        let dl = rel_change(
            next_costates.iter().map(|l| l.to_array()),
            costates.iter().map(|l| l.to_array()),
        );
        let previous_change = change;
        change = du.max(dx).max(dl);
        control = next;
        states = next_states;
        costates = next_costates;
        if change <= cfg.rel_tol {
            converged = true;
            break;
        }
        if change > previous_change {
            theta = (cfg.relaxation_decay * theta).max(cfg.min_relaxation);
        }
    }

    if converged {
        (control, states, costates) = polish(p, x0, spec, cfg, control, states, costates)?;
    }

    let cost = evaluate_costs(&states, &control, spec, p, &grid)?;
    let path = SolutionPath {
        grid,
        states,
        costates: Some(costates),
        control,
        cost,
        iterations,
        converged,
        final_rel_change: change,
        final_relaxation: theta,
    };
    if converged {
        Ok(path)
    } else {
        Err(SvirError::NonConvergence {
            iterations,
            rel_change: change,
            path: Box::new(path),
        })
    }
}

/// Relaxation leaves intermediate values wherever the switch moved during
/// the sweep. Nodes where the map saturates are snapped to the bound it
/// returns for as long as that does not raise the cost. For the linear
/// family an intermediate value left outside the switching band is then
/// replaced by the cheaper bound.
#[allow(clippy::type_complexity)]
fn polish(
    p: &ModelParams,
    x0: &SvirState,
    spec: &CostSpec,
    cfg: &FbsConfig,
    control: ControlPath,
    states: Vec<SvirState>,
    costates: Vec<CostateState>,
) -> Result<(ControlPath, Vec<SvirState>, Vec<CostateState>)> {
    let grid = cfg.grid;
    let run = |u: &ControlPath| -> Result<(Vec<SvirState>, Vec<CostateState>, f64)> {
        let x = integrate_forward(p, u, x0, &grid)?;
        let l = integrate_backward(&x, u, p, spec, &grid)?;
        let j = evaluate_costs(&x, u, spec, p, &grid)?.j_total;
        Ok((x, l, j))
    };
    let mut j = evaluate_costs(&states, &control, spec, p, &grid)?.j_total;
    let (mut u, mut x, mut l) = (control, states, costates);
    for _ in 0..POLISH_ITERS {
        let mapped = map_control(p, spec, &x, &l, &u, cfg.switching)?;
        let snapped: Vec<f64> = mapped
            .iter()
            .zip(u.values())
            .map(|(&m, &old)| if m == 0.0 || m == p.u_bar { m } else { old })
            .collect();
        if snapped == u.values() {
            break;
        }
        let next = ControlPath::from_raw(snapped);
        let (nx, nl, nj) = run(&next)?;
        if nj > j {
            break;
        }
        (u, x, l, j) = (next, nx, nl, nj);
    }

    if let SocialCost::Linear(a) = spec.social {
        for k in 0..u.values().len() {
            let v = u.values()[k];
            if v <= 0.0 || v >= p.u_bar || switching_function(&x[k], &l[k], p, a).abs() <= cfg.switching.switch {
                continue;
            }
            let mut best: Option<(ControlPath, Vec<SvirState>, Vec<CostateState>, f64)> = None;
            for bound in [0.0, p.u_bar] {
                let mut values = u.values().to_vec();
                values[k] = bound;
                let cand = ControlPath::from_raw(values);
                let (cx, cl, cj) = run(&cand)?;
                if best.as_ref().is_none_or(|b| cj < b.3) {
                    best = Some((cand, cx, cl, cj));
                }
            }
            (u, x, l, _) = best.expect("two candidates");
        }
    }
    Ok((u, x, l))
}

const POLISH_ITERS: usize = 50;

/// Single forward pass and cost evaluation under `u(t) = u_const`.
pub fn evaluate_constant_policy(
    p: &ModelParams,
    x0: &SvirState,
    spec: &CostSpec,
    grid: &TimeGrid,
    u_const: f64,
) -> Result<SolutionPath> {
    p.validate()?;
    spec.validate()?;
    let control = ControlPath::constant(grid, u_const, p.u_bar)?;
    let states = integrate_forward(p, &control, x0, grid)?;
    let cost = evaluate_costs(&states, &control, spec, p, grid)?;
    Ok(SolutionPath {
        grid: *grid,
        states,
        costates: None,
        control,
        cost,
        iterations: 0,
        converged: true,
        final_rel_change: 0.0,
        final_relaxation: 0.0,
    })
}

/// Result of the optimal solve for one sweep entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalEntry {
    pub cost: CostBreakdown,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub none: std::result::Result<CostBreakdown, String>,
    pub full: std::result::Result<CostBreakdown, String>,
    pub optimal: std::result::Result<OptimalEntry, String>,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        self.none.is_ok() && self.full.is_ok() && self.optimal.is_ok()
    }
}

/// Shape checks over the successful rows, in ascending parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub optimal_nondecreasing: bool,
    pub full_increasing: bool,
    pub optimal_below_constant_policies: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub family: String,
    pub rows: Vec<SweepRow>,
    pub diagnostics: SweepDiagnostics,
}

/// For each parameter value: the no-control and full-control policies and
/// the optimal solve. Failing entries are recorded in their row; the sweep
/// always runs to completion. Rows run in parallel and keep input order.
pub fn sweep_parameter(
    p: &ModelParams,
    x0: &SvirState,
    template: &CostSpec,
    cfg: &FbsConfig,
    values: &[f64],
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(SvirError::invalid("sweep needs at least one parameter value"));
    }
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&x| {
            let spec = CostSpec {
                social: template.social.with_parameter(x),
                ..*template
            };
            let none = evaluate_constant_policy(p, x0, &spec, &cfg.grid, 0.0)
                .map(|s| s.cost)
                .map_err(|e| e.to_string());
            let full = evaluate_constant_policy(p, x0, &spec, &cfg.grid, p.u_bar)
                .map(|s| s.cost)
                .map_err(|e| e.to_string());
            let optimal = match solve(p, x0, &spec, cfg) {
                Ok(s) => Ok(OptimalEntry {
                    cost: s.cost,
                    converged: true,
                    iterations: s.iterations,
                }),
                Err(SvirError::NonConvergence { path, .. }) => Ok(OptimalEntry {
                    cost: path.cost,
                    converged: false,
                    iterations: path.iterations,
                }),
                Err(e) => Err(e.to_string()),
            };
            SweepRow {
                param: x,
                none,
                full,
                optimal,
            }
        })
        .collect();

    let mut ok: Vec<&SweepRow> = rows.iter().filter(|r| r.succeeded()).collect();
    ok.sort_by(|a, b| a.param.total_cmp(&b.param));
    let opt = |r: &SweepRow| r.optimal.as_ref().map(|o| o.cost.j_total).unwrap_or(f64::NAN);
    let full = |r: &SweepRow| r.full.as_ref().map(|c| c.j_total).unwrap_or(f64::NAN);
    let none = |r: &SweepRow| r.none.as_ref().map(|c| c.j_total).unwrap_or(f64::NAN);
    let slack = |r: &SweepRow| cfg.rel_tol * none(r).max(full(r));
    let diagnostics = SweepDiagnostics {
        optimal_nondecreasing: ok.windows(2).all(|w| opt(w[1]) >= opt(w[0]) - slack(w[1])),
        full_increasing: ok.windows(2).all(|w| full(w[1]) > full(w[0])),
        optimal_below_constant_policies: ok.iter().all(|r| opt(r) <= none(r).min(full(r)) + slack(r)),
    };
    Ok(SweepTable {
        family: template.social.family_name().to_string(),
        rows,
        diagnostics,
    })
}
